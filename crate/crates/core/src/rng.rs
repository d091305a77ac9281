//! Seeded random streams.
//!
//! Monte-Carlo work is cut into fixed-size chunks and every chunk draws from
//! its own ChaCha stream, so results depend on the seed only and not on how
//! many workers happen to run the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Number of Monte-Carlo trials per independently seeded chunk.
pub const CHUNK: usize = 1 << 14;

/// Stream `index` of the family identified by `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Splits `total` into `(chunk_index, len)` pieces of at most [`CHUNK`].
pub fn chunks(total: usize) -> impl Iterator<Item = (u64, usize)> {
    (0..total.div_ceil(CHUNK)).map(move |i| {
        let start = i * CHUNK;
        (i as u64, CHUNK.min(total - start))
    })
}
