//! Positive root of a convex function that starts negative just right of 0.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct BracketOptions {
    /// First upper end tried; doubled until the sign changes.
    pub initial_hi: f64,
    /// Expansion gives up once the upper end would exceed this.
    pub cap: f64,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for BracketOptions {
    fn default() -> Self {
        Self {
            initial_hi: 1.0,
            cap: 64.0,
            f_tol: 1e-12,
            x_tol: 1e-12,
        }
    }
}

/// Final bracket and the point returned from it.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Finds the root of `f` in `(0, cap]`, assuming `f < 0` on some `(0, eps)`.
///
/// The bracket `(lo, hi]` starts at `(0, initial_hi]`, moves right by
/// doubling until `f(hi) > 0`, then is bisected. `x = 0` is never returned.
pub fn positive_root<F: Fn(f64) -> f64>(f: F, opts: BracketOptions) -> Result<Root> {
    let mut lo = 0.0;
    let mut hi = opts.initial_hi;
    loop {
        let fh = f(hi);
        if fh.is_nan() {
            return Err(Error::NoRoot { cap: hi });
        }
        if fh > 0.0 {
            break;
        }
        if fh == 0.0 {
            return Ok(Root { x: hi, fx: 0.0, lo: hi, hi });
        }
        if hi * 2.0 > opts.cap {
            return Err(Error::NoRoot { cap: opts.cap });
        }
        lo = hi;
        hi *= 2.0;
    }

    let mut best = Root { x: hi, fx: f(hi), lo, hi };
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm.abs() < best.fx.abs() {
            best.x = mid;
            best.fx = fm;
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= opts.x_tol && fm.abs() <= opts.f_tol {
            best = Root { x: mid, fx: fm, lo, hi };
            return Ok(best);
        }
    }
    best.lo = lo;
    best.hi = hi;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_root_inside_first_bracket() {
        let r = positive_root(|x| x * x - 0.25 * x, BracketOptions::default()).unwrap();
        assert!((r.x - 0.25).abs() < 1e-12);
    }

    #[test]
    fn expands_bracket() {
        let r = positive_root(|x| x * (x - 10.0), BracketOptions::default()).unwrap();
        assert!((r.x - 10.0).abs() < 1e-11);
        assert!(r.lo <= r.x && r.x <= r.hi);
    }

    #[test]
    fn reports_missing_root() {
        let e = positive_root(|x| x * (x - 100.0), BracketOptions::default()).unwrap_err();
        assert_eq!(e, Error::NoRoot { cap: 64.0 });
    }

    #[test]
    fn tiny_root_near_origin() {
        let r = positive_root(|x| x * (x - 1e-7), BracketOptions::default()).unwrap();
        assert!((r.x - 1e-7).abs() < 1e-12);
    }
}
