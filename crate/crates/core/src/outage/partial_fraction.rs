//! Partial-fraction inversion of the Laplace transform of
//! `Z = K Y - X_0`, where `X_0 ~ Exp(a_0)` and `Y` is a sum of independent
//! `Exp(a_i)` interference powers.
//!
//! ```text
//! Z(s) = a_0/(a_0 - s) * prod_i a_i/(K s + a_i) = H * prod_n (s + c_n)^(-k_n)
//! ```
//!
//! with `c_1 = -a_0` (the only negative pole) and the remaining `c_n` the
//! distinct values of `a_i / K`. The density of `Z` on `x > 0` is carried by
//! the poles `n >= 2`, so `P(Z > 0) = H sum_{n>=2} sum_j b_n^j / c_n^j`.

use crate::error::{check, Error, Result};

/// Poles closer than this (relative) are merged into one repeated pole.
pub const MERGE_TOL: f64 = 1e-9;
/// Distinct poles closer than this (relative) are rejected as ill-conditioned.
pub const CONDITION_TOL: f64 = 1e-6;
/// Slack allowed outside `[0, 1]` before a probability is clamped.
pub const PROBABILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Pole {
    /// `c_n`; the transform has a factor `(s + c_n)^(-k_n)`.
    pub location: f64,
    pub multiplicity: usize,
    /// `b_n^j` for `j = 1..=multiplicity`.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractionExpansion {
    /// `H`, negative by construction.
    pub scale: f64,
    /// Target pole first, then interferer poles in increasing order.
    pub poles: Vec<Pole>,
}

impl PartialFractionExpansion {
    /// `target_rate` is `a_0 = rho_0^(2 lambda)`, `interferer_rates` are the
    /// `a_i`, `threshold` is `K`.
    pub fn new(target_rate: f64, interferer_rates: &[f64], threshold: f64) -> Result<Self> {
        check(target_rate > 0.0 && target_rate.is_finite(), || format!("target rate must be > 0, got {target_rate}"))?;
        check(threshold > 0.0 && threshold.is_finite(), || format!("threshold must be > 0, got {threshold}"))?;
        check(interferer_rates.iter().all(|a| *a > 0.0 && a.is_finite()), || "interferer rates must be > 0".to_string())?;

        let mut raw: Vec<f64> = interferer_rates.iter().map(|a| a / threshold).collect();
        raw.sort_by(f64::total_cmp);

        let mut groups: Vec<(f64, usize)> = Vec::new();
        for c in raw {
            match groups.last_mut() {
                Some((rep, k)) if (c - *rep).abs() <= MERGE_TOL * c.abs().max(rep.abs()) => {
                    // running mean keeps the representative centered in the group
                    *rep += (c - *rep) / (*k as f64 + 1.0);
                    *k += 1;
                }
                _ => groups.push((c, 1)),
            }
        }
        for w in groups.windows(2) {
            let (a, b) = (w[0].0, w[1].0);
            if (b - a).abs() <= CONDITION_TOL * a.abs().max(b.abs()) {
                return Err(Error::IllConditioned(format!("poles {a:e} and {b:e} nearly coincide")));
            }
        }

        let mut located: Vec<(f64, usize)> = vec![(-target_rate, 1)];
        located.extend(groups);

        let n_interferers = interferer_rates.len() as i32;
        let scale = -target_rate * interferer_rates.iter().product::<f64>() * threshold.powi(-n_interferers);

        let poles = (0..located.len())
            .map(|n| {
                let (c, k) = located[n];
                Pole {
                    location: c,
                    multiplicity: k,
                    coefficients: residues(&located, n),
                }
            })
            .collect();
        Ok(Self { scale, poles })
    }

    /// `H sum_n sum_j b_n^j / (s + c_n)^j`.
    pub fn eval(&self, s: f64) -> f64 {
        self.scale
            * self
                .poles
                .iter()
                .map(|p| {
                    p.coefficients
                        .iter()
                        .enumerate()
                        .map(|(j, b)| b / (s + p.location).powi(j as i32 + 1))
                        .sum::<f64>()
                })
                .sum::<f64>()
    }

    /// Unclamped `P(Z > 0)`.
    pub fn raw_outage(&self) -> f64 {
        self.scale
            * self.poles[1..]
                .iter()
                .map(|p| {
                    p.coefficients
                        .iter()
                        .enumerate()
                        .map(|(j, b)| b / p.location.powi(j as i32 + 1))
                        .sum::<f64>()
                })
                .sum::<f64>()
    }

    /// `P(Z > 0)`, rejected unless it already lies in `[0, 1]` up to
    /// [`PROBABILITY_SLACK`].
    pub fn outage(&self) -> Result<f64> {
        let p = self.raw_outage();
        if !p.is_finite() || !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p) {
            return Err(Error::IllConditioned(format!("residue sum gave probability {p}")));
        }
        Ok(p.clamp(0.0, 1.0))
    }
}

/// `Z(s)` evaluated directly from its product form.
pub fn product_form(target_rate: f64, interferer_rates: &[f64], threshold: f64, s: f64) -> f64 {
    target_rate / (target_rate - s) * interferer_rates.iter().map(|a| a / (threshold * s + a)).product::<f64>()
}

/// Coefficients `b^j`, `j = 1..=k`, of pole `n`:
/// `b^j = g^(k-j)(-c_n) / (k-j)!` with `g(s) = prod_{m != n} (s + c_m)^(-k_m)`.
///
/// Taylor coefficients of `g` about `s0 = -c_n` follow from `g' = g h`,
/// `h = -sum_m k_m / (s + c_m)`.
fn residues(poles: &[(f64, usize)], n: usize) -> Vec<f64> {
    let (c, k) = poles[n];
    let s0 = -c;
    let others = || poles.iter().enumerate().filter(move |(m, _)| *m != n).map(|(_, p)| *p);

    let g0: f64 = others().map(|(cm, km)| (s0 + cm).powi(-(km as i32))).product();
    // Taylor coefficients h_r of h about s0
    let h: Vec<f64> = (0..k)
        .map(|r| {
            let sign = if r % 2 == 0 { -1.0 } else { 1.0 };
            sign * others().map(|(cm, km)| km as f64 * (s0 + cm).powi(-(r as i32 + 1))).sum::<f64>()
        })
        .collect();
    let mut g = vec![g0];
    for m in 0..k.saturating_sub(1) {
        let next = (0..=m).map(|r| g[m - r] * h[r]).sum::<f64>() / (m as f64 + 1.0);
        g.push(next);
    }
    (1..=k).map(|j| g[k - j]).collect()
}
