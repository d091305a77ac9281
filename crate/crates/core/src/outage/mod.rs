//! Per-antenna and system outage probability under Rayleigh fading with
//! ON/OFF co-channel interferers.
//!
//! Antenna `m` is in outage when its signal-to-interference ratio
//! `X_{m,0} / sum_{i>=1} X_{m,i}` drops below `K = 2^R - 1`, where
//! `X_{m,i} = rho_{m,i}^(-2 lambda) |h_{m,i}|^2` and each interferer is ON
//! with probability `alpha`. Thermal noise is ignored.

mod partial_fraction;

pub use partial_fraction::{product_form, PartialFractionExpansion, Pole, CONDITION_TOL, MERGE_TOL, PROBABILITY_SLACK};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{check, Error, Result};
use crate::geometry::{distance_to, sample_user_vector, Antenna, AntennaVector, ClusterLayout, UserVector};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// `2 lambda`.
    pub path_loss_exponent: f64,
    /// Required spectral efficiency `R` in bits/s/Hz.
    pub rate: f64,
    /// Probability that an interferer is ON.
    pub alpha: f64,
    /// Received power at unit distance. Cancels in the SIR; kept for
    /// reference only.
    pub tx_power: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            path_loss_exponent: 4.0,
            rate: 1.0,
            alpha: 1.0,
            tx_power: 1.0,
        }
    }
}

impl ChannelParams {
    /// `K = 2^R - 1`.
    pub fn threshold(&self) -> f64 {
        self.rate.exp2() - 1.0
    }

    pub fn validate(&self) -> Result<()> {
        check(self.path_loss_exponent > 0.0 && self.path_loss_exponent.is_finite(), || {
            format!("path-loss exponent must be > 0, got {}", self.path_loss_exponent)
        })?;
        check(self.rate > 0.0 && self.rate.is_finite(), || format!("rate must be > 0, got {}", self.rate))?;
        check((0.0..=1.0).contains(&self.alpha), || format!("alpha must lie in [0,1], got {}", self.alpha))?;
        check(self.tx_power > 0.0, || format!("transmit power must be > 0, got {}", self.tx_power))
    }

    /// `rho^(2 lambda)`, the rate of the exponential received power.
    fn attenuation(&self, rho: f64) -> f64 {
        let e = self.path_loss_exponent;
        if e == 2.0 {
            rho * rho
        } else if e == 4.0 {
            (rho * rho) * (rho * rho)
        } else {
            rho.powf(e)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellScenario {
    pub layout: ClusterLayout,
    pub antennas: AntennaVector,
    pub channel: ChannelParams,
}

impl CellScenario {
    pub fn new(layout: ClusterLayout, antennas: AntennaVector, channel: ChannelParams) -> Result<Self> {
        channel.validate()?;
        Ok(Self { layout, antennas, channel })
    }

    pub fn with_antennas(&self, antennas: AntennaVector) -> Self {
        Self { antennas, ..self.clone() }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        let mut s = self.clone();
        s.channel.alpha = alpha;
        s
    }

    fn antenna(&self, m: usize) -> Result<&Antenna> {
        self.antennas
            .antennas()
            .get(m)
            .ok_or_else(|| Error::InvalidParameter(format!("antenna index {m} outside 0..{}", self.antennas.len())))
    }

    /// `rho_{m,i}^(2 lambda)` for every user, target first.
    fn link_rates(&self, antenna: &Antenna, positions: &[(f64, f64)]) -> Vec<f64> {
        positions
            .iter()
            .map(|p| self.channel.attenuation(distance_to(antenna, self.antennas.height(), *p)))
            .collect()
    }

    fn check_users(&self, users: &UserVector) -> Result<()> {
        check(users.users().len() == self.layout.size(), || {
            format!("expected {} users, got {}", self.layout.size(), users.users().len())
        })
    }

    /// Partial-fraction expansion of antenna `m`'s `Z_m` transform.
    pub fn expansion(&self, users: &UserVector, m: usize) -> Result<PartialFractionExpansion> {
        self.check_users(users)?;
        let rates = self.link_rates(self.antenna(m)?, &users.positions(&self.layout));
        PartialFractionExpansion::new(rates[0], &rates[1..], self.channel.threshold())
    }
}

/// One draw of `Gamma_m`; `+inf` when every interferer is OFF.
pub fn instantaneous_sinr_sample<R: Rng + ?Sized>(scenario: &CellScenario, users: &UserVector, m: usize, rng: &mut R) -> Result<f64> {
    scenario.check_users(users)?;
    let rates = scenario.link_rates(scenario.antenna(m)?, &users.positions(&scenario.layout));
    Ok(sinr_from_rates(&rates, scenario.channel.alpha, rng))
}

fn sinr_from_rates<R: Rng + ?Sized>(rates: &[f64], alpha: f64, rng: &mut R) -> f64 {
    let signal = Distribution::<f64>::sample(&Exp1, rng) / rates[0];
    let mut interference = 0.0;
    for a in &rates[1..] {
        let on = alpha >= 1.0 || rng.random::<f64>() < alpha;
        let fade: f64 = Exp1.sample(rng);
        if on {
            interference += fade / a;
        }
    }
    if interference == 0.0 {
        f64::INFINITY
    } else {
        signal / interference
    }
}

/// Closed-form outage of antenna `m` (0-based). Only defined for
/// `alpha = 1`.
pub fn antenna_outage_closed_form(scenario: &CellScenario, users: &UserVector, m: usize) -> Result<f64> {
    if scenario.channel.alpha != 1.0 {
        return Err(Error::ClosedFormUnavailable { alpha: scenario.channel.alpha });
    }
    scenario.expansion(users, m)?.outage()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl McEstimate {
    fn from_count(hits: u64, trials: usize) -> Self {
        let p = hits as f64 / trials as f64;
        Self {
            probability: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }
}

/// Monte-Carlo outage of antenna `m`, valid for any `alpha`.
pub fn antenna_outage_mc(scenario: &CellScenario, users: &UserVector, m: usize, trials: usize, seed: u64) -> Result<McEstimate> {
    check(trials >= 1, || "at least one trial is required".to_string())?;
    scenario.check_users(users)?;
    let rates = scenario.link_rates(scenario.antenna(m)?, &users.positions(&scenario.layout));
    let k = scenario.channel.threshold();
    let alpha = scenario.channel.alpha;
    let hits: u64 = rng::chunks(trials)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(chunk, len)| {
            let mut r = rng::stream(seed, chunk);
            (0..len).filter(|_| sinr_from_rates(&rates, alpha, &mut r) < k).count() as u64
        })
        .sum();
    Ok(McEstimate::from_count(hits, trials))
}

fn mc_outage_sequential<R: Rng + ?Sized>(rates: &[f64], k: f64, alpha: f64, trials: usize, rng: &mut R) -> f64 {
    let hits = (0..trials).filter(|_| sinr_from_rates(rates, alpha, rng) < k).count();
    hits as f64 / trials as f64
}

/// All antennas must fail; failures are independent across antennas.
pub fn system_outage(per_antenna: &[f64]) -> f64 {
    per_antenna.iter().product()
}

/// Closed-form system outage for fixed user positions (`alpha = 1`).
pub fn conditional_system_outage(scenario: &CellScenario, users: &UserVector) -> Result<f64> {
    let per: Result<Vec<f64>> = (0..scenario.antennas.len())
        .map(|m| antenna_outage_closed_form(scenario, users, m))
        .collect();
    Ok(system_outage(&per?))
}

/// Closed-form system outage of an arbitrary antenna set (sharing the
/// scenario's height) for users at fixed Cartesian `positions`.
pub fn system_outage_at(scenario: &CellScenario, antennas: &[Antenna], positions: &[(f64, f64)]) -> Result<f64> {
    if scenario.channel.alpha != 1.0 {
        return Err(Error::ClosedFormUnavailable { alpha: scenario.channel.alpha });
    }
    let k = scenario.channel.threshold();
    let mut p = 1.0;
    for a in antennas {
        let rates = scenario.link_rates(a, positions);
        p *= PartialFractionExpansion::new(rates[0], &rates[1..], k)?.outage()?;
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedOutageOptions {
    /// Fading draws per antenna whenever the closed form is not used.
    pub mc_trials: usize,
    /// User samples per independently seeded chunk.
    pub chunk: usize,
}

impl Default for ExpectedOutageOptions {
    fn default() -> Self {
        Self { mc_trials: 200, chunk: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedOutage {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    /// Antenna evaluations that fell back to Monte Carlo because the
    /// partial-fraction expansion was ill-conditioned.
    pub fallbacks: usize,
}

/// `E(P)`: system outage averaged over uniformly placed users.
///
/// User vectors come from stream `2c` of chunk `c`, fading draws from
/// stream `2c + 1`, so two scenarios evaluated with the same seed see the
/// same users (common random numbers).
pub fn expected_outage(scenario: &CellScenario, samples: usize, seed: u64) -> Result<ExpectedOutage> {
    expected_outage_with(scenario, samples, seed, ExpectedOutageOptions::default())
}

pub fn expected_outage_with(scenario: &CellScenario, samples: usize, seed: u64, opts: ExpectedOutageOptions) -> Result<ExpectedOutage> {
    check(samples >= 1, || "at least one user sample is required".to_string())?;
    check(opts.chunk >= 1 && opts.mc_trials >= 1, || "chunk and mc_trials must be >= 1".to_string())?;
    scenario.channel.validate()?;
    let k = scenario.channel.threshold();
    let alpha = scenario.channel.alpha;
    let n_chunks = samples.div_ceil(opts.chunk);

    let parts: Vec<(f64, f64, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64, usize)> {
            let len = opts.chunk.min(samples - c * opts.chunk);
            let mut users_rng = rng::stream(seed, 2 * c as u64);
            let mut fading_rng = rng::stream(seed, 2 * c as u64 + 1);
            let (mut sum, mut sumsq, mut fallbacks) = (0.0, 0.0, 0);
            for _ in 0..len {
                let users = sample_user_vector(&scenario.layout, &mut users_rng);
                let positions = users.positions(&scenario.layout);
                let mut p = 1.0;
                for antenna in scenario.antennas.antennas() {
                    let rates = scenario.link_rates(antenna, &positions);
                    let pm = if alpha == 1.0 {
                        match PartialFractionExpansion::new(rates[0], &rates[1..], k).and_then(|e| e.outage()) {
                            Ok(v) => v,
                            Err(Error::IllConditioned(msg)) => {
                                log::debug!("closed form ill-conditioned ({msg}); using Monte Carlo");
                                fallbacks += 1;
                                mc_outage_sequential(&rates, k, alpha, opts.mc_trials, &mut fading_rng)
                            }
                            Err(e) => return Err(e),
                        }
                    } else if alpha == 0.0 {
                        0.0
                    } else {
                        mc_outage_sequential(&rates, k, alpha, opts.mc_trials, &mut fading_rng)
                    };
                    p *= pm;
                }
                sum += p;
                sumsq += p * p;
            }
            Ok((sum, sumsq, fallbacks))
        })
        .collect::<Result<_>>()?;

    let (sum, sumsq, fallbacks) = parts.iter().fold((0.0, 0.0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 { ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(ExpectedOutage {
        mean,
        std_error: (var / n).sqrt(),
        samples,
        fallbacks,
    })
}
