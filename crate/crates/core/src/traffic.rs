//! Arrival and service processes and their first two moments.
//!
//! Time is measured in slots and rates in packets/slot. The delay analysis
//! only ever consumes the mean and variance of the inter-arrival and service
//! times, so that is all these types compute.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{check, Result};

/// Mean and variance of a renewal interval, in slots and slots².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
}

impl Moments {
    pub fn new(mean: f64, var: f64) -> Self {
        Self { mean, var }
    }
}

/// Packet arrival process of one flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrivalModel {
    Poisson {
        rate: f64,
    },
    /// Two-state Markov fluid reduced to an i.i.d. hyperexponential renewal
    /// process: each inter-arrival is `Exp(rate1)` with probability `pi1` and
    /// `Exp(rate2)` otherwise.
    MarkovFluid {
        rate1: f64,
        rate2: f64,
        pi1: f64,
        pi2: f64,
    },
    GenericRenewal {
        mean: f64,
        var: f64,
    },
}

impl ArrivalModel {
    pub fn poisson(rate: f64) -> Result<Self> {
        let m = ArrivalModel::Poisson { rate };
        m.validate()?;
        Ok(m)
    }

    pub fn markov_fluid(rate1: f64, rate2: f64, pi1: f64) -> Result<Self> {
        let m = ArrivalModel::MarkovFluid {
            rate1,
            rate2,
            pi1,
            pi2: 1.0 - pi1,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds the renewal model from the modulating chain's transition rates:
    /// `gamma1` leaves state 1, `gamma2` leaves state 2.
    pub fn from_transition_rates(rate1: f64, rate2: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        check(gamma1 > 0.0 && gamma2 > 0.0, || {
            format!("transition rates must be positive, got ({gamma1}, {gamma2})")
        })?;
        Self::markov_fluid(rate1, rate2, gamma2 / (gamma1 + gamma2))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ArrivalModel::Poisson { rate } => {
                check(rate > 0.0 && rate.is_finite(), || format!("Poisson rate must be > 0, got {rate}"))
            }
            ArrivalModel::MarkovFluid { rate1, rate2, pi1, pi2 } => {
                check(rate1 > 0.0 && rate2 > 0.0 && rate1.is_finite() && rate2.is_finite(), || {
                    format!("Markov-fluid rates must be > 0, got ({rate1}, {rate2})")
                })?;
                check((0.0..=1.0).contains(&pi1) && (0.0..=1.0).contains(&pi2), || {
                    format!("state probabilities must lie in [0,1], got ({pi1}, {pi2})")
                })?;
                check((pi1 + pi2 - 1.0).abs() <= 1e-12, || {
                    format!("state probabilities must sum to 1, got {}", pi1 + pi2)
                })
            }
            ArrivalModel::GenericRenewal { mean, var } => check(mean > 0.0 && var >= 0.0, || {
                format!("renewal moments need mean > 0 and var >= 0, got ({mean}, {var})")
            }),
        }
    }

    /// Mean arrival rate in packets/slot.
    pub fn rate(&self) -> f64 {
        1.0 / arrival_moments(self).mean
    }

    pub fn is_poisson(&self) -> bool {
        matches!(self, ArrivalModel::Poisson { .. })
    }
}

/// Number of slots a packet occupies the server.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServiceModel {
    /// One attempt; the packet leaves after it whether or not it was decoded.
    DeterministicUnit,
    /// Retransmit on outage (probability `p` per attempt) up to
    /// `max_transmissions` attempts in total.
    TruncatedGeometric { p: f64, max_transmissions: u32 },
}

impl ServiceModel {
    pub fn truncated_geometric(p: f64, max_transmissions: u32) -> Result<Self> {
        let s = ServiceModel::TruncatedGeometric { p, max_transmissions };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ServiceModel::DeterministicUnit => Ok(()),
            ServiceModel::TruncatedGeometric { p, max_transmissions } => {
                check((0.0..1.0).contains(&p), || format!("outage probability must lie in [0,1), got {p}"))?;
                check(max_transmissions >= 1, || "at least one transmission is required".to_string())
            }
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, ServiceModel::DeterministicUnit)
    }
}

/// One priority class. Priority 1 is served first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficFlow {
    pub priority: usize,
    pub arrival: ArrivalModel,
    pub service: ServiceModel,
}

impl TrafficFlow {
    pub fn new(priority: usize, arrival: ArrivalModel, service: ServiceModel) -> Self {
        Self { priority, arrival, service }
    }

    pub fn arrival_moments(&self) -> Moments {
        arrival_moments(&self.arrival)
    }

    pub fn service_moments(&self) -> Moments {
        service_moments(&self.service)
    }

    /// Fraction of slots this flow keeps the server busy.
    pub fn load(&self) -> f64 {
        self.service_moments().mean / self.arrival_moments().mean
    }
}

/// Validates each flow and sorts them by priority. Priorities must be
/// exactly `1..=N`.
pub fn order_flows(flows: &[TrafficFlow]) -> Result<Vec<TrafficFlow>> {
    check(!flows.is_empty(), || "flow list is empty".to_string())?;
    let mut sorted = flows.to_vec();
    sorted.sort_by_key(|f| f.priority);
    for (i, f) in sorted.iter().enumerate() {
        f.arrival.validate()?;
        f.service.validate()?;
        check(f.priority == i + 1, || {
            format!("priorities must be distinct and contiguous from 1, found {} at position {}", f.priority, i + 1)
        })?;
    }
    Ok(sorted)
}

pub fn arrival_moments(a: &ArrivalModel) -> Moments {
    match *a {
        ArrivalModel::Poisson { rate } => Moments::new(1.0 / rate, 1.0 / (rate * rate)),
        ArrivalModel::MarkovFluid { rate1, rate2, pi1, pi2 } => {
            let mean = pi1 / rate1 + pi2 / rate2;
            let second = 2.0 * pi1 / (rate1 * rate1) + 2.0 * pi2 / (rate2 * rate2);
            Moments::new(mean, second - mean * mean)
        }
        ArrivalModel::GenericRenewal { mean, var } => Moments::new(mean, var),
    }
}

pub fn service_moments(s: &ServiceModel) -> Moments {
    match *s {
        ServiceModel::DeterministicUnit => Moments::new(1.0, 0.0),
        ServiceModel::TruncatedGeometric { p, max_transmissions } => {
            let l = max_transmissions as i32;
            let q = 1.0 - p;
            let pl = p.powi(l);
            let mean = (1.0 - pl) / q;
            let k = (2 * l - 1) as f64;
            let var = (p - k * pl + k * pl * p - pl * pl) / (q * q);
            // cancellation can leave a tiny negative residue when p -> 0
            Moments::new(mean, var.max(0.0))
        }
    }
}

/// Probability generating function `E[z^y]` of the truncated geometric
/// service time.
pub fn service_pgf(p: f64, max_transmissions: u32, z: f64) -> f64 {
    let l = max_transmissions as i32;
    let zp = z * p;
    let tail = z.powi(l) * p.powi(l - 1);
    if (1.0 - zp).abs() < 1e-9 {
        let head: f64 = (1..l).map(|i| (1.0 - p) * p.powi(i - 1) * z.powi(i)).sum();
        head + tail
    } else {
        (1.0 - p) * z * (1.0 - zp.powi(l - 1)) / (1.0 - zp) + tail
    }
}

/// A data packet is lost after `max_transmissions` failed attempts.
pub fn packet_loss_probability(p: f64, max_transmissions: u32) -> f64 {
    p.powi(max_transmissions as i32)
}

/// Draws one inter-arrival time in slots.
pub fn sample_interarrival<R: Rng + ?Sized>(a: &ArrivalModel, rng: &mut R) -> f64 {
    match *a {
        ArrivalModel::Poisson { rate } => exp(rate, rng),
        ArrivalModel::MarkovFluid { rate1, rate2, pi1, .. } => {
            if rng.random::<f64>() < pi1 {
                exp(rate1, rng)
            } else {
                exp(rate2, rng)
            }
        }
        // Gamma with matching moments; exponential-free when var = 0.
        ArrivalModel::GenericRenewal { mean, var } => {
            if var == 0.0 {
                mean
            } else {
                let shape = mean * mean / var;
                let scale = var / mean;
                rand_distr::Gamma::new(shape, scale).expect("validated moments").sample(rng)
            }
        }
    }
}

fn exp<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    Exp::new(rate).expect("validated rate").sample(rng)
}
