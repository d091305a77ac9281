//! Antenna placement: Robbins-Monro stochastic approximation with Polyak
//! averaging, and a deterministic radius sweep over symmetric circles.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::error::{check, Error, Result};
use crate::geometry::{sample_user_vector, symmetric_circle, wrap_angle, Antenna, AntennaVector};
use crate::outage::{expected_outage, system_outage_at, CellScenario, ExpectedOutage};
use crate::rng;

/// Default gain `c_0` of the step sequence.
pub const STEP_SCALE: f64 = 15.0;
/// Default decay exponent of the step sequence.
pub const STEP_EXPONENT: f64 = 0.75;

/// `c_n = 15 n^(-0.75)`.
pub fn step_sequence(n: usize) -> f64 {
    STEP_SCALE * (n as f64).powf(-STEP_EXPONENT)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RmMode {
    /// One shared radius; angles stay where the initial layout put them.
    #[default]
    RadiusOnly,
    /// Every antenna's radius and angle move independently.
    FullPolar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmConfig {
    pub mode: RmMode,
    pub step_scale: f64,
    pub step_exponent: f64,
    /// Finite-difference step for the gradient, in cell radii (radians for
    /// angles).
    pub fd_step: f64,
    pub max_iter: usize,
    /// Convergence is not tested before this iteration.
    pub min_iter: usize,
    pub convergence_window: usize,
    /// Stop once the averaged parameters move less than this over the
    /// window. Zero disables the test.
    pub tolerance: f64,
    /// Consecutive iterations with a radius pinned at 1 by an outward
    /// gradient before the run is declared divergent.
    pub divergence_window: usize,
    /// User samples behind each `E(P)` estimate in the trace.
    pub eval_samples: usize,
    /// Estimate `E(P)` every this many rows (first and last rows always).
    /// Zero disables estimates.
    pub eval_every: usize,
}

impl Default for RmConfig {
    fn default() -> Self {
        Self {
            mode: RmMode::RadiusOnly,
            step_scale: STEP_SCALE,
            step_exponent: STEP_EXPONENT,
            fd_step: 1e-4,
            max_iter: 200_000,
            min_iter: 1_000,
            convergence_window: 1_000,
            tolerance: 0.0,
            divergence_window: 1_000,
            eval_samples: 10_000,
            eval_every: 10_000,
        }
    }
}

impl RmConfig {
    pub fn step(&self, n: usize) -> f64 {
        self.step_scale * (n as f64).powf(-self.step_exponent)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.step_scale > 0.0, || format!("step scale must be > 0, got {}", self.step_scale))?;
        check(self.step_exponent > 0.5 && self.step_exponent <= 1.0, || {
            format!("step exponent must lie in (0.5, 1], got {}", self.step_exponent)
        })?;
        check(self.fd_step > 0.0 && self.fd_step < 0.5, || format!("fd step must lie in (0, 0.5), got {}", self.fd_step))?;
        check(self.max_iter >= 1, || "max_iter must be >= 1".to_string())?;
        check(self.convergence_window >= 1, || "convergence window must be >= 1".to_string())?;
        check(self.divergence_window >= 1, || "divergence window must be >= 1".to_string())?;
        check(self.eval_every == 0 || self.eval_samples >= 1, || "eval_samples must be >= 1".to_string())
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RmTraceRow {
    pub n: usize,
    /// Raw iterate `L(n)` in parameter form.
    pub iterate: Vec<f64>,
    /// Polyak average `L_bar(n)` of `L(1..n-1)`; equals `L(1)` at `n = 1`.
    pub average: Vec<f64>,
    pub e_outage: Option<ExpectedOutage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmStatus {
    MaxIter,
    Converged,
    Diverged { iteration: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmOutcome {
    pub mode: RmMode,
    /// Layout at the final Polyak average.
    pub antennas: AntennaVector,
    pub trace: Vec<RmTraceRow>,
    pub status: RmStatus,
    /// Iterations whose gradient was dropped because a closed-form probe
    /// was ill-conditioned.
    pub skipped_gradients: usize,
    /// Angles held fixed in radius-only mode.
    fixed_angles: Vec<f64>,
}

impl RmOutcome {
    /// Radius and angle of the first antenna for a parameter vector.
    pub fn first_antenna(&self, params: &[f64]) -> (f64, f64) {
        match self.mode {
            RmMode::RadiusOnly => (params[0], wrap_angle(self.fixed_angles[0])),
            RmMode::FullPolar => (params[0], wrap_angle(params[1])),
        }
    }

    pub fn into_result(self) -> Result<Self> {
        match self.status {
            RmStatus::Diverged { iteration } => Err(Error::Divergence {
                iteration,
                reason: "radius pinned at the cell edge by an outward gradient".to_string(),
            }),
            _ => Ok(self),
        }
    }
}

struct Parameterization {
    mode: RmMode,
    angles: Vec<f64>,
}

impl Parameterization {
    fn initial(&self, init: &AntennaVector) -> Vec<f64> {
        match self.mode {
            RmMode::RadiusOnly => vec![init.antennas()[0].radius],
            RmMode::FullPolar => init.antennas().iter().flat_map(|a| [a.radius, a.angle]).collect(),
        }
    }

    fn antennas(&self, params: &[f64]) -> Vec<Antenna> {
        match self.mode {
            RmMode::RadiusOnly => self.angles.iter().map(|&angle| Antenna { radius: params[0], angle }).collect(),
            RmMode::FullPolar => params.chunks(2).map(|p| Antenna { radius: p[0], angle: p[1] }).collect(),
        }
    }

    fn is_radius(&self, k: usize) -> bool {
        self.mode == RmMode::RadiusOnly || k % 2 == 0
    }
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Minimizes `E(P)` over antenna locations, starting from `init`.
///
/// Each iteration draws one user vector, takes a central finite-difference
/// gradient of the closed-form conditional system outage, steps downhill by
/// `c_n`, clamps radii into `[0, 1]` and updates the Polyak average. At a
/// radius bound the difference is one-sided. Requires `alpha = 1`.
pub fn rm_optimize(scenario: &CellScenario, init: &AntennaVector, cfg: &RmConfig, seed: u64) -> Result<RmOutcome> {
    cfg.validate()?;
    if scenario.channel.alpha != 1.0 {
        return Err(Error::ClosedFormUnavailable { alpha: scenario.channel.alpha });
    }
    let height = init.height();
    let scenario = scenario.with_antennas(init.clone());
    let param = Parameterization {
        mode: cfg.mode,
        angles: init.antennas().iter().map(|a| a.angle).collect(),
    };
    if cfg.mode == RmMode::RadiusOnly {
        check(init.antennas().iter().all(|a| a.radius == init.antennas()[0].radius), || {
            "radius-only mode needs a common initial radius".to_string()
        })?;
    }

    let eval_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
    let evaluate = |params: &[f64]| -> Result<ExpectedOutage> {
        let av = AntennaVector::new(param.antennas(params), height)?;
        expected_outage(&scenario.with_antennas(av), cfg.eval_samples, eval_seed)
    };

    let mut users_rng = rng::stream(seed, 0);
    let mut iterate = param.initial(init);
    let mut average = iterate.clone();
    let mut trace: Vec<RmTraceRow> = Vec::new();
    let mut status = RmStatus::MaxIter;
    let mut skipped = 0;
    let mut pinned = 0;
    let d = cfg.fd_step;

    for n in 1..=cfg.max_iter {
        let last = n == cfg.max_iter;
        let e_outage = if cfg.eval_every > 0 && (n == 1 || last || n % cfg.eval_every == 0) {
            Some(evaluate(&average)?)
        } else {
            None
        };
        trace.push(RmTraceRow { n, iterate: iterate.clone(), average: average.clone(), e_outage });

        if n >= cfg.min_iter.max(cfg.convergence_window + 1) && cfg.tolerance > 0.0 {
            let past = &trace[n - 1 - cfg.convergence_window].average;
            if l2_distance(past, &average) < cfg.tolerance {
                status = RmStatus::Converged;
                break;
            }
        }
        if last {
            break;
        }

        let users = sample_user_vector(&scenario.layout, &mut users_rng);
        let positions = users.positions(&scenario.layout);
        let outage = |p: &[f64]| system_outage_at(&scenario, &param.antennas(p), &positions);

        let mut grad = vec![0.0; iterate.len()];
        let mut probe_failed = false;
        for k in 0..iterate.len() {
            let (lo, hi) = if param.is_radius(k) {
                ((iterate[k] - d).max(0.0), (iterate[k] + d).min(1.0))
            } else {
                (iterate[k] - d, iterate[k] + d)
            };
            let mut up = iterate.clone();
            up[k] = hi;
            let mut down = iterate.clone();
            down[k] = lo;
            match (outage(&up), outage(&down)) {
                (Ok(a), Ok(b)) => grad[k] = (a - b) / (hi - lo),
                (Err(Error::IllConditioned(_)), _) | (_, Err(Error::IllConditioned(_))) => {
                    probe_failed = true;
                    break;
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
        if probe_failed {
            skipped += 1;
            grad.iter_mut().for_each(|g| *g = 0.0);
        }

        // Polyak average over L(1..=n) before moving to L(n+1)
        for (a, x) in average.iter_mut().zip(&iterate) {
            *a += (x - *a) / n as f64;
        }

        let c = cfg.step(n);
        let mut pushed_out = false;
        for k in 0..iterate.len() {
            let next = iterate[k] - c * grad[k];
            iterate[k] = if param.is_radius(k) {
                if next > 1.0 {
                    pushed_out = true;
                }
                next.clamp(0.0, 1.0)
            } else {
                next
            };
        }
        pinned = if pushed_out { pinned + 1 } else { 0 };
        if pinned >= cfg.divergence_window {
            status = RmStatus::Diverged { iteration: n };
            break;
        }
    }

    // angles are averaged unwrapped and only wrapped for the final layout
    let mut antennas = param.antennas(&average);
    if cfg.mode == RmMode::FullPolar {
        separate_duplicate_angles(&mut antennas);
    }
    Ok(RmOutcome {
        mode: cfg.mode,
        antennas: AntennaVector::new(antennas, height)?,
        trace,
        status,
        skipped_gradients: skipped,
        fixed_angles: param.angles,
    })
}

// Two antennas can land on one angle when both sit at the center.
fn separate_duplicate_angles(antennas: &mut [Antenna]) {
    let m = antennas.len();
    for i in 0..m {
        for j in 0..i {
            if wrap_angle(antennas[i].angle) == wrap_angle(antennas[j].angle) {
                antennas[i].angle += TAU * 1e-12 * (i + 1) as f64;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub radius: f64,
    pub outage: ExpectedOutage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub argmin: usize,
}

impl SweepResult {
    pub fn best(&self) -> &SweepPoint {
        &self.points[self.argmin]
    }
}

/// `E(P)` of the scenario's antenna count placed on symmetric circles of
/// each radius, with rotation and height taken from the scenario's first
/// antenna. All radii share one seed, hence one set of user samples.
pub fn radius_sweep(scenario: &CellScenario, radii: &[f64], samples: usize, seed: u64) -> Result<SweepResult> {
    check(!radii.is_empty(), || "radius grid is empty".to_string())?;
    let count = scenario.antennas.len();
    let rotation = scenario.antennas.antennas()[0].angle;
    let height = scenario.antennas.height();
    let points = radii
        .par_iter()
        .map(|&r| {
            let av = symmetric_circle(count, r, rotation, height)?;
            Ok(SweepPoint {
                radius: r,
                outage: expected_outage(&scenario.with_antennas(av), samples, seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmin = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.outage.mean.total_cmp(&b.1.outage.mean))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(SweepResult { points, argmin })
}
