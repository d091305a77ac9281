//! Scenario files.
//!
//! ```toml
//! [run]
//! seed = 1
//! samples = 10000
//!
//! [[flows]]
//! priority = 1
//! arrival = { kind = "poisson", rate = 0.2 }
//! service = { kind = "unit" }
//!
//! [[flows]]
//! priority = 2
//! arrival = { kind = "poisson", rate = 0.6 }
//! service = { kind = "truncated_geometric", max_transmissions = 4 }
//!
//! [queue]
//! outage_probability = 0.1   # or "linked"
//!
//! [delay]
//! d_th = { start = 0, stop = 60, step = 1 }
//!
//! [channel]
//! path_loss_exponent = 4.0
//!
//! [geometry]
//! circle = { count = 4, radius = 0.58 }
//! ```
//!
//! Every section is optional; commands complain about the ones they need.
//! Unknown keys are rejected.

use std::ops::Range;
use std::path::PathBuf;

use dasqos::geometry::{hex_cluster, symmetric_circle, Antenna, AntennaVector, ClusterLayout, UserPosition, UserVector};
use dasqos::outage::{CellScenario, ChannelParams};
use dasqos::placement::{RmConfig, RmMode};
use dasqos::priority::{ArrivalEnergyMode, HigherPriorityMode};
use dasqos::sim::DelayConvention;
use dasqos::traffic::{ArrivalModel, ServiceModel, TrafficFlow};
use serde::Deserialize;
use toml::Spanned;

use crate::error::ConfigError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub run: Option<Spanned<RunSection>>,
    #[serde(default)]
    pub flows: Vec<Spanned<FlowSpec>>,
    pub queue: Option<Spanned<QueueSection>>,
    pub delay: Option<Spanned<DelaySection>>,
    pub channel: Option<Spanned<ChannelSection>>,
    pub geometry: Option<Spanned<GeometrySection>>,
    pub optimize: Option<Spanned<OptimizeSection>>,
    pub sweep: Option<Spanned<SweepSection>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// User samples per `E(P)` estimate, or fading trials for fixed users.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Simulated slots.
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_warmup")]
    pub warmup: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

fn default_seed() -> u64 {
    1
}
fn default_samples() -> usize {
    10_000
}
fn default_horizon() -> u64 {
    10_000_000
}
fn default_warmup() -> u64 {
    10_000
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            samples: default_samples(),
            horizon: default_horizon(),
            warmup: default_warmup(),
            threads: None,
            output: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub priority: usize,
    pub arrival: Spanned<ArrivalSpec>,
    pub service: Spanned<ServiceSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalSpec {
    Poisson {
        rate: f64,
    },
    /// Either `pi1` or both transition rates `gamma1`, `gamma2`.
    MarkovFluid {
        rate1: f64,
        rate2: f64,
        pi1: Option<f64>,
        gamma1: Option<f64>,
        gamma2: Option<f64>,
    },
    Renewal {
        mean: f64,
        var: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceSpec {
    Unit,
    TruncatedGeometric { max_transmissions: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OutageSpec {
    Fixed(f64),
    Linked(LinkedTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkedTag {
    Linked,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueSection {
    pub outage_probability: OutageSpec,
    #[serde(default)]
    pub higher_priority_mode: ModeSpec,
    #[serde(default)]
    pub arrival_energy: ArrivalEnergySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    #[default]
    Gaussian,
    ExactPoisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalEnergySpec {
    #[default]
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionSpec {
    #[default]
    Sojourn,
    Waiting,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        match self {
            GridSpec::List(v) => {
                if v.is_empty() {
                    return Err("grid is empty".into());
                }
                Ok(v.clone())
            }
            GridSpec::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Err(format!("grid needs step > 0 and stop >= start, got {start}..{stop} by {step}"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                if n > 10_000_000 {
                    return Err(format!("grid has {n} points"));
                }
                Ok((0..=n).map(|i| start + i as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySection {
    /// Defaults to the lowest-priority flow.
    pub flow: Option<usize>,
    pub d_th: GridSpec,
    #[serde(default)]
    pub convention: ConventionSpec,
    #[serde(default = "default_replications")]
    pub replications: usize,
}

fn default_replications() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "default_ple")]
    pub path_loss_exponent: f64,
    #[serde(default = "one")]
    pub rate: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub tx_power: f64,
}

fn default_ple() -> f64 {
    4.0
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleSpec {
    pub count: usize,
    pub radius: f64,
    #[serde(default)]
    pub rotation: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarSpec {
    pub radius: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(default = "default_cluster")]
    pub cluster_size: usize,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    pub circle: Option<CircleSpec>,
    pub antennas: Option<Vec<PolarSpec>>,
    /// Fixed co-channel users, one per cell; otherwise users are sampled.
    pub users: Option<Vec<PolarSpec>>,
    /// Replaces the hexagonal layout; the first center must be the origin.
    pub cell_centers: Option<Vec<[f64; 2]>>,
}

fn default_cluster() -> usize {
    7
}
fn default_spacing() -> f64 {
    dasqos::geometry::DEFAULT_SPACING
}
fn default_height() -> f64 {
    dasqos::geometry::DEFAULT_HEIGHT
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    #[serde(default)]
    pub mode: OptimizeMode,
    pub max_iter: Option<usize>,
    pub min_iter: Option<usize>,
    pub fd_step: Option<f64>,
    pub step_scale: Option<f64>,
    pub step_exponent: Option<f64>,
    pub convergence_window: Option<usize>,
    pub tolerance: Option<f64>,
    pub divergence_window: Option<usize>,
    pub eval_samples: Option<usize>,
    pub eval_every: Option<usize>,
    /// Write every this many trace rows (evaluated rows are always written).
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
}

fn default_trace_every() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeMode {
    #[default]
    RadiusOnly,
    FullPolar,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub radii: GridSpec,
    pub alphas: Option<Vec<f64>>,
}

/// Parsed file plus its source text, for line lookups.
#[derive(Debug, Clone)]
pub struct Config {
    source: String,
    pub raw: RawConfig,
    pub run: RunSection,
}

pub struct DelaySettings {
    pub flow: usize,
    pub thresholds: Vec<f64>,
    pub convention: DelayConvention,
    pub replications: usize,
}

pub struct QueueSettings {
    pub outage: OutageSpec,
    pub mode: HigherPriorityMode,
    pub arrival_energy: ArrivalEnergyMode,
}

impl Config {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(source).map_err(|e| {
            let line = e.span().map(|s| line_of(source, s.start));
            ConfigError::new(line, e.message().trim().to_string())
        })?;
        let run = raw.run.as_ref().map(|r| r.get_ref().clone()).unwrap_or_default();
        let cfg = Self { source: source.to_string(), raw, run };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(None, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&source)
    }

    fn line(&self, span: Range<usize>) -> Option<usize> {
        Some(line_of(&self.source, span.start))
    }

    fn at<T>(&self, span: Range<usize>, r: Result<T, impl ToString>) -> Result<T, ConfigError> {
        r.map_err(|e| ConfigError::new(self.line(span), e.to_string()))
    }

    /// Checks every section that is present.
    fn validate(&self) -> Result<(), ConfigError> {
        if let Some(run) = &self.raw.run {
            let r = run.get_ref();
            self.at(run.span(), check(r.samples >= 1, "run.samples must be >= 1"))?;
            self.at(run.span(), check(r.horizon > r.warmup, "run.horizon must exceed run.warmup"))?;
            self.at(run.span(), check(r.threads != Some(0), "run.threads must be >= 1"))?;
        }
        if !self.raw.flows.is_empty() {
            let p = match self.queue()?.map(|q| q.outage) {
                Some(OutageSpec::Fixed(p)) => p,
                _ => 0.5,
            };
            self.flows(p)?;
        }
        if let Some(q) = &self.raw.queue {
            if let OutageSpec::Fixed(p) = q.get_ref().outage_probability {
                self.at(q.span(), check((0.0..1.0).contains(&p), "queue.outage_probability must lie in [0, 1)"))?;
            }
        }
        if self.raw.delay.is_some() {
            self.delay()?;
        }
        if self.raw.channel.is_some() || self.raw.geometry.is_some() {
            self.scenario()?;
            self.fixed_users()?;
        }
        if self.raw.optimize.is_some() {
            self.rm_config()?;
        }
        if self.raw.sweep.is_some() {
            self.sweep()?;
        }
        Ok(())
    }

    /// Flows with truncated-geometric service built at outage probability `p`.
    pub fn flows(&self, p: f64) -> Result<Vec<TrafficFlow>, ConfigError> {
        if self.raw.flows.is_empty() {
            return Err(ConfigError::new(None, "no [[flows]] entries"));
        }
        let mut flows = Vec::with_capacity(self.raw.flows.len());
        for spec in &self.raw.flows {
            let f = spec.get_ref();
            let arrival = match *f.arrival.get_ref() {
                ArrivalSpec::Poisson { rate } => ArrivalModel::poisson(rate),
                ArrivalSpec::MarkovFluid { rate1, rate2, pi1, gamma1, gamma2 } => match (pi1, gamma1, gamma2) {
                    (Some(pi1), None, None) => ArrivalModel::markov_fluid(rate1, rate2, pi1),
                    (None, Some(g1), Some(g2)) => ArrivalModel::from_transition_rates(rate1, rate2, g1, g2),
                    _ => Err(dasqos::Error::InvalidParameter(
                        "markov_fluid needs either pi1 or both gamma1 and gamma2".into(),
                    )),
                },
                ArrivalSpec::Renewal { mean, var } => {
                    let m = ArrivalModel::GenericRenewal { mean, var };
                    m.validate().map(|_| m)
                }
            };
            let arrival = self.at(f.arrival.span(), arrival)?;
            let service = match *f.service.get_ref() {
                ServiceSpec::Unit => Ok(ServiceModel::DeterministicUnit),
                ServiceSpec::TruncatedGeometric { max_transmissions } => ServiceModel::truncated_geometric(p, max_transmissions),
            };
            let service = self.at(f.service.span(), service)?;
            flows.push(TrafficFlow::new(f.priority, arrival, service));
        }
        let span = self.raw.flows[0].span();
        self.at(span, dasqos::traffic::order_flows(&flows))?;
        Ok(flows)
    }

    pub fn queue(&self) -> Result<Option<QueueSettings>, ConfigError> {
        Ok(self.raw.queue.as_ref().map(|q| {
            let q = q.get_ref();
            QueueSettings {
                outage: q.outage_probability,
                mode: match q.higher_priority_mode {
                    ModeSpec::Gaussian => HigherPriorityMode::Gaussian,
                    ModeSpec::ExactPoisson => HigherPriorityMode::ExactPoisson,
                },
                arrival_energy: match q.arrival_energy {
                    ArrivalEnergySpec::Exact => ArrivalEnergyMode::Exact,
                    ArrivalEnergySpec::Asymptotic => ArrivalEnergyMode::Asymptotic,
                },
            }
        }))
    }

    pub fn require_queue(&self) -> Result<QueueSettings, ConfigError> {
        self.queue()?.ok_or_else(|| ConfigError::new(None, "missing [queue] section (outage_probability)"))
    }

    pub fn delay(&self) -> Result<DelaySettings, ConfigError> {
        let d = self.raw.delay.as_ref().ok_or_else(|| ConfigError::new(None, "missing [delay] section"))?;
        let span = d.span();
        let d = d.get_ref();
        let thresholds = self.at(span.clone(), d.d_th.values())?;
        self.at(span.clone(), check(thresholds.iter().all(|t| *t >= 0.0 && t.is_finite()), "delay thresholds must be >= 0"))?;
        self.at(span.clone(), check(d.replications >= 1, "delay.replications must be >= 1"))?;
        let n = self.raw.flows.len();
        let flow = d.flow.unwrap_or(n);
        self.at(span, check(n == 0 || (1..=n).contains(&flow), "delay.flow must name a configured priority"))?;
        Ok(DelaySettings {
            flow,
            thresholds,
            convention: match d.convention {
                ConventionSpec::Sojourn => DelayConvention::Sojourn,
                ConventionSpec::Waiting => DelayConvention::Waiting,
            },
            replications: d.replications,
        })
    }

    pub fn channel(&self) -> Result<ChannelParams, ConfigError> {
        let Some(c) = &self.raw.channel else { return Ok(ChannelParams::default()) };
        let s = c.get_ref();
        let params = ChannelParams { path_loss_exponent: s.path_loss_exponent, rate: s.rate, alpha: s.alpha, tx_power: s.tx_power };
        self.at(c.span(), params.validate())?;
        Ok(params)
    }

    fn geometry_section(&self) -> Result<&Spanned<GeometrySection>, ConfigError> {
        self.raw.geometry.as_ref().ok_or_else(|| ConfigError::new(None, "missing [geometry] section"))
    }

    pub fn layout(&self) -> Result<ClusterLayout, ConfigError> {
        let g = self.geometry_section()?;
        let s = g.get_ref();
        let layout = match &s.cell_centers {
            Some(centers) => ClusterLayout::with_centers(centers.iter().map(|c| (c[0], c[1])).collect(), s.spacing),
            None => hex_cluster(s.cluster_size, s.spacing),
        };
        self.at(g.span(), layout)
    }

    pub fn antennas(&self) -> Result<AntennaVector, ConfigError> {
        let g = self.geometry_section()?;
        let s = g.get_ref();
        let v = match (&s.circle, &s.antennas) {
            (Some(c), None) => symmetric_circle(c.count, c.radius, c.rotation, s.height),
            (None, Some(list)) => AntennaVector::new(list.iter().map(|a| Antenna { radius: a.radius, angle: a.angle }).collect(), s.height),
            _ => Err(dasqos::Error::InvalidParameter("geometry needs exactly one of `circle` or `antennas`".into())),
        };
        self.at(g.span(), v)
    }

    pub fn circle(&self) -> Result<&CircleSpec, ConfigError> {
        let g = self.geometry_section()?;
        g.get_ref()
            .circle
            .as_ref()
            .ok_or_else(|| ConfigError::new(self.line(g.span()), "this command needs a symmetric `circle` geometry"))
    }

    pub fn scenario(&self) -> Result<CellScenario, ConfigError> {
        let g = self.geometry_section()?;
        let s = CellScenario::new(self.layout()?, self.antennas()?, self.channel()?);
        self.at(g.span(), s)
    }

    pub fn fixed_users(&self) -> Result<Option<UserVector>, ConfigError> {
        let g = self.geometry_section()?;
        let Some(users) = &g.get_ref().users else { return Ok(None) };
        let layout = self.layout()?;
        let users = UserVector::new(&layout, users.iter().map(|u| UserPosition { radius: u.radius, angle: u.angle }).collect());
        self.at(g.span(), users).map(Some)
    }

    pub fn rm_config(&self) -> Result<(RmConfig, usize), ConfigError> {
        let (o, span) = match &self.raw.optimize {
            Some(o) => (o.get_ref().clone(), Some(o.span())),
            None => (OptimizeSection { trace_every: 1, ..Default::default() }, None),
        };
        let d = RmConfig::default();
        let cfg = RmConfig {
            mode: match o.mode {
                OptimizeMode::RadiusOnly => RmMode::RadiusOnly,
                OptimizeMode::FullPolar => RmMode::FullPolar,
            },
            step_scale: o.step_scale.unwrap_or(d.step_scale),
            step_exponent: o.step_exponent.unwrap_or(d.step_exponent),
            fd_step: o.fd_step.unwrap_or(d.fd_step),
            max_iter: o.max_iter.unwrap_or(d.max_iter),
            min_iter: o.min_iter.unwrap_or(d.min_iter),
            convergence_window: o.convergence_window.unwrap_or(d.convergence_window),
            tolerance: o.tolerance.unwrap_or(d.tolerance),
            divergence_window: o.divergence_window.unwrap_or(d.divergence_window),
            eval_samples: o.eval_samples.unwrap_or(self.run.samples),
            eval_every: o.eval_every.unwrap_or(d.eval_every),
        };
        let line = span.and_then(|s| self.line(s));
        cfg.validate().map_err(|e| ConfigError::new(line, e.to_string()))?;
        if o.trace_every == 0 {
            return Err(ConfigError::new(line, "optimize.trace_every must be >= 1"));
        }
        Ok((cfg, o.trace_every))
    }

    pub fn sweep(&self) -> Result<(Vec<f64>, Option<Vec<f64>>), ConfigError> {
        let s = self.raw.sweep.as_ref().ok_or_else(|| ConfigError::new(None, "missing [sweep] section"))?;
        let radii = self.at(s.span(), s.get_ref().radii.values())?;
        self.at(s.span(), check(radii.iter().all(|r| (0.0..=1.0).contains(r)), "sweep radii must lie in [0, 1]"))?;
        let alphas = s.get_ref().alphas.clone();
        if let Some(a) = &alphas {
            self.at(s.span(), check(!a.is_empty() && a.iter().all(|x| (0.0..=1.0).contains(x)), "sweep alphas must lie in [0, 1]"))?;
        }
        Ok((radii, alphas))
    }
}

fn check(cond: bool, msg: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

/// 1-based line of a byte offset.
pub fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// `[geometry]` block for a layout, in config syntax.
pub fn geometry_block(layout: &ClusterLayout, antennas: &AntennaVector, users: Option<&UserVector>, hex_size: Option<usize>) -> String {
    let mut out = String::from("[geometry]\n");
    match hex_size {
        Some(size) => out.push_str(&format!("cluster_size = {size}\n")),
        None => {
            let centers: Vec<String> = layout.centers().iter().map(|c| format!("[{:?}, {:?}]", c.0, c.1)).collect();
            out.push_str(&format!("cell_centers = [{}]\n", centers.join(", ")));
        }
    }
    out.push_str(&format!("spacing = {:?}\nheight = {:?}\nantennas = [\n", layout.spacing(), antennas.height()));
    for a in antennas.antennas() {
        out.push_str(&format!("  {{ radius = {:?}, angle = {:?} }},\n", a.radius, a.angle));
    }
    out.push_str("]\n");
    if let Some(users) = users {
        out.push_str("users = [\n");
        for u in users.users() {
            out.push_str(&format!("  {{ radius = {:?}, angle = {:?} }},\n", u.radius, u.angle));
        }
        out.push_str("]\n");
    }
    out
}
