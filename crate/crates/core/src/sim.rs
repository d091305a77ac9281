//! Slotted simulation of the strict-priority single server.
//!
//! Slot `k` covers `[k, k+1)`. A packet arriving at time `t` belongs to slot
//! `floor(t)` and becomes eligible at the next boundary. At the start of
//! every slot the head-of-line packet of the highest-priority nonempty queue
//! gets one transmission attempt, which fails with probability `p`.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{check, Result};
use crate::priority::PrioritySystem;
use crate::rng;
use crate::traffic::{order_flows, sample_interarrival, ServiceModel, TrafficFlow};

/// Normal quantile for the 95% Wilson interval.
const Z95: f64 = 1.959963984540054;
/// Thresholds with fewer tail events are left out of comparisons.
pub const MIN_TAIL_EVENTS: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayConvention {
    /// Final-attempt slot minus arrival slot.
    #[default]
    Sojourn,
    /// First-attempt slot minus the slot the packet became eligible.
    Waiting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub flows: Vec<TrafficFlow>,
    /// Per-attempt failure probability, shared by every flow.
    pub p: f64,
    pub horizon: u64,
    pub warmup: u64,
    pub seed: u64,
    pub delay_convention: DelayConvention,
}

impl SimConfig {
    pub fn new(flows: Vec<TrafficFlow>, p: f64, horizon: u64, warmup: u64, seed: u64) -> Self {
        Self { flows, p, horizon, warmup, seed, delay_convention: DelayConvention::Sojourn }
    }

    pub fn with_convention(mut self, convention: DelayConvention) -> Self {
        self.delay_convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check((0.0..1.0).contains(&self.p), || format!("outage probability must lie in [0, 1), got {}", self.p))?;
        check(self.horizon > self.warmup, || {
            format!("horizon ({}) must exceed warmup ({})", self.horizon, self.warmup)
        })?;
        order_flows(&self.flows)?;
        for f in &self.flows {
            if let ServiceModel::TruncatedGeometric { p, .. } = f.service {
                check((p - self.p).abs() <= 1e-12, || {
                    format!("flow {} service uses p = {p} but the simulation uses p = {}", f.priority, self.p)
                })?;
            }
        }
        Ok(())
    }
}

/// Integer delay counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DelayHistogram {
    counts: Vec<u64>,
    total: u64,
    sum: u128,
}

impl DelayHistogram {
    pub fn record(&mut self, d: u64) {
        let d = d as usize;
        if d >= self.counts.len() {
            self.counts.resize(d + 1, 0);
        }
        self.counts[d] += 1;
        self.total += 1;
        self.sum += d as u128;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn mean(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.sum as f64 / self.total as f64
        }
    }

    pub fn max(&self) -> Option<u64> {
        self.counts.iter().rposition(|&c| c > 0).map(|d| d as u64)
    }

    /// Number of delays strictly greater than `d`.
    pub fn exceeding(&self, d: u64) -> u64 {
        self.counts.iter().skip(d as usize + 1).sum()
    }

    /// `P(D > d)` with its 95% Wilson interval.
    pub fn ccdf(&self, d: u64) -> CcdfPoint {
        let events = self.exceeding(d);
        let (low, high) = wilson(events, self.total);
        CcdfPoint {
            d_th: d,
            prob: if self.total == 0 { 0.0 } else { events as f64 / self.total as f64 },
            ci_low: low,
            ci_high: high,
            events,
        }
    }

    /// `P(D > d)` for `d = 0..=max`.
    pub fn ccdf_curve(&self) -> Vec<CcdfPoint> {
        let Some(max) = self.max() else { return Vec::new() };
        let mut tail = self.total;
        (0..=max)
            .map(|d| {
                tail -= self.counts[d as usize];
                let (low, high) = wilson(tail, self.total);
                CcdfPoint { d_th: d, prob: tail as f64 / self.total as f64, ci_low: low, ci_high: high, events: tail }
            })
            .collect()
    }

    pub fn merge(&mut self, other: &Self) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.sum += other.sum;
    }
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let phat = k as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z95 * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if k as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (low, high)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdfPoint {
    pub d_th: u64,
    pub prob: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowStats {
    pub priority: usize,
    pub delays: DelayHistogram,
    /// Sojourn delays, recorded whatever the convention.
    pub sojourn: DelayHistogram,
    /// Packets that left the queue, delivered or lost.
    pub completed: u64,
    pub lost: u64,
    pub arrivals: u64,
    queue_area: u128,
    slots: u64,
}

impl FlowStats {
    pub fn served(&self) -> u64 {
        self.completed - self.lost
    }

    pub fn loss_rate(&self) -> f64 {
        if self.completed == 0 {
            0.0
        } else {
            self.lost as f64 / self.completed as f64
        }
    }

    pub fn loss_std_error(&self) -> f64 {
        let q = self.loss_rate();
        if self.completed == 0 {
            0.0
        } else {
            (q * (1.0 - q) / self.completed as f64).sqrt()
        }
    }

    /// Time-average queue length sampled at slot starts, head of line included.
    pub fn mean_queue_length(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.queue_area as f64 / self.slots as f64
        }
    }

    pub fn arrival_rate(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.arrivals as f64 / self.slots as f64
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.delays.merge(&other.delays);
        self.sojourn.merge(&other.sojourn);
        self.completed += other.completed;
        self.lost += other.lost;
        self.arrivals += other.arrivals;
        self.queue_area += other.queue_area;
        self.slots += other.slots;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    /// Ordered by priority.
    pub flows: Vec<FlowStats>,
    pub convention: DelayConvention,
    /// Offered load at or above one.
    pub unstable: bool,
    /// Slots the server idled while a queue was backlogged.
    pub work_conservation_violations: u64,
    /// Slots served from a lower-priority queue than the best nonempty one.
    pub priority_violations: u64,
    pub measured_slots: u64,
}

impl SimStats {
    pub fn flow(&self, priority: usize) -> &FlowStats {
        &self.flows[priority - 1]
    }

    /// Pools the event counts of independent replications.
    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.flows.iter_mut().zip(&other.flows) {
            a.merge(b);
        }
        self.unstable |= other.unstable;
        self.work_conservation_violations += other.work_conservation_violations;
        self.priority_violations += other.priority_violations;
        self.measured_slots += other.measured_slots;
    }
}

struct Packet {
    slot: u64,
    attempts: u32,
    first_attempt: u64,
}

/// Runs one replication.
pub fn simulate(cfg: &SimConfig) -> Result<SimStats> {
    cfg.validate()?;
    let flows = order_flows(&cfg.flows)?;
    let load: f64 = flows.iter().map(|f| f.load()).sum();
    let unstable = load >= 1.0;
    if unstable {
        log::warn!("offered load {load:.4} is not below one; delays will grow with the horizon");
    }

    let mut service_rng = rng::stream(cfg.seed, 0);
    let mut arrival_rngs: Vec<_> = (0..flows.len()).map(|i| rng::stream(cfg.seed, 1 + i as u64)).collect();
    let mut next_arrival: Vec<f64> = flows
        .iter()
        .zip(arrival_rngs.iter_mut())
        .map(|(f, r)| sample_interarrival(&f.arrival, r))
        .collect();
    let max_attempts: Vec<u32> = flows
        .iter()
        .map(|f| match f.service {
            ServiceModel::DeterministicUnit => 1,
            ServiceModel::TruncatedGeometric { max_transmissions, .. } => max_transmissions,
        })
        .collect();
    let unit: Vec<bool> = flows.iter().map(|f| f.service.is_unit()).collect();

    let mut queues: Vec<VecDeque<Packet>> = (0..flows.len()).map(|_| VecDeque::new()).collect();
    let mut stats: Vec<FlowStats> = flows
        .iter()
        .map(|f| FlowStats { priority: f.priority, ..Default::default() })
        .collect();
    let mut work_violations = 0;
    let mut priority_violations = 0;

    for s in 0..cfg.horizon {
        let measuring = s >= cfg.warmup;
        let now = s as f64;
        for (i, f) in flows.iter().enumerate() {
            while next_arrival[i] < now {
                let slot = next_arrival[i].floor() as u64;
                queues[i].push_back(Packet { slot, attempts: 0, first_attempt: 0 });
                if slot >= cfg.warmup {
                    stats[i].arrivals += 1;
                }
                next_arrival[i] += sample_interarrival(&f.arrival, &mut arrival_rngs[i]);
            }
        }
        if measuring {
            for (st, q) in stats.iter_mut().zip(&queues) {
                st.queue_area += q.len() as u128;
                st.slots += 1;
            }
        }

        let best = queues.iter().position(|q| !q.is_empty());
        let served = best;
        if served.is_none() && queues.iter().any(|q| !q.is_empty()) {
            work_violations += 1;
        }
        let Some(i) = served else { continue };
        if best.is_some_and(|b| i > b) {
            priority_violations += 1;
        }

        let failed = cfg.p > 0.0 && service_rng.random::<f64>() < cfg.p;
        let head = queues[i].front_mut().expect("served queue is nonempty");
        if head.attempts == 0 {
            head.first_attempt = s;
        }
        head.attempts += 1;
        let done = !failed || unit[i] || head.attempts >= max_attempts[i];
        if !done {
            continue;
        }
        let pkt = queues[i].pop_front().expect("served queue is nonempty");
        // packets that arrived during warmup are not counted
        if pkt.slot < cfg.warmup {
            continue;
        }
        let st = &mut stats[i];
        st.completed += 1;
        if failed {
            st.lost += 1;
        }
        let sojourn = s - pkt.slot;
        st.sojourn.record(sojourn);
        st.delays.record(match cfg.delay_convention {
            DelayConvention::Sojourn => sojourn,
            DelayConvention::Waiting => pkt.first_attempt - (pkt.slot + 1),
        });
    }

    Ok(SimStats {
        flows: stats,
        convention: cfg.delay_convention,
        unstable,
        work_conservation_violations: work_violations,
        priority_violations,
        measured_slots: cfg.horizon - cfg.warmup,
    })
}

/// Runs `replications` independent copies with seeds derived from
/// `cfg.seed` and pools their counts.
pub fn simulate_replications(cfg: &SimConfig, replications: usize) -> Result<SimStats> {
    check(replications >= 1, || "at least one replication is required".to_string())?;
    let runs = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.seed = rng::stream(cfg.seed, u64::MAX - r).random();
            simulate(&c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = runs.into_iter();
    let mut pooled = iter.next().expect("at least one replication");
    for s in iter {
        pooled.merge(&s);
    }
    Ok(pooled)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdGap {
    pub d_th: f64,
    pub empirical: f64,
    pub analytic: f64,
    pub events: u64,
    /// `log10(empirical) - log10(analytic)`; `None` when excluded.
    pub log10_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub priority: usize,
    pub rows: Vec<ThresholdGap>,
    /// Thresholds dropped for having fewer than [`MIN_TAIL_EVENTS`] events.
    pub excluded: Vec<f64>,
    /// Fitted empirical log-CCDF slope over the analytic slope.
    pub slope_ratio: Option<f64>,
}

impl ComparisonReport {
    pub fn max_abs_gap(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.log10_gap.map(f64::abs)).reduce(f64::max)
    }

    pub fn mean_abs_gap(&self) -> Option<f64> {
        let gaps: Vec<f64> = self.rows.iter().filter_map(|r| r.log10_gap.map(f64::abs)).collect();
        (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
    }
}

fn ls_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Compares the empirical CCDF of one flow with an analytic curve of
/// `(d_th, probability)` pairs. Delays are integers, so `P(D > d_th)` is read
/// at `floor(d_th)`.
pub fn compare_with_analysis(stats: &SimStats, priority: usize, analytic: &[(f64, f64)]) -> ComparisonReport {
    let hist = &stats.flow(priority).delays;
    let mut rows = Vec::with_capacity(analytic.len());
    let mut excluded = Vec::new();
    let mut emp_pts = Vec::new();
    let mut ana_pts = Vec::new();
    for &(d_th, prob) in analytic {
        let point = hist.ccdf(d_th.max(0.0).floor() as u64);
        let usable = point.events >= MIN_TAIL_EVENTS && prob > 0.0;
        let gap = usable.then(|| point.prob.log10() - prob.log10());
        if usable {
            emp_pts.push((d_th, point.prob.log10()));
            ana_pts.push((d_th, prob.log10()));
        } else {
            excluded.push(d_th);
        }
        rows.push(ThresholdGap { d_th, empirical: point.prob, analytic: prob, events: point.events, log10_gap: gap });
    }
    let slope_ratio = match (ls_slope(&emp_pts), ls_slope(&ana_pts)) {
        (Some(e), Some(a)) if a != 0.0 => Some(e / a),
        _ => None,
    };
    ComparisonReport { priority, rows, excluded, slope_ratio }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub chosen: DelayConvention,
    pub sojourn: ComparisonReport,
    pub waiting: ComparisonReport,
}

/// Simulates under both delay conventions and keeps the one whose curve
/// sits closer to the analytic one (smaller mean absolute log10 gap).
pub fn calibrate_convention(system: &PrioritySystem, priority: usize, cfg: &SimConfig, thresholds: &[f64]) -> Result<Calibration> {
    let curve = system.delay_curve(priority, thresholds)?;
    let run = |conv| -> Result<ComparisonReport> {
        let stats = simulate(&cfg.clone().with_convention(conv))?;
        Ok(compare_with_analysis(&stats, priority, &curve))
    };
    let sojourn = run(DelayConvention::Sojourn)?;
    let waiting = run(DelayConvention::Waiting)?;
    let s = sojourn.mean_abs_gap().unwrap_or(f64::INFINITY);
    let w = waiting.mean_abs_gap().unwrap_or(f64::INFINITY);
    let chosen = if w < s { DelayConvention::Waiting } else { DelayConvention::Sojourn };
    Ok(Calibration { chosen, sojourn, waiting })
}
