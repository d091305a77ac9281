//! Delay-bound violation probabilities under strict priority.
//!
//! Flow `n` sees a service process thinned by the work of flows `1..n`:
//!
//! ```text
//! G~_n(phi) = G_n(phi) + sum_{j<n} T_j(u),   u = -phi/mu_y + phi^2 var_y / (2 mu_y^3)
//! ```
//!
//! where `G_n` is the asymptotic renewal energy of flow `n`'s own service
//! and `T_j` is the energy of the work flow `j` brings per slot. The decay
//! rate of the delay tail is `Lambda_n(phi*)`, with `phi*` the positive root
//! of `Lambda_n(phi) + G~_n(-phi) = 0`.

use crate::energy::{renewal_energy, Direction, EnergyFunction, EnergyKind};
use crate::error::{check, Error, Result};
use crate::root::{positive_root, BracketOptions};
use crate::traffic::{order_flows, ArrivalModel, ServiceModel, TrafficFlow};

/// How the work brought by higher-priority flows enters `G~_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HigherPriorityMode {
    /// Gaussian random-sum approximation, valid for any renewal flow.
    #[default]
    Gaussian,
    /// `lambda_j (e^u - 1)`; only for Poisson flows with unit service.
    ExactPoisson,
}

/// Which arrival energy `Lambda_n` a flow uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArrivalEnergyMode {
    /// Exact Poisson energy for Poisson flows, asymptotic renewal otherwise.
    #[default]
    Exact,
    /// Asymptotic renewal energy for every flow.
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrioritySystem {
    flows: Vec<TrafficFlow>,
    pub higher_priority_mode: HigherPriorityMode,
    pub arrival_energy_mode: ArrivalEnergyMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayQuery {
    /// 1-based flow index.
    pub flow: usize,
    /// Delay threshold in slots.
    pub d_th: f64,
}

/// Result of the root solve for one flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiStar {
    pub phi: f64,
    /// `Lambda_n(phi*)`, the exponential decay rate of the delay tail.
    pub decay_rate: f64,
    pub residual: f64,
}

impl PrioritySystem {
    pub fn new(flows: &[TrafficFlow], mode: HigherPriorityMode) -> Result<Self> {
        Ok(Self {
            flows: order_flows(flows)?,
            higher_priority_mode: mode,
            arrival_energy_mode: ArrivalEnergyMode::default(),
        })
    }

    pub fn with_arrival_energy(mut self, mode: ArrivalEnergyMode) -> Self {
        self.arrival_energy_mode = mode;
        self
    }

    pub fn flows(&self) -> &[TrafficFlow] {
        &self.flows
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    fn flow(&self, n: usize) -> Result<&TrafficFlow> {
        check(n >= 1 && n <= self.flows.len(), || format!("flow index {n} outside 1..={}", self.flows.len()))?;
        Ok(&self.flows[n - 1])
    }

    /// Effective load of flows `1..=n`.
    pub fn load_up_to(&self, n: usize) -> f64 {
        self.flows[..n.min(self.flows.len())].iter().map(TrafficFlow::load).sum()
    }

    pub fn arrival_energy(&self, n: usize) -> Result<EnergyFunction> {
        let f = self.flow(n)?;
        let kind = match (self.arrival_energy_mode, f.arrival) {
            (ArrivalEnergyMode::Exact, ArrivalModel::Poisson { rate }) => EnergyKind::ExactPoisson { rate },
            _ => {
                let m = f.arrival_moments();
                EnergyKind::AsymptoticRenewal { mean: m.mean, var: m.var }
            }
        };
        Ok(EnergyFunction::new(kind, Direction::Arrival))
    }

    /// `G~_n(phi)`.
    pub fn service_energy(&self, n: usize, phi: f64) -> Result<f64> {
        let own = self.flow(n)?.service_moments();
        let u = renewal_energy(own.mean, own.var, -phi);
        let mut total = renewal_energy(own.mean, own.var, phi);
        for j in &self.flows[..n - 1] {
            total += self.higher_priority_term(j, u)?;
        }
        Ok(total)
    }

    fn higher_priority_term(&self, flow: &TrafficFlow, u: f64) -> Result<f64> {
        match self.higher_priority_mode {
            HigherPriorityMode::Gaussian => {
                let x = flow.arrival_moments();
                let y = flow.service_moments();
                let mean_rate = y.mean / x.mean;
                let var_rate = y.mean * y.mean * x.var / x.mean.powi(3) + y.var / x.mean;
                Ok(u * mean_rate + 0.5 * u * u * var_rate)
            }
            HigherPriorityMode::ExactPoisson => match (flow.arrival, flow.service) {
                (ArrivalModel::Poisson { rate }, ServiceModel::DeterministicUnit) => Ok(rate * u.exp_m1()),
                _ => Err(Error::InvalidMode(format!(
                    "exact_poisson needs Poisson arrivals with unit service, flow {} has {:?} / {:?}",
                    flow.priority, flow.arrival, flow.service
                ))),
            },
        }
    }

    /// `Lambda_n(phi) + G~_n(-phi)`.
    pub fn root_equation(&self, n: usize, phi: f64) -> Result<f64> {
        Ok(self.arrival_energy(n)?.eval(phi) + self.service_energy(n, -phi)?)
    }

    pub fn solve_phi_star(&self, n: usize) -> Result<PhiStar> {
        self.flow(n)?;
        let load = self.load_up_to(n);
        if load >= 1.0 {
            return Err(Error::Unstable { flow: n, load });
        }
        // surfaces an invalid mode before the solver swallows it
        self.root_equation(n, 0.5)?;
        let lambda = self.arrival_energy(n)?;
        let r = |phi: f64| lambda.eval(phi) + self.service_energy(n, -phi).unwrap_or(f64::NAN);
        let root = positive_root(r, BracketOptions::default())?;
        Ok(PhiStar {
            phi: root.x,
            decay_rate: lambda.eval(root.x),
            residual: root.fx,
        })
    }

    pub fn delay_violation_probability(&self, q: DelayQuery) -> Result<f64> {
        check(q.d_th >= 0.0 && q.d_th.is_finite(), || format!("delay threshold must be finite and >= 0, got {}", q.d_th))?;
        let s = self.solve_phi_star(q.flow)?;
        Ok((-s.decay_rate * q.d_th).exp())
    }

    /// `(d_th, probability)` pairs for one flow, solving for `phi*` once.
    pub fn delay_curve(&self, flow: usize, thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
        let s = self.solve_phi_star(flow)?;
        thresholds
            .iter()
            .map(|&d| {
                check(d >= 0.0 && d.is_finite(), || format!("delay threshold must be finite and >= 0, got {d}"))?;
                Ok((d, (-s.decay_rate * d).exp()))
            })
            .collect()
    }
}

/// Voice / multimedia A / multimedia B / data configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourFlowParams {
    pub voice_rate: f64,
    /// `(rate1, rate2, pi1)` of the multimedia A source.
    pub media_a: (f64, f64, f64),
    pub media_b: (f64, f64, f64),
    pub data_rate: f64,
    pub p: f64,
    pub max_transmissions: u32,
}

impl FourFlowParams {
    pub fn flows(&self) -> Result<Vec<TrafficFlow>> {
        let unit = ServiceModel::DeterministicUnit;
        let (a1, a2, pa) = self.media_a;
        let (b1, b2, pb) = self.media_b;
        Ok(vec![
            TrafficFlow::new(1, ArrivalModel::poisson(self.voice_rate)?, unit),
            TrafficFlow::new(2, ArrivalModel::markov_fluid(a1, a2, pa)?, unit),
            TrafficFlow::new(3, ArrivalModel::markov_fluid(b1, b2, pb)?, unit),
            TrafficFlow::new(
                4,
                ArrivalModel::poisson(self.data_rate)?,
                ServiceModel::truncated_geometric(self.p, self.max_transmissions)?,
            ),
        ])
    }

    pub fn system(&self) -> Result<PrioritySystem> {
        PrioritySystem::new(&self.flows()?, HigherPriorityMode::Gaussian)
    }
}

/// Delay-violation probability of the data flow in the four-flow system.
pub fn four_flow_delay(params: &FourFlowParams, d_th: f64) -> Result<f64> {
    params.system()?.delay_violation_probability(DelayQuery { flow: 4, d_th })
}

/// Voice (priority 1, unit service) plus data (priority 2, truncated
/// geometric service), both Poisson.
pub fn two_flow_system(voice_rate: f64, data_rate: f64, p: f64, max_transmissions: u32, mode: HigherPriorityMode) -> Result<PrioritySystem> {
    PrioritySystem::new(
        &[
            TrafficFlow::new(1, ArrivalModel::poisson(voice_rate)?, ServiceModel::DeterministicUnit),
            TrafficFlow::new(2, ArrivalModel::poisson(data_rate)?, ServiceModel::truncated_geometric(p, max_transmissions)?),
        ],
        mode,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(rate: f64) -> PrioritySystem {
        PrioritySystem::new(
            &[TrafficFlow::new(1, ArrivalModel::poisson(rate).unwrap(), ServiceModel::DeterministicUnit)],
            HigherPriorityMode::Gaussian,
        )
        .unwrap()
    }

    // e^x - 1 = c x by fixed-point iteration x <- ln(1 + c x)
    fn fixed_point(c: f64) -> f64 {
        let mut x = 5.0;
        for _ in 0..10_000 {
            x = (1.0 + c * x).ln();
        }
        x
    }

    #[test]
    fn highest_priority_unit_service_is_identity() {
        let s = single(0.3);
        for phi in [-1.0, 0.2, 2.0] {
            assert!((s.service_energy(1, phi).unwrap() - phi).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_star_single_flow() {
        let s = single(0.5).solve_phi_star(1).unwrap();
        let oracle = fixed_point(2.0);
        assert!((s.phi - oracle).abs() < 1e-10, "{} vs {oracle}", s.phi);
        assert!((s.phi - 1.25643).abs() < 1e-5);
        assert!(s.residual.abs() < 1e-10);

        let s = single(0.1).solve_phi_star(1).unwrap();
        assert!((s.phi - fixed_point(10.0)).abs() < 1e-10);
        assert!((s.phi - 3.614950).abs() < 1e-6);
    }

    #[test]
    fn phi_star_vanishes_at_stability_boundary() {
        let mut last = f64::INFINITY;
        for rate in [0.9, 0.99, 0.999] {
            let phi = single(rate).solve_phi_star(1).unwrap().phi;
            assert!(phi < last);
            last = phi;
        }
        assert!(last < 0.01);
        assert!(matches!(single(1.0).solve_phi_star(1), Err(Error::Unstable { .. })));
    }

    #[test]
    fn delay_examples() {
        let s = single(0.5);
        assert_eq!(s.delay_violation_probability(DelayQuery { flow: 1, d_th: 0.0 }).unwrap(), 1.0);
        let p = s.delay_violation_probability(DelayQuery { flow: 1, d_th: 5.0 }).unwrap();
        let expected = (-fixed_point(2.0) * 5.0).exp();
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 0.0018694).abs() < 1e-7);
        assert!(s.delay_violation_probability(DelayQuery { flow: 2, d_th: 1.0 }).is_err());
        assert!(s.delay_violation_probability(DelayQuery { flow: 1, d_th: -1.0 }).is_err());
    }

    #[test]
    fn two_flow_exact_poisson_composition() {
        let (lv, p, l, phi) = (0.2, 0.1, 4, 0.5);
        let sys = two_flow_system(lv, 0.5, p, l, HigherPriorityMode::ExactPoisson).unwrap();
        // written out by hand from the truncated-geometric moments
        let mu = (1.0 - p * p * p * p) / (1.0 - p);
        let var = (p - 7.0 * p.powi(4) + 7.0 * p.powi(5) - p.powi(8)) / ((1.0 - p) * (1.0 - p));
        let quad = phi * phi * var / (2.0 * mu * mu * mu);
        let expected = phi / mu + quad + lv * ((-phi / mu + quad).exp() - 1.0);
        assert!((sys.service_energy(2, phi).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn silent_voice_leaves_service_untouched() {
        // gaussian term scales with the voice rate
        let sys = two_flow_system(1e-12, 0.5, 0.1, 4, HigherPriorityMode::Gaussian).unwrap();
        let own = sys.flows()[1].service_moments();
        for phi in [-0.7, 0.3, 1.1] {
            let v = sys.service_energy(2, phi).unwrap();
            assert!((v - renewal_energy(own.mean, own.var, phi)).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_mode_rejects_non_poisson_higher_flow() {
        let params = FourFlowParams {
            voice_rate: 0.2,
            media_a: (0.1, 0.2, 0.4),
            media_b: (0.3, 0.2, 0.7),
            data_rate: 0.05,
            p: 0.1,
            max_transmissions: 4,
        };
        let mut sys = params.system().unwrap();
        sys.higher_priority_mode = HigherPriorityMode::ExactPoisson;
        assert!(matches!(sys.service_energy(4, 0.1), Err(Error::InvalidMode(_))));
        assert!(matches!(sys.solve_phi_star(4), Err(Error::InvalidMode(_))));
        // flow 2 only sees the Poisson voice flow
        assert!(sys.service_energy(2, 0.1).is_ok());
    }

    #[test]
    fn root_is_unique_on_bracket() {
        let sys = two_flow_system(0.2, 0.6, 0.1, 4, HigherPriorityMode::ExactPoisson).unwrap();
        let s = sys.solve_phi_star(2).unwrap();
        assert!(sys.root_equation(2, s.phi).unwrap().abs() < 1e-10);
        let hi = s.phi.max(1.0).log2().ceil().exp2();
        let mut changes = 0;
        let mut prev = sys.root_equation(2, 1e-9).unwrap();
        for i in 1..=10_000 {
            let v = sys.root_equation(2, hi * i as f64 / 10_000.0).unwrap();
            if prev.signum() != v.signum() && v != 0.0 {
                changes += 1;
            }
            prev = v;
        }
        assert_eq!(changes, 1);
    }

    #[test]
    fn modes_agree_on_two_flow_reference() {
        let g = two_flow_system(0.2, 0.6, 0.1, 4, HigherPriorityMode::Gaussian).unwrap().solve_phi_star(2).unwrap();
        let e = two_flow_system(0.2, 0.6, 0.1, 4, HigherPriorityMode::ExactPoisson).unwrap().solve_phi_star(2).unwrap();
        assert!((g.phi - e.phi).abs() / e.phi < 0.05, "{} vs {}", g.phi, e.phi);
    }

    #[test]
    fn four_flow_degenerates_to_two_flow() {
        let params = FourFlowParams {
            voice_rate: 0.2,
            media_a: (1e-12, 1e-12, 0.5),
            media_b: (1e-12, 1e-12, 0.5),
            data_rate: 0.5,
            p: 0.1,
            max_transmissions: 4,
        };
        let two = two_flow_system(0.2, 0.5, 0.1, 4, HigherPriorityMode::Gaussian).unwrap();
        for d in [1.0, 10.0, 40.0] {
            let four = four_flow_delay(&params, d).unwrap();
            let reference = two.delay_violation_probability(DelayQuery { flow: 2, d_th: d }).unwrap();
            assert!((four - reference).abs() <= 1e-9 * reference.max(1e-300) + 1e-12, "{four} vs {reference}");
        }
    }

    #[test]
    fn four_flow_reference_shape() {
        let params = FourFlowParams {
            voice_rate: 0.2,
            media_a: (0.1, 0.2, 0.4),
            media_b: (0.3, 0.2, 0.7),
            data_rate: 0.2,
            p: 0.1,
            max_transmissions: 4,
        };
        let curve: Vec<f64> = (0..50).map(|d| four_flow_delay(&params, d as f64).unwrap()).collect();
        let slope = curve[1].ln() - curve[0].ln();
        for w in curve.windows(2) {
            assert!(w[1] < w[0]);
            assert!(((w[1].ln() - w[0].ln()) - slope).abs() < 1e-12);
        }
    }

    #[test]
    fn higher_voice_rate_raises_four_flow_curve() {
        let base = FourFlowParams {
            voice_rate: 0.1,
            media_a: (0.1, 0.2, 0.4),
            media_b: (0.3, 0.2, 0.7),
            data_rate: 0.2,
            p: 0.1,
            max_transmissions: 4,
        };
        let hi = FourFlowParams { voice_rate: 0.2, ..base };
        for d in [1.0, 5.0, 20.0] {
            assert!(four_flow_delay(&hi, d).unwrap() > four_flow_delay(&base, d).unwrap());
        }
    }
}
