//! Energy functions: asymptotic log moment generating functions of counting
//! processes, `lim (1/t) log E[exp(phi A(t))]`.

use crate::traffic::Moments;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Arrival,
    Service,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyKind {
    ExactPoisson { rate: f64 },
    /// Bernoulli departures, one per slot with success probability `1 - q`.
    ExactBinomial { q: f64 },
    /// Gaussian approximation of a renewal counting process with interval
    /// moments `(mean, var)`.
    AsymptoticRenewal { mean: f64, var: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyFunction {
    pub kind: EnergyKind,
    pub direction: Direction,
}

impl EnergyFunction {
    pub fn new(kind: EnergyKind, direction: Direction) -> Self {
        Self { kind, direction }
    }

    pub fn renewal(m: Moments, direction: Direction) -> Self {
        Self::new(EnergyKind::AsymptoticRenewal { mean: m.mean, var: m.var }, direction)
    }

    pub fn eval(&self, phi: f64) -> f64 {
        eval_energy(&self.kind, phi)
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.kind, EnergyKind::AsymptoticRenewal { .. })
    }
}

pub fn eval_energy(kind: &EnergyKind, phi: f64) -> f64 {
    match *kind {
        EnergyKind::AsymptoticRenewal { mean, var } => renewal_energy(mean, var, phi),
        EnergyKind::ExactPoisson { rate } => rate * phi.exp_m1(),
        EnergyKind::ExactBinomial { q } => (q + (1.0 - q) * phi.exp()).ln(),
    }
}

/// `phi/mean + phi^2 var / (2 mean^3)`.
pub fn renewal_energy(mean: f64, var: f64, phi: f64) -> f64 {
    phi / mean + phi * phi * var / (2.0 * mean * mean * mean)
}

/// Number of grid points used by [`binomial_energy_gap`].
pub const GAP_GRID: usize = 1000;

/// Largest relative deviation of the asymptotic renewal energy of a
/// Bernoulli departure process from its exact energy, over a uniform grid
/// on `(0, phi_max]`.
pub fn binomial_energy_gap(q: f64, phi_max: f64) -> f64 {
    let exact = EnergyKind::ExactBinomial { q };
    let asym = EnergyKind::AsymptoticRenewal {
        mean: 1.0 / (1.0 - q),
        var: q / ((1.0 - q) * (1.0 - q)),
    };
    (1..=GAP_GRID)
        .map(|i| {
            let phi = phi_max * i as f64 / GAP_GRID as f64;
            let e = eval_energy(&exact, phi);
            (eval_energy(&asym, phi) - e).abs() / e
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [EnergyKind; 4] = [
        EnergyKind::ExactPoisson { rate: 0.5 },
        EnergyKind::ExactBinomial { q: 0.1 },
        EnergyKind::AsymptoticRenewal { mean: 2.0, var: 4.0 },
        EnergyKind::AsymptoticRenewal { mean: 1.111, var: 0.122679 },
    ];

    #[test]
    fn vanishes_at_origin() {
        for k in KINDS {
            assert_eq!(eval_energy(&k, 0.0), 0.0);
        }
    }

    #[test]
    fn reference_values() {
        let v = eval_energy(&EnergyKind::ExactPoisson { rate: 0.5 }, 1.0);
        assert!((v - 0.859140914229523).abs() < 1e-12);
        let q: f64 = 0.1;
        let geo = EnergyKind::AsymptoticRenewal { mean: 1.0 / (1.0 - q), var: q / (1.0 - q).powi(2) };
        assert!((eval_energy(&geo, 1.0) - 0.945).abs() < 1e-12);
        // closed form used for the Bernoulli comparison
        for phi in [0.2, 0.7, 1.5] {
            let direct = (1.0 - q) * phi * (1.0 + 0.5 * q * phi);
            assert!((eval_energy(&geo, phi) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn convex_on_grid() {
        for k in KINDS {
            let h = 0.01;
            for i in -200..200 {
                let x = i as f64 * h;
                let d2 = eval_energy(&k, x + h) - 2.0 * eval_energy(&k, x) + eval_energy(&k, x - h);
                assert!(d2 >= -1e-12, "{k:?} at {x}");
            }
        }
    }

    #[test]
    fn poisson_asymptotic_is_second_order_taylor() {
        let rate = 0.4;
        let exact = EnergyKind::ExactPoisson { rate };
        let asym = EnergyKind::AsymptoticRenewal { mean: 1.0 / rate, var: 1.0 / (rate * rate) };
        for phi in [0.01, 0.1] {
            let diff = (eval_energy(&exact, phi) - eval_energy(&asym, phi)).abs();
            let cubic = rate * phi.powi(3) / 6.0;
            assert!((diff - cubic).abs() < 0.1 * cubic, "phi={phi}: {diff} vs {cubic}");
        }
    }

    #[test]
    fn binomial_derivatives_agree_at_origin() {
        let q = 0.1;
        let exact = EnergyKind::ExactBinomial { q };
        let asym = EnergyKind::AsymptoticRenewal { mean: 1.0 / (1.0 - q), var: q / ((1.0 - q) * (1.0 - q)) };
        let h = 1e-4;
        let d1 = |k: &EnergyKind| (eval_energy(k, h) - eval_energy(k, -h)) / (2.0 * h);
        let d2 = |k: &EnergyKind| (eval_energy(k, h) - 2.0 * eval_energy(k, 0.0) + eval_energy(k, -h)) / (h * h);
        assert!((d1(&exact) - d1(&asym)).abs() < 1e-6);
        assert!((d2(&exact) - d2(&asym)).abs() < 1e-6);
    }

    #[test]
    fn binomial_gap_examples() {
        assert!(binomial_energy_gap(0.1, 1.0) <= 0.02);
        assert!(binomial_energy_gap(0.1, 0.1) <= 2e-4);
        assert!(binomial_energy_gap(1e-6, 1.0) < 1e-6);
        let exact = eval_energy(&EnergyKind::ExactBinomial { q: 0.1 }, 1.0);
        assert!((exact - (0.1 + 0.9 * std::f64::consts::E).ln()).abs() < 1e-14);
        assert!((exact - 0.934702).abs() < 1e-6);
    }
}
