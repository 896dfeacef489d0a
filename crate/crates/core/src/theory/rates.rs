//! Closed-form contraction factors. Every rate carries the conditions under
//! which it is a proven bound; values are computed regardless.

use super::TheoryError;

/// `(√5 − 1)/2`, the δ threshold for ρ₁.
pub const GOLDEN_THRESHOLD: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq)]
pub struct Rate {
    pub value: f64,
    /// Named conditions and whether each holds.
    pub conditions: Vec<(&'static str, bool)>,
}

impl Rate {
    fn new(value: f64, conditions: Vec<(&'static str, bool)>) -> Self {
        Self { value, conditions }
    }

    /// All conditions hold.
    pub fn valid(&self) -> bool {
        self.conditions.iter().all(|(_, ok)| *ok)
    }

    pub fn failed_conditions(&self) -> Vec<&'static str> {
        self.conditions.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect()
    }
}

/// `μ₁(δ, γ) = ((δ − γ) − √((δ − γ)² + 4(δ²(1 − γ) + δγ)))/2`.
pub fn mu1(delta: f64, gamma: f64) -> f64 {
    let d = delta - gamma;
    (d - (d * d + 4.0 * (delta * delta * (1.0 - gamma) + delta * gamma)).sqrt()) / 2.0
}

/// `ρ₁ = max{−μ₁(δ, γ̄), (√5 + 1)δ/2}`.
pub fn rho1(delta: f64, gamma_bar: f64) -> f64 {
    let d = delta - gamma_bar;
    let first = (-d + (d * d + 4.0 * (delta * delta * (1.0 - gamma_bar) + delta * gamma_bar)).sqrt()) / 2.0;
    first.max((5f64.sqrt() + 1.0) * delta / 2.0)
}

/// `ρ̃₁ = max{|μ₁(δ, γ)|, 2δ}`.
pub fn rho1_tilde(delta: f64, gamma: f64) -> f64 {
    mu1(delta, gamma).abs().max(2.0 * delta)
}

/// First argument of ρ₂ without the absolute value:
/// `((δ² − γ̄) − √((δ² − γ̄)² + 4δ²))/2`, which is never positive.
pub fn rho2_first_signed(delta: f64, gamma_bar: f64) -> f64 {
    let d = delta * delta - gamma_bar;
    (d - (d * d + 4.0 * delta * delta).sqrt()) / 2.0
}

/// `ρ₂ = max{|((δ² − γ̄) − √((δ² − γ̄)² + 4δ²))/2|, δ²(1 + √(δ² + 4))/2}`.
pub fn rho2(delta: f64, gamma_bar: f64) -> f64 {
    rho2_first_signed(delta, gamma_bar).abs().max(delta * delta * (1.0 + (delta * delta + 4.0).sqrt()) / 2.0)
}

/// Same first argument as [`rho2`], second argument replaced by the positive
/// root of `μ² − δ²μ − δ² = 0`, i.e. `δ(δ + √(δ² + 4))/2`. This is the root
/// that reaches 1 exactly at `δ = √2/2`.
pub fn rho2_root(delta: f64, gamma_bar: f64) -> f64 {
    rho2_first_signed(delta, gamma_bar).abs().max(delta * (delta + (delta * delta + 4.0).sqrt()) / 2.0)
}

/// `ρ̃₂ = max{((γ − δ²) + √((γ − δ²)² + 4(δ³(1 − γ) + δ²)))/2, (1 + δ + √(δ² + 2δ + 5))δ/2}`.
pub fn rho2_tilde(delta: f64, gamma: f64) -> f64 {
    let d = gamma - delta * delta;
    let d3 = delta * delta * delta;
    let first = (d + (d * d + 4.0 * (d3 * (1.0 - gamma) + delta * delta)).sqrt()) / 2.0;
    let second = (1.0 + delta + (delta * delta + 2.0 * delta + 5.0).sqrt()) * delta / 2.0;
    first.max(second)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BwyRates {
    pub rho1: Rate,
    pub rho1_tilde: Rate,
    pub mu1: f64,
}

pub fn bwy_rates(delta: f64, gamma: f64, gamma_bar: f64) -> BwyRates {
    BwyRates {
        rho1: Rate::new(rho1(delta, gamma_bar), vec![("delta < (sqrt5-1)/2", delta < GOLDEN_THRESHOLD), ("gamma_bar < 1", gamma_bar < 1.0)]),
        rho1_tilde: Rate::new(rho1_tilde(delta, gamma), vec![("delta < 1/2", delta < 0.5), ("gamma < 1", gamma < 1.0)]),
        mu1: mu1(delta, gamma_bar),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiumRates {
    pub rho2: Rate,
    /// ρ₂ with the re-derived second argument; same conditions.
    pub rho2_root: Rate,
    pub rho2_tilde: Rate,
}

pub fn sium_rates(delta: f64, gamma: f64, gamma_bar: f64) -> SiumRates {
    let cond = vec![("delta < sqrt2/2", delta < std::f64::consts::FRAC_1_SQRT_2), ("gamma_bar < 1", gamma_bar < 1.0)];
    SiumRates {
        rho2: Rate::new(rho2(delta, gamma_bar), cond.clone()),
        rho2_root: Rate::new(rho2_root(delta, gamma_bar), cond),
        rho2_tilde: Rate::new(rho2_tilde(delta, gamma), vec![("delta < 1/2", delta < 0.5), ("gamma < 1", gamma < 1.0)]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorRates {
    /// `max{δ, 2γ/(1 − γ)}`.
    pub bwy1990: f64,
    /// `δ < 1` and `γ < 1/(1 + 2δ)`: the Tong–Sameh norm of E is below 1.
    pub ts_convergent: bool,
    /// `δ < 1` and `γ ≤ δ/(2 + δ)`: the Tong–Sameh norm of E is below δ.
    pub ts_rate_delta: bool,
}

pub fn prior_rates(delta: f64, gamma: f64) -> Result<PriorRates, TheoryError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(TheoryError::GammaOutOfRange(gamma));
    }
    Ok(PriorRates {
        bwy1990: delta.max(2.0 * gamma / (1.0 - gamma)),
        ts_convergent: delta < 1.0 && gamma < 1.0 / (1.0 + 2.0 * delta),
        ts_rate_delta: delta < 1.0 && gamma <= delta / (2.0 + delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rho1_examples() {
        assert_relative_eq!(rho1(0.0, 0.5), 0.5, epsilon = 1e-15);
        // first argument √1.5/2, second (√5+1)/4
        let r = bwy_rates(0.5, 0.5, 0.5);
        assert_relative_eq!(r.rho1.value, (5f64.sqrt() + 1.0) / 4.0, epsilon = 1e-15);
        let first = (0.0 + (0.0 + 4.0 * (0.25 * 0.5 + 0.25f64)).sqrt()) / 2.0;
        assert_relative_eq!(first, 1.5f64.sqrt() / 2.0, epsilon = 1e-15);
        assert!(r.rho1.valid());
        let t = (5f64.sqrt() - 1.0) / 2.0;
        assert_relative_eq!(t, GOLDEN_THRESHOLD, epsilon = 1e-16);
        let r = bwy_rates(t, 0.3, 0.3);
        assert_relative_eq!(r.rho1.value, 1.0, epsilon = 1e-12);
        assert!(!r.rho1.valid());
        assert_eq!(r.rho1.failed_conditions(), vec!["delta < (sqrt5-1)/2"]);
    }

    #[test]
    fn rho1_tilde_and_mu1() {
        assert!(mu1(0.3, 0.4) < 0.0);
        assert_relative_eq!(rho1_tilde(0.0, 0.4), 0.4, epsilon = 1e-15);
        assert_relative_eq!(rho1_tilde(0.45, 0.0), 0.9, epsilon = 1e-15);
        let r = bwy_rates(0.5, 0.1, 0.1);
        assert!(!r.rho1_tilde.valid());
    }

    #[test]
    fn rho2_examples() {
        assert_relative_eq!(rho2(0.0, 0.5), 0.5, epsilon = 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(rho2_first_signed(h, 1.0).abs(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(rho2(h, 1.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(0.5 * (1.0 + 4.5f64.sqrt()) / 2.0, 0.780_330_085_889_910_6, epsilon = 1e-15);
        assert_relative_eq!(rho2(h, 0.0), 0.780_330_085_889_910_6, epsilon = 1e-14);
        assert_relative_eq!(rho2_root(h, 0.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rho2_tilde_zero_delta() {
        assert_relative_eq!(rho2_tilde(0.0, 0.4), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn prior_examples() {
        let p = prior_rates(0.5, 0.2).unwrap();
        assert_relative_eq!(p.bwy1990, 0.5, epsilon = 1e-15);
        assert!(p.ts_rate_delta);
        assert!(p.ts_convergent);
        assert_relative_eq!(prior_rates(0.1, 1.0 / 3.0).unwrap().bwy1990, 1.0, epsilon = 1e-15);
        assert!(matches!(prior_rates(0.1, 1.0), Err(TheoryError::GammaOutOfRange(_))));
    }

    #[test]
    fn landscape_monotone_and_below_one() {
        let n = 50;
        let grid: Vec<f64> = (0..n).map(|i| 0.6 * i as f64 / (n - 1) as f64).collect();
        let gb: Vec<f64> = (0..n).map(|j| 0.99 * j as f64 / (n - 1) as f64).collect();
        for (i, &d) in grid.iter().enumerate() {
            for (j, &g) in gb.iter().enumerate() {
                let r = rho1(d, g);
                assert!(r < 1.0);
                if i > 0 {
                    assert!(r >= rho1(grid[i - 1], g) - 1e-15);
                }
                if j > 0 {
                    assert!(r >= rho1(d, gb[j - 1]) - 1e-15);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn rho1_below_one_inside_region(d in 0.0f64..(GOLDEN_THRESHOLD - 1e-6), g in 0.0f64..(1.0 - 1e-6)) {
            prop_assert!(rho1(d, g) < 1.0);
            prop_assert!(rho1(d, g) >= g - 1e-15);
        }

        #[test]
        fn rho2_root_below_one_inside_region(d in 0.0f64..(std::f64::consts::FRAC_1_SQRT_2 - 1e-6), g in 0.0f64..(1.0 - 1e-6)) {
            prop_assert!(rho2_root(d, g) < 1.0);
            prop_assert!(rho2(d, g) <= rho2_root(d, g) + 1e-15);
        }

        #[test]
        fn tilde_rates_dominate(d in 0.0f64..0.5, g in 0.0f64..0.99) {
            prop_assert!(rho1_tilde(d, g) < 1.0);
            prop_assert!(rho2_tilde(d, g) < 1.0 + 1e-12);
        }
    }
}
