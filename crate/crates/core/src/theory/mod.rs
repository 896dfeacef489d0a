//! Contraction rates in closed form and a dense engine that certifies them:
//! spectral constants, explicit error operators, the symmetrized operators
//! F and T, the Loewner inequalities, and field-of-values constants.

mod chain;
mod fov;
mod loewner;
mod rates;

pub use chain::{
    assemble_error_operator, assemble_error_operator_by_steps, assemble_f_t, assemble_f_t_bar, check_error_operator, d_norm,
    evaluate_chain, verify_chain, verify_chain_bar, BarChainReport, FtBarAssembly, FtAssembly, VerificationReport,
};
pub use fov::{fov_constants, fov_formulas, preconditioned_operator, FovReport};
pub use loewner::{verify_loewner_suite, Certificate, LoewnerSuite};
pub use rates::{
    bwy_rates, mu1, prior_rates, rho1, rho1_tilde, rho2, rho2_first_signed, rho2_root, rho2_tilde, sium_rates, BwyRates,
    PriorRates, Rate, SiumRates, GOLDEN_THRESHOLD,
};

use thiserror::Error;

use crate::iterations::IterationError;
use crate::linalg::LinalgError;
use crate::operators::{spectrum_of_product, OperatorError, PreconPair};
use crate::problems::SaddleSystem;

/// Below this δ the smoother counts as exact and T is not formed.
pub const DELTA_ZERO: f64 = 1e-12;

/// Relative tolerance for the inequality chain.
pub const CHAIN_TOL: f64 = 1e-8;

/// Quantities below this are treated as roundoff zero when comparing.
pub const ABS_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("gamma = {0} outside [0, 1)")]
    GammaOutOfRange(f64),
    #[error("delta is zero; T is undefined (rho(F) = {rho_f})")]
    DeltaZero { rho_f: f64 },
    #[error("R_A^-1 > A does not hold strictly (lambda_max(R_A A) = {alpha_hi})")]
    NotStrictlyDominant { alpha_hi: f64 },
    #[error("hypothesis violated: {name} (worst eigenvalue {worst:e})")]
    HypothesisViolated { name: &'static str, worst: f64 },
    #[error("spectrum assumption violated: {0}")]
    SpectrumAssumptionViolated(String),
    #[error("internal consistency check failed: {what} (defect {defect:e})")]
    Inconsistent { what: &'static str, defect: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Iteration(#[from] IterationError),
}

/// `a ≤ b` up to `tol` relative to the larger magnitude, with an absolute
/// floor for quantities that are roundoff zero.
pub fn le_rel(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * a.abs().max(b.abs()) + ABS_FLOOR
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport {
    /// `ρ(I − R_A A)`
    pub delta: f64,
    /// `ρ(I − R_S S)`
    pub gamma: f64,
    /// `ρ(I − R_S S̄)`
    pub gamma_bar: f64,
    /// extreme eigenvalues of `R_A A`
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    /// extreme eigenvalues of `R_S S`
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    /// extreme eigenvalues of `R_S S̄`
    pub kappa_bar_lo: f64,
    pub kappa_bar_hi: f64,
}

fn radius(lo: f64, hi: f64) -> f64 {
    (1.0 - lo).abs().max((1.0 - hi).abs())
}

pub fn spectral_report(sys: &SaddleSystem, pair: &PreconPair) -> Result<SpectralReport, TheoryError> {
    let (alpha_lo, alpha_hi) = spectrum_of_product(pair.r_a.materialize(), sys.a())?;
    let (kappa_lo, kappa_hi) = spectrum_of_product(pair.r_s.materialize(), &pair.s)?;
    let (kappa_bar_lo, kappa_bar_hi) = spectrum_of_product(pair.r_s.materialize(), &pair.s_bar)?;
    Ok(SpectralReport {
        delta: radius(alpha_lo, alpha_hi),
        gamma: radius(kappa_lo, kappa_hi),
        gamma_bar: radius(kappa_bar_lo, kappa_bar_hi),
        alpha_lo,
        alpha_hi,
        kappa_lo,
        kappa_hi,
        kappa_bar_lo,
        kappa_bar_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_eigenvalues_generalized, SymMatrix};
    use crate::operators::{diagonal_inverse, exact_inverse, sym_gauss_seidel};
    use crate::problems::{make_random_saddle, CMode};
    use approx::assert_relative_eq;

    #[test]
    fn exact_smoother_report() {
        let sys = make_random_saddle(8, 3, 1, CMode::Diag).unwrap();
        let pair = PreconPair::new(&sys, exact_inverse(sys.a(), 1.0).unwrap(), diagonal_inverse(&SymMatrix::identity(3)).unwrap()).unwrap();
        let r = spectral_report(&sys, &pair).unwrap();
        assert!(r.delta <= 1e-12);
        assert_relative_eq!(r.alpha_lo, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.alpha_hi, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.gamma, r.gamma_bar, epsilon = 1e-12);

        let pair = PreconPair::new(&sys, exact_inverse(sys.a(), 0.5).unwrap(), diagonal_inverse(&SymMatrix::identity(3)).unwrap()).unwrap();
        assert_relative_eq!(spectral_report(&sys, &pair).unwrap().delta, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn delta_matches_generalized_pencil() {
        // δ from the pencil (A, R_A⁻¹), a different route than Lᵀ A L.
        let sys = make_random_saddle(10, 4, 2, CMode::Zero).unwrap();
        let r_a = sym_gauss_seidel(sys.a(), 0.9).unwrap();
        let ev = sym_eigenvalues_generalized(sys.a(), r_a.inverse_materialize()).unwrap();
        let pair = PreconPair::new(&sys, r_a, diagonal_inverse(&SymMatrix::identity(4)).unwrap()).unwrap();
        let r = spectral_report(&sys, &pair).unwrap();
        assert_relative_eq!(r.alpha_lo, ev[0], epsilon = 1e-10);
        assert_relative_eq!(r.alpha_hi, ev[ev.len() - 1], epsilon = 1e-10);
        assert_relative_eq!(r.delta, radius(r.alpha_lo, r.alpha_hi), epsilon = 1e-15);
    }

    #[test]
    fn le_rel_floor() {
        assert!(le_rel(1e-15, 0.0, 1e-8));
        assert!(!le_rel(1.0, 0.99, 1e-8));
        assert!(le_rel(1.0 + 1e-9, 1.0, 1e-8));
    }
}
