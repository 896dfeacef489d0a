//! Field-of-values bounds for the block-triangular preconditioned operator
//! `P = H⁻¹ L⁻¹ 𝒜 U⁻¹` in the `D` inner product.

use nalgebra::DMatrix;

use super::chain::d_norm;
use super::{le_rel, spectral_report, TheoryError};
use crate::linalg::{self, sym_eigenvalues_generalized, SymMatrix};
use crate::operators::{assemble_block_factors, PreconPair};
use crate::problems::SaddleSystem;

/// `P` from the factors, checked against the expanded form
/// `D⁻¹ [[A, Eᵀ Bᵀ], [−B E, S + B E R_A Bᵀ]]` with `E = I − R_A A`.
pub fn preconditioned_operator(sys: &SaddleSystem, pair: &PreconPair) -> Result<DMatrix<f64>, TheoryError> {
    let n = sys.n();
    let factors = assemble_block_factors(sys, pair)?;
    let r_a = pair.r_a.materialize().as_matrix();
    let r_s = pair.r_s.materialize().as_matrix();
    let h_inv = linalg::block_diag(r_a, &(-r_s));
    let p = h_inv * factors.l_inv(sys, pair) * sys.assemble() * factors.u_inv(sys, pair);

    let b = sys.b();
    let e = DMatrix::identity(n, n) - r_a * sys.a().as_matrix();
    let inner = linalg::block2x2(
        sys.a().as_matrix(),
        &(e.transpose() * b.transpose()),
        &(-(b * &e)),
        &(pair.s.as_matrix() + b * &e * r_a * b.transpose()),
    );
    let expanded = linalg::block_diag(r_a, r_s) * inner;
    let defect = linalg::rel_diff(&p, &expanded);
    if defect > 1e-10 {
        return Err(TheoryError::Inconsistent { what: "preconditioned operator against its expansion", defect });
    }
    Ok(p)
}

/// `(γ, Γ)` from the extreme eigenvalues `μ₁ ≤ μ₂` of `R_A A`, `κ₁ ≤ κ₂` of
/// `R_S S` and δ: `γ = min{μ₁, min{2 − μ₂, 1}κ₁}`,
/// `Γ = (2 max{μ₂² + κ₂δ², 2κ₂²(1 + δ²) + κ₂δ²})^{1/2}`.
pub fn fov_formulas(mu_lo: f64, mu_hi: f64, kappa_lo: f64, kappa_hi: f64, delta: f64) -> Result<(f64, f64), TheoryError> {
    if mu_hi >= 2.0 {
        return Err(TheoryError::SpectrumAssumptionViolated(format!("lambda_max(R_A A) = {mu_hi} >= 2")));
    }
    if mu_lo <= 0.0 {
        return Err(TheoryError::SpectrumAssumptionViolated(format!("lambda_min(R_A A) = {mu_lo} <= 0")));
    }
    let gamma = mu_lo.min((2.0 - mu_hi).min(1.0) * kappa_lo);
    let d2 = delta * delta;
    let big = (mu_hi * mu_hi + kappa_hi * d2).max(2.0 * kappa_hi * kappa_hi * (1.0 + d2) + kappa_hi * d2);
    Ok((gamma, (2.0 * big).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovReport {
    /// `λ_min(sym(D P), D)`: the smallest value of `(P x, x)_D / (x, x)_D`.
    pub min_empirical: f64,
    /// `‖P‖_D`
    pub max_empirical: f64,
    pub gamma: f64,
    pub big_gamma: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl FovReport {
    pub fn sandwich_ok(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Empirical field-of-values extremes of `P` next to the closed-form constants.
pub fn fov_constants(sys: &SaddleSystem, pair: &PreconPair, tol: f64) -> Result<FovReport, TheoryError> {
    let sr = spectral_report(sys, pair)?;
    let (gamma, big_gamma) = fov_formulas(sr.alpha_lo, sr.alpha_hi, sr.kappa_lo, sr.kappa_hi, sr.delta)?;
    let p = preconditioned_operator(sys, pair)?;
    let d = assemble_block_factors(sys, pair)?.d;
    let dp = d.as_matrix() * &p;
    let sym_dp = SymMatrix::symmetrize((&dp + dp.transpose()) * 0.5);
    let ev = sym_eigenvalues_generalized(&sym_dp, &d)?;
    let min_empirical = ev.first().copied().unwrap_or(0.0);
    let max_empirical = d_norm(&p, &d)?;
    Ok(FovReport {
        min_empirical,
        max_empirical,
        gamma,
        big_gamma,
        lower_ok: le_rel(gamma, min_empirical, tol),
        upper_ok: le_rel(max_empirical, big_gamma, tol),
    })
}
