//! Error operators and the certificate
//! `ρ(E_(u,p)) ≤ ‖E‖_D ≤ ρ(F) ≤ ρ(T) ≤ ρ₁`.
//!
//! Every assembled object is computed along two independent routes and the
//! routes are compared before any inequality is evaluated.

use nalgebra::{DMatrix, DVector};

use super::loewner::{verify_loewner_suite, LoewnerSuite};
use super::rates::{bwy_rates, rho2, rho2_root, BwyRates};
use super::{le_rel, spectral_report, SpectralReport, TheoryError, CHAIN_TOL, DELTA_ZERO};
use crate::iterations::{step, IterateState, Method};
use crate::linalg::{self, cholesky_factor, loewner_leq, loewner_lt, sqrt_spd, sym_eigenvalues_generalized, SymMatrix, LOEWNER_TOL};
use crate::operators::{assemble_block_factors, BlockFactors, PreconPair};
use crate::problems::{exact_solve, RhsPair, SaddleSystem};
use crate::rng::SplitMix;

/// Agreement required between two routes to the same matrix.
const ROUTE_TOL: f64 = 1e-10;

fn eye(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

/// `E_(u,p)` from the block factors: `I − U⁻¹ H⁻¹ L⁻¹ 𝒜` for BWY,
/// the same with `H̄ = diag(R̄_A⁻¹, −R_S⁻¹)` for SIUM, and
/// `I − [[R̄_A⁻¹, 0], [B, −R_S⁻¹]]⁻¹ 𝒜` for IUM.
pub fn assemble_error_operator(method: Method, sys: &SaddleSystem, pair: &PreconPair) -> Result<DMatrix<f64>, TheoryError> {
    let (n, m) = (sys.n(), sys.m());
    let a = sys.assemble();
    let r_s = pair.r_s.materialize().as_matrix();
    let r_u = match method {
        Method::Bwy => pair.r_a.materialize().as_matrix(),
        Method::Sium | Method::Ium => pair.r_a_bar.as_matrix(),
    };
    let h_inv = linalg::block_diag(r_u, &(-r_s));
    let l_inv = match method {
        Method::Bwy | Method::Sium => {
            let b_ra = sys.b() * pair.r_a.materialize().as_matrix();
            linalg::block2x2(&eye(n), &DMatrix::zeros(n, m), &(-b_ra), &eye(m))
        }
        Method::Ium => {
            let b_rbar = sys.b() * r_u;
            linalg::block2x2(&eye(n), &DMatrix::zeros(n, m), &(-b_rbar), &eye(m))
        }
    };
    let u_inv = match method {
        Method::Bwy | Method::Sium => l_inv.transpose(),
        Method::Ium => eye(n + m),
    };
    Ok(eye(n + m) - u_inv * h_inv * l_inv * a)
}

/// `E_(u,p)` column by column from the stepping code with zero data.
pub fn assemble_error_operator_by_steps(method: Method, sys: &SaddleSystem, pair: &PreconPair) -> Result<DMatrix<f64>, TheoryError> {
    let (n, m) = (sys.n(), sys.m());
    let rhs = RhsPair::zeros(n, m);
    let mut e = DMatrix::zeros(n + m, n + m);
    for j in 0..n + m {
        let mut x = DVector::zeros(n + m);
        x[j] = 1.0;
        let state = IterateState::new(x.rows(0, n).into_owned(), x.rows(n, m).into_owned());
        let next = step(method, sys, pair, &rhs, &state)?;
        e.view_mut((0, j), (n, 1)).copy_from(&next.u);
        e.view_mut((n, j), (m, 1)).copy_from(&next.p);
    }
    Ok(e)
}

/// Largest relative mismatch between one step's error and `E` times the
/// previous error, over `probes` seeded random starts and right-hand sides.
pub fn check_error_operator(
    method: Method,
    sys: &SaddleSystem,
    pair: &PreconPair,
    e: &DMatrix<f64>,
    probes: usize,
    seed: u64,
) -> Result<f64, TheoryError> {
    let (n, m) = (sys.n(), sys.m());
    let mut rng = SplitMix::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let rhs = RhsPair { f: rng.vector(n), g: rng.vector(m) };
        let (u, p) = exact_solve(sys, &rhs).map_err(crate::iterations::IterationError::from)?;
        let state = IterateState::new(rng.vector(n), rng.vector(m));
        let next = step(method, sys, pair, &rhs, &state)?;
        let before = stack(&(&u - &state.u), &(&p - &state.p));
        let after = stack(&(&u - &next.u), &(&p - &next.p));
        let predicted = e * &before;
        worst = worst.max((after - &predicted).norm() / before.norm());
    }
    Ok(worst)
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// `‖E‖_W = λ_max(Eᵀ W E, W)^{1/2}`.
pub fn d_norm(e: &DMatrix<f64>, w: &SymMatrix) -> Result<f64, TheoryError> {
    let g = SymMatrix::symmetrize(e.transpose() * w.as_matrix() * e);
    let ev = sym_eigenvalues_generalized(&g, w)?;
    Ok(ev.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    SymMatrix::symmetrize(m.clone()).norm2()
}

/// F, T and the scaling M with `F = M T M`.
#[derive(Debug, Clone)]
pub struct FtAssembly {
    pub f: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub delta: f64,
    pub rho_f: f64,
    pub rho_t: f64,
    /// `‖M T M − F‖_max / ‖F‖_max`
    pub mtm_defect: f64,
    /// Block form of F against `D^{−1/2} J L⁻¹ E_𝒜 U⁻¹ J D^{−1/2}`.
    pub route_defect: f64,
}

struct Roots {
    ra_half: SymMatrix,
    rs_half: SymMatrix,
}

fn roots(pair: &PreconPair) -> Result<Roots, TheoryError> {
    Ok(Roots { ra_half: sqrt_spd(pair.r_a.materialize())?, rs_half: sqrt_spd(pair.r_s.materialize())? })
}

/// `F` in block form `[[E_A, B̄ᵀ], [B̄, −E_S̄]]`.
fn f_blocks(sys: &SaddleSystem, pair: &PreconPair, r: &Roots) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (sys.n(), sys.m());
    let e_a = eye(n) - r.ra_half.as_matrix() * sys.a().as_matrix() * r.ra_half.as_matrix();
    let b_bar = r.rs_half.as_matrix() * sys.b() * r.ra_half.as_matrix() * &e_a;
    let e_sbar = eye(m) - r.rs_half.as_matrix() * pair.s_bar.as_matrix() * r.rs_half.as_matrix();
    (e_a, b_bar, e_sbar)
}

/// `F` from its definition `D^{−1/2} J L⁻¹ E_𝒜 U⁻¹ J D^{−1/2}` with
/// `E_𝒜 = diag(R_A⁻¹ − A, S − R_S⁻¹)`.
fn f_by_definition(sys: &SaddleSystem, pair: &PreconPair, factors: &BlockFactors, r: &Roots) -> DMatrix<f64> {
    let e_cal = linalg::block_diag(
        &(pair.r_a.inverse_materialize().as_matrix() - sys.a().as_matrix()),
        &(pair.s.as_matrix() - pair.r_s.inverse_materialize().as_matrix()),
    );
    let d_half_inv = linalg::block_diag(r.ra_half.as_matrix(), r.rs_half.as_matrix());
    let l_inv = factors.l_inv(sys, pair);
    let u_inv = factors.u_inv(sys, pair);
    &d_half_inv * &factors.j * l_inv * e_cal * u_inv * &factors.j * &d_half_inv
}

pub fn assemble_f_t(sys: &SaddleSystem, pair: &PreconPair) -> Result<FtAssembly, TheoryError> {
    let (n, m) = (sys.n(), sys.m());
    let factors = assemble_block_factors(sys, pair)?;
    let r = roots(pair)?;
    let (e_a, b_bar, e_sbar) = f_blocks(sys, pair, &r);
    let f = linalg::block2x2(&e_a, &b_bar.transpose(), &b_bar, &(-&e_sbar));
    let route_defect = route_diff(&f_by_definition(sys, pair, &factors, &r), &f);
    if route_defect > ROUTE_TOL {
        return Err(TheoryError::Inconsistent { what: "F block form against its definition", defect: route_defect });
    }
    let rho_f = spectral_norm_sym(&f);

    let e_a_sym = SymMatrix::symmetrize(e_a);
    let delta = e_a_sym.norm2();
    if delta <= DELTA_ZERO {
        return Err(TheoryError::DeltaZero { rho_f });
    }
    if cholesky_factor(&e_a_sym).is_err() {
        let alpha_hi = 1.0 - e_a_sym.min_eigenvalue();
        return Err(TheoryError::NotStrictlyDominant { alpha_hi });
    }
    let e_half = sqrt_spd(&e_a_sym)?;
    let e_half_inv = linalg::inv_sqrt_spd(&e_a_sym)?;
    let sd = delta.sqrt();
    let mm = linalg::block_diag(&(e_half.as_matrix() / sd), &eye(m));
    let off = e_half_inv.as_matrix() * b_bar.transpose() * sd;
    let t = linalg::block2x2(&(eye(n) * delta), &off, &off.transpose(), &(-e_sbar));
    let mtm_defect = route_diff(&(&mm * &t * &mm), &f);
    if mtm_defect > ROUTE_TOL {
        return Err(TheoryError::Inconsistent { what: "F = M T M", defect: mtm_defect });
    }
    let rho_t = spectral_norm_sym(&t);
    Ok(FtAssembly { f, t, m: mm, delta, rho_f, rho_t, mtm_defect, route_defect })
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub spectral: SpectralReport,
    pub rates: BwyRates,
    pub rho_e_up: f64,
    pub norm_e_d: f64,
    pub rho_f: f64,
    pub rho_t: f64,
    pub rho1: f64,
    /// `[‖E‖_D − ρ(E), ρ(F) − ‖E‖_D, ρ(T) − ρ(F), ρ₁ − ρ(T)]`, each
    /// divided by the larger side.
    pub gaps: [f64; 4],
    pub chain_ok: bool,
    /// δ was at roundoff zero; `ρ(T)` is then reported as `ρ(F)`.
    pub delta_zero: bool,
    /// Formula route of `E_(u,p)` against stepping.
    pub error_operator_defect: f64,
    /// One-step error prediction against actual steps.
    pub step_check_defect: f64,
    pub loewner: LoewnerSuite,
}

impl VerificationReport {
    pub fn chain(&self) -> [f64; 5] {
        [self.rho_e_up, self.norm_e_d, self.rho_f, self.rho_t, self.rho1]
    }
}

/// Entries of F and T are contraction-sized, so differences are measured
/// against a scale of at least 1.
fn route_diff(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (a - reference).amax() / a.amax().max(reference.amax()).max(1.0)
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (b - a) / s
    }
}

fn chain_holds(chain: &[f64]) -> bool {
    chain.windows(2).all(|w| le_rel(w[0], w[1], CHAIN_TOL))
}

fn gaps_of(chain: [f64; 5]) -> [f64; 4] {
    [rel_gap(chain[0], chain[1]), rel_gap(chain[1], chain[2]), rel_gap(chain[2], chain[3]), rel_gap(chain[3], chain[4])]
}

fn require_hypotheses(sys: &SaddleSystem, pair: &PreconPair) -> Result<(), TheoryError> {
    let strict = loewner_lt(sys.a(), pair.r_a.inverse_materialize(), LOEWNER_TOL)?;
    if !strict.holds {
        return Err(TheoryError::HypothesisViolated { name: "R_A^-1 > A", worst: strict.worst });
    }
    let dom = loewner_leq(&pair.s_bar, pair.r_s.inverse_materialize(), LOEWNER_TOL)?;
    if !dom.holds {
        return Err(TheoryError::HypothesisViolated { name: "R_S^-1 >= S_bar", worst: dom.worst });
    }
    Ok(())
}

/// Checks the hypotheses `R_A⁻¹ > A` and `R_S⁻¹ ≥ S̄`, then evaluates and
/// certifies the chain for BWY.
pub fn verify_chain(sys: &SaddleSystem, pair: &PreconPair) -> Result<VerificationReport, TheoryError> {
    require_hypotheses(sys, pair)?;
    evaluate_chain(sys, pair)
}

/// The chain quantities without the hypothesis gate. When the hypotheses
/// fail the ordering is not guaranteed and `chain_ok` is only an observation.
pub fn evaluate_chain(sys: &SaddleSystem, pair: &PreconPair) -> Result<VerificationReport, TheoryError> {
    let spectral = spectral_report(sys, pair)?;
    let rates = bwy_rates(spectral.delta, spectral.gamma, spectral.gamma_bar);

    let e_up = assemble_error_operator(Method::Bwy, sys, pair)?;
    let by_steps = assemble_error_operator_by_steps(Method::Bwy, sys, pair)?;
    let error_operator_defect = (&e_up - &by_steps).amax() / e_up.amax().max(1.0);
    if error_operator_defect > 1e-11 {
        return Err(TheoryError::Inconsistent { what: "E_(u,p) formula against stepping", defect: error_operator_defect });
    }
    let step_check_defect = check_error_operator(Method::Bwy, sys, pair, &e_up, 5, 0x5eed)?;
    let rho_e_up = linalg::spectral_radius(&e_up, None)?;

    let factors = assemble_block_factors(sys, pair)?;
    let e = &factors.u * &e_up * factors.u_inv(sys, pair);
    let norm_e_d = d_norm(&e, &factors.d)?;

    let (rho_f, rho_t, delta_zero) = match assemble_f_t(sys, pair) {
        Ok(ft) => (ft.rho_f, ft.rho_t, false),
        Err(TheoryError::DeltaZero { rho_f }) => (rho_f, rho_f, true),
        Err(e) => return Err(e),
    };
    let rho1 = rates.rho1.value;
    let chain = [rho_e_up, norm_e_d, rho_f, rho_t, rho1];
    let loewner = verify_loewner_suite(sys, pair)?;
    Ok(VerificationReport {
        spectral,
        rates,
        rho_e_up,
        norm_e_d,
        rho_f,
        rho_t,
        rho1,
        gaps: gaps_of(chain),
        chain_ok: chain_holds(&chain),
        delta_zero,
        error_operator_defect,
        step_check_defect,
        loewner,
    })
}

/// Barred objects for SIUM: `Ē_A = I − R̄_A^{1/2} A R̄_A^{1/2}`,
/// `B̂ = R_S^{1/2} B (I − R_A A) R̄_A^{1/2}`, `F̄ = [[Ē_A, B̂ᵀ], [B̂, −E_S̄]]`,
/// `M̄ = diag(δ⁻¹ Ē_A^{1/2}, I)` and
/// `T̄ = [[δ² I, δ Ē_A^{−1/2} B̂ᵀ], [δ B̂ Ē_A^{−1/2}, R_S^{1/2} S̄ R_S^{1/2} − I]]`.
#[derive(Debug, Clone)]
pub struct FtBarAssembly {
    pub f: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub delta: f64,
    pub rho_f: f64,
    pub rho_t: f64,
    pub mtm_defect: f64,
    pub route_defect: f64,
    /// `B̂ Ē_A⁻¹ B̂ᵀ`
    pub bhat_gram: SymMatrix,
}

pub fn assemble_f_t_bar(sys: &SaddleSystem, pair: &PreconPair) -> Result<FtBarAssembly, TheoryError> {
    let (n, m) = (sys.n(), sys.m());
    let factors = assemble_block_factors(sys, pair)?;
    let rbar_half = sqrt_spd(&pair.r_a_bar)?;
    let rs_half = sqrt_spd(pair.r_s.materialize())?;
    let ra = pair.r_a.materialize().as_matrix();
    let e_a_bar = eye(n) - rbar_half.as_matrix() * sys.a().as_matrix() * rbar_half.as_matrix();
    let e_ra = eye(n) - ra * sys.a().as_matrix();
    let b_hat = rs_half.as_matrix() * sys.b() * &e_ra * rbar_half.as_matrix();
    let e_sbar = eye(m) - rs_half.as_matrix() * pair.s_bar.as_matrix() * rs_half.as_matrix();
    let f = linalg::block2x2(&e_a_bar, &b_hat.transpose(), &b_hat, &(-&e_sbar));

    // Definition route: D̄^{−1/2} J L⁻¹ Ē_𝒜 U⁻¹ J D̄^{−1/2}.
    let rbar_inv = cholesky_factor(&pair.r_a_bar)?.inverse();
    let rbar_inv = rbar_inv.as_matrix();
    let b = sys.b();
    let e_cal = linalg::block2x2(
        &(rbar_inv - sys.a().as_matrix()),
        &((rbar_inv * ra - eye(n)) * b.transpose()),
        &(b * (ra * rbar_inv - eye(n))),
        &(b * ra * rbar_inv * ra * b.transpose() + sys.c().as_matrix() - pair.r_s.inverse_materialize().as_matrix()),
    );
    let d_half_inv = linalg::block_diag(rbar_half.as_matrix(), rs_half.as_matrix());
    let by_def = &d_half_inv * &factors.j * factors.l_inv(sys, pair) * e_cal * factors.u_inv(sys, pair) * &factors.j * &d_half_inv;
    let route_defect = route_diff(&by_def, &f);
    if route_defect > ROUTE_TOL {
        return Err(TheoryError::Inconsistent { what: "F_bar block form against its definition", defect: route_defect });
    }
    let rho_f = spectral_norm_sym(&f);

    let e_bar_sym = SymMatrix::symmetrize(e_a_bar);
    // ρ(Ē_A) = δ².
    let delta = e_bar_sym.norm2().sqrt();
    if delta <= DELTA_ZERO {
        return Err(TheoryError::DeltaZero { rho_f });
    }
    if cholesky_factor(&e_bar_sym).is_err() {
        return Err(TheoryError::NotStrictlyDominant { alpha_hi: 1.0 - e_bar_sym.min_eigenvalue() });
    }
    let e_half_inv = linalg::inv_sqrt_spd(&e_bar_sym)?;
    let bhat_gram = SymMatrix::symmetrize(&b_hat * e_half_inv.as_matrix() * e_half_inv.as_matrix() * b_hat.transpose());
    let e_half = sqrt_spd(&e_bar_sym)?;
    let mm = linalg::block_diag(&(e_half.as_matrix() / delta), &eye(m));
    let off = e_half_inv.as_matrix() * b_hat.transpose() * delta;
    let t = linalg::block2x2(&(eye(n) * (delta * delta)), &off, &off.transpose(), &(-e_sbar));
    let mtm_defect = route_diff(&(&mm * &t * &mm), &f);
    if mtm_defect > ROUTE_TOL {
        return Err(TheoryError::Inconsistent { what: "F_bar = M_bar T_bar M_bar", defect: mtm_defect });
    }
    let rho_t = spectral_norm_sym(&t);
    Ok(FtBarAssembly { f, t, delta, rho_f, rho_t, mtm_defect, route_defect, bhat_gram })
}

/// SIUM analogue of [`VerificationReport`]: `ρ(Ē_(u,p)) ≤ ‖Ē‖_D̄ ≤ ρ(F̄) ≤ ρ(T̄)`,
/// compared against both forms of ρ₂.
#[derive(Debug, Clone)]
pub struct BarChainReport {
    pub rho_e_up: f64,
    pub norm_e_dbar: f64,
    pub rho_f: f64,
    pub rho_t: f64,
    pub rho2: f64,
    pub rho2_root: f64,
    pub chain_ok_rho2: bool,
    pub chain_ok_rho2_root: bool,
    pub delta_zero: bool,
    pub error_operator_defect: f64,
}

pub fn verify_chain_bar(sys: &SaddleSystem, pair: &PreconPair) -> Result<BarChainReport, TheoryError> {
    require_hypotheses(sys, pair)?;
    let spectral = spectral_report(sys, pair)?;
    let e_up = assemble_error_operator(Method::Sium, sys, pair)?;
    let by_steps = assemble_error_operator_by_steps(Method::Sium, sys, pair)?;
    let error_operator_defect = (&e_up - &by_steps).amax() / e_up.amax().max(1.0);
    if error_operator_defect > 1e-11 {
        return Err(TheoryError::Inconsistent { what: "SIUM E_(u,p) formula against stepping", defect: error_operator_defect });
    }
    let rho_e_up = linalg::spectral_radius(&e_up, None)?;
    let factors = assemble_block_factors(sys, pair)?;
    let e = &factors.u * &e_up * factors.u_inv(sys, pair);
    let rbar_inv = cholesky_factor(&pair.r_a_bar)?.inverse();
    let d_bar = SymMatrix::symmetrize(linalg::block_diag(rbar_inv.as_matrix(), pair.r_s.inverse_materialize().as_matrix()));
    let norm_e_dbar = d_norm(&e, &d_bar)?;
    let (rho_f, rho_t, delta_zero) = match assemble_f_t_bar(sys, pair) {
        Ok(ft) => (ft.rho_f, ft.rho_t, false),
        Err(TheoryError::DeltaZero { rho_f }) => (rho_f, rho_f, true),
        Err(e) => return Err(e),
    };
    let r2 = rho2(spectral.delta, spectral.gamma_bar);
    let r2_root = rho2_root(spectral.delta, spectral.gamma_bar);
    let head = [rho_e_up, norm_e_dbar, rho_f, rho_t];
    Ok(BarChainReport {
        rho_e_up,
        norm_e_dbar,
        rho_f,
        rho_t,
        rho2: r2,
        rho2_root: r2_root,
        chain_ok_rho2: chain_holds(&[head[0], head[1], head[2], head[3], r2]),
        chain_ok_rho2_root: chain_holds(&[head[0], head[1], head[2], head[3], r2_root]),
        delta_zero,
        error_operator_defect,
    })
}
