//! The experiment pipeline: system → smoother pair → spectral constants →
//! rate formulas → Loewner suite and chain → requested methods.

use saddle_core::iterations::{rate_of_norms, run_iteration, IterateState, Method};
use saddle_core::krylov::{elman_bound, solve_preconditioned, GmresMode, GmresOptions};
use saddle_core::linalg::SymMatrix;
use saddle_core::operators::{
    diagonal_inverse, exact_inverse, rescale_to_dominate, scaled_jacobi, sym_gauss_seidel, two_grid_vcycle, ApproxInverse, PreconPair,
};
use saddle_core::problems::{make_mac_stokes, make_mixed_poisson, make_random_saddle, RhsPair, SaddleSystem};
use saddle_core::theory::{
    bwy_rates, evaluate_chain, fov_constants, prior_rates, sium_rates, spectral_report, BwyRates, FovReport, LoewnerSuite, PriorRates, Rate,
    SiumRates, SpectralReport, TheoryError, VerificationReport,
};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, MethodSpec, ProblemSpec, RescaleTarget, SmootherA, SmootherS};

const TAIL_WINDOW: usize = 10;
/// Relative slack on bound comparisons, for roundoff only.
const BOUND_SLACK: f64 = 1e-10;
const FOV_TOL: f64 = 1e-8;

pub const HYP_RA: &str = "R_A⁻¹ > A";
pub const HYP_RS_SBAR: &str = "R_S⁻¹ ≥ S̄";

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    /// Carries the first failed hypothesis.
    NotApplicable(String),
}

impl Status {
    pub fn ok(&self) -> bool {
        !matches!(self, Status::Fail)
    }

    pub fn code(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotApplicable(_) => "not_applicable",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Status::Pass => f.write_str("PASS"),
            Status::Fail => f.write_str("FAIL"),
            Status::NotApplicable(h) => write!(f, "NOT APPLICABLE (hypothesis {h} failed)"),
        }
    }
}

/// A named hypothesis and whether it held.
pub type Hypothesis = (String, bool);

/// Display form of a rate condition label from the core crate.
pub fn condition_label(raw: &str) -> String {
    match raw {
        "delta < (sqrt5-1)/2" => "δ < (√5−1)/2".into(),
        "delta < sqrt2/2" => "δ < √2/2".into(),
        "delta < 1/2" => "δ < 1/2".into(),
        "gamma_bar < 1" => "γ̄ < 1".into(),
        "gamma < 1" => "γ < 1".into(),
        other => other.into(),
    }
}

fn status_of(hypotheses: &[Hypothesis], held: bool) -> Status {
    match hypotheses.iter().find(|(_, ok)| !ok) {
        Some((name, _)) => Status::NotApplicable(name.clone()),
        None if held => Status::Pass,
        None => Status::Fail,
    }
}

#[derive(Debug, Clone)]
pub struct Meta {
    pub fingerprint: String,
    pub problem: String,
    pub n: usize,
    pub m: usize,
    pub smoother_a: String,
    pub smoother_s: String,
    /// `(λ_max, factor)` of the Schur rescaling, if any.
    pub rescale: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Certificates {
    pub spectral: SpectralReport,
    pub bwy: BwyRates,
    pub sium: SiumRates,
    /// `None` when γ ∉ [0, 1).
    pub prior: Option<PriorRates>,
    pub loewner: LoewnerSuite,
    pub hyp_ra: bool,
    pub hyp_rs_sbar: bool,
    pub chain: Result<VerificationReport, String>,
    pub fov: Result<FovReport, String>,
    pub elman: Option<f64>,
}

impl Certificates {
    pub fn hypotheses(&self) -> Vec<Hypothesis> {
        vec![(HYP_RA.into(), self.hyp_ra), (HYP_RS_SBAR.into(), self.hyp_rs_sbar)]
    }

    fn with_conditions(&self, rate: &Rate) -> Vec<Hypothesis> {
        let mut h = self.hypotheses();
        h.extend(rate.conditions.iter().map(|(n, ok)| (condition_label(n), *ok)));
        h
    }

    pub fn bwy_hypotheses(&self) -> Vec<Hypothesis> {
        self.with_conditions(&self.bwy.rho1)
    }

    pub fn sium_hypotheses(&self) -> Vec<Hypothesis> {
        self.with_conditions(&self.sium.rho2)
    }

    pub fn chain_status(&self) -> Status {
        status_of(&self.hypotheses(), self.chain.as_ref().map(|c| c.chain_ok).unwrap_or(false))
    }

    pub fn loewner_status(&self) -> Status {
        status_of(&[], self.loewner.all_applicable_pass())
    }

    pub fn hypotheses_status(&self) -> Status {
        if self.hyp_ra && self.hyp_rs_sbar {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn fov_hypotheses(&self) -> Vec<Hypothesis> {
        vec![("λ(R_A A) ⊂ (0, 2)".into(), self.fov.is_ok())]
    }

    pub fn fov_status(&self) -> Status {
        status_of(&self.fov_hypotheses(), self.fov.as_ref().map(|f| f.sandwich_ok()).unwrap_or(false))
    }

    pub fn elman_hypotheses(&self) -> Vec<Hypothesis> {
        let mut h = self.fov_hypotheses();
        h.push(("0 < γ_fov ≤ Γ_fov".into(), self.elman.is_some()));
        h
    }
}

#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: MethodSpec,
    pub steps: usize,
    pub observed_rate: f64,
    pub note: String,
    pub bound_name: &'static str,
    pub bound_rate: f64,
    pub hypotheses: Vec<Hypothesis>,
    /// Steps where the error exceeded the bound.
    pub violations: usize,
    pub converged: bool,
    pub final_relative: f64,
}

impl MethodOutcome {
    pub fn status(&self) -> Status {
        if !self.converged && matches!(self.method, MethodSpec::GmresG | MethodSpec::GmresSplit) {
            return Status::Fail;
        }
        status_of(&self.hypotheses, self.violations == 0)
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub meta: Option<Meta>,
    pub certificates: Option<Certificates>,
    pub outcomes: Vec<MethodOutcome>,
    /// Set when a module error aborted the pipeline.
    pub error: Option<String>,
}

impl Experiment {
    /// Every certificate passed, including the two standing hypotheses.
    pub fn all_pass(&self) -> bool {
        let Some(c) = &self.certificates else { return false };
        self.error.is_none()
            && c.hypotheses_status().ok()
            && c.loewner_status().ok()
            && c.chain_status().ok()
            && c.fov_status().ok()
            && self.outcomes.iter().all(|o| o.status().ok())
    }

    /// 0 iff every certificate passed, 1 if one failed, 2 on a module error.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            2
        } else if self.all_pass() {
            0
        } else {
            1
        }
    }
}

pub fn fingerprint(cfg: &ExperimentConfig) -> String {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(b"\n");
    h.update(cfg.canonical().as_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn build_system(cfg: &ExperimentConfig) -> Result<SaddleSystem, String> {
    let sys = match &cfg.problem {
        ProblemSpec::MacStokes { grid, viscosity } => make_mac_stokes(*grid, *viscosity),
        ProblemSpec::MixedPoisson { grid, c_weight } => make_mixed_poisson(*grid, *c_weight),
        ProblemSpec::Random { n, m, c_mode } => make_random_saddle(*n, *m, cfg.seed, *c_mode),
    };
    sys.map_err(|e| format!("building the system: {e}"))
}

/// Builds `R_A`, then the Schur smoother on S̄ or S, rescaled to dominate it
/// unless `rescale = none`.
pub fn build_pair(cfg: &ExperimentConfig, sys: &SaddleSystem) -> Result<PreconPair, String> {
    let err = |e: saddle_core::operators::OperatorError| format!("building the smoothers: {e}");
    let a = sys.a();
    let r_a = match cfg.smoother_a {
        SmootherA::Exact(scale) => exact_inverse(a, scale),
        SmootherA::Jacobi(theta) => scaled_jacobi(a, theta),
        SmootherA::Sgs(d) => sym_gauss_seidel(a, d),
        SmootherA::TwoGrid { smooths, damping } => two_grid_vcycle(a, sys.layout(), smooths, damping),
    }
    .map_err(err)?;
    let placeholder = diagonal_inverse(&SymMatrix::identity(sys.m())).map_err(err)?;
    let probe = PreconPair::new(sys, r_a, placeholder).map_err(err)?;
    let target = match cfg.rescale {
        RescaleTarget::S => &probe.s,
        RescaleTarget::SBar | RescaleTarget::None => &probe.s_bar,
    };
    let base: ApproxInverse = match cfg.smoother_s {
        SmootherS::Exact => exact_inverse(target, 1.0),
        SmootherS::Jacobi(theta) => diagonal_inverse(target).map(|d| d.scaled(theta, format!("jacobi({theta})"))),
        SmootherS::Sgs(d) => sym_gauss_seidel(target, d),
    }
    .map_err(err)?;
    if cfg.rescale == RescaleTarget::None {
        return PreconPair::new(sys, probe.r_a, base).map_err(err);
    }
    let (r_s, record) = rescale_to_dominate(&base, target, cfg.margin).map_err(err)?;
    let mut pair = PreconPair::new(sys, probe.r_a, r_s).map_err(err)?;
    pair.rescale_log.push(record);
    Ok(pair)
}

pub fn certify(sys: &SaddleSystem, pair: &PreconPair) -> Result<Certificates, String> {
    let err = |e: TheoryError| format!("certificates: {e}");
    let spectral = spectral_report(sys, pair).map_err(err)?;
    let loewner = saddle_core::theory::verify_loewner_suite(sys, pair).map_err(err)?;
    let held = |name: &str| loewner.get(name).map(|c| c.holds).unwrap_or(false);
    let (hyp_ra, hyp_rs_sbar) = (held("hyp_RA_strict"), held("hyp_RS_Sbar"));
    let chain = match evaluate_chain(sys, pair) {
        Ok(c) => Ok(c),
        Err(e @ (TheoryError::Inconsistent { .. } | TheoryError::Linalg(_) | TheoryError::Operator(_))) => return Err(err(e)),
        Err(e) => Err(e.to_string()),
    };
    let fov = match fov_constants(sys, pair, FOV_TOL) {
        Ok(f) => Ok(f),
        Err(e @ TheoryError::SpectrumAssumptionViolated(_)) => Err(e.to_string()),
        Err(e) => return Err(err(e)),
    };
    let elman = fov.as_ref().ok().and_then(|f| elman_bound(f.gamma, f.big_gamma).ok());
    Ok(Certificates {
        bwy: bwy_rates(spectral.delta, spectral.gamma, spectral.gamma_bar),
        sium: sium_rates(spectral.delta, spectral.gamma, spectral.gamma_bar),
        prior: prior_rates(spectral.delta, spectral.gamma).ok(),
        spectral,
        loewner,
        hyp_ra,
        hyp_rs_sbar,
        chain,
        fov,
        elman,
    })
}

fn stationary(
    spec: MethodSpec,
    cfg: &ExperimentConfig,
    sys: &SaddleSystem,
    pair: &PreconPair,
    rhs: &RhsPair,
    certs: &Certificates,
) -> Result<MethodOutcome, String> {
    let method = match spec {
        MethodSpec::Bwy => Method::Bwy,
        MethodSpec::Sium => Method::Sium,
        _ => Method::Ium,
    };
    let h = run_iteration(method, sys, pair, rhs, &IterateState::zeros(sys.n(), sys.m()), cfg.k_max, cfg.tol)
        .map_err(|e| format!("{}: {e}", spec.name()))?;
    let (bound_name, rate, factor, hypotheses, reference) = match method {
        Method::Bwy => ("9 rho1^2k", certs.bwy.rho1.value, 9.0, certs.bwy_hypotheses(), h.initial_sq()),
        Method::Sium => ("9 rho2^2k", certs.sium.rho2.value, 9.0, certs.sium_hypotheses(), h.initial_sq()),
        Method::Ium => ("36 rho2^2k", certs.sium.rho2.value, 36.0, certs.sium_hypotheses(), h.half_step_reference_sq.unwrap_or(f64::NAN)),
    };
    let sq = h.combined_sq();
    let violations = sq
        .iter()
        .enumerate()
        .filter(|(k, c)| **c > factor * rate.powi(2 * *k as i32) * reference * (1.0 + BOUND_SLACK))
        .count();
    let norms = h.combined();
    let steps = h.len();
    let final_relative = if norms[0] > 0.0 { norms[steps] / norms[0] } else { 0.0 };
    let converged = final_relative <= cfg.tol;
    let (observed_rate, note) = if steps <= 2 {
        let r = if norms[0] > 0.0 { final_relative.powf(1.0 / steps.max(1) as f64) } else { 0.0 };
        let note = match (steps, converged) {
            (1, true) => "one-step".to_string(),
            (_, true) => format!("converged in {steps} steps"),
            _ => "short run".to_string(),
        };
        (r, note)
    } else {
        let est = rate_of_norms(&norms, TAIL_WINDOW.min(steps - 1)).map_err(|e| format!("{}: {e}", spec.name()))?;
        let note = if est.floor_reached {
            "roundoff floor reached"
        } else if converged {
            "converged"
        } else {
            "k_max reached"
        };
        (est.rate, note.to_string())
    };
    Ok(MethodOutcome { method: spec, steps, observed_rate, note, bound_name, bound_rate: rate, hypotheses, violations, converged, final_relative })
}

fn krylov(spec: MethodSpec, cfg: &ExperimentConfig, sys: &SaddleSystem, pair: &PreconPair, rhs: &RhsPair, certs: &Certificates) -> Result<MethodOutcome, String> {
    let mode = if spec == MethodSpec::GmresG { GmresMode::Left } else { GmresMode::Split };
    let opts = GmresOptions { tol: cfg.gmres_tol, max_iter: cfg.k_max, restart: None };
    let sol = solve_preconditioned(mode, sys, pair, rhs, &opts).map_err(|e| format!("{}: {e}", spec.name()))?;
    let o = &sol.outcome;
    let contraction = o.contraction();
    let bound = certs.elman.unwrap_or(f64::NAN);
    let violations = usize::from(!(contraction <= bound * (1.0 + BOUND_SLACK)));
    let final_relative = match (o.residuals.first(), o.residuals.last()) {
        (Some(&r0), Some(&rk)) if r0 > 0.0 => rk / r0,
        _ => 0.0,
    };
    Ok(MethodOutcome {
        method: spec,
        steps: o.iterations,
        observed_rate: contraction,
        note: if o.converged { "converged".into() } else { "k_max reached".into() },
        bound_name: "elman",
        bound_rate: bound,
        hypotheses: certs.elman_hypotheses(),
        violations,
        converged: o.converged,
        final_relative,
    })
}

/// Runs the pipeline. With `run_methods = false` only the certificates are
/// computed. A module error stops the pipeline; what finished is kept.
pub fn run_experiment(cfg: &ExperimentConfig, run_methods: bool) -> Experiment {
    let mut out = Experiment { meta: None, certificates: None, outcomes: Vec::new(), error: None };
    if let Err(e) = run_into(cfg, run_methods, &mut out) {
        out.error = Some(e);
    }
    out
}

fn run_into(cfg: &ExperimentConfig, run_methods: bool, out: &mut Experiment) -> Result<(), String> {
    let sys = build_system(cfg)?;
    let pair = build_pair(cfg, &sys)?;
    out.meta = Some(Meta {
        fingerprint: fingerprint(cfg),
        problem: sys.label().to_string(),
        n: sys.n(),
        m: sys.m(),
        smoother_a: pair.r_a.label().to_string(),
        smoother_s: pair.r_s.label().to_string(),
        rescale: pair.rescale_log.first().map(|r| (r.lambda_max, r.factor)),
    });
    let certs = certify(&sys, &pair)?;
    out.certificates = Some(certs.clone());
    if !run_methods {
        return Ok(());
    }
    let rhs = RhsPair::random(sys.n(), sys.m(), cfg.seed);
    for &spec in &cfg.methods {
        let o = match spec {
            MethodSpec::Bwy | MethodSpec::Sium | MethodSpec::Ium => stationary(spec, cfg, &sys, &pair, &rhs, &certs)?,
            MethodSpec::GmresG | MethodSpec::GmresSplit => krylov(spec, cfg, &sys, &pair, &rhs, &certs)?,
        };
        out.outcomes.push(o);
    }
    Ok(())
}
