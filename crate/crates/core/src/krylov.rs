//! GMRes in a weighted inner product, used with the block-triangular
//! preconditioner in two equivalent forms:
//!
//! * `Left`: `G 𝒜 x = G b` in the `L D U` inner product, `G = U⁻¹ H⁻¹ L⁻¹`;
//! * `Split`: `(L H)⁻¹ 𝒜 U⁻¹ y = (L H)⁻¹ b` in the `D` inner product, `x = U⁻¹ y`.
//!
//! `U` maps one onto the other, so both produce the same iterates up to
//! roundoff.

use std::cell::Cell;
use std::fmt;
use std::time::{Duration, Instant};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{LinalgError, SymMatrix};
use crate::operators::PreconPair;
use crate::problems::{RhsPair, SaddleSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrylovError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("weight is not positive on a Krylov vector ((w, w)_W = {0:e})")]
    IndefiniteWeight(f64),
    #[error("FOV constants must satisfy 0 < gamma <= Gamma, got gamma = {gamma}, Gamma = {big_gamma}")]
    BadConstants { gamma: f64, big_gamma: f64 },
    #[error("unknown GMRes mode {0:?} (expected left or split)")]
    UnknownMode(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Stop once the weighted residual drops below `tol` times the initial one.
    pub tol: f64,
    pub max_iter: usize,
    /// Restart length; `None` runs full GMRes.
    pub restart: Option<usize>,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500, restart: None }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: DVector<f64>,
    /// Weighted residual norms; `residuals[0]` is the initial one.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl GmresOutcome {
    /// Mean reduction per iteration, `(r_k / r_0)^{1/k}`.
    pub fn contraction(&self) -> f64 {
        let k = self.residuals.len() - 1;
        if k == 0 || self.residuals[0] == 0.0 {
            return 0.0;
        }
        (self.residuals[k] / self.residuals[0]).powf(1.0 / k as f64)
    }

    /// Largest single-step ratio `r_{j+1}/r_j`.
    pub fn worst_step(&self) -> f64 {
        self.residuals.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).fold(0.0, f64::max)
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Weighted GMRes for `K x = c` with `(x, y)_W = xᵀ W y`. Arnoldi is modified
/// Gram-Schmidt with one reorthogonalization pass; the small least-squares
/// problem is updated with Givens rotations.
pub fn gmres_weighted(
    op: impl Fn(&DVector<f64>) -> DVector<f64>,
    c: &DVector<f64>,
    x0: &DVector<f64>,
    w: &SymMatrix,
    opts: &GmresOptions,
) -> Result<GmresOutcome, KrylovError> {
    let n = c.len();
    if x0.len() != n {
        return Err(KrylovError::Dimension { what: "initial guess", expected: n, got: x0.len() });
    }
    if w.dim() != n {
        return Err(KrylovError::Dimension { what: "weight", expected: n, got: w.dim() });
    }
    let wm = w.as_matrix();
    let w_norm = |v: &DVector<f64>, wv: &DVector<f64>| -> Result<f64, KrylovError> {
        let sq = v.dot(wv);
        if sq < 0.0 {
            return Err(KrylovError::IndefiniteWeight(sq));
        }
        Ok(sq.sqrt())
    };

    let mut x = x0.clone();
    let r = c - op(&x);
    let wr = wm * &r;
    let r0 = w_norm(&r, &wr)?;
    let mut residuals = vec![r0];
    if r0 == 0.0 {
        return Ok(GmresOutcome { x, residuals, iterations: 0, converged: true });
    }
    let target = opts.tol * r0;
    let cycle_len = opts.restart.unwrap_or(opts.max_iter).max(1);
    let mut iterations = 0;
    let (mut r, mut wr) = (r, wr);

    while iterations < opts.max_iter {
        let beta = w_norm(&r, &wr)?;
        if beta <= target {
            break;
        }
        let m = cycle_len.min(opts.max_iter - iterations);
        let mut v: Vec<DVector<f64>> = vec![&r / beta];
        let mut wv: Vec<DVector<f64>> = vec![&wr / beta];
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let mut rot: Vec<(f64, f64)> = Vec::with_capacity(m);
        let mut g = DVector::<f64>::zeros(m + 1);
        g[0] = beta;
        let mut k = 0;
        while k < m {
            let mut z = op(&v[k]);
            for _pass in 0..2 {
                for i in 0..=k {
                    let hik = wv[i].dot(&z);
                    h[(i, k)] += hik;
                    z.axpy(-hik, &v[i], 1.0);
                }
            }
            let wz = wm * &z;
            let hk = w_norm(&z, &wz)?;
            h[(k + 1, k)] = hk;
            for (i, &(cs, sn)) in rot.iter().enumerate() {
                let (a, b) = (h[(i, k)], h[(i + 1, k)]);
                h[(i, k)] = cs * a + sn * b;
                h[(i + 1, k)] = -sn * a + cs * b;
            }
            let (cs, sn) = givens(h[(k, k)], h[(k + 1, k)]);
            h[(k, k)] = cs * h[(k, k)] + sn * h[(k + 1, k)];
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -sn * g[k];
            g[k] *= cs;
            rot.push((cs, sn));
            k += 1;
            iterations += 1;
            residuals.push(g[k].abs());
            let breakdown = hk <= 1e-14 * beta;
            if g[k].abs() <= target || breakdown {
                break;
            }
            v.push(&z / hk);
            wv.push(&wz / hk);
        }
        // Back substitution on the rotated Hessenberg.
        let mut y = DVector::<f64>::zeros(k);
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[(i, j)] * y[j]).sum();
            y[i] = (g[i] - s) / h[(i, i)];
        }
        for i in 0..k {
            x.axpy(y[i], &v[i], 1.0);
        }
        r = c - op(&x);
        wr = wm * &r;
        let true_res = w_norm(&r, &wr)?;
        if let Some(last) = residuals.last_mut() {
            *last = true_res;
        }
        if true_res <= target {
            break;
        }
    }
    let converged = residuals.last().copied().unwrap_or(f64::INFINITY) <= target;
    Ok(GmresOutcome { x, residuals, iterations, converged })
}

/// `G r = U⁻¹ H⁻¹ L⁻¹ r`: `w_u = R_A r_u`, `w_p = −R_S(r_p − B w_u)`,
/// `z = (w_u − R_A Bᵀ w_p, w_p)`.
pub fn apply_g(sys: &SaddleSystem, pair: &PreconPair, r_u: &DVector<f64>, r_p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let w_u = pair.r_a.apply(r_u);
    let w_p = -pair.r_s.apply(&(r_p - sys.b() * &w_u));
    let z_u = &w_u - pair.r_a.apply(&sys.b().tr_mul(&w_p));
    (z_u, w_p)
}

/// `(L H)⁻¹ r = H⁻¹ L⁻¹ r`.
fn apply_lh_inv(sys: &SaddleSystem, pair: &PreconPair, r_u: &DVector<f64>, r_p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let w_u = pair.r_a.apply(r_u);
    let w_p = -pair.r_s.apply(&(r_p - sys.b() * &w_u));
    (w_u, w_p)
}

/// `U⁻¹ y = (y_u − R_A Bᵀ y_p, y_p)`.
fn apply_u_inv(sys: &SaddleSystem, pair: &PreconPair, y_u: &DVector<f64>, y_p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    (y_u - pair.r_a.apply(&sys.b().tr_mul(y_p)), y_p.clone())
}

/// Elman-type bound `(1 − γ²/Γ²)^{1/2}` on the per-step residual reduction.
pub fn elman_bound(gamma: f64, big_gamma: f64) -> Result<f64, KrylovError> {
    if !(gamma > 0.0 && gamma <= big_gamma && big_gamma.is_finite()) {
        return Err(KrylovError::BadConstants { gamma, big_gamma });
    }
    Ok((1.0 - (gamma / big_gamma).powi(2)).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GmresMode {
    Left,
    Split,
}

impl GmresMode {
    pub const ALL: [GmresMode; 2] = [GmresMode::Left, GmresMode::Split];

    pub fn name(self) -> &'static str {
        match self {
            GmresMode::Left => "left",
            GmresMode::Split => "split",
        }
    }
}

impl fmt::Display for GmresMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GmresMode {
    type Err = KrylovError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "1" => Ok(GmresMode::Left),
            "split" | "2" => Ok(GmresMode::Split),
            _ => Err(KrylovError::UnknownMode(s.to_string())),
        }
    }
}

/// Smoother and system applications made by one preconditioned operator
/// application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CostCounter {
    pub r_a: usize,
    pub r_s: usize,
    pub system: usize,
}

#[derive(Debug, Clone)]
pub struct KrylovSolution {
    pub mode: GmresMode,
    pub u: DVector<f64>,
    pub p: DVector<f64>,
    pub outcome: GmresOutcome,
    /// Cost of a single operator application inside the Krylov loop.
    pub cost_per_step: CostCounter,
    pub elapsed: Duration,
}

#[derive(Default)]
struct Tally {
    r_a: Cell<usize>,
    r_s: Cell<usize>,
    system: Cell<usize>,
}

impl Tally {
    fn snapshot(&self) -> CostCounter {
        CostCounter { r_a: self.r_a.get(), r_s: self.r_s.get(), system: self.system.get() }
    }

    fn bump(c: &Cell<usize>, by: usize) {
        c.set(c.get() + by);
    }
}

fn split(x: &DVector<f64>, n: usize) -> (DVector<f64>, DVector<f64>) {
    (x.rows(0, n).into_owned(), x.rows(n, x.len() - n).into_owned())
}

fn join(a: DVector<f64>, b: DVector<f64>) -> DVector<f64> {
    let n = a.len();
    let mut out = DVector::zeros(n + b.len());
    out.rows_mut(0, n).copy_from(&a);
    out.rows_mut(n, b.len()).copy_from(&b);
    out
}

/// `L D U = [[R_A⁻¹, Bᵀ], [B, B R_A Bᵀ + R_S⁻¹]]`.
pub fn ldu_weight(sys: &SaddleSystem, pair: &PreconPair) -> SymMatrix {
    let b_ra_bt = pair.r_a.materialize().sandwich(sys.b());
    SymMatrix::symmetrize(crate::linalg::block2x2(
        pair.r_a.inverse_materialize().as_matrix(),
        &sys.b().transpose(),
        sys.b(),
        &(b_ra_bt.as_matrix() + pair.r_s.inverse_materialize().as_matrix()),
    ))
}

/// `D = diag(R_A⁻¹, R_S⁻¹)`.
pub fn d_weight(pair: &PreconPair) -> SymMatrix {
    SymMatrix::symmetrize(crate::linalg::block_diag(pair.r_a.inverse_materialize().as_matrix(), pair.r_s.inverse_materialize().as_matrix()))
}

/// Solves the saddle system with preconditioned GMRes from a zero start.
pub fn solve_preconditioned(
    mode: GmresMode,
    sys: &SaddleSystem,
    pair: &PreconPair,
    rhs: &RhsPair,
    opts: &GmresOptions,
) -> Result<KrylovSolution, KrylovError> {
    let (n, m) = (sys.n(), sys.m());
    if rhs.f.len() != n || rhs.g.len() != m {
        return Err(KrylovError::Dimension { what: "right-hand side", expected: n + m, got: rhs.f.len() + rhs.g.len() });
    }
    let x0 = DVector::zeros(n + m);
    let start = Instant::now();
    let tally = Tally::default();
    // G costs two R_A and one R_S applications; so do U⁻¹ followed by (LH)⁻¹.
    let op_left = |x: &DVector<f64>| {
        Tally::bump(&tally.r_a, 2);
        Tally::bump(&tally.r_s, 1);
        Tally::bump(&tally.system, 1);
        let (u, p) = split(x, n);
        let (ru, rp) = sys.apply(&u, &p);
        let (zu, zp) = apply_g(sys, pair, &ru, &rp);
        join(zu, zp)
    };
    let op_split = |y: &DVector<f64>| {
        Tally::bump(&tally.r_a, 2);
        Tally::bump(&tally.r_s, 1);
        Tally::bump(&tally.system, 1);
        let (yu, yp) = split(y, n);
        let (xu, xp) = apply_u_inv(sys, pair, &yu, &yp);
        let (ru, rp) = sys.apply(&xu, &xp);
        let (zu, zp) = apply_lh_inv(sys, pair, &ru, &rp);
        join(zu, zp)
    };
    let probe = DVector::from_element(n + m, 1.0);
    let cost_per_step = {
        match mode {
            GmresMode::Left => op_left(&probe),
            GmresMode::Split => op_split(&probe),
        };
        tally.snapshot()
    };
    let (u, p, outcome) = match mode {
        GmresMode::Left => {
            let (cu, cp) = apply_g(sys, pair, &rhs.f, &rhs.g);
            let outcome = gmres_weighted(op_left, &join(cu, cp), &x0, &ldu_weight(sys, pair), opts)?;
            let (u, p) = split(&outcome.x, n);
            (u, p, outcome)
        }
        GmresMode::Split => {
            let (cu, cp) = apply_lh_inv(sys, pair, &rhs.f, &rhs.g);
            let outcome = gmres_weighted(op_split, &join(cu, cp), &x0, &d_weight(pair), opts)?;
            let (yu, yp) = split(&outcome.x, n);
            let (u, p) = apply_u_inv(sys, pair, &yu, &yp);
            (u, p, outcome)
        }
    };
    Ok(KrylovSolution { mode, u, p, outcome, cost_per_step, elapsed: start.elapsed() })
}
