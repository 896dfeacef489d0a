//! Desk-scale saddle-point test systems
//!
//! ```text
//! [ A  Bᵀ ] [u]   [f]
//! [ B  −C ] [p] = [g]
//! ```
//!
//! with A SPD, B full row rank and C PSD. Grid problems pin the first
//! pressure unknown so that B keeps full rank.

mod fixture;
mod grid;

pub use fixture::{dump_system, load_system, FixtureError};
pub use grid::{Centering, ComponentGrid, GridLayout};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{self, cholesky_factor, LinalgError, SymMatrix};
use crate::rng::SplitMix;

/// Relative pivot tolerance used for rank decisions on B.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("grid must have at least 4 cells per side and an even count, got {0}")]
    GridTooSmall(usize),
    #[error("bad dimensions: n = {n}, m = {m}")]
    BadDims { n: usize, m: usize },
    #[error("block dimensions do not fit together: {0}")]
    BlockShape(String),
    #[error("system is not well posed: {0}")]
    NotWellPosed(String),
    #[error("viscosity must be positive, got {0}")]
    BadViscosity(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Saddle-point system with the exact Schur complement `S_A = B A⁻¹ Bᵀ + C` cached.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    a: SymMatrix,
    b: DMatrix<f64>,
    c: SymMatrix,
    s_a: SymMatrix,
    layout: Option<GridLayout>,
    label: String,
}

impl SaddleSystem {
    /// Validates the standing assumptions (A SPD, C PSD, rank B = m ≤ n,
    /// S_A SPD) and caches S_A.
    pub fn new(a: SymMatrix, b: DMatrix<f64>, c: SymMatrix) -> Result<Self, ProblemError> {
        check_shapes(&a, &b, &c)?;
        linalg::check_finite(&b)?;
        let report = check_blocks(&a, &b, &c);
        if !report.all_ok() {
            return Err(ProblemError::NotWellPosed(report.describe_failures()));
        }
        let s_a = schur_exact(&a, &b, &c)?;
        Ok(Self { a, b, c, s_a, layout: None, label: String::from("custom") })
    }

    pub fn with_layout(mut self, layout: GridLayout) -> Self {
        assert_eq!(layout.len(), self.n(), "layout does not match the A block");
        self.layout = Some(layout);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n(&self) -> usize {
        self.a.dim()
    }

    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &SymMatrix {
        &self.c
    }

    pub fn s_a(&self) -> &SymMatrix {
        &self.s_a
    }

    pub fn layout(&self) -> Option<&GridLayout> {
        self.layout.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The full `(n+m)`-square block matrix.
    pub fn assemble(&self) -> DMatrix<f64> {
        linalg::block2x2(self.a.as_matrix(), &self.b.transpose(), &self.b, &(-self.c.as_matrix()))
    }

    /// `(A u + Bᵀ p, B u − C p)`.
    pub fn apply(&self, u: &DVector<f64>, p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let ru = self.a.as_matrix() * u + self.b.tr_mul(p);
        let rp = &self.b * u - self.c.as_matrix() * p;
        (ru, rp)
    }
}

fn check_shapes(a: &SymMatrix, b: &DMatrix<f64>, c: &SymMatrix) -> Result<(), ProblemError> {
    if b.ncols() != a.dim() || b.nrows() != c.dim() {
        return Err(ProblemError::BlockShape(format!(
            "A is {n}x{n}, B is {}x{}, C is {m}x{m}",
            b.nrows(),
            b.ncols(),
            n = a.dim(),
            m = c.dim()
        )));
    }
    Ok(())
}

fn schur_exact(a: &SymMatrix, b: &DMatrix<f64>, c: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let chol = cholesky_factor(a)?;
    let y = chol.solve_lower_matrix(&b.transpose());
    Ok(SymMatrix::symmetrize(y.tr_mul(&y) + c.as_matrix()))
}

/// Right-hand side `(f, g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsPair {
    pub f: DVector<f64>,
    pub g: DVector<f64>,
}

impl RhsPair {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { f: DVector::zeros(n), g: DVector::zeros(m) }
    }

    /// Seeded uniform entries in `[-1, 1)`.
    pub fn random(n: usize, m: usize, seed: u64) -> Self {
        let mut rng = SplitMix::new(seed);
        Self { f: rng.vector(n), g: rng.vector(m) }
    }

    pub fn norm(&self) -> f64 {
        (self.f.norm_squared() + self.g.norm_squared()).sqrt()
    }
}

/// Outcome of the standing-assumption checks.
#[derive(Debug, Clone, PartialEq)]
pub struct WellPosedReport {
    pub a_spd: bool,
    pub c_psd: bool,
    pub b_full_rank: bool,
    pub s_a_spd: bool,
    pub rank_b: usize,
    pub min_eig_a: f64,
    pub min_eig_c: f64,
    /// `NaN` when S_A could not be formed (A not SPD).
    pub min_eig_s_a: f64,
}

impl WellPosedReport {
    pub fn all_ok(&self) -> bool {
        self.a_spd && self.c_psd && self.b_full_rank && self.s_a_spd
    }

    fn describe_failures(&self) -> String {
        let mut out = Vec::new();
        if !self.a_spd {
            out.push(format!("A not SPD (min eig {:e})", self.min_eig_a));
        }
        if !self.c_psd {
            out.push(format!("C not PSD (min eig {:e})", self.min_eig_c));
        }
        if !self.b_full_rank {
            out.push(format!("B rank deficient (rank {})", self.rank_b));
        }
        if !self.s_a_spd {
            out.push(format!("S_A not SPD (min eig {:e})", self.min_eig_s_a));
        }
        out.join("; ")
    }
}

pub fn check_wellposed(sys: &SaddleSystem) -> WellPosedReport {
    check_blocks(&sys.a, &sys.b, &sys.c)
}

/// Runs the four standing-assumption checks on raw blocks.
pub fn check_blocks(a: &SymMatrix, b: &DMatrix<f64>, c: &SymMatrix) -> WellPosedReport {
    let a_spd = cholesky_factor(a).is_ok();
    let min_eig_a = a.min_eigenvalue();
    let min_eig_c = if c.dim() == 0 { 0.0 } else { c.min_eigenvalue() };
    let c_psd = min_eig_c >= -1e-12 * c.norm2().max(f64::MIN_POSITIVE);
    let rank_b = linalg::numerical_rank(b, RANK_TOL);
    let b_full_rank = rank_b == b.nrows() && b.nrows() <= b.ncols();
    let (s_a_spd, min_eig_s_a) = match schur_exact(a, b, c) {
        Ok(s) if s.dim() == 0 => (true, 0.0),
        Ok(s) => (cholesky_factor(&s).is_ok(), s.min_eigenvalue()),
        Err(_) => (false, f64::NAN),
    };
    WellPosedReport { a_spd, c_psd, b_full_rank, s_a_spd, rank_b, min_eig_a, min_eig_c, min_eig_s_a }
}

/// Solves the system by eliminating u:
/// `p = S_A⁻¹(B A⁻¹ f − g)`, `u = A⁻¹(f − Bᵀ p)`.
pub fn exact_solve(sys: &SaddleSystem, rhs: &RhsPair) -> Result<(DVector<f64>, DVector<f64>), ProblemError> {
    if rhs.f.len() != sys.n() || rhs.g.len() != sys.m() {
        return Err(ProblemError::BlockShape(format!(
            "rhs has lengths ({}, {}), system is ({}, {})",
            rhs.f.len(),
            rhs.g.len(),
            sys.n(),
            sys.m()
        )));
    }
    let a = cholesky_factor(&sys.a)?;
    let s = cholesky_factor(&sys.s_a)?;
    let a_inv_f = a.solve(&rhs.f);
    let p = s.solve(&(&sys.b * a_inv_f - &rhs.g));
    let u = a.solve(&(&rhs.f - sys.b.tr_mul(&p)));
    Ok((u, p))
}

fn check_grid(grid_n: usize) -> Result<(), ProblemError> {
    if grid_n < 4 || grid_n % 2 != 0 {
        return Err(ProblemError::GridTooSmall(grid_n));
    }
    Ok(())
}

/// `B = −div` from face unknowns to cell centers, scaled by `1/h`, with the
/// row of cell (0,0) removed.
fn staggered_divergence(layout: &GridLayout) -> DMatrix<f64> {
    let n_cells = layout.cells;
    let inv_h = n_cells as f64;
    let m = n_cells * n_cells - 1;
    let mut b = DMatrix::zeros(m, layout.len());
    for cj in 0..n_cells {
        for ci in 0..n_cells {
            let cell = cj * n_cells + ci;
            if cell == 0 {
                continue;
            }
            let row = cell - 1;
            let (ci, cj) = (ci as isize, cj as isize);
            let faces = [
                (layout.index(0, ci + 1, cj), -inv_h),
                (layout.index(0, ci, cj), inv_h),
                (layout.index(1, ci, cj + 1), -inv_h),
                (layout.index(1, ci, cj), inv_h),
            ];
            for (col, v) in faces {
                if let Some(col) = col {
                    b[(row, col)] = v;
                }
            }
        }
    }
    b
}

/// Five-point vector Laplacian on the staggered velocity components.
/// Node-direction walls drop out; cell-direction walls use ghost reflection
/// (`u_ghost = −u`), which adds one to the diagonal.
fn staggered_laplacian(layout: &GridLayout) -> DMatrix<f64> {
    let h2_inv = (layout.cells * layout.cells) as f64;
    let n = layout.len();
    let mut a = DMatrix::zeros(n, n);
    for (row, (k, i, j)) in layout.positions().into_iter().enumerate() {
        let comp = layout.components[k];
        let (i, j) = (i as isize, j as isize);
        let mut diag = 4.0;
        for (di, dj, centering) in [(-1, 0, comp.x), (1, 0, comp.x), (0, -1, comp.y), (0, 1, comp.y)] {
            match layout.index(k, i + di, j + dj) {
                Some(col) => a[(row, col)] = -h2_inv,
                None => {
                    if centering == Centering::Cell {
                        diag += 1.0;
                    }
                }
            }
        }
        a[(row, row)] = diag * h2_inv;
    }
    a
}

/// MAC Stokes on the unit square with `grid_n × grid_n` cells:
/// `A = ν·(−Δ_h)` on interior faces, `B = −div_h`, `C = 0`, one pressure pinned.
pub fn make_mac_stokes(grid_n: usize, viscosity: f64) -> Result<SaddleSystem, ProblemError> {
    check_grid(grid_n)?;
    if !(viscosity > 0.0 && viscosity.is_finite()) {
        return Err(ProblemError::BadViscosity(viscosity));
    }
    let layout = GridLayout::mac(grid_n);
    let a = SymMatrix::from_lower(staggered_laplacian(&layout) * viscosity);
    let b = staggered_divergence(&layout);
    let c = SymMatrix::zeros(b.nrows());
    Ok(SaddleSystem::new(a, b, c)?.with_layout(layout).with_label(format!("mac_stokes(grid={grid_n}, nu={viscosity})")))
}

/// Lowest-order mixed Poisson analog: A is the face-flux mass matrix scaled
/// by `1/h²` (2/3 on the diagonal, 1/6 to the neighbor sharing a cell),
/// `B = −div_h`, `C = c_weight·h²·I`, one pressure pinned.
pub fn make_mixed_poisson(grid_n: usize, c_weight: f64) -> Result<SaddleSystem, ProblemError> {
    check_grid(grid_n)?;
    if !(c_weight >= 0.0 && c_weight.is_finite()) {
        return Err(ProblemError::BadDims { n: grid_n, m: 0 });
    }
    let layout = GridLayout::mac(grid_n);
    let n = layout.len();
    let mut a = DMatrix::zeros(n, n);
    for (row, (k, i, j)) in layout.positions().into_iter().enumerate() {
        let (i, j) = (i as isize, j as isize);
        a[(row, row)] = 2.0 / 3.0;
        let neighbors = if k == 0 { [(i - 1, j), (i + 1, j)] } else { [(i, j - 1), (i, j + 1)] };
        for (ni, nj) in neighbors {
            if let Some(col) = layout.index(k, ni, nj) {
                a[(row, col)] = 1.0 / 6.0;
            }
        }
    }
    let b = staggered_divergence(&layout);
    let h2 = 1.0 / (grid_n * grid_n) as f64;
    let c = SymMatrix::identity(b.nrows()).scale(c_weight * h2);
    Ok(SaddleSystem::new(SymMatrix::from_lower(a), b, c)?
        .with_layout(layout)
        .with_label(format!("mixed_poisson(grid={grid_n}, c={c_weight})")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CMode {
    Zero,
    /// Seeded positive diagonal with entries in `[0.05, 0.5)`.
    Diag,
    /// Neumann 1-D Laplacian `tridiag(−1, 2, −1)` (corners 1) scaled by 0.25; PSD and singular.
    Laplace,
}

/// Shift applied to `GᵀG` as a multiple of `n`.
const RANDOM_A_SHIFT: f64 = 0.5;

/// Dense seeded system: `A = GᵀG + 0.5·n·I`, B uniform in `[-1, 1)` (redrawn
/// until it has full row rank), C per `c_mode`. Deterministic in all inputs.
pub fn make_random_saddle(n: usize, m: usize, seed: u64, c_mode: CMode) -> Result<SaddleSystem, ProblemError> {
    if n == 0 || m == 0 || m > n {
        return Err(ProblemError::BadDims { n, m });
    }
    let mut rng = SplitMix::new(seed);
    let g = rng.matrix(n, n);
    let a = SymMatrix::symmetrize(g.tr_mul(&g) + DMatrix::identity(n, n) * (RANDOM_A_SHIFT * n as f64));
    let b = loop {
        let b = rng.matrix(m, n);
        if linalg::numerical_rank(&b, RANK_TOL) == m {
            break b;
        }
    };
    let c = match c_mode {
        CMode::Zero => SymMatrix::zeros(m),
        CMode::Diag => {
            let d: Vec<f64> = (0..m).map(|_| 0.05 + 0.45 * rng.unit()).collect();
            SymMatrix::from_diagonal(&d)
        }
        CMode::Laplace => {
            let mut l = DMatrix::zeros(m, m);
            for i in 0..m {
                let mut d = 0.0;
                if i > 0 {
                    l[(i, i - 1)] = -0.25;
                    d += 0.25;
                }
                if i + 1 < m {
                    l[(i, i + 1)] = -0.25;
                    d += 0.25;
                }
                l[(i, i)] = d;
            }
            SymMatrix::from_lower(l)
        }
    };
    Ok(SaddleSystem::new(a, b, c)?.with_label(format!("random(n={n}, m={m}, seed={seed}, c={c_mode:?})")))
}
