//! Dense symmetric linear algebra used by every other module.
//!
//! Everything here works on dense `f64` storage. Symmetric matrices are kept
//! in [`SymMatrix`], whose constructors make the symmetry exact so that
//! downstream eigen-solves never see a skew part caused by roundoff.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `L⁻¹ B` or `L⁻ᵀ B` for lower-triangular `L`, blocked (faer).
fn trsm_lower(l: &DMatrix<f64>, b: &DMatrix<f64>, transpose: bool) -> DMatrix<f64> {
    let lf = to_faer(l);
    let mut x = to_faer(b);
    if transpose {
        faer::linalg::triangular_solve::solve_upper_triangular_in_place(lf.transpose(), x.as_mut(), faer::Par::Seq);
    } else {
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(lf.as_ref(), x.as_mut(), faer::Par::Seq);
    }
    from_faer(x.as_ref())
}

/// Ascending eigenvalues of a symmetric matrix. faer does the work; the
/// nalgebra solver is kept as a fallback if it reports non-convergence.
fn sym_eigenvalues_dense(m: &DMatrix<f64>) -> Vec<f64> {
    let f = to_faer(m);
    let mut ev: Vec<f64> = match f.self_adjoint_eigenvalues(faer::Side::Lower) {
        Ok(ev) => ev,
        Err(_) => m.clone().symmetric_eigenvalues().iter().copied().collect(),
    };
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Ascending eigenpairs of a symmetric matrix.
fn sym_eigen_dense(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let f = to_faer(m);
    let (values, vectors) = match f.self_adjoint_eigen(faer::Side::Lower) {
        Ok(e) => {
            let s = e.S().column_vector();
            let u = e.U();
            let values: Vec<f64> = (0..m.nrows()).map(|i| s[i]).collect();
            (values, DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| u[(i, j)]))
        }
        Err(_) => {
            let e = SymmetricEigen::new(m.clone());
            (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
        }
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let sorted = order.iter().map(|&i| values[i]).collect();
    let v = DMatrix::from_fn(vectors.nrows(), order.len(), |r, c| vectors[(r, order[c])]);
    (sorted, v)
}
use thiserror::Error;

use crate::rng::SplitMix;

/// Default relative tolerance for Loewner-order tests.
pub const LOEWNER_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not numerically SPD: pivot {index} is {pivot:e}")]
    NotSpd { index: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric: relative skew {skew:e}")]
    NotSymmetric { skew: f64 },
    #[error("operator is not self-adjoint in the given inner product (defect {defect:e})")]
    NotSelfAdjoint { defect: f64 },
    #[error("nonsymmetric eigensolve did not converge")]
    EigenNoConvergence,
}

/// Anything that can act on a vector.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }
}

/// Dense symmetric matrix with exact structural symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Takes a square matrix that is symmetric up to roundoff and averages it
    /// with its transpose. Rejects matrices whose skew part exceeds `1e-8`
    /// relative to the largest entry.
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        check_square_finite(&m)?;
        let scale = m.amax();
        let skew = if scale > 0.0 { (&m - m.transpose()).amax() / scale } else { 0.0 };
        if skew > 1e-8 {
            return Err(LinalgError::NotSymmetric { skew });
        }
        Ok(Self::symmetrize(m))
    }

    /// Copies the lower triangle onto the upper one. The lower triangle is authoritative.
    pub fn from_lower(mut m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "from_lower needs a square matrix");
        let n = m.nrows();
        for j in 0..n {
            for i in 0..j {
                m[(i, j)] = m[(j, i)];
            }
        }
        Self(m)
    }

    /// `(M + Mᵀ) / 2`, exactly symmetric.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let n = m.nrows();
        let mut out = m;
        for j in 0..n {
            for i in 0..j {
                let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        Self(out)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.0.diagonal()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `X · self · Xᵀ`.
    pub fn sandwich(&self, x: &DMatrix<f64>) -> Self {
        Self::symmetrize(x * &self.0 * x.transpose())
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        sym_eigenvalues_dense(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Spectral norm.
    pub fn norm2(&self) -> f64 {
        let ev = self.eigenvalues();
        match (ev.first(), ev.last()) {
            (Some(lo), Some(hi)) => lo.abs().max(hi.abs()),
            _ => 0.0,
        }
    }

    /// Applies a scalar function to the spectrum: `V f(Λ) Vᵀ`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Self {
        if self.dim() == 0 {
            return self.clone();
        }
        let (values, v) = sym_eigen_dense(&self.0);
        let mapped: Vec<f64> = values.iter().map(|&l| f(l)).collect();
        let v = &v;
        let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * mapped[j]);
        Self::symmetrize(scaled * v.transpose())
    }

    pub fn inverse(&self) -> Result<Self, LinalgError> {
        Ok(cholesky_factor(self)?.inverse())
    }
}

impl LinearOperator for SymMatrix {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.0 * x
    }
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    check_finite(m)
}

pub(crate) fn check_finite(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(LinalgError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Lower Cholesky factor `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

/// Left-looking column Cholesky. A pivot at or below `dim·eps·max|diag|`
/// is reported as [`LinalgError::NotSpd`].
pub fn cholesky_factor(m: &SymMatrix) -> Result<Cholesky, LinalgError> {
    let n = m.dim();
    let a = m.as_matrix();
    let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let threshold = n as f64 * f64::EPSILON * max_diag;
    let mut l = a.lower_triangle();
    for j in 0..n {
        for k in 0..j {
            let ljk = l[(j, k)];
            if ljk != 0.0 {
                let (left, mut right) = l.columns_range_pair_mut(k, j);
                let src = left.rows_range(j..n);
                let mut dst = right.rows_range_mut(j..n);
                dst.axpy(-ljk, &src, 1.0);
            }
        }
        let pivot = l[(j, j)];
        if !(pivot > threshold) {
            return Err(LinalgError::NotSpd { index: j, pivot });
        }
        let d = pivot.sqrt();
        let mut col = l.view_mut((j, j), (n - j, 1));
        col /= d;
    }
    Ok(Cholesky { l })
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self.solve_lower(b);
        self.solve_upper(&y)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let y = trsm_lower(&self.l, b, false);
        trsm_lower(&self.l, &y, true)
    }

    /// `L⁻¹ B`.
    pub fn solve_lower_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        trsm_lower(&self.l, b, false)
    }

    /// `L⁻¹ b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        self.l.solve_lower_triangular(b).expect("Cholesky factor has a positive diagonal")
    }

    /// `L⁻ᵀ b`.
    pub fn solve_upper(&self, b: &DVector<f64>) -> DVector<f64> {
        self.l.tr_solve_lower_triangular(b).expect("Cholesky factor has a positive diagonal")
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim();
        SymMatrix::symmetrize(self.solve_matrix(&DMatrix::identity(n, n)))
    }
}

/// Eigenpairs of `A v = λ M v`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are M-orthonormal eigenvectors matching `values`.
    pub vectors: DMatrix<f64>,
}

impl GeneralizedEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

fn reduce_generalized(a: &SymMatrix, m: &SymMatrix) -> Result<(Cholesky, SymMatrix), LinalgError> {
    if a.dim() != m.dim() {
        return Err(LinalgError::DimensionMismatch { expected: m.dim(), got: a.dim() });
    }
    let chol = cholesky_factor(m)?;
    let x = trsm_lower(&chol.l, a.as_matrix(), false);
    let c = trsm_lower(&chol.l, &x.transpose(), false);
    Ok((chol, SymMatrix::symmetrize(c)))
}

/// Solves `A v = λ M v` for symmetric `A` and SPD `M` by reduction to
/// `L⁻¹ A L⁻ᵀ` (tridiagonalization + implicit QR on the reduced matrix).
pub fn sym_eig_generalized(a: &SymMatrix, m: &SymMatrix) -> Result<GeneralizedEigen, LinalgError> {
    let (chol, c) = reduce_generalized(a, m)?;
    let (values, w) = sym_eigen_dense(c.as_matrix());
    let vectors = trsm_lower(&chol.l, &w, true);
    Ok(GeneralizedEigen { values, vectors })
}

/// Eigenvalues only of `A v = λ M v`, ascending.
pub fn sym_eigenvalues_generalized(a: &SymMatrix, m: &SymMatrix) -> Result<Vec<f64>, LinalgError> {
    let (_, c) = reduce_generalized(a, m)?;
    Ok(c.eigenvalues())
}

/// `‖x‖_W = (Wx, x)^{1/2}` evaluated through a Cholesky factor, so the
/// result is exactly zero only for `x = 0`.
#[derive(Debug, Clone)]
pub struct WeightedNorm {
    chol: Cholesky,
    /// When set the norm is `‖x‖_{M⁻¹}` with `M = L Lᵀ`.
    inverse: bool,
}

impl WeightedNorm {
    /// Norm with weight `W` (must be SPD).
    pub fn new(weight: &SymMatrix) -> Result<Self, LinalgError> {
        Ok(Self { chol: cholesky_factor(weight)?, inverse: false })
    }

    /// Norm with weight `M⁻¹`, without forming the inverse.
    pub fn inverse_of(m: &SymMatrix) -> Result<Self, LinalgError> {
        Ok(Self { chol: cholesky_factor(m)?, inverse: true })
    }

    pub fn dim(&self) -> usize {
        self.chol.dim()
    }

    pub fn norm(&self, x: &DVector<f64>) -> Result<f64, LinalgError> {
        if x.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let y = if self.inverse { self.chol.solve_lower(x) } else { self.chol.l.tr_mul(x) };
        Ok(y.norm())
    }

    pub fn norm_squared(&self, x: &DVector<f64>) -> Result<f64, LinalgError> {
        self.norm(x).map(|v| v * v)
    }
}

/// Convenience wrapper for a one-off norm evaluation.
pub fn weighted_norm(x: &DVector<f64>, w: &WeightedNorm) -> Result<f64, LinalgError> {
    w.norm(x)
}

/// Outcome of a Loewner-order comparison `A ≤ M` (or `A < M`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoewnerResult {
    pub holds: bool,
    /// `λ_min(M − A)`.
    pub worst: f64,
    /// `‖A‖₂ + ‖M‖₂`, the scale the tolerance is relative to.
    pub scale: f64,
}

fn loewner_compare(a: &SymMatrix, m: &SymMatrix, rel_tol: f64, strict: bool) -> Result<LoewnerResult, LinalgError> {
    if a.dim() != m.dim() {
        return Err(LinalgError::DimensionMismatch { expected: m.dim(), got: a.dim() });
    }
    let worst = m.sub(a).min_eigenvalue();
    let scale = a.norm2() + m.norm2();
    let holds = if strict { worst > rel_tol * scale } else { worst >= -rel_tol * scale };
    Ok(LoewnerResult { holds, worst, scale })
}

/// `A ≤ M` iff `λ_min(M − A) ≥ −rel_tol·(‖A‖₂ + ‖M‖₂)`.
pub fn loewner_leq(a: &SymMatrix, m: &SymMatrix, rel_tol: f64) -> Result<LoewnerResult, LinalgError> {
    loewner_compare(a, m, rel_tol, false)
}

/// `A < M` iff `λ_min(M − A) > rel_tol·(‖A‖₂ + ‖M‖₂)`.
pub fn loewner_lt(a: &SymMatrix, m: &SymMatrix, rel_tol: f64) -> Result<LoewnerResult, LinalgError> {
    loewner_compare(a, m, rel_tol, true)
}

/// Largest `|(W T x, y) − (x, W T y)|` over a handful of deterministic probes,
/// relative to `‖WT‖·‖x‖·‖y‖`.
pub fn self_adjoint_defect(t: &DMatrix<f64>, w: &SymMatrix) -> f64 {
    let n = t.nrows();
    let wt = w.as_matrix() * t;
    let scale = wt.amax().max(f64::MIN_POSITIVE) * n as f64;
    let mut rng = SplitMix::new(0x5eed_ad10_1e57);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let x = rng.vector(n);
        let y = rng.vector(n);
        let lhs = (&wt * &x).dot(&y);
        let rhs = x.dot(&(&wt * &y));
        worst = worst.max((lhs - rhs).abs() / (scale * x.norm() * y.norm()));
    }
    worst
}

/// `max |λ(T)|`. With a weight, `T` must be self-adjoint in `(·,·)_W` and
/// the symmetric generalized problem `(W T, W)` is solved; otherwise the
/// nonsymmetric spectrum is computed via a real Schur form.
pub fn spectral_radius(t: &DMatrix<f64>, weight: Option<&SymMatrix>) -> Result<f64, LinalgError> {
    if !t.is_square() {
        return Err(LinalgError::NotSquare { rows: t.nrows(), cols: t.ncols() });
    }
    if t.nrows() == 0 {
        return Ok(0.0);
    }
    match weight {
        Some(w) => {
            if w.dim() != t.nrows() {
                return Err(LinalgError::DimensionMismatch { expected: t.nrows(), got: w.dim() });
            }
            let defect = self_adjoint_defect(t, w);
            if defect > 1e-8 {
                return Err(LinalgError::NotSelfAdjoint { defect });
            }
            let wt = SymMatrix::symmetrize(w.as_matrix() * t);
            let ev = sym_eigenvalues_generalized(&wt, w)?;
            Ok(ev.iter().fold(0.0, |acc: f64, l| acc.max(l.abs())))
        }
        None => {
            let schur = nalgebra::Schur::try_new(t.clone(), f64::EPSILON, 10_000)
                .ok_or(LinalgError::EigenNoConvergence)?;
            let ev = schur.complex_eigenvalues();
            Ok(ev.iter().fold(0.0, |acc: f64, l| acc.max(l.norm())))
        }
    }
}

/// SPD square root by eigendecomposition.
pub fn sqrt_spd(m: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    cholesky_factor(m)?;
    Ok(m.spectral_map(|l| l.max(0.0).sqrt()))
}

/// SPD inverse square root by eigendecomposition.
pub fn inv_sqrt_spd(m: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    cholesky_factor(m)?;
    Ok(m.spectral_map(|l| 1.0 / l.sqrt()))
}

/// Numerical rank from a column-pivoted QR of `b`: the number of `|R_ii|`
/// above `rel_tol·|R_00|`.
pub fn numerical_rank(b: &DMatrix<f64>, rel_tol: f64) -> usize {
    if b.nrows() == 0 || b.ncols() == 0 {
        return 0;
    }
    let qr = to_faer(b).col_piv_qr();
    let r = qr.thin_R();
    let k = r.nrows().min(r.ncols());
    let lead = r[(0, 0)].abs();
    if lead == 0.0 {
        return 0;
    }
    (0..k).filter(|&i| r[(i, i)].abs() > rel_tol * lead).count()
}

/// Block-diagonal assembly `diag(a, b)` for square blocks.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

/// `[[a11, a12], [a21, a22]]`.
pub fn block2x2(a11: &DMatrix<f64>, a12: &DMatrix<f64>, a21: &DMatrix<f64>, a22: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a11.nrows(), a22.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a11);
    out.view_mut((0, n), (n, m)).copy_from(a12);
    out.view_mut((n, 0), (m, n)).copy_from(a21);
    out.view_mut((n, n), (m, m)).copy_from(a22);
    out
}

/// Largest entrywise difference relative to the largest entry of `reference`.
pub fn rel_diff(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let scale = reference.amax().max(a.amax());
    if scale == 0.0 {
        return 0.0;
    }
    (a - reference).amax() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn sym(m: DMatrix<f64>) -> SymMatrix {
        SymMatrix::new(m).unwrap()
    }

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn random_spd(n: usize, seed: u64) -> SymMatrix {
        let mut rng = SplitMix::new(seed);
        let g = rng.matrix(n, n);
        SymMatrix::symmetrize(g.transpose() * &g + DMatrix::identity(n, n) * 0.1)
    }

    #[test]
    fn cholesky_examples() {
        let x = cholesky_factor(&SymMatrix::identity(3)).unwrap().solve(&vec(&[1.0, 2.0, 3.0]));
        assert_relative_eq!(x, vec(&[1.0, 2.0, 3.0]), epsilon = 1e-15);

        let x = cholesky_factor(&SymMatrix::from_diagonal(&[4.0, 9.0])).unwrap().solve(&vec(&[4.0, 9.0]));
        assert_relative_eq!(x, vec(&[1.0, 1.0]), epsilon = 1e-15);

        let m = sym(dmatrix![2.0, -1.0; -1.0, 2.0]);
        let x = cholesky_factor(&m).unwrap().solve(&vec(&[1.0, 0.0]));
        assert_relative_eq!(x, vec(&[2.0 / 3.0, 1.0 / 3.0]), epsilon = 1e-14);
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        let m = SymMatrix::from_diagonal(&[1.0, 2.0, -1.0]);
        assert!(matches!(cholesky_factor(&m), Err(LinalgError::NotSpd { index: 2, .. })));
        let singular = sym(dmatrix![1.0, 1.0; 1.0, 1.0]);
        assert!(matches!(cholesky_factor(&singular), Err(LinalgError::NotSpd { index: 1, .. })));
    }

    #[test]
    fn cholesky_residual_random() {
        let m = random_spd(40, 3);
        let b = SplitMix::new(4).vector(40);
        let x = cholesky_factor(&m).unwrap().solve(&b);
        assert!((m.as_matrix() * &x - &b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn generalized_eigen_examples() {
        let e = sym_eig_generalized(&SymMatrix::identity(2), &SymMatrix::identity(2)).unwrap();
        assert_relative_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.values[1], 1.0, epsilon = 1e-14);

        let e = sym_eig_generalized(&SymMatrix::from_diagonal(&[1.0, 4.0]), &SymMatrix::from_diagonal(&[1.0, 2.0]))
            .unwrap();
        assert_relative_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.values[1], 2.0, epsilon = 1e-14);

        let e = sym_eig_generalized(&sym(dmatrix![2.0, -1.0; -1.0, 2.0]), &SymMatrix::identity(2)).unwrap();
        assert_relative_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.values[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn generalized_eigen_residuals_and_orthonormality() {
        let a = SymMatrix::symmetrize(SplitMix::new(9).matrix(25, 25));
        let m = random_spd(25, 10);
        let e = sym_eig_generalized(&a, &m).unwrap();
        let scale = a.norm2() + m.norm2();
        for (k, &lambda) in e.values.iter().enumerate() {
            let v = e.vectors.column(k).into_owned();
            let r = a.as_matrix() * &v - m.as_matrix() * &v * lambda;
            assert!(r.norm() <= 1e-10 * scale, "pair {k}: {}", r.norm());
        }
        let gram = e.vectors.transpose() * m.as_matrix() * &e.vectors;
        assert!(rel_diff(&gram, &DMatrix::identity(25, 25)) < 1e-10);
    }

    #[test]
    fn weighted_norm_examples() {
        let id = WeightedNorm::new(&SymMatrix::identity(2)).unwrap();
        assert_eq!(id.norm(&vec(&[0.0, 0.0])).unwrap(), 0.0);
        assert_relative_eq!(id.norm(&vec(&[3.0, 4.0])).unwrap(), 5.0, epsilon = 1e-15);
        let w = WeightedNorm::new(&SymMatrix::from_diagonal(&[4.0, 1.0])).unwrap();
        assert_relative_eq!(weighted_norm(&vec(&[1.0, 2.0]), &w).unwrap(), 8f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(w.norm(&vec(&[1.0])), Err(LinalgError::DimensionMismatch { .. })));
    }

    #[test]
    fn inverse_weighted_norm_matches_explicit_inverse() {
        let m = random_spd(12, 5);
        let x = SplitMix::new(6).vector(12);
        let direct = WeightedNorm::new(&m.inverse().unwrap()).unwrap().norm(&x).unwrap();
        let implicit = WeightedNorm::inverse_of(&m).unwrap().norm(&x).unwrap();
        assert_relative_eq!(direct, implicit, max_relative = 1e-10);
    }

    #[test]
    fn loewner_examples() {
        let a = SymMatrix::from_diagonal(&[1.0, 2.0]);
        let r = loewner_leq(&a, &a, LOEWNER_TOL).unwrap();
        assert!(r.holds);
        assert_eq!(r.worst, 0.0);

        let r = loewner_leq(&SymMatrix::identity(2), &SymMatrix::from_diagonal(&[2.0, 3.0]), LOEWNER_TOL).unwrap();
        assert!(r.holds);
        assert_relative_eq!(r.worst, 1.0, epsilon = 1e-14);

        let r = loewner_leq(&SymMatrix::from_diagonal(&[1.0, 3.0]), &SymMatrix::from_diagonal(&[2.0, 2.0]), LOEWNER_TOL)
            .unwrap();
        assert!(!r.holds);
        assert_relative_eq!(r.worst, -1.0, epsilon = 1e-14);

        assert!(!loewner_lt(&a, &a, LOEWNER_TOL).unwrap().holds);
    }

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(spectral_radius(&DMatrix::zeros(3, 3), None).unwrap(), 0.0);
        let half = DMatrix::identity(3, 3) * 0.5;
        assert_relative_eq!(spectral_radius(&half, None).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(spectral_radius(&half, Some(&SymMatrix::identity(3))).unwrap(), 0.5, epsilon = 1e-15);
        let nil = dmatrix![0.0, 1.0; 0.0, 0.0];
        assert!(spectral_radius(&nil, None).unwrap() < 1e-12);
    }

    #[test]
    fn spectral_radius_weighted_rejects_non_self_adjoint() {
        let nil = dmatrix![0.0, 1.0; 0.0, 0.0];
        assert!(matches!(
            spectral_radius(&nil, Some(&SymMatrix::identity(2))),
            Err(LinalgError::NotSelfAdjoint { .. })
        ));
    }

    #[test]
    fn weighted_and_general_spectral_radius_agree() {
        // I − R M is self-adjoint in the M inner product.
        let m = random_spd(15, 21);
        let r = random_spd(15, 22).scale(0.01);
        let t = DMatrix::identity(15, 15) - r.as_matrix() * m.as_matrix();
        let general = spectral_radius(&t, None).unwrap();
        let weighted = spectral_radius(&t, Some(&m)).unwrap();
        assert_relative_eq!(general, weighted, max_relative = 1e-9);
    }

    #[test]
    fn sqrt_examples() {
        assert_relative_eq!(
            sqrt_spd(&SymMatrix::identity(3)).unwrap().into_matrix(),
            DMatrix::identity(3, 3),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            sqrt_spd(&SymMatrix::from_diagonal(&[4.0, 9.0])).unwrap().into_matrix(),
            DMatrix::from_diagonal(&vec(&[2.0, 3.0])),
            epsilon = 1e-14
        );
        // [[2,1],[1,2]] has eigenpairs 1 ↦ (1,−1)/√2 and 3 ↦ (1,1)/√2.
        let q = sqrt_spd(&sym(dmatrix![2.0, 1.0; 1.0, 2.0])).unwrap();
        let s3 = 3f64.sqrt();
        let expected = dmatrix![(1.0 + s3) / 2.0, (s3 - 1.0) / 2.0; (s3 - 1.0) / 2.0, (1.0 + s3) / 2.0];
        assert_relative_eq!(q.into_matrix(), expected, epsilon = 1e-14);
        assert!(sqrt_spd(&SymMatrix::from_diagonal(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn rank_detects_duplicate_rows() {
        let b = dmatrix![1.0, 2.0, 3.0; 1.0, 2.0, 3.0];
        assert_eq!(numerical_rank(&b, 1e-10), 1);
        let b = dmatrix![1.0, 0.0, 3.0; 0.0, 2.0, 3.0];
        assert_eq!(numerical_rank(&b, 1e-10), 2);
    }

    #[test]
    fn symmetry_is_exact() {
        let m = SymMatrix::from_lower(SplitMix::new(1).matrix(7, 7));
        assert_eq!(m.as_matrix(), &m.as_matrix().transpose());
        assert!(SymMatrix::new(dmatrix![1.0, 2.0; 0.0, 1.0]).is_err());
    }
}
