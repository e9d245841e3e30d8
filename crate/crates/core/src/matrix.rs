//! Dense nonnegative-matrix algebra: stochasticity, Laplacians, spectral
//! radius, fixed probability vectors, matrix exponentials and M-matrix
//! solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-sum tolerance used for every stochasticity check.
pub const ROW_SUM_TOL: f64 = 1e-9;

const EPS: f64 = f64::EPSILON;

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

fn check_nonnegative(m: &DMatrix<f64>) -> Result<()> {
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            let v = m[(row, col)];
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry { row, col, value: v });
            }
        }
    }
    Ok(())
}

/// Builds a dense matrix from row slices.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Dimension(format!(
            "row {} has {} entries, expected {}",
            i + 1,
            r.len(),
            ncols
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Square matrix with entries `>= 0`, checked exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegativeMatrix(DMatrix<f64>);

impl NonnegativeMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        check_nonnegative(&m)?;
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Nonnegative square matrix whose rows sum to one. Rows within
/// [`ROW_SUM_TOL`] are accepted and renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(DMatrix<f64>);

impl StochasticMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(m, ROW_SUM_TOL)
    }

    /// Same as [`StochasticMatrix::new`] with a caller-chosen row tolerance.
    pub fn with_tolerance(mut m: DMatrix<f64>, tol: f64) -> Result<Self> {
        check_square(&m)?;
        check_nonnegative(&m)?;
        for row in 0..m.nrows() {
            let sum: f64 = m.row(row).sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::RowSum {
                    row,
                    sum,
                    target: 1.0,
                    tol,
                });
            }
            m.row_mut(row).scale_mut(1.0 / sum);
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn to_nonnegative(&self) -> NonnegativeMatrix {
        NonnegativeMatrix(self.0.clone())
    }
}

/// Nonnegative square matrix with row sums at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstochasticMatrix(DMatrix<f64>);

impl SubstochasticMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        check_nonnegative(&m)?;
        for row in 0..m.nrows() {
            let sum: f64 = m.row(row).sum();
            if sum > 1.0 + ROW_SUM_TOL {
                return Err(Error::RowSum {
                    row,
                    sum,
                    target: 1.0,
                    tol: ROW_SUM_TOL,
                });
            }
        }
        Ok(Self(m))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn is_stochastic(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square()
        && a.iter().all(|&v| v >= 0.0 && v.is_finite())
        && a.row_iter().all(|r| (r.sum() - 1.0).abs() <= tol)
}

pub fn is_substochastic(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square()
        && a.iter().all(|&v| v >= 0.0 && v.is_finite())
        && a.row_iter().all(|r| r.sum() <= 1.0 + tol)
}

/// Laplacian `L[A]`: `l_ij = -a_ij` off the diagonal and `l_ii` the sum of
/// the off-diagonal entries of row `i`. The diagonal of `A` is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian(DMatrix<f64>);

impl Laplacian {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

pub fn laplacian_of(a: &NonnegativeMatrix) -> Laplacian {
    let a = a.as_matrix();
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                l[(i, j)] = -a[(i, j)];
                diag += a[(i, j)];
            }
        }
        l[(i, i)] = diag;
    }
    Laplacian(l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    /// `||A v - value * v||_inf` for the final iterate, `||v||_inf = 1`.
    pub residual: f64,
    pub iterations: usize,
}

/// Spectral radius of a nonnegative matrix by power iteration from the
/// all-ones vector. Half of the iteration budget is spent on `A` itself;
/// if that stalls (imprimitive matrices oscillate) the remainder runs on
/// `A + 0.5 I`, whose radius is `rho(A) + 0.5`.
pub fn spectral_radius(a: &NonnegativeMatrix, tol: f64, max_iter: usize) -> Result<SpectralEstimate> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let m = a.as_matrix();
    let n = m.nrows();
    if n == 0 {
        return Ok(SpectralEstimate {
            value: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    let first_budget = max_iter / 2;
    let first = power_iteration(m, 0.0, tol, first_budget);
    if first.residual < tol {
        return Ok(first);
    }
    let second = power_iteration(m, 0.5, tol, max_iter - first_budget);
    let total = first.iterations + second.iterations;
    if second.residual < tol {
        return Ok(SpectralEstimate {
            iterations: total,
            ..second
        });
    }
    let best = if first.residual <= second.residual { first } else { second };
    Err(Error::NotConverged {
        iterations: total,
        best_residual: best.residual,
        estimate: best.value,
    })
}

fn power_iteration(a: &DMatrix<f64>, shift: f64, tol: f64, max_iter: usize) -> SpectralEstimate {
    let n = a.nrows();
    let mut v = DVector::from_element(n, 1.0);
    let mut best = SpectralEstimate {
        value: f64::NAN,
        residual: f64::INFINITY,
        iterations: 0,
    };
    for it in 1..=max_iter {
        let mut w = a * &v;
        if shift != 0.0 {
            w.axpy(shift, &v, 1.0);
        }
        let norm = w.amax();
        let value = norm - shift;
        // v has unit sup-norm, so A v - rho v measures the eigen-residual.
        let residual = (&w - &v * norm).amax();
        if residual < best.residual {
            best = SpectralEstimate {
                value: value.max(0.0),
                residual,
                iterations: it,
            };
        }
        if residual < tol || norm == 0.0 {
            return SpectralEstimate {
                value: value.max(0.0),
                residual,
                iterations: it,
            };
        }
        v = w / norm;
    }
    SpectralEstimate {
        iterations: max_iter,
        ..best
    }
}

/// Probability vector together with the residual of its defining equation.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedVector {
    pub p: DVector<f64>,
    pub residual: f64,
}

/// Dimension of the numerical null space: singular values below
/// `n * eps * ||M||_F`.
pub fn nullity(m: &DMatrix<f64>) -> usize {
    let n = m.nrows().max(m.ncols());
    let scale = m.norm().max(1.0);
    let threshold = n as f64 * EPS * scale;
    let sv = m.clone().singular_values();
    let rank = sv.iter().filter(|&&s| s > threshold).count();
    m.ncols() - rank
}

/// Solves `G p = 0`, `1^T p = 1` where the rows of `G` sum to the zero
/// vector, via the bordered system with the last row replaced by `1^T`.
fn bordered_null_vector(g: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = g.nrows();
    let k = nullity(g);
    if k > 1 {
        return Err(Error::Ambiguous { nullity: k });
    }
    let mut bordered = g.clone();
    bordered.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let mut p = lu_solve(&bordered, &DMatrix::from_column_slice(n, 1, rhs.as_slice()))?.column(0).into_owned();
    // clear rounding-level negatives, keep the normalization exact
    for v in p.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    let s = p.sum();
    p /= s;
    Ok(p)
}

/// Left fixed probability vector `p^T W = p^T`, `p^T 1 = 1`.
pub fn left_fixed_vector(w: &StochasticMatrix) -> Result<FixedVector> {
    let n = w.dim();
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let g = w.as_matrix().transpose() - DMatrix::identity(n, n);
    let p = bordered_null_vector(&g)?;
    let residual = (w.as_matrix().tr_mul(&p) - &p).amax();
    Ok(FixedVector { p, residual })
}

/// Nonnegative left null vector `p^T L = 0`, `p^T 1 = 1`.
pub fn laplacian_left_null(l: &Laplacian) -> Result<FixedVector> {
    let n = l.dim();
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let g = l.as_matrix().transpose();
    let p = bordered_null_vector(&g)?;
    let residual = l.as_matrix().tr_mul(&p).amax();
    Ok(FixedVector { p, residual })
}

// Padé [13/13] coefficients for exp.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(M t)` by scaling and squaring with the degree-13 Padé approximant,
/// scaled so that `||M t||_1 / 2^s <= 0.5`.
pub fn matrix_exponential(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    check_square(m)?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Parameter(format!("time must be finite and >= 0, got {t}")));
    }
    let n = m.nrows();
    let a = m * t;
    let norm = norm1(&a);
    if !norm.is_finite() {
        return Err(Error::ExpOverflow { norm });
    }
    if norm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = lu_solve(&q, &p)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::ExpOverflow { norm });
    }
    Ok(r)
}

/// Solution of `Z X = B` from an LU factorization with partial pivoting.
#[derive(Debug, Clone, PartialEq)]
pub struct MMatrixSolution {
    pub x: DMatrix<f64>,
    /// Number of entries in `(-1e-9, 0)` clamped to zero.
    pub clamped: usize,
}

fn lu_solve(z: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(z)?;
    if z.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "left side is {}x{}, right side has {} rows",
            z.nrows(),
            z.ncols(),
            b.nrows()
        )));
    }
    let n = z.nrows();
    let lu = z.clone().lu();
    let u = lu.u();
    let pivot = u.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let scale = norm1(z).max(f64::MIN_POSITIVE);
    if n > 0 && !(pivot > n as f64 * EPS * scale) {
        return Err(Error::Singular { pivot });
    }
    lu.solve(b).ok_or(Error::Singular { pivot })
}

/// Solves `Z X = B` for a nonsingular M-matrix `Z`. When `B >= 0` the
/// solution is nonnegative; rounding-level negatives above `-1e-9` are
/// clamped to zero and counted.
pub fn m_matrix_solve(z: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<MMatrixSolution> {
    let mut x = lu_solve(z, b)?;
    let mut clamped = 0;
    if b.iter().all(|&v| v >= 0.0) {
        for v in x.iter_mut() {
            if *v < 0.0 && *v > -1e-9 {
                *v = 0.0;
                clamped += 1;
            }
        }
    }
    Ok(MMatrixSolution { x, clamped })
}
