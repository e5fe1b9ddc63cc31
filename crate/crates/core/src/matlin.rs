//! Dense linear-algebra kernel.
//!
//! Everything downstream is expressed through a handful of primitives built on
//! a thin singular value decomposition: rank truncation (Eckart-Young),
//! singular value soft-thresholding (the proximal map of the nuclear norm),
//! pseudo-inverse application and the orthogonal projections onto the column
//! space and row space of a design.
//!
//! The SVD is a one-sided Jacobi (Hestenes) iteration. It is slower than
//! bidiagonalization on large inputs, but the matrices here are small and
//! Jacobi gives orthonormal factors to working precision independently of the
//! condition number.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense real matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat(DMatrix<f64>);

impl Mat {
    /// Builds a matrix from entries in row-major order.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &entries))
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != m {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(n, m, entries)
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        let mat = Mat(m);
        mat.ensure_finite()?;
        Ok(mat)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Mat(DMatrix::identity(n, n))
    }

    /// `rows x cols` matrix with `diag` on its main diagonal.
    pub fn from_diag(rows: usize, cols: usize, diag: &[f64]) -> Result<Self> {
        if diag.len() > rows.min(cols) {
            return Err(Error::invalid(format!(
                "{} diagonal entries do not fit a {rows}x{cols} matrix",
                diag.len()
            )));
        }
        let mut m = DMatrix::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        Self::from_dmatrix(m)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        let (r, c) = self.shape();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        Mat(self.0.transpose())
    }

    pub fn scale(&self, factor: f64) -> Mat {
        Mat(&self.0 * factor)
    }

    /// Matrix product with a shape check.
    pub fn matmul(&self, rhs: &Mat) -> Result<Mat> {
        if self.cols() != rhs.rows() {
            return Err(Error::mismatch(
                "matmul",
                format!("{:?} times {:?}", self.shape(), rhs.shape()),
            ));
        }
        Ok(Mat(&self.0 * &rhs.0))
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn tr_mul(&self, rhs: &Mat) -> Mat {
        Mat(self.0.tr_mul(&rhs.0))
    }

    /// Hilbert-Schmidt inner product `tr(self^T other)`.
    pub fn inner(&self, other: &Mat) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn frob_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn ensure_finite(&self) -> Result<()> {
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                if !self.0[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        Mat(&self.0 + &rhs.0)
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        Mat(&self.0 - &rhs.0)
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        Mat(&self.0 * &rhs.0)
    }
}

/// Default relative threshold for numerical rank decisions.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    1e-10 * rows.max(cols) as f64
}

/// Thin SVD `M = U diag(s) V^T` restricted to the retained singular values.
///
/// `s` is nonincreasing and strictly positive; `U` and `V` have orthonormal
/// columns. A zero matrix has an empty factorization.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    u: Mat,
    s: Vec<f64>,
    v: Mat,
}

impl ThinSvd {
    pub fn u(&self) -> &Mat {
        &self.u
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn v(&self) -> &Mat {
        &self.v
    }

    /// Number of retained singular values.
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Shape of the factorized matrix.
    pub fn source_shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }

    /// `U diag(s) V^T` using the leading `k` triplets.
    pub fn reconstruct_leading(&self, k: usize) -> Mat {
        compose(&self.u, &self.s[..k.min(self.s.len())], &self.v)
    }

    pub fn reconstruct(&self) -> Mat {
        self.reconstruct_leading(self.s.len())
    }
}

/// `U[:, :k] diag(values) V[:, :k]^T` with `k = values.len()`.
fn compose(u: &Mat, values: &[f64], v: &Mat) -> Mat {
    let k = values.len();
    let (m, n) = (u.rows(), v.rows());
    if k == 0 {
        return Mat::zeros(m, n);
    }
    let mut us = u.0.columns(0, k).into_owned();
    for (j, &s) in values.iter().enumerate() {
        us.column_mut(j).scale_mut(s);
    }
    Mat(us * v.0.columns(0, k).transpose())
}

const MAX_SWEEPS: usize = 80;

/// One-sided Jacobi on a matrix with at least as many rows as columns.
///
/// Returns the rotated columns `W = A V` (mutually orthogonal on exit) and the
/// accumulated rotation `V`.
fn jacobi_tall(mut w: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = w.shape();
    let mut v = DMatrix::<f64>::identity(n, n);
    if n < 2 {
        return (w, v);
    }
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let (alpha, beta, gamma) = {
                    let ci = w.column(i);
                    let cj = w.column(j);
                    (ci.norm_squared(), cj.norm_squared(), ci.dot(&cj))
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(w.as_mut_slice(), m, i, j, c, s);
                rotate_columns(v.as_mut_slice(), n, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

/// Applies the plane rotation `(x, y) <- (c x - s y, s x + c y)` to columns
/// `i < j` of a column-major buffer with `m` rows.
fn rotate_columns(data: &mut [f64], m: usize, i: usize, j: usize, c: f64, s: f64) {
    let (head, tail) = data.split_at_mut(j * m);
    let xi = &mut head[i * m..(i + 1) * m];
    let xj = &mut tail[..m];
    for (a, b) in xi.iter_mut().zip(xj.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Full Jacobi factorization, singular values sorted nonincreasing, with
/// triplets kept only when `s_k > tol * s_1` and `s_k > 0`.
fn svd_with_tol(m: &DMatrix<f64>, tol: f64) -> ThinSvd {
    let (rows, cols) = m.shape();
    let wide = rows < cols;
    let work = if wide { m.transpose() } else { m.clone() };
    let (w, rot) = jacobi_tall(work);

    let norms: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let s1 = order.first().map_or(0.0, |&i| norms[i]);
    let keep: Vec<usize> = order
        .into_iter()
        .take_while(|&i| norms[i] > 0.0 && norms[i] > tol * s1)
        .collect();

    let k = keep.len();
    let (tall_rows, tall_cols) = w.shape();
    let mut left = DMatrix::zeros(tall_rows, k);
    let mut right = DMatrix::zeros(tall_cols, k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in keep.iter().enumerate() {
        let sigma = norms[src];
        left.set_column(dst, &(w.column(src) / sigma));
        right.set_column(dst, &rot.column(src));
        s.push(sigma);
    }
    if wide {
        ThinSvd {
            u: Mat(right),
            s,
            v: Mat(left),
        }
    } else {
        ThinSvd {
            u: Mat(left),
            s,
            v: Mat(right),
        }
    }
}

/// Thin SVD keeping the singular values with `s_k > tol * s_1`.
pub fn thin_svd(m: &Mat, tol: f64) -> Result<ThinSvd> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::invalid("thin_svd needs nonzero dimensions"));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::invalid(format!(
            "rank tolerance must be finite and nonnegative, got {tol}"
        )));
    }
    m.ensure_finite()?;
    Ok(svd_with_tol(&m.0, tol))
}

/// Thin SVD with [`default_rank_tol`].
pub fn thin_svd_default(m: &Mat) -> Result<ThinSvd> {
    thin_svd(m, default_rank_tol(m.rows(), m.cols()))
}

/// All strictly positive singular values, nonincreasing.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    svd_with_tol(&m.0, 0.0).s
}

pub fn numerical_rank(svd: &ThinSvd) -> usize {
    svd.rank()
}

/// Best rank-`r` approximation in Frobenius norm.
pub fn truncate_rank(m: &Mat, r: usize) -> Result<Mat> {
    let svd = thin_svd(m, 0.0)?;
    if r >= svd.rank() {
        return Ok(m.clone());
    }
    Ok(svd.reconstruct_leading(r))
}

/// Singular value soft-thresholding `U diag((s - tau)_+) V^T`.
pub fn svt(m: &Mat, tau: f64) -> Result<Mat> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::invalid(format!(
            "threshold must be finite and nonnegative, got {tau}"
        )));
    }
    if tau == 0.0 {
        return Ok(m.clone());
    }
    let svd = thin_svd(m, 0.0)?;
    Ok(shrink(&svd, tau))
}

pub(crate) fn shrink(svd: &ThinSvd, tau: f64) -> Mat {
    let shrunk: Vec<f64> = svd
        .s
        .iter()
        .map(|&s| s - tau)
        .take_while(|&s| s > 0.0)
        .collect();
    compose(&svd.u, &shrunk, &svd.v)
}

/// Orthogonal projection onto `col(X)`: `U (U^T M)`.
pub fn project_colspace(svd_x: &ThinSvd, m: &Mat) -> Result<Mat> {
    if m.rows() != svd_x.u.rows() {
        return Err(Error::mismatch(
            "project_colspace",
            format!("M has {} rows, U has {}", m.rows(), svd_x.u.rows()),
        ));
    }
    Ok(&svd_x.u * &svd_x.u.tr_mul(m))
}

/// Orthogonal projection onto `rg(X^T)`: `V (V^T A)`.
pub fn project_rowspace(svd_x: &ThinSvd, a: &Mat) -> Result<Mat> {
    if a.rows() != svd_x.v.rows() {
        return Err(Error::mismatch(
            "project_rowspace",
            format!("A has {} rows, V has {}", a.rows(), svd_x.v.rows()),
        ));
    }
    Ok(&svd_x.v * &svd_x.v.tr_mul(a))
}

/// Minimum-norm solution `X^+ M = V diag(1/s) U^T M`.
pub fn pinv_apply(svd_x: &ThinSvd, m: &Mat) -> Result<Mat> {
    if m.rows() != svd_x.u.rows() {
        return Err(Error::mismatch(
            "pinv_apply",
            format!("M has {} rows, X has {}", m.rows(), svd_x.u.rows()),
        ));
    }
    let mut coords = svd_x.u.tr_mul(m).0;
    for (i, &s) in svd_x.s.iter().enumerate() {
        coords.row_mut(i).scale_mut(1.0 / s);
    }
    Ok(Mat(&svd_x.v.0 * coords))
}

/// Largest singular value; zero for the zero matrix.
pub fn op_norm(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Sum of singular values.
pub fn nuclear_norm(m: &Mat) -> f64 {
    singular_values(m).iter().sum()
}
