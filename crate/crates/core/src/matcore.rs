//! Dense row-major matrices and the handful of factorizations the rest of the
//! crate needs: partial-pivoted LU (determinants, solves), Gram-Schmidt QR for
//! random orthonormal frames, and thin wrappers over `nalgebra` for symmetric
//! eigen- and singular-value decompositions.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{NdppError, Result};

/// Below this magnitude a determinant is reported as singular.
pub const DET_UNDERFLOW: f64 = 1e-300;

/// Relative pivot threshold for [`Lu::factor`].
pub const PIVOT_RTOL: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Mat::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NdppError::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(NdppError::NonFinite);
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(NdppError::Dimension("ragged rows".into()));
        }
        Mat::from_vec(rows.len(), ncols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Matrix of independent standard normal draws.
    pub fn gaussian(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Self {
        let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul inner dimensions");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "t_matmul row counts");
        let mut out = Mat::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let b = other.row(r);
            for (i, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &bv) in orow.iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        out
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "matmul_t column counts");
        Mat::from_fn(self.rows, other.rows, |i, j| dot(self.row(i), other.row(j)))
    }

    /// Row vector times matrix: `x · self`.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (k, &a) in x.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, &b) in out.iter_mut().zip(self.row(k)) {
                *o += a * b;
            }
        }
        out
    }

    /// Matrix times column vector: `self · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn add(&self, other: &Mat) -> Mat {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        assert_eq!(self.shape(), other.shape(), "elementwise op shapes");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_diag(&mut self, eps: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] += eps;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Rows of `self` picked by `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Mat {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Mat { rows: idx.len(), cols: self.cols, data }
    }

    /// Principal submatrix on `idx`.
    pub fn principal(&self, idx: &[usize]) -> Mat {
        Mat::from_fn(idx.len(), idx.len(), |a, b| self[(idx[a], idx[b])])
    }

    /// Columns `[start, end)`.
    pub fn col_block(&self, start: usize, end: usize) -> Mat {
        Mat::from_fn(self.rows, end - start, |i, j| self[(i, start + j)])
    }

    /// Sub-block `[r0, r1) × [c0, c1)`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Mat {
        Mat::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "hcat row counts");
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Mat { rows: self.rows, cols, data }
    }

    /// Block-diagonal `diag(self, other)`.
    pub fn block_diag(&self, other: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows + other.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                out[(self.rows + i, self.cols + j)] = other[(i, j)];
            }
        }
        out
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Mat {
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place partial-pivoted LU, `P·A = L·U` with unit-diagonal `L`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    /// Factors `a`, failing with `SingularMatrix` when a pivot falls below
    /// `PIVOT_RTOL · max|a|`.
    pub fn factor(a: &Mat) -> Result<Lu> {
        let (lu, perm, sign, singular) = Self::eliminate(a)?;
        if singular {
            return Err(NdppError::SingularMatrix);
        }
        Ok(Lu { lu, perm, sign })
    }

    fn eliminate(a: &Mat) -> Result<(Mat, Vec<usize>, f64, bool)> {
        if !a.is_square() {
            return Err(NdppError::Dimension(format!("LU of a {}x{} matrix", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let threshold = PIVOT_RTOL * a.max_abs();
        let mut singular = false;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= threshold {
                singular = true;
            }
            if pmax == 0.0 {
                continue;
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    lu.data.swap(p * n + j, k * n + j);
                }
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu.data[i * n + j] -= f * lu.data[k * n + j];
                    }
                }
            }
        }
        Ok((lu, perm, sign, singular))
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    /// Returns `(sign, log|det|)`.
    pub fn logdet(&self) -> (i32, f64) {
        let mut sign = self.sign;
        let mut acc = 0.0;
        for i in 0..self.dim() {
            let u = self.lu[(i, i)];
            if u < 0.0 {
                sign = -sign;
            }
            acc += u.abs().ln();
        }
        (sign as i32, acc)
    }

    /// Solves `A x = b` for a single right-hand side.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu.row(i)[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu.row(i)[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, rhs: &Mat) -> Mat {
        assert_eq!(rhs.rows, self.dim(), "solve rhs rows");
        let mut out = Mat::zeros(rhs.rows, rhs.cols);
        for j in 0..rhs.cols {
            let x = self.solve_vec(&rhs.col(j));
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn inverse(&self) -> Mat {
        self.solve(&Mat::identity(self.dim()))
    }
}

/// Sign and log-magnitude of `det(a)`.
///
/// A sign of 0 means the matrix is singular to working precision: either
/// elimination hit an exactly-zero pivot column or `|det| < 1e-300`.
pub fn lu_logdet(a: &Mat) -> Result<(i32, f64)> {
    if !a.is_square() {
        return Err(NdppError::Dimension(format!("determinant of a {}x{} matrix", a.rows, a.cols)));
    }
    if a.rows == 0 {
        return Ok((1, 0.0));
    }
    let (lu, _, sign0, _) = Lu::eliminate(a)?;
    let n = a.rows;
    let mut sign = sign0;
    let mut acc = 0.0;
    for i in 0..n {
        let u = lu[(i, i)];
        if u == 0.0 {
            return Ok((0, f64::NEG_INFINITY));
        }
        if u < 0.0 {
            sign = -sign;
        }
        acc += u.abs().ln();
    }
    if acc < DET_UNDERFLOW.ln() {
        return Ok((0, f64::NEG_INFINITY));
    }
    Ok((sign as i32, acc))
}

/// Convenience: signed determinant, `0.0` when singular.
pub fn det(a: &Mat) -> Result<f64> {
    let (s, l) = lu_logdet(a)?;
    Ok(if s == 0 { 0.0 } else { s as f64 * l.exp() })
}

pub fn solve(a: &Mat, rhs: &Mat) -> Result<Mat> {
    if rhs.rows != a.rows {
        return Err(NdppError::Dimension(format!(
            "rhs has {} rows, matrix has {}",
            rhs.rows, a.rows
        )));
    }
    Ok(Lu::factor(a)?.solve(rhs))
}

/// Orthonormalizes the columns of `a` (modified Gram-Schmidt, applied twice).
/// Returns `Q` with the same shape; the implied `R` has a positive diagonal.
pub fn orthonormalize_columns(a: &Mat) -> Result<Mat> {
    let (m, k) = a.shape();
    if k > m {
        return Err(NdppError::Dimension(format!("cannot orthonormalize {k} columns in R^{m}")));
    }
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| a.col(j)).collect();
    for j in 0..k {
        for _pass in 0..2 {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let proj = dot(&done[i], &rest[0]);
                for (x, q) in rest[0].iter_mut().zip(&done[i]) {
                    *x -= proj * q;
                }
            }
        }
        let norm = dot(&cols[j], &cols[j]).sqrt();
        if norm < 1e-14 {
            return Err(NdppError::NumericalFailure("rank-deficient column in QR".into()));
        }
        cols[j].iter_mut().for_each(|x| *x /= norm);
    }
    Ok(Mat::from_fn(m, k, |i, j| cols[j][i]))
}

/// An `m × k` matrix with orthonormal columns: the Q factor of a seeded
/// standard-Gaussian matrix, with R's diagonal fixed positive.
pub fn random_orthonormal(m: usize, k: usize, seed: u64) -> Result<Mat> {
    if k > m {
        return Err(NdppError::Dimension(format!("random_orthonormal needs k <= m, got k={k}, m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let g = Mat::gaussian(m, k, &mut rng);
        // A rank-deficient Gaussian draw has probability zero; redraw if it happens.
        if let Ok(q) = orthonormalize_columns(&g) {
            return Ok(q);
        }
    }
}

/// Eigenvalues (descending) and matching eigenvectors (as columns) of a
/// symmetric matrix. Only the lower triangle is trusted.
pub fn symmetric_eigen(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    if !a.is_square() {
        return Err(NdppError::Dimension("eigendecomposition of a non-square matrix".into()));
    }
    let n = a.rows;
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let eig = nalgebra::SymmetricEigen::new(sym.to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = Mat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((vals, vecs))
}

/// Singular values in descending order.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    if a.rows == 0 || a.cols == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.to_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}
