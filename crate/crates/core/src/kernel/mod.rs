//! Kernel parameterizations.
//!
//! [`NdppParams`] is the learnable form `L = V Vᵀ + B C Bᵀ` with
//! `C = D − Dᵀ`; [`InferenceKernel`] is the generic `L = B̃ C̃ B̃ᵀ` form that
//! MAP inference and conditioning consume.

mod io;
mod skew;

pub use io::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};
pub use skew::{skew_factorize, BlockC};

use crate::error::{NdppError, Result};
use crate::matcore::{self, Mat};

/// Largest catalog for which [`check_p0`] will enumerate principal minors.
pub const P0_MAX_ITEMS: usize = 25;

/// Tolerance below zero tolerated for a principal minor in [`check_p0`].
pub const P0_TOL: f64 = 1e-10;

/// Learnable NDPP factors.
///
/// When `tied`, the skew part reuses `V` (`B = V`) and no separate `B` is
/// stored or updated.
#[derive(Clone, Debug, PartialEq)]
pub struct NdppParams {
    v: Mat,
    b: Option<Mat>,
    d: Mat,
    alpha: f64,
    beta: f64,
}

impl NdppParams {
    /// `b = None` means tied (`B = V`).
    pub fn new(v: Mat, b: Option<Mat>, d: Mat, alpha: f64, beta: f64) -> Result<Self> {
        let (m, k) = v.shape();
        if m == 0 || k == 0 {
            return Err(NdppError::Dimension("V must be at least 1x1".into()));
        }
        if let Some(b) = &b {
            if b.shape() != (m, k) {
                return Err(NdppError::Dimension(format!(
                    "B is {:?}, expected {:?}",
                    b.shape(),
                    (m, k)
                )));
            }
            if !b.is_finite() {
                return Err(NdppError::NonFinite);
            }
        }
        if d.shape() != (k, k) {
            return Err(NdppError::Dimension(format!("D is {:?}, expected {:?}", d.shape(), (k, k))));
        }
        if !v.is_finite() || !d.is_finite() {
            return Err(NdppError::NonFinite);
        }
        if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(NdppError::InvalidArgument("alpha and beta must be finite and >= 0".into()));
        }
        Ok(NdppParams { v, b, d, alpha, beta })
    }

    pub fn tied(v: Mat, d: Mat, alpha: f64) -> Result<Self> {
        Self::new(v, None, d, alpha, 0.0)
    }

    pub fn m(&self) -> usize {
        self.v.rows()
    }

    pub fn k(&self) -> usize {
        self.v.cols()
    }

    pub fn is_tied(&self) -> bool {
        self.b.is_none()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn v(&self) -> &Mat {
        &self.v
    }

    /// The skew-part factor; `V` itself when tied.
    pub fn b(&self) -> &Mat {
        self.b.as_ref().unwrap_or(&self.v)
    }

    pub fn d(&self) -> &Mat {
        &self.d
    }

    /// `C = D − Dᵀ`, skew-symmetric by construction.
    pub fn c(&self) -> Mat {
        let k = self.k();
        Mat::from_fn(k, k, |i, j| self.d[(i, j)] - self.d[(j, i)])
    }

    /// Dense `M × M` kernel. Only for small catalogs and tests.
    pub fn materialize(&self) -> Mat {
        let s = self.v.matmul_t(&self.v);
        let a = self.b().matmul(&self.c()).matmul_t(self.b());
        s.add(&a)
    }

    pub fn to_inference_kernel(&self) -> InferenceKernel {
        let btilde = self.v.hcat(self.b());
        let ctilde = Mat::identity(self.k()).block_diag(&self.c());
        InferenceKernel { btilde, ctilde, latent_rank: self.k() }
    }

    /// Number of scalar parameters that the optimizer updates.
    pub fn num_free(&self) -> usize {
        let mk = self.m() * self.k();
        mk + if self.is_tied() { 0 } else { mk } + self.k() * self.k()
    }

    /// Flattened `[v, b (untied only), d]`, row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_free());
        out.extend_from_slice(self.v.as_slice());
        if let Some(b) = &self.b {
            out.extend_from_slice(b.as_slice());
        }
        out.extend_from_slice(self.d.as_slice());
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat).
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_free(), "flat parameter length");
        let mk = self.m() * self.k();
        self.v.as_mut_slice().copy_from_slice(&flat[..mk]);
        let mut off = mk;
        if let Some(b) = &mut self.b {
            b.as_mut_slice().copy_from_slice(&flat[off..off + mk]);
            off += mk;
        }
        self.d.as_mut_slice().copy_from_slice(&flat[off..]);
    }

    pub fn v_mut(&mut self) -> &mut Mat {
        &mut self.v
    }

    pub fn d_mut(&mut self) -> &mut Mat {
        &mut self.d
    }

    /// Mutable `B` (untied only).
    pub fn b_mut(&mut self) -> Option<&mut Mat> {
        self.b.as_mut()
    }

    /// Untied copy with `B` set to the current `V`.
    pub fn untie(&self) -> NdppParams {
        NdppParams {
            v: self.v.clone(),
            b: Some(self.b().clone()),
            d: self.d.clone(),
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// Kernel in the form `L = B̃ C̃ B̃ᵀ` with `B̃` of shape `M × r`.
#[derive(Clone, Debug, PartialEq)]
pub struct InferenceKernel {
    btilde: Mat,
    ctilde: Mat,
    /// Rank `K` of the factors this kernel was built from (`r` otherwise).
    latent_rank: usize,
}

impl InferenceKernel {
    pub fn new(btilde: Mat, ctilde: Mat) -> Result<Self> {
        let r = btilde.cols();
        if ctilde.shape() != (r, r) {
            return Err(NdppError::Dimension(format!(
                "C~ is {:?}, expected {r}x{r}",
                ctilde.shape()
            )));
        }
        if !btilde.is_finite() || !ctilde.is_finite() {
            return Err(NdppError::NonFinite);
        }
        Ok(InferenceKernel { btilde, ctilde, latent_rank: r.max(1) })
    }

    /// Diagonal kernel `diag(values)` with `B̃ = I`.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(Mat::identity(values.len()), Mat::from_diag(values))
    }

    pub fn with_latent_rank(mut self, rank: usize) -> Self {
        self.latent_rank = rank.max(1);
        self
    }

    pub fn m(&self) -> usize {
        self.btilde.rows()
    }

    pub fn r(&self) -> usize {
        self.btilde.cols()
    }

    pub fn latent_rank(&self) -> usize {
        self.latent_rank
    }

    pub fn btilde(&self) -> &Mat {
        &self.btilde
    }

    pub fn ctilde(&self) -> &Mat {
        &self.ctilde
    }

    /// `c · L`, keeping the factor structure.
    pub fn scaled(&self, c: f64) -> InferenceKernel {
        InferenceKernel {
            btilde: self.btilde.clone(),
            ctilde: self.ctilde.scale(c),
            latent_rank: self.latent_rank,
        }
    }

    /// Dense `M × M` kernel.
    pub fn materialize(&self) -> Mat {
        self.btilde.matmul(&self.ctilde).matmul_t(&self.btilde)
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let bc = self.ctilde.vec_mul(self.btilde.row(i));
        matcore::dot(&bc, self.btilde.row(j))
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.m()).map(|i| self.entry(i, i)).collect()
    }

    /// Principal submatrix `L_Y`, built in `O(|Y|² r + |Y| r²)`.
    pub fn minor(&self, y: &[usize]) -> Mat {
        let by = self.btilde.select_rows(y);
        by.matmul(&self.ctilde).matmul_t(&by)
    }

    /// `(sign, log|det L_Y|)`; the empty set has determinant 1.
    pub fn subset_logdet(&self, y: &[usize]) -> (i32, f64) {
        if y.is_empty() {
            return (1, 0.0);
        }
        matcore::lu_logdet(&self.minor(y)).expect("minor is square")
    }

    /// `log det(I + L)` via `det(I_r + C̃ B̃ᵀB̃)`.
    pub fn log_normalizer(&self) -> Result<f64> {
        let gram = self.btilde.t_matmul(&self.btilde);
        let mut n = self.ctilde.matmul(&gram);
        n.add_diag(1.0);
        let (sign, logabs) = matcore::lu_logdet(&n)?;
        if sign <= 0 {
            return Err(NdppError::NumericalFailure(format!(
                "det(I + L) has sign {sign}; kernel is not a valid NDPP kernel"
            )));
        }
        Ok(logabs)
    }
}

impl From<&NdppParams> for InferenceKernel {
    fn from(p: &NdppParams) -> Self {
        p.to_inference_kernel()
    }
}

/// Whether every principal minor of `l` is at least `-1e-10`.
///
/// Enumerates all `2^M − 1` nonempty subsets, so `M` is capped at 25.
pub fn check_p0(l: &Mat) -> Result<bool> {
    if !l.is_square() {
        return Err(NdppError::Dimension("check_p0 needs a square matrix".into()));
    }
    let m = l.rows();
    if m > P0_MAX_ITEMS {
        return Err(NdppError::TooLarge(format!("check_p0 on {m} items (max {P0_MAX_ITEMS})")));
    }
    let mut idx = Vec::with_capacity(m);
    for mask in 1u32..(1u32 << m) {
        idx.clear();
        idx.extend((0..m).filter(|&i| mask & (1 << i) != 0));
        if matcore::det(&l.principal(&idx))? < -P0_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether `xᵀ L x ≥ 0` for every `x`, i.e. the symmetric part of `l` is PSD.
pub fn check_psd_quadratic(l: &Mat) -> Result<bool> {
    let sym = Mat::from_fn(l.rows(), l.cols(), |i, j| 0.5 * (l[(i, j)] + l[(j, i)]));
    let (vals, _) = matcore::symmetric_eigen(&sym)?;
    Ok(vals.last().is_none_or(|&lo| lo >= -P0_TOL))
}

pub fn quadratic_form(l: &Mat, x: &[f64]) -> f64 {
    matcore::dot(x, &l.mul_vec(x))
}
