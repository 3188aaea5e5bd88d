//! Regularized log-likelihood and its analytic gradient.
//!
//! For a batch `Y₁…Yₙ`:
//!
//! ```text
//! φ = (1/n) Σ log det(L_{Yᵢ} + εI) − log det(I + L) − R(V, B)
//! ```
//!
//! The normalizer never touches an `M × M` matrix. With `W = [V | B]` and
//! `C̃ = diag(I_K, C)`, `det(I + L) = det(I_{2K} + C̃ WᵀW)`, and its gradient
//! follows from the trace rule on that `2K × 2K` matrix. This stays valid when
//! `C` is singular (always the case for odd `K` with `C = D − Dᵀ`).
//! [`normalizer_grad_schur`] implements the block-Schur form of the same
//! gradient for cross-checking when `C` is invertible.

use rayon::prelude::*;

use crate::error::{NdppError, Result};
use crate::kernel::NdppParams;
use crate::matcore::{self, Lu, Mat};

/// Default `ε` added to every subset minor.
pub const DEFAULT_EPS: f64 = 1e-5;

/// `|det C|` below which the Schur cross-check refuses to run.
pub const SCHUR_MIN_DET: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodReport {
    pub mean_subset_logdet: f64,
    pub log_normalizer: f64,
    pub reg: f64,
    pub objective: f64,
    /// Some subset minor had a nonpositive determinant; `objective` is −∞.
    pub infeasible: bool,
}

impl LikelihoodReport {
    fn new(mean_subset_logdet: f64, log_normalizer: f64, reg: f64) -> Self {
        LikelihoodReport {
            mean_subset_logdet,
            log_normalizer,
            reg,
            objective: mean_subset_logdet - log_normalizer - reg,
            infeasible: false,
        }
    }

    fn infeasible(log_normalizer: f64, reg: f64) -> Self {
        LikelihoodReport {
            mean_subset_logdet: f64::NEG_INFINITY,
            log_normalizer,
            reg,
            objective: f64::NEG_INFINITY,
            infeasible: true,
        }
    }
}

/// Gradient of the objective (ascent direction) with respect to `V`, `B`, `D`.
/// When tied, `gv` carries both the `V` and `B` roles and `gb` is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub gv: Mat,
    pub gb: Mat,
    pub gd: Mat,
}

impl Gradients {
    pub fn zeros(p: &NdppParams) -> Self {
        Gradients {
            gv: Mat::zeros(p.m(), p.k()),
            gb: Mat::zeros(p.m(), p.k()),
            gd: Mat::zeros(p.k(), p.k()),
        }
    }

    /// Flattened in the same layout as [`NdppParams::to_flat`].
    pub fn to_flat(&self, tied: bool) -> Vec<f64> {
        let mut out = self.gv.as_slice().to_vec();
        if !tied {
            out.extend_from_slice(self.gb.as_slice());
        }
        out.extend_from_slice(self.gd.as_slice());
        out
    }
}

/// `log det(I + L)` in `O(MK² + K³)`.
pub fn log_normalizer(p: &NdppParams) -> Result<f64> {
    p.to_inference_kernel().log_normalizer()
}

/// Normalizer and its gradients with respect to the `V`-role factor, the
/// `B`-role factor, and `C`, via the inverse-free `2K × 2K` identity.
pub fn normalizer_grad(p: &NdppParams) -> Result<(f64, Mat, Mat, Mat)> {
    let k = p.k();
    let w = p.v().hcat(p.b());
    let ct = Mat::identity(k).block_diag(&p.c());
    let gram = w.t_matmul(&w);
    let mut n = ct.matmul(&gram);
    n.add_diag(1.0);
    let lu = Lu::factor(&n).map_err(|_| NdppError::NumericalFailure("I + C~ WᵀW is singular".into()))?;
    let (sign, z) = lu.logdet();
    if sign <= 0 {
        return Err(NdppError::NumericalFailure("det(I + L) is not positive".into()));
    }
    let n_inv = lu.inverse();
    // dZ/dG = C̃ᵀ N⁻ᵀ and dZ/dW = W (dZ/dG + (dZ/dG)ᵀ).
    let y = n_inv.matmul(&ct).transpose();
    let gw = w.matmul(&y.add(&y.transpose()));
    // dZ/dC̃ = N⁻ᵀ G.
    let gct = n_inv.transpose().matmul(&gram);
    Ok((z, gw.col_block(0, k), gw.col_block(k, 2 * k), gct.block(k, 2 * k, k, 2 * k)))
}

/// Block-Schur form of the normalizer and its gradients:
///
/// ```text
/// Z    = log det(I + VᵀV) + log det(C⁻¹ + BᵀXB) + log det C,   X = I − V(I + VᵀV)⁻¹Vᵀ
/// ∇_V Z = 2V(I + VᵀV)⁻¹ − XB(E⁻¹ + E⁻ᵀ)BᵀXV,                  E = C⁻¹ + BᵀXB
/// ∇_B Z = XB(E⁻¹ + E⁻ᵀ)
/// ∇_C Z = C⁻ᵀ − C⁻ᵀE⁻ᵀC⁻ᵀ
/// ```
///
/// Requires `|det C| > 1e-10`. `X` is applied implicitly and never formed.
pub fn normalizer_grad_schur(p: &NdppParams) -> Result<(f64, Mat, Mat, Mat)> {
    let k = p.k();
    let (v, b, c) = (p.v(), p.b(), p.c());
    let (c_sign, c_logdet) = matcore::lu_logdet(&c)?;
    if c_sign == 0 || c_logdet < SCHUR_MIN_DET.ln() {
        return Err(NdppError::NumericalFailure("C is singular; Schur form unavailable".into()));
    }
    let c_inv = Lu::factor(&c)?.inverse();
    let mut iv = v.t_matmul(v);
    iv.add_diag(1.0);
    let iv_lu = Lu::factor(&iv)?;
    let (_, logdet_iv) = iv_lu.logdet();
    let iv_inv = iv_lu.inverse();
    // X·A = A − V (I + VᵀV)⁻¹ (VᵀA)
    let apply_x = |a: &Mat| a.sub(&v.matmul(&iv_inv.matmul(&v.t_matmul(a))));
    let xb = apply_x(b);
    let e = c_inv.add(&b.t_matmul(&xb));
    let e_lu = Lu::factor(&e)?;
    let (e_sign, e_logdet) = e_lu.logdet();
    if e_sign * c_sign <= 0 {
        return Err(NdppError::NumericalFailure("det(I + L) is not positive".into()));
    }
    let z = logdet_iv + e_logdet + c_logdet;
    let e_inv = e_lu.inverse();
    let e_sum = e_inv.add(&e_inv.transpose());
    let gv = v
        .matmul(&iv_inv)
        .scale(2.0)
        .sub(&xb.matmul(&e_sum).matmul(&xb.t_matmul(v)));
    let gb = xb.matmul(&e_sum);
    let c_inv_t = c_inv.transpose();
    let gc = c_inv_t.sub(&c_inv_t.matmul(&e_inv.transpose()).matmul(&c_inv_t));
    debug_assert_eq!(gc.shape(), (k, k));
    Ok((z, gv, gb, gc))
}

fn check_subset(y: &[usize], m: usize) -> Result<()> {
    if y.is_empty() {
        return Err(NdppError::InvalidArgument("empty subset".into()));
    }
    if let Some(&bad) = y.iter().find(|&&i| i >= m) {
        return Err(NdppError::InvalidArgument(format!("item {bad} out of range for M={m}")));
    }
    Ok(())
}

fn stabilized_minor(p: &NdppParams, y: &[usize], eps: f64) -> (Mat, Mat, Mat) {
    let vy = p.v().select_rows(y);
    let by = p.b().select_rows(y);
    let mut ly = vy.matmul_t(&vy).add(&by.matmul(&p.c()).matmul_t(&by));
    ly.add_diag(eps);
    (ly, vy, by)
}

/// `log det(V_Y V_Yᵀ + B_Y C B_Yᵀ + εI)`.
pub fn subset_logdet(p: &NdppParams, y: &[usize], eps: f64) -> Result<f64> {
    check_subset(y, p.m())?;
    let (ly, _, _) = stabilized_minor(p, y, eps);
    match matcore::lu_logdet(&ly)? {
        (s, l) if s > 0 => Ok(l),
        _ => Err(NdppError::NonPositiveMinor),
    }
}

/// `α Σ ‖vᵢ‖²/μᵢ + β Σ ‖bᵢ‖²/μᵢ`; the `β` term is dropped when tied.
pub fn regularizer(p: &NdppParams, mu: &[usize]) -> Result<f64> {
    Ok(regularizer_impl(p, mu, false)?.0)
}

fn regularizer_impl(p: &NdppParams, mu: &[usize], want_grad: bool) -> Result<(f64, Option<(Mat, Mat)>)> {
    if mu.len() != p.m() {
        return Err(NdppError::Dimension(format!("{} counts for M={}", mu.len(), p.m())));
    }
    let beta = if p.is_tied() { 0.0 } else { p.beta() };
    let mut total = 0.0;
    let mut grads = want_grad.then(|| (Mat::zeros(p.m(), p.k()), Mat::zeros(p.m(), p.k())));
    for (factor, weight, which) in [(p.v(), p.alpha(), 0), (p.b(), beta, 1)] {
        if weight == 0.0 {
            continue;
        }
        for (i, &count) in mu.iter().enumerate() {
            if count == 0 {
                return Err(NdppError::ZeroCount(i));
            }
            let row = factor.row(i);
            let scale = weight / count as f64;
            total += scale * matcore::dot(row, row);
            if let Some((gv, gb)) = grads.as_mut() {
                let g = if which == 0 { gv.row_mut(i) } else { gb.row_mut(i) };
                for (gj, &x) in g.iter_mut().zip(row) {
                    *gj += 2.0 * scale * x;
                }
            }
        }
    }
    Ok((total, grads))
}

struct SubsetTerm {
    logdet: f64,
    gvy: Mat,
    gby: Mat,
    gc: Mat,
}

fn subset_term(p: &NdppParams, c: &Mat, y: &[usize], eps: f64) -> Result<SubsetTerm> {
    let (ly, vy, by) = stabilized_minor(p, y, eps);
    let logdet = match matcore::lu_logdet(&ly)? {
        (s, l) if s > 0 => l,
        _ => return Err(NdppError::NonPositiveMinor),
    };
    let j = Lu::factor(&ly).map_err(|_| NdppError::NonPositiveMinor)?.inverse();
    let jt = j.transpose();
    let gvy = j.add(&jt).matmul(&vy);
    let gby = jt.matmul(&by).matmul(&c.transpose()).add(&j.matmul(&by).matmul(c));
    let gc = by.t_matmul(&jt.matmul(&by));
    Ok(SubsetTerm { logdet, gvy, gby, gc })
}

fn check_batch<B: AsRef<[usize]>>(p: &NdppParams, batch: &[B]) -> Result<()> {
    batch.iter().try_for_each(|y| check_subset(y.as_ref(), p.m()))
}

/// Objective only (no gradient).
pub fn objective<B: AsRef<[usize]> + Sync>(
    p: &NdppParams,
    batch: &[B],
    mu: &[usize],
    eps: f64,
) -> Result<LikelihoodReport> {
    check_batch(p, batch)?;
    let z = log_normalizer(p)?;
    let reg = regularizer(p, mu)?;
    let logdets: Vec<Result<f64>> = batch.par_iter().map(|y| subset_logdet(p, y.as_ref(), eps)).collect();
    let mut sum = 0.0;
    for ld in logdets {
        match ld {
            Ok(l) => sum += l,
            Err(NdppError::NonPositiveMinor) => return Ok(LikelihoodReport::infeasible(z, reg)),
            Err(e) => return Err(e),
        }
    }
    let mean = if batch.is_empty() { 0.0 } else { sum / batch.len() as f64 };
    Ok(LikelihoodReport::new(mean, z, reg))
}

/// Whether every stabilized subset minor of the batch has positive determinant.
pub fn batch_feasible<B: AsRef<[usize]> + Sync>(p: &NdppParams, batch: &[B], eps: f64) -> Result<bool> {
    check_batch(p, batch)?;
    let results: Vec<Result<f64>> = batch.par_iter().map(|y| subset_logdet(p, y.as_ref(), eps)).collect();
    for r in results {
        match r {
            Ok(_) => {}
            Err(NdppError::NonPositiveMinor) => return Ok(false),
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// Objective and its gradient in `O(MK² + K³ + nK′³)`.
///
/// Per-subset terms are computed in parallel and reduced in batch order, so
/// results do not depend on the thread count. An infeasible batch yields a
/// flagged report with zero gradients rather than an error.
pub fn objective_and_grad<B: AsRef<[usize]> + Sync>(
    p: &NdppParams,
    batch: &[B],
    mu: &[usize],
    eps: f64,
) -> Result<(LikelihoodReport, Gradients)> {
    check_batch(p, batch)?;
    let (z, zv, zb, zc) = normalizer_grad(p)?;
    let (reg, reg_grads) = regularizer_impl(p, mu, true)?;
    let (rv, rb) = reg_grads.expect("requested");
    let c = p.c();
    let terms: Vec<Result<SubsetTerm>> = batch.par_iter().map(|y| subset_term(p, &c, y.as_ref(), eps)).collect();

    let (m, k) = (p.m(), p.k());
    let mut gv = Mat::zeros(m, k);
    let mut gb = Mat::zeros(m, k);
    let mut gc = Mat::zeros(k, k);
    let mut sum = 0.0;
    let n = batch.len().max(1) as f64;
    for (y, term) in batch.iter().zip(terms) {
        let t = match term {
            Ok(t) => t,
            Err(NdppError::NonPositiveMinor) => {
                return Ok((LikelihoodReport::infeasible(z, reg), Gradients::zeros(p)));
            }
            Err(e) => return Err(e),
        };
        sum += t.logdet;
        for (a, &item) in y.as_ref().iter().enumerate() {
            for (g, &x) in gv.row_mut(item).iter_mut().zip(t.gvy.row(a)) {
                *g += x / n;
            }
            for (g, &x) in gb.row_mut(item).iter_mut().zip(t.gby.row(a)) {
                *g += x / n;
            }
        }
        for (g, &x) in gc.as_mut_slice().iter_mut().zip(t.gc.as_slice()) {
            *g += x / n;
        }
    }
    let mean = if batch.is_empty() { 0.0 } else { sum / n };

    let gv = gv.sub(&zv).sub(&rv);
    let gb = gb.sub(&zb).sub(&rb);
    let gc = gc.sub(&zc);
    // C = D − Dᵀ
    let gd = gc.sub(&gc.transpose());
    let grads = if p.is_tied() {
        Gradients { gv: gv.add(&gb), gb: Mat::zeros(m, k), gd }
    } else {
        Gradients { gv, gb, gd }
    };
    Ok((LikelihoodReport::new(mean, z, reg), grads))
}
