use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{NdppError, Result};
use crate::inference::{exact_map, greedy_map};
use crate::kernel::{check_p0, InferenceKernel};
use crate::matcore::{self, Mat};

/// Largest catalog [`approx_bound_study`] will enumerate.
pub const BOUND_STUDY_MAX_M: usize = 12;

/// `4(1 − e^{−1/4})`.
pub fn bound_constant() -> f64 {
    4.0 * (1.0 - (-0.25f64).exp())
}

fn random_orthonormal(m: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Mat> {
    matcore::orthonormalize_columns(&Mat::gaussian(m, k, rng))
}

/// `L = V₁ diag(s) V₂ᵀ` with random orthonormal `V₁, V₂` (`m × s.len()`),
/// resampled until every principal minor is nonnegative. The symmetric
/// variant uses `V₁ = V₂`.
///
/// Returned as `B̃ = [V₁ | V₂]`, `C̃ = [[0, S], [0, 0]]` (or `B̃ = V₁`,
/// `C̃ = S` when symmetric).
pub fn sample_synthetic_p0(
    m: usize,
    singular_values: &[f64],
    symmetric: bool,
    seed: u64,
    max_tries: usize,
) -> Result<InferenceKernel> {
    let k = singular_values.len();
    if k == 0 || k > m || m > crate::kernel::P0_MAX_ITEMS {
        return Err(NdppError::InvalidArgument(format!("need 1 <= k <= m <= 25 (m={m}, k={k})")));
    }
    let s = Mat::from_diag(singular_values);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_tries {
        let v1 = random_orthonormal(m, k, &mut rng)?;
        let kernel = if symmetric {
            InferenceKernel::new(v1, s.clone())?
        } else {
            let v2 = random_orthonormal(m, k, &mut rng)?;
            let ct = Mat::zeros(k, k).hcat(&s);
            let ct = Mat::from_fn(2 * k, 2 * k, |i, j| if i < k { ct[(i, j)] } else { 0.0 });
            InferenceKernel::new(v1.hcat(&v2), ct)?
        };
        if check_p0(&kernel.materialize())? {
            return Ok(kernel);
        }
    }
    Err(NdppError::RejectionExhausted(max_tries))
}

/// Full-rank kernel `shift·I + G Gᵀ + (H − Hᵀ)` on `m` items.
///
/// Its symmetric part has every eigenvalue above `shift`, so each principal
/// minor has all singular values above `shift` as well.
pub fn sample_shifted_psd(m: usize, shift: f64, skew_scale: f64, seed: u64) -> Result<InferenceKernel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Mat::gaussian(m, m, &mut rng).scale(1.0 / (m as f64).sqrt());
    let h = Mat::gaussian(m, m, &mut rng).scale(skew_scale);
    let mut l = g.matmul_t(&g).add(&h.sub(&h.transpose()));
    l.add_diag(shift);
    InferenceKernel::new(Mat::identity(m), l)
}

/// Extreme singular values over all principal minors of size `1..=max_size`.
pub fn minor_singular_range(l: &Mat, max_size: usize) -> (f64, f64) {
    let m = l.rows();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for mask in 1u32..(1u32 << m) {
        if mask.count_ones() as usize > max_size {
            continue;
        }
        let y: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
        let sv = matcore::singular_values(&l.principal(&y));
        hi = hi.max(sv[0]);
        lo = lo.min(*sv.last().expect("nonempty minor"));
    }
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxBoundReport {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub kappa: f64,
    /// `log σ_max / log σ_min`, present when `σ_min > 1`.
    pub log_kappa_ratio: Option<f64>,
    /// Multiplicative bound on `log det(L_{Y^G}) / log det(L_{Y*})`,
    /// present when `σ_min > 1`.
    pub ratio_bound: Option<f64>,
    /// Weaker bound for any `σ_min > 0`: `log det(L_{Y^G}) ≥ mult · log det(L_{Y*}) − add`.
    /// Present when `σ_min > 0`.
    pub shifted_multiplier: Option<f64>,
    pub shifted_additive: Option<f64>,
    pub greedy_log_det: Option<f64>,
    pub exact_log_det: f64,
    pub greedy_ratio: Option<f64>,
}

impl ApproxBoundReport {
    /// Whether greedy satisfies every populated bound, with slack `tol`.
    pub fn bounds_hold(&self, tol: f64) -> bool {
        let Some(g) = self.greedy_log_det else { return self.ratio_bound.is_none() && self.shifted_multiplier.is_none() };
        let ratio_ok = self.ratio_bound.is_none_or(|b| g >= b * self.exact_log_det - tol);
        let shifted_ok = match (self.shifted_multiplier, self.shifted_additive) {
            (Some(mul), Some(add)) => g >= mul * self.exact_log_det - add - tol,
            _ => true,
        };
        ratio_ok && shifted_ok
    }
}

/// Evaluates both greedy approximation bounds for budget `k` against the
/// realized greedy and exact solutions.
pub fn approx_bound_study(kernel: &InferenceKernel, k: usize) -> Result<ApproxBoundReport> {
    let m = kernel.m();
    if m > BOUND_STUDY_MAX_M {
        return Err(NdppError::TooLarge(format!("bound study on {m} items (max {BOUND_STUDY_MAX_M})")));
    }
    let l = kernel.materialize();
    let (sigma_min, sigma_max) = minor_singular_range(&l, (2 * k).min(m));
    let c = bound_constant();
    let kappa = sigma_max / sigma_min;
    let log_kappa_ratio = (sigma_min > 1.0).then(|| sigma_max.ln() / sigma_min.ln());
    let ratio_bound = log_kappa_ratio.map(|r| c / (2.0 * r - 1.0));
    let (shifted_multiplier, shifted_additive) = if sigma_min > 0.0 {
        let mul = c / (2.0 * kappa.ln() + 1.0);
        (Some(mul), Some((1.0 - mul) * k as f64 * (1.0 - sigma_min.ln())))
    } else {
        (None, None)
    };
    let exact = exact_map(kernel, k)?;
    let greedy_log_det = greedy_map(kernel, k).ok().map(|r| r.log_det);
    Ok(ApproxBoundReport {
        sigma_min,
        sigma_max,
        kappa,
        log_kappa_ratio,
        ratio_bound,
        shifted_multiplier,
        shifted_additive,
        greedy_log_det,
        exact_log_det: exact.log_det,
        greedy_ratio: greedy_log_det.map(|g| g / exact.log_det),
    })
}

/// Exact draw from the L-ensemble with dense kernel `l`, by sequential
/// conditioning of the marginal kernel `K = I − (I + L)⁻¹`. `O(M³)` per draw,
/// so only suitable for small catalogs.
pub fn sample_dpp_dense(l: &Mat, rng: &mut impl Rng) -> Result<Vec<usize>> {
    let m = l.rows();
    let mut ipl = l.clone();
    ipl.add_diag(1.0);
    let inv = matcore::Lu::factor(&ipl)?.inverse();
    let mut kmat = Mat::identity(m).sub(&inv);
    let mut out = Vec::new();
    for i in 0..m {
        let pii = kmat[(i, i)];
        if rng.random::<f64>() < pii {
            out.push(i);
        } else {
            kmat.as_mut_slice()[i * m + i] -= 1.0;
        }
        let piv = kmat[(i, i)];
        if piv.abs() < 1e-300 {
            continue;
        }
        for a in i + 1..m {
            let f = kmat[(a, i)] / piv;
            if f == 0.0 {
                continue;
            }
            for b in i + 1..m {
                let v = kmat[(i, b)];
                kmat.as_mut_slice()[a * m + b] -= f * v;
            }
        }
    }
    Ok(out)
}
