use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{NdppError, Result};
use crate::inference::{condition_singletons, MapResult};
use crate::kernel::{InferenceKernel, NdppParams};
use crate::likelihood;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Stream reserved for bootstrap resampling; per-basket streams use the
/// basket index.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// Anything that can score baskets for evaluation.
pub trait BasketModel: Sync {
    fn m(&self) -> usize;

    /// Score of each item as the next addition to `context`. Entries for
    /// items in `context` are ignored.
    fn next_item_scores(&self, context: &[usize]) -> Result<Vec<f64>>;

    /// Unregularized log-likelihood of `y`; −∞ if the model gives it no mass.
    fn subset_score(&self, y: &[usize]) -> Result<f64>;
}

/// A trained kernel scored with the same ε-stabilized minors as training.
#[derive(Clone, Debug)]
pub struct KernelModel {
    params: NdppParams,
    kernel: InferenceKernel,
    log_z: f64,
    eps: f64,
}

impl KernelModel {
    pub fn new(params: NdppParams, eps: f64) -> Result<Self> {
        let kernel = params.to_inference_kernel();
        let log_z = kernel.log_normalizer()?;
        Ok(KernelModel { params, kernel, log_z, eps })
    }

    pub fn params(&self) -> &NdppParams {
        &self.params
    }

    pub fn kernel(&self) -> &InferenceKernel {
        &self.kernel
    }
}

impl BasketModel for KernelModel {
    fn m(&self) -> usize {
        self.params.m()
    }

    fn next_item_scores(&self, context: &[usize]) -> Result<Vec<f64>> {
        condition_singletons(&self.kernel, context)
    }

    fn subset_score(&self, y: &[usize]) -> Result<f64> {
        match likelihood::subset_logdet(&self.params, y, self.eps) {
            Ok(l) => Ok(l - self.log_z),
            Err(NdppError::NonPositiveMinor) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }
}

/// Point estimate with a percentile bootstrap 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Baskets that contributed.
    pub n: usize,
    /// Baskets dropped because conditioning on them was degenerate.
    pub skipped: usize,
}

impl MetricReport {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

fn basket_rng(seed: u64, idx: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx as u64);
    rng
}

/// Percentile interval of `stat` over `BOOTSTRAP_RESAMPLES` resamples of
/// `0..n` drawn with replacement.
pub fn bootstrap_ci(n: usize, seed: u64, stat: impl Fn(&[usize]) -> f64 + Sync) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|b| {
            let mut rng = basket_rng(seed ^ BOOTSTRAP_STREAM, b);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            stat(&idx)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    (percentile(&stats, 2.5), percentile(&stats, 97.5))
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let w = pos - lo as f64;
    if w == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

fn mean_of(values: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
}

/// Mean of `values` with a bootstrap interval.
pub fn mean_report(values: &[f64], skipped: usize, seed: u64) -> MetricReport {
    let all: Vec<usize> = (0..values.len()).collect();
    let value = if values.is_empty() { f64::NAN } else { mean_of(values, &all) };
    let (ci_low, ci_high) = bootstrap_ci(values.len(), seed, |idx| mean_of(values, idx));
    MetricReport { value, ci_low, ci_high, n: values.len(), skipped }
}

/// `100 · |{i′ ∉ J : s_i ≥ s_i′}| / |𝒴 ∖ J|`.
pub fn percentile_rank(scores: &[f64], held_out: usize, context: &[usize]) -> f64 {
    let mut in_j = vec![false; scores.len()];
    context.iter().for_each(|&j| in_j[j] = true);
    let target = scores[held_out];
    let pool = scores.len() - context.len();
    let beaten = (0..scores.len()).filter(|&i| !in_j[i] && target >= scores[i]).count();
    100.0 * beaten as f64 / pool as f64
}

/// Mean percentile rank of one randomly held-out item per basket, given the
/// rest. Baskets whose context cannot be conditioned on are skipped.
pub fn mpr<B: AsRef<[usize]> + Sync>(model: &dyn BasketModel, test: &[B], seed: u64) -> Result<MetricReport> {
    if let Some(n) = test.iter().position(|b| b.as_ref().len() < 2) {
        return Err(NdppError::BasketTooSmall(n));
    }
    let ranks: Vec<Result<Option<f64>>> = test
        .par_iter()
        .enumerate()
        .map(|(idx, basket)| {
            let basket = basket.as_ref();
            let mut rng = basket_rng(seed, idx);
            let pos = rng.random_range(0..basket.len());
            let held_out = basket[pos];
            let context: Vec<usize> = basket.iter().enumerate().filter(|&(p, _)| p != pos).map(|(_, &i)| i).collect();
            match model.next_item_scores(&context) {
                Ok(scores) => Ok(Some(percentile_rank(&scores, held_out, &context))),
                Err(NdppError::DegenerateConditioning(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut values = Vec::with_capacity(test.len());
    let mut skipped = 0;
    for r in ranks {
        match r? {
            Some(v) => values.push(v),
            None => skipped += 1,
        }
    }
    Ok(mean_report(&values, skipped, seed))
}

/// Mann–Whitney AUC of `pos` over `neg`, ties counted as half.
pub fn mann_whitney_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // Average of 1-based ranks i+1 ..= j+1.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * all[i..=j].iter().filter(|x| x.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    (rank_sum - np * (np + 1.0) / 2.0) / (np * nn)
}

/// Uniform random basket of `size` distinct items.
pub fn random_basket(m: usize, size: usize, rng: &mut impl Rng) -> Vec<usize> {
    index::sample(rng, m, size).into_vec()
}

/// AUC for telling each observed basket apart from a uniform random basket
/// of the same size, by model log-likelihood.
pub fn auc_discrimination<B: AsRef<[usize]> + Sync>(
    model: &dyn BasketModel,
    test: &[B],
    seed: u64,
) -> Result<MetricReport> {
    if test.is_empty() {
        return Err(NdppError::EmptyDataset);
    }
    let pairs: Vec<Result<(f64, f64)>> = test
        .par_iter()
        .enumerate()
        .map(|(idx, basket)| {
            let basket = basket.as_ref();
            let mut rng = basket_rng(seed, idx);
            let fake = random_basket(model.m(), basket.len(), &mut rng);
            Ok((model.subset_score(basket)?, model.subset_score(&fake)?))
        })
        .collect();
    let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    let (pos, neg): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let value = mann_whitney_auc(&pos, &neg);
    let (ci_low, ci_high) = bootstrap_ci(pairs.len(), seed, |idx| {
        let p: Vec<f64> = idx.iter().map(|&i| pos[i]).collect();
        let n: Vec<f64> = idx.iter().map(|&i| neg[i]).collect();
        mann_whitney_auc(&p, &n)
    });
    Ok(MetricReport { value, ci_low, ci_high, n: pairs.len(), skipped: 0 })
}

/// Mean unregularized log-likelihood of the test baskets.
pub fn test_loglik<B: AsRef<[usize]> + Sync>(model: &dyn BasketModel, test: &[B], seed: u64) -> Result<MetricReport> {
    if test.is_empty() {
        return Err(NdppError::EmptyDataset);
    }
    let scores: Vec<Result<f64>> = test.par_iter().map(|y| model.subset_score(y.as_ref())).collect();
    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(mean_report(&scores, 0, seed))
}

/// `|(log det L_{Y*} − log det L_Y) / log det L_{Y*}|`.
pub fn relative_logdet_error(candidate: &MapResult, reference: &MapResult) -> Result<f64> {
    if reference.log_det == 0.0 {
        return Err(NdppError::ZeroReference);
    }
    Ok(((reference.log_det - candidate.log_det) / reference.log_det).abs())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub mpr: Option<MetricReport>,
    pub auc: Option<MetricReport>,
    pub test_loglik: Option<MetricReport>,
}
