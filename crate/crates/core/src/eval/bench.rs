use serde::Serialize;

use super::metrics::{mean_report, relative_logdet_error};
use crate::error::Result;
use crate::inference::{local_search, run_map, Algorithm};
use crate::kernel::InferenceKernel;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub algorithm: String,
    pub trials: usize,
    pub mean_rel_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_log_det: f64,
    pub mean_wall_ms: f64,
}

/// Relative log-determinant error of each algorithm against local search,
/// over `trials` seeds. Deterministic algorithms repeat the same answer.
pub fn map_benchmark(
    kernel: &InferenceKernel,
    k: usize,
    algorithms: &[Algorithm],
    trials: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let reference = local_search(kernel, k)?;
    let mut rows = Vec::with_capacity(algorithms.len());
    for &algo in algorithms {
        let mut errs = Vec::with_capacity(trials);
        let (mut ld_sum, mut ms_sum) = (0.0, 0.0);
        for t in 0..trials {
            let res = run_map(kernel, k, algo, seed.wrapping_add(t as u64))?;
            errs.push(relative_logdet_error(&res, &reference)?);
            ld_sum += res.log_det;
            ms_sum += res.wall_ms;
        }
        let rep = mean_report(&errs, 0, seed);
        let n = trials.max(1) as f64;
        rows.push(BenchRow {
            algorithm: algo.as_str().to_string(),
            trials,
            mean_rel_error: rep.value,
            ci_low: rep.ci_low,
            ci_high: rep.ci_high,
            mean_log_det: ld_sum / n,
            mean_wall_ms: ms_sum / n,
        });
    }
    Ok(rows)
}
