//! Evaluation metrics, synthetic kernels, and the greedy bound study.

mod bench;
mod metrics;
mod synthetic;

pub use bench::{map_benchmark, BenchRow};
pub use metrics::{
    auc_discrimination, bootstrap_ci, mann_whitney_auc, mean_report, mpr, percentile_rank, random_basket,
    relative_logdet_error, test_loglik, BasketModel, EvalReport, KernelModel, MetricReport, BOOTSTRAP_RESAMPLES,
};
pub use synthetic::{
    approx_bound_study, bound_constant, minor_singular_range, sample_dpp_dense, sample_shifted_psd,
    sample_synthetic_p0, ApproxBoundReport, BOUND_STUDY_MAX_M,
};
