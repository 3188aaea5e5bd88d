//! MAP inference and conditioning on low-rank kernels.

mod baselines;
mod greedy;

pub use baselines::{
    exact_map, local_search, local_search_budget, mcmc_map, mcmc_map_with_swaps, mcmc_swaps, run_map, stochastic_greedy,
    stochastic_sample_size, subset_log_det, swap_probability, EXACT_MAX_SUBSETS, LOCAL_SEARCH_TOL,
};
pub use greedy::{condition_singletons, greedy_map, Algorithm, GreedyState, MapResult, DEGENERATE_GAIN};
