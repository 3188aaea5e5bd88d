use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::greedy::{check_k, condition_singletons, greedy_map, run_greedy, Algorithm, MapResult};
use crate::error::{NdppError, Result};
use crate::kernel::InferenceKernel;

/// Largest number of subsets [`exact_map`] will enumerate.
pub const EXACT_MAX_SUBSETS: f64 = 2e6;

/// Minimum log-determinant gain for a local-search swap to count.
pub const LOCAL_SEARCH_TOL: f64 = 1e-10;

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// `log det(L_Y)`, or −∞ when the determinant is not positive.
pub fn subset_log_det(kernel: &InferenceKernel, y: &[usize]) -> f64 {
    match kernel.subset_logdet(y) {
        (s, l) if s > 0 => l,
        _ => f64::NEG_INFINITY,
    }
}

/// Candidates drawn per step: `⌊(M/k) ln 10⌋`, at least one.
pub fn stochastic_sample_size(m: usize, k: usize) -> usize {
    ((m as f64 / k as f64) * 10f64.ln()).floor().max(1.0) as usize
}

/// Greedy over a fresh uniform sample (without replacement) of unchosen
/// items at each step.
pub fn stochastic_greedy(kernel: &InferenceKernel, k: usize, seed: u64) -> Result<MapResult> {
    let start = Instant::now();
    check_k(kernel, k)?;
    let m = kernel.m();
    let s = stochastic_sample_size(m, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = run_greedy(kernel, k, |st| {
        let unchosen: Vec<usize> = (0..m).filter(|&i| !st.contains(i)).collect();
        if s >= unchosen.len() {
            return unchosen;
        }
        let mut picked: Vec<usize> = index::sample(&mut rng, unchosen.len(), s).into_iter().map(|j| unchosen[j]).collect();
        picked.sort_unstable();
        picked
    })?;
    Ok(MapResult {
        items: state.chosen().to_vec(),
        log_det: state.log_det(),
        wall_ms: elapsed_ms(start),
        algorithm: Algorithm::StochasticGreedy,
    })
}

/// Probability of moving from a state with log-determinant `current` to one
/// with `proposed`: `det' / (det' + det)`.
pub fn swap_probability(proposed: f64, current: f64) -> f64 {
    if proposed == f64::NEG_INFINITY {
        return 0.0;
    }
    if current == f64::NEG_INFINITY {
        return 1.0;
    }
    1.0 / (1.0 + (current - proposed).exp())
}

/// Number of swap proposals: `⌊3M / K⌋` for latent rank `K`.
pub fn mcmc_swaps(m: usize, latent_rank: usize) -> usize {
    3 * m / latent_rank.max(1)
}

/// Swap chain from a uniform random size-`k` start with `⌊3M/K⌋`
/// proposals, returning the best state visited.
pub fn mcmc_map(kernel: &InferenceKernel, k: usize, seed: u64) -> Result<MapResult> {
    mcmc_map_with_swaps(kernel, k, seed, mcmc_swaps(kernel.m(), kernel.latent_rank()))
}

pub fn mcmc_map_with_swaps(kernel: &InferenceKernel, k: usize, seed: u64, swaps: usize) -> Result<MapResult> {
    let start = Instant::now();
    check_k(kernel, k)?;
    let m = kernel.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y: Vec<usize> = index::sample(&mut rng, m, k).into_vec();
    let mut in_y = vec![false; m];
    y.iter().for_each(|&i| in_y[i] = true);
    let mut cur = subset_log_det(kernel, &y);
    let (mut best, mut best_ld) = (y.clone(), cur);

    if k < m {
        for _ in 0..swaps {
            let pos = rng.random_range(0..k);
            // Uniform over the m − k unchosen items.
            let nth = rng.random_range(0..m - k);
            let j = (0..m).filter(|&j| !in_y[j]).nth(nth).expect("m > k");
            let i = y[pos];
            y[pos] = j;
            let proposed = subset_log_det(kernel, &y);
            if rng.random::<f64>() < swap_probability(proposed, cur) {
                in_y[i] = false;
                in_y[j] = true;
                cur = proposed;
                if cur > best_ld {
                    best_ld = cur;
                    best = y.clone();
                }
            } else {
                y[pos] = i;
            }
        }
    }
    Ok(MapResult { items: best, log_det: best_ld, wall_ms: elapsed_ms(start), algorithm: Algorithm::Mcmc })
}

/// Swap budget `⌊k² ln(10k)⌋`.
pub fn local_search_budget(k: usize) -> usize {
    let k = k as f64;
    (k * k * (10.0 * k).ln()).floor() as usize
}

/// Starts from greedy and repeatedly applies the best improving single swap,
/// scoring every `j ∉ Y` against `Y ∖ {i}` by conditioning.
pub fn local_search(kernel: &InferenceKernel, k: usize) -> Result<MapResult> {
    let start = Instant::now();
    let mut y = greedy_map(kernel, k)?.items;
    let m = kernel.m();
    let mut swaps = 0;
    while swaps < local_search_budget(k) {
        let mut best: Option<(f64, usize, usize)> = None;
        for pos in 0..k {
            let rest: Vec<usize> = y.iter().enumerate().filter(|&(p, _)| p != pos).map(|(_, &i)| i).collect();
            let gains = match condition_singletons(kernel, &rest) {
                Ok(g) => g,
                Err(NdppError::DegenerateConditioning(_)) => continue,
                Err(e) => return Err(e),
            };
            let out = gains[y[pos]];
            if out <= 0.0 {
                continue;
            }
            for j in (0..m).filter(|j| !y.contains(j)) {
                if gains[j] <= 0.0 {
                    continue;
                }
                let gain = (gains[j] / out).ln();
                if gain > LOCAL_SEARCH_TOL && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, pos, j));
                }
            }
        }
        match best {
            Some((_, pos, j)) => {
                y[pos] = j;
                swaps += 1;
            }
            None => break,
        }
    }
    Ok(MapResult {
        log_det: subset_log_det(kernel, &y),
        items: y,
        wall_ms: elapsed_ms(start),
        algorithm: Algorithm::LocalSearch,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exhaustive MAP over all `C(M, k)` subsets, first in lexicographic order
/// on ties.
pub fn exact_map(kernel: &InferenceKernel, k: usize) -> Result<MapResult> {
    let start = Instant::now();
    check_k(kernel, k)?;
    let m = kernel.m();
    let count = binomial(m, k);
    if count > EXACT_MAX_SUBSETS {
        return Err(NdppError::TooLarge(format!("C({m},{k}) = {count:.0} subsets")));
    }
    let mut comb: Vec<usize> = (0..k).collect();
    let mut best = comb.clone();
    let mut best_ld = subset_log_det(kernel, &comb);
    // Advance to the next combination in lexicographic order.
    while let Some(t) = (0..k).rev().find(|&t| comb[t] < m - k + t) {
        comb[t] += 1;
        for u in t + 1..k {
            comb[u] = comb[u - 1] + 1;
        }
        let ld = subset_log_det(kernel, &comb);
        if ld > best_ld {
            best_ld = ld;
            best.clone_from(&comb);
        }
    }
    Ok(MapResult { items: best, log_det: best_ld, wall_ms: elapsed_ms(start), algorithm: Algorithm::Exact })
}

/// Dispatches on `algo`. `seed` is used by the randomized algorithms only.
pub fn run_map(kernel: &InferenceKernel, k: usize, algo: Algorithm, seed: u64) -> Result<MapResult> {
    match algo {
        Algorithm::Greedy => greedy_map(kernel, k),
        Algorithm::StochasticGreedy => stochastic_greedy(kernel, k, seed),
        Algorithm::Mcmc => mcmc_map(kernel, k, seed),
        Algorithm::LocalSearch => local_search(kernel, k),
        Algorithm::Exact => exact_map(kernel, k),
    }
}
