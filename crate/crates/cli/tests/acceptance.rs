//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits nonzero if any fails.
//!
//! Built with `harness = false` so the lines show up in `cargo test` output.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use ndpp::eval::{
    approx_bound_study, auc_discrimination, map_benchmark, mean_report, mpr, random_basket, sample_dpp_dense,
    sample_shifted_psd, sample_synthetic_p0, BasketModel, KernelModel,
};
use ndpp::inference::{condition_singletons, exact_map, greedy_map, local_search, Algorithm, GreedyState};
use ndpp::kernel::skew_factorize;
use ndpp::likelihood::{self, log_normalizer, objective, objective_and_grad};
use ndpp::matcore::{self, lu_logdet, Mat};
use ndpp::training::{fit, split, BasketDataset, TrainConfig};
use ndpp::{InferenceKernel, NdppParams, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_params(m: usize, k: usize, tied: bool, scale: f64, seed: u64) -> NdppParams {
    let mut r = rng(seed);
    let v = Mat::gaussian(m, k, &mut r).scale(scale);
    let b = (!tied).then(|| Mat::gaussian(m, k, &mut r).scale(scale));
    let d = Mat::gaussian(k, k, &mut r).scale(0.5);
    NdppParams::new(v, b, d, 0.1, 0.05).unwrap()
}

fn random_kernel(m: usize, k: usize, tied: bool, seed: u64) -> InferenceKernel {
    random_params(m, k, tied, 1.0, seed).to_inference_kernel()
}

fn random_subset(m: usize, size: usize, r: &mut ChaCha8Rng) -> Vec<usize> {
    let mut y = random_basket(m, size, r);
    y.sort_unstable();
    y
}

fn close(a: f64, b: f64, rtol: f64, atol: f64) -> bool {
    (a - b).abs() <= atol + rtol * b.abs()
}

// ---- 1 -------------------------------------------------------------------

fn c1_normalizer() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let m = r.random_range(2..=60);
        let k = r.random_range(1..=6usize.min(m));
        let p = random_params(m, k, i % 2 == 0, 0.8, 100 + i);
        let mut ipl = p.materialize();
        ipl.add_diag(1.0);
        let want = lu_logdet(&ipl).unwrap().1;
        let got = log_normalizer(&p).unwrap();
        worst = worst.max((got - want).abs() / want.abs().max(f64::MIN_POSITIVE));
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(worst <= 1e-8 && secs < 5.0, format!("max rel err {worst:.2e} (tol 1e-8), {secs:.2}s (limit 5s)"))
}

// ---- 2 -------------------------------------------------------------------

fn c2_gradient() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng(2);
    let (mut bad, mut checked) = (0usize, 0usize);
    let mut worst = String::new();
    for i in 0..20u64 {
        let m = r.random_range(4..=14);
        let k = r.random_range(1..=4usize);
        let tied = i % 2 == 0;
        let p = random_params(m, k, tied, 0.7, 200 + i);
        let n = r.random_range(1..=6);
        let batch: Vec<Vec<usize>> = (0..n).map(|_| random_subset(m, r.random_range(1..=k.min(m)), &mut r)).collect();
        let mut mu = vec![1usize; m];
        batch.iter().flatten().for_each(|&j| mu[j] += 1);
        let eps = 1e-3;
        let (_, g) = objective_and_grad(&p, &batch, &mu, eps).unwrap();
        let analytic = g.to_flat(tied);
        let flat = p.to_flat();
        let mut q = p.clone();
        for (idx, &a) in analytic.iter().enumerate() {
            let h = 1e-5 * (1.0 + flat[idx].abs());
            let mut f = flat.clone();
            f[idx] += h;
            q.set_flat(&f);
            let up = objective(&q, &batch, &mu, eps).unwrap().objective;
            f[idx] = flat[idx] - h;
            q.set_flat(&f);
            let down = objective(&q, &batch, &mu, eps).unwrap().objective;
            let fd = (up - down) / (2.0 * h);
            checked += 1;
            if !close(a, fd, 1e-5, 1e-8) {
                bad += 1;
                worst = format!("; e.g. config {i} coord {idx}: {a:e} vs {fd:e}");
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        bad == 0 && secs < 60.0,
        format!("{bad}/{checked} coordinates outside rtol 1e-5/atol 1e-8, {secs:.2}s (limit 60s){worst}"),
    )
}

// ---- 3 -------------------------------------------------------------------

fn time_grad(m: usize, seed: u64) -> f64 {
    let k = 25;
    let p = random_params(m, k, true, 0.1, seed);
    let mut r = rng(seed);
    let mut batch: Vec<Vec<usize>> = (0..32).map(|_| random_subset(m, r.random_range(1..=k), &mut r)).collect();
    batch[0] = random_subset(m, k, &mut r);
    let mu = vec![1usize; m];
    let mut times: Vec<f64> = (0..6)
        .map(|_| {
            let t0 = Instant::now();
            let out = objective_and_grad(&p, &batch, &mu, 1e-5).unwrap();
            std::hint::black_box(out);
            t0.elapsed().as_secs_f64()
        })
        .collect();
    // First run warms caches and the thread pool.
    times.remove(0);
    times.sort_by(f64::total_cmp);
    times[2]
}

fn c3_scaling() -> Outcome {
    let small = time_grad(20_000, 3);
    let large = time_grad(40_000, 3);
    let ratio = large / small;
    outcome(
        ratio <= 2.6,
        format!("median {:.1} ms at M=2e4, {:.1} ms at M=4e4, ratio {ratio:.2} (limit 2.6)", small * 1e3, large * 1e3),
    )
}

// ---- 4 -------------------------------------------------------------------

fn c4_bilinear() -> Outcome {
    let mut r = rng(4);
    let mut worst_pq: f64 = 0.0;
    let mut pairs = 0;
    while pairs < 100 {
        let m = r.random_range(6..=30);
        let k = r.random_range(2..=4usize);
        let kern = random_kernel(m, k, pairs % 2 == 0, 400 + pairs as u64);
        let size = r.random_range(1..=k.min(kern.r()));
        let y = random_subset(m, size, &mut r);
        // Skip nearly singular minors, where the inverse itself is unstable.
        let (sign, ld) = kern.subset_logdet(&y);
        if sign <= 0 || ld < -8.0 {
            continue;
        }
        let mut st = GreedyState::new(&kern);
        y.iter().for_each(|&a| st.push(a));
        let by = kern.btilde().select_rows(&y);
        let inner = by.matmul(kern.ctilde()).matmul_t(&by);
        let want = by.t_matmul(&matcore::solve(&inner, &by).unwrap());
        worst_pq = worst_pq.max(st.pq_sum().sub(&want).max_abs());
        pairs += 1;
    }

    let mut worst_delta: f64 = 0.0;
    for s in 0..40u64 {
        let m = 4 + (s as usize % 7);
        let k = 2 + (s as usize % 3);
        let kern = random_kernel(m, k, s % 2 == 1, 450 + s);
        let l = kern.materialize();
        let det = |y: &[usize]| if y.is_empty() { 1.0 } else { matcore::det(&l.principal(y)).unwrap() };
        let mut st = GreedyState::new(&kern);
        for _ in 0..k.min(m) {
            let base = det(st.chosen());
            for i in (0..m).filter(|&i| !st.contains(i)) {
                let mut yi = st.chosen().to_vec();
                yi.push(i);
                let want = det(&yi) / base;
                let got = st.delta()[i];
                worst_delta = worst_delta.max((got - want).abs() / want.abs().max(1e-12));
            }
            let Some(a) = st.argmax_all() else { break };
            if st.delta()[a] <= 1e-6 {
                break;
            }
            st.push(a);
        }
    }
    outcome(
        worst_pq <= 1e-8 && worst_delta <= 1e-6,
        format!("pq sum max err {worst_pq:.2e} (tol 1e-8) over 100 pairs; delta trace max rel err {worst_delta:.2e} (tol 1e-6)"),
    )
}

// ---- 5 -------------------------------------------------------------------

fn c5_conditioning() -> Outcome {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    while pairs < 50 {
        let m = r.random_range(5..=40);
        let k = r.random_range(2..=5usize);
        let kern = random_kernel(m, k, pairs % 2 == 0, 500 + pairs as u64);
        let y = random_subset(m, r.random_range(1..=k), &mut r);
        let (sign, ld) = kern.subset_logdet(&y);
        if sign <= 0 || ld < -8.0 {
            continue;
        }
        let got = condition_singletons(&kern, &y).unwrap();
        let l = kern.materialize();
        let lu = matcore::Lu::factor(&l.principal(&y)).unwrap();
        for i in (0..m).filter(|i| !y.contains(i)) {
            let col: Vec<f64> = y.iter().map(|&j| l[(j, i)]).collect();
            let row: Vec<f64> = y.iter().map(|&j| l[(i, j)]).collect();
            let want = l[(i, i)] - matcore::dot(&row, &lu.solve_vec(&col));
            let scale = l[(i, i)].abs().max(want.abs());
            worst = worst.max((got[i] - want).abs() / scale.max(1e-300));
        }
        pairs += 1;
    }
    outcome(worst <= 1e-6, format!("max rel err {worst:.2e} over 50 pairs (tol 1e-6)"))
}

// ---- 6 -------------------------------------------------------------------

fn c6_skew() -> Outcome {
    let mut r = rng(6);
    let (mut worst, mut odd) = (0.0f64, 0);
    for i in 0..100u64 {
        let m: usize = r.random_range(1..=12);
        let a = if i % 3 == 0 {
            // Low rank: G Hᵀ − H Gᵀ.
            let k = r.random_range(1..=m.div_ceil(2));
            let g = Mat::gaussian(m, k, &mut r);
            let h = Mat::gaussian(m, k, &mut r);
            g.matmul_t(&h).sub(&h.matmul_t(&g))
        } else {
            let g = Mat::gaussian(m, m, &mut r);
            g.sub(&g.transpose())
        };
        let (b, c) = skew_factorize(&a, 1e-12).unwrap();
        let rec = b.matmul(&c.materialize()).matmul_t(&b);
        worst = worst.max(rec.sub(&a).max_abs());
        if b.cols() % 2 != 0 {
            odd += 1;
        }
    }
    outcome(worst <= 1e-8 && odd == 0, format!("max reconstruction err {worst:.2e} (tol 1e-8), {odd} odd ranks"))
}

// ---- 7 -------------------------------------------------------------------

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn c7_bounds() -> Outcome {
    let t0 = Instant::now();
    let k = 3;
    let mut violations = 0;
    let mut populated = 0;
    let mut ratios = Vec::new();
    let mut ratios_pos = Vec::new();
    let mut optimal = 0;
    // Rank-3 P0 kernels with singular values {3, 2, 1}.
    for s in 0..200u64 {
        let kern = sample_synthetic_p0(5, &[3.0, 2.0, 1.0], false, 7000 + s, 1_000_000).unwrap();
        let rep = approx_bound_study(&kern, k).unwrap();
        violations += usize::from(!rep.bounds_hold(1e-9));
        let g = rep.greedy_log_det.unwrap_or(f64::NEG_INFINITY);
        optimal += usize::from(g >= rep.exact_log_det - 1e-9);
        if let Some(q) = rep.greedy_ratio {
            ratios.push(q);
            if rep.exact_log_det > 0.0 {
                ratios_pos.push(q);
            }
        }
    }
    // Families where sigma_min > 0 (shifted bound) or > 1 (ratio bound) so the bounds bite.
    for s in 0..200u64 {
        let sym = sample_synthetic_p0(5, &[5.0, 4.0, 3.0, 2.0, 1.5], true, 7500 + s, 10).unwrap();
        let skew = sample_shifted_psd(5, 1.5, 0.5, 7800 + s).unwrap();
        for kern in [sym, skew] {
            let rep = approx_bound_study(&kern, k).unwrap();
            populated += usize::from(rep.ratio_bound.is_some());
            violations += usize::from(!rep.bounds_hold(1e-9));
        }
    }
    let med = median(ratios.clone());
    let med_pos = median(ratios_pos.clone());
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        violations == 0 && med >= 0.95 && secs < 120.0,
        format!(
            "{violations} bound violations over 600 kernels ({populated} with the sigma_min>1 bound); \
             median ratio {med:.4} on 200 rank-3 kernels (>= 0.95), {med_pos:.4} on the {} with positive optimum; \
             greedy optimal on {optimal}/200; {secs:.1}s (limit 120s)",
            ratios_pos.len()
        ),
    )
}

// ---- planted data (9, 8) ---------------------------------------------------

const PLANTED_M: usize = 50;
const PLANTED_K: usize = 5;

/// Tied kernel whose items fall into `K` nearly orthogonal groups of ten,
/// with the skew part coupling groups 0↔1 and 2↔3. Coupled groups tend to
/// appear together (a positive correlation no symmetric DPP can express),
/// while single-group baskets stay rare.
fn planted_params(seed: u64) -> NdppParams {
    let mut r = rng(seed);
    let noise = Mat::gaussian(PLANTED_M, PLANTED_K, &mut r).scale(0.02);
    let v = Mat::from_fn(PLANTED_M, PLANTED_K, |i, j| noise[(i, j)] + if i % PLANTED_K == j { 0.1 } else { 0.0 });
    let d = Mat::from_fn(PLANTED_K, PLANTED_K, |i, j| if (i, j) == (0, 1) || (i, j) == (2, 3) { 10.0 } else { 0.0 });
    NdppParams::tied(v, d, 0.0).unwrap()
}

/// Generic untied NDPP with Gaussian factors, for the inference comparison.
fn toy_params(seed: u64) -> NdppParams {
    let mut r = rng(seed);
    let v = Mat::gaussian(PLANTED_M, PLANTED_K, &mut r).scale(0.35);
    let b = Mat::gaussian(PLANTED_M, PLANTED_K, &mut r).scale(0.6);
    let d = Mat::gaussian(PLANTED_K, PLANTED_K, &mut r).scale(1.5);
    NdppParams::new(v, Some(b), d, 0.0, 0.0).unwrap()
}

fn sample_baskets(p: &NdppParams, n: usize, seed: u64) -> BasketDataset {
    let l = p.materialize();
    let mut r = rng(seed ^ 0x5eed);
    let mut baskets = Vec::with_capacity(n);
    while baskets.len() < n {
        let y = sample_dpp_dense(&l, &mut r).unwrap();
        if !y.is_empty() {
            baskets.push(y);
        }
    }
    BasketDataset::new(PLANTED_M, baskets).unwrap()
}

/// Nonsymmetric fit and its symmetric ablation on the same split.
fn fit_pair(train: &BasketDataset, val: &BasketDataset, mut cfg: TrainConfig) -> (NdppParams, NdppParams) {
    let (nonsym, _) = fit(train, val, &cfg).unwrap();
    cfg.nonsymmetric = false;
    let (sym, _) = fit(train, val, &cfg).unwrap();
    (nonsym, sym)
}

struct Learned {
    nonsym: NdppParams,
    sym: NdppParams,
    test: Vec<Vec<usize>>,
    mean_basket: f64,
    train_secs: f64,
}

fn learned() -> &'static Learned {
    static CELL: OnceLock<Learned> = OnceLock::new();
    CELL.get_or_init(|| {
        let t0 = Instant::now();
        let data = sample_baskets(&planted_params(9), 2000, 9);
        let mean_basket = data.baskets().iter().map(Vec::len).sum::<usize>() as f64 / data.len() as f64;
        let (train, val, test) = split(&data, 200, 1000, 9).unwrap();
        let cfg = TrainConfig {
            k: Some(PLANTED_K),
            val_size: 200,
            test_size: 1000,
            learning_rate: 0.05,
            max_epochs: 1500,
            conv_rel_tol: 1e-5,
            seed: 9,
            ..TrainConfig::default()
        };
        let (nonsym, sym) = fit_pair(&train, &val, cfg);
        Learned { nonsym, sym, test: test.baskets().to_vec(), mean_basket, train_secs: t0.elapsed().as_secs_f64() }
    })
}

/// Small models learned from [`toy_params`] data.
fn toy_learned() -> (NdppParams, NdppParams) {
    let data = sample_baskets(&toy_params(8), 1000, 8);
    let (train, val, _) = split(&data, 100, 100, 8).unwrap();
    let cfg = TrainConfig {
        k: Some(PLANTED_K),
        val_size: 100,
        test_size: 100,
        learning_rate: 0.05,
        max_epochs: 300,
        seed: 8,
        ..TrainConfig::default()
    };
    fit_pair(&train, &val, cfg)
}

fn c9_end_to_end() -> Outcome {
    let l = learned();
    let eps = likelihood::DEFAULT_EPS;
    let ns = KernelModel::new(l.nonsym.clone(), eps).unwrap();
    let sy = KernelModel::new(l.sym.clone(), eps).unwrap();
    let score = |m: &KernelModel| -> Vec<f64> { l.test.iter().map(|y| m.subset_score(y).unwrap()).collect() };
    let (a, b) = (score(&ns), score(&sy));
    let ns_rep = mean_report(&a, 0, 9);
    let sy_rep = mean_report(&b, 0, 9);
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let d_rep = mean_report(&diff, 0, 9);
    let margin = ns_rep.value - sy_rep.value;
    // The margin's own interval: paired bootstrap over per-basket differences.
    let width = d_rep.ci_width();
    outcome(
        margin > width,
        format!(
            "test ll nonsym {:.4} [{:.4}, {:.4}] vs sym {:.4} [{:.4}, {:.4}]; margin {margin:.4} > its CI width {width:.4} \
             [{:.4}, {:.4}]; {} test baskets, mean size {:.2}; training {:.1}s",
            ns_rep.value,
            ns_rep.ci_low,
            ns_rep.ci_high,
            sy_rep.value,
            sy_rep.ci_low,
            sy_rep.ci_high,
            d_rep.ci_low,
            d_rep.ci_high,
            l.test.len(),
            l.mean_basket,
            l.train_secs
        ),
    )
}

// ---- 8 -------------------------------------------------------------------

fn c8_ordering() -> Outcome {
    let mut r = rng(8);
    let mut order_bad = 0;
    let mut sampled = 0;
    for s in 0..100u64 {
        let m = r.random_range(6..=12);
        let k = r.random_range(2..=4usize);
        let budget = r.random_range(1..=k);
        let kern = random_kernel(m, k, s % 2 == 0, 800 + s);
        let (Ok(g), Ok(ls), Ok(ex)) = (greedy_map(&kern, budget), local_search(&kern, budget), exact_map(&kern, budget))
        else {
            continue;
        };
        sampled += 1;
        if !(ex.log_det >= ls.log_det - 1e-9 && ls.log_det >= g.log_det - 1e-9) {
            order_bad += 1;
        }
    }

    let algos = [Algorithm::Greedy, Algorithm::StochasticGreedy, Algorithm::Mcmc];
    let bench = |name: &str, p: &NdppParams| -> (bool, String) {
        let rows = map_benchmark(&p.to_inference_kernel(), 4, &algos, 20, 8).unwrap();
        let e: Vec<f64> = rows.iter().map(|r| r.mean_rel_error).collect();
        let ld: Vec<f64> = rows.iter().map(|r| r.mean_log_det).collect();
        let line = format!(
            "{name}: greedy {:.4}, sgreedy {:.4}, mcmc {:.4} (mean log det {:.3}, {:.3}, {:.3})",
            e[0], e[1], e[2], ld[0], ld[1], ld[2]
        );
        (e[0] < e[1] && e[1] < e[2], line)
    };
    let (toy_ns, toy_sym) = toy_learned();
    let mut directional = true;
    let mut table = Vec::new();
    for (name, p) in [("nonsym", &toy_ns), ("sym", &toy_sym)] {
        let (ok, line) = bench(name, p);
        directional &= ok;
        table.push(line);
    }
    // Not part of the verdict: the complementary-pairs kernels from the
    // learning check, where greedy's first picks are a known trap.
    let l = learned();
    let info: Vec<String> = [("pairs nonsym", &l.nonsym), ("pairs sym", &l.sym)].iter().map(|(n, p)| bench(n, p).1).collect();
    outcome(
        order_bad == 0 && sampled > 0 && directional,
        format!(
            "exact>=local>=greedy violated on {order_bad}/{sampled} kernels; rel error vs local search, {}; [info] {}",
            table.join("; "),
            info.join("; ")
        ),
    )
}

// ---- 10 ------------------------------------------------------------------

/// Knows every test basket; the held-out item is the only unseen item that
/// shares a basket with the context.
struct Oracle {
    m: usize,
    owner: Vec<usize>,
    baskets: Vec<Vec<usize>>,
}

impl BasketModel for Oracle {
    fn m(&self) -> usize {
        self.m
    }
    fn next_item_scores(&self, context: &[usize]) -> Result<Vec<f64>> {
        let b = self.owner[context[0]];
        Ok((0..self.m).map(|i| if self.owner[i] == b { 1.0 } else { 0.0 }).collect())
    }
    fn subset_score(&self, y: &[usize]) -> Result<f64> {
        let mut s = y.to_vec();
        s.sort_unstable();
        let b = self.owner[s[0]];
        Ok(if self.baskets[b] == s { 0.0 } else { -1.0 })
    }
}

/// Scores that ignore the context entirely.
struct Fixed(Vec<f64>);

impl BasketModel for Fixed {
    fn m(&self) -> usize {
        self.0.len()
    }
    fn next_item_scores(&self, _: &[usize]) -> Result<Vec<f64>> {
        Ok(self.0.clone())
    }
    fn subset_score(&self, y: &[usize]) -> Result<f64> {
        Ok(y.iter().map(|&i| self.0[i]).sum())
    }
}

fn c10_metrics() -> Outcome {
    let mut r = rng(10);
    // Perfect model over 500 disjoint baskets.
    let mut baskets = Vec::new();
    let mut owner = Vec::new();
    for b in 0..500 {
        let size = r.random_range(2..=5);
        let start = owner.len();
        owner.extend(std::iter::repeat_n(b, size));
        baskets.push((start..start + size).collect::<Vec<_>>());
    }
    let oracle = Oracle { m: owner.len(), owner, baskets: baskets.clone() };
    let p_mpr = mpr(&oracle, &baskets, 10).unwrap().value;
    let p_auc = auc_discrimination(&oracle, &baskets, 10).unwrap().value;

    // Item scores fixed in advance, independent of the basket, on 500
    // uniformly random baskets.
    let m = 100;
    let random_baskets: Vec<Vec<usize>> = (0..500).map(|_| random_subset(m, r.random_range(2..=8), &mut r)).collect();
    let fixed = Fixed((0..m).map(|_| r.random::<f64>()).collect());
    let c_mpr = mpr(&fixed, &random_baskets, 11).unwrap().value;
    let c_auc = auc_discrimination(&fixed, &random_baskets, 11).unwrap().value;

    // Literally equal scores: every comparison ties, which the >= rule counts
    // in the held-out item's favor.
    let flat = Fixed(vec![0.0; m]);
    let f_mpr = mpr(&flat, &random_baskets, 12).unwrap().value;
    let f_auc = auc_discrimination(&flat, &random_baskets, 12).unwrap().value;

    let pass = p_mpr == 100.0
        && p_auc == 1.0
        && (c_mpr - 50.0).abs() <= 3.0
        && (c_auc - 0.5).abs() <= 0.05
        && f_mpr == 100.0
        && f_auc == 0.5;
    outcome(
        pass,
        format!(
            "perfect: MPR {p_mpr} AUC {p_auc}; basket-independent scores: MPR {c_mpr:.2} (50±3) AUC {c_auc:.4} (0.5±0.05); \
             all-equal scores: MPR {f_mpr} (ties count as >=) AUC {f_auc}"
        ),
    )
}

// ---- 11 ------------------------------------------------------------------

fn run_ndpp(args: &[&str], dir: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_ndpp"))
        .args(args)
        .current_dir(dir)
        .env("NDPP_THREADS", "1")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(11);
    let mut text = String::new();
    for _ in 0..300 {
        let y = random_subset(40, r.random_range(1..=5), &mut r);
        let line: Vec<String> = y.iter().map(|i| format!("item{i}")).collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    fs::write(dir.path().join("data.txt"), text).unwrap();

    let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
    for run in 0..2 {
        let sub = dir.path().join(format!("run{run}"));
        fs::create_dir(&sub).unwrap();
        fs::copy(dir.path().join("data.txt"), sub.join("data.txt")).unwrap();
        let train = [
            "train", "--data", "data.txt", "--out", "model.ndpp", "--trace", "trace.csv", "--seed", "5",
            "--set", "val_size=50", "--set", "test_size=50", "--set", "max_epochs=8", "--no-timing",
        ];
        let mut ok = run_ndpp(&train, &sub);
        for algo in ["greedy", "sgreedy", "mcmc", "local"] {
            let out = format!("map_{algo}.json");
            ok &= run_ndpp(&["map", "--model", "model.ndpp", "--k", "4", "--algo", algo, "--seed", "3", "--out", &out, "--no-timing"], &sub);
        }
        if !ok {
            return outcome(false, format!("a command failed on run {run}"));
        }
        let files = ["model.ndpp", "model.ndpp.vocab", "trace.csv", "map_greedy.json", "map_sgreedy.json", "map_mcmc.json", "map_local.json"];
        outputs.push(files.iter().map(|f| fs::read(sub.join(f)).unwrap()).collect());
    }
    let same = outputs[0] == outputs[1];
    outcome(same, format!("train and map (4 algorithms) outputs byte-identical across two runs: {same}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 normalizer oracle", c1_normalizer),
        ("2 gradient oracle", c2_gradient),
        ("3 linear scaling", c3_scaling),
        ("4 bilinear inverse and gain traces", c4_bilinear),
        ("5 conditioning oracle", c5_conditioning),
        ("6 skew factorization", c6_skew),
        ("7 greedy approximation bounds", c7_bounds),
        ("8 inference ordering", c8_ordering),
        ("9 end-to-end learning", c9_end_to_end),
        ("10 metric sanity", c10_metrics),
        ("11 determinism", c11_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let o = f();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
