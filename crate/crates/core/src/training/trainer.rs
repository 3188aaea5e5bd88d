use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adam::Adam;
use super::config::TrainConfig;
use super::data::{split, BasketDataset};
use crate::error::{NdppError, Result};
use crate::kernel::NdppParams;
use crate::likelihood;
use crate::matcore::Mat;

/// Consecutive all-infeasible epochs tolerated before giving up.
pub const MAX_INFEASIBLE_EPOCHS: usize = 5;

pub const TRACE_HEADER: &str = "step,epoch,wall_ms,train_nll,val_ll";

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// Optimizer steps taken so far.
    pub step: usize,
    pub epoch: usize,
    pub wall_ms: u64,
    /// Mean negative objective over the epoch's feasible batches, taken
    /// before each batch's update.
    pub train_nll: f64,
    pub val_ll: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    /// Epoch whose parameters were returned (0 = initialization).
    pub best_epoch: usize,
    pub best_val_ll: f64,
    /// Stopped by the validation criterion rather than `max_epochs`.
    pub converged: bool,
    /// Steps whose update was rejected even at half the learning rate.
    pub rejected_steps: usize,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{:?},{:?}", r.step, r.epoch, r.wall_ms, r.train_nll, r.val_ll);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Zeroes every wall-clock field, for byte-reproducible output.
    pub fn strip_timing(&mut self) {
        self.records.iter_mut().for_each(|r| r.wall_ms = 0);
    }
}

/// Draws `V ~ U(0,1)`, then `B ~ U(0,1)` when untied, then `D ~ N(0,1)`
/// (zero when `cfg.nonsymmetric` is false), all from one seeded stream.
pub fn init_params(m: usize, cfg: &TrainConfig, seed: u64) -> Result<NdppParams> {
    let k = cfg.k.ok_or_else(|| NdppError::InvalidArgument("rank k is unresolved".into()))?;
    if m == 0 || k == 0 {
        return Err(NdppError::InvalidArgument(format!("need m, k >= 1 (got m={m}, k={k})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |rows, cols| Mat::from_fn(rows, cols, |_, _| rng.random::<f64>());
    let v = uniform(m, k);
    let b = (!cfg.tied).then(|| uniform(m, k));
    let d = if cfg.nonsymmetric {
        Mat::from_fn(k, k, |_, _| rng.sample(StandardNormal))
    } else {
        Mat::zeros(k, k)
    };
    NdppParams::new(v, b, d, cfg.alpha, cfg.beta)
}

/// Mean held-out log-likelihood, without the regularizer. −∞ if any basket
/// has a nonpositive minor.
pub fn validation_ll(p: &NdppParams, val: &BasketDataset, eps: f64) -> Result<f64> {
    let z = likelihood::log_normalizer(p)?;
    let mut sum = 0.0;
    for y in val.baskets() {
        match likelihood::subset_logdet(p, y, eps) {
            Ok(l) => sum += l,
            Err(NdppError::NonPositiveMinor) => return Ok(f64::NEG_INFINITY),
            Err(e) => return Err(e),
        }
    }
    let mean = if val.is_empty() { 0.0 } else { sum / val.len() as f64 };
    Ok(mean - z)
}

/// Splits `data` with `cfg.seed`, resolves `k = auto` to the largest
/// training basket, and fits on the training part.
pub fn train(data: &BasketDataset, cfg: &TrainConfig) -> Result<(NdppParams, TrainTrace)> {
    cfg.validate()?;
    let (tr, val, _test) = split(data, cfg.val_size, cfg.test_size, cfg.seed)?;
    fit(&tr, &val, cfg)
}

/// Adam on the regularized objective over `train`, tracking `val`.
/// Returns the parameters with the best validation log-likelihood.
pub fn fit(train: &BasketDataset, val: &BasketDataset, cfg: &TrainConfig) -> Result<(NdppParams, TrainTrace)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(NdppError::EmptyDataset);
    }
    if val.m() != train.m() {
        return Err(NdppError::Dimension(format!("val M={} vs train M={}", val.m(), train.m())));
    }
    let mut cfg = cfg.clone();
    cfg.k = Some(cfg.k.unwrap_or_else(|| train.max_basket_size()));
    let init = init_params(train.m(), &cfg, cfg.seed)?;
    fit_from(train, val, &cfg, init)
}

/// [`fit`] starting from `init` instead of a fresh draw, e.g. to resume or
/// warm-start. `cfg.k` is ignored; the rank comes from `init`. When
/// `cfg.nonsymmetric` is false, `D` is held at its initial value.
pub fn fit_from(
    train: &BasketDataset,
    val: &BasketDataset,
    cfg: &TrainConfig,
    init: NdppParams,
) -> Result<(NdppParams, TrainTrace)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(NdppError::EmptyDataset);
    }
    if init.m() != train.m() || val.m() != train.m() {
        return Err(NdppError::Dimension(format!(
            "init M={}, train M={}, val M={}",
            init.m(),
            train.m(),
            val.m()
        )));
    }
    let start = Instant::now();
    let mut params = init;
    // Items unseen in training would make the 1/μ weight infinite.
    let mu: Vec<usize> = train.mu().iter().map(|&c| c.max(1)).collect();
    let eps = cfg.eps_minor;
    let n_free = params.num_free();
    let k = params.k();
    let d_offset = n_free - k * k;

    let mut trace = TrainTrace { best_val_ll: validation_ll(&params, val, eps)?, ..Default::default() };
    let mut best = params.clone();
    let mut prev_val = trace.best_val_ll;
    let mut stall = 0;
    let mut infeasible_epochs = 0;
    let mut step = 0;
    let mut adam = Adam::new(n_free, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut nll_sum = 0.0;
        let mut feasible_batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&[usize]> = chunk.iter().map(|&i| train.baskets()[i].as_slice()).collect();
            let (report, grads) = likelihood::objective_and_grad(&params, &batch, &mu, eps)?;
            if report.infeasible {
                continue;
            }
            feasible_batches += 1;
            nll_sum -= report.objective;

            let mut g = grads.to_flat(params.is_tied());
            if !cfg.nonsymmetric {
                g[d_offset..].iter_mut().for_each(|x| *x = 0.0);
            }
            if !guarded_step(&mut params, &mut adam, &g, cfg.learning_rate, |p| step_is_feasible(p, &batch, eps))? {
                trace.rejected_steps += 1;
            }
            step += 1;
        }

        if feasible_batches == 0 {
            infeasible_epochs += 1;
            if infeasible_epochs >= MAX_INFEASIBLE_EPOCHS {
                return Err(NdppError::Diverged(infeasible_epochs));
            }
        } else {
            infeasible_epochs = 0;
        }

        let val_ll = validation_ll(&params, val, eps)?;
        let train_nll = if feasible_batches == 0 { f64::INFINITY } else { nll_sum / feasible_batches as f64 };
        let wall_ms = start.elapsed().as_millis() as u64;
        trace.records.push(TraceRecord { step, epoch, wall_ms, train_nll, val_ll });
        if val_ll > trace.best_val_ll {
            trace.best_val_ll = val_ll;
            trace.best_epoch = epoch;
            best = params.clone();
        }

        let rel = relative_change(prev_val, val_ll);
        stall = if rel < cfg.conv_rel_tol { stall + 1 } else { 0 };
        prev_val = val_ll;
        if stall >= cfg.conv_patience.max(1) {
            trace.converged = true;
            break;
        }
    }
    Ok((best, trace))
}

/// One Adam step at `lr`, retried once at `lr / 2` if `feasible` rejects
/// the result. On final rejection both `params` and `adam` are restored
/// exactly. Returns whether a step was kept.
pub fn guarded_step(
    params: &mut NdppParams,
    adam: &mut Adam,
    grad: &[f64],
    lr: f64,
    mut feasible: impl FnMut(&NdppParams) -> Result<bool>,
) -> Result<bool> {
    let theta0 = params.to_flat();
    let adam0 = adam.clone();
    for lr in [lr, 0.5 * lr] {
        let mut theta = theta0.clone();
        adam.step(&mut theta, grad, lr);
        params.set_flat(&theta);
        if feasible(params)? {
            return Ok(true);
        }
        params.set_flat(&theta0);
        *adam = adam0.clone();
    }
    Ok(false)
}

fn step_is_feasible(p: &NdppParams, batch: &[&[usize]], eps: f64) -> Result<bool> {
    if !p.v().is_finite() || !p.b().is_finite() || !p.d().is_finite() {
        return Ok(false);
    }
    match likelihood::log_normalizer(p) {
        Ok(_) => {}
        Err(NdppError::NumericalFailure(_)) | Err(NdppError::SingularMatrix) => return Ok(false),
        Err(e) => return Err(e),
    }
    likelihood::batch_feasible(p, batch, eps)
}

fn relative_change(prev: f64, cur: f64) -> f64 {
    if !prev.is_finite() || !cur.is_finite() {
        return f64::INFINITY;
    }
    (cur - prev).abs() / prev.abs().max(f64::MIN_POSITIVE)
}
