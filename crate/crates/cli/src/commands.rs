use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndpp::eval::{
    approx_bound_study, auc_discrimination, map_benchmark, mpr, sample_synthetic_p0, test_loglik, EvalReport,
    KernelModel, MetricReport,
};
use ndpp::inference::{condition_singletons, run_map, Algorithm, MapResult};
use ndpp::kernel::{check_p0, load_model, save_model};
use ndpp::training::{fit, load_vocab, split, BasketDataset, TrainConfig};
use ndpp::{NdppError, NdppParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{BenchArgs, EvalArgs, MapArgs, ModelArgs, PredictArgs, SynthArgs, TrainArgs};
use crate::output::{cell, with_suffix, write_atomic};
use crate::{Cli, CliError, CliResult, Command, RunManifest};

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Train(a) => {
            let mut man = RunManifest::new("train");
            man.inputs.push(a.data.clone());
            man.inputs.extend(a.config.clone());
            let path = manifest_path(cli, Some(&a.out));
            with_manifest(path, man, |m| cmd_train(a, cli.no_timing, m))
        }
        Command::Map(a) => {
            let mut man = RunManifest::new("map");
            man.inputs.push(a.model.model.clone());
            man.seed = Some(a.seed);
            man.set("k", a.k).set("algo", &a.algo);
            let path = manifest_path(cli, a.out.as_deref());
            with_manifest(path, man, |m| cmd_map(a, cli.no_timing, m))
        }
        Command::Predict(a) => {
            let mut man = RunManifest::new("predict");
            man.inputs.push(a.model.model.clone());
            man.set("basket", &a.basket).set("top", a.top);
            let path = manifest_path(cli, None);
            with_manifest(path, man, |_| cmd_predict(a).map(|lines| lines.iter().for_each(|l| println!("{l}"))))
        }
        Command::Eval(a) => {
            let mut man = RunManifest::new("eval");
            man.inputs.push(a.model.model.clone());
            man.inputs.push(a.data.clone());
            man.seed = Some(a.seed);
            man.set("metrics", &a.metrics).set("eps", a.eps);
            let path = manifest_path(cli, a.out.as_deref());
            with_manifest(path, man, |m| cmd_eval(a, m))
        }
        Command::Bench(a) => {
            let mut man = RunManifest::new("bench");
            man.inputs.push(a.model.model.clone());
            man.seed = Some(a.seed);
            man.set("k", a.k).set("trials", a.trials).set("algos", &a.algos);
            let path = manifest_path(cli, a.out.as_deref());
            with_manifest(path, man, |m| cmd_bench(a, cli.no_timing, m))
        }
        Command::Synth(a) => {
            let mut man = RunManifest::new("synth");
            man.seed = Some(a.seed);
            man.set("m", a.m).set("k", a.k).set("count", a.count).set("symmetric", a.symmetric);
            let path = manifest_path(cli, a.out.as_deref());
            with_manifest(path, man, |m| cmd_synth(a, m))
        }
    }
}

/// Explicit `--manifest`, else next to the primary output, else none.
fn manifest_path(cli: &Cli, out: Option<&Path>) -> Option<PathBuf> {
    cli.manifest.clone().or_else(|| out.map(|o| with_suffix(o, ".manifest.json")))
}

fn with_manifest(
    path: Option<PathBuf>,
    mut man: RunManifest,
    body: impl FnOnce(&mut RunManifest) -> CliResult<()>,
) -> CliResult<()> {
    let Some(path) = path else {
        return body(&mut man);
    };
    man.write(&path)?;
    let res = body(&mut man);
    man.finish(res.as_ref().err().map(ToString::to_string));
    man.write(&path)?;
    res
}

fn domain(e: NdppError) -> CliError {
    CliError::Domain(e)
}

// ---- model loading -------------------------------------------------------

pub struct LoadedModel {
    pub params: NdppParams,
    pub vocab: Option<Vec<String>>,
}

impl LoadedModel {
    pub fn label(&self, i: usize) -> String {
        match &self.vocab {
            Some(v) => v[i].clone(),
            None => i.to_string(),
        }
    }

    /// Resolves tokens to indices, reporting every unknown one at once.
    pub fn resolve(&self, tokens: &[&str]) -> CliResult<Vec<usize>> {
        let m = self.params.m();
        let mut idx = Vec::with_capacity(tokens.len());
        let mut unknown = Vec::new();
        for &t in tokens {
            let hit = match &self.vocab {
                Some(v) => v.iter().position(|w| w == t),
                None => t.parse::<usize>().ok().filter(|&i| i < m),
            };
            match hit {
                Some(i) if !idx.contains(&i) => idx.push(i),
                Some(_) => {}
                None => unknown.push(t.to_string()),
            }
        }
        if !unknown.is_empty() {
            return Err(domain(NdppError::UnknownItem(unknown)));
        }
        Ok(idx)
    }
}

pub fn load(args: &ModelArgs) -> CliResult<LoadedModel> {
    let params = load_model(&args.model)?;
    let vocab_path = match &args.vocab {
        Some(p) => Some(p.clone()),
        None => Some(with_suffix(&args.model, ".vocab")).filter(|p| p.exists()),
    };
    let vocab = match vocab_path {
        Some(p) => {
            let v = load_vocab(&p)?;
            if v.len() != params.m() {
                return Err(domain(NdppError::Dimension(format!(
                    "vocabulary has {} items, model has {}",
                    v.len(),
                    params.m()
                ))));
            }
            Some(v)
        }
        None => None,
    };
    Ok(LoadedModel { params, vocab })
}

fn load_baskets(model: &LoadedModel, path: &Path, max_basket: usize) -> CliResult<BasketDataset> {
    Ok(match &model.vocab {
        Some(v) => BasketDataset::load_with_vocab(path, v, max_basket)?,
        None => BasketDataset::load_indexed(path, model.params.m(), max_basket)?,
    })
}

// ---- train ---------------------------------------------------------------

pub fn cmd_train(a: &TrainArgs, no_timing: bool, man: &mut RunManifest) -> CliResult<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    for kv in &a.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    man.seed = Some(cfg.seed);
    for line in cfg.to_text().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            man.set(k, v);
        }
    }

    let vocab_out = a.vocab.clone().unwrap_or_else(|| with_suffix(&a.out, ".vocab"));
    man.outputs.push(a.out.clone());
    man.outputs.push(vocab_out.clone());
    man.outputs.extend(a.trace.clone());
    man.outputs.extend(a.test_out.clone());

    let data = BasketDataset::load(&a.data, cfg.max_basket)?;
    let (train, val, test) = split(&data, cfg.val_size, cfg.test_size, cfg.seed)?;
    let (params, mut trace) = fit(&train, &val, &cfg)?;
    if no_timing {
        trace.strip_timing();
    }

    save_model(&params, &a.out)?;
    let vocab = data.vocab().expect("token datasets carry a vocabulary");
    write_atomic(&vocab_out, lines(vocab.iter()).as_bytes())?;
    if let Some(p) = &a.trace {
        write_atomic(p, trace.to_csv().as_bytes())?;
    }
    if let Some(p) = &a.test_out {
        let text = lines(test.baskets().iter().map(|b| b.iter().map(|&i| vocab[i].as_str()).collect::<Vec<_>>().join(" ")));
        write_atomic(p, text.as_bytes())?;
    }
    println!(
        "trained M={} K={} on {} baskets: best epoch {} (val ll {:.6}), {} epochs{}",
        params.m(),
        params.k(),
        train.len(),
        trace.best_epoch,
        trace.best_val_ll,
        trace.records.len(),
        if trace.converged { ", converged" } else { "" }
    );
    Ok(())
}

fn lines<S: AsRef<str>>(it: impl Iterator<Item = S>) -> String {
    let mut s = String::new();
    for l in it {
        s.push_str(l.as_ref());
        s.push('\n');
    }
    s
}

// ---- map -----------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct MapOutput {
    pub algorithm: String,
    pub k: usize,
    pub items: Vec<usize>,
    pub labels: Option<Vec<String>>,
    pub log_det: f64,
    pub wall_ms: f64,
    pub status: String,
    pub error: Option<String>,
}

fn parse_algo(s: &str) -> CliResult<Algorithm> {
    s.trim().parse().map_err(|_| {
        let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.as_str()).collect();
        CliError::Usage(format!("unknown algorithm {s:?} (expected one of {})", names.join(", ")))
    })
}

pub fn cmd_map(a: &MapArgs, no_timing: bool, man: &mut RunManifest) -> CliResult<()> {
    let algo = parse_algo(&a.algo)?;
    man.outputs.extend(a.out.clone());
    let model = load(&a.model)?;
    let kernel = model.params.to_inference_kernel();
    let res = run_map(&kernel, a.k, algo, a.seed);
    let (items, log_det, wall_ms, err) = match &res {
        Ok(MapResult { items, log_det, wall_ms, .. }) => (items.clone(), *log_det, *wall_ms, None),
        Err(NdppError::DegenerateGain { selected, log_det }) => (selected.clone(), *log_det, 0.0, res.as_ref().err()),
        Err(_) => {
            return res.map(|_| ()).map_err(domain);
        }
    };
    let out = MapOutput {
        algorithm: algo.as_str().to_string(),
        k: a.k,
        labels: model.vocab.as_ref().map(|_| items.iter().map(|&i| model.label(i)).collect()),
        items,
        log_det,
        wall_ms: if no_timing { 0.0 } else { wall_ms },
        status: if err.is_some() { "partial" } else { "ok" }.to_string(),
        error: err.map(ToString::to_string),
    };
    let labels: Vec<String> = out.items.iter().map(|&i| model.label(i)).collect();
    println!("items: {}", labels.join(","));
    println!("log_det: {}", out.log_det);
    println!("wall_ms: {:.3}", out.wall_ms);
    if let Some(p) = &a.out {
        let mut text = serde_json::to_string_pretty(&out).map_err(|e| domain(NdppError::Format(e.to_string())))?;
        text.push('\n');
        write_atomic(p, text.as_bytes())?;
    }
    match res {
        Ok(_) => Ok(()),
        Err(e) => Err(domain(e)),
    }
}

// ---- predict -------------------------------------------------------------

/// Top-`top` `label\tgain` lines for the next item given the basket.
pub fn cmd_predict(a: &PredictArgs) -> CliResult<Vec<String>> {
    let model = load(&a.model)?;
    let tokens: Vec<&str> = a.basket.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    let basket = model.resolve(&tokens)?;
    // No candidates left; skip conditioning, which is singular on a full
    // catalog whenever M exceeds the kernel rank.
    if basket.len() == model.params.m() {
        return Ok(Vec::new());
    }
    let kernel = model.params.to_inference_kernel();
    let gains = condition_singletons(&kernel, &basket)?;
    let mut order: Vec<usize> = (0..gains.len()).filter(|i| !basket.contains(i)).collect();
    order.sort_by(|&i, &j| gains[j].total_cmp(&gains[i]).then(i.cmp(&j)));
    Ok(order.into_iter().take(a.top).map(|i| format!("{}\t{:?}", model.label(i), gains[i])).collect())
}

// ---- eval ----------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Mpr,
    Auc,
    Ll,
}

impl Metric {
    fn name(self) -> &'static str {
        match self {
            Metric::Mpr => "mpr",
            Metric::Auc => "auc",
            Metric::Ll => "ll",
        }
    }
}

pub fn parse_metrics(s: &str) -> CliResult<Vec<Metric>> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let m = match tok {
            "mpr" => Metric::Mpr,
            "auc" => Metric::Auc,
            "ll" => Metric::Ll,
            _ => return Err(CliError::Usage(format!("unknown metric {tok:?} (expected mpr, auc, ll)"))),
        };
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no metrics requested".into()));
    }
    Ok(out)
}

pub fn eval_report(model: &KernelModel, baskets: &[Vec<usize>], metrics: &[Metric], seed: u64) -> CliResult<EvalReport> {
    let mut rep = EvalReport::default();
    for &m in metrics {
        match m {
            Metric::Mpr => {
                // Single-item baskets have nothing to hold out against.
                let usable: Vec<&Vec<usize>> = baskets.iter().filter(|b| b.len() >= 2).collect();
                if usable.is_empty() {
                    return Err(domain(NdppError::BasketTooSmall(0)));
                }
                let mut r = mpr(model, &usable, seed)?;
                r.skipped += baskets.len() - usable.len();
                rep.mpr = Some(r);
            }
            Metric::Auc => rep.auc = Some(auc_discrimination(model, baskets, seed)?),
            Metric::Ll => rep.test_loglik = Some(test_loglik(model, baskets, seed)?),
        }
    }
    Ok(rep)
}

/// One-row CSV with `<metric>,<metric>_ci_low,…` column groups.
pub fn eval_csv(rep: &EvalReport, metrics: &[Metric]) -> String {
    let (mut head, mut row) = (Vec::new(), Vec::new());
    for &m in metrics {
        let r: &MetricReport = match m {
            Metric::Mpr => rep.mpr.as_ref(),
            Metric::Auc => rep.auc.as_ref(),
            Metric::Ll => rep.test_loglik.as_ref(),
        }
        .expect("requested metric was computed");
        let n = m.name();
        head.extend([n.to_string(), format!("{n}_ci_low"), format!("{n}_ci_high"), format!("{n}_n"), format!("{n}_skipped")]);
        row.extend([cell(Some(r.value)), cell(Some(r.ci_low)), cell(Some(r.ci_high)), r.n.to_string(), r.skipped.to_string()]);
    }
    format!("{}\n{}\n", head.join(","), row.join(","))
}

pub fn cmd_eval(a: &EvalArgs, man: &mut RunManifest) -> CliResult<()> {
    let metrics = parse_metrics(&a.metrics)?;
    man.outputs.extend(a.out.clone());
    let loaded = load(&a.model)?;
    let data = load_baskets(&loaded, &a.data, a.max_basket)?;
    let model = KernelModel::new(loaded.params, a.eps)?;
    let rep = eval_report(&model, data.baskets(), &metrics, a.seed)?;
    let csv = eval_csv(&rep, &metrics);
    print!("{csv}");
    if let Some(p) = &a.out {
        write_atomic(p, csv.as_bytes())?;
    }
    Ok(())
}

// ---- bench ---------------------------------------------------------------

pub const BENCH_HEADER: &str = "algorithm,trials,mean_rel_error,ci_low,ci_high,mean_log_det,mean_wall_ms";

pub fn cmd_bench(a: &BenchArgs, no_timing: bool, man: &mut RunManifest) -> CliResult<()> {
    let algos = a.algos.split(',').filter(|s| !s.trim().is_empty()).map(parse_algo).collect::<CliResult<Vec<_>>>()?;
    if algos.is_empty() || a.trials == 0 {
        return Err(CliError::Usage("bench needs at least one algorithm and one trial".into()));
    }
    man.outputs.extend(a.out.clone());
    let model = load(&a.model)?;
    let kernel = model.params.to_inference_kernel();
    let rows = map_benchmark(&kernel, a.k, &algos, a.trials, a.seed)?;
    let mut csv = format!("{BENCH_HEADER}\n");
    for r in rows {
        let ms = if no_timing { 0.0 } else { r.mean_wall_ms };
        let _ = writeln!(
            csv,
            "{},{},{:?},{:?},{:?},{:?},{:?}",
            r.algorithm, r.trials, r.mean_rel_error, r.ci_low, r.ci_high, r.mean_log_det, ms
        );
    }
    print!("{csv}");
    if let Some(p) = &a.out {
        write_atomic(p, csv.as_bytes())?;
    }
    Ok(())
}

// ---- synth ---------------------------------------------------------------

pub const SYNTH_HEADER: &str = "index,seed,p0,sigma_min,sigma_max,kappa,ratio_bound,shifted_multiplier,shifted_additive,\
                                greedy_log_det,exact_log_det,greedy_ratio,bounds_hold";

fn parse_singular_values(s: Option<&str>, k: usize) -> CliResult<Vec<f64>> {
    let Some(s) = s else {
        return Ok((1..=k).rev().map(|x| x as f64).collect());
    };
    let sv = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad singular value {t:?}"))))
        .collect::<CliResult<Vec<_>>>()?;
    if sv.len() != k || sv.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(CliError::Usage(format!("need {k} positive singular values, got {s:?}")));
    }
    Ok(sv)
}

/// One CSV row per sampled kernel. Kernel `i` uses seed `seed + i`.
pub fn synth_rows(a: &SynthArgs) -> CliResult<Vec<String>> {
    let sv = parse_singular_values(a.singular_values.as_deref(), a.k)?;
    let rows: Vec<CliResult<String>> = (0..a.count)
        .into_par_iter()
        .map(|i| {
            let seed = a.seed.wrapping_add(i as u64);
            let kernel = sample_synthetic_p0(a.m, &sv, a.symmetric, seed, a.max_tries)?;
            let p0 = check_p0(&kernel.materialize())?;
            let r = approx_bound_study(&kernel, a.k)?;
            Ok(format!(
                "{i},{seed},{p0},{},{},{},{},{},{},{},{},{},{}",
                cell(Some(r.sigma_min)),
                cell(Some(r.sigma_max)),
                cell(Some(r.kappa)),
                cell(r.ratio_bound),
                cell(r.shifted_multiplier),
                cell(r.shifted_additive),
                cell(r.greedy_log_det),
                cell(Some(r.exact_log_det)),
                cell(r.greedy_ratio),
                r.bounds_hold(1e-9)
            ))
        })
        .collect();
    rows.into_iter().collect()
}

pub fn cmd_synth(a: &SynthArgs, man: &mut RunManifest) -> CliResult<()> {
    man.outputs.extend(a.out.clone());
    let rows = synth_rows(a)?;
    let csv = format!("{SYNTH_HEADER}\n{}", lines(rows.iter()));
    match &a.out {
        Some(p) => {
            write_atomic(p, csv.as_bytes())?;
            println!("wrote {} kernels to {}", rows.len(), p.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
