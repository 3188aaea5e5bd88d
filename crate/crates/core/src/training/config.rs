use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{NdppError, Result};

/// Training hyperparameters. Parsed from flat `key = value` files.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Rank `K`; `None` means the largest training basket size.
    pub k: Option<usize>,
    pub tied: bool,
    /// When false, `D` stays at zero and the model is a symmetric low-rank DPP.
    pub nonsymmetric: bool,
    pub alpha: f64,
    pub beta: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub eps_minor: f64,
    pub val_size: usize,
    pub test_size: usize,
    pub conv_rel_tol: f64,
    pub conv_patience: usize,
    pub max_epochs: usize,
    pub max_basket: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: None,
            tied: true,
            nonsymmetric: true,
            alpha: 0.01,
            beta: 0.0,
            batch_size: 200,
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            eps_minor: 1e-5,
            val_size: 300,
            test_size: 2000,
            conv_rel_tol: 1e-4,
            conv_patience: 3,
            max_epochs: 100,
            max_basket: super::DEFAULT_MAX_BASKET,
            seed: 0,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| NdppError::Config(format!("bad value for {key}: {value:?}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(NdppError::Config(msg.into()));
        if self.k == Some(0) {
            return bad("k must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.conv_rel_tol) {
            return bad("conv_rel_tol must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must be in [0, 1)");
        }
        if self.adam_eps < 0.0 || self.eps_minor < 0.0 {
            return bad("epsilons must be nonnegative");
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad("alpha and beta must be nonnegative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.max_basket == 0 {
            return bad("max_basket must be at least 1");
        }
        Ok(())
    }

    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "k" => self.k = if value == "auto" { None } else { Some(parse_value(key, value)?) },
            "tied" => self.tied = parse_value(key, value)?,
            "nonsymmetric" => self.nonsymmetric = parse_value(key, value)?,
            "alpha" => self.alpha = parse_value(key, value)?,
            "beta" => self.beta = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "adam_beta1" => self.adam_beta1 = parse_value(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse_value(key, value)?,
            "adam_eps" => self.adam_eps = parse_value(key, value)?,
            "eps_minor" => self.eps_minor = parse_value(key, value)?,
            "val_size" => self.val_size = parse_value(key, value)?,
            "test_size" => self.test_size = parse_value(key, value)?,
            "conv_rel_tol" => self.conv_rel_tol = parse_value(key, value)?,
            "conv_patience" => self.conv_patience = parse_value(key, value)?,
            "max_epochs" => self.max_epochs = parse_value(key, value)?,
            "max_basket" => self.max_basket = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            _ => return Err(NdppError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| NdppError::Config(format!("line {}: expected key=value", n + 1)))?;
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Serializes every field; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let k = self.k.map_or("auto".to_string(), |k| k.to_string());
        let _ = writeln!(s, "k = {k}");
        let _ = writeln!(s, "tied = {}", self.tied);
        let _ = writeln!(s, "nonsymmetric = {}", self.nonsymmetric);
        let _ = writeln!(s, "alpha = {:?}", self.alpha);
        let _ = writeln!(s, "beta = {:?}", self.beta);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "learning_rate = {:?}", self.learning_rate);
        let _ = writeln!(s, "adam_beta1 = {:?}", self.adam_beta1);
        let _ = writeln!(s, "adam_beta2 = {:?}", self.adam_beta2);
        let _ = writeln!(s, "adam_eps = {:?}", self.adam_eps);
        let _ = writeln!(s, "eps_minor = {:?}", self.eps_minor);
        let _ = writeln!(s, "val_size = {}", self.val_size);
        let _ = writeln!(s, "test_size = {}", self.test_size);
        let _ = writeln!(s, "conv_rel_tol = {:?}", self.conv_rel_tol);
        let _ = writeln!(s, "conv_patience = {}", self.conv_patience);
        let _ = writeln!(s, "max_epochs = {}", self.max_epochs);
        let _ = writeln!(s, "max_basket = {}", self.max_basket);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}
