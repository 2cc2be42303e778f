//! Run configuration: a flat `key = value` file.
//!
//! ```text
//! # network
//! task = regression
//! hidden = 50 50
//! nonlinearity = relu
//! scale_features = false
//! output_bias = true
//! input_keep_prob = 1
//! keep_prob = 0.9
//! # exactly one of tau / weight_decay
//! tau = 100
//! lengthscale = 1
//! bias_lengthscale = 1
//! k_scaling = false
//! # optimiser
//! base_lr = 0.01
//! gamma = 0.0001
//! power = 0.25
//! momentum = 0.9
//! iterations = 1000
//! batch_size = 32
//! seed = 0
//! samples = 100
//! ```
//!
//! `batch_size = full` trains on the whole dataset every step. `#` starts a
//! comment. `weight_decay` is the first-layer decay `lambda_1`; the
//! precision is then `l^2 p_1 / (2 N lambda_1)`.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use mcdropout::data::Task;
use mcdropout::gp::{lengthscale_weight_decay, tau_from_weight_decay, LengthscalePrior};
use mcdropout::nn::{NetworkSpec, Nonlinearity, Schedule, WeightDecay};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Precision {
    Tau(f64),
    WeightDecay(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub hidden: Vec<usize>,
    pub nonlinearity: Nonlinearity,
    pub scale_features: bool,
    pub output_bias: bool,
    pub input_keep_prob: f64,
    pub keep_prob: f64,
    pub precision: Precision,
    pub lengthscale: f64,
    pub bias_lengthscale: f64,
    pub k_scaling: bool,
    pub schedule: Schedule,
    pub seed: u64,
    pub samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: Task::Regression,
            hidden: vec![50],
            nonlinearity: Nonlinearity::Relu,
            scale_features: false,
            output_bias: true,
            input_keep_prob: 1.0,
            keep_prob: 0.9,
            precision: Precision::WeightDecay(1e-6),
            lengthscale: 1.0,
            bias_lengthscale: 1.0,
            k_scaling: false,
            schedule: Schedule {
                batch_size: Some(32),
                ..Schedule::default()
            },
            seed: 0,
            samples: 100,
        }
    }
}

const KEYS: [&str; 20] = [
    "task",
    "hidden",
    "nonlinearity",
    "scale_features",
    "output_bias",
    "input_keep_prob",
    "keep_prob",
    "tau",
    "weight_decay",
    "lengthscale",
    "bias_lengthscale",
    "k_scaling",
    "base_lr",
    "gamma",
    "power",
    "momentum",
    "iterations",
    "batch_size",
    "seed",
    "samples",
];

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.parse()
        .map_err(|e: T::Err| anyhow!("invalid value '{raw}' for {key}: {e}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        let mut precision = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| anyhow!("line {}: expected 'key = value'", i + 1))?;
            if !KEYS.contains(&key) {
                bail!("line {}: unknown key '{key}'", i + 1);
            }
            if !seen.insert(key.to_string()) {
                bail!("line {}: duplicate key '{key}'", i + 1);
            }
            cfg.set(key, raw, &mut precision)
                .with_context(|| format!("line {}", i + 1))?;
        }
        cfg.precision = precision.ok_or_else(|| anyhow!("config must set one of 'tau' or 'weight_decay'"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, raw: &str, precision: &mut Option<Precision>) -> Result<()> {
        match key {
            "task" => self.task = value(key, raw)?,
            "hidden" => {
                self.hidden = raw
                    .split_whitespace()
                    .map(|t| value(key, t))
                    .collect::<Result<_>>()?
            }
            "nonlinearity" => self.nonlinearity = value(key, raw)?,
            "scale_features" => self.scale_features = value(key, raw)?,
            "output_bias" => self.output_bias = value(key, raw)?,
            "input_keep_prob" => self.input_keep_prob = value(key, raw)?,
            "keep_prob" => self.keep_prob = value(key, raw)?,
            "tau" | "weight_decay" => {
                if precision.is_some() {
                    bail!("set only one of 'tau' and 'weight_decay'");
                }
                let v = value(key, raw)?;
                *precision = Some(if key == "tau" {
                    Precision::Tau(v)
                } else {
                    Precision::WeightDecay(v)
                });
            }
            "lengthscale" => self.lengthscale = value(key, raw)?,
            "bias_lengthscale" => self.bias_lengthscale = value(key, raw)?,
            "k_scaling" => self.k_scaling = value(key, raw)?,
            "base_lr" => self.schedule.base_lr = value(key, raw)?,
            "gamma" => self.schedule.gamma = value(key, raw)?,
            "power" => self.schedule.power = value(key, raw)?,
            "momentum" => self.schedule.momentum = value(key, raw)?,
            "iterations" => self.schedule.iterations = value(key, raw)?,
            "batch_size" => {
                self.schedule.batch_size = if raw == "full" { None } else { Some(value(key, raw)?) }
            }
            "seed" => self.seed = value(key, raw)?,
            "samples" => self.samples = value(key, raw)?,
            _ => unreachable!("key list checked by the caller"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            bail!("'hidden' needs at least one positive layer width");
        }
        for (name, p) in [("input_keep_prob", self.input_keep_prob), ("keep_prob", self.keep_prob)] {
            if !(p > 0.0 && p <= 1.0) {
                bail!("{name} = {p} must lie in (0, 1]");
            }
        }
        match self.precision {
            Precision::Tau(t) if !(t > 0.0 && t.is_finite()) => bail!("tau = {t} must be positive"),
            Precision::WeightDecay(l) if !(l > 0.0 && l.is_finite()) => {
                bail!("weight_decay = {l} must be positive")
            }
            _ => {}
        }
        if !(self.lengthscale > 0.0 && self.bias_lengthscale > 0.0) {
            bail!("length-scales must be positive");
        }
        if self.samples == 0 {
            bail!("samples must be positive");
        }
        if self.schedule.batch_size == Some(0) {
            bail!("batch_size must be positive");
        }
        Ok(())
    }

    pub fn serialise(&self) -> String {
        let mut s = String::new();
        let hidden: Vec<String> = self.hidden.iter().map(|k| k.to_string()).collect();
        let lines: Vec<(&str, String)> = vec![
            ("task", self.task.to_string()),
            ("hidden", hidden.join(" ")),
            ("nonlinearity", self.nonlinearity.to_string()),
            ("scale_features", self.scale_features.to_string()),
            ("output_bias", self.output_bias.to_string()),
            ("input_keep_prob", self.input_keep_prob.to_string()),
            ("keep_prob", self.keep_prob.to_string()),
            match self.precision {
                Precision::Tau(t) => ("tau", t.to_string()),
                Precision::WeightDecay(l) => ("weight_decay", l.to_string()),
            },
            ("lengthscale", self.lengthscale.to_string()),
            ("bias_lengthscale", self.bias_lengthscale.to_string()),
            ("k_scaling", self.k_scaling.to_string()),
            ("base_lr", self.schedule.base_lr.to_string()),
            ("gamma", self.schedule.gamma.to_string()),
            ("power", self.schedule.power.to_string()),
            ("momentum", self.schedule.momentum.to_string()),
            ("iterations", self.schedule.iterations.to_string()),
            (
                "batch_size",
                self.schedule
                    .batch_size
                    .map_or("full".to_string(), |m| m.to_string()),
            ),
            ("seed", self.seed.to_string()),
            ("samples", self.samples.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn spec(&self, input_dim: usize, output_dim: usize) -> Result<NetworkSpec> {
        let mut widths = vec![input_dim];
        widths.extend(&self.hidden);
        widths.push(output_dim);
        Ok(NetworkSpec::new(widths, self.nonlinearity)?
            .with_scaled_features(self.scale_features)
            .with_output_bias(self.output_bias))
    }

    /// Input layer first, then one entry per hidden layer.
    pub fn keep_probs(&self) -> Vec<f64> {
        let mut p = vec![self.input_keep_prob];
        p.extend(std::iter::repeat_n(self.keep_prob, self.hidden.len()));
        p
    }

    pub fn prior(&self) -> LengthscalePrior {
        LengthscalePrior {
            lengthscale: self.lengthscale,
            bias_lengthscale: self.bias_lengthscale,
            k_scaling: self.k_scaling,
        }
    }

    /// Precision for `n` training points, derived from `weight_decay` when
    /// that is what the file gives.
    pub fn tau(&self, n: usize) -> Result<f64> {
        Ok(match self.precision {
            Precision::Tau(t) => t,
            Precision::WeightDecay(l) => tau_from_weight_decay(self.lengthscale, self.input_keep_prob, n, l)?,
        })
    }

    /// Decays implied by the precision and length-scales for `n` points.
    pub fn weight_decay(&self, spec: &NetworkSpec, n: usize) -> Result<(WeightDecay, f64)> {
        let tau = self.tau(n)?;
        let decay = lengthscale_weight_decay(spec, &self.keep_probs(), tau, n, &self.prior())?;
        Ok((decay, tau))
    }
}
