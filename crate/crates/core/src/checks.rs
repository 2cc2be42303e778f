//! Self-check suites with fixed seeds, run by `mcdropout check <suite>`.
//!
//! Each suite re-derives a known identity or oracle value and reports one
//! row per check.

use std::fmt;
use std::str::FromStr;

use crate::data::Dataset;
use crate::error::{contract, Error, Result};
use crate::gp::{
    deep_two_layer_sample, gp_mc_objective_classification, gp_mc_objective_regression, gp_output,
    gp_weight_decay_classification, gp_weight_decay_regression, reparametrise, DeepGpConfig,
    ReparamDraw,
};
use crate::kl::{analytic_gaussian_kl, kl_mog_approx, mc_kl_oracle, Covariance, MixtureSpec};
use crate::nn::{
    dropout_cost, forward, gradients, sample_masks_per_point, MaskSet, NetworkSpec, Nonlinearity,
    ParamSet, WeightDecay,
};
use crate::numerics::{mean_and_std_error, sample_gaussian_matrix, Matrix, RngState};
use crate::uncertainty::{enumerate_masks_oracle, mc_predict, moment_std_errors, McConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Equivalence,
    Kl,
    McOracle,
    Gradients,
    DeepGp,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Equivalence,
        Suite::Kl,
        Suite::McOracle,
        Suite::Gradients,
        Suite::DeepGp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Equivalence => "equivalence",
            Suite::Kl => "kl",
            Suite::McOracle => "mc-oracle",
            Suite::Gradients => "gradients",
            Suite::DeepGp => "deep-gp",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| contract(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub rows: Vec<CheckRow>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.rows.push(CheckRow {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
        writeln!(f, "suite {}", self.suite)?;
        for r in &self.rows {
            let status = if r.passed { "PASS" } else { "FAIL" };
            writeln!(f, "  {status}  {:width$}  {}", r.name, r.detail)?;
        }
        write!(
            f,
            "{} of {} checks passed",
            self.rows.iter().filter(|r| r.passed).count(),
            self.rows.len()
        )
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport {
        suite,
        rows: Vec::new(),
    };
    let mut rng = RngState::new(seed, 0);
    match suite {
        Suite::Equivalence => equivalence(&mut report, &mut rng)?,
        Suite::Kl => kl(&mut report, &mut rng)?,
        Suite::McOracle => mc_oracle(&mut report, &mut rng)?,
        Suite::Gradients => gradient_suite(&mut report, &mut rng)?,
        Suite::DeepGp => deep_gp(&mut report, &mut rng)?,
    }
    Ok(report)
}

/// A random network with `Q, K, D <= 8`, nonzero biases and keep
/// probabilities in `[0.3, 1]`.
fn random_network(rng: &mut RngState, classes: Option<usize>) -> Result<(NetworkSpec, ParamSet, Vec<f64>)> {
    let hidden = 1 + rng.below(2);
    let mut widths = vec![1 + rng.below(8)];
    widths.extend((0..hidden).map(|_| 1 + rng.below(8)));
    widths.push(classes.unwrap_or_else(|| 1 + rng.below(8)));
    let nl = [Nonlinearity::Relu, Nonlinearity::Tanh, Nonlinearity::Identity][rng.below(3)];
    let spec = NetworkSpec::new(widths, nl)?.with_scaled_features(rng.bernoulli(0.5));
    let mut params = ParamSet::init_uniform(&spec, rng);
    for b in params.biases.iter_mut() {
        for v in b.iter_mut() {
            *v = 0.5 * rng.normal();
        }
    }
    let keep = (0..spec.num_weight_layers())
        .map(|_| rng.uniform_range(0.3, 1.0))
        .collect();
    Ok((spec, params, keep))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn equivalence(report: &mut SuiteReport, rng: &mut RngState) -> Result<()> {
    let taus = [0.1, 1.0, 10.0];
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let (spec, params, keep) = random_network(rng, None)?;
        let n = 1 + rng.below(32);
        let x = sample_gaussian_matrix(n, spec.input_dim(), 0.0, 1.0, rng)?;
        let y = sample_gaussian_matrix(n, spec.output_dim(), 0.0, 1.0, rng)?;
        let data = Dataset::regression(x, y)?;
        let masks = sample_masks_per_point(&spec, &keep, n, rng)?;
        let tau = taus[i % 3];
        let obj = gp_mc_objective_regression(&spec, &params, &keep, tau, &data, &masks)?;
        let decay = gp_weight_decay_regression(&spec, &keep, tau, n)?;
        worst = worst.max(rel(dropout_cost(&spec, &params, &decay, &data, &masks)?, -obj));
    }
    report.push(
        "regression cost = -GP-MC objective",
        worst <= 1e-10,
        format!("max relative error {worst:.2e} over 100 instances"),
    );

    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let classes = 2 + rng.below(7);
        let (spec, params, keep) = random_network(rng, Some(classes))?;
        let n = 1 + rng.below(32);
        let x = sample_gaussian_matrix(n, spec.input_dim(), 0.0, 1.0, rng)?;
        let labels = (0..n).map(|_| 1 + rng.below(classes)).collect();
        let data = Dataset::classification(x, labels, classes)?;
        let masks = sample_masks_per_point(&spec, &keep, n, rng)?;
        let obj = gp_mc_objective_classification(&spec, &params, &keep, &data, &masks)?;
        let decay = gp_weight_decay_classification(&spec, &keep, n)?;
        worst = worst.max(rel(dropout_cost(&spec, &params, &decay, &data, &masks)?, -obj));
    }
    report.push(
        "softmax cost = -GP-MC objective",
        worst <= 1e-10,
        format!("max relative error {worst:.2e} over 100 instances"),
    );

    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let (spec, params, keep) = random_network(rng, None)?;
        let spec = spec.with_scaled_features(true);
        let masks = MaskSet::sample(&spec, &keep, rng)?;
        let x = sample_gaussian_matrix(1, spec.input_dim(), 0.0, 1.0, rng)?.into_vec();
        let realised = reparametrise(&spec, &params, &ReparamDraw::collapsed(&spec, masks.clone()))?;
        let a = gp_output(&spec, &realised, &x)?;
        let b = forward(&spec, &params, &masks, &x)?;
        for (a, b) in a.iter().zip(&b) {
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    report.push(
        "collapsed GP forward = network forward",
        worst <= 1e-15,
        format!("max difference {worst:.2e} over 50 instances"),
    );
    Ok(())
}

fn random_spd(k: usize, rng: &mut RngState) -> Result<Matrix> {
    let a = sample_gaussian_matrix(k, k, 0.0, 1.0 / (k as f64).sqrt(), rng)?;
    let mut s = a.matmul(&a.transpose())?;
    for i in 0..k {
        for j in 0..i {
            let v = s[(i, j)];
            s.as_mut_slice()[j * k + i] = v;
        }
        s.as_mut_slice()[i * k + i] += 0.5;
    }
    Ok(s)
}

fn kl(report: &mut SuiteReport, rng: &mut RngState) -> Result<()> {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let k = 1 + rng.below(64);
        let mu = sample_gaussian_matrix(1, k, 0.0, 1.0, rng)?.into_vec();
        let cov = Covariance::Full(random_spd(k, rng)?);
        let q = MixtureSpec::single(mu.clone(), cov.clone())?;
        let diff = kl_mog_approx(&q)? - analytic_gaussian_kl(&mu, &cov, 1.0)?;
        worst = worst.max((diff + k as f64 / 2.0 * ln_2pi).abs());
    }
    report.push(
        "single component: approx - exact = -(K/2) log 2pi",
        worst <= 1e-12,
        format!("max deviation {worst:.2e} over 50 draws"),
    );

    let k = 5;
    let means = (0..3)
        .map(|_| sample_gaussian_matrix(1, k, 0.0, 1.0, rng).map(Matrix::into_vec))
        .collect::<Result<Vec<_>>>()?;
    let q = MixtureSpec::new(
        vec![0.2, 0.3, 0.5],
        means,
        vec![
            Covariance::Isotropic(0.3),
            Covariance::Diagonal(vec![0.1, 0.2, 0.3, 0.4, 0.5]),
            Covariance::Full(random_spd(k, rng)?),
        ],
    )?;
    let a = kl_mog_approx(&q)?;
    let b = kl_mog_approx(&q.permuted(&[2, 0, 1])?)?;
    report.push(
        "approximation is permutation invariant",
        (a - b).abs() <= 1e-12,
        format!("difference {:.2e}", (a - b).abs()),
    );

    let mu = sample_gaussian_matrix(1, 6, 0.0, 1.0, rng)?.into_vec();
    let cov = Covariance::Full(random_spd(6, rng)?);
    let exact = analytic_gaussian_kl(&mu, &cov, 1.5)?;
    let est = mc_kl_oracle(&MixtureSpec::single(mu, cov)?, 1.5, 200_000, rng)?;
    let z = (est.estimate - exact).abs() / est.std_error;
    report.push(
        "Monte Carlo KL matches analytic KL",
        z <= 3.0,
        format!("estimate {:.5} vs {exact:.5} ({z:.2} std errors)", est.estimate),
    );
    Ok(())
}

fn mc_oracle(report: &mut SuiteReport, rng: &mut RngState) -> Result<()> {
    let spec = NetworkSpec::new(vec![2, 4, 4, 2], Nonlinearity::Relu)?;
    let mut params = ParamSet::init_uniform(&spec, rng);
    for b in params.biases.iter_mut() {
        for v in b.iter_mut() {
            *v = 0.2 * rng.normal();
        }
    }
    let keep = vec![0.9, 0.7, 0.6];
    let tau = 4.0;
    let x = [0.7, -1.2];
    let exact = enumerate_masks_oracle(&spec, &params, &keep, tau, &x)?;
    let cfg = McConfig::new(100_000, rng.next_u64(), keep, tau);
    let mc = mc_predict(&spec, &params, &cfg, &x)?;
    let se = moment_std_errors(mc.samples.as_ref().expect("samples kept"))?;
    let mut worst = 0.0_f64;
    for d in 0..2 {
        worst = worst.max((mc.mean[d] - exact.mean[d]).abs() / se.mean[d]);
        for e in 0..2 {
            worst = worst.max((mc.covariance[(d, e)] - exact.covariance[(d, e)]).abs() / se.covariance[(d, e)]);
        }
    }
    report.push(
        "MC moments match exhaustive enumeration",
        worst <= 3.0,
        format!("largest deviation {worst:.2} std errors (T = 100000, 10 mask bits)"),
    );
    let floor = (0..2).all(|d| mc.second_moment[(d, d)] >= 1.0 / tau);
    report.push("second-moment diagonal >= 1/tau", floor, String::new());

    let cfg = McConfig::new(10, 1, vec![1.0; 3], tau);
    let det = mc_predict(&spec, &params, &cfg, &x)?;
    let collapsed = det.covariance == Matrix::identity(2).scale(1.0 / tau);
    report.push("keep-all covariance = (1/tau) I", collapsed, String::new());
    Ok(())
}

/// Largest relative error between the analytic gradient and central
/// differences, with relative errors floored at `1e-3` in the denominator.
pub fn gradient_error(
    spec: &NetworkSpec,
    params: &ParamSet,
    decay: &WeightDecay,
    data: &Dataset,
    masks: &[MaskSet],
    h: f64,
) -> Result<f64> {
    let (_, g) = gradients(spec, params, decay, data, masks)?;
    let base = params.to_flat();
    let mut worst = 0.0_f64;
    for (k, a) in g.to_flat().into_iter().enumerate() {
        let mut plus = base.clone();
        plus[k] += h;
        let mut minus = base.clone();
        minus[k] -= h;
        let fp = dropout_cost(spec, &params.with_flat(&plus)?, decay, data, masks)?;
        let fm = dropout_cost(spec, &params.with_flat(&minus)?, decay, data, masks)?;
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-3));
    }
    Ok(worst)
}

fn gradient_suite(report: &mut SuiteReport, rng: &mut RngState) -> Result<()> {
    let mut worst = 0.0_f64;
    let mut zeros_ok = true;
    for i in 0..20 {
        let classification = i % 2 == 1;
        let classes = 2 + rng.below(3);
        let (spec, params, keep) = random_network(rng, classification.then_some(classes))?;
        let n = 2 + rng.below(6);
        let x = sample_gaussian_matrix(n, spec.input_dim(), 0.0, 1.0, rng)?;
        let data = if classification {
            Dataset::classification(x, (0..n).map(|_| 1 + rng.below(classes)).collect(), classes)?
        } else {
            Dataset::regression(x, sample_gaussian_matrix(n, spec.output_dim(), 0.0, 1.0, rng)?)?
        };
        let mut masks = sample_masks_per_point(&spec, &keep, n, rng)?;
        // one input unit dropped everywhere: its weight row must get no gradient
        let dropped = rng.below(spec.input_dim());
        for m in masks.iter_mut() {
            m.masks[0][dropped] = 0.0;
        }
        let decay = WeightDecay {
            weights: vec![0.0; spec.num_weight_layers()],
            biases: vec![0.01; spec.num_hidden_layers()],
            output_bias: 0.0,
        };
        worst = worst.max(gradient_error(&spec, &params, &decay, &data, &masks, 1e-6)?);
        let (_, g) = gradients(&spec, &params, &decay, &data, &masks)?;
        zeros_ok &= g.weights[0].row(dropped).iter().all(|&v| v == 0.0);
    }
    report.push(
        "analytic gradient vs central differences",
        worst < 1e-5,
        format!("max relative error {worst:.2e} over 20 networks (h = 1e-6)"),
    );
    report.push("dropped rows receive exactly zero gradient", zeros_ok, String::new());
    Ok(())
}

fn deep_gp(report: &mut SuiteReport, rng: &mut RngState) -> Result<()> {
    let x = sample_gaussian_matrix(6, 2, 0.0, 1.0, rng)?;
    let cfg = DeepGpConfig::new(4, 3, 1, Nonlinearity::Tanh);
    let sample = deep_two_layer_sample(&cfg, &x, rng)?;
    let phi1 = &sample.phi1;
    let target = phi1.matmul(&phi1.transpose())?;
    let draws = 100_000;
    let mut columns = Vec::with_capacity(draws * 3);
    for _ in 0..draws {
        let w2 = sample_gaussian_matrix(4, 3, 0.0, 1.0, rng)?;
        let f1 = phi1.matmul(&w2)?;
        for c in 0..3 {
            columns.push((0..6).map(|n| f1[(n, c)]).collect::<Vec<f64>>());
        }
    }
    let mut worst_mean = 0.0_f64;
    let mut worst_cov = 0.0_f64;
    for i in 0..6 {
        let (m, se) = mean_and_std_error(&columns.iter().map(|c| c[i]).collect::<Vec<_>>());
        worst_mean = worst_mean.max(m.abs() / se);
        for j in 0..6 {
            let prods: Vec<f64> = columns.iter().map(|c| c[i] * c[j]).collect();
            let (c, se) = mean_and_std_error(&prods);
            worst_cov = worst_cov.max((c - target[(i, j)]).abs() / se);
        }
    }
    report.push(
        "E[F1] = 0",
        worst_mean <= 3.0,
        format!("largest |mean| {worst_mean:.2} std errors"),
    );
    report.push(
        "Cov(F1) = Phi1 Phi1^T",
        worst_cov <= 3.0,
        format!("largest deviation {worst_cov:.2} std errors"),
    );
    Ok(())
}
