use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use log::info;
use mcdropout::checkpoint::Checkpoint;
use mcdropout::checks::{run_suite, Suite};
use mcdropout::data::{self, read_csv_path, Dataset, Targets, Task};
use mcdropout::gp::{tau_from_weight_decay, weight_decay_from_tau};
use mcdropout::nn::{euclidean_loss, forward_unmasked, sgd_train, softmax_loss, ParamSet};
use mcdropout::uncertainty::{
    calibration_percentile, mc_samples, predictive_log_likelihood, CalibrationTable, McConfig,
    PredictiveSummary,
};
use mcdropout::{logsumexp, Matrix, RngState};

use crate::config::RunConfig;

/// MC dropout networks with predictive uncertainty.
///
/// Set MCDROPOUT_LOG (error, warn, info, debug) for log output on stderr.
#[derive(Debug, Parser)]
#[command(name = "mcdropout", version)]
pub struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of stochastic forward passes T.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Output file; stdout when omitted, where the command allows it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network and write a checkpoint to --out.
    Train {
        /// Training data CSV.
        data: PathBuf,
        /// Iteration/loss CSV; defaults to `<out>.losses.csv`.
        #[arg(long)]
        losses: Option<PathBuf>,
    },
    /// MC dropout predictions for every row of a CSV.
    Predict {
        checkpoint: PathBuf,
        data: PathBuf,
        /// Append the raw stochastic outputs as extra columns.
        #[arg(long)]
        keep_samples: bool,
    },
    /// Convert between weight decay and model precision.
    Convert(ConvertArgs),
    /// Run a self-check suite.
    Check {
        #[arg(value_parser = parse_suite)]
        suite: Suite,
    },
    /// Write a bundled synthetic dataset as CSV.
    GenData {
        #[arg(value_enum)]
        kind: DataKind,
        /// Number of rows (sine-gap, two-class).
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Grid start.
        #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
        from: f64,
        /// Grid end, inclusive.
        #[arg(long, default_value_t = 9.0, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
    },
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("given").required(true).args(["weight_decay", "tau"])))]
pub struct ConvertArgs {
    #[arg(long)]
    pub lengthscale: f64,
    /// First-layer keep probability p_1.
    #[arg(long)]
    pub keep_prob: f64,
    /// Number of training points N.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    SineGap,
    TwoClass,
    /// Unlabelled 1-d inputs on an even grid.
    Grid,
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.samples {
        if t == 0 {
            bail!("--samples must be positive");
        }
        cfg.samples = t;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Train { data, losses } => {
            let out = out.context("train needs --out for the checkpoint")?;
            let losses = losses.unwrap_or_else(|| {
                let mut s = out.as_os_str().to_owned();
                s.push(".losses.csv");
                PathBuf::from(s)
            });
            cmd_train(&cfg, &data, out, &losses)?;
        }
        Command::Predict {
            checkpoint,
            data,
            keep_samples,
        } => cmd_predict(&cfg, &checkpoint, &data, keep_samples, out)?,
        Command::Convert(args) => cmd_convert(&args, out)?,
        Command::Check { suite } => return cmd_check(suite, cli.seed.unwrap_or(0), out),
        Command::GenData {
            kind,
            n,
            from,
            to,
            step,
        } => cmd_gen_data(kind, n, from, to, step, cfg.seed, out)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn load_dataset(path: &Path) -> Result<mcdropout::data::Table> {
    read_csv_path(path).with_context(|| format!("reading {}", path.display()))
}

pub fn cmd_train(cfg: &RunConfig, data_path: &Path, out: &Path, losses_path: &Path) -> Result<()> {
    let data = load_dataset(data_path)?.into_dataset()?;
    if data.task() != cfg.task {
        bail!(
            "config task is {} but {} holds {} targets",
            cfg.task,
            data_path.display(),
            data.task()
        );
    }
    let spec = cfg.spec(data.input_dim(), data.targets.output_dim())?;
    let keep = cfg.keep_probs();
    let (decay, tau) = cfg.weight_decay(&spec, data.len())?;
    let mut schedule = cfg.schedule.clone();
    schedule.batch_size = schedule.batch_size.map(|m| m.min(data.len()));

    let init = ParamSet::init_uniform(&spec, &mut RngState::new(cfg.seed, 0));
    info!(
        "training {:?} on {} points, tau {tau}, {} iterations",
        spec.widths(),
        data.len(),
        schedule.iterations
    );
    let trained = sgd_train(&spec, &init, &decay, &keep, &data, &schedule, &mut RngState::new(cfg.seed, 1))?;

    let mut w = output(Some(losses_path))?;
    writeln!(w, "iteration,loss")?;
    for (i, l) in trained.losses.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    w.flush()?;

    let mut ckpt = Checkpoint {
        task: cfg.task,
        spec,
        params: trained.params,
        keep_probs: keep,
        tau,
        calibration: None,
    };
    let mc = McConfig::new(cfg.samples, cfg.seed, ckpt.keep_probs.clone(), tau);
    let summaries = summarise(&ckpt, &mc, &data.inputs)?;
    ckpt.calibration = Some(CalibrationTable::from_summaries(&summaries)?);
    ckpt.save(out).with_context(|| format!("writing {}", out.display()))?;

    let loss = training_loss(&ckpt, &data)?;
    println!("final training loss: {loss}");
    Ok(())
}

/// Data loss of the weight-averaged network on the full training set.
pub fn training_loss(ckpt: &Checkpoint, data: &Dataset) -> Result<f64> {
    let scaled = ckpt.params.scale_weights(&ckpt.keep_probs);
    let rows = data
        .inputs
        .row_iter()
        .map(|x| forward_unmasked(&ckpt.spec, &scaled, x))
        .collect::<mcdropout::Result<Vec<_>>>()?;
    let outputs = Matrix::from_rows(&rows)?;
    Ok(match &data.targets {
        Targets::Regression(y) => euclidean_loss(y, &outputs)?,
        Targets::Classification { labels, .. } => softmax_loss(&outputs, labels)?,
    })
}

/// Per-row predictive summaries: Gaussian moments for regression, class
/// probabilities for classification.
pub fn summarise(ckpt: &Checkpoint, mc: &McConfig, inputs: &Matrix) -> Result<Vec<PredictiveSummary>> {
    if inputs.cols() != ckpt.spec.input_dim() {
        bail!(
            "data has {} input columns but the network expects {}",
            inputs.cols(),
            ckpt.spec.input_dim()
        );
    }
    (0..inputs.rows())
        .map(|n| {
            let s = mc_samples(&ckpt.spec, &ckpt.params, mc, inputs.row(n), n as u64)?;
            Ok(match ckpt.task {
                Task::Regression => PredictiveSummary::from_samples(s, mc.tau)?,
                Task::Classification => PredictiveSummary::from_logit_samples(s)?,
            })
        })
        .collect()
}

pub fn cmd_predict(
    cfg: &RunConfig,
    checkpoint: &Path,
    data_path: &Path,
    keep_samples: bool,
    out: Option<&Path>,
) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?;
    let table = load_dataset(data_path)?;
    let mc = McConfig::new(cfg.samples, cfg.seed, ckpt.keep_probs.clone(), ckpt.tau);
    let summaries = summarise(&ckpt, &mc, &table.inputs)?;
    let d = ckpt.spec.output_dim();
    if let Some(t) = &table.targets {
        let ok = match (t, ckpt.task) {
            (Targets::Regression(y), Task::Regression) => y.cols() == d,
            (Targets::Classification { classes, .. }, Task::Classification) => *classes <= d,
            _ => false,
        };
        if !ok {
            bail!("targets in {} do not match the checkpoint's outputs", data_path.display());
        }
    }

    let mut w = output(out)?;
    let mut header = vec!["id".to_string()];
    let suffix = |k: usize| if d == 1 { String::new() } else { format!("_{}", k + 1) };
    header.extend((0..d).map(|k| format!("mean{}", suffix(k))));
    header.extend((0..d).map(|k| format!("std{}", suffix(k))));
    if ckpt.calibration.is_some() {
        header.push("percentile".into());
    }
    if table.targets.is_some() {
        header.push("loglik".into());
    }
    if keep_samples {
        for t in 0..cfg.samples {
            header.extend((0..d).map(|k| format!("sample_{}{}", t + 1, suffix(k))));
        }
    }
    writeln!(w, "{}", header.join(","))?;

    for (n, s) in summaries.iter().enumerate() {
        let mut row = vec![n.to_string()];
        row.extend(s.mean.iter().map(f64::to_string));
        row.extend(s.std_devs.iter().map(f64::to_string));
        if let Some(c) = &ckpt.calibration {
            row.push(calibration_percentile(c, s.uncertainty())?.to_string());
        }
        let samples = s.samples.as_ref().expect("summaries keep their samples");
        match &table.targets {
            Some(Targets::Regression(y)) => {
                row.push(predictive_log_likelihood(samples, y.row(n), ckpt.tau)?.to_string());
            }
            Some(Targets::Classification { labels, .. }) => {
                let logs: Vec<f64> = samples.row_iter().map(|p| p[labels[n] - 1].ln()).collect();
                let ll = logsumexp(&logs)? - (logs.len() as f64).ln();
                row.push(ll.to_string());
            }
            None => {}
        }
        if keep_samples {
            row.extend(samples.as_slice().iter().map(f64::to_string));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_convert(args: &ConvertArgs, out: Option<&Path>) -> Result<()> {
    let (l, p, n) = (args.lengthscale, args.keep_prob, args.n);
    let mut w = output(out)?;
    match (args.weight_decay, args.tau) {
        (Some(lambda), None) => {
            let tau = tau_from_weight_decay(l, p, n, lambda)?;
            writeln!(w, "tau = {tau}")?;
            writeln!(w, "tau = l^2 p_1 / (2 N lambda_1) = {l}^2 * {p} / (2 * {n} * {lambda}) = {tau}")?;
        }
        (None, Some(tau)) => {
            let lambda = weight_decay_from_tau(l, p, n, tau)?;
            writeln!(w, "weight_decay = {lambda}")?;
            writeln!(w, "lambda_1 = l^2 p_1 / (2 N tau) = {l}^2 * {p} / (2 * {n} * {tau}) = {lambda}")?;
        }
        _ => unreachable!("clap requires exactly one of --weight-decay and --tau"),
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_check(suite: Suite, seed: u64, out: Option<&Path>) -> Result<ExitCode> {
    let report = run_suite(suite, seed)?;
    let mut w = output(out)?;
    writeln!(w, "{report}")?;
    w.flush()?;
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

pub fn cmd_gen_data(
    kind: DataKind,
    n: usize,
    from: f64,
    to: f64,
    step: f64,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let w = output(out)?;
    match kind {
        DataKind::SineGap => data::write_csv(&data::sine_with_gap(n, seed), w)?,
        DataKind::TwoClass => data::write_csv(&data::two_class(n, seed), w)?,
        DataKind::Grid => {
            if !(step > 0.0 && to >= from) {
                bail!("grid needs step > 0 and --to >= --from");
            }
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["x_1"])?;
            let count = ((to - from) / step + 1e-9).floor() as usize + 1;
            for i in 0..count {
                csv.write_record([(from + i as f64 * step).to_string()])?;
            }
            csv.flush()?;
        }
    }
    Ok(())
}
