use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mcdropout::checkpoint::Checkpoint;
use mcdropout::data::{read_csv_path, sine_gap};
use mcdropout::nn::{forward_unmasked, ParamSet};
use mcdropout::uncertainty::predictive_log_likelihood;
use mcdropout::{Matrix, RngState};
use tempfile::TempDir;

fn mcdropout(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcdropout"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mcdropout(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: TempDir::new().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }
}

/// Parses the predictions CSV into a header and numeric rows.
fn read_table(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

const SMALL_REGRESSION: &str = "hidden = 8\nnonlinearity = tanh\ntau = 4\nkeep_prob = 0.8\niterations = 200\nbatch_size = 16\nsamples = 20\n";

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let ws = Workspace::new();
    let data = ws.path("sine.csv");
    ok(&["gen-data", "sine-gap", "--n", "40", "--out", s(&data)]);
    let cfg = ws.write("run.cfg", SMALL_REGRESSION);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let ckpt = ws.path(&format!("{run}.ckpt"));
        let pred = ws.path(&format!("{run}.csv"));
        ok(&["train", s(&data), "--config", s(&cfg), "--out", s(&ckpt)]);
        ok(&["predict", s(&ckpt), s(&data), "--config", s(&cfg), "--out", s(&pred)]);
        files.push([ckpt.clone(), PathBuf::from(format!("{}.losses.csv", s(&ckpt))), pred]);
    }
    for (a, b) in files[0].iter().zip(&files[1]) {
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), "{}", a.display());
    }
    let losses = std::fs::read_to_string(&files[0][1]).unwrap();
    assert_eq!(losses.lines().count(), 201);
    assert!(losses.starts_with("iteration,loss\n0,"));

    let other = ws.path("c.ckpt");
    ok(&["train", s(&data), "--config", s(&cfg), "--seed", "9", "--out", s(&other)]);
    assert_ne!(std::fs::read(&other).unwrap(), std::fs::read(&files[0][0]).unwrap());
}

#[test]
fn zero_iterations_keeps_the_initialisation() {
    let ws = Workspace::new();
    let data = ws.path("sine.csv");
    ok(&["gen-data", "sine-gap", "--n", "30", "--out", s(&data)]);
    let cfg = ws.write("run.cfg", "hidden = 5 4\ntau = 1\niterations = 0\nseed = 17\n");
    let ckpt_path = ws.path("m.ckpt");
    ok(&["train", s(&data), "--config", s(&cfg), "--out", s(&ckpt_path)]);
    let ckpt = Checkpoint::load(&ckpt_path).unwrap();
    let init = ParamSet::init_uniform(&ckpt.spec, &mut RngState::new(17, 0));
    assert_eq!(ckpt.params, init);
    assert_eq!(ckpt.spec.widths(), &[1, 5, 4, 1]);
}

#[test]
fn single_pass_without_dropout_is_deterministic_forward() {
    let ws = Workspace::new();
    let data = ws.path("sine.csv");
    ok(&["gen-data", "sine-gap", "--n", "25", "--out", s(&data)]);
    let cfg = ws.write(
        "run.cfg",
        "hidden = 6\nnonlinearity = tanh\ntau = 4\nkeep_prob = 1\niterations = 50\nbatch_size = full\n",
    );
    let ckpt_path = ws.path("m.ckpt");
    ok(&["train", s(&data), "--config", s(&cfg), "--out", s(&ckpt_path)]);
    let text = ok(&["predict", s(&ckpt_path), s(&data), "--samples", "1"]);
    let (header, rows) = read_table(&text);
    let (mean, std) = (column(&header, "mean"), column(&header, "std"));

    let ckpt = Checkpoint::load(&ckpt_path).unwrap();
    let table = read_csv_path(&data).unwrap();
    for (n, row) in rows.iter().enumerate() {
        let direct = forward_unmasked(&ckpt.spec, &ckpt.params, table.inputs.row(n)).unwrap();
        assert_eq!(row[mean], direct[0]);
        assert_eq!(row[std], 0.5);
    }
}

#[test]
fn loglik_column_matches_the_library() {
    let ws = Workspace::new();
    let data = ws.path("sine.csv");
    ok(&["gen-data", "sine-gap", "--n", "20", "--out", s(&data)]);
    let cfg = ws.write("run.cfg", SMALL_REGRESSION);
    let ckpt_path = ws.path("m.ckpt");
    ok(&["train", s(&data), "--config", s(&cfg), "--out", s(&ckpt_path)]);
    let text = ok(&["predict", s(&ckpt_path), s(&data), "--samples", "7", "--keep-samples"]);
    let (header, rows) = read_table(&text);
    let ll = column(&header, "loglik");
    let first = column(&header, "sample_1");
    assert_eq!(header.len(), first + 7);
    assert!(header.contains(&"percentile".to_string()));

    let tau = Checkpoint::load(&ckpt_path).unwrap().tau;
    let table = read_csv_path(&data).unwrap();
    let y = match table.targets.unwrap() {
        mcdropout::data::Targets::Regression(y) => y,
        _ => unreachable!(),
    };
    for (n, row) in rows.iter().enumerate() {
        let samples = Matrix::column(&row[first..]);
        let expected = predictive_log_likelihood(&samples, y.row(n), tau).unwrap();
        assert_eq!(row[ll], expected);
    }

    let unlabelled = ws.write("x.csv", "x_1\n0.5\n1.5\n");
    let (header, rows) = read_table(&ok(&["predict", s(&ckpt_path), s(&unlabelled)]));
    assert!(!header.contains(&"loglik".to_string()));
    assert_eq!(rows.len(), 2);
}

#[test]
fn malformed_rows_and_width_mismatch_fail() {
    let ws = Workspace::new();
    let bad = ws.write("bad.csv", "x_1,y_1\n0.1,0.2\n0.3,0.4\n0.5,oops\n");
    let ckpt = ws.path("m.ckpt");
    let out = mcdropout(&["train", s(&bad), "--out", s(&ckpt)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");

    let data = ws.path("sine.csv");
    ok(&["gen-data", "sine-gap", "--n", "20", "--out", s(&data)]);
    let cfg = ws.write("run.cfg", "tau = 1\niterations = 5\n");
    ok(&["train", s(&data), "--config", s(&cfg), "--out", s(&ckpt)]);
    let wide = ws.write("wide.csv", "x_1,x_2\n0,1\n");
    let out = mcdropout(&["predict", s(&ckpt), s(&wide)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("input columns"));
}

#[test]
fn check_exit_codes() {
    let out = mcdropout(&["check", "gradients"]);
    assert_eq!(out.status.code(), Some(0));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("PASS") && !table.contains("FAIL"), "{table}");
    assert!(table.contains("max relative error"));

    assert_eq!(mcdropout(&["check", "equivalence"]).status.code(), Some(0));
    let out = mcdropout(&["check", "no-such-suite"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(mcdropout(&["train"]).status.code(), Some(2));
}

#[test]
fn convert_prints_value_and_identity() {
    let text = ok(&["convert", "--lengthscale", "1", "--keep-prob", "1", "--n", "5", "--weight-decay", "1e-6"]);
    let mut lines = text.lines();
    let tau: f64 = lines.next().unwrap().strip_prefix("tau = ").unwrap().parse().unwrap();
    assert!((tau - 1e5).abs() <= 1e-15 * 1e5 * 4.0);
    assert!(lines.next().unwrap().contains("l^2 p_1 / (2 N lambda_1)"));

    let text = ok(&["convert", "--lengthscale", "2", "--keep-prob", "0.5", "--n", "10", "--tau", "0.25"]);
    assert!(text.starts_with("weight_decay = 0.4\n"), "{text}");

    let out = mcdropout(&["convert", "--lengthscale", "1", "--keep-prob", "1", "--n", "5", "--tau", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = mcdropout(&["convert", "--lengthscale", "1", "--keep-prob", "1", "--n", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn two_class_defaults_fit_the_training_set() {
    let ws = Workspace::new();
    let data = ws.path("two.csv");
    ok(&["gen-data", "two-class", "--out", s(&data)]);
    let cfg = ws.write("run.cfg", "task = classification\nweight_decay = 1e-6\n");
    let ckpt = ws.path("m.ckpt");
    let text = ok(&["train", s(&data), "--config", s(&cfg), "--out", s(&ckpt)]);
    let loss: f64 = text
        .trim()
        .strip_prefix("final training loss: ")
        .unwrap()
        .parse()
        .unwrap();
    assert!(loss < 0.1, "final loss {loss}");

    let (header, rows) = read_table(&ok(&["predict", s(&ckpt), s(&data)]));
    let (p1, p2) = (column(&header, "mean_1"), column(&header, "mean_2"));
    let ll = column(&header, "loglik");
    for r in &rows {
        assert!((r[p1] + r[p2] - 1.0).abs() < 1e-12);
        assert!(r[ll] <= 0.0);
    }
}

#[test]
fn sine_demo_is_more_uncertain_away_from_the_data() {
    let ws = Workspace::new();
    let data = ws.path("sine.csv");
    let grid = ws.path("grid.csv");
    ok(&["gen-data", "sine-gap", "--n", "200", "--seed", "1", "--out", s(&data)]);
    ok(&["gen-data", "grid", "--from", "-4", "--to", "9", "--step", "0.05", "--out", s(&grid)]);
    let cfg = ws.write(
        "run.cfg",
        "hidden = 50 50\nkeep_prob = 0.9\ntau = 100\niterations = 20000\nbatch_size = 32\nseed = 0\nsamples = 1000\n",
    );
    let ckpt = ws.path("m.ckpt");
    ok(&["train", s(&data), "--config", s(&cfg), "--out", s(&ckpt)]);
    let (header, rows) = read_table(&ok(&["predict", s(&ckpt), s(&grid), "--config", s(&cfg)]));
    let std = column(&header, "std");
    let xs: Vec<f64> = (0..rows.len()).map(|i| -4.0 + 0.05 * i as f64).collect();
    let mean_std = |keep: &dyn Fn(f64) -> bool| {
        let v: Vec<f64> = xs.iter().zip(&rows).filter(|(x, _)| keep(**x)).map(|(_, r)| r[std]).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let inside = mean_std(&sine_gap::in_training_region);
    let outside = mean_std(&|x| x >= sine_gap::EXTRAPOLATION.0 && x <= sine_gap::EXTRAPOLATION.1);
    assert!(outside > 1.5 * inside, "extrapolation {outside} vs training {inside}");
}
