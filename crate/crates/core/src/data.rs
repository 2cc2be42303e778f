//! Datasets, the headered CSV format, and the bundled synthetic generators.
//!
//! CSV layout: one header row. Columns named `y_*` are regression targets, a
//! column named `label` holds 1-based class labels, every other column is an
//! input feature. A file carries either `y_*` columns or `label`, not both; a
//! file with neither is an unlabelled input set (used for prediction).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{contract, Error, Result};
use crate::numerics::{Matrix, RngState};

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Regression(Matrix),
    /// 1-based labels in `1..=classes`.
    Classification { labels: Vec<usize>, classes: usize },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Regression(y) => y.rows(),
            Targets::Classification { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Output width the network needs for these targets.
    pub fn output_dim(&self) -> usize {
        match self {
            Targets::Regression(y) => y.cols(),
            Targets::Classification { classes, .. } => *classes,
        }
    }

    pub fn select(&self, indices: &[usize]) -> Targets {
        match self {
            Targets::Regression(y) => Targets::Regression(y.select_rows(indices)),
            Targets::Classification { labels, classes } => Targets::Classification {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                classes: *classes,
            },
        }
    }
}

/// What the network's output is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Task {
    #[default]
    Regression,
    Classification,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(contract(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Targets,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Targets) -> Result<Self> {
        if inputs.rows() != targets.len() {
            return Err(contract(format!(
                "{} input rows but {} targets",
                inputs.rows(),
                targets.len()
            )));
        }
        if let Targets::Classification { labels, classes } = &targets {
            if let Some(bad) = labels.iter().find(|&&c| c == 0 || c > *classes) {
                return Err(contract(format!("label {bad} outside 1..={classes}")));
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn regression(inputs: Matrix, outputs: Matrix) -> Result<Self> {
        Self::new(inputs, Targets::Regression(outputs))
    }

    pub fn classification(inputs: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        Self::new(inputs, Targets::Classification { labels, classes })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self.targets {
            Targets::Regression(_) => Task::Regression,
            Targets::Classification { .. } => Task::Classification,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select_rows(indices),
            targets: self.targets.select(indices),
        }
    }
}

/// A parsed CSV file. `targets` is `None` for unlabelled inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub input_names: Vec<String>,
    pub target_names: Vec<String>,
    pub inputs: Matrix,
    pub targets: Option<Targets>,
}

impl Table {
    pub fn into_dataset(self) -> Result<Dataset> {
        let targets = self
            .targets
            .ok_or_else(|| contract("data file has no `y_*` or `label` columns"))?;
        Dataset::new(self.inputs, targets)
    }
}

pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Table> {
    read_csv(std::fs::File::open(path)?)
}

/// Parses the headered CSV format.
///
/// The class count for `label` columns is the largest label seen. Errors name
/// the 1-based file line of the offending row.
pub fn read_csv<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut input_cols = Vec::new();
    let mut target_cols = Vec::new();
    let mut label_col = None;
    for (i, name) in header.iter().enumerate() {
        if name == "label" {
            label_col = Some(i);
        } else if name.starts_with("y_") {
            target_cols.push(i);
        } else {
            input_cols.push(i);
        }
    }
    if label_col.is_some() && !target_cols.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "header mixes `label` with `y_*` columns".into(),
        });
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column `{}`: cannot parse {raw:?} as a number", &header[i]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column `{}`: non-finite value", &header[i]),
                });
            }
            Ok(v)
        };
        for &i in &input_cols {
            xs.push(field(i)?);
        }
        for &i in &target_cols {
            ys.push(field(i)?);
        }
        if let Some(i) = label_col {
            let raw = record.get(i).unwrap_or("");
            let c: usize = raw.parse().ok().filter(|&c| c >= 1).ok_or_else(|| Error::Parse {
                line,
                message: format!("label {raw:?} is not a 1-based class index"),
            })?;
            labels.push(c);
        }
        n += 1;
    }
    let inputs = Matrix::from_vec(n, input_cols.len(), xs)?;
    let targets = if label_col.is_some() {
        let classes = labels.iter().copied().max().unwrap_or(1);
        Some(Targets::Classification { labels, classes })
    } else if !target_cols.is_empty() {
        Some(Targets::Regression(Matrix::from_vec(n, target_cols.len(), ys)?))
    } else {
        None
    };
    Ok(Table {
        input_names: input_cols.iter().map(|&i| header[i].to_string()).collect(),
        target_names: if label_col.is_some() {
            vec!["label".into()]
        } else {
            target_cols.iter().map(|&i| header[i].to_string()).collect()
        },
        inputs,
        targets,
    })
}

pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let q = dataset.input_dim();
    let mut header: Vec<String> = (1..=q).map(|i| format!("x_{i}")).collect();
    match &dataset.targets {
        Targets::Regression(y) => header.extend((1..=y.cols()).map(|i| format!("y_{i}"))),
        Targets::Classification { .. } => header.push("label".into()),
    }
    w.write_record(&header)?;
    for n in 0..dataset.len() {
        let mut rec: Vec<String> = dataset.inputs.row(n).iter().map(|v| v.to_string()).collect();
        match &dataset.targets {
            Targets::Regression(y) => rec.extend(y.row(n).iter().map(|v| v.to_string())),
            Targets::Classification { labels, .. } => rec.push(labels[n].to_string()),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Region boundaries of the sine-with-gap demo.
pub mod sine_gap {
    /// Training inputs are drawn from `[LEFT.0, LEFT.1] ∪ [RIGHT.0, RIGHT.1]`.
    pub const LEFT: (f64, f64) = (-4.0, -1.0);
    pub const RIGHT: (f64, f64) = (1.0, 4.0);
    /// The gap between the two training intervals.
    pub const GAP: (f64, f64) = (-1.0, 1.0);
    /// Extrapolation band to the right of all training data.
    pub const EXTRAPOLATION: (f64, f64) = (6.0, 9.0);
    pub const NOISE_STD: f64 = 0.1;

    pub fn in_training_region(x: f64) -> bool {
        (LEFT.0..=LEFT.1).contains(&x) || (RIGHT.0..=RIGHT.1).contains(&x)
    }
}

/// `y = sin(x) + noise`, with `x` uniform on two intervals separated by a gap.
pub fn sine_with_gap(n: usize, seed: u64) -> Dataset {
    use sine_gap::*;
    let mut rng = RngState::new(seed, 0);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = if i % 2 == 0 { LEFT } else { RIGHT };
        let x = rng.uniform_range(lo, hi);
        xs.push(x);
        ys.push(x.sin() + NOISE_STD * rng.normal());
    }
    Dataset::regression(Matrix::column(&xs), Matrix::column(&ys))
        .expect("generator shapes agree")
}

/// Two Gaussian blobs in the plane, labelled 1 and 2, separated along the
/// diagonal with a clear margin.
pub fn two_class(n: usize, seed: u64) -> Dataset {
    let mut rng = RngState::new(seed, 1);
    let mut x = Matrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = 1 + i % 2;
        let centre = if class == 1 { -1.5 } else { 1.5 };
        x[(i, 0)] = centre + 0.5 * rng.normal();
        x[(i, 1)] = centre + 0.5 * rng.normal();
        labels.push(class);
    }
    Dataset::classification(x, labels, 2).expect("generator shapes agree")
}
