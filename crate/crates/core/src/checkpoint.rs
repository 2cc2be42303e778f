//! Plain-text checkpoints of a trained network.
//!
//! ```text
//! mcdropout-checkpoint v1
//! task regression
//! widths 1 50 50 1
//! nonlinearity relu
//! scale_features false
//! output_bias true
//! keep_probs 0.75 0.75 0.75
//! tau 10
//! calibration 3 0.1 0.15 0.4
//! weight 0 1 50
//! <one line per row>
//! bias 0 50
//! <one line>
//! output_bias_values 1
//! <one line>
//! end
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so a save/load cycle
//! reproduces every parameter bit for bit. `calibration none` marks a
//! checkpoint without a calibration table.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::data::Task;
use crate::error::{Error, Result};
use crate::nn::{validate_keep_probs, NetworkSpec, Nonlinearity, ParamSet};
use crate::numerics::Matrix;
use crate::uncertainty::CalibrationTable;

const MAGIC: &str = "mcdropout-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub task: Task,
    pub spec: NetworkSpec,
    pub params: ParamSet,
    pub keep_probs: Vec<f64>,
    pub tau: f64,
    pub calibration: Option<CalibrationTable>,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

impl Checkpoint {
    pub fn validate(&self) -> Result<()> {
        self.params.validate(&self.spec)?;
        validate_keep_probs(&self.spec, &self.keep_probs)?;
        if !(self.tau > 0.0) {
            return Err(crate::error::domain(format!("precision tau = {} must be positive", self.tau)));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "task {}", self.task)?;
        let widths: Vec<String> = self.spec.widths().iter().map(|k| k.to_string()).collect();
        writeln!(w, "widths {}", widths.join(" "))?;
        writeln!(w, "nonlinearity {}", self.spec.nonlinearity)?;
        writeln!(w, "scale_features {}", self.spec.scale_features)?;
        writeln!(w, "output_bias {}", self.spec.output_bias)?;
        writeln!(w, "keep_probs {}", join(&self.keep_probs))?;
        writeln!(w, "tau {}", self.tau)?;
        match &self.calibration {
            Some(t) => writeln!(w, "calibration {} {}", t.len(), join(t.values()))?,
            None => writeln!(w, "calibration none")?,
        }
        for (i, m) in self.params.weights.iter().enumerate() {
            writeln!(w, "weight {i} {} {}", m.rows(), m.cols())?;
            for r in m.row_iter() {
                writeln!(w, "{}", join(r))?;
            }
        }
        for (i, b) in self.params.biases.iter().enumerate() {
            writeln!(w, "bias {i} {}", b.len())?;
            writeln!(w, "{}", join(b))?;
        }
        if let Some(b) = &self.params.output_bias {
            writeln!(w, "output_bias_values {}", b.len())?;
            writeln!(w, "{}", join(b))?;
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self> {
        let mut lines = Lines::new(reader);
        let first = lines.next_line()?;
        if first != MAGIC {
            return Err(lines.error(format!("expected '{MAGIC}', found '{first}'")));
        }
        let task: Task = lines.field("task")?;
        let widths: Vec<usize> = lines.list("widths")?;
        let nonlinearity: Nonlinearity = lines.field("nonlinearity")?;
        let scale: bool = lines.field("scale_features")?;
        let output_bias: bool = lines.field("output_bias")?;
        let spec = NetworkSpec::new(widths, nonlinearity)
            .map_err(|e| lines.error(e.to_string()))?
            .with_scaled_features(scale)
            .with_output_bias(output_bias);
        let keep_probs: Vec<f64> = lines.list("keep_probs")?;
        let tau: f64 = lines.field("tau")?;
        let calibration = {
            let rest = lines.keyed("calibration")?;
            if rest == "none" {
                None
            } else {
                let values: Vec<f64> = lines.parse_all(&rest)?;
                let (count, values) = values
                    .split_first()
                    .ok_or_else(|| lines.error("empty calibration line"))?;
                if *count != values.len() as f64 {
                    return Err(lines.error(format!("calibration count {count} but {} values", values.len())));
                }
                Some(CalibrationTable::new(values.to_vec()).map_err(|e| lines.error(e.to_string()))?)
            }
        };

        let w = spec.widths().to_vec();
        let mut weights = Vec::new();
        for i in 0..spec.num_weight_layers() {
            let header: Vec<usize> = lines.list("weight")?;
            if header != [i, w[i], w[i + 1]] {
                return Err(lines.error(format!("expected weight {i} {} {}", w[i], w[i + 1])));
            }
            let mut data = Vec::with_capacity(w[i] * w[i + 1]);
            for _ in 0..w[i] {
                let row: Vec<f64> = lines.row(w[i + 1])?;
                data.extend(row);
            }
            weights.push(Matrix::from_vec(w[i], w[i + 1], data)?);
        }
        let mut biases = Vec::new();
        for i in 0..spec.num_hidden_layers() {
            let header: Vec<usize> = lines.list("bias")?;
            if header != [i, w[i + 1]] {
                return Err(lines.error(format!("expected bias {i} {}", w[i + 1])));
            }
            biases.push(lines.row(w[i + 1])?);
        }
        let output_bias = if spec.output_bias {
            let header: Vec<usize> = lines.list("output_bias_values")?;
            if header != [spec.output_dim()] {
                return Err(lines.error(format!("expected output_bias_values {}", spec.output_dim())));
            }
            Some(lines.row(spec.output_dim())?)
        } else {
            None
        };
        let end = lines.next_line()?;
        if end != "end" {
            return Err(lines.error(format!("expected 'end', found '{end}'")));
        }
        let ckpt = Checkpoint {
            task,
            spec,
            params: ParamSet {
                weights,
                biases,
                output_bias,
            },
            keep_probs,
            tau,
            calibration,
        };
        ckpt.validate().map_err(|e| lines.error(e.to_string()))?;
        Ok(ckpt)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    number: usize,
}

impl<R: Read> Lines<R> {
    fn new(reader: R) -> Self {
        Self {
            inner: BufReader::new(reader).lines(),
            number: 0,
        }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.number,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<String> {
        self.number += 1;
        match self.inner.next() {
            Some(line) => Ok(line?.trim_end().to_string()),
            None => Err(self.error("unexpected end of checkpoint")),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.trim().to_string()),
            _ => Err(self.error(format!("expected '{key} ...', found '{line}'"))),
        }
    }

    fn parse_all<T: FromStr>(&self, text: &str) -> Result<Vec<T>> {
        text.split_whitespace()
            .map(|t| t.parse().map_err(|_| self.error(format!("cannot parse '{t}'"))))
            .collect()
    }

    fn field<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let rest = self.keyed(key)?;
        rest.parse().map_err(|_| self.error(format!("invalid {key} '{rest}'")))
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let rest = self.keyed(key)?;
        self.parse_all(&rest)
    }

    fn row(&mut self, len: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let values: Vec<f64> = self.parse_all(&line)?;
        if values.len() != len {
            return Err(self.error(format!("expected {len} values, found {}", values.len())));
        }
        Ok(values)
    }
}
