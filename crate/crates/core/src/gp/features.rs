use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{contract, domain, Result};
use crate::nn::Nonlinearity;
use crate::numerics::{sample_gaussian_matrix, Matrix, RngState};

/// `phi(x) = sqrt(1/K) sigma(W1^T x + b)` as a length-`K` row vector.
pub fn feature_map(x: &[f64], w1: &Matrix, b: &[f64], nonlinearity: Nonlinearity) -> Result<Vec<f64>> {
    let k = w1.cols();
    if b.len() != k {
        return Err(contract(format!("bias of length {} for {k} features", b.len())));
    }
    let scale = (1.0 / k as f64).sqrt();
    let pre = w1.vecmat(x)?;
    Ok(pre
        .iter()
        .zip(b)
        .map(|(p, b)| scale * nonlinearity.apply(p + b))
        .collect())
}

/// The `N x K` feature matrix `Phi` with rows `phi(x_n)`.
pub fn feature_matrix(x: &Matrix, w1: &Matrix, b: &[f64], nonlinearity: Nonlinearity) -> Result<Matrix> {
    let rows = x
        .row_iter()
        .map(|r| feature_map(r, w1, b, nonlinearity))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, w1.cols()));
    }
    Matrix::from_rows(&rows)
}

/// Finite-rank covariance
/// `K(x_i, x_j) = (1/K) sum_k sigma(w_k^T x_i + b_k) sigma(w_k^T x_j + b_k)`,
/// evaluated term by term rather than through `Phi`.
pub fn finite_rank_covariance(
    x: &Matrix,
    w1: &Matrix,
    b: &[f64],
    nonlinearity: Nonlinearity,
) -> Result<CovarianceMatrix> {
    if x.rows() == 0 {
        return Err(contract("covariance of an empty input set"));
    }
    if x.cols() != w1.rows() || b.len() != w1.cols() {
        return Err(contract("inputs, weights and biases disagree in shape"));
    }
    let k = w1.cols();
    let n = x.rows();
    // activations[n][k] = sigma(w_k^T x_n + b_k)
    let act: Vec<Vec<f64>> = x
        .row_iter()
        .map(|r| {
            (0..k)
                .map(|j| {
                    let dot: f64 = r.iter().enumerate().map(|(q, v)| v * w1[(q, j)]).sum();
                    nonlinearity.apply(dot + b[j])
                })
                .collect()
        })
        .collect();
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..k).map(|t| act[i][t] * act[j][t]).sum::<f64>() / k as f64;
            values[(i, j)] = s;
            values[(j, i)] = s;
        }
    }
    CovarianceMatrix::new(values)
}

/// Draws `W1 ~ N(0, l^-2)` entrywise (`Q x K`) and `b ~ N(0, l'^-2)` (`K`).
pub fn sample_covariance_parameters(
    q: usize,
    k: usize,
    lengthscale: f64,
    bias_lengthscale: f64,
    rng: &mut RngState,
) -> Result<(Matrix, Vec<f64>)> {
    if !(lengthscale > 0.0 && bias_lengthscale > 0.0) {
        return Err(domain("length-scales must be positive"));
    }
    let w = sample_gaussian_matrix(q, k, 0.0, 1.0 / lengthscale, rng)?;
    let b = sample_gaussian_matrix(1, k, 0.0, 1.0 / bias_lengthscale, rng)?.into_vec();
    Ok((w, b))
}

/// Symmetric positive semi-definite `N x N` covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    values: Matrix,
}

impl CovarianceMatrix {
    /// Accepts a square matrix symmetric to `1e-12` (relative to its largest entry).
    pub fn new(values: Matrix) -> Result<Self> {
        let scale = values.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if !values.is_symmetric(1e-12 * scale) {
            return Err(contract("covariance matrix is not symmetric"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.values.rows();
        let m = DMatrix::from_row_slice(n, n, self.values.as_slice());
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Smallest eigenvalue no lower than `-rel_tol` times the spectral norm.
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        let ev = self.eigenvalues();
        let norm = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ev.first().map_or(true, |&min| min >= -rel_tol * norm)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in self.values.row_iter() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
