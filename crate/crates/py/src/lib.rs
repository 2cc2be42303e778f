//! Python bindings: `import mcdropout`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use mcdropout::checkpoint::Checkpoint;
use mcdropout::checks::{run_suite, Suite};
use mcdropout::data::{Dataset, Task};
use mcdropout::gp::{lengthscale_weight_decay, LengthscalePrior};
use mcdropout::kl::{Covariance, MixtureSpec};
use mcdropout::nn::{forward_unmasked, sgd_train, NetworkSpec, Nonlinearity, ParamSet, Schedule};
use mcdropout::uncertainty::{self, CalibrationTable, McConfig};
use mcdropout::{Matrix, RngState};

fn err(e: mcdropout::Error) -> PyErr {
    match e {
        mcdropout::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(err)
}

/// Predictive moments at one input.
#[pyclass(module = "mcdropout", get_all, frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PredictiveSummary {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub std_devs: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

#[pymethods]
impl PredictiveSummary {
    /// Mean of the per-output standard deviations.
    fn uncertainty(&self) -> f64 {
        self.std_devs.iter().sum::<f64>() / self.std_devs.len() as f64
    }

    fn __repr__(&self) -> String {
        format!("PredictiveSummary(mean={:?}, std_devs={:?})", self.mean, self.std_devs)
    }
}

impl From<uncertainty::PredictiveSummary> for PredictiveSummary {
    fn from(s: uncertainty::PredictiveSummary) -> Self {
        Self {
            mean: s.mean,
            covariance: s.covariance.to_rows(),
            second_moment: s.second_moment.to_rows(),
            std_devs: s.std_devs,
            samples: s.samples.map(|m| m.to_rows()).unwrap_or_default(),
        }
    }
}

/// A dropout network: layer widths, nonlinearity and parameters.
#[pyclass(module = "mcdropout")]
pub struct Network {
    spec: NetworkSpec,
    params: ParamSet,
}

#[pymethods]
impl Network {
    /// Uniform `sqrt(3 / fan_in)` initialisation with zero biases.
    #[new]
    #[pyo3(signature = (widths, nonlinearity = "relu", scale_features = false, output_bias = false, seed = 0))]
    fn new(widths: Vec<usize>, nonlinearity: &str, scale_features: bool, output_bias: bool, seed: u64) -> PyResult<Self> {
        let nl: Nonlinearity = nonlinearity.parse().map_err(err)?;
        let spec = NetworkSpec::new(widths, nl)
            .map_err(err)?
            .with_scaled_features(scale_features)
            .with_output_bias(output_bias);
        let params = ParamSet::init_uniform(&spec, &mut RngState::new(seed, 0));
        Ok(Self { spec, params })
    }

    /// Loads the network from a checkpoint written by `mcdropout train`.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let c = Checkpoint::load(path).map_err(err)?;
        Ok(Self {
            spec: c.spec,
            params: c.params,
        })
    }

    /// Writes a checkpoint with the given keep probabilities and precision.
    #[pyo3(signature = (path, keep_probs, tau, classification = false))]
    fn save(&self, path: &str, keep_probs: Vec<f64>, tau: f64, classification: bool) -> PyResult<()> {
        Checkpoint {
            task: if classification { Task::Classification } else { Task::Regression },
            spec: self.spec.clone(),
            params: self.params.clone(),
            keep_probs,
            tau,
            calibration: None,
        }
        .save(path)
        .map_err(err)
    }

    #[getter]
    fn widths(&self) -> Vec<usize> {
        self.spec.widths().to_vec()
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.params.num_params()
    }

    /// Weight matrices, each `K_in x K_out`.
    #[getter]
    fn weights(&self) -> Vec<Vec<Vec<f64>>> {
        self.params.weights.iter().map(Matrix::to_rows).collect()
    }

    #[getter]
    fn biases(&self) -> Vec<Vec<f64>> {
        self.params.biases.clone()
    }

    /// Deterministic forward pass with every unit kept.
    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        forward_unmasked(&self.spec, &self.params, &x).map_err(err)
    }

    /// Standard-dropout prediction: weights scaled by their keep probabilities.
    fn weight_averaged(&self, x: Vec<f64>, keep_probs: Vec<f64>) -> PyResult<Vec<f64>> {
        uncertainty::weight_averaged_predict(&self.spec, &self.params, &keep_probs, &x).map_err(err)
    }

    /// Regression training with GP-derived weight decays; returns the
    /// per-iteration minibatch losses.
    #[pyo3(signature = (x, y, keep_probs, tau, iterations = 1000, batch_size = None, base_lr = 0.01, lengthscale = 1.0, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &mut self,
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
        keep_probs: Vec<f64>,
        tau: f64,
        iterations: usize,
        batch_size: Option<usize>,
        base_lr: f64,
        lengthscale: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let data = Dataset::regression(matrix(x)?, matrix(y)?).map_err(err)?;
        let prior = LengthscalePrior {
            lengthscale,
            ..LengthscalePrior::default()
        };
        let decay = lengthscale_weight_decay(&self.spec, &keep_probs, tau, data.len(), &prior).map_err(err)?;
        let schedule = Schedule {
            base_lr,
            iterations,
            batch_size,
            ..Schedule::default()
        };
        let out = sgd_train(&self.spec, &self.params, &decay, &keep_probs, &data, &schedule, &mut RngState::new(seed, 1))
            .map_err(err)?;
        self.params = out.params;
        Ok(out.losses)
    }

    /// MC dropout prediction at one input.
    #[pyo3(signature = (x, keep_probs, tau, samples = 100, seed = 0))]
    fn mc_predict(&self, x: Vec<f64>, keep_probs: Vec<f64>, tau: f64, samples: usize, seed: u64) -> PyResult<PredictiveSummary> {
        let cfg = McConfig::new(samples, seed, keep_probs, tau);
        Ok(uncertainty::mc_predict(&self.spec, &self.params, &cfg, &x).map_err(err)?.into())
    }

    /// Exact predictive moments by summing over every mask pattern.
    fn enumerate_oracle(&self, x: Vec<f64>, keep_probs: Vec<f64>, tau: f64) -> PyResult<PredictiveSummary> {
        Ok(uncertainty::enumerate_masks_oracle(&self.spec, &self.params, &keep_probs, tau, &x)
            .map_err(err)?
            .into())
    }

    fn __repr__(&self) -> String {
        format!("Network(widths={:?}, nonlinearity={})", self.spec.widths(), self.spec.nonlinearity)
    }
}

#[pyfunction]
fn tau_from_weight_decay(lengthscale: f64, keep_prob: f64, n: usize, weight_decay: f64) -> PyResult<f64> {
    mcdropout::gp::tau_from_weight_decay(lengthscale, keep_prob, n, weight_decay).map_err(err)
}

#[pyfunction]
fn weight_decay_from_tau(lengthscale: f64, keep_prob: f64, n: usize, tau: f64) -> PyResult<f64> {
    mcdropout::gp::weight_decay_from_tau(lengthscale, keep_prob, n, tau).map_err(err)
}

/// Large-`K` approximation of `KL(q || N(0, I))` for a mixture with
/// isotropic components `sum_i p_i N(mu_i, v_i I)`.
#[pyfunction]
fn kl_mog_approx(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64>) -> PyResult<f64> {
    let covs = variances.into_iter().map(Covariance::Isotropic).collect();
    let q = MixtureSpec::new(weights, means, covs).map_err(err)?;
    mcdropout::kl::kl_mog_approx(&q).map_err(err)
}

/// `KL(N(mu, diag(variances)) || N(0, l^-2 I))`.
#[pyfunction]
#[pyo3(signature = (mu, variances, lengthscale = 1.0))]
fn analytic_gaussian_kl(mu: Vec<f64>, variances: Vec<f64>, lengthscale: f64) -> PyResult<f64> {
    mcdropout::kl::analytic_gaussian_kl(&mu, &Covariance::Diagonal(variances), lengthscale).map_err(err)
}

#[pyfunction]
fn predictive_log_likelihood(samples: Vec<Vec<f64>>, y: Vec<f64>, tau: f64) -> PyResult<f64> {
    uncertainty::predictive_log_likelihood(&matrix(samples)?, &y, tau).map_err(err)
}

#[pyfunction]
fn calibration_percentile(training_stds: Vec<f64>, std: f64) -> PyResult<f64> {
    let table = CalibrationTable::new(training_stds).map_err(err)?;
    uncertainty::calibration_percentile(&table, std).map_err(err)
}

#[pyfunction]
fn logsumexp(values: Vec<f64>) -> PyResult<f64> {
    mcdropout::logsumexp(&values).map_err(err)
}

/// Runs a self-check suite; returns `(passed, report)`.
#[pyfunction]
#[pyo3(signature = (suite, seed = 0))]
fn check(suite: &str, seed: u64) -> PyResult<(bool, String)> {
    let suite: Suite = suite.parse().map_err(err)?;
    let report = run_suite(suite, seed).map_err(err)?;
    Ok((report.passed(), report.to_string()))
}

#[pymodule]
#[pyo3(name = "mcdropout")]
fn mcdropout_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<PredictiveSummary>()?;
    m.add_function(wrap_pyfunction!(tau_from_weight_decay, m)?)?;
    m.add_function(wrap_pyfunction!(weight_decay_from_tau, m)?)?;
    m.add_function(wrap_pyfunction!(kl_mog_approx, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_gaussian_kl, m)?)?;
    m.add_function(wrap_pyfunction!(predictive_log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(calibration_percentile, m)?)?;
    m.add_function(wrap_pyfunction!(logsumexp, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
