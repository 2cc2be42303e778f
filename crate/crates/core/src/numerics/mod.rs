//! Seeded sampling, dense matrices and stable reductions.

mod matrix;
mod reduce;
mod rng;

pub use matrix::Matrix;
pub use reduce::{log_mean_exp, logsumexp, mean_and_std_error};
pub use rng::{sample_bernoulli_vector, sample_gaussian_matrix, RngState};
