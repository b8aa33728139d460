//! Random numbers, dense SPD linear algebra, normal distribution functions
//! and the Adam optimizer.

mod adam;
mod dist;
mod linalg;
mod rng;

pub use adam::{adam_minimize, OptimizerConfig};
pub use dist::{gaussian_tv, normal_cdf, normal_pdf, normal_quantile};
pub use linalg::{cholesky_solve, dot, Cholesky, Matrix};
pub use rng::Rng;

pub(crate) use dist::standard_normal_quantile;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance; NaN for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
}
