use serde::{Deserialize, Serialize};

use super::Rng;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// Monte Carlo draws per step; ignored by full-batch objectives.
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.03,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 2000,
            batch_size: 200,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::config("beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta2", "must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("epsilon", "must be > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        Ok(())
    }
}

/// Runs `config.epochs` bias-corrected Adam steps from `init`.
///
/// `gradient` may be stochastic; it receives the caller's generator so the
/// whole trajectory is a deterministic function of `(init, config, rng)`.
pub fn adam_minimize<G>(
    mut gradient: G,
    init: &[f64],
    config: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>>
where
    G: FnMut(&[f64], &mut Rng) -> Vec<f64>,
{
    config.validate()?;
    let dim = init.len();
    let mut params = init.to_vec();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let (b1, b2) = (config.beta1, config.beta2);
    let (mut b1_t, mut b2_t) = (1.0, 1.0);

    for step in 1..=config.epochs {
        let g = gradient(&params, rng);
        if g.len() != dim {
            return Err(Error::Dimension(format!("gradient has {} entries, expected {dim}", g.len())));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient { step, last: params });
        }
        b1_t *= b1;
        b2_t *= b2;
        for i in 0..dim {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - b1_t);
            let v_hat = v[i] / (1.0 - b2_t);
            params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
    Ok(params)
}
