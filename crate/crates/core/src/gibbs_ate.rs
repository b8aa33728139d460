//! Generalized posterior over a scalar ATE under the squared pseudo-outcome
//! loss: exact Normal–Normal update and a Gaussian variational engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{adam_minimize, normal_quantile, sample_variance, standard_normal_quantile, OptimizerConfig, Rng};
use crate::pseudo::PseudoOutcomes;

/// `N(m0, s0²)`; `s0_sq = +∞` encodes the diffuse limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub m0: f64,
    pub s0_sq: f64,
}

impl NormalPrior {
    pub fn new(m0: f64, s0_sq: f64) -> Result<Self> {
        if !(s0_sq > 0.0) || !m0.is_finite() {
            return Err(Error::Domain(format!("prior needs finite mean and s0² > 0, got ({m0}, {s0_sq})")));
        }
        Ok(Self { m0, s0_sq })
    }

    pub fn diffuse() -> Self {
        Self {
            m0: 0.0,
            s0_sq: f64::INFINITY,
        }
    }

    pub fn is_diffuse(&self) -> bool {
        self.s0_sq.is_infinite()
    }

    /// `s0⁻²`, zero when diffuse.
    pub fn precision(&self) -> f64 {
        if self.is_diffuse() {
            0.0
        } else {
            1.0 / self.s0_sq
        }
    }
}

impl Default for NormalPrior {
    fn default() -> Self {
        Self { m0: 0.0, s0_sq: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    pub m_p: f64,
    pub s_p_sq: f64,
}

impl GaussianPosterior {
    pub fn sd(&self) -> f64 {
        self.s_p_sq.sqrt()
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!("omega must be a positive finite number, got {omega}")));
    }
    Ok(())
}

/// `s_p² = (s0⁻² + ωn)⁻¹`, `m_p = s_p² (s0⁻² m0 + ωn θ̂)` with `θ̂` the pseudo-outcome mean.
pub fn closed_form_posterior(pseudo: &PseudoOutcomes, prior: &NormalPrior, omega: f64) -> Result<GaussianPosterior> {
    check_omega(omega)?;
    if pseudo.n() == 0 {
        return Err(Error::Domain("no pseudo-outcomes".into()));
    }
    let data_precision = omega * pseudo.n() as f64;
    let precision = prior.precision() + data_precision;
    let s_p_sq = 1.0 / precision;
    let weighted = if prior.is_diffuse() {
        data_precision * pseudo.mean()
    } else {
        prior.precision() * prior.m0 + data_precision * pseudo.mean()
    };
    Ok(GaussianPosterior {
        m_p: s_p_sq * weighted,
        s_p_sq,
    })
}

/// Central `1 − alpha` interval `m_p ± z_{1−α/2} s_p`.
pub fn credible_interval(post: &GaussianPosterior, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let half = normal_quantile(1.0 - alpha / 2.0)? * post.sd();
    Ok((post.m_p - half, post.m_p + half))
}

/// Standard normal draws for one step: stratified on the quantile scale and
/// paired antithetically, `2·ceil(batch/2)` values in total.
fn stratified_antithetic(batch: usize, rng: &mut Rng) -> Vec<f64> {
    let half = batch.div_ceil(2);
    let mut eps = Vec::with_capacity(2 * half);
    for j in 0..half {
        let u = (j as f64 + rng.uniform()) / half as f64;
        let z = standard_normal_quantile(u);
        eps.push(z);
        eps.push(-z);
    }
    eps
}

/// Fits `q = N(μ, σ²)` by minimizing `ωn E_q[L_n(θ)] + KL(q ‖ π)` with
/// reparameterized gradients over `(μ, log σ)`.
///
/// Starts at the prior mean with `σ` at the pseudo-outcome standard error.
pub fn vi_posterior(
    pseudo: &PseudoOutcomes,
    prior: &NormalPrior,
    omega: f64,
    config: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<GaussianPosterior> {
    check_omega(omega)?;
    if pseudo.n() == 0 {
        return Err(Error::Domain("no pseudo-outcomes".into()));
    }
    let n = pseudo.n() as f64;
    let theta_hat = pseudo.mean();
    let data_precision = omega * n;
    let prior_precision = prior.precision();

    let var = sample_variance(&pseudo.values);
    // Scale guess from the plug-in weight, tightened by the prior precision.
    let scale_precision = if var.is_finite() && var > 0.0 {
        n / var
    } else {
        data_precision
    };
    let init_sd = (1.0 / (scale_precision + prior_precision)).sqrt();
    let init = [prior.m0, init_sd.ln()];

    let gradient = |params: &[f64], rng: &mut Rng| {
        let (mu, log_sigma) = (params[0], params[1]);
        let sigma = log_sigma.exp();
        let eps = stratified_antithetic(config.batch_size, rng);
        let draws = eps.len() as f64;
        let (mut g_mu, mut g_log_sigma) = (0.0, 0.0);
        for &e in &eps {
            // d/dθ of ωn·L_n(θ) is ωn(θ − θ̂).
            let slope = data_precision * (mu + sigma * e - theta_hat);
            g_mu += slope;
            g_log_sigma += slope * e * sigma;
        }
        g_mu /= draws;
        g_log_sigma /= draws;
        // KL(N(μ,σ²) ‖ N(m0,s0²)) = ln s0 − ln σ + (σ² + (μ − m0)²)/(2 s0²) − ½.
        g_mu += prior_precision * (mu - prior.m0);
        g_log_sigma += -1.0 + prior_precision * sigma * sigma;
        vec![g_mu, g_log_sigma]
    };

    let fitted = adam_minimize(gradient, &init, config, rng)?;
    Ok(GaussianPosterior {
        m_p: fitted[0],
        s_p_sq: (2.0 * fitted[1]).exp(),
    })
}
