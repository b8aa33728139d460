//! Choosing the learning rate ω.
//!
//! The plug-in rule sets ω to the inverse sample variance of the pseudo-outcomes.
//! The bootstrap scheme (GPC) adjusts ω on the log scale until the share of
//! bootstrap credible intervals that contain the full-data point estimate
//! matches the nominal level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gibbs_ate::{closed_form_posterior, credible_interval, NormalPrior};
use crate::gibbs_cate::{fit_cate, pointwise_intervals, CateEngine, KernelParams};
use crate::numerics::{sample_variance, Matrix, Rng};
use crate::nuisance::{cross_fit, NuisanceConfig};
use crate::pseudo::{cross_fitted_pseudo, PseudoOutcomes, Strategy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub omega: f64,
    pub iterations: usize,
    pub achieved_bootstrap_coverage: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpcConfig {
    pub alpha: f64,
    pub b_boot: usize,
    pub max_iter: usize,
    pub tolerance: f64,
    /// Refit the cross-fitted nuisances inside every bootstrap resample
    /// instead of resampling the original pseudo-outcomes.
    pub refit_nuisances: bool,
}

impl Default for GpcConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            b_boot: 200,
            max_iter: 50,
            tolerance: 0.01,
            refit_nuisances: false,
        }
    }
}

impl GpcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", "must lie in (0, 1)"));
        }
        if self.b_boot < 50 {
            return Err(Error::config("b_boot", "must be at least 50"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter", "must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("tolerance", "must be > 0"));
        }
        Ok(())
    }
}

pub fn plugin_omega(pseudo: &PseudoOutcomes) -> Result<f64> {
    if pseudo.n() < 2 {
        return Err(Error::Domain("plug-in omega needs at least two pseudo-outcomes".into()));
    }
    let var = sample_variance(&pseudo.values);
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::DegenerateVariance);
    }
    Ok(1.0 / var)
}

/// Stochastic-approximation loop shared by every GPC variant.
///
/// `coverage(omega, t)` returns the bootstrap coverage estimate at iteration
/// `t` (1-based). The returned ω is the last one whose coverage was measured.
pub fn calibrate_with<F>(initial_omega: f64, config: &GpcConfig, mut coverage: F) -> Result<CalibrationResult>
where
    F: FnMut(f64, usize) -> Result<f64>,
{
    config.validate()?;
    if !(initial_omega > 0.0) || !initial_omega.is_finite() {
        return Err(Error::Domain(format!("initial omega must be positive, got {initial_omega}")));
    }
    let target = 1.0 - config.alpha;
    let mut log_omega = initial_omega.ln();
    let mut last = CalibrationResult {
        omega: initial_omega,
        iterations: 0,
        achieved_bootstrap_coverage: f64::NAN,
        converged: false,
    };
    for t in 1..=config.max_iter {
        let omega = log_omega.exp();
        let c_hat = coverage(omega, t)?;
        last = CalibrationResult {
            omega,
            iterations: t,
            achieved_bootstrap_coverage: c_hat,
            converged: (c_hat - target).abs() <= config.tolerance,
        };
        if last.converged {
            break;
        }
        log_omega += (c_hat - target) / t as f64;
    }
    Ok(last)
}

fn bootstrap_indices(n: usize, b: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    (0..b).map(|_| (0..n).map(|_| rng.below(n)).collect()).collect()
}

fn share(hits: impl Iterator<Item = bool>, total: usize) -> f64 {
    hits.filter(|h| *h).count() as f64 / total as f64
}

/// GPC for the ATE on fixed pseudo-outcomes, resampling their values.
pub fn gpc_omega_from_pseudo(
    pseudo: &PseudoOutcomes,
    prior: &NormalPrior,
    config: &GpcConfig,
    rng: &mut Rng,
) -> Result<CalibrationResult> {
    let theta_hat = pseudo.mean();
    let n = pseudo.n();
    calibrate_with(plugin_omega(pseudo)?, config, |omega, _| {
        let draws = bootstrap_indices(n, config.b_boot, rng);
        let hits = draws
            .par_iter()
            .map(|idx| {
                let post = closed_form_posterior(&pseudo.resample(idx), prior, omega)?;
                let (lo, hi) = credible_interval(&post, config.alpha)?;
                Ok(lo <= theta_hat && theta_hat <= hi)
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(share(hits.into_iter(), config.b_boot))
    })
}

/// GPC for the ATE starting from raw data. Nuisances are cross-fitted once;
/// with `refit_nuisances` every resample is cross-fitted afresh.
pub fn gpc_omega(
    ds: &Dataset,
    strategy: Strategy,
    prior: &NormalPrior,
    config: &GpcConfig,
    nuisance: &NuisanceConfig,
    rng: &mut Rng,
) -> Result<CalibrationResult> {
    let cf = cross_fit(ds, nuisance, rng)?;
    let pseudo = cross_fitted_pseudo(ds, &cf, strategy)?;
    if !config.refit_nuisances {
        return gpc_omega_from_pseudo(&pseudo, prior, config, rng);
    }
    let theta_hat = pseudo.mean();
    let n = ds.n();
    calibrate_with(plugin_omega(&pseudo)?, config, |omega, _| {
        let draws: Vec<(Vec<usize>, u64)> = bootstrap_indices(n, config.b_boot, rng)
            .into_iter()
            .map(|idx| (idx, rng.next_u64()))
            .collect();
        let hits = draws
            .par_iter()
            .map(|(idx, seed)| {
                let sub = ds.subset(idx);
                let cf = cross_fit(&sub, nuisance, &mut Rng::new(*seed, 0))?;
                let ps = cross_fitted_pseudo(&sub, &cf, strategy)?;
                let (lo, hi) = credible_interval(&closed_form_posterior(&ps, prior, omega)?, config.alpha)?;
                Ok(lo <= theta_hat && theta_hat <= hi)
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(share(hits.into_iter(), config.b_boot))
    })
}

/// GPC for the CATE, calibrating the average pointwise coverage at `x_query`.
/// The full-data posterior mean at the current ω is the point estimate.
#[allow(clippy::too_many_arguments)]
pub fn gpc_omega_cate(
    x: &Matrix,
    pseudo: &PseudoOutcomes,
    kernel: &KernelParams,
    engine: &CateEngine,
    x_query: &Matrix,
    config: &GpcConfig,
    rng: &mut Rng,
) -> Result<CalibrationResult> {
    let n = pseudo.n();
    let k = x_query.rows();
    if k == 0 {
        return Err(Error::Domain("need at least one query point".into()));
    }
    calibrate_with(plugin_omega(pseudo)?, config, |omega, _| {
        let full = fit_cate(engine, x, pseudo, kernel, omega, &mut Rng::new(rng.next_u64(), 0))?;
        let (centers, _) = full.predict(x_query)?;
        let draws: Vec<(Vec<usize>, u64)> = bootstrap_indices(n, config.b_boot, rng)
            .into_iter()
            .map(|idx| (idx, rng.next_u64()))
            .collect();
        let fractions = draws
            .par_iter()
            .map(|(idx, seed)| {
                let post = fit_cate(engine, &x.select_rows(idx), &pseudo.resample(idx), kernel, omega, &mut Rng::new(*seed, 0))?;
                let (m, v) = post.predict(x_query)?;
                let cis = pointwise_intervals(&m, &v, config.alpha)?;
                Ok(share(cis.iter().zip(&centers).map(|((lo, hi), c)| lo <= c && c <= hi), k))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(fractions.iter().sum::<f64>() / fractions.len() as f64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{default_spec, generate, DgpId};

    fn pseudo(values: Vec<f64>) -> PseudoOutcomes {
        PseudoOutcomes::new(values, Strategy::Dr)
    }

    #[test]
    fn plugin_examples() {
        assert!((plugin_omega(&pseudo(vec![0.0, 2.0])).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(plugin_omega(&pseudo(vec![1.0; 5])), Err(Error::DegenerateVariance)));
        let base = vec![0.3, -1.2, 2.2, 0.7];
        let w = plugin_omega(&pseudo(base.clone())).unwrap();
        let w3 = plugin_omega(&pseudo(base.iter().map(|v| 3.0 * v).collect())).unwrap();
        assert!((w3 - w / 9.0).abs() < 1e-14);
    }

    #[test]
    fn plugin_with_diffuse_prior_gives_squared_standard_error() {
        let mut rng = Rng::new(9, 0);
        let p = pseudo((0..257).map(|_| 1.0 + 3.0 * rng.normal()).collect());
        let post = closed_form_posterior(&p, &NormalPrior::diffuse(), plugin_omega(&p).unwrap()).unwrap();
        let se_sq = sample_variance(&p.values) / p.n() as f64;
        assert!((post.s_p_sq - se_sq).abs() <= 1e-12 * se_sq.max(1.0));
    }

    #[test]
    fn update_direction_follows_coverage_gap() {
        let cfg = GpcConfig::default();
        for (c, expect_smaller) in [(0.80, true), (0.99, false)] {
            let mut seen = Vec::new();
            let out = calibrate_with(1.0, &GpcConfig { max_iter: 2, ..cfg }, |w, _| {
                seen.push(w);
                Ok(c)
            })
            .unwrap();
            assert_eq!(seen.len(), 2);
            assert_eq!(seen[1] < seen[0], expect_smaller);
            assert!(!out.converged);
            assert_eq!(out.omega, seen[1]);
        }
    }

    #[test]
    fn stops_once_within_tolerance() {
        let seq = [0.7, 0.9, 0.945, 0.5];
        let out = calibrate_with(2.0, &GpcConfig::default(), |_, t| Ok(seq[t - 1])).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 3);
        assert_eq!(out.achieved_bootstrap_coverage, 0.945);
    }

    #[test]
    fn step_sizes_shrink_harmonically() {
        let mut seen = Vec::new();
        calibrate_with(1.0, &GpcConfig { max_iter: 6, ..Default::default() }, |w, _| {
            seen.push(w.ln());
            Ok(0.55)
        })
        .unwrap();
        for t in 1..seen.len() {
            assert!((seen[t] - seen[t - 1] + 0.4 / t as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs() {
        let p = pseudo(vec![0.0, 1.0, 3.0]);
        let mut rng = Rng::new(0, 0);
        let prior = NormalPrior::default();
        for bad in [
            GpcConfig { alpha: 0.0, ..Default::default() },
            GpcConfig { b_boot: 10, ..Default::default() },
            GpcConfig { max_iter: 0, ..Default::default() },
        ] {
            assert!(gpc_omega_from_pseudo(&p, &prior, &bad, &mut rng).unwrap_err().is_config());
        }
    }

    #[test]
    fn gpc_is_deterministic_and_near_nominal() {
        let spec = default_spec(DgpId::D1);
        let ds = generate(&spec, 300, &mut Rng::new(11, 0)).unwrap();
        let run = || {
            gpc_omega(
                &ds,
                Strategy::Dr,
                &NormalPrior::diffuse(),
                &GpcConfig { b_boot: 100, ..Default::default() },
                &NuisanceConfig::default(),
                &mut Rng::new(11, 1),
            )
            .unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.omega > 0.0);
        assert!((a.achieved_bootstrap_coverage - 0.95).abs() < 0.05);
    }

    #[test]
    fn refit_variant_runs() {
        let spec = default_spec(DgpId::D1);
        let ds = generate(&spec, 200, &mut Rng::new(12, 0)).unwrap();
        let cfg = GpcConfig {
            b_boot: 50,
            max_iter: 2,
            refit_nuisances: true,
            ..Default::default()
        };
        let out = gpc_omega(&ds, Strategy::Dr, &NormalPrior::diffuse(), &cfg, &NuisanceConfig::default(), &mut Rng::new(12, 1)).unwrap();
        assert!(out.omega > 0.0 && out.iterations >= 1);
    }

    #[test]
    fn cate_variant_runs_on_exact_engine() {
        let spec = default_spec(DgpId::D2);
        let ds = generate(&spec, 120, &mut Rng::new(13, 0)).unwrap();
        let cf = cross_fit(&ds, &NuisanceConfig::default(), &mut Rng::new(13, 1)).unwrap();
        let ps = cross_fitted_pseudo(&ds, &cf, Strategy::Dr).unwrap();
        let q = ds.x().select_rows(&[0, 1, 2, 3, 4]);
        let cfg = GpcConfig { b_boot: 50, max_iter: 3, ..Default::default() };
        let out = gpc_omega_cate(ds.x(), &ps, &KernelParams::default(), &CateEngine::Exact, &q, &cfg, &mut Rng::new(13, 2)).unwrap();
        assert!(out.omega > 0.0);
        assert!((0.0..=1.0).contains(&out.achieved_bootstrap_coverage));
    }
}
