//! Monte Carlo harness: repeated-sampling coverage of credible intervals,
//! interval lengths, length sweeps over n, and the nuisance-perturbation
//! experiments (point-estimate shift slopes and posterior TV stability).
//!
//! Every repetition draws from its own `(base_seed, rep)` stream and results
//! are folded in repetition order, so the worker count never changes output.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{gpc_omega_from_pseudo, plugin_omega, GpcConfig};
use crate::dgp::{generate, DgpId, DgpSpec};
use crate::error::{Error, Result};
use crate::gibbs_ate::{closed_form_posterior, credible_interval, NormalPrior};
use crate::gibbs_cate::{fit_cate, pointwise_intervals, CateEngine, KernelParams};
use crate::numerics::{gaussian_tv, mean, normal_quantile, sample_variance, Matrix, Rng};
use crate::nuisance::{cross_fit, NuisanceConfig, PerturbedNuisance};
use crate::pseudo::{cross_fitted_pseudo, pseudo_with, Strategy};

const PURPOSE_DATA: u8 = 0;
const PURPOSE_FOLDS: u8 = 1;
const PURPOSE_CALIBRATE: u8 = 2;
const PURPOSE_QUERY: u8 = 3;
const PURPOSE_FIT: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CalibrationMode {
    Plugin,
    Gpc(GpcConfig),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchSettings {
    pub alpha: f64,
    pub nuisance: NuisanceConfig,
    /// Worker threads; `None` uses every available core.
    pub parallelism: Option<usize>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            nuisance: NuisanceConfig::default(),
            parallelism: None,
        }
    }
}

impl BenchSettings {
    fn validate(&self, reps: usize) -> Result<()> {
        if reps < 2 {
            return Err(Error::config("reps", format!("need at least 2 repetitions, got {reps}")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", "must lie in (0, 1)"));
        }
        if self.parallelism == Some(0) {
            return Err(Error::config("parallelism", "must be at least 1"));
        }
        self.nuisance.validate()
    }

    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(p) = self.parallelism {
            builder = builder.num_threads(p);
        }
        let pool = builder.build().map_err(|e| Error::config("parallelism", e.to_string()))?;
        Ok(pool.install(job))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub rep: usize,
    pub theta_hat: f64,
    pub cri_lo: f64,
    pub cri_hi: f64,
    pub covered: bool,
    pub omega: f64,
}

impl RunResult {
    pub fn length(&self) -> f64 {
        self.cri_hi - self.cri_lo
    }
}

/// One CATE repetition: pointwise quantities averaged over the query points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CateRunResult {
    pub rep: usize,
    pub coverage: f64,
    pub mean_length: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub dataset: DgpId,
    pub strategy: Strategy,
    pub n: usize,
    /// Repetitions that completed.
    pub reps: usize,
    pub failures: usize,
    pub alpha: f64,
    pub coverage: f64,
    pub coverage_ci: (f64, f64),
    pub mean_length: f64,
    pub sd_length: f64,
    pub median_length: f64,
    pub faithful: bool,
    /// Per-repetition interval length, in repetition order.
    pub lengths: Vec<f64>,
}

impl BenchReport {
    fn from_parts(
        dataset: DgpId,
        strategy: Strategy,
        n: usize,
        alpha: f64,
        hits: &[f64],
        lengths: Vec<f64>,
        failures: usize,
    ) -> Result<Self> {
        let reps = hits.len();
        if reps == 0 {
            return Err(Error::Domain(format!("all {failures} repetitions failed for {dataset}/{strategy}")));
        }
        let coverage = hits.iter().sum::<f64>() / reps as f64;
        let coverage_ci = wilson_interval(coverage, reps);
        let sd_length = if reps > 1 { sample_variance(&lengths).sqrt() } else { 0.0 };
        Ok(Self {
            dataset,
            strategy,
            n,
            reps,
            failures,
            alpha,
            coverage,
            coverage_ci,
            mean_length: mean(&lengths),
            sd_length,
            median_length: median(&lengths),
            faithful: coverage_ci.1 >= 1.0 - alpha,
            lengths,
        })
    }
}

/// Wilson score 95% interval for a proportion `p` observed over `total` trials.
pub fn wilson_interval(p: f64, total: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let n = total as f64;
    let z2n = z * z / n;
    let center = (p + z2n / 2.0) / (1.0 + z2n);
    let half = z * (p * (1.0 - p) / n + z2n / (4.0 * n)).max(0.0).sqrt() / (1.0 + z2n);
    let lo = if p <= 0.0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if p >= 1.0 { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn split_outcomes<T>(outcomes: Vec<Result<T>>) -> (Vec<T>, usize) {
    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(_) => failures += 1,
        }
    }
    (ok, failures)
}

/// A single ATE repetition, exposed for inspection and order-independence checks.
#[allow(clippy::too_many_arguments)]
pub fn ate_repetition(
    spec: &DgpSpec,
    strategy: Strategy,
    n: usize,
    rep: usize,
    prior: &NormalPrior,
    mode: &CalibrationMode,
    base_seed: u64,
    settings: &BenchSettings,
) -> Result<RunResult> {
    let r = rep as u64;
    let ds = generate(spec, n, &mut Rng::for_task(base_seed, r, PURPOSE_DATA))?;
    let cf = cross_fit(&ds, &settings.nuisance, &mut Rng::for_task(base_seed, r, PURPOSE_FOLDS))?;
    let pseudo = cross_fitted_pseudo(&ds, &cf, strategy)?;
    let omega = match mode {
        CalibrationMode::Plugin => plugin_omega(&pseudo)?,
        CalibrationMode::Gpc(cfg) => {
            let cfg = GpcConfig { alpha: settings.alpha, ..*cfg };
            gpc_omega_from_pseudo(&pseudo, prior, &cfg, &mut Rng::for_task(base_seed, r, PURPOSE_CALIBRATE))?.omega
        }
    };
    let post = closed_form_posterior(&pseudo, prior, omega)?;
    let (cri_lo, cri_hi) = credible_interval(&post, settings.alpha)?;
    let truth = spec.ate();
    Ok(RunResult {
        rep,
        theta_hat: post.m_p,
        cri_lo,
        cri_hi,
        covered: cri_lo <= truth && truth <= cri_hi,
        omega,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn run_ate_bench(
    spec: &DgpSpec,
    strategy: Strategy,
    n: usize,
    reps: usize,
    prior: &NormalPrior,
    mode: &CalibrationMode,
    base_seed: u64,
    settings: &BenchSettings,
) -> Result<BenchReport> {
    settings.validate(reps)?;
    spec.validate()?;
    let outcomes = settings.run(|| {
        (0..reps)
            .into_par_iter()
            .map(|rep| ate_repetition(spec, strategy, n, rep, prior, mode, base_seed, settings))
            .collect::<Vec<_>>()
    })?;
    let (runs, failures) = split_outcomes(outcomes);
    let hits: Vec<f64> = runs.iter().map(|r| f64::from(u8::from(r.covered))).collect();
    let lengths = runs.iter().map(RunResult::length).collect();
    BenchReport::from_parts(spec.id, strategy, n, settings.alpha, &hits, lengths, failures)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CateBenchConfig {
    pub kernel: KernelParams,
    pub engine: CateEngine,
    /// Fresh covariate draws per repetition at which pointwise coverage is scored.
    pub k_points: usize,
}

impl Default for CateBenchConfig {
    fn default() -> Self {
        Self {
            kernel: KernelParams::default(),
            engine: CateEngine::default(),
            k_points: 100,
        }
    }
}

pub fn cate_repetition(
    spec: &DgpSpec,
    strategy: Strategy,
    n: usize,
    rep: usize,
    config: &CateBenchConfig,
    base_seed: u64,
    settings: &BenchSettings,
) -> Result<CateRunResult> {
    let r = rep as u64;
    let ds = generate(spec, n, &mut Rng::for_task(base_seed, r, PURPOSE_DATA))?;
    let cf = cross_fit(&ds, &settings.nuisance, &mut Rng::for_task(base_seed, r, PURPOSE_FOLDS))?;
    let pseudo = cross_fitted_pseudo(&ds, &cf, strategy)?;
    let omega = plugin_omega(&pseudo)?;
    let post = fit_cate(&config.engine, ds.x(), &pseudo, &config.kernel, omega, &mut Rng::for_task(base_seed, r, PURPOSE_FIT))?;

    let mut qrng = Rng::for_task(base_seed, r, PURPOSE_QUERY);
    let rows: Vec<Vec<f64>> = (0..config.k_points).map(|_| spec.sample_x(&mut qrng)).collect();
    let xq = Matrix::from_rows(&rows)?;
    let (means, vars) = post.predict(&xq)?;
    let cis = pointwise_intervals(&means, &vars, settings.alpha)?;
    let mut hits = 0usize;
    let mut total_len = 0.0;
    for (row, (lo, hi)) in rows.iter().zip(&cis) {
        let truth = spec.cate(row);
        hits += usize::from(*lo <= truth && truth <= *hi);
        total_len += hi - lo;
    }
    let k = config.k_points as f64;
    Ok(CateRunResult {
        rep,
        coverage: hits as f64 / k,
        mean_length: total_len / k,
        omega,
    })
}

/// Average pointwise CATE coverage. The Wilson interval treats each
/// repetition as one trial, since points within a repetition share a fit.
pub fn run_cate_bench(
    spec: &DgpSpec,
    strategy: Strategy,
    n: usize,
    reps: usize,
    config: &CateBenchConfig,
    base_seed: u64,
    settings: &BenchSettings,
) -> Result<BenchReport> {
    settings.validate(reps)?;
    spec.validate()?;
    if config.k_points == 0 {
        return Err(Error::config("k_points", "must be at least 1"));
    }
    let outcomes = settings.run(|| {
        (0..reps)
            .into_par_iter()
            .map(|rep| cate_repetition(spec, strategy, n, rep, config, base_seed, settings))
            .collect::<Vec<_>>()
    })?;
    let (runs, failures) = split_outcomes(outcomes);
    let hits: Vec<f64> = runs.iter().map(|r| r.coverage).collect();
    let lengths = runs.iter().map(|r| r.mean_length).collect();
    BenchReport::from_parts(spec.id, strategy, n, settings.alpha, &hits, lengths, failures)
}

/// One report per `(strategy, n)`, strategies outermost.
#[allow(clippy::too_many_arguments)]
pub fn length_sweep(
    spec: &DgpSpec,
    strategies: &[Strategy],
    n_grid: &[usize],
    reps: usize,
    prior: &NormalPrior,
    mode: &CalibrationMode,
    base_seed: u64,
    settings: &BenchSettings,
) -> Result<Vec<BenchReport>> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("n_grid", "must be non-empty and strictly increasing"));
    }
    let mut out = Vec::with_capacity(strategies.len() * n_grid.len());
    for &s in strategies {
        for &n in n_grid {
            out.push(run_ate_bench(spec, s, n, reps, prior, mode, base_seed, settings)?);
        }
    }
    Ok(out)
}

/// Strategies whose coverage is weakly closest to `1 − alpha` among `reports`.
pub fn closest_to_nominal(reports: &[&BenchReport]) -> Vec<Strategy> {
    let gap = |r: &BenchReport| (r.coverage - (1.0 - r.alpha)).abs();
    let best = reports.iter().map(|r| gap(r)).fold(f64::INFINITY, f64::min);
    reports
        .iter()
        .filter(|r| gap(r) <= best + 1e-12)
        .map(|r| r.strategy)
        .collect()
}

fn require_known_nuisances(spec: &DgpSpec) -> Result<()> {
    match spec.id {
        DgpId::D1 | DgpId::D2 | DgpId::D3 => Ok(()),
        other => Err(Error::config("dataset", format!("perturbation experiments use D1-D3, got {other}"))),
    }
}

/// `|θ̂(δ) − θ̂(0)|`: change in the pseudo-outcome mean when the true
/// nuisances are perturbed by `delta`.
pub fn point_estimate_shift(spec: &DgpSpec, ds: &crate::dataset::Dataset, strategy: Strategy, delta: f64) -> f64 {
    let oracle = pseudo_with(ds, spec, strategy);
    let feasible = pseudo_with(ds, &PerturbedNuisance { spec, delta }, strategy);
    let diff: Vec<f64> = feasible.values.iter().zip(&oracle.values).map(|(f, o)| f - o).collect();
    mean(&diff).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub strategy: Strategy,
    pub deltas: Vec<f64>,
    pub shifts: Vec<f64>,
    /// Least-squares slope of `ln shift` on `ln delta`.
    pub slope: f64,
}

pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Shift-versus-δ slopes for every strategy on one shared dataset.
pub fn orthogonality_slopes(spec: &DgpSpec, deltas: &[f64], n: usize, base_seed: u64) -> Result<Vec<SlopeEstimate>> {
    require_known_nuisances(spec)?;
    if deltas.len() < 2 || deltas.iter().any(|d| !(*d > 0.0)) || deltas.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::config("deltas", "need at least two positive, strictly decreasing values"));
    }
    let ds = generate(spec, n, &mut Rng::for_task(base_seed, 0, PURPOSE_DATA))?;
    Ok(Strategy::ALL
        .iter()
        .map(|&strategy| {
            let shifts: Vec<f64> = deltas.iter().map(|&d| point_estimate_shift(spec, &ds, strategy, d)).collect();
            SlopeEstimate {
                strategy,
                deltas: deltas.to_vec(),
                slope: log_log_slope(deltas, &shifts),
                shifts,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TvPoint {
    pub strategy: Strategy,
    pub n: usize,
    pub rate: f64,
    pub tv_mean: f64,
    pub tv_se: f64,
}

/// TV between the feasible and oracle diffuse-prior posteriors at one `n`,
/// with nuisance error of size `rate`, averaged over `reps` datasets.
pub fn tv_for_rate(spec: &DgpSpec, strategy: Strategy, n: usize, rate: f64, reps: usize, base_seed: u64) -> Result<TvPoint> {
    require_known_nuisances(spec)?;
    if reps < 2 {
        return Err(Error::config("reps", "need at least 2 repetitions"));
    }
    let prior = NormalPrior::diffuse();
    let tvs = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = Rng::for_task(base_seed ^ (n as u64).rotate_left(32), rep as u64, PURPOSE_DATA);
            let ds = generate(spec, n, &mut rng)?;
            let oracle = pseudo_with(&ds, spec, strategy);
            let feasible = pseudo_with(&ds, &PerturbedNuisance { spec, delta: rate }, strategy);
            let omega = plugin_omega(&oracle)?;
            let q_or = closed_form_posterior(&oracle, &prior, omega)?;
            let q_fe = closed_form_posterior(&feasible, &prior, omega)?;
            gaussian_tv(q_fe.m_p, q_or.m_p, q_or.sd())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TvPoint {
        strategy,
        n,
        rate,
        tv_mean: mean(&tvs),
        tv_se: (sample_variance(&tvs) / reps as f64).sqrt(),
    })
}

/// TV sequence over `n_grid` with injected error `r_n = n^(−beta)`.
pub fn tv_stability(
    spec: &DgpSpec,
    strategy: Strategy,
    beta: f64,
    n_grid: &[usize],
    reps: usize,
    base_seed: u64,
) -> Result<Vec<TvPoint>> {
    if !(beta >= 0.0) {
        return Err(Error::config("beta", "must be >= 0"));
    }
    n_grid
        .iter()
        .map(|&n| tv_for_rate(spec, strategy, n, (n as f64).powf(-beta), reps, base_seed))
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_reports_csv<W: Write>(reports: &[BenchReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset", "strategy", "n", "reps", "coverage", "cov_ci_lo", "cov_ci_hi", "mean_len", "sd_len", "faithful", "failures",
    ])
    .map_err(csv_error)?;
    for r in reports {
        w.write_record([
            r.dataset.to_string(),
            r.strategy.to_string(),
            r.n.to_string(),
            r.reps.to_string(),
            fmt6(r.coverage),
            fmt6(r.coverage_ci.0),
            fmt6(r.coverage_ci.1),
            fmt6(r.mean_length),
            fmt6(r.sd_length),
            r.faithful.to_string(),
            r.failures.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_slopes_csv<W: Write>(slopes: &[SlopeEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strategy", "kind", "delta", "value"]).map_err(csv_error)?;
    for s in slopes {
        for (d, shift) in s.deltas.iter().zip(&s.shifts) {
            w.write_record([s.strategy.to_string(), "shift".into(), format!("{d}"), format!("{shift:.9e}")])
                .map_err(csv_error)?;
        }
        w.write_record([s.strategy.to_string(), "slope".into(), String::new(), fmt6(s.slope)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tv_csv<W: Write>(points: &[TvPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strategy", "n", "rate", "tv_mean", "tv_se"]).map_err(csv_error)?;
    for p in points {
        w.write_record([p.strategy.to_string(), p.n.to_string(), fmt6(p.rate), fmt6(p.tv_mean), fmt6(p.tv_se)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Coverage table with one row per dataset and one column per strategy, one
/// table per sample size. The cell closest to nominal is bold; cells whose
/// Wilson upper bound falls below nominal carry a `faithful=false` marker.
pub fn markdown_table(reports: &[BenchReport]) -> String {
    let mut strategies: Vec<Strategy> = reports.iter().map(|r| r.strategy).collect();
    strategies.sort();
    strategies.dedup();
    let mut ns: Vec<usize> = reports.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();

    let mut s = String::new();
    for n in ns {
        let _ = writeln!(s, "### n = {n}\n");
        let header: Vec<String> = strategies.iter().map(|st| st.to_string()).collect();
        let _ = writeln!(s, "| dataset | {} |", header.join(" | "));
        let _ = writeln!(s, "|---|{}", "---|".repeat(strategies.len()));
        let mut datasets: Vec<DgpId> = reports.iter().filter(|r| r.n == n).map(|r| r.dataset).collect();
        datasets.sort();
        datasets.dedup();
        for d in datasets {
            let row: Vec<&BenchReport> = reports.iter().filter(|r| r.n == n && r.dataset == d).collect();
            let best = closest_to_nominal(&row);
            let cells: Vec<String> = strategies
                .iter()
                .map(|st| match row.iter().find(|r| r.strategy == *st) {
                    None => "-".to_string(),
                    Some(r) => {
                        let mut cell = format!(
                            "{:.3} [{:.3}, {:.3}] len {:.3}",
                            r.coverage, r.coverage_ci.0, r.coverage_ci.1, r.mean_length
                        );
                        if best.contains(st) {
                            cell = format!("**{cell}**");
                        }
                        if !r.faithful {
                            cell.push_str(" faithful=false");
                        }
                        cell
                    }
                })
                .collect();
            let _ = writeln!(s, "| {d} | {} |", cells.join(" | "));
        }
        s.push('\n');
    }
    s
}

/// z-value for a central `1 − alpha` interval.
pub fn z_value(alpha: f64) -> Result<f64> {
    normal_quantile(1.0 - alpha / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::default_spec;

    #[test]
    fn wilson_properties() {
        let (lo, hi) = wilson_interval(1.0, 4);
        assert!(hi == 1.0 && lo > 0.0 && lo < 1.0);
        let (lo, hi) = wilson_interval(0.0, 50);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
        for k in 0..=50 {
            let p = k as f64 / 50.0;
            let (lo, hi) = wilson_interval(p, 50);
            assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
        }
        // Hand value: p = 0.9, n = 50.
        let (lo, hi) = wilson_interval(0.9, 50);
        assert!((lo - 0.786_4).abs() < 1e-3 && (hi - 0.956_5).abs() < 1e-3, "{lo} {hi}");
    }

    #[test]
    fn report_aggregation() {
        let r = BenchReport::from_parts(DgpId::D1, Strategy::Dr, 10, 0.05, &[1.0; 4], vec![1.0, 2.0, 3.0, 4.0], 1).unwrap();
        assert_eq!(r.coverage, 1.0);
        assert!(r.faithful);
        assert_eq!(r.median_length, 2.5);
        assert_eq!(r.failures, 1);
        let r = BenchReport::from_parts(DgpId::D1, Strategy::Dr, 10, 0.05, &[0.0; 50], vec![0.0; 50], 0).unwrap();
        assert_eq!(r.coverage, 0.0);
        assert!(!r.faithful);
        assert!(BenchReport::from_parts(DgpId::D1, Strategy::Dr, 10, 0.05, &[], vec![], 3).is_err());
    }

    #[test]
    fn reps_precondition() {
        let spec = default_spec(DgpId::D1);
        let err = run_ate_bench(&spec, Strategy::Dr, 100, 1, &NormalPrior::default(), &CalibrationMode::Plugin, 0, &BenchSettings::default())
            .unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn repetitions_are_order_independent() {
        let spec = default_spec(DgpId::D2);
        let settings = BenchSettings::default();
        let prior = NormalPrior::default();
        let forward: Vec<RunResult> = (0..6)
            .map(|r| ate_repetition(&spec, Strategy::Dr, 200, r, &prior, &CalibrationMode::Plugin, 5, &settings).unwrap())
            .collect();
        let mut backward: Vec<RunResult> = (0..6)
            .rev()
            .map(|r| ate_repetition(&spec, Strategy::Dr, 200, r, &prior, &CalibrationMode::Plugin, 5, &settings).unwrap())
            .collect();
        backward.reverse();
        assert_eq!(forward, backward);
        let report = run_ate_bench(&spec, Strategy::Dr, 200, 6, &prior, &CalibrationMode::Plugin, 5, &settings).unwrap();
        let lengths: Vec<f64> = forward.iter().map(RunResult::length).collect();
        assert_eq!(report.lengths, lengths);
    }

    #[test]
    fn wide_intervals_cover_constant_cate() {
        let spec = default_spec(DgpId::D1);
        let config = CateBenchConfig {
            engine: CateEngine::Exact,
            kernel: KernelParams { variance: 50.0, ..Default::default() },
            k_points: 1,
        };
        let settings = BenchSettings { alpha: 1e-6, ..Default::default() };
        let r = run_cate_bench(&spec, Strategy::Dr, 150, 3, &config, 1, &settings).unwrap();
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn zero_perturbation_has_no_shift() {
        let spec = default_spec(DgpId::D1);
        let ds = generate(&spec, 500, &mut Rng::new(0, 0)).unwrap();
        for s in Strategy::ALL {
            assert_eq!(point_estimate_shift(&spec, &ds, s, 0.0), 0.0);
        }
        let tv = tv_for_rate(&spec, Strategy::Dr, 300, 0.0, 4, 1).unwrap();
        assert_eq!(tv.tv_mean, 0.0);
    }

    #[test]
    fn outcome_regression_shift_equals_delta() {
        let spec = default_spec(DgpId::D1);
        let ds = generate(&spec, 100, &mut Rng::new(0, 0)).unwrap();
        assert!((point_estimate_shift(&spec, &ds, Strategy::Ra, 0.3) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.2, 0.1, 0.05];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((log_log_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn perturbation_experiments_reject_unknown_nuisances() {
        let spec = default_spec(DgpId::D9);
        assert!(orthogonality_slopes(&spec, &[0.2, 0.1], 100, 0).unwrap_err().is_config());
        assert!(orthogonality_slopes(&default_spec(DgpId::D1), &[0.1, 0.2], 100, 0).is_err());
    }

    #[test]
    fn tv_matches_shared_sd_formula() {
        let spec = default_spec(DgpId::D1);
        let ds = generate(&spec, 400, &mut Rng::for_task(3 ^ 400u64.rotate_left(32), 0, PURPOSE_DATA)).unwrap();
        let oracle = pseudo_with(&ds, &spec, Strategy::Ipw);
        let feasible = pseudo_with(&ds, &PerturbedNuisance { spec: &spec, delta: 0.2 }, Strategy::Ipw);
        let omega = plugin_omega(&oracle).unwrap();
        let sp = (1.0 / (omega * 400.0)).sqrt();
        let gap = (feasible.mean() - oracle.mean()).abs();
        let expect = 2.0 * crate::numerics::normal_cdf(gap / (2.0 * sp)) - 1.0;
        let got = gaussian_tv(feasible.mean(), oracle.mean(), sp).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn csv_and_markdown_layout() {
        let a = BenchReport::from_parts(DgpId::D1, Strategy::Dr, 100, 0.05, &[1.0, 1.0, 0.0, 1.0], vec![1.0; 4], 0).unwrap();
        let mut b = a.clone();
        b.strategy = Strategy::Ra;
        b.coverage = 0.2;
        b.faithful = false;
        let mut buf = Vec::new();
        write_reports_csv(&[a.clone(), b.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "dataset,strategy,n,reps,coverage,cov_ci_lo,cov_ci_hi,mean_len,sd_len,faithful,failures");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("D1,DR,100,4,0.750000,"));
        let md = markdown_table(&[a, b]);
        assert!(md.contains("**0.750"));
        assert!(md.contains("faithful=false"));
    }
}
