//! Command-line front end for the `gbc` binary.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 for a
//! numerical failure inside the pipeline.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::bench::{
    length_sweep, markdown_table, orthogonality_slopes, run_cate_bench, tv_stability, write_reports_csv,
    write_slopes_csv, write_tv_csv, BenchReport, BenchSettings, CalibrationMode, CateBenchConfig,
};
use crate::calibrate::{gpc_omega, gpc_omega_cate, plugin_omega, CalibrationResult, GpcConfig};
use crate::dataset::Dataset;
use crate::dgp::{default_spec, generate, DgpId, DgpSpec};
use crate::error::{Error, Result};
use crate::gibbs_ate::{closed_form_posterior, credible_interval, vi_posterior, NormalPrior};
use crate::gibbs_cate::{fit_cate, pointwise_intervals, CateEngine, KernelParams};
use crate::numerics::{OptimizerConfig, Rng};
use crate::nuisance::{cross_fit, NuisanceConfig};
use crate::pseudo::{cross_fitted_pseudo, Strategy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable that replaces any `--seed` value when set.
pub const SEED_ENV: &str = "GBC_SEED";

const PURPOSE_DATA: u8 = 0;
const PURPOSE_FOLDS: u8 = 1;
const PURPOSE_CALIBRATE: u8 = 2;
const PURPOSE_QUERY: u8 = 3;
const PURPOSE_FIT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "gbc", version, about = "Generalized posteriors for treatment effects from pseudo-outcome losses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a dataset from one of the built-in data-generating processes
    Dgp(DgpArgs),
    /// Fit a generalized posterior for the ATE or CATE and print a JSON summary
    Fit(FitArgs),
    /// Run a Monte Carlo coverage study described by a JSON config
    Bench(BenchArgs),
    /// Nuisance-perturbation experiments (shift slopes or posterior TV)
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct DgpArgs {
    /// Process id, D1 through D9
    #[arg(long, value_name = "ID")]
    pub id: String,
    /// Number of rows
    #[arg(long, value_name = "INT")]
    pub n: usize,
    /// Random seed (overridden by GBC_SEED)
    #[arg(long, value_name = "U64", default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Override a process parameter, e.g. --param tau=1.5 (repeatable)
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimand {
    Ate,
    Cate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Closed,
    Vi,
    ExactGp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibrationArg {
    Plugin,
    Gpc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Ra,
    Ipw,
    #[value(alias = "aipw")]
    Dr,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Ra => Strategy::Ra,
            StrategyArg::Ipw => Strategy::Ipw,
            StrategyArg::Dr => Strategy::Dr,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV with columns x1..xd,a,y
    #[arg(long, value_name = "PATH", conflicts_with = "dgp", required_unless_present = "dgp")]
    pub data: Option<PathBuf>,
    /// Simulate the input from this process instead of reading a file
    #[arg(long, value_name = "ID")]
    pub dgp: Option<String>,
    /// Rows to simulate with --dgp
    #[arg(long, value_name = "INT", default_value_t = 1000)]
    pub n: usize,
    /// Target estimand
    #[arg(long, value_enum, default_value_t = Estimand::Ate)]
    pub estimand: Estimand,
    /// Pseudo-outcome strategy
    #[arg(long, value_enum, default_value_t = StrategyArg::Dr)]
    pub strategy: StrategyArg,
    /// Posterior engine: closed (ATE), vi (ATE or sparse GP for CATE), exact-gp (CATE)
    #[arg(long, value_enum, default_value_t = EngineArg::Closed)]
    pub engine: EngineArg,
    /// How the learning rate omega is chosen
    #[arg(long, value_enum, default_value_t = CalibrationArg::Plugin)]
    pub calibration: CalibrationArg,
    /// Prior mean for the ATE
    #[arg(long, value_name = "FLOAT", default_value_t = 0.0, allow_negative_numbers = true)]
    pub prior_mean: f64,
    /// Prior variance for the ATE
    #[arg(long, value_name = "FLOAT", default_value_t = 1.0)]
    pub prior_var: f64,
    /// Use a flat prior for the ATE (ignores --prior-mean and --prior-var)
    #[arg(long)]
    pub diffuse: bool,
    /// Credible level is 1 - alpha
    #[arg(long, value_name = "FLOAT", default_value_t = 0.05)]
    pub alpha: f64,
    /// Cross-fitting folds
    #[arg(long, value_name = "INT", default_value_t = 5)]
    pub folds: usize,
    /// Bootstrap resamples per calibration step
    #[arg(long, value_name = "INT", default_value_t = 200)]
    pub b_boot: usize,
    /// Maximum calibration steps
    #[arg(long, value_name = "INT", default_value_t = 50)]
    pub max_iter: usize,
    /// Refit nuisances inside every bootstrap resample (ATE only)
    #[arg(long)]
    pub refit_nuisances: bool,
    /// CATE query points sampled from the dataset's covariate rows
    #[arg(long, value_name = "INT", default_value_t = 20)]
    pub k_points: usize,
    /// Inducing points for the sparse GP
    #[arg(long, value_name = "INT", default_value_t = 20)]
    pub m_inducing: usize,
    /// Random seed (overridden by GBC_SEED)
    #[arg(long, value_name = "U64", default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON summary here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON study description
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Directory receiving bench.csv and bench.md
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads (overrides the config; default: all cores)
    #[arg(long, value_name = "INT")]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Slopes,
    Tv,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Which experiment to run
    #[arg(long, value_enum)]
    pub kind: ExperimentKind,
    /// Process with known nuisances, D1 through D3
    #[arg(long, value_name = "ID", default_value = "D1")]
    pub dgp: String,
    /// Sample size for slopes
    #[arg(long, value_name = "INT", default_value_t = 100_000)]
    pub n: usize,
    /// Perturbation sizes for slopes, strictly decreasing
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
    pub deltas: Vec<f64>,
    /// Nuisance-error exponent for tv: r_n = n^-beta
    #[arg(long, value_name = "FLOAT", default_value_t = 0.3)]
    pub beta: f64,
    /// Sample sizes for tv
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "500,2000,8000")]
    pub n_grid: Vec<usize>,
    /// Repetitions per sample size for tv
    #[arg(long, value_name = "INT", default_value_t = 20)]
    pub reps: usize,
    /// Restrict tv to one strategy (default: all three)
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Random seed (overridden by GBC_SEED)
    #[arg(long, value_name = "U64", default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path (default: stdout)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERIC
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Dgp(a) => cmd_dgp(&a, out),
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::Experiment(a) => cmd_experiment(&a, out),
    }
}

fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::config(SEED_ENV, format!("expected an unsigned 64-bit integer, got `{v}`"))),
        Err(_) => Ok(flag),
    }
}

fn parse_dgp(field: &str, value: &str) -> Result<DgpId> {
    value
        .parse::<DgpId>()
        .map_err(|e| Error::config(field, e.to_string()))
}

fn build_spec(id: DgpId, overrides: &[String]) -> Result<DgpSpec> {
    let mut spec = default_spec(id);
    for item in overrides {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::config("--param", format!("expected NAME=VALUE, got `{item}`")))?;
        let name = name.trim();
        if !spec.params.contains_key(name) {
            return Err(Error::config("--param", format!("{id} has no parameter `{name}`")));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::config("--param", format!("`{value}` is not a number")))?;
        spec = spec.with_param(name, value);
    }
    spec.validate()?;
    Ok(spec)
}

pub fn cmd_dgp(args: &DgpArgs, out: &mut dyn Write) -> Result<()> {
    let id = parse_dgp("--id", &args.id)?;
    let spec = build_spec(id, &args.params)?;
    if args.n == 0 {
        return Err(Error::config("--n", "must be at least 1"));
    }
    let seed = effective_seed(args.seed)?;
    let ds = generate(&spec, args.n, &mut Rng::for_task(seed, 0, PURPOSE_DATA))?;
    ds.write_csv(&args.out)?;
    writeln!(out, "wrote {} rows to {}", args.n, args.out.display())?;
    Ok(())
}

fn load_fit_data(args: &FitArgs, seed: u64) -> Result<Dataset> {
    match (&args.data, &args.dgp) {
        (Some(path), _) => Dataset::read_csv(path),
        (None, Some(id)) => {
            let spec = default_spec(parse_dgp("--dgp", id)?);
            generate(&spec, args.n, &mut Rng::for_task(seed, 0, PURPOSE_DATA))
        }
        (None, None) => Err(Error::config("--data", "either --data or --dgp is required")),
    }
}

fn calibration_json(result: Option<&CalibrationResult>) -> Value {
    match result {
        None => json!({ "mode": "plugin" }),
        Some(c) => json!({
            "mode": "gpc",
            "iterations": c.iterations,
            "achieved_bootstrap_coverage": c.achieved_bootstrap_coverage,
            "converged": c.converged,
        }),
    }
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<()> {
    match (args.estimand, args.engine) {
        (Estimand::Cate, EngineArg::Closed) => {
            return Err(Error::config("--engine", "the CATE has no closed-form engine; use vi or exact-gp"))
        }
        (Estimand::Ate, EngineArg::ExactGp) => {
            return Err(Error::config("--engine", "exact-gp applies to the CATE only; use closed or vi"))
        }
        _ => {}
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Error::config("--alpha", "must lie in (0, 1)"));
    }
    let seed = effective_seed(args.seed)?;
    let ds = load_fit_data(args, seed)?;
    let strategy = Strategy::from(args.strategy);
    let nuisance = NuisanceConfig {
        folds: args.folds,
        ..NuisanceConfig::default()
    };
    nuisance.validate()?;
    let gpc = GpcConfig {
        alpha: args.alpha,
        b_boot: args.b_boot,
        max_iter: args.max_iter,
        refit_nuisances: args.refit_nuisances,
        ..GpcConfig::default()
    };
    if args.calibration == CalibrationArg::Gpc {
        gpc.validate()?;
    }

    let cf = cross_fit(&ds, &nuisance, &mut Rng::for_task(seed, 0, PURPOSE_FOLDS))?;
    let pseudo = cross_fitted_pseudo(&ds, &cf, strategy)?;

    let summary = match args.estimand {
        Estimand::Ate => {
            let prior = if args.diffuse {
                NormalPrior::diffuse()
            } else {
                NormalPrior::new(args.prior_mean, args.prior_var).map_err(|e| Error::config("--prior-var", e.to_string()))?
            };
            let calibration = match args.calibration {
                CalibrationArg::Plugin => None,
                CalibrationArg::Gpc => {
                    // Same fold stream, so the refit path starts from identical nuisances.
                    let mut rng = Rng::for_task(seed, 0, PURPOSE_FOLDS);
                    let result = if gpc.refit_nuisances {
                        gpc_omega(&ds, strategy, &prior, &gpc, &nuisance, &mut rng)?
                    } else {
                        crate::calibrate::gpc_omega_from_pseudo(&pseudo, &prior, &gpc, &mut Rng::for_task(seed, 0, PURPOSE_CALIBRATE))?
                    };
                    Some(result)
                }
            };
            let omega = match &calibration {
                Some(c) => c.omega,
                None => plugin_omega(&pseudo)?,
            };
            let post = match args.engine {
                EngineArg::Vi => {
                    vi_posterior(&pseudo, &prior, omega, &OptimizerConfig::default(), &mut Rng::for_task(seed, 0, PURPOSE_FIT))?
                }
                _ => closed_form_posterior(&pseudo, &prior, omega)?,
            };
            let (lo, hi) = credible_interval(&post, args.alpha)?;
            json!({
                "estimand": "ate",
                "strategy": strategy.to_string(),
                "engine": engine_name(args.engine),
                "omega": omega,
                "posterior": { "mean": post.m_p, "sd": post.sd() },
                "cri": { "lo": lo, "hi": hi, "level": 1.0 - args.alpha },
                "calibration": calibration_json(calibration.as_ref()),
                "n": ds.n(),
                "seed": seed,
            })
        }
        Estimand::Cate => {
            let engine = match args.engine {
                EngineArg::ExactGp => CateEngine::Exact,
                _ => CateEngine::Svgp {
                    m_inducing: args.m_inducing,
                    optimizer: OptimizerConfig::default(),
                },
            };
            if args.k_points == 0 || args.k_points > ds.n() {
                return Err(Error::config("--k-points", format!("must lie in 1..={}", ds.n())));
            }
            let kernel = KernelParams::default();
            let mut qrng = Rng::for_task(seed, 0, PURPOSE_QUERY);
            let rows = qrng.permutation(ds.n());
            let xq = ds.x().select_rows(&rows[..args.k_points]);
            let calibration = match args.calibration {
                CalibrationArg::Plugin => None,
                CalibrationArg::Gpc => Some(gpc_omega_cate(
                    ds.x(),
                    &pseudo,
                    &kernel,
                    &engine,
                    &xq,
                    &gpc,
                    &mut Rng::for_task(seed, 0, PURPOSE_CALIBRATE),
                )?),
            };
            let omega = match &calibration {
                Some(c) => c.omega,
                None => plugin_omega(&pseudo)?,
            };
            let post = fit_cate(&engine, ds.x(), &pseudo, &kernel, omega, &mut Rng::for_task(seed, 0, PURPOSE_FIT))?;
            let (means, vars) = post.predict(&xq)?;
            let cis = pointwise_intervals(&means, &vars, args.alpha)?;
            let points: Vec<Value> = (0..xq.rows())
                .map(|i| json!({ "x": xq.row(i), "mean": means[i], "sd": vars[i].sqrt() }))
                .collect();
            let cri: Vec<Value> = cis.iter().map(|(lo, hi)| json!({ "lo": lo, "hi": hi })).collect();
            json!({
                "estimand": "cate",
                "strategy": strategy.to_string(),
                "engine": engine_name(args.engine),
                "omega": omega,
                "posterior": { "pointwise": points },
                "cri": { "level": 1.0 - args.alpha, "pointwise": cri },
                "calibration": calibration_json(calibration.as_ref()),
                "n": ds.n(),
                "seed": seed,
            })
        }
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.into()))? + "\n";
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn engine_name(e: EngineArg) -> &'static str {
    match e {
        EngineArg::Closed => "closed",
        EngineArg::Vi => "vi",
        EngineArg::ExactGp => "exact-gp",
    }
}

/// A validated bench study.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub datasets: Vec<DgpId>,
    pub strategies: Vec<Strategy>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub alpha: f64,
    pub estimand: Estimand,
    pub calibration: CalibrationMode,
    pub prior: NormalPrior,
    pub seed: u64,
    pub parallelism: Option<usize>,
    pub k_points: usize,
    pub m_inducing: usize,
}

const BENCH_KEYS: &[&str] = &[
    "datasets",
    "strategies",
    "n",
    "n_grid",
    "reps",
    "alpha",
    "estimand",
    "calibration",
    "seed",
    "parallelism",
    "prior",
    "b_boot",
    "k_points",
    "m_inducing",
];

fn get_uint(obj: &Map<String, Value>, key: &str) -> Result<Option<u64>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(Some)
            .ok_or_else(|| Error::config(key, format!("expected a non-negative integer, got {v}"))),
    }
}

fn get_str<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<Option<&'a str>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_str()
            .map(Some)
            .ok_or_else(|| Error::config(key, format!("expected a string, got {v}"))),
    }
}

fn get_str_list(obj: &Map<String, Value>, key: &str) -> Result<Vec<String>> {
    let arr = obj
        .get(key)
        .ok_or_else(|| Error::config(key, "missing required key"))?
        .as_array()
        .ok_or_else(|| Error::config(key, "expected an array of strings"))?;
    if arr.is_empty() {
        return Err(Error::config(key, "must not be empty"));
    }
    arr.iter()
        .map(|v| {
            v.as_str()
                .map(str::to_owned)
                .ok_or_else(|| Error::config(key, format!("expected a string, got {v}")))
        })
        .collect()
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| Error::config("config", format!("invalid JSON: {e}")))?;
        let obj = root.as_object().ok_or_else(|| Error::config("config", "expected a JSON object"))?;
        if let Some(unknown) = obj.keys().find(|k| !BENCH_KEYS.contains(&k.as_str())) {
            return Err(Error::config(unknown.clone(), "unknown key"));
        }

        let datasets = get_str_list(obj, "datasets")?
            .iter()
            .map(|s| parse_dgp("datasets", s))
            .collect::<Result<Vec<_>>>()?;
        let strategies = get_str_list(obj, "strategies")?
            .iter()
            .map(|s| s.parse::<Strategy>().map_err(|e| Error::config("strategies", e.to_string())))
            .collect::<Result<Vec<_>>>()?;

        let n_grid: Vec<usize> = match (obj.get("n"), obj.get("n_grid")) {
            (Some(_), Some(_)) => return Err(Error::config("n_grid", "give either n or n_grid, not both")),
            (Some(_), None) => vec![get_uint(obj, "n")?.ok_or_else(|| Error::config("n", "expected an integer"))? as usize],
            (None, Some(v)) => v
                .as_array()
                .ok_or_else(|| Error::config("n_grid", "expected an array of integers"))?
                .iter()
                .map(|x| x.as_u64().map(|u| u as usize).ok_or_else(|| Error::config("n_grid", format!("bad entry {x}"))))
                .collect::<Result<_>>()?,
            (None, None) => return Err(Error::config("n", "missing required key (or n_grid)")),
        };
        if n_grid.is_empty() || n_grid.contains(&0) || n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("n_grid", "sample sizes must be positive and strictly increasing"));
        }

        let reps = get_uint(obj, "reps")?.ok_or_else(|| Error::config("reps", "missing required key"))? as usize;
        if reps < 2 {
            return Err(Error::config("reps", format!("need at least 2 repetitions, got {reps}")));
        }
        let alpha = match obj.get("alpha") {
            None => 0.05,
            Some(v) => v.as_f64().ok_or_else(|| Error::config("alpha", format!("expected a number, got {v}")))?,
        };
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::config("alpha", "must lie in (0, 1)"));
        }
        let estimand = match get_str(obj, "estimand")?.unwrap_or("ate") {
            "ate" => Estimand::Ate,
            "cate" => Estimand::Cate,
            other => return Err(Error::config("estimand", format!("expected ate or cate, got `{other}`"))),
        };
        let b_boot = get_uint(obj, "b_boot")?.map(|v| v as usize);
        let calibration = match get_str(obj, "calibration")?.unwrap_or("plugin") {
            "plugin" => CalibrationMode::Plugin,
            "gpc" => {
                let cfg = GpcConfig {
                    alpha,
                    b_boot: b_boot.unwrap_or(GpcConfig::default().b_boot),
                    ..GpcConfig::default()
                };
                cfg.validate().map_err(|e| Error::config("b_boot", e.to_string()))?;
                CalibrationMode::Gpc(cfg)
            }
            other => return Err(Error::config("calibration", format!("expected plugin or gpc, got `{other}`"))),
        };
        if estimand == Estimand::Cate && calibration != CalibrationMode::Plugin {
            return Err(Error::config("calibration", "CATE studies use the plug-in learning rate"));
        }
        let prior = match obj.get("prior") {
            None => NormalPrior::default(),
            Some(Value::String(s)) if s == "diffuse" => NormalPrior::diffuse(),
            Some(Value::String(s)) if s == "default" => NormalPrior::default(),
            Some(Value::Object(p)) => {
                let mean = p.get("mean").and_then(Value::as_f64).ok_or_else(|| Error::config("prior", "needs numeric `mean`"))?;
                let var = p.get("var").and_then(Value::as_f64).ok_or_else(|| Error::config("prior", "needs numeric `var`"))?;
                NormalPrior::new(mean, var).map_err(|e| Error::config("prior", e.to_string()))?
            }
            Some(v) => return Err(Error::config("prior", format!("expected \"diffuse\", \"default\" or {{mean, var}}, got {v}"))),
        };
        let seed = get_uint(obj, "seed")?.unwrap_or(0);
        let parallelism = get_uint(obj, "parallelism")?.map(|v| v as usize);
        if parallelism == Some(0) {
            return Err(Error::config("parallelism", "must be at least 1"));
        }
        let k_points = get_uint(obj, "k_points")?.unwrap_or(100) as usize;
        if k_points == 0 {
            return Err(Error::config("k_points", "must be at least 1"));
        }
        let m_inducing = get_uint(obj, "m_inducing")?.unwrap_or(20) as usize;
        if m_inducing == 0 {
            return Err(Error::config("m_inducing", "must be at least 1"));
        }
        Ok(Self {
            datasets,
            strategies,
            n_grid,
            reps,
            alpha,
            estimand,
            calibration,
            prior,
            seed,
            parallelism,
            k_points,
            m_inducing,
        })
    }
}

/// Runs every `(dataset, strategy, n)` cell of a study in a fixed order.
pub fn run_bench_config(config: &BenchConfig) -> Result<Vec<BenchReport>> {
    let settings = BenchSettings {
        alpha: config.alpha,
        nuisance: NuisanceConfig::default(),
        parallelism: config.parallelism,
    };
    let mut reports = Vec::new();
    for &id in &config.datasets {
        let spec = default_spec(id);
        match config.estimand {
            Estimand::Ate => {
                let mut rows = length_sweep(
                    &spec,
                    &config.strategies,
                    &config.n_grid,
                    config.reps,
                    &config.prior,
                    &config.calibration,
                    config.seed,
                    &settings,
                )?;
                rows.sort_by_key(|r| r.n);
                reports.extend(rows);
            }
            Estimand::Cate => {
                let cate = CateBenchConfig {
                    kernel: KernelParams::default(),
                    engine: CateEngine::Svgp {
                        m_inducing: config.m_inducing,
                        optimizer: OptimizerConfig::default(),
                    },
                    k_points: config.k_points,
                };
                for &n in &config.n_grid {
                    for &s in &config.strategies {
                        reports.push(run_cate_bench(&spec, s, n, config.reps, &cate, config.seed, &settings)?);
                    }
                }
            }
        }
    }
    Ok(reports)
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&args.config).map_err(|e| Error::config("--config", format!("{}: {e}", args.config.display())))?;
    let mut config = BenchConfig::from_json(&text)?;
    if let Some(p) = args.parallelism {
        if p == 0 {
            return Err(Error::config("--parallelism", "must be at least 1"));
        }
        config.parallelism = Some(p);
    }
    config.seed = effective_seed(config.seed)?;
    let reports = run_bench_config(&config)?;
    fs::create_dir_all(&args.out_dir)?;
    let csv_path = args.out_dir.join("bench.csv");
    let md_path = args.out_dir.join("bench.md");
    write_reports_csv(&reports, fs::File::create(&csv_path)?)?;
    fs::write(&md_path, markdown_table(&reports))?;
    writeln!(out, "wrote {} rows to {} and {}", reports.len(), csv_path.display(), md_path.display())?;
    Ok(())
}

fn write_to(path: Option<&Path>, out: &mut dyn Write, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = fs::File::create(p)?;
            fill(&mut file)
        }
        None => fill(out),
    }
}

pub fn cmd_experiment(args: &ExperimentArgs, out: &mut dyn Write) -> Result<()> {
    let spec = default_spec(parse_dgp("--dgp", &args.dgp)?);
    let seed = effective_seed(args.seed)?;
    match args.kind {
        ExperimentKind::Slopes => {
            let slopes = orthogonality_slopes(&spec, &args.deltas, args.n, seed)?;
            write_to(args.out.as_deref(), out, |w| write_slopes_csv(&slopes, w))
        }
        ExperimentKind::Tv => {
            let strategies: Vec<Strategy> = match args.strategy {
                Some(s) => vec![s.into()],
                None => Strategy::ALL.to_vec(),
            };
            let mut points = Vec::new();
            for s in strategies {
                points.extend(tv_stability(&spec, s, args.beta, &args.n_grid, args.reps, seed)?);
            }
            write_to(args.out.as_deref(), out, |w| write_tv_csv(&points, w))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_config_names_offending_key() {
        let cases = [
            (r#"{"datasets":["D1"],"strategies":["dr"],"n":100,"reps":1}"#, "reps"),
            (r#"{"datasets":["D99"],"strategies":["dr"],"n":100,"reps":3}"#, "datasets"),
            (r#"{"datasets":["D1"],"strategies":["xx"],"n":100,"reps":3}"#, "strategies"),
            (r#"{"datasets":["D1"],"strategies":["dr"],"reps":3}"#, "n"),
            (r#"{"datasets":["D1"],"strategies":["dr"],"n":100,"reps":3,"alpha":2}"#, "alpha"),
            (r#"{"datasets":["D1"],"strategies":["dr"],"n":100,"reps":3,"colour":1}"#, "colour"),
            (r#"{"datasets":["D1"],"strategies":["dr"],"n_grid":[200,100],"reps":3}"#, "n_grid"),
            (r#"{"strategies":["dr"],"n":100,"reps":3}"#, "datasets"),
        ];
        for (text, key) in cases {
            match BenchConfig::from_json(text) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn bench_config_defaults() {
        let c = BenchConfig::from_json(r#"{"datasets":["d1","D2"],"strategies":["ra","aipw"],"n":100,"reps":4}"#).unwrap();
        assert_eq!(c.datasets, vec![DgpId::D1, DgpId::D2]);
        assert_eq!(c.strategies, vec![Strategy::Ra, Strategy::Dr]);
        assert_eq!(c.n_grid, vec![100]);
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.calibration, CalibrationMode::Plugin);
        assert_eq!(c.prior, NormalPrior::default());
    }

    #[test]
    fn param_overrides() {
        let spec = build_spec(DgpId::D1, &["tau=3.5".into()]).unwrap();
        assert_eq!(spec.params["tau"], 3.5);
        assert!(build_spec(DgpId::D1, &["nope=1".into()]).unwrap_err().is_config());
        assert!(build_spec(DgpId::D1, &["tau".into()]).unwrap_err().is_config());
    }
}
