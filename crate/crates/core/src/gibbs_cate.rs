//! Generalized posterior over the CATE function: a Gaussian-process prior with
//! a Gaussian working likelihood of variance `1/ω` on the pseudo-outcomes.
//!
//! Two engines: a dense exact GP (the oracle) and a sparse inducing-point
//! variational GP fitted with Adam. Kernel hyperparameters and inducing
//! locations stay fixed; only the variational distribution is learned.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{adam_minimize, dot, Cholesky, Matrix, OptimizerConfig, Rng};
use crate::pseudo::PseudoOutcomes;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    Matern52,
    Rbf,
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "matern52" | "matern-5/2" | "matern" => Ok(KernelFamily::Matern52),
            "rbf" => Ok(KernelFamily::Rbf),
            other => Err(Error::config("kernel", format!("unknown kernel family `{other}`"))),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Matern52 => "matern52",
            KernelFamily::Rbf => "rbf",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub family: KernelFamily,
    pub lengthscale: f64,
    pub variance: f64,
    /// Nugget added wherever two inputs coincide.
    pub jitter: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            family: KernelFamily::Matern52,
            lengthscale: 2.0,
            variance: 2.0,
            jitter: 1e-4,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > 0.0) {
            return Err(Error::config("lengthscale", "must be > 0"));
        }
        if !(self.variance > 0.0) {
            return Err(Error::config("variance", "must be > 0"));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::config("jitter", "must be >= 0"));
        }
        Ok(())
    }

    /// Stationary covariance at Euclidean distance `r`, without nugget.
    pub fn at_distance(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Matern52 => {
                let s = 5f64.sqrt() * r / self.lengthscale;
                self.variance * (1.0 + s + s * s / 3.0) * (-s).exp()
            }
            KernelFamily::Rbf => self.variance * (-r * r / (2.0 * self.lengthscale * self.lengthscale)).exp(),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
        let base = self.at_distance(r2.sqrt());
        if a == b {
            base + self.jitter
        } else {
            base
        }
    }

    /// Prior variance at any single input.
    pub fn prior_variance(&self) -> f64 {
        self.variance + self.jitter
    }
}

pub fn kernel_matrix(params: &KernelParams, xa: &Matrix, xb: &Matrix) -> Result<Matrix> {
    if xa.cols() != xb.cols() {
        return Err(Error::Dimension(format!("inputs of dimension {} and {}", xa.cols(), xb.cols())));
    }
    let mut k = Matrix::zeros(xa.rows(), xb.rows());
    for i in 0..xa.rows() {
        let a = xa.row(i);
        for j in 0..xb.rows() {
            k[(i, j)] = params.eval(a, xb.row(j));
        }
    }
    Ok(k)
}

/// Pointwise Gaussian marginals of a fitted CATE posterior.
pub trait PointwisePosterior {
    fn predict(&self, x_query: &Matrix) -> Result<(Vec<f64>, Vec<f64>)>;
}

const EXACT_GP_MAX_N: usize = 2000;
const MIN_VARIANCE: f64 = 1e-12;

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!("omega must be a positive finite number, got {omega}")));
    }
    Ok(())
}

/// Dense GP regression of centered pseudo-outcomes with noise variance `1/ω`.
#[derive(Clone, Debug)]
pub struct ExactGp {
    params: KernelParams,
    x_train: Matrix,
    chol: Cholesky,
    weights: Vec<f64>,
    pub const_mean: f64,
    pub omega: f64,
}

pub fn exact_gp_posterior(x: &Matrix, pseudo: &PseudoOutcomes, params: &KernelParams, omega: f64) -> Result<ExactGp> {
    params.validate()?;
    check_omega(omega)?;
    let n = x.rows();
    if n != pseudo.n() {
        return Err(Error::Dimension(format!("{n} inputs, {} pseudo-outcomes", pseudo.n())));
    }
    if n == 0 || n > EXACT_GP_MAX_N {
        return Err(Error::Domain(format!("exact GP supports 1..={EXACT_GP_MAX_N} points, got {n}")));
    }
    let const_mean = pseudo.mean();
    let centered: Vec<f64> = pseudo.values.iter().map(|v| v - const_mean).collect();
    let mut k = kernel_matrix(params, x, x)?;
    k.add_diagonal(1.0 / omega);
    let chol = Cholesky::new(&k)?;
    let weights = chol.solve_vec(&centered);
    Ok(ExactGp {
        params: *params,
        x_train: x.clone(),
        chol,
        weights,
        const_mean,
        omega,
    })
}

impl PointwisePosterior for ExactGp {
    fn predict(&self, x_query: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let kq = kernel_matrix(&self.params, x_query, &self.x_train)?;
        let mut means = Vec::with_capacity(x_query.rows());
        let mut vars = Vec::with_capacity(x_query.rows());
        for i in 0..x_query.rows() {
            let k_star = kq.row(i);
            means.push(self.const_mean + dot(k_star, &self.weights));
            let mut v = k_star.to_vec();
            self.chol.solve_lower_in_place(&mut v);
            let prior = self.params.eval(x_query.row(i), x_query.row(i));
            vars.push((prior - dot(&v, &v)).max(MIN_VARIANCE));
        }
        Ok((means, vars))
    }
}

/// Sparse variational GP posterior `q(u) = N(q_mean, q_cov)` at the inducing inputs.
#[derive(Clone, Debug)]
pub struct GpPosterior {
    pub kernel: KernelParams,
    pub inducing_x: Matrix,
    pub q_mean: Vec<f64>,
    pub q_cov: Matrix,
    pub const_mean: f64,
    pub omega: f64,
    /// Negative ELBO at the fitted parameters, up to an additive constant.
    pub neg_elbo: f64,
    kmm_chol: Cholesky,
    // Whitened parameters: u = L_mm v, q(v) = N(white_mean, white_chol white_cholᵀ).
    white_mean: Vec<f64>,
    white_chol: Matrix,
}

/// Sufficient statistics of the uncollapsed bound in whitened coordinates.
struct SvgpObjective {
    m: usize,
    omega: f64,
    /// `AᵀA` with `A = K_nm L_mm⁻ᵀ`.
    gram: Matrix,
    /// `Aᵀ ỹ`.
    cross: Vec<f64>,
    y_sq: f64,
    /// `Σᵢ (k_ii − ‖aᵢ‖²)`.
    residual_var: f64,
}

/// Index of the packed lower-triangular entry `(i, j)`, `j ≤ i`.
fn tri_index(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl SvgpObjective {
    fn unpack(&self, params: &[f64]) -> (Vec<f64>, Matrix) {
        let m = self.m;
        let mean = params[..m].to_vec();
        let packed = &params[m..];
        let mut l = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..i {
                l[(i, j)] = packed[tri_index(i, j)];
            }
            l[(i, i)] = packed[tri_index(i, i)].exp();
        }
        (mean, l)
    }

    /// Negative ELBO up to the additive constant `(n/2) log(2π/ω) − M/2`.
    fn value(&self, params: &[f64]) -> f64 {
        let (mean, l) = self.unpack(params);
        let s = l.matmul(&l.transpose()).expect("square");
        let gm = self.gram.matvec(&mean);
        let trace_gs: f64 = (0..self.m).map(|i| dot(self.gram.row(i), &s.transpose().row(i))).sum();
        let trace_s: f64 = (0..self.m).map(|i| s[(i, i)]).sum();
        let log_det: f64 = (0..self.m).map(|i| 2.0 * l[(i, i)].ln()).sum();
        let fit = self.y_sq - 2.0 * dot(&self.cross, &mean) + dot(&mean, &gm) + trace_gs + self.residual_var;
        0.5 * self.omega * fit + 0.5 * (trace_s + dot(&mean, &mean) - log_det)
    }

    fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let m = self.m;
        let (mean, l) = self.unpack(params);
        let mut out = vec![0.0; params.len()];
        let gm = self.gram.matvec(&mean);
        for i in 0..m {
            out[i] = self.omega * (gm[i] - self.cross[i]) + mean[i];
        }
        // (ωG + I) L, lower triangle only.
        for i in 0..m {
            let g_row = self.gram.row(i);
            for j in 0..=i {
                let mut acc = l[(i, j)];
                for k in j..m {
                    acc += self.omega * g_row[k] * l[(k, j)];
                }
                let idx = m + tri_index(i, j);
                out[idx] = if i == j { acc * l[(i, i)] - 1.0 } else { acc };
            }
        }
        out
    }
}

/// Fits the sparse variational GP with `m_inducing` inducing inputs drawn as a
/// seeded subsample of the training covariates.
pub fn svgp_fit(
    x: &Matrix,
    pseudo: &PseudoOutcomes,
    params: &KernelParams,
    omega: f64,
    m_inducing: usize,
    config: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<GpPosterior> {
    let n = x.rows();
    if m_inducing == 0 || m_inducing > n {
        return Err(Error::Domain(format!("need 1 <= M <= n, got M={m_inducing}, n={n}")));
    }
    let perm = rng.permutation(n);
    let inducing = x.select_rows(&perm[..m_inducing]);
    svgp_fit_at(x, pseudo, params, omega, inducing, config, rng)
}

/// As [`svgp_fit`] with caller-chosen inducing inputs.
pub fn svgp_fit_at(
    x: &Matrix,
    pseudo: &PseudoOutcomes,
    params: &KernelParams,
    omega: f64,
    inducing_x: Matrix,
    config: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<GpPosterior> {
    params.validate()?;
    check_omega(omega)?;
    let n = x.rows();
    if n != pseudo.n() {
        return Err(Error::Dimension(format!("{n} inputs, {} pseudo-outcomes", pseudo.n())));
    }
    let m = inducing_x.rows();
    let const_mean = pseudo.mean();
    let centered: Vec<f64> = pseudo.values.iter().map(|v| v - const_mean).collect();

    let kmm = kernel_matrix(params, &inducing_x, &inducing_x)?;
    let kmm_chol = Cholesky::new(&kmm)?;
    let knm = kernel_matrix(params, x, &inducing_x)?;

    let mut gram = Matrix::zeros(m, m);
    let mut cross = vec![0.0; m];
    let mut residual_var = 0.0;
    let mut a = vec![0.0; m];
    for i in 0..n {
        a.copy_from_slice(knm.row(i));
        kmm_chol.solve_lower_in_place(&mut a);
        residual_var += params.eval(x.row(i), x.row(i)) - dot(&a, &a);
        for p in 0..m {
            cross[p] += a[p] * centered[i];
            for q in p..m {
                gram[(p, q)] += a[p] * a[q];
            }
        }
    }
    for p in 0..m {
        for q in 0..p {
            gram[(p, q)] = gram[(q, p)];
        }
    }
    let objective = SvgpObjective {
        m,
        omega,
        gram,
        cross,
        y_sq: dot(&centered, &centered),
        residual_var,
    };

    // Start from the prior: zero mean, identity whitened covariance.
    let init = vec![0.0; m + m * (m + 1) / 2];
    let fitted = adam_minimize(|p, _| objective.gradient(p), &init, config, rng)?;
    let neg_elbo = objective.value(&fitted);
    let (white_mean, white_chol) = objective.unpack(&fitted);

    let lmm = kmm_chol.factor();
    let q_mean = lmm.matvec(&white_mean);
    let lw = lmm.matmul(&white_chol)?;
    let q_cov = lw.matmul(&lw.transpose())?;

    Ok(GpPosterior {
        kernel: *params,
        inducing_x,
        q_mean,
        q_cov,
        const_mean,
        omega,
        neg_elbo,
        kmm_chol,
        white_mean,
        white_chol,
    })
}

impl PointwisePosterior for GpPosterior {
    fn predict(&self, x_query: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let kqm = kernel_matrix(&self.kernel, x_query, &self.inducing_x)?;
        let m = self.inducing_x.rows();
        let mut means = Vec::with_capacity(x_query.rows());
        let mut vars = Vec::with_capacity(x_query.rows());
        let mut a = vec![0.0; m];
        let mut la = vec![0.0; m];
        for i in 0..x_query.rows() {
            a.copy_from_slice(kqm.row(i));
            self.kmm_chol.solve_lower_in_place(&mut a);
            means.push(self.const_mean + dot(&a, &self.white_mean));
            // aᵀ S a = ‖Lᵀ a‖² for whitened S = L Lᵀ.
            for (j, out) in la.iter_mut().enumerate() {
                *out = (j..m).map(|k| self.white_chol[(k, j)] * a[k]).sum();
            }
            let prior = self.kernel.eval(x_query.row(i), x_query.row(i));
            vars.push((prior - dot(&a, &a) + dot(&la, &la)).max(MIN_VARIANCE));
        }
        Ok((means, vars))
    }
}

/// Which posterior engine to fit for the CATE.
#[derive(Clone, Debug, PartialEq)]
pub enum CateEngine {
    Exact,
    Svgp { m_inducing: usize, optimizer: OptimizerConfig },
}

impl Default for CateEngine {
    fn default() -> Self {
        CateEngine::Svgp {
            m_inducing: 20,
            optimizer: OptimizerConfig::default(),
        }
    }
}

pub type BoxedPosterior = Box<dyn PointwisePosterior + Send + Sync>;

pub fn fit_cate(
    engine: &CateEngine,
    x: &Matrix,
    pseudo: &PseudoOutcomes,
    params: &KernelParams,
    omega: f64,
    rng: &mut Rng,
) -> Result<BoxedPosterior> {
    Ok(match engine {
        CateEngine::Exact => Box::new(exact_gp_posterior(x, pseudo, params, omega)?),
        CateEngine::Svgp { m_inducing, optimizer } => {
            Box::new(svgp_fit(x, pseudo, params, omega, (*m_inducing).min(x.rows()), optimizer, rng)?)
        }
    })
}

/// Pointwise central `1 − alpha` intervals from means and variances.
pub fn pointwise_intervals(means: &[f64], vars: &[f64], alpha: f64) -> Result<Vec<(f64, f64)>> {
    let z = crate::numerics::normal_quantile(1.0 - alpha / 2.0)?;
    Ok(means
        .iter()
        .zip(vars)
        .map(|(m, v)| {
            let half = z * v.sqrt();
            (m - half, m + half)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudo::Strategy;

    fn random_inputs(n: usize, d: usize, rng: &mut Rng) -> Matrix {
        Matrix::from_vec(n, d, (0..n * d).map(|_| rng.normal()).collect()).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let p = KernelParams::default();
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let k = kernel_matrix(&p, &x, &x).unwrap();
        assert_eq!(k[(0, 0)], 2.0 + 1e-4);
        let s5 = 5f64.sqrt();
        let expect = 2.0 * (1.0 + s5 + 5.0 / 3.0) * (-s5).exp();
        assert!((k[(0, 1)] - expect).abs() < 1e-14);
        assert!((expect - 1.047_988).abs() < 1e-6);

        let rbf = KernelParams {
            family: KernelFamily::Rbf,
            lengthscale: 1.0,
            variance: 1.0,
            jitter: 0.0,
        };
        assert!(rbf.at_distance(40.0) < 1e-300);
        assert_eq!(rbf.at_distance(0.0), 1.0);
    }

    #[test]
    fn exact_gp_single_point() {
        let p = KernelParams::default();
        let x = Matrix::from_rows(&[vec![0.3, -0.2]]).unwrap();
        let pseudo = PseudoOutcomes::new(vec![1.7], Strategy::Dr);
        let omega = 0.5;
        let gp = exact_gp_posterior(&x, &pseudo, &p, omega).unwrap();
        let (m, v) = gp.predict(&x).unwrap();
        let k00 = p.prior_variance();
        assert!((m[0] - (1.7 + k00 / (k00 + 1.0 / omega) * 0.0)).abs() < 1e-12);
        let expect_var = k00 - k00 * k00 / (k00 + 1.0 / omega);
        assert!((v[0] - expect_var).abs() < 1e-12);
    }

    #[test]
    fn exact_gp_two_points_hand_formula() {
        // Two training points: with centered targets ±1 the 2x2 solve is explicit.
        let p = KernelParams::default();
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let pseudo = PseudoOutcomes::new(vec![0.0, 2.0], Strategy::Dr);
        let omega = 2.0;
        let gp = exact_gp_posterior(&x, &pseudo, &p, omega).unwrap();
        let a = p.prior_variance() + 0.5;
        let b = p.at_distance(1.0);
        // (K + I/ω)⁻¹ (−1, 1) = (−1, 1)/(a − b)
        let w = 1.0 / (a - b);
        let (m, _) = gp.predict(&x).unwrap();
        let k0 = [p.prior_variance(), b];
        assert!((m[0] - (1.0 + (k0[1] - k0[0]) * w)).abs() < 1e-12);
    }

    #[test]
    fn constant_pseudo_interpolates_constant() {
        let mut rng = Rng::new(1, 0);
        let x = random_inputs(30, 2, &mut rng);
        let pseudo = PseudoOutcomes::new(vec![3.25; 30], Strategy::Dr);
        let gp = exact_gp_posterior(&x, &pseudo, &KernelParams::default(), 1e6).unwrap();
        let q = random_inputs(10, 2, &mut rng);
        let (m, _) = gp.predict(&q).unwrap();
        assert!(m.iter().all(|v| (v - 3.25).abs() < 1e-9));

        let sv = svgp_fit(&x, &pseudo, &KernelParams::default(), 1.0, 10, &OptimizerConfig::default(), &mut rng).unwrap();
        let (m, v) = sv.predict(&q).unwrap();
        assert!(m.iter().all(|val| (val - 3.25).abs() < 1e-2));
        assert!(v.iter().all(|val| *val > 0.0));
    }

    #[test]
    fn conditioning_reduces_variance_at_training_points() {
        let mut rng = Rng::new(2, 0);
        let x = random_inputs(25, 2, &mut rng);
        let pseudo = PseudoOutcomes::new((0..25).map(|_| rng.normal()).collect(), Strategy::Dr);
        let p = KernelParams::default();
        let gp = exact_gp_posterior(&x, &pseudo, &p, 1.0).unwrap();
        let (_, v) = gp.predict(&x).unwrap();
        assert!(v.iter().all(|val| *val <= p.prior_variance()));
    }

    #[test]
    fn far_query_reverts_to_prior_variance() {
        let mut rng = Rng::new(3, 0);
        let x = random_inputs(40, 2, &mut rng);
        let pseudo = PseudoOutcomes::new((0..40).map(|_| rng.normal()).collect(), Strategy::Dr);
        let p = KernelParams::default();
        let sv = svgp_fit(&x, &pseudo, &p, 1.0, 15, &OptimizerConfig::default(), &mut rng).unwrap();
        let far = Matrix::from_rows(&[vec![60.0, -60.0]]).unwrap();
        let (_, v) = sv.predict(&far).unwrap();
        assert!((v[0] / p.prior_variance() - 1.0).abs() <= 0.05);
    }

    #[test]
    fn svgp_gradient_matches_finite_differences() {
        let mut rng = Rng::new(4, 0);
        let x = random_inputs(12, 2, &mut rng);
        let p = KernelParams::default();
        let kmm = kernel_matrix(&p, &x.select_rows(&[0, 3, 5, 7]), &x.select_rows(&[0, 3, 5, 7])).unwrap();
        let chol = Cholesky::new(&kmm).unwrap();
        let knm = kernel_matrix(&p, &x, &x.select_rows(&[0, 3, 5, 7])).unwrap();
        let m = 4;
        let y: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
        let mut gram = Matrix::zeros(m, m);
        let mut cross = vec![0.0; m];
        let mut resid = 0.0;
        for i in 0..12 {
            let mut a = knm.row(i).to_vec();
            chol.solve_lower_in_place(&mut a);
            resid += p.eval(x.row(i), x.row(i)) - dot(&a, &a);
            for r in 0..m {
                cross[r] += a[r] * y[i];
                for c in 0..m {
                    gram[(r, c)] += a[r] * a[c];
                }
            }
        }
        let obj = SvgpObjective {
            m,
            omega: 0.7,
            gram,
            cross,
            y_sq: dot(&y, &y),
            residual_var: resid,
        };
        let params: Vec<f64> = (0..m + m * (m + 1) / 2).map(|_| 0.3 * rng.normal()).collect();
        let g = obj.gradient(&params);
        for k in 0..params.len() {
            let h = 1e-6;
            let mut up = params.clone();
            let mut dn = params.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (obj.value(&up) - obj.value(&dn)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-5 * (1.0 + fd.abs()), "coord {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn full_inducing_set_matches_exact_gp() {
        let mut rng = Rng::new(5, 0);
        let n = 40;
        let x = random_inputs(n, 2, &mut rng);
        let values: Vec<f64> = (0..n).map(|i| 1.0 + x.row(i)[0] * x.row(i)[1] + 2.0 * rng.normal()).collect();
        let pseudo = PseudoOutcomes::new(values, Strategy::Dr);
        let omega = 1.0 / crate::numerics::sample_variance(&pseudo.values);
        let p = KernelParams::default();
        let exact = exact_gp_posterior(&x, &pseudo, &p, omega).unwrap();
        let sv = svgp_fit_at(&x, &pseudo, &p, omega, x.clone(), &OptimizerConfig::default(), &mut rng).unwrap();
        let q = random_inputs(100, 2, &mut rng);
        let (em, ev) = exact.predict(&q).unwrap();
        let (sm, svar) = sv.predict(&q).unwrap();
        for i in 0..100 {
            assert!((em[i] - sm[i]).abs() <= 1e-2);
            let ratio = (svar[i] / ev[i]).sqrt();
            assert!((0.9..=1.1).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn translation_shifts_means_only() {
        let mut rng = Rng::new(6, 0);
        let x = random_inputs(30, 2, &mut rng);
        let base: Vec<f64> = (0..30).map(|_| rng.normal()).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 5.0).collect();
        let p = KernelParams::default();
        let q = random_inputs(8, 2, &mut rng);
        let cfg = OptimizerConfig { epochs: 300, ..Default::default() };
        let fit = |vals: &[f64]| {
            let ps = PseudoOutcomes::new(vals.to_vec(), Strategy::Dr);
            svgp_fit(&x, &ps, &p, 1.0, 10, &cfg, &mut Rng::new(6, 1)).unwrap().predict(&q).unwrap()
        };
        let (m0, v0) = fit(&base);
        let (m1, v1) = fit(&shifted);
        for i in 0..8 {
            assert!((m1[i] - m0[i] - 5.0).abs() < 1e-9);
            assert!((v1[i] - v0[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_inducing_count() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let ps = PseudoOutcomes::new(vec![0.0, 1.0], Strategy::Dr);
        let cfg = OptimizerConfig::default();
        assert!(svgp_fit(&x, &ps, &KernelParams::default(), 1.0, 0, &cfg, &mut Rng::new(0, 0)).is_err());
        assert!(svgp_fit(&x, &ps, &KernelParams::default(), 1.0, 3, &cfg, &mut Rng::new(0, 0)).is_err());
    }
}
