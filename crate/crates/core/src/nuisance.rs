//! Nuisance estimation: a fixed feature map, logistic-ridge propensity,
//! T-learner ridge outcome regressions and K-fold cross-fitting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{make_folds, Dataset, FoldAssignment};
use crate::dgp::DgpSpec;
use crate::error::{Error, Result};
use crate::numerics::{dot, Cholesky, Matrix, Rng};

/// `Φ(x) = [x, x², sin x, x_extra, 1]` with `x_extra = x₁x₂` (or `x₁³` when d = 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureMap {
    d: usize,
}

impl FeatureMap {
    pub fn new(d: usize) -> Self {
        assert!(d >= 1, "feature map needs d >= 1");
        Self { d }
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn output_dim(&self) -> usize {
        3 * self.d + 2
    }

    pub fn featurize(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.d);
        let mut out = Vec::with_capacity(self.output_dim());
        out.extend_from_slice(x);
        out.extend(x.iter().map(|v| v * v));
        out.extend(x.iter().map(|v| v.sin()));
        out.push(if self.d >= 2 { x[0] * x[1] } else { x[0].powi(3) });
        out.push(1.0);
        out
    }

    pub fn featurize_rows(&self, x: &Matrix) -> Matrix {
        let p = self.output_dim();
        let mut data = Vec::with_capacity(x.rows() * p);
        for i in 0..x.rows() {
            data.extend(self.featurize(x.row(i)));
        }
        Matrix::from_vec(x.rows(), p, data).expect("feature matrix shape")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuisanceConfig {
    pub folds: usize,
    pub clip_eps: f64,
    pub lambda_prop: f64,
    pub lambda_out: f64,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            clip_eps: 0.01,
            lambda_prop: 1.0,
            lambda_out: 1e-3,
        }
    }
}

impl NuisanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 0.5) {
            return Err(Error::config("clip_eps", "must lie in (0, 0.5)"));
        }
        if !(self.lambda_prop >= 0.0) {
            return Err(Error::config("lambda_prop", "must be >= 0"));
        }
        if !(self.lambda_out >= 0.0) {
            return Err(Error::config("lambda_out", "must be >= 0"));
        }
        if self.folds < 2 {
            return Err(Error::config("folds", "must be >= 2"));
        }
        Ok(())
    }
}

/// Nuisance values at one covariate vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NuisanceValues {
    pub e: f64,
    pub m0: f64,
    pub m1: f64,
}

impl NuisanceValues {
    pub fn m(&self, arm: u8) -> f64 {
        if arm == 1 {
            self.m1
        } else {
            self.m0
        }
    }
}

/// Anything that yields `(e, m₀, m₁)` at a covariate vector.
pub trait Nuisance {
    fn values(&self, x: &[f64]) -> NuisanceValues;
}

/// The data-generating process's own nuisances (unclipped).
impl Nuisance for DgpSpec {
    fn values(&self, x: &[f64]) -> NuisanceValues {
        NuisanceValues {
            e: self.propensity(x),
            m0: self.mu0(x),
            m1: self.mu1(x),
        }
    }
}

/// True nuisances moved a distance `delta` along a fixed smooth direction:
/// the propensity by `+delta` on the logit scale, `m₁` by `+1.5 delta` and
/// `m₀` by `+0.5 delta`. The treatment-effect contrast moves by exactly `delta`.
#[derive(Clone, Debug)]
pub struct PerturbedNuisance<'a> {
    pub spec: &'a DgpSpec,
    pub delta: f64,
}

impl Nuisance for PerturbedNuisance<'_> {
    fn values(&self, x: &[f64]) -> NuisanceValues {
        if self.delta == 0.0 {
            return self.spec.values(x);
        }
        let e = self.spec.propensity(x);
        NuisanceValues {
            e: sigmoid((e / (1.0 - e)).ln() + self.delta),
            m0: self.spec.mu0(x) + 0.5 * self.delta,
            m1: self.spec.mu1(x) + 1.5 * self.delta,
        }
    }
}

/// Ridge regression: minimizes `‖Φw − y‖² + λ‖w‖²`.
pub fn ridge(phi: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let mut gram = phi.gram();
    gram.add_diagonal(lambda);
    let rhs = phi.t_matvec(y);
    Ok(Cholesky::new(&gram)?.solve_vec(&rhs))
}

/// T-learner arm regression on the rows with `A = arm`.
pub fn fit_outcome(ds: &Dataset, arm: u8, lambda: f64) -> Result<Vec<f64>> {
    let idx: Vec<usize> = (0..ds.n()).filter(|&i| ds.a()[i] == arm).collect();
    if idx.is_empty() {
        return Err(Error::EmptyArm { arm });
    }
    let map = FeatureMap::new(ds.dim());
    let phi = map.featurize_rows(&ds.x().select_rows(&idx));
    let y: Vec<f64> = idx.iter().map(|&i| ds.y()[i]).collect();
    ridge(&phi, &y, lambda)
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eᵘ)` without overflow.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

const IRLS_MAX_ITER: usize = 100;
const IRLS_GRAD_TOL: f64 = 1e-6;

fn penalized_loglik(phi: &Matrix, a: &[u8], w: &[f64], lambda: f64) -> f64 {
    let ll: f64 = (0..phi.rows())
        .map(|i| {
            let eta = dot(phi.row(i), w);
            f64::from(a[i]) * eta - softplus(eta)
        })
        .sum();
    ll - 0.5 * lambda * dot(w, w)
}

/// Logistic ridge by Newton/IRLS with step halving. Maximizes
/// `Σ [aᵢηᵢ − log(1 + e^ηᵢ)] − (λ/2)‖w‖²`.
pub fn fit_propensity(ds: &Dataset, lambda_prop: f64) -> Result<Vec<f64>> {
    let treated = ds.arm_count(1);
    if treated == 0 {
        return Err(Error::DegenerateTreatment { arm: 0 });
    }
    if treated == ds.n() {
        return Err(Error::DegenerateTreatment { arm: 1 });
    }
    let phi = FeatureMap::new(ds.dim()).featurize_rows(ds.x());
    logistic_irls(&phi, ds.a(), lambda_prop)
}

pub(crate) fn logistic_irls(phi: &Matrix, a: &[u8], lambda: f64) -> Result<Vec<f64>> {
    let (n, p) = (phi.rows(), phi.cols());
    let mut w = vec![0.0; p];
    let mut objective = penalized_loglik(phi, a, &w, lambda);
    for _ in 0..IRLS_MAX_ITER {
        let mut grad: Vec<f64> = w.iter().map(|wj| -lambda * wj).collect();
        let mut hess = Matrix::zeros(p, p);
        for i in 0..n {
            let row = phi.row(i);
            let prob = sigmoid(dot(row, &w));
            let resid = f64::from(a[i]) - prob;
            let weight = prob * (1.0 - prob);
            for j in 0..p {
                grad[j] += resid * row[j];
                let wr = weight * row[j];
                if wr == 0.0 {
                    continue;
                }
                for k in j..p {
                    hess[(j, k)] += wr * row[k];
                }
            }
        }
        if dot(&grad, &grad).sqrt() <= IRLS_GRAD_TOL {
            break;
        }
        for j in 0..p {
            hess[(j, j)] += lambda;
            for k in 0..j {
                hess[(j, k)] = hess[(k, j)];
            }
        }
        let step = Cholesky::new(&hess)?.solve_vec(&grad);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = w.iter().zip(&step).map(|(wj, sj)| wj + t * sj).collect();
            let obj = penalized_loglik(phi, a, &cand, lambda);
            if obj >= objective {
                w = cand;
                objective = obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(w)
}

/// Fitted propensity and per-arm outcome models over the shared feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct NuisanceFit {
    map: FeatureMap,
    pub propensity_coef: Vec<f64>,
    pub outcome_coef_treated: Vec<f64>,
    pub outcome_coef_control: Vec<f64>,
    pub clip_eps: f64,
    pub lambda_prop: f64,
    pub lambda_out: f64,
}

impl NuisanceFit {
    pub fn fit(ds: &Dataset, config: &NuisanceConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            map: FeatureMap::new(ds.dim()),
            propensity_coef: fit_propensity(ds, config.lambda_prop)?,
            outcome_coef_treated: fit_outcome(ds, 1, config.lambda_out)?,
            outcome_coef_control: fit_outcome(ds, 0, config.lambda_out)?,
            clip_eps: config.clip_eps,
            lambda_prop: config.lambda_prop,
            lambda_out: config.lambda_out,
        })
    }

    pub fn feature_map(&self) -> FeatureMap {
        self.map
    }

    /// Propensity clipped to `[clip_eps, 1 − clip_eps]`.
    pub fn predict_propensity(&self, x: &[f64]) -> f64 {
        let raw = sigmoid(dot(&self.map.featurize(x), &self.propensity_coef));
        raw.clamp(self.clip_eps, 1.0 - self.clip_eps)
    }

    pub fn predict_outcome(&self, arm: u8, x: &[f64]) -> f64 {
        let coef = if arm == 1 {
            &self.outcome_coef_treated
        } else {
            &self.outcome_coef_control
        };
        dot(&self.map.featurize(x), coef)
    }
}

impl Nuisance for NuisanceFit {
    fn values(&self, x: &[f64]) -> NuisanceValues {
        let phi = self.map.featurize(x);
        let raw = sigmoid(dot(&phi, &self.propensity_coef));
        NuisanceValues {
            e: raw.clamp(self.clip_eps, 1.0 - self.clip_eps),
            m0: dot(&phi, &self.outcome_coef_control),
            m1: dot(&phi, &self.outcome_coef_treated),
        }
    }
}

/// Out-of-fold nuisance fits: `per_fold[k]` never saw fold `k`.
#[derive(Clone, Debug)]
pub struct CrossFit {
    pub folds: FoldAssignment,
    pub per_fold: Vec<NuisanceFit>,
}

impl CrossFit {
    /// Fits one model per fold complement under a given assignment.
    pub fn with_folds(ds: &Dataset, folds: FoldAssignment, config: &NuisanceConfig) -> Result<Self> {
        config.validate()?;
        if folds.n() != ds.n() {
            return Err(Error::Dimension(format!(
                "fold assignment covers {} rows, dataset has {}",
                folds.n(),
                ds.n()
            )));
        }
        let complements: Vec<Vec<usize>> = (0..folds.k()).map(|k| folds.complement(k)).collect();
        for (fold, idx) in complements.iter().enumerate() {
            for arm in [0u8, 1] {
                if !idx.iter().any(|&i| ds.a()[i] == arm) {
                    return Err(Error::FoldArmCollapse { fold, arm });
                }
            }
        }
        let per_fold = complements
            .par_iter()
            .map(|idx| NuisanceFit::fit(&ds.subset(idx), config))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { folds, per_fold })
    }

    /// Held-out nuisance values in the dataset's original row order.
    pub fn held_out(&self, ds: &Dataset) -> Vec<NuisanceValues> {
        self.folds
            .fold_of()
            .iter()
            .enumerate()
            .map(|(i, &k)| self.per_fold[k].values(ds.x().row(i)))
            .collect()
    }
}

pub fn cross_fit(ds: &Dataset, config: &NuisanceConfig, rng: &mut Rng) -> Result<CrossFit> {
    config.validate()?;
    let folds = make_folds(ds.n(), config.folds, rng)?;
    CrossFit::with_folds(ds, folds, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{default_spec, generate, DgpId};

    #[test]
    fn featurize_examples() {
        let one = FeatureMap::new(1).featurize(&[2.0]);
        assert_eq!(one, vec![2.0, 4.0, 2f64.sin(), 8.0, 1.0]);
        assert_eq!(FeatureMap::new(2).featurize(&[0.0, 0.0]), vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let two = FeatureMap::new(2).featurize(&[1.0, 2.0]);
        assert_eq!(two, vec![1.0, 2.0, 1.0, 4.0, 1f64.sin(), 2f64.sin(), 2.0, 1.0]);
        assert_eq!(FeatureMap::new(5).output_dim(), 17);
    }

    fn dataset(rows: &[(Vec<f64>, u8, f64)]) -> Dataset {
        let x = Matrix::from_rows(&rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>()).unwrap();
        Dataset::new(x, rows.iter().map(|r| r.1).collect(), rows.iter().map(|r| r.2).collect()).unwrap()
    }

    #[test]
    fn zero_outcomes_give_zero_coefficients() {
        let mut rng = Rng::new(0, 0);
        let rows: Vec<_> = (0..30).map(|i| (vec![rng.normal(), rng.normal()], (i % 2) as u8, 0.0)).collect();
        let w = fit_outcome(&dataset(&rows), 1, 1e-3).unwrap();
        assert!(w.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn heavy_penalty_shrinks_to_zero() {
        let ds = dataset(&[(vec![0.3], 1, 5.0), (vec![0.1], 0, 1.0)]);
        let w = fit_outcome(&ds, 1, 1e12).unwrap();
        assert!(w.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn noiseless_interpolation_recovers_coefficients() {
        let map = FeatureMap::new(2);
        let truth: Vec<f64> = (0..map.output_dim()).map(|j| 0.3 * j as f64 - 1.0).collect();
        let mut rng = Rng::new(1, 0);
        let rows: Vec<_> = (0..200)
            .map(|_| {
                let x = vec![rng.normal(), rng.normal()];
                let y = dot(&map.featurize(&x), &truth);
                (x, 1u8, y)
            })
            .collect();
        let w = fit_outcome(&dataset(&rows), 1, 0.0).unwrap();
        for (a, b) in w.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn ridge_normal_equations_hold() {
        let mut rng = Rng::new(2, 0);
        let phi = Matrix::from_vec(50, 4, (0..200).map(|_| rng.normal()).collect()).unwrap();
        let y: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let lambda = 0.7;
        let w = ridge(&phi, &y, lambda).unwrap();
        let resid: Vec<f64> = phi.matvec(&w).iter().zip(&y).map(|(p, t)| p - t).collect();
        let grad: Vec<f64> = phi.t_matvec(&resid).iter().zip(&w).map(|(g, wj)| g + lambda * wj).collect();
        assert!(dot(&grad, &grad).sqrt() <= 1e-8);
    }

    #[test]
    fn ridge_ignores_row_order() {
        let mut rng = Rng::new(3, 0);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.normal(), rng.normal(), 1.0]).collect();
        let y: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
        let perm = rng.permutation(40);
        let w1 = ridge(&Matrix::from_rows(&rows).unwrap(), &y, 0.1).unwrap();
        let rows2: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let y2: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let w2 = ridge(&Matrix::from_rows(&rows2).unwrap(), &y2, 0.1).unwrap();
        for (a, b) in w1.iter().zip(&w2) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_arm_and_degenerate_treatment() {
        let ds = dataset(&[(vec![0.0], 1, 1.0), (vec![1.0], 1, 2.0)]);
        assert!(matches!(fit_outcome(&ds, 0, 1.0), Err(Error::EmptyArm { arm: 0 })));
        assert!(matches!(fit_propensity(&ds, 1.0), Err(Error::DegenerateTreatment { arm: 1 })));
    }

    #[test]
    fn independent_treatment_gives_half_propensity() {
        let mut rng = Rng::new(4, 0);
        let rows: Vec<_> = (0..2000)
            .map(|_| (vec![rng.normal(), rng.normal()], u8::from(rng.bernoulli(0.5)), 0.0))
            .collect();
        let ds = dataset(&rows);
        let fit = NuisanceFit::fit(&ds, &NuisanceConfig::default()).unwrap();
        let gaps: Vec<f64> = (0..ds.n()).map(|i| (fit.predict_propensity(ds.x().row(i)) - 0.5).abs()).collect();
        let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let within = gaps.iter().filter(|g| **g <= 0.1).count() as f64 / gaps.len() as f64;
        assert!(mean_gap <= 0.03, "mean gap {mean_gap}");
        assert!(within >= 0.95, "share within 0.1: {within}");
    }

    #[test]
    fn separable_data_stays_finite() {
        let rows: Vec<_> = (0..40)
            .map(|i| {
                let x = i as f64 / 10.0 - 2.0;
                (vec![x], u8::from(x > 0.0), 0.0)
            })
            .collect();
        let w = fit_propensity(&dataset(&rows), 1.0).unwrap();
        assert!(w.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn irls_reaches_stationarity() {
        let ds = generate(&default_spec(DgpId::D1), 500, &mut Rng::new(5, 0)).unwrap();
        let phi = FeatureMap::new(2).featurize_rows(ds.x());
        let lambda = 1.0;
        let w = logistic_irls(&phi, ds.a(), lambda).unwrap();
        let mut grad: Vec<f64> = w.iter().map(|v| -lambda * v).collect();
        for i in 0..ds.n() {
            let r = f64::from(ds.a()[i]) - sigmoid(dot(phi.row(i), &w));
            for (g, f) in grad.iter_mut().zip(phi.row(i)) {
                *g += r * f;
            }
        }
        assert!(dot(&grad, &grad).sqrt() <= 1e-6);
    }

    #[test]
    fn d1_propensity_error_is_small() {
        let spec = default_spec(DgpId::D1);
        let ds = generate(&spec, 5000, &mut Rng::new(6, 0)).unwrap();
        let fit = NuisanceFit::fit(&ds, &NuisanceConfig::default()).unwrap();
        let mae = (0..ds.n())
            .map(|i| {
                let x = ds.x().row(i);
                (fit.predict_propensity(x) - spec.propensity(x)).abs()
            })
            .sum::<f64>()
            / ds.n() as f64;
        assert!(mae <= 0.05, "mae {mae}");
    }

    #[test]
    fn cross_fit_small_and_clipped() {
        let ds = dataset(&[
            (vec![0.1], 0, 1.0),
            (vec![0.2], 1, 2.0),
            (vec![0.3], 0, 1.5),
            (vec![0.4], 1, 2.5),
        ]);
        let folds = FoldAssignment::from_labels(2, vec![0, 0, 1, 1]).unwrap();
        let cf = CrossFit::with_folds(&ds, folds, &NuisanceConfig::default()).unwrap();
        assert_eq!(cf.per_fold.len(), 2);

        let spec = default_spec(DgpId::D1);
        let big = generate(&spec, 1000, &mut Rng::new(7, 0)).unwrap();
        let config = NuisanceConfig::default();
        let cf = cross_fit(&big, &config, &mut Rng::new(7, 1)).unwrap();
        for v in cf.held_out(&big) {
            assert!(v.e >= config.clip_eps && v.e <= 1.0 - config.clip_eps);
        }
    }

    #[test]
    fn identical_rows_give_identical_fits() {
        let rows: Vec<_> = (0..8).map(|i| (vec![0.5, -0.5], (i % 2) as u8, 1.0)).collect();
        let ds = dataset(&rows);
        let folds = FoldAssignment::from_labels(2, (0..8).map(|i| i / 4).collect()).unwrap();
        let cf = CrossFit::with_folds(&ds, folds, &NuisanceConfig::default()).unwrap();
        assert_eq!(cf.per_fold[0], cf.per_fold[1]);
    }

    #[test]
    fn fold_arm_collapse_is_reported() {
        let ds = dataset(&[(vec![0.0], 1, 1.0), (vec![1.0], 0, 2.0), (vec![2.0], 0, 2.0), (vec![3.0], 0, 2.0)]);
        let folds = FoldAssignment::from_labels(2, vec![0, 1, 1, 1]).unwrap();
        let err = CrossFit::with_folds(&ds, folds, &NuisanceConfig::default()).unwrap_err();
        assert!(matches!(err, Error::FoldArmCollapse { fold: 0, arm: 1 }), "{err}");
    }

    #[test]
    fn held_out_fits_never_see_their_fold() {
        let spec = default_spec(DgpId::D2);
        let ds = generate(&spec, 300, &mut Rng::new(9, 0)).unwrap();
        let config = NuisanceConfig::default();
        let folds = make_folds(ds.n(), 5, &mut Rng::new(9, 1)).unwrap();
        let base = CrossFit::with_folds(&ds, folds.clone(), &config).unwrap();
        for k in 0..5 {
            let mut perturbed = ds.clone();
            for i in folds.members(k) {
                perturbed.y_mut()[i] += 100.0;
            }
            let cf = CrossFit::with_folds(&perturbed, folds.clone(), &config).unwrap();
            assert_eq!(cf.per_fold[k], base.per_fold[k], "fold {k} leaked");
            let other = (k + 1) % 5;
            assert_ne!(cf.per_fold[other], base.per_fold[other]);
        }
    }
}
