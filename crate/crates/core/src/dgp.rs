//! The nine synthetic back-door data-generating processes D1–D9, each with a
//! closed-form ATE and CATE.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, GroundTruth};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DgpId {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
    D7,
    D8,
    D9,
}

impl DgpId {
    pub const ALL: [DgpId; 9] = [
        DgpId::D1,
        DgpId::D2,
        DgpId::D3,
        DgpId::D4,
        DgpId::D5,
        DgpId::D6,
        DgpId::D7,
        DgpId::D8,
        DgpId::D9,
    ];

    pub fn description(self) -> &'static str {
        match self {
            DgpId::D1 => "linear, confounded, homoskedastic",
            DgpId::D2 => "linear CATE heterogeneity, mean-zero covariates",
            DgpId::D3 => "linear CATE heterogeneity, nonzero-mean covariates",
            DgpId::D4 => "nonlinear outcome, quadratic and interaction CATE",
            DgpId::D5 => "nonlinear propensity, linear outcome",
            DgpId::D6 => "limited overlap",
            DgpId::D7 => "heteroskedastic heavy-tailed noise",
            DgpId::D8 => "high-dimensional sparse confounding",
            DgpId::D9 => "Friedman-style nonlinear CATE",
        }
    }

    /// Parameter names the formulas of this process reference.
    fn required(self) -> &'static [&'static str] {
        match self {
            DgpId::D1 => &["tau", "beta1", "beta2", "gamma1", "gamma2"],
            DgpId::D2 => &["theta0", "theta1", "theta2", "beta1", "beta2", "gamma1", "gamma2"],
            DgpId::D3 => &[
                "theta0", "theta1", "theta2", "beta1", "beta2", "gamma1", "gamma2", "mu1", "mu2",
            ],
            DgpId::D4 => &["alpha0", "alpha1", "beta1", "beta2"],
            DgpId::D5 => &["tau", "b0", "b1", "b2", "b3"],
            DgpId::D6 => &["tau", "gamma1", "gamma2"],
            DgpId::D7 => &["tau", "beta1", "beta2", "gamma1", "gamma2", "nu"],
            DgpId::D8 => &["tau", "p", "s"],
            DgpId::D9 => &[],
        }
    }
}

impl fmt::Display for DgpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for DgpId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DgpId::ALL
            .into_iter()
            .find(|id| id.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownDgp(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub id: DgpId,
    pub params: BTreeMap<String, f64>,
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// `s` evenly spaced points from `lo` to `hi` inclusive.
fn linspace(lo: f64, hi: f64, s: usize) -> Vec<f64> {
    if s == 1 {
        return vec![lo];
    }
    (0..s)
        .map(|j| lo + (hi - lo) * j as f64 / (s - 1) as f64)
        .collect()
}

pub fn default_spec(id: DgpId) -> DgpSpec {
    let pairs: &[(&str, f64)] = match id {
        DgpId::D1 => &[("tau", 2.0), ("beta1", 0.5), ("beta2", -0.5), ("gamma1", 1.0), ("gamma2", 1.0)],
        DgpId::D2 => &[
            ("theta0", 2.0),
            ("theta1", 1.0),
            ("theta2", 0.5),
            ("beta1", 0.5),
            ("beta2", -0.5),
            ("gamma1", 1.0),
            ("gamma2", 1.0),
        ],
        DgpId::D3 => &[
            ("theta0", 2.0),
            ("theta1", 1.0),
            ("theta2", 0.5),
            ("beta1", 0.5),
            ("beta2", -0.5),
            ("gamma1", 1.0),
            ("gamma2", 1.0),
            ("mu1", 0.5),
            ("mu2", -0.5),
        ],
        DgpId::D4 => &[("alpha0", 2.0), ("alpha1", 1.0), ("beta1", 0.5), ("beta2", -0.5)],
        DgpId::D5 => &[("tau", 2.0), ("b0", 0.0), ("b1", 1.0), ("b2", 0.5), ("b3", 0.5)],
        DgpId::D6 => &[("tau", 2.0), ("gamma1", 1.0), ("gamma2", 1.0)],
        DgpId::D7 => &[
            ("tau", 2.0),
            ("beta1", 0.5),
            ("beta2", -0.5),
            ("gamma1", 1.0),
            ("gamma2", 1.0),
            ("nu", 3.0),
        ],
        DgpId::D8 => &[("tau", 2.0), ("p", 50.0), ("s", 5.0)],
        DgpId::D9 => &[],
    };
    DgpSpec {
        id,
        params: pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
    }
}

impl DgpSpec {
    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    fn p(&self, name: &str) -> f64 {
        self.params[name]
    }

    pub fn validate(&self) -> Result<()> {
        for &name in self.id.required() {
            match self.params.get(name) {
                None => return Err(Error::InvalidSpec(format!("{}: missing `{name}`", self.id))),
                Some(v) if !v.is_finite() => {
                    return Err(Error::InvalidSpec(format!("{}: `{name}` is not finite", self.id)))
                }
                _ => {}
            }
        }
        match self.id {
            DgpId::D7 if !(self.p("nu") > 2.0) => {
                Err(Error::InvalidSpec("D7: nu must exceed 2".into()))
            }
            DgpId::D8 => {
                let (p, s) = (self.p("p"), self.p("s"));
                if p.fract() != 0.0 || s.fract() != 0.0 || s < 1.0 || s > p {
                    Err(Error::InvalidSpec("D8: need integers 1 <= s <= p".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self.id {
            DgpId::D8 => self.p("p") as usize,
            DgpId::D9 => 5,
            _ => 2,
        }
    }

    fn sparse_coefs(&self) -> (Vec<f64>, Vec<f64>) {
        let s = self.p("s") as usize;
        (linspace(0.2, 1.0, s), linspace(1.0, 0.2, s))
    }

    fn lin2(&self, prefix: &str, x: &[f64]) -> f64 {
        self.p(&format!("{prefix}1")) * x[0] + self.p(&format!("{prefix}2")) * x[1]
    }

    pub fn sample_x(&self, rng: &mut Rng) -> Vec<f64> {
        match self.id {
            DgpId::D3 => vec![self.p("mu1") + rng.normal(), self.p("mu2") + rng.normal()],
            DgpId::D9 => (0..5).map(|_| rng.uniform()).collect(),
            _ => (0..self.dim()).map(|_| rng.normal()).collect(),
        }
    }

    /// True propensity `e(x) = P(A=1 | X=x)`.
    pub fn propensity(&self, x: &[f64]) -> f64 {
        match self.id {
            DgpId::D1 | DgpId::D2 | DgpId::D3 | DgpId::D4 | DgpId::D7 => sigmoid(self.lin2("beta", x)),
            DgpId::D5 => sigmoid(
                self.p("b0") + self.p("b1") * x[0] + self.p("b2") * x[0] * x[0] + self.p("b3") * x[1].sin(),
            ),
            DgpId::D6 => sigmoid(3.5 + 3.0 * x[0]),
            DgpId::D8 => {
                let (beta, _) = self.sparse_coefs();
                sigmoid(beta.iter().zip(x).map(|(b, v)| b * v).sum())
            }
            DgpId::D9 => sigmoid(-0.5 + x[0] - 0.25 * x[1] + 0.25 * x[2]),
        }
    }

    /// Outcome regression `m_0(x) = E[Y | A=0, X=x]`.
    pub fn mu0(&self, x: &[f64]) -> f64 {
        match self.id {
            DgpId::D1 | DgpId::D2 | DgpId::D3 | DgpId::D6 | DgpId::D7 => self.lin2("gamma", x),
            DgpId::D4 => x[0] * x[0] + x[1].sin(),
            DgpId::D5 => x[0] + 0.5 * x[0] * x[0] + 0.5 * x[1].sin(),
            DgpId::D8 => {
                let (_, gamma) = self.sparse_coefs();
                gamma.iter().zip(x).map(|(g, v)| g * v).sum()
            }
            DgpId::D9 => {
                10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
                    + 20.0 * (x[2] - 0.5).powi(2)
                    + 10.0 * x[3]
                    + 5.0 * x[4]
            }
        }
    }

    pub fn cate(&self, x: &[f64]) -> f64 {
        match self.id {
            DgpId::D1 | DgpId::D5 | DgpId::D6 | DgpId::D7 | DgpId::D8 => self.p("tau"),
            DgpId::D2 | DgpId::D3 => self.p("theta0") + self.lin2("theta", x),
            DgpId::D4 => self.p("alpha0") + self.p("alpha1") * x[0] * x[1],
            DgpId::D9 => 1.0 + x[0] / (x[1] + 0.1),
        }
    }

    /// Outcome regression `m_1(x) = E[Y | A=1, X=x]`.
    pub fn mu1(&self, x: &[f64]) -> f64 {
        self.mu0(x) + self.cate(x)
    }

    pub fn outcome_mean(&self, arm: u8, x: &[f64]) -> f64 {
        if arm == 1 {
            self.mu1(x)
        } else {
            self.mu0(x)
        }
    }

    pub fn ate(&self) -> f64 {
        match self.id {
            DgpId::D1 | DgpId::D5 | DgpId::D6 | DgpId::D7 | DgpId::D8 => self.p("tau"),
            DgpId::D2 => self.p("theta0"),
            DgpId::D3 => self.p("theta0") + self.p("theta1") * self.p("mu1") + self.p("theta2") * self.p("mu2"),
            DgpId::D4 => self.p("alpha0"),
            DgpId::D9 => 1.0 + 0.5 * 11f64.ln(),
        }
    }

    /// Additive noise; mean zero in every process.
    fn noise(&self, x: &[f64], rng: &mut Rng) -> f64 {
        match self.id {
            DgpId::D7 => (0.5 * x[0]).exp() * rng.student_t(self.p("nu")),
            _ => rng.normal(),
        }
    }

    pub fn truth(&self) -> GroundTruth {
        GroundTruth {
            ate: self.ate(),
            spec: self.clone(),
        }
    }

    /// Covariates, both potential outcomes `(Y(0), Y(1))` sharing one noise draw.
    pub fn sample_potential_outcomes(&self, n: usize, rng: &mut Rng) -> Result<(Matrix, Vec<(f64, f64)>)> {
        self.validate()?;
        let d = self.dim();
        let mut xs = Vec::with_capacity(n * d);
        let mut pos = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.sample_x(rng);
            let eps = self.noise(&x, rng);
            pos.push((self.mu0(&x) + eps, self.mu1(&x) + eps));
            xs.extend_from_slice(&x);
        }
        Ok((Matrix::from_vec(n, d, xs)?, pos))
    }
}

/// Draws `n` i.i.d. observations with the process's ground truth attached.
pub fn generate(spec: &DgpSpec, n: usize, rng: &mut Rng) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidSpec("n must be >= 1".into()));
    }
    let d = spec.dim();
    let mut xs = Vec::with_capacity(n * d);
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x = spec.sample_x(rng);
        let arm = u8::from(rng.bernoulli(spec.propensity(&x)));
        let eps = spec.noise(&x, rng);
        y.push(spec.outcome_mean(arm, &x) + eps);
        a.push(arm);
        xs.extend_from_slice(&x);
    }
    Ok(Dataset::new(Matrix::from_vec(n, d, xs)?, a, y)?.with_truth(spec.truth()))
}
