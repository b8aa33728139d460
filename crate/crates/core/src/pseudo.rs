//! RA / IPW / DR pseudo-outcomes and the squared-error loss they induce.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::{CrossFit, Nuisance, NuisanceValues};

/// Pseudo-outcome construction. `Dr` is AIPW when the target is the ATE.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    Ra,
    Ipw,
    Dr,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Ra, Strategy::Ipw, Strategy::Dr];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Ra => "RA",
            Strategy::Ipw => "IPW",
            Strategy::Dr => "DR",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ra" => Ok(Strategy::Ra),
            "ipw" => Ok(Strategy::Ipw),
            "dr" | "aipw" => Ok(Strategy::Dr),
            other => Err(Error::config("strategy", format!("unknown strategy `{other}`"))),
        }
    }
}

/// One pseudo-outcome from an observation's `(A, Y)` and nuisance values.
pub fn pseudo_outcome(a: u8, y: f64, nv: &NuisanceValues, strategy: Strategy) -> f64 {
    let treated = f64::from(a);
    match strategy {
        Strategy::Ra => nv.m1 - nv.m0,
        Strategy::Ipw => treated * y / nv.e - (1.0 - treated) * y / (1.0 - nv.e),
        Strategy::Dr => {
            let weight = treated / nv.e - (1.0 - treated) / (1.0 - nv.e);
            weight * (y - nv.m(a)) + nv.m1 - nv.m0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoOutcomes {
    pub values: Vec<f64>,
    pub strategy: Strategy,
    /// True when every value came from a model that never saw its row.
    pub cross_fitted: bool,
}

impl PseudoOutcomes {
    pub fn new(values: Vec<f64>, strategy: Strategy) -> Self {
        Self {
            values,
            strategy,
            cross_fitted: false,
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Loss minimizer, i.e. the strategy's point estimate of the ATE.
    pub fn mean(&self) -> f64 {
        crate::numerics::mean(&self.values)
    }

    pub fn resample(&self, idx: &[usize]) -> PseudoOutcomes {
        PseudoOutcomes {
            values: idx.iter().map(|&i| self.values[i]).collect(),
            strategy: self.strategy,
            cross_fitted: self.cross_fitted,
        }
    }
}

/// Pseudo-outcomes where row `i` uses the fit trained without its fold.
pub fn cross_fitted_pseudo(ds: &Dataset, cf: &CrossFit, strategy: Strategy) -> Result<PseudoOutcomes> {
    if cf.folds.n() != ds.n() {
        return Err(Error::Dimension(format!(
            "cross-fit built on {} rows, dataset has {}",
            cf.folds.n(),
            ds.n()
        )));
    }
    let values = cf
        .held_out(ds)
        .iter()
        .enumerate()
        .map(|(i, nv)| pseudo_outcome(ds.a()[i], ds.y()[i], nv, strategy))
        .collect::<Vec<f64>>();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite pseudo-outcome".into()));
    }
    Ok(PseudoOutcomes {
        values,
        strategy,
        cross_fitted: true,
    })
}

/// Pseudo-outcomes under externally supplied nuisances (e.g. the true ones).
pub fn pseudo_with<N: Nuisance + ?Sized>(ds: &Dataset, nuisance: &N, strategy: Strategy) -> PseudoOutcomes {
    let values = (0..ds.n())
        .map(|i| pseudo_outcome(ds.a()[i], ds.y()[i], &nuisance.values(ds.x().row(i)), strategy))
        .collect();
    PseudoOutcomes::new(values, strategy)
}

/// `(1/2n) Σ (Ŷᵢ − θ)²`.
pub fn ate_loss(pseudo: &PseudoOutcomes, theta: f64) -> f64 {
    let n = pseudo.n() as f64;
    pseudo.values.iter().map(|v| (v - theta).powi(2)).sum::<f64>() / (2.0 * n)
}
