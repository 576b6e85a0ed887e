//! Penalty weights `d` for the weighted Lasso.
//!
//! Three recipes:
//! * theoretical Bernstein weights
//!   `d = sqrt(2 (1 + eps) Vhat^mu x) + B x / 3` with
//!   `Vhat^mu = mu / (mu - phi(mu)) vhat + B^2 x / (mu - phi(mu))`,
//!   `phi(u) = exp(u) - u - 1`;
//! * the single-parameter practical form
//!   `d = sqrt(2 gamma log(T) vhat) + gamma log(T) bhat / 3`;
//! * adaptive Lasso weights `d = gamma / (2 |a_prelim|^p)`.

use crate::design::{ColumnKind, DesignSystem};
use crate::error::{Error, Result};

/// `exp(u) - u - 1`.
pub fn phi(u: f64) -> f64 {
    u.exp_m1() - u
}

/// Checks `0 < mu < 3` and `mu > phi(mu)`; returns `mu - phi(mu)`.
pub fn mu_gap(mu: f64) -> Result<f64> {
    let gap = mu - phi(mu);
    if !(mu > 0.0 && mu < 3.0 && gap > 0.0) {
        return Err(Error::BadMu(mu));
    }
    Ok(gap)
}

/// Which bound `B_phi` on `sup |psi(phi)|` enters the theoretical weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BChoice {
    /// The observed `bhat` of the design.
    Observed,
    /// `1` for constant predictors and `||phi||_inf * n_bound` for counting
    /// predictors, `n_bound` being a bound on the points per support window.
    Bound { n_bound: f64 },
}

impl BChoice {
    /// `n_bound = log(T)^2`.
    pub fn log_squared(horizon: f64) -> Self {
        BChoice::Bound {
            n_bound: horizon.ln().powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRecipe {
    TheoreticalBernstein {
        x: f64,
        mu: f64,
        eps: f64,
        b_choice: BChoice,
    },
    PracticalBernstein {
        gamma: f64,
    },
    Adaptive {
        gamma: f64,
        p: f64,
    },
}

/// Nonnegative weights; excluded columns stand for `d = +inf` and are pinned
/// to zero by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    d: Vec<f64>,
    excluded: Vec<bool>,
    recipe: WeightRecipe,
}

impl WeightVector {
    pub fn new(d: Vec<f64>, excluded: Vec<bool>, recipe: WeightRecipe) -> Result<Self> {
        if d.len() != excluded.len() {
            return Err(Error::Dimension("weights and exclusion flags differ in length".into()));
        }
        if d.iter()
            .zip(&excluded)
            .any(|(v, &ex)| !ex && !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::Config("weights must be finite and nonnegative".into()));
        }
        Ok(Self { d, excluded, recipe })
    }

    /// Uniform weight `value` on `len` columns.
    pub fn constant(len: usize, value: f64) -> Self {
        Self {
            d: vec![value; len],
            excluded: vec![false; len],
            recipe: WeightRecipe::PracticalBernstein { gamma: f64::NAN },
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Finite weight of column `i`; meaningless if the column is excluded.
    pub fn weight(&self, i: usize) -> f64 {
        self.d[i]
    }

    pub fn is_excluded(&self, i: usize) -> bool {
        self.excluded[i]
    }

    /// Weight with exclusions shown as `+inf`.
    pub fn value(&self, i: usize) -> f64 {
        if self.excluded[i] {
            f64::INFINITY
        } else {
            self.d[i]
        }
    }

    pub fn recipe(&self) -> WeightRecipe {
        self.recipe
    }

    pub fn weights(&self) -> &[f64] {
        &self.d
    }
}

/// `x = alpha log(T)`.
pub fn default_x(alpha: f64, horizon: f64) -> f64 {
    alpha * horizon.ln()
}

/// `Vhat^mu` of one column.
pub fn vhat_mu(quad_var: f64, bound: f64, x: f64, mu: f64) -> Result<f64> {
    let gap = mu_gap(mu)?;
    Ok(mu / gap * quad_var + bound * bound * x / gap)
}

fn a_priori_bound(kind: ColumnKind, n_bound: f64) -> f64 {
    match kind {
        ColumnKind::Constant => 1.0,
        ColumnKind::Counting { sup } => sup * n_bound,
        ColumnKind::Deterministic { sup } => sup,
    }
}

pub fn theoretical_weights(sys: &DesignSystem, x: f64, mu: f64, eps: f64, b_choice: BChoice) -> Result<WeightVector> {
    let gap = mu_gap(mu)?;
    if !(x > 0.0 && eps > 0.0) {
        return Err(Error::Config(format!(
            "need x > 0 and eps > 0 (got x = {x}, eps = {eps})"
        )));
    }
    let vhat = sys.vhat();
    let bhat = sys.bhat();
    let d = (0..sys.size())
        .map(|i| {
            let bound = match b_choice {
                BChoice::Observed => bhat[i],
                BChoice::Bound { n_bound } => a_priori_bound(sys.kind(i), n_bound),
            };
            let v = mu / gap * vhat[i] + bound * bound * x / gap;
            (2.0 * (1.0 + eps) * v * x).sqrt() + bound * x / 3.0
        })
        .collect();
    WeightVector::new(
        d,
        vec![false; sys.size()],
        WeightRecipe::TheoreticalBernstein { x, mu, eps, b_choice },
    )
}

pub fn practical_weights(sys: &DesignSystem, gamma: f64, horizon: f64) -> Result<WeightVector> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be > 0 (got {gamma})")));
    }
    if !(horizon > 1.0) {
        return Err(Error::Config(format!("practical weights need T > 1 (got {horizon})")));
    }
    let scale = gamma * horizon.ln();
    let d = sys
        .vhat()
        .iter()
        .zip(sys.bhat())
        .map(|(&v, b)| (2.0 * scale * v).sqrt() + scale / 3.0 * b)
        .collect();
    WeightVector::new(d, vec![false; sys.size()], WeightRecipe::PracticalBernstein { gamma })
}

/// Zero (or non-finite) preliminary coefficients give excluded columns.
pub fn adaptive_weights(prelim: &[f64], gamma: f64, p: f64) -> Result<WeightVector> {
    if !(gamma > 0.0 && p > 0.0) {
        return Err(Error::Config(format!(
            "adaptive weights need gamma > 0 and p > 0 (got {gamma}, {p})"
        )));
    }
    let mut d = Vec::with_capacity(prelim.len());
    let mut excluded = Vec::with_capacity(prelim.len());
    for &a in prelim {
        let w = gamma / (2.0 * a.abs().powf(p));
        if a == 0.0 || !w.is_finite() {
            d.push(0.0);
            excluded.push(true);
        } else {
            d.push(w);
            excluded.push(false);
        }
    }
    WeightVector::new(d, excluded, WeightRecipe::Adaptive { gamma, p })
}
