//! Exact simulation of a linear Hawkes process by Ogata-style thinning.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::model::HawkesModel;
use super::points::MarkedPointSet;
use crate::error::{Error, Result};

pub const DEFAULT_POINT_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    /// Length of the burn-in period before time 0, started from an empty past.
    pub warmup: f64,
    /// Right end of the observation period `[0, horizon]`.
    pub horizon: f64,
    pub max_points: usize,
}

impl SimulationOptions {
    pub fn new(warmup: f64, horizon: f64) -> Self {
        Self {
            warmup,
            horizon,
            max_points: DEFAULT_POINT_CAP,
        }
    }
}

/// Simulates on `[-warmup, horizon]` and returns every point of that window.
///
/// Between candidates the dominating rate of mark `m` is
/// `nu_m + sum_l sup(h_l^m) * #{points of l in [t - A, t]}`, which can only
/// shrink until the next acceptance, so it is recomputed after every
/// candidate.
pub fn simulate_thinning<R: Rng + ?Sized>(
    model: &HawkesModel,
    opts: SimulationOptions,
    rng: &mut R,
) -> Result<MarkedPointSet> {
    let m = model.marks();
    let support = model.support();
    let start = -opts.warmup;
    if !(opts.warmup >= 0.0 && opts.horizon.is_finite() && opts.horizon >= start) {
        return Err(Error::InvalidModel(format!(
            "bad simulation window (warmup {}, horizon {})",
            opts.warmup, opts.horizon
        )));
    }
    let sups: Vec<f64> = (0..m * m).map(|i| model.kernel(i / m, i % m).sup()).collect();
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut bounds = vec![0.0; m];
    let mut counts = vec![0usize; m];
    let mut total = 0usize;
    let mut t = start;

    loop {
        for (l, ts) in times.iter().enumerate() {
            counts[l] = ts.len() - ts.partition_point(|&u| u < t - support);
        }
        let mut rate = 0.0;
        for target in 0..m {
            let mut b = model.nu()[target];
            for source in 0..m {
                if counts[source] > 0 {
                    b += sups[source * m + target] * counts[source] as f64;
                }
            }
            bounds[target] = b;
            rate += b;
        }
        if rate <= 0.0 {
            break;
        }
        let wait: f64 = Exp1.sample(rng);
        let next = t + wait / rate;
        if next > opts.horizon {
            break;
        }
        if next == t {
            continue;
        }
        t = next;

        let mut u = rng.gen::<f64>() * rate;
        let mut target = m - 1;
        for (i, &b) in bounds.iter().enumerate() {
            if u < b {
                target = i;
                break;
            }
            u -= b;
        }
        let bound = bounds[target];
        if bound <= 0.0 {
            continue;
        }
        let lambda = intensity_from(model, &times, t, target);
        debug_assert!(
            lambda <= bound * (1.0 + 1e-12),
            "dominating rate {bound} below intensity {lambda} at t = {t}"
        );
        if rng.gen::<f64>() * bound < lambda {
            times[target].push(t);
            total += 1;
            if total > opts.max_points {
                return Err(Error::ExplodingProcess { cap: opts.max_points });
            }
        }
    }
    MarkedPointSet::new(times, (start, opts.horizon))
}

fn intensity_from(model: &HawkesModel, times: &[Vec<f64>], t: f64, target: usize) -> f64 {
    let mut lambda = model.nu()[target];
    let lo = t - model.support();
    for (source, ts) in times.iter().enumerate() {
        let h = model.kernel(source, target);
        if h.is_zero() {
            continue;
        }
        let first = ts.partition_point(|&u| u < lo);
        for &u in &ts[first..] {
            if u < t {
                lambda += h.eval(t - u);
            }
        }
    }
    lambda
}
