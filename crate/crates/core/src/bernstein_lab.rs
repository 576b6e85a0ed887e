//! Monte Carlo check of the self-normalized Bernstein inequality for
//! counting-process martingales `M_tau = H . (N - Lambda)_tau`, in its
//! observable form (`Vhat^mu` built from `H^2 . N_tau`) and in the form using
//! the quadratic characteristic `H^2 . Lambda_tau`.
//!
//! Every integrand here is piecewise constant between known breakpoints, so
//! the compensator integrals are exact sums.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp1};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::point_process::{simulate_thinning, HawkesModel, SimulationOptions};
use crate::weights::{mu_gap, vhat_mu as weights_vhat_mu};

/// `mu / (mu - phi(mu)) quad_var + B^2 x / (mu - phi(mu))`.
pub fn vhat_mu(quad_var: f64, bound: f64, x: f64, mu: f64) -> Result<f64> {
    weights_vhat_mu(quad_var, bound, x, mu)
}

fn peels(v: f64, w: f64, eps: f64, x: f64) -> Result<f64> {
    if !(w > 0.0 && v > w) {
        return Err(Error::BadBracket { v, w });
    }
    if !(eps > 0.0 && x > 0.0) {
        return Err(Error::Config(format!("need eps > 0 and x > 0 (got {eps}, {x})")));
    }
    Ok(((v / w).ln() / eps.ln_1p() + 1.0) * (-x).exp())
}

/// `2 (log(v/w) / log(1 + eps) + 1) e^{-x}`.
pub fn tail_bound(v: f64, w: f64, eps: f64, x: f64) -> Result<f64> {
    Ok(2.0 * peels(v, w, eps, x)?)
}

/// `(log(v/w) / log(1 + eps) + 1) e^{-x}`, for the event with the quadratic
/// characteristic in place of `Vhat^mu`.
pub fn characteristic_tail_bound(v: f64, w: f64, eps: f64, x: f64) -> Result<f64> {
    peels(v, w, eps, x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabProcess {
    /// Homogeneous Poisson process with the given rate.
    Poisson { rate: f64 },
    /// One mark of a Hawkes process started `warmup` seconds before 0.
    Hawkes {
        model: HawkesModel,
        mark: usize,
        warmup: f64,
    },
}

/// Predictable integrands `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrand {
    /// `H = value`.
    Constant { value: f64 },
    /// `H = +level` on `[2k p, (2k+1) p)`, `-level` on the next `p`.
    AlternatingStep { level: f64, period: f64 },
    /// `H_t = min(1, N[t - window, t) / bound)`.
    PastCount { window: f64, bound: f64 },
}

impl Integrand {
    /// The constant `B >= sup |H|` used in the inequality.
    pub fn sup_bound(&self) -> f64 {
        match *self {
            Integrand::Constant { value } if value != 0.0 => value.abs(),
            Integrand::Constant { .. } => 1.0,
            Integrand::AlternatingStep { level, .. } => level.abs(),
            Integrand::PastCount { .. } => 1.0,
        }
    }

    /// History needed before time 0.
    fn lookback(&self) -> f64 {
        match *self {
            Integrand::PastCount { window, .. } => window,
            _ => 0.0,
        }
    }

    /// Left-continuous value at `t` given the sorted points of the mark.
    fn value(&self, t: f64, times: &[f64]) -> f64 {
        match *self {
            Integrand::Constant { value } => value,
            Integrand::AlternatingStep { level, period } => {
                if ((t / period).ceil() as i64 - 1).rem_euclid(2) == 0 {
                    level
                } else {
                    -level
                }
            }
            Integrand::PastCount { window, bound } => {
                let lo = times.partition_point(|&u| u < t - window);
                let hi = times.partition_point(|&u| u < t);
                ((hi - lo) as f64 / bound).min(1.0)
            }
        }
    }

    fn breakpoints(&self, tau: f64, times: &[f64], out: &mut Vec<f64>) {
        match *self {
            Integrand::Constant { .. } => {}
            Integrand::AlternatingStep { period, .. } => {
                let mut k = 1.0;
                while k * period < tau {
                    out.push(k * period);
                    k += 1.0;
                }
            }
            Integrand::PastCount { window, .. } => {
                for &u in times {
                    for s in [u, u + window] {
                        if s > 0.0 && s < tau {
                            out.push(s);
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabSetup {
    pub id: String,
    pub process: LabProcess,
    pub integrand: Integrand,
    pub tau: f64,
    pub x: f64,
    pub eps: f64,
    pub mu: f64,
}

impl LabSetup {
    pub fn bound(&self) -> f64 {
        self.integrand.sup_bound()
    }

    /// Always-valid lower end of the bracket, `B^2 x / (mu - phi(mu))`.
    pub fn w_floor(&self) -> Result<f64> {
        Ok(self.bound().powi(2) * self.x / mu_gap(self.mu)?)
    }

    fn validate(&self) -> Result<()> {
        mu_gap(self.mu)?;
        if !(self.tau > 0.0 && self.x > 0.0 && self.eps > 0.0) {
            return Err(Error::Config(format!("lab setup {} needs tau, x, eps > 0", self.id)));
        }
        if let LabProcess::Hawkes { model, mark, warmup } = &self.process {
            if *mark >= model.marks() || *warmup < self.integrand.lookback().max(model.support()) {
                return Err(Error::Config(format!(
                    "lab setup {}: bad mark or warmup shorter than the history needed",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleTrial {
    pub m_tau: f64,
    pub vhat_mu: f64,
    pub quad_char: f64,
    pub quad_var: f64,
    pub sup_h: f64,
    pub tau: f64,
}

/// Simulates one path and evaluates the martingale statistics on `[0, tau]`.
pub fn martingale_trial<R: Rng + ?Sized>(setup: &LabSetup, rng: &mut R) -> Result<MartingaleTrial> {
    let tau = setup.tau;
    let history = setup.integrand.lookback();
    let (times, all): (Vec<f64>, Option<Vec<Vec<f64>>>) = match &setup.process {
        LabProcess::Poisson { rate } => {
            let mut ts = Vec::new();
            if *rate > 0.0 {
                let mut t = -history;
                loop {
                    let e: f64 = Exp1.sample(rng);
                    t += e / rate;
                    if t > tau {
                        break;
                    }
                    ts.push(t);
                }
            }
            (ts, None)
        }
        LabProcess::Hawkes { model, mark, warmup } => {
            let pts = simulate_thinning(model, SimulationOptions::new(*warmup, tau), rng)?;
            (pts.times(*mark).to_vec(), Some(pts.all_times().to_vec()))
        }
    };
    let compensator = |lo: f64, hi: f64| -> f64 {
        match (&setup.process, &all) {
            (LabProcess::Poisson { rate }, _) => rate * (hi - lo),
            (LabProcess::Hawkes { model, mark, .. }, Some(all)) => {
                let a = model.support();
                let mut s = model.nu()[*mark] * (hi - lo);
                for (source, ts) in all.iter().enumerate() {
                    let h = model.kernel(source, *mark);
                    if h.is_zero() {
                        continue;
                    }
                    let first = ts.partition_point(|&u| u < lo - a);
                    for &u in &ts[first..] {
                        if u >= hi {
                            break;
                        }
                        s += h.integral_over((lo - u).max(0.0), hi - u);
                    }
                }
                s
            }
            _ => unreachable!("Hawkes setups keep every mark"),
        }
    };

    let mut cuts = vec![0.0, tau];
    setup.integrand.breakpoints(tau, &times, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut sup_h = 0.0f64;
    let (mut h_dlambda, mut h2_dlambda) = (0.0, 0.0);
    for seg in cuts.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        // constant on (lo, hi]; left-continuous, so evaluate inside
        let h = setup.integrand.value(0.5 * (lo + hi), &times);
        if h == 0.0 {
            continue;
        }
        let lam = compensator(lo, hi);
        sup_h = sup_h.max(h.abs());
        h_dlambda += h * lam;
        h2_dlambda += h * h * lam;
    }
    let (mut h_dn, mut h2_dn) = (0.0, 0.0);
    let first = times.partition_point(|&u| u <= 0.0);
    for &t in &times[first..] {
        let h = setup.integrand.value(t, &times);
        sup_h = sup_h.max(h.abs());
        h_dn += h;
        h2_dn += h * h;
    }
    Ok(MartingaleTrial {
        m_tau: h_dn - h_dlambda,
        vhat_mu: vhat_mu(h2_dn, setup.bound(), setup.x, setup.mu)?,
        quad_char: h2_dlambda,
        quad_var: h2_dn,
        sup_h,
        tau,
    })
}

/// Brackets `w <= . <= v` for the two events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Brackets {
    pub w: f64,
    pub v: f64,
    pub w_char: f64,
    pub v_char: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}

/// `w = B^2 x / (mu - phi(mu))`, `v` = 99.9th percentile of `Vhat^mu` over a
/// pilot run. The characteristic bracket spans the 0.1th to 99.9th
/// percentiles of `H^2 . Lambda`, widened by one factor `1 + eps` when they
/// coincide.
pub fn default_brackets(setup: &LabSetup, pilot_trials: usize, seed: u64) -> Result<Brackets> {
    setup.validate()?;
    let trials = simulate_trials(setup, pilot_trials.max(2), seed)?;
    let mut v_hat: Vec<f64> = trials.iter().map(|t| t.vhat_mu).collect();
    let mut q_char: Vec<f64> = trials.iter().map(|t| t.quad_char).collect();
    v_hat.sort_by(f64::total_cmp);
    q_char.sort_by(f64::total_cmp);
    let w = setup.w_floor()?;
    let mut v = percentile(&v_hat, 0.999);
    if v <= w {
        v = w * (1.0 + setup.eps);
    }
    let mut w_char = percentile(&q_char, 0.001);
    let v_char = percentile(&q_char, 0.999);
    if v_char <= w_char {
        w_char = v_char / (1.0 + setup.eps);
    }
    Ok(Brackets { w, v, w_char, v_char })
}

fn trial_seed(base: u64, trial: u64) -> u64 {
    base.wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn simulate_trials(setup: &LabSetup, n: usize, seed: u64) -> Result<Vec<MartingaleTrial>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| martingale_trial(setup, &mut Xoshiro256PlusPlus::seed_from_u64(trial_seed(seed, i))))
        .collect()
}

impl MartingaleTrial {
    /// The event bounded by [`tail_bound`].
    pub fn observable_event(&self, setup: &LabSetup, br: &Brackets) -> bool {
        let b = setup.bound();
        self.m_tau >= (2.0 * (1.0 + setup.eps) * self.vhat_mu * setup.x).sqrt() + b * setup.x / 3.0
            && br.w <= self.vhat_mu
            && self.vhat_mu <= br.v
            && self.sup_h <= b
    }

    /// The event bounded by [`characteristic_tail_bound`].
    pub fn characteristic_event(&self, setup: &LabSetup, br: &Brackets) -> bool {
        let b = setup.bound();
        self.m_tau >= (2.0 * (1.0 + setup.eps) * self.quad_char * setup.x).sqrt() + b * setup.x / 3.0
            && br.w_char <= self.quad_char
            && self.quad_char <= br.v_char
            && self.sup_h <= b
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    // the closed form is exactly 0 (or 1) at the extremes, up to rounding
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Exact probability of the observable event for a Poisson process with a
/// constant integrand, by summing the Poisson pmf over the counts where the
/// event holds. `None` for other setups.
pub fn exact_probability(setup: &LabSetup, br: &Brackets) -> Option<f64> {
    let (rate, c) = match (&setup.process, setup.integrand) {
        (LabProcess::Poisson { rate }, Integrand::Constant { value }) => (*rate, value),
        _ => return None,
    };
    let mean = rate * setup.tau;
    let upper = (mean + 40.0 * mean.sqrt() + 50.0).ceil() as u64;
    let mut p = 0.0;
    for n in 0..=upper {
        let nf = n as f64;
        let trial = MartingaleTrial {
            m_tau: c * (nf - mean),
            vhat_mu: vhat_mu(c * c * nf, setup.bound(), setup.x, setup.mu).ok()?,
            quad_char: c * c * mean,
            quad_var: c * c * nf,
            sup_h: c.abs(),
            tau: setup.tau,
        };
        if trial.observable_event(setup, br) {
            let ln_pmf = if mean > 0.0 {
                nf * mean.ln() - mean - libm::lgamma(nf + 1.0)
            } else if n == 0 {
                0.0
            } else {
                f64::NEG_INFINITY
            };
            p += ln_pmf.exp();
        }
    }
    Some(p)
}

pub const WILSON_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub struct LabReport {
    pub setup_id: String,
    pub x: f64,
    pub eps: f64,
    pub mu: f64,
    pub brackets: Brackets,
    pub n_trials: usize,
    pub hits: usize,
    pub empirical_freq: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub theoretical_bound: f64,
    pub exact_prob: Option<f64>,
    /// Only for Poisson setups, where the compensator is known in advance.
    pub characteristic_freq: Option<f64>,
    pub characteristic_bound: Option<f64>,
}

impl LabReport {
    /// Empirical frequency within the bound plus `3` Wilson half-widths.
    pub fn within_bound(&self) -> bool {
        let half = 0.5 * (self.wilson_hi - self.wilson_lo);
        self.empirical_freq <= self.theoretical_bound + 3.0 * half
    }

    /// Exact probability (if any) inside the Wilson interval.
    pub fn matches_exact(&self) -> Option<bool> {
        self.exact_prob.map(|p| self.wilson_lo <= p && p <= self.wilson_hi)
    }
}

/// Runs `n_trials` independent paths; trial `i` uses its own generator seeded
/// from `seed` and `i`, so results do not depend on scheduling.
pub fn run_trials(setup: &LabSetup, brackets: Brackets, n_trials: usize, seed: u64) -> Result<LabReport> {
    setup.validate()?;
    let trials = simulate_trials(setup, n_trials, seed)?;
    let hits = trials.iter().filter(|t| t.observable_event(setup, &brackets)).count();
    let (wilson_lo, wilson_hi) = wilson_interval(hits, n_trials, WILSON_Z);
    let poisson = matches!(setup.process, LabProcess::Poisson { .. });
    let (characteristic_freq, characteristic_bound) = if poisson {
        let k = trials
            .iter()
            .filter(|t| t.characteristic_event(setup, &brackets))
            .count();
        (
            Some(k as f64 / n_trials.max(1) as f64),
            characteristic_tail_bound(brackets.v_char, brackets.w_char, setup.eps, setup.x).ok(),
        )
    } else {
        (None, None)
    };
    Ok(LabReport {
        setup_id: setup.id.clone(),
        x: setup.x,
        eps: setup.eps,
        mu: setup.mu,
        brackets,
        n_trials,
        hits,
        empirical_freq: hits as f64 / n_trials.max(1) as f64,
        wilson_lo,
        wilson_hi,
        theoretical_bound: tail_bound(brackets.v, brackets.w, setup.eps, setup.x)?,
        exact_prob: exact_probability(setup, &brackets),
        characteristic_freq,
        characteristic_bound,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn write_report_csv<W: Write>(reports: &[LabReport], mut out: W) -> Result<()> {
    writeln!(
        out,
        "setup_id,x,eps,mu,w,v,n_trials,empirical_freq,wilson_hi,theoretical_bound,exact_prob_if_available,\
         wilson_lo,w_char,v_char,characteristic_freq,characteristic_bound"
    )?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.setup_id,
            r.x,
            r.eps,
            r.mu,
            r.brackets.w,
            r.brackets.v,
            r.n_trials,
            r.empirical_freq,
            r.wilson_hi,
            r.theoretical_bound,
            opt(r.exact_prob),
            r.wilson_lo,
            r.brackets.w_char,
            r.brackets.v_char,
            opt(r.characteristic_freq),
            opt(r.characteristic_bound),
        )?;
    }
    Ok(())
}
