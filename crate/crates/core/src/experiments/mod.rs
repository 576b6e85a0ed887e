//! Replicated simulation studies: simulate, build the design, fit every
//! (method, gamma) pair, score against the truth, and write CSV tables.
//!
//! Replicate `r` draws from `Xoshiro256PlusPlus::seed_from_u64(base_seed ^ (r + 1))`
//! and replicates run in parallel; output is assembled in replicate order,
//! so files are byte-identical across runs with the same config.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Poisson};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

pub use config::{
    BChoiceConfig, ExperimentConfig, KernelEntry, Method, ModelSpec, PoissonConfig, Preset, SolverConfig, WeightConfig,
    ADAPTIVE_GAMMAS, BERNSTEIN_GAMMAS,
};

use crate::design::{build_design, build_design_poisson, DesignSystem};
use crate::dictionary::{CoefficientVector, HistogramDictionary, StepReconstruction};
use crate::error::{Error, Result};
use crate::metrics::{RunMetrics, TableSummary};
use crate::point_process::{simulate_thinning, HawkesModel, MarkedPointSet, SimulationOptions};
use crate::solver::{lasso_shooting, ols, ols_refit, soft_threshold, LassoOptions, LassoSolution};
use crate::weights::{adaptive_weights, practical_weights, theoretical_weights, BChoice, WeightVector};

pub fn replicate_rng(base_seed: u64, replicate: usize) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(base_seed ^ (replicate as u64 + 1))
}

fn lasso_options(cfg: &SolverConfig) -> LassoOptions {
    LassoOptions {
        tol: cfg.tol,
        max_passes: cfg.max_passes,
        ..LassoOptions::default()
    }
}

/// One fitted estimate.
#[derive(Debug, Clone)]
pub struct Fit {
    pub method: Method,
    pub gamma: f64,
    pub a: CoefficientVector,
    /// Weights of the Lasso step (before any refit).
    pub weights: WeightVector,
    pub lasso: LassoSolution,
}

/// Fits `method` with parameter `gamma`. `prelim` is the OLS estimate used
/// by the adaptive weights; it is computed when not supplied.
pub fn fit_method(
    sys: &DesignSystem,
    dict: &HistogramDictionary,
    method: Method,
    gamma: f64,
    cfg: &ExperimentConfig,
    prelim: Option<&[f64]>,
) -> Result<Fit> {
    let weights = if method.is_adaptive() {
        let owned;
        let p = match prelim {
            Some(p) => p,
            None => {
                owned = ols(sys).a;
                &owned
            }
        };
        adaptive_weights(p, gamma, cfg.weights.adaptive_p)?
    } else {
        practical_weights(sys, gamma, sys.horizon())?
    };
    let lasso = lasso_shooting(sys, &weights, &lasso_options(&cfg.solver))?;
    let values = if method.refits() {
        let support: Vec<bool> = lasso.a.iter().map(|&v| v != 0.0).collect();
        ols_refit(sys, &support).a
    } else {
        lasso.a.clone()
    };
    Ok(Fit {
        method,
        gamma,
        a: CoefficientVector::new(*dict, values)?,
        weights,
        lasso,
    })
}

/// Simulates one replicate of a Hawkes preset on `(-warmup, T]`.
pub fn simulate_replicate(cfg: &ExperimentConfig, model: &HawkesModel, replicate: usize) -> Result<MarkedPointSet> {
    let mut rng = replicate_rng(cfg.base_seed, replicate);
    simulate_thinning(model, SimulationOptions::new(cfg.warmup, cfg.horizon), &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub replicate: usize,
    pub method: Method,
    pub gamma: f64,
    pub horizon: f64,
    pub metrics: RunMetrics,
    pub converged: bool,
    /// `kkt_residual / (1 + ||b||_inf)` of the Lasso step.
    pub scaled_kkt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub gamma: f64,
    pub horizon: f64,
    pub summary: TableSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub rows: Vec<RunRow>,
    pub summaries: Vec<SummaryRow>,
    /// `(replicate, error message)`.
    pub failures: Vec<(usize, String)>,
    pub n_replicates: usize,
    pub spectral_radius: f64,
}

impl ExperimentOutcome {
    pub fn failure_rate(&self) -> f64 {
        self.failures.len() as f64 / self.n_replicates.max(1) as f64
    }

    pub fn summary(&self, method: Method, gamma: f64) -> Option<&TableSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.gamma == gamma)
            .map(|s| &s.summary)
    }
}

fn run_replicate(
    cfg: &ExperimentConfig,
    model: &HawkesModel,
    dict: &HistogramDictionary,
    truth: &CoefficientVector,
    replicate: usize,
) -> Result<Vec<RunRow>> {
    let points = simulate_replicate(cfg, model, replicate)?;
    let sys = build_design(&points, dict, cfg.horizon)?;
    let prelim = cfg.methods.iter().any(|m| m.is_adaptive()).then(|| ols(&sys).a);
    let b_scale = 1.0 + sys.b().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for gamma in cfg.gammas_for(method) {
            let fit = fit_method(&sys, dict, method, gamma, cfg, prelim.as_deref())?;
            let metrics = RunMetrics::compute(&fit.a, truth, model, &sys, &fit.weights)?;
            rows.push(RunRow {
                replicate,
                method,
                gamma,
                horizon: cfg.horizon,
                metrics,
                converged: fit.lasso.converged,
                scaled_kkt: crate::solver::kkt_residual(&sys, &fit.weights, &fit.lasso.a) / b_scale,
            });
        }
    }
    Ok(rows)
}

/// Runs every replicate of a Hawkes preset. Failed replicates are recorded
/// and left out of the summaries.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let model = cfg.model()?;
    let dict = HistogramDictionary::new(model.marks(), cfg.bins, model.support())?;
    let truth = dict.project_truth(&model)?;
    let results: Vec<Result<Vec<RunRow>>> = (0..cfg.n_replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, &model, &dict, &truth, r))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => rows.extend(v),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let mut summaries = Vec::new();
    for &method in &cfg.methods {
        for gamma in cfg.gammas_for(method) {
            let runs: Vec<RunMetrics> = rows
                .iter()
                .filter(|row| row.method == method && row.gamma == gamma)
                .map(|row| row.metrics.clone())
                .collect();
            summaries.push(SummaryRow {
                method,
                gamma,
                horizon: cfg.horizon,
                summary: TableSummary::from_runs(&runs, model.marks()),
            });
        }
    }
    Ok(ExperimentOutcome {
        rows,
        summaries,
        failures,
        n_replicates: cfg.n_replicates,
        spectral_radius: model.branching_matrix().spectral_radius(),
    })
}

fn na<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn write_runs_csv<W: Write>(rows: &[RunRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "replicate,method,gamma,T,dg,s,f_plus,f_minus,coeff_plus,coeff_minus,spont_mse,inter_mse,oracle_ratio"
    )?;
    for r in rows {
        let m = &r.metrics;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.replicate,
            r.method.label(),
            r.gamma,
            r.horizon,
            m.dg_correct as u8,
            m.s_nonzero_spont,
            m.f_plus,
            m.f_minus,
            na(m.coeff_plus),
            na(m.coeff_minus),
            m.spont_mse,
            m.inter_mse,
            na(m.oracle_ratio),
        )?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "method,gamma,T,n_runs,dg,s,s_all_nonzero,f_plus,f_minus,coeff_plus,coeff_minus,\
         spont_mse_mean,spont_mse_median,inter_mse_mean,inter_mse_median,oracle_ratio_median"
    )?;
    for r in rows {
        let s = &r.summary;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method.label(),
            r.gamma,
            r.horizon,
            s.n_runs,
            s.dg_count,
            na(s.s_median),
            s.s_all_nonzero as u8,
            na(s.f_plus_median),
            na(s.f_minus_median),
            na(s.coeff_plus_median),
            na(s.coeff_minus_median),
            na(s.spont_mse_mean),
            na(s.spont_mse_median),
            na(s.inter_mse_mean),
            na(s.inter_mse_median),
            na(s.oracle_ratio_median),
        )?;
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes `runs.csv`, `summary.csv` and `failures.csv` to `dir`.
pub fn write_outcome(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut f = create(dir, "runs.csv")?;
    write_runs_csv(&outcome.rows, &mut f)?;
    f.flush()?;
    let mut f = create(dir, "summary.csv")?;
    write_summary_csv(&outcome.summaries, &mut f)?;
    f.flush()?;
    let mut f = create(dir, "failures.csv")?;
    writeln!(f, "replicate,error")?;
    for (r, e) in &outcome.failures {
        writeln!(f, "{},\"{}\"", r, e.replace('"', "'"))?;
    }
    f.flush()?;
    Ok(["runs.csv", "summary.csv", "failures.csv"]
        .iter()
        .map(|n| dir.join(n))
        .collect())
}

/// One replicate of the Poisson pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonRun {
    pub replicate: usize,
    pub truth: Vec<f64>,
    pub b: Vec<f64>,
    pub weights: Vec<f64>,
    pub lasso: Vec<f64>,
    /// `soft_threshold(b, d) / M`.
    pub closed_form: Vec<f64>,
    /// `max |G - M I|`.
    pub gram_deviation: f64,
    pub converged: bool,
}

impl PoissonRun {
    pub fn closed_form_deviation(&self) -> f64 {
        self.lasso
            .iter()
            .zip(&self.closed_form)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Draws `samples` i.i.d. processes on `[0, 1]` with the configured step
/// intensity.
pub fn simulate_poisson_samples<R: Rng + ?Sized>(p: &PoissonConfig, rng: &mut R) -> Result<MarkedPointSet> {
    let pieces = p.levels.len();
    let width = 1.0 / pieces as f64;
    let mut times = Vec::with_capacity(p.samples);
    for _ in 0..p.samples {
        let mut ts = Vec::new();
        for (k, &level) in p.levels.iter().enumerate() {
            if level <= 0.0 {
                continue;
            }
            let dist = Poisson::new(level * width).map_err(|e| Error::Config(e.to_string()))?;
            let n: f64 = dist.sample(rng);
            let lo = k as f64 * width;
            for _ in 0..n as usize {
                // uniform on (lo, lo + width]
                ts.push(lo + width * (1.0 - rng.gen::<f64>()));
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        times.push(ts);
    }
    MarkedPointSet::new(times, (0.0, 1.0))
}

/// `delta^{-1/2} int_bin f` for the step intensity of the Poisson pipeline.
pub fn poisson_truth(p: &PoissonConfig, bins: usize) -> Vec<f64> {
    let pieces = p.levels.len();
    let delta = 1.0 / bins as f64;
    (0..bins)
        .map(|k| {
            let (lo, hi) = (k as f64 * delta, (k + 1) as f64 * delta);
            let mass: f64 = p
                .levels
                .iter()
                .enumerate()
                .map(|(j, &level)| {
                    let (a, b) = (j as f64 / pieces as f64, (j + 1) as f64 / pieces as f64);
                    level * (hi.min(b) - lo.max(a)).max(0.0)
                })
                .sum();
            mass / delta.sqrt()
        })
        .collect()
}

/// Fits one Poisson-pipeline replicate with theoretical weights.
pub fn poisson_replicate(cfg: &ExperimentConfig, replicate: usize) -> Result<PoissonRun> {
    let p = &cfg.poisson;
    let samples = simulate_poisson_samples(p, &mut replicate_rng(cfg.base_seed, replicate))?;
    let sys = build_design_poisson(&samples, cfg.bins)?;
    let w = &cfg.weights;
    let b_choice = match w.b_choice {
        BChoiceConfig::Observed => BChoice::Observed,
        // N plays no role for deterministic predictors
        BChoiceConfig::LogSquared => BChoice::Bound { n_bound: 1.0 },
    };
    let weights = theoretical_weights(&sys, p.x, w.mu, w.eps, b_choice)?;
    let sol = lasso_shooting(&sys, &weights, &lasso_options(&cfg.solver))?;
    let m = p.samples as f64;
    let b = sys.b();
    let closed_form = b
        .iter()
        .zip(weights.weights())
        .map(|(&bj, &dj)| soft_threshold(bj, dj) / m)
        .collect();
    let g = sys.gram_dense();
    let gram_deviation = (0..g.nrows())
        .flat_map(|r| (0..g.ncols()).map(move |c| (r, c)))
        .map(|(r, c)| (g[(r, c)] - if r == c { m } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    Ok(PoissonRun {
        replicate,
        truth: poisson_truth(p, cfg.bins),
        b,
        weights: weights.weights().to_vec(),
        lasso: sol.a,
        closed_form,
        gram_deviation,
        converged: sol.converged,
    })
}

pub fn run_poisson_pipeline(cfg: &ExperimentConfig) -> Result<Vec<PoissonRun>> {
    cfg.validate()?;
    (0..cfg.n_replicates)
        .into_par_iter()
        .map(|r| poisson_replicate(cfg, r))
        .collect()
}

pub fn write_poisson_outputs(runs: &[PoissonRun], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut f = create(dir, "poisson_runs.csv")?;
    writeln!(f, "replicate,bin,truth,b,weight,lasso,closed_form")?;
    for r in runs {
        for k in 0..r.b.len() {
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                r.replicate,
                k + 1,
                r.truth[k],
                r.b[k],
                r.weights[k],
                r.lasso[k],
                r.closed_form[k]
            )?;
        }
    }
    f.flush()?;
    let mut f = create(dir, "poisson_summary.csv")?;
    writeln!(
        f,
        "replicate,gram_deviation,closed_form_deviation,support_size,converged"
    )?;
    for r in runs {
        writeln!(
            f,
            "{},{},{},{},{}",
            r.replicate,
            r.gram_deviation,
            r.closed_form_deviation(),
            r.lasso.iter().filter(|&&v| v != 0.0).count(),
            r.converged as u8
        )?;
    }
    f.flush()?;
    Ok(vec![dir.join("poisson_runs.csv"), dir.join("poisson_summary.csv")])
}

/// Step-function estimates of one replicate for each `(method, gamma)`.
pub fn export_reconstruction(
    cfg: &ExperimentConfig,
    replicate: usize,
    fits: &[(Method, f64)],
) -> Result<Vec<(Method, f64, StepReconstruction)>> {
    cfg.validate()?;
    let model = cfg.model()?;
    let dict = HistogramDictionary::new(model.marks(), cfg.bins, model.support())?;
    let points = simulate_replicate(cfg, &model, replicate)?;
    let sys = build_design(&points, &dict, cfg.horizon)?;
    let prelim = fits.iter().any(|(m, _)| m.is_adaptive()).then(|| ols(&sys).a);
    fits.iter()
        .map(|&(method, gamma)| {
            let fit = fit_method(&sys, &dict, method, gamma, cfg, prelim.as_deref())?;
            Ok((method, gamma, dict.reconstruct(&fit.a)))
        })
        .collect()
}

/// Writes `reconstruction_<method>.csv` per fit plus `truth.csv` with the
/// projection of the true model.
pub fn write_reconstructions(
    cfg: &ExperimentConfig,
    recs: &[(Method, f64, StepReconstruction)],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let model = cfg.model()?;
    let dict = HistogramDictionary::new(model.marks(), cfg.bins, model.support())?;
    let mut paths = Vec::new();
    for (method, _, rec) in recs {
        let name = format!("reconstruction_{}.csv", method.label());
        let mut f = create(dir, &name)?;
        rec.write_csv(&mut f)?;
        f.flush()?;
        paths.push(dir.join(name));
    }
    let mut f = create(dir, "truth.csv")?;
    dict.reconstruct(&dict.project_truth(&model)?).write_csv(&mut f)?;
    f.flush()?;
    paths.push(dir.join("truth.csv"));
    Ok(paths)
}
