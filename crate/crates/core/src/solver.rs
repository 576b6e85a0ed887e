//! Weighted Lasso by cyclic coordinate descent ("shooting"), plus OLS and
//! OLS refits on a given support.
//!
//! The contrast is `F(a) = -2 a'b + a'G a + 2 sum_j d_j |a_j|`. `G` is block
//! diagonal, so every target block is an independent problem.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::design::DesignSystem;
use crate::error::{Error, Result};
use crate::weights::WeightVector;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoOptions {
    pub tol: f64,
    pub max_passes: usize,
    /// Starting point; `None` starts from zero.
    pub warm_start: Option<Vec<f64>>,
    /// Keep the objective of every block after every pass.
    pub record_objective: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_passes: 10_000,
            warm_start: None,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub a: Vec<f64>,
    /// Flat indices with `a != 0`, ascending.
    pub support: Vec<usize>,
    /// Largest pass count over the blocks.
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Per block, the objective before the first pass and after each pass.
    /// Empty unless requested.
    pub objective_trace: Vec<Vec<f64>>,
}

/// `sign(z) max(|z| - d, 0)`.
pub fn soft_threshold(z: f64, d: f64) -> f64 {
    if z > d {
        z - d
    } else if z < -d {
        z + d
    } else {
        0.0
    }
}

/// `-2 a'b + a'G a + 2 sum d|a|`; excluded columns contribute nothing as
/// long as their coefficient is zero.
pub fn objective(sys: &DesignSystem, d: &WeightVector, a: &[f64]) -> f64 {
    let b = sys.b();
    let penalty: f64 = (0..a.len())
        .filter(|&j| a[j] != 0.0)
        .map(|j| 2.0 * d.value(j) * a[j].abs())
        .sum();
    let lin: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    sys.quadratic_form(a) - 2.0 * lin + penalty
}

fn check_len(sys: &DesignSystem, len: usize, what: &str) -> Result<()> {
    if len != sys.size() {
        return Err(Error::Dimension(format!(
            "{what} has length {len}, design has {}",
            sys.size()
        )));
    }
    Ok(())
}

pub fn lasso_shooting(sys: &DesignSystem, d: &WeightVector, opts: &LassoOptions) -> Result<LassoSolution> {
    check_len(sys, d.len(), "weight vector")?;
    if let Some(w) = &opts.warm_start {
        check_len(sys, w.len(), "warm start")?;
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be > 0 (got {})", opts.tol)));
    }
    let n = sys.block_size();
    let results: Vec<BlockResult> = sys
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(i, blk)| {
            let range = i * n..(i + 1) * n;
            let weights: Vec<f64> = range.clone().map(|j| d.weight(j)).collect();
            let excluded: Vec<bool> = range.clone().map(|j| d.is_excluded(j)).collect();
            let init = match &opts.warm_start {
                Some(w) => w[range].to_vec(),
                None => vec![0.0; n],
            };
            shoot_block(&blk.gram, &blk.b, &weights, &excluded, init, opts)
        })
        .collect();

    let mut a = Vec::with_capacity(sys.size());
    let mut iterations = 0;
    let mut converged = true;
    let mut objective = 0.0;
    let mut objective_trace = Vec::new();
    for r in results {
        a.extend(r.a);
        iterations = iterations.max(r.passes);
        converged &= r.converged;
        objective += r.objective;
        if opts.record_objective {
            objective_trace.push(r.trace);
        }
    }
    let support = (0..a.len()).filter(|&j| a[j] != 0.0).collect();
    Ok(LassoSolution {
        a,
        support,
        iterations,
        converged,
        objective,
        objective_trace,
    })
}

struct BlockResult {
    a: Vec<f64>,
    passes: usize,
    converged: bool,
    objective: f64,
    trace: Vec<f64>,
}

fn block_objective(b: &[f64], d: &[f64], a: &[f64], ga: &[f64]) -> f64 {
    (0..a.len())
        .map(|j| a[j] * ga[j] - 2.0 * a[j] * b[j] + 2.0 * d[j] * a[j].abs())
        .sum()
}

fn block_kkt(b: &[f64], d: &[f64], excluded: &[bool], a: &[f64], ga: &[f64]) -> f64 {
    (0..a.len())
        .filter(|&j| !excluded[j])
        .map(|j| {
            let grad = 2.0 * (ga[j] - b[j]);
            if a[j] != 0.0 {
                (grad + 2.0 * d[j] * a[j].signum()).abs()
            } else {
                (grad.abs() - 2.0 * d[j]).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn shoot_block(
    g: &DMatrix<f64>,
    b: &[f64],
    d: &[f64],
    excluded: &[bool],
    mut a: Vec<f64>,
    opts: &LassoOptions,
) -> BlockResult {
    let n = b.len();
    let fixed: Vec<bool> = (0..n).map(|j| excluded[j] || g[(j, j)] <= 0.0).collect();
    for j in 0..n {
        if fixed[j] {
            a[j] = 0.0;
        }
    }
    let mut ga: Vec<f64> = (0..n).map(|r| (0..n).map(|c| g[(r, c)] * a[c]).sum()).collect();
    let b_scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut trace = Vec::new();
    let mut current = block_objective(b, d, &a, &ga);
    if opts.record_objective {
        trace.push(current);
    }

    let mut passes = 0;
    let mut converged = false;
    while passes < opts.max_passes {
        passes += 1;
        let mut max_change = 0.0f64;
        for j in 0..n {
            if fixed[j] {
                continue;
            }
            let gjj = g[(j, j)];
            let z = b[j] - ga[j] + gjj * a[j];
            let new = soft_threshold(z, d[j]) / gjj;
            let delta = new - a[j];
            if delta != 0.0 {
                for r in 0..n {
                    ga[r] += g[(r, j)] * delta;
                }
                a[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let next = block_objective(b, d, &a, &ga);
        debug_assert!(
            next <= current + 1e-9 * (1.0 + current.abs()),
            "objective increased from {current} to {next}"
        );
        current = next;
        if opts.record_objective {
            trace.push(current);
        }
        let a_max = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // The step criterion alone can stop early on badly scaled blocks;
        // also require the optimality certificate.
        if max_change <= opts.tol * (1.0 + a_max) && block_kkt(b, d, excluded, &a, &ga) <= 10.0 * opts.tol * b_scale {
            converged = true;
            break;
        }
    }
    BlockResult {
        a,
        passes,
        converged,
        objective: current,
        trace,
    }
}

/// Largest violation of the Lasso optimality conditions.
pub fn kkt_residual(sys: &DesignSystem, d: &WeightVector, a: &[f64]) -> f64 {
    let n = sys.block_size();
    let mut worst = 0.0f64;
    for (i, blk) in sys.blocks().iter().enumerate() {
        let x = &a[i * n..(i + 1) * n];
        let ga: Vec<f64> = (0..n).map(|r| (0..n).map(|c| blk.gram[(r, c)] * x[c]).sum()).collect();
        let w: Vec<f64> = (i * n..(i + 1) * n).map(|j| d.weight(j)).collect();
        let ex: Vec<bool> = (i * n..(i + 1) * n).map(|j| d.is_excluded(j)).collect();
        worst = worst.max(block_kkt(&blk.b, &w, &ex, x, &ga));
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsSolution {
    pub a: Vec<f64>,
    /// Blocks whose restricted Gram matrix was rank deficient; these hold the
    /// minimum-norm least-squares solution.
    pub singular_blocks: Vec<usize>,
}

/// Solves `G a = b` block by block.
pub fn ols(sys: &DesignSystem) -> OlsSolution {
    ols_refit(sys, &vec![true; sys.size()])
}

/// Solves the normal equations restricted to `support` (a flag per column);
/// off-support coefficients are zero.
pub fn ols_refit(sys: &DesignSystem, support: &[bool]) -> OlsSolution {
    assert_eq!(support.len(), sys.size(), "support flags must cover every column");
    let n = sys.block_size();
    let solved: Vec<(Vec<f64>, bool)> = sys
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(i, blk)| {
            let idx: Vec<usize> = (0..n).filter(|&j| support[i * n + j]).collect();
            let mut out = vec![0.0; n];
            if idx.is_empty() {
                return (out, false);
            }
            let g = DMatrix::from_fn(idx.len(), idx.len(), |r, c| blk.gram[(idx[r], idx[c])]);
            let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&j| blk.b[j]));
            let (x, singular) = solve_symmetric(g, rhs);
            for (k, &j) in idx.iter().enumerate() {
                out[j] = x[k];
            }
            (out, singular)
        })
        .collect();
    let mut a = Vec::with_capacity(sys.size());
    let mut singular_blocks = Vec::new();
    for (i, (x, singular)) in solved.into_iter().enumerate() {
        a.extend(x);
        if singular {
            singular_blocks.push(i);
        }
    }
    OlsSolution { a, singular_blocks }
}

/// Cholesky when the matrix is numerically full rank, otherwise the
/// minimum-norm solution from the SVD.
fn solve_symmetric(g: DMatrix<f64>, rhs: DVector<f64>) -> (DVector<f64>, bool) {
    let svd = g.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * g.nrows() as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if smax > 0.0 && rank == g.nrows() {
        if let Some(chol) = g.cholesky() {
            return (chol.solve(&rhs), false);
        }
    }
    let x = svd.solve(&rhs, cutoff).expect("svd computed with both factors");
    (x, true)
}
