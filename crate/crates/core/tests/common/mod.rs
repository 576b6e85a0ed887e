//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use hawkes_lasso::design::DesignSystem;
use hawkes_lasso::point_process::MarkedPointSet;
use nalgebra::DMatrix;

/// Time step of the grid oracle.
pub const GRID_STEP: f64 = 1e-6;

/// Lattice for snapped event times. With `delta = 0.01`, every breakpoint
/// `u + k delta` is a multiple of `GRID_STEP`, so the midpoint rule is exact,
/// and no lag between two events equals a bin edge `k delta`, `k <= 4`.
pub const SNAP_STEP: f64 = 7e-6;

/// Rounds every time to the `SNAP_STEP` lattice and drops duplicates.
pub fn snap(points: &MarkedPointSet) -> MarkedPointSet {
    let times = points
        .all_times()
        .iter()
        .map(|ts| {
            let mut v: Vec<f64> = ts.iter().map(|&t| (t / SNAP_STEP).round() * SNAP_STEP).collect();
            v.dedup();
            v
        })
        .collect();
    MarkedPointSet::new(times, points.window()).expect("snapped points stay sorted and inside the window")
}

/// Design objects from direct counting: the Gram block by the midpoint rule
/// on a `GRID_STEP` grid, and `b`, `vhat` by explicit lag comparisons.
pub struct OracleDesign {
    pub gram: DMatrix<f64>,
    pub b: Vec<Vec<f64>>,
    pub vhat: Vec<Vec<f64>>,
}

fn bin_by_comparison(lag: f64, delta: f64, bins: usize) -> Option<usize> {
    (0..bins).find(|&k| lag > k as f64 * delta && lag <= (k + 1) as f64 * delta)
}

pub fn grid_oracle(points: &MarkedPointSet, bins: usize, support: f64, horizon: f64) -> OracleDesign {
    let marks = points.marks();
    let delta = support / bins as f64;
    let width = marks * bins;
    let n = 1 + width;
    let cells = (horizon / GRID_STEP).round() as usize;

    let mut prod = DMatrix::<f64>::zeros(width, width);
    let mut lin = vec![0.0; width];
    let mut counts = vec![0.0f64; width];
    let mut lo = vec![0usize; marks];
    let mut hi = vec![0usize; marks];
    for i in 0..cells {
        let t = (i as f64 + 0.5) * GRID_STEP;
        counts.iter_mut().for_each(|c| *c = 0.0);
        let mut any = false;
        for l in 0..marks {
            let ts = points.times(l);
            while lo[l] < ts.len() && ts[lo[l]] < t - support {
                lo[l] += 1;
            }
            while hi[l] < ts.len() && ts[hi[l]] < t {
                hi[l] += 1;
            }
            for &u in &ts[lo[l]..hi[l]] {
                if let Some(k) = bin_by_comparison(t - u, delta, bins) {
                    counts[l * bins + k] += 1.0;
                    any = true;
                }
            }
        }
        if !any {
            continue;
        }
        for a in 0..width {
            if counts[a] == 0.0 {
                continue;
            }
            lin[a] += counts[a];
            for b in 0..width {
                prod[(a, b)] += counts[a] * counts[b];
            }
        }
    }
    let mut gram = DMatrix::<f64>::zeros(n, n);
    gram[(0, 0)] = cells as f64 * GRID_STEP;
    for a in 0..width {
        gram[(0, 1 + a)] = lin[a] * GRID_STEP / delta.sqrt();
        gram[(1 + a, 0)] = gram[(0, 1 + a)];
        for b in 0..width {
            gram[(1 + a, 1 + b)] = prod[(a, b)] * GRID_STEP / delta;
        }
    }

    let mut bvec = Vec::new();
    let mut vvec = Vec::new();
    for m in 0..marks {
        let mut b = vec![0.0; n];
        let mut v = vec![0.0; n];
        for &t in points.times(m).iter().filter(|&&t| (0.0..=horizon).contains(&t)) {
            b[0] += 1.0;
            v[0] += 1.0;
            let mut c = vec![0.0f64; width];
            for l in 0..marks {
                for &u in points.times(l) {
                    if let Some(k) = bin_by_comparison(t - u, delta, bins) {
                        c[l * bins + k] += 1.0;
                    }
                }
            }
            for a in 0..width {
                b[1 + a] += c[a] / delta.sqrt();
                v[1 + a] += c[a] * c[a] / delta;
            }
        }
        bvec.push(b);
        vvec.push(v);
    }
    OracleDesign {
        gram,
        b: bvec,
        vhat: vvec,
    }
}

/// Largest `|x - y| / max(1, |y|)` between the sweep design and the oracle.
pub fn max_relative_gap(sys: &DesignSystem, oracle: &OracleDesign) -> f64 {
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
    let mut worst = 0.0f64;
    for (m, blk) in sys.blocks().iter().enumerate() {
        let g = &blk.gram;
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                worst = worst.max(rel(g[(r, c)], oracle.gram[(r, c)]));
            }
            worst = worst.max(rel(blk.b[r], oracle.b[m][r]));
            worst = worst.max(rel(blk.vhat[r], oracle.vhat[m][r]));
        }
    }
    worst
}

/// Accelerated projected gradient on the split form `a = p - q`,
/// `p, q >= 0`, of `-2 a'b + a'G a + 2 d'|a|`, with restarts.
pub fn split_oracle(g: &DMatrix<f64>, b: &[f64], d: &[f64], iters: usize) -> Vec<f64> {
    use nalgebra::DVector;
    let n = b.len();
    let lmax = g.clone().symmetric_eigen().eigenvalues.max();
    let step = 1.0 / (4.0 * lmax);
    let bv = DVector::from_column_slice(b);
    let dv = DVector::from_column_slice(d);
    let f = |p: &DVector<f64>, q: &DVector<f64>| {
        let a = p - q;
        -2.0 * a.dot(&bv) + a.dot(&(g * &a)) + 2.0 * dv.dot(&(p + q))
    };
    let (mut p, mut q) = (DVector::zeros(n), DVector::zeros(n));
    let (mut yp, mut yq) = (p.clone(), q.clone());
    let mut t = 1.0f64;
    for _ in 0..iters {
        let grad = 2.0 * (g * (&yp - &yq) - &bv);
        let np = (&yp - step * (&grad + 2.0 * &dv)).map(|v| v.max(0.0));
        let nq = (&yq - step * (-&grad + 2.0 * &dv)).map(|v| v.max(0.0));
        if f(&np, &nq) > f(&p, &q) {
            t = 1.0;
            yp = p.clone();
            yq = q.clone();
            continue;
        }
        let nt = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        yp = &np + (&np - &p) * ((t - 1.0) / nt);
        yq = &nq + (&nq - &q) * ((t - 1.0) / nt);
        p = np;
        q = nq;
        t = nt;
    }
    (p - q).iter().copied().collect()
}
