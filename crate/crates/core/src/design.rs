//! Exact design objects of the least-squares contrast: the Gram matrix `G`,
//! the vector `b`, and the per-column statistics `vhat = psi^2 . N_T` and
//! `bhat = sup |psi|`.
//!
//! Interaction predictors are piecewise constant in `t`, so every integral is
//! a finite sum over the segments between the breakpoints `u + j delta`. The
//! predictors do not depend on the target mark, so the Gram block is computed
//! once and shared by all `M` target blocks.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dictionary::HistogramDictionary;
use crate::error::{Error, Result};
use crate::point_process::MarkedPointSet;

/// How a column's predictor behaves; drives the a priori bound `B_phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColumnKind {
    /// `psi = 1` (spontaneous rate).
    Constant,
    /// `psi = sup * (number of past points in a lag bin)`.
    Counting { sup: f64 },
    /// `psi_t = phi(t)`, a fixed function with `sup |phi| = sup`.
    Deterministic { sup: f64 },
}

/// One independent block of the Lasso problem (one target mark).
#[derive(Debug, Clone)]
pub struct DesignBlock {
    pub gram: Arc<DMatrix<f64>>,
    pub b: Vec<f64>,
    pub vhat: Vec<f64>,
    pub bhat: Vec<f64>,
}

impl DesignBlock {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DesignSystem {
    blocks: Vec<DesignBlock>,
    kinds: Arc<Vec<ColumnKind>>,
    horizon: f64,
    n_points: Vec<usize>,
}

impl DesignSystem {
    /// Assembles a system from explicit blocks sharing one column layout.
    pub fn from_blocks(
        blocks: Vec<DesignBlock>,
        kinds: Vec<ColumnKind>,
        horizon: f64,
        n_points: Vec<usize>,
    ) -> Result<Self> {
        for (i, blk) in blocks.iter().enumerate() {
            let n = kinds.len();
            if blk.gram.nrows() != n
                || blk.gram.ncols() != n
                || blk.b.len() != n
                || blk.vhat.len() != n
                || blk.bhat.len() != n
            {
                return Err(Error::Dimension(format!(
                    "block {i} does not match the {n}-column layout"
                )));
            }
        }
        Ok(Self {
            blocks,
            kinds: Arc::new(kinds),
            horizon,
            n_points,
        })
    }

    pub fn blocks(&self) -> &[DesignBlock] {
        &self.blocks
    }

    pub fn block_size(&self) -> usize {
        self.kinds.len()
    }

    pub fn size(&self) -> usize {
        self.blocks.len() * self.block_size()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Per-mark event counts on `[0, T]`.
    pub fn n_points(&self) -> &[usize] {
        &self.n_points
    }

    pub fn kind(&self, index: usize) -> ColumnKind {
        self.kinds[index % self.block_size()]
    }

    fn flat(&self, f: impl Fn(&DesignBlock) -> &[f64]) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| f(b).iter().copied()).collect()
    }

    pub fn b(&self) -> Vec<f64> {
        self.flat(|b| &b.b)
    }

    pub fn vhat(&self) -> Vec<f64> {
        self.flat(|b| &b.vhat)
    }

    pub fn bhat(&self) -> Vec<f64> {
        self.flat(|b| &b.bhat)
    }

    /// Full block-diagonal `P x P` Gram matrix.
    pub fn gram_dense(&self) -> DMatrix<f64> {
        let n = self.block_size();
        let mut g = DMatrix::zeros(self.size(), self.size());
        for (i, blk) in self.blocks.iter().enumerate() {
            g.view_mut((i * n, i * n), (n, n)).copy_from(&*blk.gram);
        }
        g
    }

    /// `a' G a`.
    pub fn quadratic_form(&self, a: &[f64]) -> f64 {
        let n = self.block_size();
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, blk)| {
                let x = &a[i * n..(i + 1) * n];
                let mut s = 0.0;
                for r in 0..n {
                    if x[r] == 0.0 {
                        continue;
                    }
                    for c in 0..n {
                        s += x[r] * blk.gram[(r, c)] * x[c];
                    }
                }
                s
            })
            .sum()
    }

    /// Smallest eigenvalue of `G`, the min over blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        let mut seen: Vec<&Arc<DMatrix<f64>>> = Vec::new();
        let mut min = f64::INFINITY;
        for blk in &self.blocks {
            if seen.iter().any(|g| Arc::ptr_eq(g, &blk.gram)) {
                continue;
            }
            seen.push(&blk.gram);
            let eig = SymmetricEigen::new((*blk.gram).clone());
            min = min.min(eig.eigenvalues.min());
        }
        min
    }

    /// Dense `G` as CSV, one matrix row per line.
    pub fn write_gram_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let g = self.gram_dense();
        for r in 0..g.nrows() {
            let row: Vec<String> = (0..g.ncols()).map(|c| g[(r, c)].to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// `index,b,vhat,bhat` per column.
    pub fn write_vectors_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,b,vhat,bhat")?;
        let (b, v, s) = (self.b(), self.vhat(), self.bhat());
        for i in 0..b.len() {
            writeln!(out, "{},{},{},{}", i, b[i], v[i], s[i])?;
        }
        Ok(())
    }
}

/// Builds `G`, `b`, `vhat`, `bhat` for Hawkes data observed on `[0, horizon]`.
///
/// Points in `[-A, 0)` serve as history only. Requires the window to cover
/// `[-A, horizon]`.
pub fn build_design(points: &MarkedPointSet, dict: &HistogramDictionary, horizon: f64) -> Result<DesignSystem> {
    let marks = dict.marks();
    let bins = dict.bins();
    let support = dict.support();
    if points.marks() != marks {
        return Err(Error::Dimension(format!(
            "point set has {} marks, dictionary {marks}",
            points.marks()
        )));
    }
    let (start, end) = points.window();
    if start > -support {
        return Err(Error::InsufficientHistory {
            needed: -support,
            start,
        });
    }
    if !(horizon > 0.0 && end >= horizon) {
        return Err(Error::InvalidPoints(format!(
            "window ends at {end}, before the horizon {horizon}"
        )));
    }

    let delta = dict.delta();
    let scale = dict.basis_sup();
    let width = marks * bins;

    // Breakpoint events: at u + j delta, bin j-1 of `source` closes and bin j opens.
    let mut events: Vec<(f64, usize, usize)> = Vec::new();
    for source in 0..marks {
        for &u in points.times_in(source, -support, horizon) {
            for j in 0..=bins {
                let s = u + j as f64 * delta;
                if s < horizon {
                    events.push((s, source, j));
                }
            }
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut counts = vec![0i64; width];
    let mut prod = DMatrix::<f64>::zeros(width, width);
    let mut lin = vec![0.0; width];
    let mut max_count = vec![0i64; width];
    let mut active: Vec<usize> = Vec::with_capacity(width);

    let apply = |counts: &mut [i64], source: usize, j: usize| {
        if j > 0 {
            counts[source * bins + j - 1] -= 1;
        }
        if j < bins {
            counts[source * bins + j] += 1;
        }
    };
    let track_max = |counts: &[i64], max_count: &mut [i64]| {
        for (m, &c) in max_count.iter_mut().zip(counts) {
            *m = (*m).max(c);
        }
    };

    let mut idx = 0;
    while idx < events.len() && events[idx].0 < 0.0 {
        let (_, source, j) = events[idx];
        apply(&mut counts, source, j);
        idx += 1;
    }
    // value at t = 0
    track_max(&counts, &mut max_count);

    let mut cursor = 0.0;
    let mut accumulate = |counts: &[i64], len: f64, prod: &mut DMatrix<f64>, lin: &mut [f64]| {
        if len <= 0.0 {
            return;
        }
        active.clear();
        active.extend((0..width).filter(|&i| counts[i] != 0));
        for &i in &active {
            let ci = counts[i] as f64 * len;
            lin[i] += ci;
            for &j in &active {
                prod[(i, j)] += ci * counts[j] as f64;
            }
        }
    };
    while idx < events.len() {
        let s = events[idx].0;
        accumulate(&counts, s - cursor, &mut prod, &mut lin);
        while idx < events.len() && events[idx].0 == s {
            let (_, source, j) = events[idx];
            apply(&mut counts, source, j);
            idx += 1;
        }
        debug_assert!(counts.iter().all(|&c| c >= 0));
        cursor = s;
        track_max(&counts, &mut max_count);
    }
    accumulate(&counts, horizon - cursor, &mut prod, &mut lin);

    let n = 1 + width;
    let mut gram = DMatrix::<f64>::zeros(n, n);
    gram[(0, 0)] = horizon;
    for i in 0..width {
        gram[(0, 1 + i)] = scale * lin[i];
        gram[(1 + i, 0)] = scale * lin[i];
        for j in 0..width {
            gram[(1 + i, 1 + j)] = prod[(i, j)] / delta;
        }
    }
    let gram = Arc::new(gram);

    let mut bhat = vec![1.0];
    bhat.extend(max_count.iter().map(|&c| scale * c as f64));

    let mut lag = vec![0usize; bins];
    let mut n_points = Vec::with_capacity(marks);
    let mut blocks = Vec::with_capacity(marks);
    for target in 0..marks {
        let mut b = vec![0.0; n];
        let mut vhat = vec![0.0; n];
        let events = points.count_closed(target, 0.0, horizon);
        n_points.push(events);
        b[0] = events as f64;
        vhat[0] = events as f64;
        let ts = points.times(target);
        let first = ts.partition_point(|&t| t < 0.0);
        for &t in &ts[first..first + events] {
            for source in 0..marks {
                dict.lag_counts(points, source, t, &mut lag);
                for (k, &c) in lag.iter().enumerate() {
                    if c > 0 {
                        let c = c as f64;
                        b[1 + source * bins + k] += scale * c;
                        vhat[1 + source * bins + k] += c * c / delta;
                    }
                }
            }
        }
        blocks.push(DesignBlock {
            gram: Arc::clone(&gram),
            b,
            vhat,
            bhat: bhat.clone(),
        });
    }

    let mut kinds = vec![ColumnKind::Constant];
    kinds.extend(std::iter::repeat_n(ColumnKind::Counting { sup: scale }, width));
    DesignSystem::from_blocks(blocks, kinds, horizon, n_points)
}

/// Design for `M` i.i.d. Poisson samples on `[0, 1]` with a `bins`-bin
/// orthonormal histogram on `[0, 1]`: `psi_t(phi) = phi(t)`, so `G = M I`.
pub fn build_design_poisson(samples: &MarkedPointSet, bins: usize) -> Result<DesignSystem> {
    let marks = samples.marks();
    let dict = HistogramDictionary::new(1, bins, 1.0)?;
    let delta = dict.delta();
    let scale = dict.basis_sup();
    let gram = DMatrix::from_fn(bins, bins, |i, j| {
        let (a0, a1) = dict.bin_edges(i);
        let (b0, b1) = dict.bin_edges(j);
        let overlap = (a1.min(b1) - a0.max(b0)).max(0.0);
        marks as f64 * overlap / delta
    });
    let mut counts = vec![0usize; bins];
    let mut n_points = Vec::with_capacity(marks);
    for m in 0..marks {
        let ts = samples.times_in(m, 0.0, f64::INFINITY);
        n_points.push(ts.len());
        for &t in ts {
            if let Some(k) = dict.bin_of_lag(t) {
                counts[k] += 1;
            }
        }
    }
    let b = counts.iter().map(|&c| scale * c as f64).collect();
    let vhat = counts.iter().map(|&c| c as f64 / delta).collect();
    let block = DesignBlock {
        gram: Arc::new(gram),
        b,
        vhat,
        bhat: vec![scale; bins],
    };
    DesignSystem::from_blocks(
        vec![block],
        vec![ColumnKind::Deterministic { sup: scale }; bins],
        1.0,
        n_points,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::ColumnId;
    use approx::assert_relative_eq;

    fn dict(m: usize) -> HistogramDictionary {
        HistogramDictionary::new(m, 4, 0.04).unwrap()
    }

    #[test]
    fn empty_data_has_only_spontaneous_diagonal() {
        let d = dict(2);
        let p = MarkedPointSet::empty(2, (-1.0, 1.0)).unwrap();
        let sys = build_design(&p, &d, 1.0).unwrap();
        let g = sys.gram_dense();
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                let spont = r == c && r % d.block_size() == 0;
                assert_eq!(g[(r, c)], if spont { 1.0 } else { 0.0 });
            }
        }
        assert!(sys.b().iter().all(|&v| v == 0.0));
        assert_eq!(sys.min_eigenvalue(), 0.0);
    }

    #[test]
    fn single_point_gram_entry() {
        let d = dict(1);
        let p = MarkedPointSet::new(vec![vec![0.005]], (-1.0, 1.0)).unwrap();
        let sys = build_design(&p, &d, 1.0).unwrap();
        let g = sys.gram_dense();
        let i = d.index(ColumnId::Inter {
            target: 0,
            source: 0,
            bin: 0,
        });
        assert_relative_eq!(g[(i, i)], 1.0, epsilon = 1e-12);
        // spont-inter: delta^{-1/2} * delta
        assert_relative_eq!(g[(0, i)], 0.1, epsilon = 1e-12);
        assert_eq!(sys.b()[0], 1.0);
        assert_eq!(sys.b()[i], 0.0);
        assert_relative_eq!(sys.bhat()[i], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn history_before_zero_counts() {
        let d = dict(1);
        // u = -0.005 is active in bin 0 on (-0.005, 0.005]
        let p = MarkedPointSet::new(vec![vec![-0.005, 0.003]], (-1.0, 1.0)).unwrap();
        let sys = build_design(&p, &d, 1.0).unwrap();
        let b0 = d.index(ColumnId::Inter {
            target: 0,
            source: 0,
            bin: 0,
        });
        // event at 0.003 sees lag 0.008 in bin 0
        assert_relative_eq!(sys.b()[b0], 10.0, epsilon = 1e-12);
        assert_relative_eq!(sys.vhat()[b0], 100.0, epsilon = 1e-10);
        // both points share (0.003, 0.005]
        assert_relative_eq!(sys.bhat()[b0], 20.0, epsilon = 1e-12);
        let g = sys.gram_dense();
        // int (c1 + c2)^2 = 0.005 + 0.01 + 2 * 0.002 (overlap on (0.003, 0.005])
        let expected = (0.005 + 0.01 + 2.0 * 0.002) / 0.01;
        assert_relative_eq!(g[(b0, b0)], expected, max_relative = 1e-10);
    }

    #[test]
    fn rejects_short_history() {
        let d = dict(1);
        let p = MarkedPointSet::empty(1, (0.0, 1.0)).unwrap();
        assert!(matches!(
            build_design(&p, &d, 1.0),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn blocks_share_gram() {
        let d = dict(3);
        let p = MarkedPointSet::new(vec![vec![0.1], vec![0.2], vec![0.3]], (-1.0, 1.0)).unwrap();
        let sys = build_design(&p, &d, 1.0).unwrap();
        assert!(Arc::ptr_eq(&sys.blocks()[0].gram, &sys.blocks()[2].gram));
        let g = sys.gram_dense();
        let n = d.block_size();
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                if r / n != c / n {
                    assert_eq!(g[(r, c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn poisson_design_is_scaled_identity() {
        let p = MarkedPointSet::new(vec![vec![0.3]], (0.0, 1.0)).unwrap();
        let sys = build_design_poisson(&p, 4).unwrap();
        let g = sys.gram_dense();
        assert_eq!(g, DMatrix::identity(4, 4));
        assert_eq!(sys.b(), vec![0.0, 2.0, 0.0, 0.0]);

        let five = MarkedPointSet::empty(5, (0.0, 1.0)).unwrap();
        let sys = build_design_poisson(&five, 8).unwrap();
        assert!((sys.gram_dense() - DMatrix::identity(8, 8) * 5.0).amax() <= 1e-12);
        assert!(sys.b().iter().all(|&v| v == 0.0));
        assert_relative_eq!(sys.min_eigenvalue(), 5.0, epsilon = 1e-12);
    }
}
