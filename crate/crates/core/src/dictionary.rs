//! Histogram dictionary on `(0, A]`, coefficient layout, and conversions
//! between coefficient vectors and step-function models.
//!
//! The basis functions are `delta^{-1/2} 1_{(k delta, (k+1) delta]}` for
//! `k = 0..K` (0-based), orthonormal in `L^2([0, A])`. A coefficient vector
//! has one block per target mark `m`, laid out as
//! `[Spont(m), Inter(m, 0, 0..K), Inter(m, 1, 0..K), ...]`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::point_process::{HawkesModel, Kernel, MarkedPointSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramDictionary {
    marks: usize,
    bins: usize,
    support: f64,
}

/// Identity of one dictionary element. All indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColumnId {
    Spont { target: usize },
    Inter { target: usize, source: usize, bin: usize },
}

impl ColumnId {
    pub fn target(&self) -> usize {
        match *self {
            ColumnId::Spont { target } | ColumnId::Inter { target, .. } => target,
        }
    }
}

impl HistogramDictionary {
    pub fn new(marks: usize, bins: usize, support: f64) -> Result<Self> {
        if marks == 0 || bins == 0 {
            return Err(Error::Config("dictionary needs at least one mark and one bin".into()));
        }
        if !(support.is_finite() && support > 0.0) {
            return Err(Error::Config(format!("dictionary support must be > 0 (got {support})")));
        }
        Ok(Self { marks, bins, support })
    }

    pub fn marks(&self) -> usize {
        self.marks
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn delta(&self) -> f64 {
        self.support / self.bins as f64
    }

    /// `sup |Upsilon_k| = delta^{-1/2}`.
    pub fn basis_sup(&self) -> f64 {
        self.delta().sqrt().recip()
    }

    /// Columns per target mark: `1 + M K`.
    pub fn block_size(&self) -> usize {
        1 + self.marks * self.bins
    }

    /// Total number of columns `M (1 + M K)`.
    pub fn size(&self) -> usize {
        self.marks * self.block_size()
    }

    /// Position of the interaction `(source, bin)` inside a target block.
    pub fn inter_offset(&self, source: usize, bin: usize) -> usize {
        1 + source * self.bins + bin
    }

    pub fn index(&self, col: ColumnId) -> usize {
        match col {
            ColumnId::Spont { target } => target * self.block_size(),
            ColumnId::Inter { target, source, bin } => target * self.block_size() + self.inter_offset(source, bin),
        }
    }

    pub fn column(&self, index: usize) -> ColumnId {
        let target = index / self.block_size();
        match index % self.block_size() {
            0 => ColumnId::Spont { target },
            r => ColumnId::Inter {
                target,
                source: (r - 1) / self.bins,
                bin: (r - 1) % self.bins,
            },
        }
    }

    pub fn columns(&self) -> impl Iterator<Item = ColumnId> + '_ {
        (0..self.size()).map(|i| self.column(i))
    }

    /// `(k delta, (k + 1) delta]`.
    pub fn bin_edges(&self, bin: usize) -> (f64, f64) {
        let d = self.delta();
        (bin as f64 * d, (bin + 1) as f64 * d)
    }

    /// Bin holding a lag `t - u`, using the left-open, right-closed convention.
    pub fn bin_of_lag(&self, lag: f64) -> Option<usize> {
        if !(lag > 0.0 && lag <= self.support) {
            return None;
        }
        let k = (lag / self.delta()).ceil() as usize;
        Some(k.clamp(1, self.bins) - 1)
    }

    /// Per-bin counts `c_{source,k}(t)` of points of `source` with lag in bin `k`.
    pub fn lag_counts(&self, points: &MarkedPointSet, source: usize, t: f64, out: &mut [usize]) {
        out.iter_mut().for_each(|c| *c = 0);
        for &u in points.times_in(source, t - self.support, t) {
            if let Some(k) = self.bin_of_lag(t - u) {
                out[k] += 1;
            }
        }
    }

    /// `psi_t^{(m_eval)}(col)`.
    pub fn predictor_value(&self, points: &MarkedPointSet, col: ColumnId, t: f64, m_eval: usize) -> Result<f64> {
        let start = points.window().0;
        if t - self.support < start {
            return Err(Error::WindowUnderflow {
                t,
                needed: t - self.support,
                start,
            });
        }
        Ok(match col {
            ColumnId::Spont { target } => (target == m_eval) as u8 as f64,
            ColumnId::Inter { target, .. } if target != m_eval => 0.0,
            ColumnId::Inter { source, bin, .. } => {
                let mut counts = vec![0; self.bins];
                self.lag_counts(points, source, t, &mut counts);
                counts[bin] as f64 * self.basis_sup()
            }
        })
    }

    /// L2 projection of the true model onto the dictionary, in closed form.
    pub fn project_truth(&self, model: &HawkesModel) -> Result<CoefficientVector> {
        if model.marks() != self.marks {
            return Err(Error::Dimension(format!(
                "model has {} marks, dictionary {}",
                model.marks(),
                self.marks
            )));
        }
        if (model.support() - self.support).abs() > 1e-12 * self.support {
            return Err(Error::SupportMismatch {
                model: model.support(),
                dictionary: self.support,
            });
        }
        let scale = self.basis_sup();
        let mut a = CoefficientVector::zeros(*self);
        for target in 0..self.marks {
            a.values[self.index(ColumnId::Spont { target })] = model.nu()[target];
            for source in 0..self.marks {
                let h = model.kernel(source, target);
                for bin in 0..self.bins {
                    let (lo, hi) = self.bin_edges(bin);
                    a.values[self.index(ColumnId::Inter { target, source, bin })] = scale * h.integral_over(lo, hi);
                }
            }
        }
        Ok(a)
    }

    /// Step functions `f_a` represented by a coefficient vector.
    pub fn reconstruct(&self, a: &CoefficientVector) -> StepReconstruction {
        let scale = self.basis_sup();
        let m = self.marks;
        let nu = (0..m).map(|t| a.spont(t)).collect();
        let levels = (0..m * m)
            .map(|i| {
                let (target, source) = (i / m, i % m);
                a.function(target, source).iter().map(|c| c * scale).collect()
            })
            .collect();
        StepReconstruction {
            dict: *self,
            nu,
            levels,
        }
    }
}

/// Coefficients `a` of `f_a = sum_phi a_phi phi`, tied to their dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    dict: HistogramDictionary,
    values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(dict: HistogramDictionary, values: Vec<f64>) -> Result<Self> {
        if values.len() != dict.size() {
            return Err(Error::Dimension(format!(
                "coefficient vector has length {}, dictionary size is {}",
                values.len(),
                dict.size()
            )));
        }
        Ok(Self { dict, values })
    }

    pub fn zeros(dict: HistogramDictionary) -> Self {
        Self {
            dict,
            values: vec![0.0; dict.size()],
        }
    }

    pub fn dictionary(&self) -> &HistogramDictionary {
        &self.dict
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, col: ColumnId) -> f64 {
        self.values[self.dict.index(col)]
    }

    pub fn spont(&self, target: usize) -> f64 {
        self.get(ColumnId::Spont { target })
    }

    /// The `K` coefficients of the interaction function `source -> target`.
    pub fn function(&self, target: usize, source: usize) -> &[f64] {
        let start = self.dict.index(ColumnId::Inter { target, source, bin: 0 });
        &self.values[start..start + self.dict.bins()]
    }

    pub fn function_nonzero(&self, target: usize, source: usize) -> bool {
        self.function(target, source).iter().any(|&c| c != 0.0)
    }
}

/// Step-function estimate: spontaneous rates plus `K` levels per
/// `(target, source)` pair. Levels may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReconstruction {
    dict: HistogramDictionary,
    pub nu: Vec<f64>,
    /// Indexed by `target * M + source`.
    pub levels: Vec<Vec<f64>>,
}

impl StepReconstruction {
    pub fn levels(&self, target: usize, source: usize) -> &[f64] {
        &self.levels[target * self.dict.marks() + source]
    }

    /// The estimate as a Hawkes model; fails if any rate or level is negative.
    pub fn to_model(&self) -> Result<HawkesModel> {
        let m = self.dict.marks();
        let edges: Vec<f64> = (0..=self.dict.bins()).map(|k| k as f64 * self.dict.delta()).collect();
        HawkesModel::from_fn(self.nu.clone(), self.dict.support(), |source, target| {
            let lv = &self.levels[target * m + source];
            if lv.iter().all(|&l| l == 0.0) {
                Kernel::Zero
            } else {
                Kernel::Step {
                    breakpoints: edges.clone(),
                    levels: lv.clone(),
                }
            }
        })
    }

    /// CSV rows `target,source,left,right,level` (1-based marks); the
    /// spontaneous rate of `m` is the row `m,0,-,-,nu`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "target,source,left,right,level")?;
        let m = self.dict.marks();
        for target in 0..m {
            writeln!(out, "{},0,-,-,{}", target + 1, self.nu[target])?;
            for source in 0..m {
                for (bin, level) in self.levels(target, source).iter().enumerate() {
                    let (lo, hi) = self.dict.bin_edges(bin);
                    writeln!(out, "{},{},{},{},{}", target + 1, source + 1, lo, hi, level)?;
                }
            }
        }
        Ok(())
    }
}
