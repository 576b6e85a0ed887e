//! Support-recovery and error metrics for one fitted replicate, and their
//! aggregation over replicates.

use crate::design::DesignSystem;
use crate::dictionary::{CoefficientVector, HistogramDictionary};
use crate::error::{Error, Result};
use crate::point_process::{HawkesModel, Kernel};
use crate::weights::WeightVector;

/// Connected components of the undirected interaction graph: marks `l != m`
/// are linked when `h_l^m` or `h_m^l` has a nonzero coefficient. Components
/// are sorted by their smallest mark, members in increasing order.
pub fn dependency_groups(a: &CoefficientVector) -> Vec<Vec<usize>> {
    let m = a.dictionary().marks();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for target in 0..m {
        for source in 0..m {
            if source != target && a.function_nonzero(target, source) {
                let (ra, rb) = (find(&mut parent, target), find(&mut parent, source));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; m];
    for x in 0..m {
        let r = find(&mut parent, x);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(x);
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportCounts {
    /// Nonzero spontaneous rates.
    pub s: usize,
    pub f_plus: usize,
    pub f_minus: usize,
    pub coeff_plus: usize,
    pub coeff_minus: usize,
}

/// Compares supports with an exact zero test. Coefficient counts cover the
/// interaction coefficients only.
pub fn support_metrics(a: &CoefficientVector, truth: &CoefficientVector) -> Result<SupportCounts> {
    let dict = a.dictionary();
    if dict != truth.dictionary() {
        return Err(Error::Dimension("estimate and truth use different dictionaries".into()));
    }
    let m = dict.marks();
    let mut out = SupportCounts {
        s: (0..m).filter(|&t| a.spont(t) != 0.0).count(),
        f_plus: 0,
        f_minus: 0,
        coeff_plus: 0,
        coeff_minus: 0,
    };
    for target in 0..m {
        for source in 0..m {
            match (
                a.function_nonzero(target, source),
                truth.function_nonzero(target, source),
            ) {
                (true, false) => out.f_plus += 1,
                (false, true) => out.f_minus += 1,
                _ => {}
            }
            for (x, y) in a.function(target, source).iter().zip(truth.function(target, source)) {
                match (*x != 0.0, *y != 0.0) {
                    (true, false) => out.coeff_plus += 1,
                    (false, true) => out.coeff_minus += 1,
                    _ => {}
                }
            }
        }
    }
    Ok(out)
}

/// `sum_m (nu_hat_m - nu_m)^2`.
pub fn spont_mse(a: &CoefficientVector, model: &HawkesModel) -> f64 {
    model
        .nu()
        .iter()
        .enumerate()
        .map(|(m, nu)| (a.spont(m) - nu).powi(2))
        .sum()
}

/// `sum_{l,m} int (h_hat - h)^2`, exact for every kernel type: the step
/// estimate differs from the projection by `sum_k (a_k - p_k)^2`, and the
/// projection residual is `int_bin h^2 - p_k^2` per bin.
pub fn inter_mse(a: &CoefficientVector, model: &HawkesModel) -> f64 {
    let dict = a.dictionary();
    let m = dict.marks();
    let scale = dict.basis_sup();
    let mut total = 0.0;
    for target in 0..m {
        for source in 0..m {
            let h = model.kernel(source, target);
            for (k, &ak) in a.function(target, source).iter().enumerate() {
                let (lo, hi) = dict.bin_edges(k);
                let pk = scale * h.integral_over(lo, hi);
                let resid = (h.square_integral_over(lo, hi) - pk * pk).max(0.0);
                total += (ak - pk).powi(2) + resid;
            }
        }
    }
    total
}

/// Whether every kernel is a step function with breakpoints on bin edges, so
/// that its projection is exact and coefficient-level support is meaningful.
pub fn is_bin_aligned(model: &HawkesModel, dict: &HistogramDictionary) -> bool {
    let m = model.marks();
    let delta = dict.delta();
    (0..m * m).all(|i| match model.kernel(i / m, i % m) {
        Kernel::Zero => true,
        Kernel::Step { breakpoints, .. } => breakpoints.iter().all(|&b| {
            let r = b / delta;
            (r - r.round()).abs() <= 1e-9 * (1.0 + r.abs())
        }),
        _ => false,
    })
}

/// Diagnostic ratio between the estimation error and the oracle bound at the
/// projected truth `p`:
/// `(a - p)'G(a - p) / (R + c^{-1} sum_{phi in S(p)} d_phi^2)`,
/// `c` being the smallest eigenvalue of `G`. The truth residual
/// `||f* - f_p||_T^2` is replaced by its first-order part
/// `R = sum_{l,m} N^l[0,T] int (h_l^m - proj h_l^m)^2`, which vanishes for
/// bin-aligned truths.
pub fn oracle_ratio(
    a_hat: &CoefficientVector,
    truth: &CoefficientVector,
    model: &HawkesModel,
    sys: &DesignSystem,
    d: &WeightVector,
) -> Result<f64> {
    let c = sys.min_eigenvalue();
    if !(c > 0.0) {
        return Err(Error::DegenerateGram(c));
    }
    let diff: Vec<f64> = a_hat.values().iter().zip(truth.values()).map(|(x, y)| x - y).collect();
    let num = sys.quadratic_form(&diff);

    let dict = truth.dictionary();
    let m = dict.marks();
    let scale = dict.basis_sup();
    let mut resid = 0.0;
    for target in 0..m {
        for source in 0..m {
            let h = model.kernel(source, target);
            let r: f64 = (0..dict.bins())
                .map(|k| {
                    let (lo, hi) = dict.bin_edges(k);
                    let pk = scale * h.integral_over(lo, hi);
                    (h.square_integral_over(lo, hi) - pk * pk).max(0.0)
                })
                .sum();
            resid += sys.n_points().get(source).copied().unwrap_or(0) as f64 * r;
        }
    }
    let pen: f64 = truth
        .values()
        .iter()
        .enumerate()
        .filter(|(j, v)| **v != 0.0 && !d.is_excluded(*j))
        .map(|(j, _)| d.weight(j).powi(2))
        .sum();
    let den = resid + pen / c;
    Ok(if den > 0.0 { num / den } else { f64::INFINITY })
}

/// Metrics of one fitted replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub dg_correct: bool,
    pub s_nonzero_spont: usize,
    pub f_plus: usize,
    pub f_minus: usize,
    /// `None` when the truth is not bin aligned.
    pub coeff_plus: Option<usize>,
    pub coeff_minus: Option<usize>,
    pub spont_mse: f64,
    pub inter_mse: f64,
    /// `None` when `G` is singular.
    pub oracle_ratio: Option<f64>,
}

impl RunMetrics {
    pub fn compute(
        a_hat: &CoefficientVector,
        truth: &CoefficientVector,
        model: &HawkesModel,
        sys: &DesignSystem,
        d: &WeightVector,
    ) -> Result<Self> {
        let counts = support_metrics(a_hat, truth)?;
        let aligned = is_bin_aligned(model, truth.dictionary());
        Ok(Self {
            dg_correct: dependency_groups(a_hat) == dependency_groups(truth),
            s_nonzero_spont: counts.s,
            f_plus: counts.f_plus,
            f_minus: counts.f_minus,
            coeff_plus: aligned.then_some(counts.coeff_plus),
            coeff_minus: aligned.then_some(counts.coeff_minus),
            spont_mse: spont_mse(a_hat, model),
            inter_mse: inter_mse(a_hat, model),
            oracle_ratio: oracle_ratio(a_hat, truth, model, sys, d).ok(),
        })
    }
}

/// `sorted[(n - 1) / 2]`; `None` for an empty slice.
pub fn lower_median<T: Copy + PartialOrd>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in medians"));
    Some(v[(v.len() - 1) / 2])
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Aggregate of the runs of one (method, gamma, T) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSummary {
    pub n_runs: usize,
    pub dg_count: usize,
    pub s_median: Option<usize>,
    /// Every run estimated every spontaneous rate as nonzero.
    pub s_all_nonzero: bool,
    pub f_plus_median: Option<usize>,
    pub f_minus_median: Option<usize>,
    pub coeff_plus_median: Option<usize>,
    pub coeff_minus_median: Option<usize>,
    pub spont_mse_mean: Option<f64>,
    pub spont_mse_median: Option<f64>,
    pub inter_mse_mean: Option<f64>,
    pub inter_mse_median: Option<f64>,
    pub oracle_ratio_median: Option<f64>,
}

impl TableSummary {
    pub fn from_runs(runs: &[RunMetrics], marks: usize) -> Self {
        let col = |f: fn(&RunMetrics) -> usize| lower_median(&runs.iter().map(f).collect::<Vec<_>>());
        let opt = |f: fn(&RunMetrics) -> Option<usize>| {
            let v: Option<Vec<usize>> = runs.iter().map(f).collect();
            v.and_then(|v| lower_median(&v))
        };
        let spont: Vec<f64> = runs.iter().map(|r| r.spont_mse).collect();
        let inter: Vec<f64> = runs.iter().map(|r| r.inter_mse).collect();
        let ratios: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.oracle_ratio)
            .filter(|r| r.is_finite())
            .collect();
        Self {
            n_runs: runs.len(),
            dg_count: runs.iter().filter(|r| r.dg_correct).count(),
            s_median: col(|r| r.s_nonzero_spont),
            s_all_nonzero: !runs.is_empty() && runs.iter().all(|r| r.s_nonzero_spont == marks),
            f_plus_median: col(|r| r.f_plus),
            f_minus_median: col(|r| r.f_minus),
            coeff_plus_median: opt(|r| r.coeff_plus),
            coeff_minus_median: opt(|r| r.coeff_minus),
            spont_mse_mean: mean(spont.iter().copied()),
            spont_mse_median: lower_median(&spont),
            inter_mse_mean: mean(inter.iter().copied()),
            inter_mse_median: lower_median(&inter),
            oracle_ratio_median: lower_median(&ratios),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::presets;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exp1_truth() -> (HawkesModel, CoefficientVector) {
        let model = presets::experiment1();
        let dict = HistogramDictionary::new(2, 4, 0.04).unwrap();
        let truth = dict.project_truth(&model).unwrap();
        (model, truth)
    }

    #[test]
    fn groups_of_presets() {
        let (_, truth) = exp1_truth();
        assert_eq!(dependency_groups(&truth), vec![vec![0, 1]]);
        let dict = HistogramDictionary::new(8, 4, 0.04).unwrap();
        let truth3 = dict.project_truth(&presets::experiment3()).unwrap();
        assert_eq!(
            dependency_groups(&truth3),
            vec![vec![0, 1, 2], vec![3], vec![4, 5, 6, 7]]
        );
        let zero = CoefficientVector::zeros(dict);
        assert_eq!(dependency_groups(&zero), (0..8).map(|m| vec![m]).collect::<Vec<_>>());
    }

    #[test]
    fn support_counts_against_truth() {
        let (_, truth) = exp1_truth();
        let same = support_metrics(&truth, &truth).unwrap();
        assert_eq!(
            same,
            SupportCounts {
                s: 2,
                f_plus: 0,
                f_minus: 0,
                coeff_plus: 0,
                coeff_minus: 0
            }
        );
        let zero = CoefficientVector::zeros(*truth.dictionary());
        let c = support_metrics(&zero, &truth).unwrap();
        assert_eq!((c.s, c.f_plus, c.f_minus, c.coeff_plus, c.coeff_minus), (0, 0, 3, 0, 4));
    }

    #[test]
    fn mse_values() {
        let (model, truth) = exp1_truth();
        assert_eq!(spont_mse(&truth, &model), 0.0);
        assert_relative_eq!(inter_mse(&truth, &model), 0.0, epsilon = 1e-12);
        let mut v = truth.values().to_vec();
        v[0] = 21.0;
        v[truth.dictionary().block_size()] = 19.0;
        let shifted = CoefficientVector::new(*truth.dictionary(), v).unwrap();
        assert_relative_eq!(spont_mse(&shifted, &model), 2.0, epsilon = 1e-12);
        let zero = CoefficientVector::zeros(*truth.dictionary());
        // 900 (0.02 + 0.01 + 0.01)
        assert_relative_eq!(inter_mse(&zero, &model), 36.0, epsilon = 1e-10);
    }

    #[test]
    fn gaussian_projection_residual_matches_quadrature() {
        let model = presets::experiment2();
        let dict = HistogramDictionary::new(2, 8, 0.04).unwrap();
        let proj = dict.project_truth(&model).unwrap();
        let got = inter_mse(&proj, &model);
        // midpoint rule at step 1e-6 over the three nonzero kernels
        let n = 40_000;
        let step = 0.04 / n as f64;
        let rec = dict.reconstruct(&proj);
        let mut want = 0.0;
        for target in 0..2 {
            for source in 0..2 {
                let h = model.kernel(source, target);
                let lv = rec.levels(target, source);
                for i in 0..n {
                    let x = (i as f64 + 0.5) * step;
                    let k = dict.bin_of_lag(x).unwrap();
                    want += (h.eval(x) - lv[k]).powi(2) * step;
                }
            }
        }
        assert!(got > 0.0);
        assert_relative_eq!(got, want, max_relative = 1e-6);
    }

    #[test]
    fn alignment() {
        let dict4 = HistogramDictionary::new(2, 4, 0.04).unwrap();
        assert!(is_bin_aligned(&presets::experiment1(), &dict4));
        assert!(!is_bin_aligned(&presets::experiment2(), &dict4));
        let dict3 = HistogramDictionary::new(2, 3, 0.04).unwrap();
        assert!(!is_bin_aligned(&presets::experiment1(), &dict3));
    }

    #[test]
    fn medians_use_lower_convention() {
        assert_eq!(lower_median(&[4, 1, 3, 2]), Some(2));
        assert_eq!(lower_median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(lower_median::<usize>(&[]), None);
    }

    #[test]
    fn summary_counts() {
        let run = |dg, s, fp| RunMetrics {
            dg_correct: dg,
            s_nonzero_spont: s,
            f_plus: fp,
            f_minus: 0,
            coeff_plus: None,
            coeff_minus: None,
            spont_mse: fp as f64,
            inter_mse: 1.0,
            oracle_ratio: None,
        };
        let runs = vec![run(true, 2, 0), run(false, 2, 3), run(true, 1, 1)];
        let s = TableSummary::from_runs(&runs, 2);
        assert_eq!(s.dg_count, 2);
        assert!(!s.s_all_nonzero);
        assert_eq!(s.f_plus_median, Some(1));
        assert_eq!(s.coeff_plus_median, None);
        assert_relative_eq!(s.spont_mse_mean.unwrap(), 4.0 / 3.0);
    }

    proptest! {
        #[test]
        fn support_against_itself_is_clean(values in proptest::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 18)) {
            let dict = HistogramDictionary::new(2, 4, 0.04).unwrap();
            let a = CoefficientVector::new(dict, values).unwrap();
            let c = support_metrics(&a, &a).unwrap();
            prop_assert_eq!((c.f_plus, c.f_minus, c.coeff_plus, c.coeff_minus), (0, 0, 0, 0));
        }

        #[test]
        fn groups_ignore_scale(values in proptest::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 18), c in 0.1f64..10.0) {
            let dict = HistogramDictionary::new(2, 4, 0.04).unwrap();
            let a = CoefficientVector::new(dict, values.clone()).unwrap();
            let b = CoefficientVector::new(dict, values.iter().map(|v| v * c).collect()).unwrap();
            prop_assert_eq!(dependency_groups(&a), dependency_groups(&b));
        }

        #[test]
        fn inter_mse_nonnegative(values in proptest::collection::vec(-10.0f64..10.0, 18)) {
            let dict = HistogramDictionary::new(2, 4, 0.04).unwrap();
            let a = CoefficientVector::new(dict, values).unwrap();
            prop_assert!(inter_mse(&a, &presets::experiment2()) >= 0.0);
        }

        #[test]
        fn summary_is_order_invariant(fp in proptest::collection::vec(0usize..5, 1..20)) {
            let runs: Vec<RunMetrics> = fp.iter().map(|&f| RunMetrics {
                dg_correct: f % 2 == 0, s_nonzero_spont: 2, f_plus: f, f_minus: f / 2,
                coeff_plus: Some(f), coeff_minus: Some(0), spont_mse: f as f64, inter_mse: 0.5, oracle_ratio: Some(1.0),
            }).collect();
            let mut rev = runs.clone();
            rev.reverse();
            let (a, b) = (TableSummary::from_runs(&runs, 2), TableSummary::from_runs(&rev, 2));
            prop_assert_eq!(a.dg_count, b.dg_count);
            prop_assert_eq!(a.f_plus_median, b.f_plus_median);
            prop_assert_eq!(a.f_minus_median, b.f_minus_median);
            prop_assert_eq!(a.coeff_plus_median, b.coeff_plus_median);
            prop_assert_eq!(a.spont_mse_median, b.spont_mse_median);
        }
    }
}
