//! The three simulation models used for the support-recovery experiments.
//!
//! Every preset has `nu = 20` for all marks and kernels supported in `(0, 0.04]`.

use std::f64::consts::PI;

use super::kernel::Kernel;
use super::model::HawkesModel;

pub const SUPPORT: f64 = 0.04;
pub const SPONTANEOUS_RATE: f64 = 20.0;

/// Two marks, piecewise constant kernels.
pub fn experiment1() -> HawkesModel {
    HawkesModel::from_fn(vec![SPONTANEOUS_RATE; 2], SUPPORT, |source, target| {
        match (source, target) {
            (0, 0) => Kernel::indicator(30.0, 0.0, 0.02),
            (1, 0) => Kernel::indicator(30.0, 0.0, 0.01),
            (0, 1) => Kernel::indicator(30.0, 0.01, 0.02),
            _ => Kernel::Zero,
        }
    })
    .expect("valid preset")
}

/// Two marks with a truncated exponential and a truncated gaussian kernel.
///
/// Kernels are taken verbatim; the resulting spectral radius is about 0.852.
pub fn experiment2() -> HawkesModel {
    HawkesModel::from_fn(vec![SPONTANEOUS_RATE; 2], SUPPORT, |source, target| {
        match (source, target) {
            (0, 0) => Kernel::TruncExp {
                amplitude: 100.0,
                rate: 200.0,
                support: SUPPORT,
            },
            (1, 0) => Kernel::indicator(30.0, 0.0, 0.02),
            (0, 1) => Kernel::TruncGauss {
                scale: 1.0 / (0.008 * (2.0 * PI).sqrt()),
                center: 0.02,
                sd: 0.004,
                support: SUPPORT,
            },
            _ => Kernel::Zero,
        }
    })
    .expect("valid preset")
}

/// Eight marks in three dependency groups `{1,2,3}`, `{4}`, `{5,6,7,8}`.
pub fn experiment3() -> HawkesModel {
    // (source, target), 1-based
    const EDGES: [(usize, usize); 9] = [(2, 1), (3, 1), (2, 2), (1, 3), (2, 3), (8, 5), (5, 6), (6, 7), (7, 8)];
    HawkesModel::from_fn(vec![SPONTANEOUS_RATE; 8], SUPPORT, |source, target| {
        if EDGES.contains(&(source + 1, target + 1)) {
            Kernel::indicator(25.0, 0.0, 0.02)
        } else {
            Kernel::Zero
        }
    })
    .expect("valid preset")
}
