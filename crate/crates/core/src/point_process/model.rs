//! Linear multivariate Hawkes model and its branching structure.

use nalgebra::{DMatrix, DVector};

use super::kernel::Kernel;
use super::points::MarkedPointSet;
use crate::error::{Error, Result};

/// Spontaneous rates plus an `M x M` grid of interaction kernels.
///
/// `kernel(source, target)` is the influence of past events of `source` on the
/// intensity of `target`. All kernels live on `(0, support]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesModel {
    nu: Vec<f64>,
    kernels: Vec<Kernel>,
    support: f64,
}

impl HawkesModel {
    /// `kernels` is row-major by source: entry `source * M + target`.
    pub fn new(nu: Vec<f64>, kernels: Vec<Kernel>, support: f64) -> Result<Self> {
        let m = nu.len();
        if m == 0 {
            return Err(Error::InvalidModel("need at least one mark".into()));
        }
        if kernels.len() != m * m {
            return Err(Error::InvalidModel(format!(
                "expected {} kernels for {m} marks, got {}",
                m * m,
                kernels.len()
            )));
        }
        if !(support.is_finite() && support > 0.0) {
            return Err(Error::InvalidModel(format!("support must be > 0 (got {support})")));
        }
        if nu.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidModel("spontaneous rates must be finite and >= 0".into()));
        }
        for (i, k) in kernels.iter().enumerate() {
            k.validate()?;
            if k.support() > support * (1.0 + 1e-12) {
                return Err(Error::InvalidModel(format!(
                    "kernel ({}, {}) extends to {} beyond the common support {support}",
                    i / m + 1,
                    i % m + 1,
                    k.support()
                )));
            }
        }
        Ok(Self { nu, kernels, support })
    }

    /// Builds a model from a closure `(source, target) -> Kernel`.
    pub fn from_fn(nu: Vec<f64>, support: f64, f: impl Fn(usize, usize) -> Kernel) -> Result<Self> {
        let m = nu.len();
        let kernels = (0..m * m).map(|i| f(i / m, i % m)).collect();
        Self::new(nu, kernels, support)
    }

    pub fn marks(&self) -> usize {
        self.nu.len()
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn kernel(&self, source: usize, target: usize) -> &Kernel {
        &self.kernels[source * self.marks() + target]
    }

    pub fn branching_matrix(&self) -> BranchingMatrix {
        let m = self.marks();
        BranchingMatrix {
            gamma: DMatrix::from_fn(m, m, |l, t| self.kernel(l, t).integral()),
        }
    }

    /// Expected events per unit time for each mark at stationarity.
    pub fn stationary_rates(&self) -> Result<Vec<f64>> {
        let g = self.branching_matrix();
        let rho = g.spectral_radius();
        if rho >= 1.0 {
            return Err(Error::NotSubcritical(rho));
        }
        let m = self.marks();
        let a = DMatrix::<f64>::identity(m, m) - g.gamma.transpose();
        let rhs = DVector::from_column_slice(&self.nu);
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidModel("I - Gamma^T is singular".into()))?;
        Ok(sol.iter().copied().collect())
    }

    /// Conditional intensity of `mark` at `t` given the events of `history`
    /// strictly before `t`.
    pub fn intensity(&self, history: &MarkedPointSet, t: f64, mark: usize) -> f64 {
        let mut lambda = self.nu[mark];
        for source in 0..self.marks() {
            let h = self.kernel(source, mark);
            if h.is_zero() {
                continue;
            }
            for &u in history.times_in(source, t - self.support, t) {
                lambda += h.eval(t - u);
            }
        }
        lambda
    }

    /// Zero kernels, same rates.
    pub fn without_interactions(&self) -> Self {
        Self {
            nu: self.nu.clone(),
            kernels: vec![Kernel::Zero; self.kernels.len()],
            support: self.support,
        }
    }
}

/// `gamma[(source, target)] = integral of kernel(source, target)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingMatrix {
    pub gamma: DMatrix<f64>,
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 100_000;

impl BranchingMatrix {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        if !gamma.is_square() {
            return Err(Error::Dimension("branching matrix must be square".into()));
        }
        if gamma.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidModel("branching matrix entries must be >= 0".into()));
        }
        Ok(Self { gamma })
    }

    /// Largest eigenvalue modulus.
    ///
    /// The Perron root of a nonnegative matrix is the largest Perron root of
    /// its strongly connected components. Each irreducible component is
    /// handled by power iteration on `I + C` (primitive, so it converges)
    /// with a Collatz-Wielandt bracket as the stopping rule.
    pub fn spectral_radius(&self) -> f64 {
        components(&self.gamma)
            .into_iter()
            .map(|comp| {
                if comp.len() == 1 {
                    let i = comp[0];
                    return self.gamma[(i, i)];
                }
                let sub = DMatrix::from_fn(comp.len(), comp.len(), |a, b| self.gamma[(comp[a], comp[b])]);
                perron_root(&sub).unwrap_or_else(|| dense_radius(&sub))
            })
            .fold(0.0, f64::max)
    }
}

/// Strongly connected components of the support graph of `g`.
fn components(g: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = g.nrows();
    let mut reach: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i == j || g[(i, j)] > 0.0).collect())
        .collect();
    for k in 0..n {
        let via = reach[k].clone();
        for row in reach.iter_mut().filter(|row| row[k]) {
            row.iter_mut().zip(&via).for_each(|(r, &v)| *r |= v);
        }
    }
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let comp: Vec<usize> = (i..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &comp {
            assigned[j] = true;
        }
        out.push(comp);
    }
    out
}

/// Perron root of an irreducible nonnegative matrix, or `None` if the
/// Collatz-Wielandt bracket fails to close.
fn perron_root(c: &DMatrix<f64>) -> Option<f64> {
    let n = c.nrows();
    let shifted = c + DMatrix::<f64>::identity(n, n);
    let mut x = DVector::from_element(n, 1.0);
    for _ in 0..POWER_MAX_ITERS {
        let y = &shifted * &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if !(lo.is_finite() && hi.is_finite()) || y.iter().any(|v| *v <= 0.0) {
            return None;
        }
        if hi - lo <= POWER_TOL * hi {
            return Some(0.5 * (lo + hi) - 1.0);
        }
        let norm = y.amax();
        x = y / norm;
    }
    None
}

fn dense_radius(c: &DMatrix<f64>) -> f64 {
    match nalgebra::Schur::try_new(c.clone(), f64::EPSILON, 10_000) {
        Some(schur) => schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        // Gershgorin-type bound: max column sum of a nonnegative matrix
        None => c.row_sum().amax(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::presets;
    use approx::assert_relative_eq;

    #[test]
    fn exp1_branching_and_radius() {
        let model = presets::experiment1();
        let g = model.branching_matrix();
        let expected = [[0.6, 0.3], [0.3, 0.0]];
        for l in 0..2 {
            for m in 0..2 {
                assert_relative_eq!(g.gamma[(l, m)], expected[l][m], epsilon = 1e-14);
            }
        }
        // eigenvalue of [[0.6,0.3],[0.3,0]] is (0.6 + sqrt(0.72)) / 2
        let rho = g.spectral_radius();
        assert_relative_eq!(rho, (0.6 + 0.72f64.sqrt()) / 2.0, epsilon = 1e-9);
        assert!((rho - 0.725).abs() <= 1e-3);
    }

    #[test]
    fn exp3_radius_is_one_half() {
        let g = presets::experiment3().branching_matrix();
        let nonzero = g.gamma.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 9);
        assert!(g.gamma.iter().all(|v| *v == 0.0 || (v - 0.5).abs() < 1e-14));
        assert!((g.spectral_radius() - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn exp2_radius_is_reported() {
        let g = presets::experiment2().branching_matrix();
        assert_relative_eq!(g.gamma[(0, 0)], 0.5 * (1.0 - (-8.0f64).exp()), epsilon = 1e-12);
        assert_relative_eq!(g.gamma[(0, 1)], 0.5, max_relative = 1e-6);
        assert_relative_eq!(g.gamma[(1, 0)], 0.6, epsilon = 1e-14);
        let a = g.gamma[(0, 0)];
        let b = g.gamma[(0, 1)] * g.gamma[(1, 0)];
        assert_relative_eq!(
            g.spectral_radius(),
            (a + (a * a + 4.0 * b).sqrt()) / 2.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn radius_trivial_cases() {
        let id = BranchingMatrix::new(DMatrix::identity(4, 4) * 0.5).unwrap();
        assert_relative_eq!(id.spectral_radius(), 0.5, epsilon = 1e-15);
        let zero = BranchingMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(zero.spectral_radius(), 0.0);
        // nilpotent chain
        let mut n = DMatrix::zeros(3, 3);
        n[(0, 1)] = 2.0;
        n[(1, 2)] = 3.0;
        assert_eq!(BranchingMatrix::new(n).unwrap().spectral_radius(), 0.0);
    }

    #[test]
    fn radius_matches_dense_solver_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(2..7);
            let g = DMatrix::from_fn(n, n, |_, _| {
                if rng.gen_bool(0.4) {
                    rng.gen_range(0.0..1.0)
                } else {
                    0.0
                }
            });
            let dense = dense_radius(&g);
            let ours = BranchingMatrix::new(g).unwrap().spectral_radius();
            assert_relative_eq!(ours, dense, epsilon = 1e-7);
        }
    }

    #[test]
    fn stationary_rates_solve_first_moment_identity() {
        let r1 = presets::experiment1().stationary_rates().unwrap();
        // m1 = 26 / 0.31, m2 = 20 + 0.3 m1
        assert_relative_eq!(r1[0], 26.0 / 0.31, epsilon = 1e-10);
        assert_relative_eq!(r1[1], 20.0 + 0.3 * 26.0 / 0.31, epsilon = 1e-10);

        let r3 = presets::experiment3().stationary_rates().unwrap();
        for (got, want) in r3.iter().zip([80.0, 40.0, 80.0, 20.0, 40.0, 40.0, 40.0, 40.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-10);
        }

        let free = presets::experiment1().without_interactions();
        assert_eq!(free.stationary_rates().unwrap(), vec![20.0, 20.0]);
    }

    #[test]
    fn supercritical_model_is_rejected() {
        let m = HawkesModel::from_fn(vec![1.0], 1.0, |_, _| Kernel::indicator(1.5, 0.0, 1.0)).unwrap();
        assert!(matches!(m.stationary_rates(), Err(Error::NotSubcritical(_))));
    }

    #[test]
    fn intensity_sums_kernels_over_strict_past() {
        let model = presets::experiment1();
        let empty = MarkedPointSet::empty(2, (-1.0, 1.0)).unwrap();
        assert_eq!(model.intensity(&empty, 0.5, 0), 20.0);

        let one = MarkedPointSet::new(vec![vec![0.0], vec![]], (-1.0, 1.0)).unwrap();
        assert_eq!(model.intensity(&one, 0.01, 0), 50.0);
        assert_eq!(model.intensity(&one, 0.03, 0), 20.0);
        // point at t itself does not count
        assert_eq!(model.intensity(&one, 0.0, 0), 20.0);
        // h_1^{(2)} is active on (0.01, 0.02]
        assert_eq!(model.intensity(&one, 0.015, 1), 50.0);
        assert_eq!(model.intensity(&one, 0.005, 1), 20.0);
    }

    #[test]
    fn model_validation() {
        assert!(HawkesModel::new(vec![1.0], vec![], 1.0).is_err());
        assert!(HawkesModel::new(vec![-1.0], vec![Kernel::Zero], 1.0).is_err());
        assert!(HawkesModel::new(vec![1.0], vec![Kernel::indicator(1.0, 0.0, 2.0)], 1.0).is_err());
    }
}
