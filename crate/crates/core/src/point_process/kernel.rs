//! Nonnegative interaction kernels with bounded support `(0, A]`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Interaction function `h(x)`, zero outside `(0, support]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Zero,
    /// `levels[i]` on `(breakpoints[i], breakpoints[i + 1]]`.
    Step {
        breakpoints: Vec<f64>,
        levels: Vec<f64>,
    },
    /// `amplitude * exp(-rate * x)` on `(0, support]`.
    TruncExp {
        amplitude: f64,
        rate: f64,
        support: f64,
    },
    /// `scale * exp(-(x - center)^2 / (2 sd^2))` on `(0, support]`.
    TruncGauss {
        scale: f64,
        center: f64,
        sd: f64,
        support: f64,
    },
}

/// Standard normal upper tail.
fn upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

/// `Phi(b) - Phi(a)` for `a <= b`, evaluated on the side that avoids cancellation.
fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(-a) - upper_tail(b)
    }
}

impl Kernel {
    /// `level` on `(lo, hi]`, zero elsewhere.
    pub fn indicator(level: f64, lo: f64, hi: f64) -> Self {
        if level == 0.0 {
            return Kernel::Zero;
        }
        let (breakpoints, levels) = if lo > 0.0 {
            (vec![0.0, lo, hi], vec![0.0, level])
        } else {
            (vec![0.0, hi], vec![level])
        };
        Kernel::Step { breakpoints, levels }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidKernel(msg));
        match self {
            Kernel::Zero => Ok(()),
            Kernel::Step { breakpoints, levels } => {
                if breakpoints.len() < 2 || levels.len() + 1 != breakpoints.len() {
                    return bad(format!(
                        "step kernel needs n+1 breakpoints for n levels (got {} and {})",
                        breakpoints.len(),
                        levels.len()
                    ));
                }
                if breakpoints[0] < 0.0 || !breakpoints.iter().all(|b| b.is_finite()) {
                    return bad("breakpoints must be finite and start at or after 0".into());
                }
                if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("breakpoints must be strictly increasing".into());
                }
                if levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                    return bad("step levels must be finite and nonnegative".into());
                }
                Ok(())
            }
            Kernel::TruncExp {
                amplitude,
                rate,
                support,
            } => {
                if !(support.is_finite() && *support > 0.0) {
                    return bad(format!("support must be positive (got {support})"));
                }
                if !(amplitude.is_finite() && *amplitude >= 0.0) || !rate.is_finite() {
                    return bad("exponential kernel needs amplitude >= 0 and a finite rate".into());
                }
                Ok(())
            }
            Kernel::TruncGauss {
                scale,
                center,
                sd,
                support,
            } => {
                if !(support.is_finite() && *support > 0.0) {
                    return bad(format!("support must be positive (got {support})"));
                }
                if !(scale.is_finite() && *scale >= 0.0) || !center.is_finite() {
                    return bad("gaussian kernel needs scale >= 0 and a finite center".into());
                }
                if !(sd.is_finite() && *sd > 0.0) {
                    return bad(format!("gaussian kernel needs sd > 0 (got {sd})"));
                }
                Ok(())
            }
        }
    }

    /// Right end of the support; 0 for the zero kernel.
    pub fn support(&self) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::Step { breakpoints, .. } => *breakpoints.last().unwrap_or(&0.0),
            Kernel::TruncExp { support, .. } | Kernel::TruncGauss { support, .. } => *support,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Kernel::Zero => true,
            Kernel::Step { levels, .. } => levels.iter().all(|&l| l == 0.0),
            Kernel::TruncExp { amplitude, .. } => *amplitude == 0.0,
            Kernel::TruncGauss { scale, .. } => *scale == 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 || x > self.support() {
            return 0.0;
        }
        match self {
            Kernel::Zero => 0.0,
            Kernel::Step { breakpoints, levels } => {
                // first breakpoint >= x closes the interval holding x
                let idx = breakpoints.partition_point(|&b| b < x);
                if idx == 0 {
                    0.0
                } else {
                    levels[idx - 1]
                }
            }
            Kernel::TruncExp { amplitude, rate, .. } => amplitude * (-rate * x).exp(),
            Kernel::TruncGauss { scale, center, sd, .. } => {
                let z = (x - center) / sd;
                scale * (-0.5 * z * z).exp()
            }
        }
    }

    /// Supremum of the kernel over its support.
    pub fn sup(&self) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::Step { levels, .. } => levels.iter().copied().fold(0.0, f64::max),
            Kernel::TruncExp {
                amplitude,
                rate,
                support,
            } => {
                if *rate >= 0.0 {
                    *amplitude
                } else {
                    amplitude * (-rate * support).exp()
                }
            }
            Kernel::TruncGauss {
                scale,
                center,
                sd,
                support,
            } => {
                let nearest = center.clamp(0.0, *support);
                let z = (nearest - center) / sd;
                scale * (-0.5 * z * z).exp()
            }
        }
    }

    /// Closed-form integral over the whole support.
    pub fn integral(&self) -> f64 {
        self.integral_over(0.0, self.support())
    }

    /// Closed-form integral over `(lo, hi]`, clipped to the support.
    pub fn integral_over(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(0.0);
        let hi = hi.min(self.support());
        if hi <= lo {
            return 0.0;
        }
        match self {
            Kernel::Zero => 0.0,
            Kernel::Step { breakpoints, levels } => step_overlap_sum(breakpoints, levels, lo, hi, |l| l),
            Kernel::TruncExp { amplitude, rate, .. } => exp_integral(*amplitude, *rate, lo, hi),
            Kernel::TruncGauss { scale, center, sd, .. } => {
                scale * sd * (2.0 * PI).sqrt() * normal_mass((lo - center) / sd, (hi - center) / sd)
            }
        }
    }

    /// Closed-form integral of `h^2` over `(lo, hi]`, clipped to the support.
    pub fn square_integral_over(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(0.0);
        let hi = hi.min(self.support());
        if hi <= lo {
            return 0.0;
        }
        match self {
            Kernel::Zero => 0.0,
            Kernel::Step { breakpoints, levels } => step_overlap_sum(breakpoints, levels, lo, hi, |l| l * l),
            Kernel::TruncExp { amplitude, rate, .. } => exp_integral(amplitude * amplitude, 2.0 * rate, lo, hi),
            Kernel::TruncGauss { scale, center, sd, .. } => {
                // exp(-(x-c)^2/sd^2) is a gaussian with sd/sqrt(2)
                let s = sd / SQRT_2;
                scale * scale * s * (2.0 * PI).sqrt() * normal_mass((lo - center) / s, (hi - center) / s)
            }
        }
    }

    /// Same kernel with every breakpoint split in two. Integrals are unchanged.
    pub fn refined(&self) -> Self {
        match self {
            Kernel::Step { breakpoints, levels } => {
                let mut bp = vec![breakpoints[0]];
                let mut lv = Vec::with_capacity(2 * levels.len());
                for (w, &l) in breakpoints.windows(2).zip(levels) {
                    bp.push(0.5 * (w[0] + w[1]));
                    bp.push(w[1]);
                    lv.push(l);
                    lv.push(l);
                }
                Kernel::Step {
                    breakpoints: bp,
                    levels: lv,
                }
            }
            other => other.clone(),
        }
    }
}

/// Overlaps shorter than this fraction of the interval are rounding noise from
/// bin edges computed as `k * delta`.
const OVERLAP_SNAP: f64 = 1e-12;

fn step_overlap_sum(breakpoints: &[f64], levels: &[f64], lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let snap = OVERLAP_SNAP * (hi - lo);
    breakpoints
        .windows(2)
        .zip(levels)
        .map(|(w, &l)| {
            let overlap = w[1].min(hi) - w[0].max(lo);
            if overlap > snap {
                f(l) * overlap
            } else {
                0.0
            }
        })
        .sum()
}

/// `int_lo^hi amp * exp(-rate x) dx`.
fn exp_integral(amp: f64, rate: f64, lo: f64, hi: f64) -> f64 {
    if rate == 0.0 {
        return amp * (hi - lo);
    }
    amp * (-rate * lo).exp() * (-(-rate * (hi - lo)).exp_m1()) / rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn riemann(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..n).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn step_integral_is_rectangle_area() {
        let k = Kernel::indicator(30.0, 0.0, 0.02);
        assert_relative_eq!(k.integral(), 0.6, epsilon = 1e-15);
        assert_eq!(Kernel::Zero.integral(), 0.0);
    }

    #[test]
    fn exp_integral_matches_riemann_sum() {
        let k = Kernel::TruncExp {
            amplitude: 100.0,
            rate: 200.0,
            support: 0.04,
        };
        let closed = k.integral();
        assert_relative_eq!(closed, 0.5 * (1.0 - (-8.0f64).exp()), epsilon = 1e-14);
        assert_relative_eq!(closed, 0.499832, epsilon = 1e-6);
        let numeric = riemann(|x| k.eval(x), 0.0, 0.04, 1_000_000);
        assert_relative_eq!(closed, numeric, max_relative = 1e-9);
    }

    #[test]
    fn gauss_integrals_match_riemann_sum() {
        let k = Kernel::TruncGauss {
            scale: 1.0 / (0.008 * (2.0 * PI).sqrt()),
            center: 0.02,
            sd: 0.004,
            support: 0.04,
        };
        for (lo, hi) in [(0.0, 0.04), (0.0, 0.005), (0.015, 0.025), (0.03, 0.04)] {
            let n = riemann(|x| k.eval(x), lo, hi, 200_000);
            assert_relative_eq!(k.integral_over(lo, hi), n, max_relative = 1e-8, epsilon = 1e-15);
            let n2 = riemann(|x| k.eval(x).powi(2), lo, hi, 200_000);
            assert_relative_eq!(k.square_integral_over(lo, hi), n2, max_relative = 1e-8, epsilon = 1e-13);
        }
        assert_relative_eq!(k.integral(), 0.5, max_relative = 1e-6);
    }

    #[test]
    fn eval_respects_half_open_support() {
        let k = Kernel::indicator(30.0, 0.01, 0.02);
        assert_eq!(k.eval(0.0), 0.0);
        assert_eq!(k.eval(0.01), 0.0);
        assert_eq!(k.eval(0.015), 30.0);
        assert_eq!(k.eval(0.02), 30.0);
        assert_eq!(k.eval(0.0201), 0.0);
        let e = Kernel::TruncExp {
            amplitude: 1.0,
            rate: 1.0,
            support: 0.5,
        };
        assert_eq!(e.eval(-0.1), 0.0);
        assert_eq!(e.eval(0.6), 0.0);
    }

    #[test]
    fn sup_bounds_kernel() {
        let g = Kernel::TruncGauss {
            scale: 3.0,
            center: 0.05,
            sd: 0.01,
            support: 0.04,
        };
        let s = g.sup();
        assert_relative_eq!(s, g.eval(0.04), max_relative = 1e-14);
        for i in 1..=400 {
            assert!(g.eval(i as f64 * 1e-4) <= s * (1.0 + 1e-14));
        }
    }

    #[test]
    fn refinement_preserves_integrals() {
        let k = Kernel::Step {
            breakpoints: vec![0.0, 0.01, 0.025],
            levels: vec![4.0, 7.0],
        };
        let r = k.refined().refined();
        r.validate().unwrap();
        assert_relative_eq!(k.integral(), r.integral(), max_relative = 1e-14);
        assert_relative_eq!(
            k.square_integral_over(0.005, 0.02),
            r.square_integral_over(0.005, 0.02),
            max_relative = 1e-14
        );
    }

    #[test]
    fn validation_rejects_bad_kernels() {
        assert!(Kernel::Step {
            breakpoints: vec![0.0, 0.02, 0.01],
            levels: vec![1.0, 1.0]
        }
        .validate()
        .is_err());
        assert!(Kernel::Step {
            breakpoints: vec![0.0, 0.02],
            levels: vec![-1.0]
        }
        .validate()
        .is_err());
        assert!(Kernel::TruncExp {
            amplitude: 1.0,
            rate: 1.0,
            support: 0.0
        }
        .validate()
        .is_err());
    }
}
