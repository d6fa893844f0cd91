use statrs::function::erf::erfc;

use crate::error::{finite, Error, Result};

/// Distribution of a measured delay: a two-sided exponential of decay `decay`
/// convolved with a zero-mean Gaussian of standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayKernel {
    /// s.
    pub decay: f64,
    /// s.
    pub sigma: f64,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `exp(a) · Φ(b)` without overflowing when `a` is large and `Φ(b)` tiny.
fn exp_times_cdf(a: f64, b: f64) -> f64 {
    let p = std_normal_cdf(b);
    if p == 0.0 {
        0.0
    } else {
        (a + p.ln()).exp()
    }
}

impl DelayKernel {
    pub fn new(decay: f64, sigma: f64) -> Result<Self> {
        finite("decay", decay)?;
        finite("sigma", sigma)?;
        if decay < 0.0 || sigma < 0.0 {
            return Err(Error::param("kernel", "decay and sigma must be >= 0"));
        }
        Ok(Self { decay, sigma })
    }

    /// Signal-idler delay seen through two independent detector jitters.
    pub fn cross(decay: f64, jitter_signal: f64, jitter_idler: f64) -> Self {
        Self {
            decay,
            sigma: jitter_signal.hypot(jitter_idler),
        }
    }

    /// Two photons of one slot seen by two detectors of jitter `jitter`.
    pub fn auto(jitter: f64) -> Self {
        Self {
            decay: 0.0,
            sigma: std::f64::consts::SQRT_2 * jitter,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (t, s) = (self.decay, self.sigma);
        match (t > 0.0, s > 0.0) {
            (false, false) => {
                // Left-continuous, so `mass` is exact on half-open windows.
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            (false, true) => std_normal_cdf(x / s),
            (true, false) => {
                if x < 0.0 {
                    0.5 * (x / t).exp()
                } else {
                    1.0 - 0.5 * (-x / t).exp()
                }
            }
            (true, true) => {
                let a = s * s / (2.0 * t * t);
                let v = std_normal_cdf(x / s) - 0.5 * exp_times_cdf(a - x / t, x / s - s / t)
                    + 0.5 * exp_times_cdf(a + x / t, -x / s - s / t);
                v.clamp(0.0, 1.0)
            }
        }
    }

    /// Probability that the delay falls in `[lo, hi)`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    /// Density at `x`, for plotting and tests.
    pub fn pdf(&self, x: f64) -> f64 {
        let h = 1e-3 * (self.decay + self.sigma).max(1e-15);
        (self.cdf(x + h) - self.cdf(x - h)) / (2.0 * h)
    }

    /// Full width at half maximum of the density, by bisection.
    pub fn fwhm(&self) -> f64 {
        let peak = self.pdf(0.0);
        let mut lo = 0.0;
        let mut hi = 10.0 * (self.decay + self.sigma).max(1e-15);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.pdf(mid) > 0.5 * peak {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo + hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_cdf(k: &DelayKernel, x: f64) -> f64 {
        // Midpoint quadrature of the Laplace density against the Gaussian cdf.
        let n = 200_000;
        let span = 40.0 * k.decay;
        let h = 2.0 * span / n as f64;
        (0..n)
            .map(|i| {
                let y = -span + (i as f64 + 0.5) * h;
                let lap = (-y.abs() / k.decay).exp() / (2.0 * k.decay);
                lap * std_normal_cdf((x - y) / k.sigma) * h
            })
            .sum()
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let k = DelayKernel::new(0.25e-9, 0.17e-9).unwrap();
        for &x in &[-2e-9, -0.4e-9, 0.0, 0.1e-9, 0.9e-9, 3e-9] {
            let a = k.cdf(x);
            let b = numeric_cdf(&k, x);
            assert!((a - b).abs() < 1e-6, "x = {x}: {a} vs {b}");
        }
        assert!((k.cdf(0.0) - 0.5).abs() < 1e-12);
        assert_eq!(k.cdf(1.0), 1.0);
        assert_eq!(k.cdf(-1.0), 0.0);
    }

    #[test]
    fn limits() {
        let lap = DelayKernel::new(1e-9, 0.0).unwrap();
        assert!((lap.mass(-1e-9, 1e-9) - (1.0 - (-1f64).exp())).abs() < 1e-12);
        let gauss = DelayKernel::new(0.0, 1e-9).unwrap();
        assert!((gauss.mass(-1e-9, 1e-9) - 0.682_689_492).abs() < 1e-8);
        let delta = DelayKernel::new(0.0, 0.0).unwrap();
        assert_eq!(delta.mass(-1e-12, 1e-12), 1.0);
        assert_eq!(delta.mass(1e-12, 2e-12), 0.0);
        assert!(DelayKernel::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn fwhm_of_pure_shapes() {
        let g = DelayKernel::new(0.0, 1e-9).unwrap();
        assert!((g.fwhm() / 2.354_820e-9 - 1.0).abs() < 1e-4);
        let l = DelayKernel::new(1e-9, 0.0).unwrap();
        assert!((l.fwhm() / (2.0 * 2f64.ln() * 1e-9) - 1.0).abs() < 1e-3);
    }
}
