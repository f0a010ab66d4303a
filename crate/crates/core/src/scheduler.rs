//! Flow-matching schedulers `x_t = alpha_t z + sigma_t eps` with `alpha_0 = sigma_1 = 0`.

use core::f64::consts::FRAC_PI_2;
use core::fmt;
use core::str::FromStr;

use crate::math::{atan, cos, sin, sqrt};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Scheduler {
    /// `alpha_t = t`, `sigma_t = 1 - t`.
    CondOt,
    /// `alpha_t = sin(pi t / 2)`, `sigma_t = cos(pi t / 2)`.
    Cosine,
}

/// Scheduler values and their time derivatives at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerPoint {
    pub alpha: f64,
    pub sigma: f64,
    pub d_alpha: f64,
    pub d_sigma: f64,
}

impl Scheduler {
    pub fn name(self) -> &'static str {
        match self {
            Scheduler::CondOt => "condot",
            Scheduler::Cosine => "cosine",
        }
    }

    pub fn eval(self, t: f64) -> Result<SchedulerPoint> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange { t });
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(self, t: f64) -> SchedulerPoint {
        match self {
            Scheduler::CondOt => SchedulerPoint {
                alpha: t,
                sigma: 1.0 - t,
                d_alpha: 1.0,
                d_sigma: -1.0,
            },
            // sigma is written as sin of the complementary angle so both
            // endpoints are exact zeros.
            Scheduler::Cosine => {
                let a = FRAC_PI_2 * t;
                let b = FRAC_PI_2 * (1.0 - t);
                SchedulerPoint {
                    alpha: sin(a),
                    sigma: sin(b),
                    d_alpha: FRAC_PI_2 * cos(a),
                    d_sigma: -FRAC_PI_2 * cos(b),
                }
            }
        }
    }

    /// Effective noise scale `g(t) = sigma_t^2 / alpha_t^2`.
    pub fn noise_scale(self, t: f64) -> Result<f64> {
        let p = self.eval(t)?;
        if p.alpha == 0.0 {
            return Err(Error::InfiniteNoiseScale);
        }
        let r = p.sigma / p.alpha;
        Ok(r * r)
    }

    /// Inverse of [`Scheduler::noise_scale`]. `v = 0` maps to `t = 1`, `v = inf` to `t = 0`.
    pub fn noise_scale_inverse(self, v: f64) -> Result<f64> {
        if v.is_nan() || v < 0.0 {
            return Err(Error::domain("noise scale must be non-negative"));
        }
        if v == 0.0 {
            return Ok(1.0);
        }
        if v == f64::INFINITY {
            return Ok(0.0);
        }
        match self {
            Scheduler::CondOt => Ok(1.0 / (1.0 + sqrt(v))),
            Scheduler::Cosine => Ok(self.bisect_noise_scale(v)),
        }
    }

    /// Bisection on the monotone map `g`. Runs until the bracket collapses to
    /// adjacent floats.
    fn bisect_noise_scale(self, v: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let p = self.eval_unchecked(mid);
            let r = p.sigma / p.alpha;
            // g is decreasing: too much noise means t is too small.
            if r * r > v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let g = |t: f64| {
            let p = self.eval_unchecked(t);
            let r = p.sigma / p.alpha;
            r * r
        };
        if (g(lo) - v).abs() <= (g(hi) - v).abs() {
            lo
        } else {
            hi
        }
    }

    /// Diffusion coefficient of the time-reversal SDE,
    /// `nu_t^2 = 2 alpha_dot sigma^2 / alpha - 2 sigma sigma_dot`.
    pub fn nu_squared(self, t: f64) -> Result<f64> {
        let p = self.eval(t)?;
        if p.alpha == 0.0 {
            return Err(Error::SchedulerBoundary {
                scheduler: self.name(),
                what: "alpha_t = 0, diffusion coefficient diverges",
                t,
            });
        }
        Ok(2.0 * p.d_alpha * p.sigma * p.sigma / p.alpha - 2.0 * p.sigma * p.d_sigma)
    }

    /// Closed-form inverse for the cosine scheduler; used to check the bisection.
    pub fn cosine_noise_scale_inverse_closed_form(v: f64) -> f64 {
        atan(1.0 / sqrt(v)) / FRAC_PI_2
    }
}

impl fmt::Display for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheduler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "condot" => Ok(Scheduler::CondOt),
            "cosine" => Ok(Scheduler::Cosine),
            other => Err(Error::Config(alloc::format!("unknown scheduler `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_4, PI};

    const BOTH: [Scheduler; 2] = [Scheduler::CondOt, Scheduler::Cosine];

    #[test]
    fn condot_examples() {
        let p = Scheduler::CondOt.eval(0.0).unwrap();
        assert_eq!((p.alpha, p.sigma, p.d_alpha, p.d_sigma), (0.0, 1.0, 1.0, -1.0));
        let p = Scheduler::CondOt.eval(0.25).unwrap();
        assert_eq!((p.alpha, p.sigma, p.d_alpha, p.d_sigma), (0.25, 0.75, 1.0, -1.0));
    }

    #[test]
    fn cosine_midpoint() {
        let p = Scheduler::Cosine.eval(0.5).unwrap();
        let s = sin(FRAC_PI_4);
        let c = cos(FRAC_PI_4);
        assert!((p.alpha - s).abs() < 1e-15);
        assert!((p.sigma - c).abs() < 1e-15);
        assert!((p.d_alpha - PI / 2.0 * c).abs() < 1e-15);
        assert!((p.d_sigma + PI / 2.0 * s).abs() < 1e-15);
    }

    #[test]
    fn boundaries() {
        for s in BOTH {
            let p0 = s.eval(0.0).unwrap();
            let p1 = s.eval(1.0).unwrap();
            assert!(p0.alpha.abs() < 1e-12 && (p0.sigma - 1.0).abs() < 1e-12);
            assert!((p1.alpha - 1.0).abs() < 1e-12 && p1.sigma.abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_time() {
        assert_eq!(Scheduler::CondOt.eval(1.5), Err(Error::TimeOutOfRange { t: 1.5 }));
        assert!(Scheduler::Cosine.eval(-0.1).is_err());
        assert!(Scheduler::Cosine.eval(f64::NAN).is_err());
    }

    #[test]
    fn monotone_on_grid() {
        for s in BOTH {
            let mut prev = s.eval(0.0).unwrap();
            for i in 1..=1000 {
                let p = s.eval(i as f64 / 1000.0).unwrap();
                assert!(p.alpha > prev.alpha && p.sigma < prev.sigma);
                prev = p;
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        for s in BOTH {
            for i in 0..=200 {
                let t = 1e-3 + (1.0 - 2e-3) * i as f64 / 200.0;
                let h = 1e-6;
                let p = s.eval(t).unwrap();
                let (a, b) = (s.eval_unchecked(t + h), s.eval_unchecked(t - h));
                let fd_a = (a.alpha - b.alpha) / (2.0 * h);
                let fd_s = (a.sigma - b.sigma) / (2.0 * h);
                assert!((fd_a - p.d_alpha).abs() <= 1e-6 * p.d_alpha.abs().max(1e-300));
                // d_sigma vanishes at t = 0 for cosine; relative test against max(|d|, 1).
                assert!((fd_s - p.d_sigma).abs() <= 1e-6 * p.d_sigma.abs().max(1.0));
            }
        }
    }

    #[test]
    fn noise_scale_examples() {
        assert_eq!(Scheduler::CondOt.noise_scale(0.5).unwrap(), 1.0);
        assert!((Scheduler::CondOt.noise_scale(0.8).unwrap() - 0.0625).abs() < 1e-15);
        assert!((Scheduler::Cosine.noise_scale(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(Scheduler::CondOt.noise_scale(0.0), Err(Error::InfiniteNoiseScale));
    }

    #[test]
    fn noise_scale_inverse_examples() {
        assert_eq!(Scheduler::CondOt.noise_scale_inverse(1.0).unwrap(), 0.5);
        assert_eq!(Scheduler::CondOt.noise_scale_inverse(0.0).unwrap(), 1.0);
        assert_eq!(Scheduler::Cosine.noise_scale_inverse(0.0).unwrap(), 1.0);
        let t = Scheduler::Cosine.noise_scale_inverse(1.0).unwrap();
        let closed = 2.0 / PI * atan(1.0);
        assert!((t - closed).abs() < 1e-14);
        assert!((t - 0.5).abs() < 1e-14);
        assert!(Scheduler::Cosine.noise_scale_inverse(-1.0).is_err());
    }

    #[test]
    fn bisection_tolerance_and_closed_form() {
        for &v in &[1e-8, 1e-3, 0.3, 1.0, 7.0, 1e4, 1e9] {
            let t = Scheduler::Cosine.noise_scale_inverse(v).unwrap();
            let g = Scheduler::Cosine.noise_scale(t).unwrap();
            assert!((g - v).abs() <= 1e-12 * v.max(1.0), "v={v} g={g}");
            let c = Scheduler::cosine_noise_scale_inverse_closed_form(v);
            assert!((t - c).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_scale_round_trip_and_monotone() {
        for s in BOTH {
            for i in 0..=990 {
                let t = 0.01 + i as f64 / 1000.0;
                let back = s.noise_scale_inverse(s.noise_scale(t).unwrap()).unwrap();
                assert!((back - t).abs() < 1e-9, "{s} t={t} back={back}");
            }
            let mut prev = f64::INFINITY;
            for i in 1..=1000 {
                let g = s.noise_scale(i as f64 / 1000.0).unwrap();
                assert!(g < prev);
                prev = g;
            }
        }
    }

    #[test]
    fn nu_squared_condot() {
        assert!((Scheduler::CondOt.nu_squared(0.5).unwrap() - 2.0).abs() < 1e-15);
        for &t in &[0.1, 0.3, 0.9] {
            let v = Scheduler::CondOt.nu_squared(t).unwrap();
            assert!((v - 2.0 * (1.0 - t) / t).abs() < 1e-12);
        }
        assert!(Scheduler::CondOt.nu_squared(0.0).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("condot".parse::<Scheduler>().unwrap(), Scheduler::CondOt);
        assert_eq!("Cosine".parse::<Scheduler>().unwrap(), Scheduler::Cosine);
        assert!("vp".parse::<Scheduler>().is_err());
    }
}
