//! Isotropic Gaussian mixtures.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{exp, ln, log_sum_exp, normal_cdf, sqrt, LN_2PI};
use crate::rng::RngStream;
use crate::{Error, Result};

/// One mixture component `w * N(mean, var * I)`. `var = 0` is a point mass.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: f64,
}

impl Component {
    pub fn new(weight: f64, mean: Vec<f64>, var: f64) -> Self {
        Self { weight, mean, var }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<Component>,
    dim: usize,
}

const WEIGHT_TOL: f64 = 1e-12;

impl GaussianMixture {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Config("mixture needs at least one component".into()))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::Config("mixture dimension must be positive".into()));
        }
        let mut total = 0.0;
        for (k, c) in components.iter().enumerate() {
            if c.mean.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: c.mean.len(),
                });
            }
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(Error::Config(format!("component {k}: weight must be > 0")));
            }
            if !(c.var >= 0.0) || !c.var.is_finite() {
                return Err(Error::Config(format!("component {k}: variance must be >= 0")));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::Config(format!("component {k}: mean must be finite")));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::Config(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { components, dim })
    }

    /// Builds a mixture from unnormalized log-weights, normalizing in log space.
    pub fn from_log_weights(log_weights: &[f64], means: Vec<Vec<f64>>, vars: Vec<f64>) -> Result<Self> {
        let lse = log_sum_exp(log_weights);
        let components = log_weights
            .iter()
            .zip(means)
            .zip(vars)
            .map(|((&lw, mean), var)| Component::new(exp(lw - lse), mean, var))
            .filter(|c| c.weight > 0.0)
            .collect::<Vec<_>>();
        let mut mix = Self::new_unchecked_weights(components)?;
        mix.renormalize();
        Ok(mix)
    }

    fn new_unchecked_weights(components: Vec<Component>) -> Result<Self> {
        let dim = components
            .first()
            .map(|c| c.mean.len())
            .ok_or_else(|| Error::Config("mixture needs at least one component".into()))?;
        Ok(Self { components, dim })
    }

    fn renormalize(&mut self) {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        for c in &mut self.components {
            c.weight /= total;
        }
    }

    /// Single isotropic Gaussian.
    pub fn gaussian(mean: Vec<f64>, var: f64) -> Result<Self> {
        Self::new(vec![Component::new(1.0, mean, var)])
    }

    /// Point mass at `x`.
    pub fn point_mass(x: Vec<f64>) -> Self {
        Self {
            dim: x.len(),
            components: vec![Component::new(1.0, x, 0.0)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for c in &self.components {
            for (o, m) in out.iter_mut().zip(&c.mean) {
                *o += c.weight * m;
            }
        }
        out
    }

    /// Per-coordinate variance (the covariance diagonal).
    pub fn variance_diag(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut out = vec![0.0; self.dim];
        for c in &self.components {
            for ((o, m), mu) in out.iter_mut().zip(&c.mean).zip(&mean) {
                *o += c.weight * (c.var + (m - mu) * (m - mu));
            }
        }
        out
    }

    /// Log density. `-inf` off the support of point masses.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim as f64;
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let r2 = crate::math::dist_sq(x, &c.mean);
                if c.var == 0.0 {
                    if r2 == 0.0 {
                        f64::INFINITY
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    ln(c.weight) - 0.5 * d * (LN_2PI + ln(c.var)) - 0.5 * r2 / c.var
                }
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Exponential tilt by a linear reward `r(z) = lambda . z`:
    /// weights scale by `exp(lambda . m + var |lambda|^2 / 2)`, means shift by `var * lambda`.
    pub fn tilted(&self, lambda: &[f64]) -> Result<Self> {
        if lambda.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: lambda.len(),
            });
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite);
        }
        let l2 = crate::math::norm_sq(lambda);
        let log_w: Vec<f64> = self
            .components
            .iter()
            .map(|c| ln(c.weight) + crate::math::dot(lambda, &c.mean) + 0.5 * c.var * l2)
            .collect();
        let means = self
            .components
            .iter()
            .map(|c| c.mean.iter().zip(lambda).map(|(m, l)| m + c.var * l).collect())
            .collect();
        let vars = self.components.iter().map(|c| c.var).collect();
        Self::from_log_weights(&log_w, means, vars)
    }

    /// `log E[exp(lambda . z)]` under this mixture.
    pub fn log_mgf(&self, lambda: &[f64]) -> f64 {
        let l2 = crate::math::norm_sq(lambda);
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| ln(c.weight) + crate::math::dot(lambda, &c.mean) + 0.5 * c.var * l2)
            .collect();
        log_sum_exp(&terms)
    }

    /// Draws one sample. Consumes one uniform and `dim` normals.
    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut chosen = self.components.len() - 1;
        for (k, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                chosen = k;
                break;
            }
        }
        let c = &self.components[chosen];
        let sd = sqrt(c.var);
        c.mean.iter().map(|m| m + sd * rng.normal()).collect()
    }

    pub fn sample_n(&self, n: usize, rng: &mut RngStream) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            out.extend(self.sample(rng));
        }
        out
    }

    /// CDF of a one-dimensional mixture.
    pub fn cdf_1d(&self, x: f64) -> Result<f64> {
        self.require_1d()?;
        Ok(self
            .components
            .iter()
            .map(|c| {
                let m = c.mean[0];
                let p = if c.var == 0.0 {
                    if x >= m {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    normal_cdf((x - m) / sqrt(c.var))
                };
                c.weight * p
            })
            .sum())
    }

    /// Quantile of a one-dimensional mixture by bisection on the CDF.
    pub fn quantile_1d(&self, p: f64) -> Result<f64> {
        self.require_1d()?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain("quantile level must lie in [0, 1]"));
        }
        let spread = self
            .components
            .iter()
            .map(|c| c.mean[0].abs() + 40.0 * sqrt(c.var))
            .fold(1.0, f64::max);
        let (mut lo, mut hi) = (-spread, spread);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf_1d(mid)? < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// The `n` mid-point quantiles `F^{-1}((i + 1/2) / n)`: a deterministic
    /// stand-in for an exact sample of size `n` in 1-D distance computations.
    pub fn quantile_grid_1d(&self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|i| self.quantile_1d((i as f64 + 0.5) / n as f64)).collect()
    }

    fn require_1d(&self) -> Result<()> {
        if self.dim != 1 {
            return Err(Error::Unsupported("operation requires a one-dimensional mixture"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_comp() -> GaussianMixture {
        GaussianMixture::new(vec![
            Component::new(0.3, vec![-1.0], 0.25),
            Component::new(0.7, vec![2.0], 0.5),
        ])
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(GaussianMixture::new(vec![]).is_err());
        assert!(GaussianMixture::new(vec![Component::new(0.5, vec![0.0], 1.0)]).is_err());
        assert!(GaussianMixture::new(vec![Component::new(1.0, vec![0.0], -1.0)]).is_err());
        assert!(GaussianMixture::new(vec![
            Component::new(0.5, vec![0.0], 1.0),
            Component::new(0.5, vec![0.0, 1.0], 1.0)
        ])
        .is_err());
        assert!(GaussianMixture::new(vec![Component::new(1.0, vec![0.0], 0.0)]).is_ok());
    }

    #[test]
    fn tilt_identity_and_gaussian() {
        let m = two_comp();
        let t = m.tilted(&[0.0]).unwrap();
        for (a, b) in m.components().iter().zip(t.components()) {
            assert!((a.weight - b.weight).abs() < 1e-15);
            assert_eq!(a.mean, b.mean);
        }
        let g = GaussianMixture::gaussian(vec![0.0, 0.0], 1.0).unwrap();
        let gt = g.tilted(&[1.0, 0.0]).unwrap();
        assert_eq!(gt.components()[0].mean, vec![1.0, 0.0]);
        assert_eq!(gt.components()[0].var, 1.0);
    }

    #[test]
    fn tilt_matches_trapezoid_integration() {
        // Oracle: integrate p(z) exp(lambda z) on a fine grid.
        let m = two_comp();
        let lambda = 0.8;
        let (lo, hi, n) = (-15.0, 20.0, 200_001);
        let h = (hi - lo) / (n - 1) as f64;
        let (mut z0, mut z1) = (0.0, 0.0);
        let mut mass_first = 0.0;
        for i in 0..n {
            let z = lo + h * i as f64;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let c = &m.components()[0];
            let pc = c.weight * exp(-0.5 * (z - c.mean[0]).powi(2) / c.var) / sqrt(2.0 * core::f64::consts::PI * c.var);
            let f = exp(m.log_density(&[z]) + lambda * z);
            z0 += w * f;
            z1 += w * f * z;
            mass_first += w * pc * exp(lambda * z);
        }
        let t = m.tilted(&[lambda]).unwrap();
        assert!((t.mean()[0] - z1 / z0).abs() < 1e-9);
        assert!((t.components()[0].weight - mass_first / z0).abs() < 1e-9);
        assert!((t.log_mgf(&[0.0])).abs() < 1e-12);
        assert!((m.log_mgf(&[lambda]) - ln(z0 * h)).abs() < 1e-9);
    }

    #[test]
    fn quantiles_invert_cdf() {
        let m = two_comp();
        for &p in &[0.01, 0.2, 0.5, 0.9, 0.999] {
            let q = m.quantile_1d(p).unwrap();
            assert!((m.cdf_1d(q).unwrap() - p).abs() < 1e-12);
        }
        let pm = GaussianMixture::new(vec![
            Component::new(0.5, vec![-1.0], 0.0),
            Component::new(0.5, vec![1.0], 0.0),
        ])
        .unwrap();
        assert!((pm.quantile_1d(0.25).unwrap() + 1.0).abs() < 1e-9);
        assert!((pm.quantile_1d(0.75).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn moments() {
        let m = two_comp();
        assert!((m.mean()[0] - (0.7 * 2.0 - 0.3)).abs() < 1e-15);
        let mu = m.mean()[0];
        let v = 0.3 * (0.25 + (-1.0 - mu).powi(2)) + 0.7 * (0.5 + (2.0 - mu).powi(2));
        assert!((m.variance_diag()[0] - v).abs() < 1e-14);
    }
}
