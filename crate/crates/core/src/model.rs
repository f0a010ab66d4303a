//! Flow models seen through their denoiser `D_t(x) = E[z | x_t = x]`.
//!
//! Velocity and score are affine reparameterizations of the denoiser:
//!
//! ```text
//! u_t(x)        = (sigma_dot / sigma) x + (alpha_dot - alpha sigma_dot / sigma) D_t(x)
//! grad log p_t  = (alpha D_t(x) - x) / sigma^2
//! ```
//!
//! [`FlowModel`] evaluates all of them in closed form for Gaussian-mixture data.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{dot, exp, ln};
use crate::mixture::{Component, GaussianMixture};
use crate::scheduler::{Scheduler, SchedulerPoint};
use crate::{Error, Result};

/// Anything that can act as the denoiser of a flow-matching model.
pub trait Denoiser: Sync {
    fn dim(&self) -> usize;

    fn scheduler(&self) -> Scheduler;

    /// Writes `D_t(x)` into `out`.
    fn denoise_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()>;

    fn denoise(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.denoise_into(x, t, &mut out)?;
        Ok(out)
    }

    /// `Cov[z | x_t = x] v`. Equivalently `(sigma_t^2 / alpha_t) J_D(x)^T v`,
    /// which stays finite at `alpha_t = 0`.
    fn posterior_cov_mul(&self, _x: &[f64], _t: f64, _v: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Unsupported(
            "posterior covariance is not available for this model",
        ))
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn scheduler(&self) -> Scheduler {
        (**self).scheduler()
    }
    fn denoise_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        (**self).denoise_into(x, t, out)
    }
    fn posterior_cov_mul(&self, x: &[f64], t: f64, v: &[f64]) -> Result<Vec<f64>> {
        (**self).posterior_cov_mul(x, t, v)
    }
}

pub(crate) fn check_input(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Velocity `u_t(x)` from the denoiser. Fails where `sigma_t = 0`.
pub fn velocity<M: Denoiser + ?Sized>(model: &M, x: &[f64], t: f64) -> Result<Vec<f64>> {
    let sched = model.scheduler();
    let p = sched.eval(t)?;
    if p.sigma == 0.0 {
        return Err(Error::SchedulerBoundary {
            scheduler: sched.name(),
            what: "sigma_t = 0, velocity coefficient sigma_dot / sigma diverges",
            t,
        });
    }
    let d = model.denoise(x, t)?;
    let (cx, cd) = velocity_coefficients(&p);
    Ok(x.iter().zip(&d).map(|(xi, di)| cx * xi + cd * di).collect())
}

/// Coefficients `(sigma_dot / sigma, alpha_dot - alpha sigma_dot / sigma)`.
pub(crate) fn velocity_coefficients(p: &SchedulerPoint) -> (f64, f64) {
    let r = p.d_sigma / p.sigma;
    (r, p.d_alpha - p.alpha * r)
}

/// Score `grad log p_t(x) = (alpha D - x) / sigma^2`, defined for `t < 1`.
pub fn score<M: Denoiser + ?Sized>(model: &M, x: &[f64], t: f64) -> Result<Vec<f64>> {
    let sched = model.scheduler();
    let p = sched.eval(t)?;
    if p.sigma == 0.0 {
        return Err(Error::SchedulerBoundary {
            scheduler: sched.name(),
            what: "sigma_t = 0, score undefined",
            t,
        });
    }
    let d = model.denoise(x, t)?;
    let s2 = p.sigma * p.sigma;
    Ok(x.iter().zip(&d).map(|(xi, di)| (p.alpha * di - xi) / s2).collect())
}

/// Recovers the denoiser from a velocity sample: `(sigma u - sigma_dot x) / (alpha_dot sigma - alpha sigma_dot)`.
pub fn denoiser_from_velocity(sched: Scheduler, u: &[f64], x: &[f64], t: f64) -> Result<Vec<f64>> {
    let p = sched.eval(t)?;
    let den = p.d_alpha * p.sigma - p.alpha * p.d_sigma;
    Ok(u.iter()
        .zip(x)
        .map(|(ui, xi)| (p.sigma * ui - p.d_sigma * xi) / den)
        .collect())
}

/// Velocity from the score: `(alpha_dot / alpha) x + (nu^2 / 2) score`.
pub fn velocity_from_score(sched: Scheduler, score: &[f64], x: &[f64], t: f64) -> Result<Vec<f64>> {
    let p = sched.eval(t)?;
    let nu2 = sched.nu_squared(t)?;
    Ok(x.iter()
        .zip(score)
        .map(|(xi, si)| p.d_alpha / p.alpha * xi + 0.5 * nu2 * si)
        .collect())
}

/// Wraps a velocity field `u_t(x)` as a denoiser, the way a trained network is used.
pub struct FromVelocity<F> {
    pub field: F,
    pub sched: Scheduler,
    pub dim: usize,
}

impl<F> Denoiser for FromVelocity<F>
where
    F: Fn(&[f64], f64) -> Result<Vec<f64>> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn scheduler(&self) -> Scheduler {
        self.sched
    }
    fn denoise_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let u = (self.field)(x, t)?;
        let d = denoiser_from_velocity(self.sched, &u, x, t)?;
        out.copy_from_slice(&d);
        Ok(())
    }
}

/// Classifier-free guidance settings: conditional mixtures and weight `w >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CfgSpec {
    pub conditionals: BTreeMap<String, GaussianMixture>,
    pub weight: f64,
}

/// Ground-truth flow model over Gaussian-mixture data.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel {
    mixture: GaussianMixture,
    sched: Scheduler,
    cfg: Option<CfgSpec>,
}

impl FlowModel {
    pub fn new(mixture: GaussianMixture, sched: Scheduler) -> Self {
        Self {
            mixture,
            sched,
            cfg: None,
        }
    }

    pub fn with_cfg(mut self, cfg: CfgSpec) -> Result<Self> {
        if !(cfg.weight >= 0.0) || !cfg.weight.is_finite() {
            return Err(Error::Config("guidance weight must be finite and >= 0".into()));
        }
        for (label, m) in &cfg.conditionals {
            if m.dim() != self.mixture.dim() {
                return Err(Error::Config(alloc::format!(
                    "conditional `{label}` has dimension {} (expected {})",
                    m.dim(),
                    self.mixture.dim()
                )));
            }
        }
        self.cfg = Some(cfg);
        Ok(self)
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }

    pub fn cfg(&self) -> Option<&CfgSpec> {
        self.cfg.as_ref()
    }

    /// The marginal `p_t` as a mixture: means `alpha m_k`, variances `alpha^2 s_k^2 + sigma^2`.
    pub fn marginal(&self, t: f64) -> Result<GaussianMixture> {
        let p = self.sched.eval(t)?;
        GaussianMixture::new(
            self.mixture
                .components()
                .iter()
                .map(|c| {
                    Component::new(
                        c.weight,
                        c.mean.iter().map(|m| p.alpha * m).collect(),
                        p.alpha * p.alpha * c.var + p.sigma * p.sigma,
                    )
                })
                .collect(),
        )
    }

    /// Exact posterior `p_{1|t}(. | x)` as a Gaussian mixture.
    pub fn posterior(&self, x: &[f64], t: f64) -> Result<GaussianMixture> {
        check_input(x, self.dim())?;
        let p = self.sched.eval(t)?;
        mixture_posterior(&self.mixture, &p, x)
    }

    /// Reward-tilted data distribution for `r(z) = lambda . z`.
    pub fn tilted(&self, lambda: &[f64]) -> Result<GaussianMixture> {
        self.mixture.tilted(lambda)
    }

    /// `V_t(x) = log E[exp(lambda . z) | x_t = x]`, exact.
    pub fn value_function_exact(&self, x: &[f64], t: f64, lambda: &[f64]) -> Result<f64> {
        if lambda.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: lambda.len(),
            });
        }
        Ok(self.posterior(x, t)?.log_mgf(lambda))
    }

    /// Log density of the marginal `p_t`.
    pub fn log_density(&self, x: &[f64], t: f64) -> Result<f64> {
        Ok(self.marginal(t)?.log_density(x))
    }

    /// The model restricted to a class label, with guidance weight applied.
    pub fn conditional<'a>(&'a self, label: &str) -> Result<CfgModel<'a>> {
        let cfg = self.cfg.as_ref().ok_or(Error::NoGuidanceConfig)?;
        let cond = cfg
            .conditionals
            .get(label)
            .ok_or_else(|| Error::UnknownLabel(label.into()))?;
        Ok(CfgModel {
            base: self,
            cond,
            weight: cfg.weight,
        })
    }

    /// `(1 + w) u_t(x | c) - w u_t(x)`.
    pub fn cfg_velocity(&self, x: &[f64], t: f64, label: &str) -> Result<Vec<f64>> {
        velocity(&self.conditional(label)?, x, t)
    }
}

impl Denoiser for FlowModel {
    fn dim(&self) -> usize {
        self.mixture.dim()
    }

    fn scheduler(&self) -> Scheduler {
        self.sched
    }

    fn denoise_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_input(x, self.dim())?;
        let p = self.sched.eval(t)?;
        mixture_denoise_into(&self.mixture, &p, x, out);
        Ok(())
    }

    fn posterior_cov_mul(&self, x: &[f64], t: f64, v: &[f64]) -> Result<Vec<f64>> {
        check_input(x, self.dim())?;
        let p = self.sched.eval(t)?;
        Ok(mixture_posterior_cov_mul(&self.mixture, &p, x, v))
    }
}

/// A labelled view of a [`FlowModel`] whose denoiser is `(1 + w) D(x | c) - w D(x)`.
///
/// Velocity is affine in the denoiser with label-independent coefficients, so
/// guiding denoisers is the same as guiding velocities.
#[derive(Debug, Clone, Copy)]
pub struct CfgModel<'a> {
    base: &'a FlowModel,
    cond: &'a GaussianMixture,
    weight: f64,
}

impl Denoiser for CfgModel<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn scheduler(&self) -> Scheduler {
        self.base.sched
    }

    fn denoise_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_input(x, self.dim())?;
        let p = self.base.sched.eval(t)?;
        let mut unc = vec![0.0; x.len()];
        mixture_denoise_into(self.cond, &p, x, out);
        mixture_denoise_into(&self.base.mixture, &p, x, &mut unc);
        for (o, u) in out.iter_mut().zip(&unc) {
            *o = (1.0 + self.weight) * *o - self.weight * u;
        }
        Ok(())
    }

    fn posterior_cov_mul(&self, x: &[f64], t: f64, v: &[f64]) -> Result<Vec<f64>> {
        check_input(x, self.dim())?;
        let p = self.base.sched.eval(t)?;
        let c = mixture_posterior_cov_mul(self.cond, &p, x, v);
        let u = mixture_posterior_cov_mul(&self.base.mixture, &p, x, v);
        Ok(c.iter()
            .zip(&u)
            .map(|(a, b)| (1.0 + self.weight) * a - self.weight * b)
            .collect())
    }
}

/// Per-component posterior quantities at `x`:
/// log responsibility (unnormalized), shrinkage `a_k` and posterior variance.
#[inline]
fn component_update(c: &Component, p: &SchedulerPoint, x: &[f64]) -> (f64, f64, f64) {
    let s2 = p.sigma * p.sigma;
    let v = p.alpha * p.alpha * c.var + s2;
    let r2: f64 = x
        .iter()
        .zip(&c.mean)
        .map(|(xi, mi)| {
            let e = xi - p.alpha * mi;
            e * e
        })
        .sum();
    let d = x.len() as f64;
    let log_w = ln(c.weight) - 0.5 * d * ln(v) - 0.5 * r2 / v;
    (log_w, p.alpha * c.var / v, c.var * s2 / v)
}

/// Posterior mean by a single-pass log-space softmax accumulation.
pub(crate) fn mixture_denoise_into(mix: &GaussianMixture, p: &SchedulerPoint, x: &[f64], out: &mut [f64]) {
    if p.sigma == 0.0 {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi / p.alpha;
        }
        return;
    }
    let mut max = f64::NEG_INFINITY;
    let mut total = 0.0;
    out.iter_mut().for_each(|o| *o = 0.0);
    for c in mix.components() {
        let (lw, a, _) = component_update(c, p, x);
        let e = if lw > max {
            let scale = exp(max - lw);
            total *= scale;
            out.iter_mut().for_each(|o| *o *= scale);
            max = lw;
            1.0
        } else {
            exp(lw - max)
        };
        total += e;
        for ((o, xi), mi) in out.iter_mut().zip(x).zip(&c.mean) {
            *o += e * (mi + a * (xi - p.alpha * mi));
        }
    }
    out.iter_mut().for_each(|o| *o /= total);
}

pub(crate) fn mixture_posterior(mix: &GaussianMixture, p: &SchedulerPoint, x: &[f64]) -> Result<GaussianMixture> {
    if p.sigma == 0.0 {
        return Ok(GaussianMixture::point_mass(x.iter().map(|xi| xi / p.alpha).collect()));
    }
    let mut log_w = Vec::with_capacity(mix.len());
    let mut means = Vec::with_capacity(mix.len());
    let mut vars = Vec::with_capacity(mix.len());
    for c in mix.components() {
        let (lw, a, v) = component_update(c, p, x);
        log_w.push(lw);
        means.push(
            x.iter()
                .zip(&c.mean)
                .map(|(xi, mi)| mi + a * (xi - p.alpha * mi))
                .collect(),
        );
        vars.push(v);
    }
    GaussianMixture::from_log_weights(&log_w, means, vars)
}

pub(crate) fn mixture_posterior_cov_mul(mix: &GaussianMixture, p: &SchedulerPoint, x: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    if p.sigma == 0.0 {
        return out;
    }
    let post = match mixture_posterior(mix, p, x) {
        Ok(m) => m,
        Err(_) => return out,
    };
    let mean = post.mean();
    for c in post.components() {
        let dev: Vec<f64> = c.mean.iter().zip(&mean).map(|(m, d)| m - d).collect();
        let proj = dot(&dev, v);
        for ((o, vi), di) in out.iter_mut().zip(v).zip(&dev) {
            *o += c.weight * (c.var * vi + di * proj);
        }
    }
    out
}
