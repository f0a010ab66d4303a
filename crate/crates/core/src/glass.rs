//! Gaussian-coupled transitions and the inner flow that samples them.
//!
//! Given `x_t` and a later time `t'`, the pair `(X_t, X_{t'})` is modelled per
//! coordinate as `N(z mu, Sigma)` with `mu = (alpha_t, alpha_{t'})` and
//! correlation `rho`. Conditioning on `x_t` gives
//! `X_{t'} | x_t, z ~ N(alpha_bar z + gamma_bar x_t, sigma_bar^2 I)`.
//!
//! The inner path `X_bar_s = alpha_bar_s z + gamma_bar x_t + sigma_bar_s eps` runs
//! from `N(gamma_bar x_t, sigma_bar0^2)` at `s = 0` to the transition law at
//! `s = 1`. Its velocity needs `E[z | x_t, x_bar_s]`, which is a two-measurement
//! posterior mean; the sufficient statistic reduces it to the model's own
//! denoiser evaluated at time `t*`.

use alloc::vec::Vec;

use crate::math::sqrt;
use crate::mixture::GaussianMixture;
use crate::model::{check_input, Denoiser, FlowModel};
use crate::scheduler::Scheduler;
use crate::{Error, Result};

/// Parameters of one transition `t -> t'` with correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlassParams {
    pub rho: f64,
    pub t: f64,
    pub t_prime: f64,
    pub gamma_bar: f64,
    pub alpha_bar: f64,
    pub sigma_bar: f64,
    pub sigma_bar0: f64,
    pub alpha_t: f64,
    pub sigma_t: f64,
}

/// Default initial inner noise scale.
pub const DEFAULT_SIGMA_BAR0: f64 = 1.0;

impl GlassParams {
    pub fn new(sched: Scheduler, rho: f64, t: f64, t_prime: f64, sigma_bar0: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::domain("correlation must lie in [-1, 1]"));
        }
        if !(0.0..1.0).contains(&t) || !(t < t_prime && t_prime <= 1.0) {
            return Err(Error::domain("transition times must satisfy 0 <= t < t' <= 1"));
        }
        if !(sigma_bar0 > 0.0) || !sigma_bar0.is_finite() {
            return Err(Error::domain("initial inner noise scale must be positive"));
        }
        let p = sched.eval(t)?;
        let q = sched.eval(t_prime)?;
        let gamma_bar = rho * q.sigma / p.sigma;
        Ok(Self {
            rho,
            t,
            t_prime,
            gamma_bar,
            alpha_bar: q.alpha - gamma_bar * p.alpha,
            sigma_bar: q.sigma * sqrt((1.0 - rho * rho).max(0.0)),
            sigma_bar0,
            alpha_t: p.alpha,
            sigma_t: p.sigma,
        })
    }

    /// The CondOT inner schedule for these parameters.
    pub fn inner(&self) -> InnerSchedule {
        InnerSchedule::CondOt {
            alpha_bar: self.alpha_bar,
            sigma_bar: self.sigma_bar,
            sigma_bar0: self.sigma_bar0,
        }
    }
}

/// Shorthand for [`GlassParams::new`].
pub fn glass_params(sched: Scheduler, rho: f64, t: f64, t_prime: f64, sigma_bar0: f64) -> Result<GlassParams> {
    GlassParams::new(sched, rho, t, t_prime, sigma_bar0)
}

/// The correlation that makes the transition equal to the DDPM (time-reversal SDE) transition:
/// `rho = alpha_t sigma_{t'} / (sigma_t alpha_{t'})`.
pub fn ddpm_rho(sched: Scheduler, t: f64, t_prime: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) || !(t < t_prime && t_prime <= 1.0) {
        return Err(Error::domain("transition times must satisfy 0 <= t < t' <= 1"));
    }
    let p = sched.eval(t)?;
    let q = sched.eval(t_prime)?;
    if q.alpha == 0.0 || p.sigma == 0.0 {
        return Err(Error::domain(
            "DDPM correlation undefined for alpha_{t'} = 0 or sigma_t = 0",
        ));
    }
    Ok(p.alpha * q.sigma / (p.sigma * q.alpha))
}

/// Inner schedulers `(alpha_bar_s, sigma_bar_s)` on `s in [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSchedule {
    /// `alpha_bar_s = s alpha_bar`, `sigma_bar_s = (1 - s) sigma_bar0 + s sigma_bar`.
    CondOt {
        alpha_bar: f64,
        sigma_bar: f64,
        sigma_bar0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerPoint {
    pub alpha: f64,
    pub sigma: f64,
    pub d_alpha: f64,
    pub d_sigma: f64,
}

impl InnerSchedule {
    pub fn eval(&self, s: f64) -> InnerPoint {
        match *self {
            InnerSchedule::CondOt {
                alpha_bar,
                sigma_bar,
                sigma_bar0,
            } => InnerPoint {
                alpha: s * alpha_bar,
                sigma: (1.0 - s) * sigma_bar0 + s * sigma_bar,
                d_alpha: alpha_bar,
                d_sigma: sigma_bar - sigma_bar0,
            },
        }
    }
}

/// Velocity weights `(w1, w2, w3)` at inner time `s`.
pub fn inner_weights(params: &GlassParams, inner: &InnerSchedule, s: f64) -> Result<[f64; 3]> {
    let p = inner.eval(s);
    if !(p.sigma > 0.0) {
        return Err(Error::InnerSingularity { s });
    }
    let w1 = p.d_sigma / p.sigma;
    Ok([w1, p.d_alpha - p.alpha * w1, -params.gamma_bar * w1])
}

/// Two correlated Gaussian measurements of one latent coordinate:
/// `(X_1, X_2) ~ N(z mu, Sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPairMeasurement {
    pub mu: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianPairMeasurement {
    pub fn new(mu: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        let m = Self { mu, cov };
        if mu.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if cov[0][1] != cov[1][0] {
            return Err(Error::domain("covariance must be symmetric"));
        }
        let det = m.det();
        if !(cov[0][0] > 0.0) || !(det > 0.0) {
            return Err(Error::SingularCovariance { det });
        }
        Ok(m)
    }

    pub fn det(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    /// `mu^T Sigma^{-1}` via the adjugate.
    pub fn precision_weights(&self) -> [f64; 2] {
        let det = self.det();
        let [m1, m2] = self.mu;
        let c = &self.cov;
        [(m1 * c[1][1] - m2 * c[1][0]) / det, (m2 * c[0][0] - m1 * c[0][1]) / det]
    }

    /// `mu^T Sigma^{-1} mu`: the precision of the equivalent single measurement.
    pub fn information(&self) -> f64 {
        let w = self.precision_weights();
        w[0] * self.mu[0] + w[1] * self.mu[1]
    }

    /// Coefficients `(c_1, c_2)` with `S(x) = c_1 x_1 + c_2 x_2`.
    pub fn statistic_weights(&self) -> Result<[f64; 2]> {
        let info = self.information();
        if !(info > 0.0) {
            return Err(Error::NoInformation);
        }
        let w = self.precision_weights();
        Ok([w[0] / info, w[1] / info])
    }

    /// `S(x) = mu^T Sigma^{-1} x / (mu^T Sigma^{-1} mu)`, applied coordinate-wise.
    pub fn sufficient_statistic(&self, x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
        if x1.len() != x2.len() {
            return Err(Error::Dimension {
                expected: x1.len(),
                got: x2.len(),
            });
        }
        let [c1, c2] = self.statistic_weights()?;
        Ok(x1.iter().zip(x2).map(|(a, b)| c1 * a + c2 * b).collect())
    }
}

/// `t* = g^{-1}(1 / (mu^T Sigma^{-1} mu))`: the time at which one measurement
/// of the path carries the same information as the pair.
pub fn t_star(sched: Scheduler, m: &GaussianPairMeasurement) -> Result<f64> {
    let info = m.information();
    if !(info > 0.0) {
        return Err(Error::NoInformation);
    }
    sched.noise_scale_inverse(1.0 / info)
}

/// Posterior mean of `z` given both measurements, through the model's denoiser:
/// `D_{t*}(alpha_{t*} S(x))`.
pub fn glass_denoiser<M: Denoiser + ?Sized>(
    model: &M,
    m: &GaussianPairMeasurement,
    x1: &[f64],
    x2: &[f64],
) -> Result<Vec<f64>> {
    let ts = t_star(model.scheduler(), m)?;
    let alpha = model.scheduler().eval(ts)?.alpha;
    let s = m.sufficient_statistic(x1, x2)?;
    let y: Vec<f64> = s.iter().map(|v| alpha * v).collect();
    model.denoise(&y, ts)
}

/// Mean scale and covariance of `(X_t, X_bar_s)` given `z`.
pub fn inner_measurement(params: &GlassParams, inner: &InnerSchedule, s: f64) -> Result<GaussianPairMeasurement> {
    let p = inner.eval(s);
    let st2 = params.sigma_t * params.sigma_t;
    let g = params.gamma_bar;
    GaussianPairMeasurement::new(
        [params.alpha_t, p.alpha + g * params.alpha_t],
        [[st2, st2 * g], [st2 * g, p.sigma * p.sigma + g * g * st2]],
    )
}

/// `E[z | x_t, x_bar_s]`. Where `alpha_bar_s = 0` the inner state is `gamma_bar x_t`
/// plus independent noise and adds nothing, so this is exactly `D_t(x_t)`.
pub fn inner_denoise<M: Denoiser + ?Sized>(
    model: &M,
    params: &GlassParams,
    inner: &InnerSchedule,
    x_t: &[f64],
    x_bar: &[f64],
    s: f64,
) -> Result<Vec<f64>> {
    if inner.eval(s).alpha == 0.0 {
        return model.denoise(x_t, params.t);
    }
    let m = inner_measurement(params, inner, s)?;
    glass_denoiser(model, &m, x_t, x_bar)
}

/// Inner velocity `w1 x_bar + w2 D_{mu(s), Sigma(s)}(x_t, x_bar) + w3 x_t`.
pub fn glass_velocity<M: Denoiser + ?Sized>(
    model: &M,
    params: &GlassParams,
    inner: &InnerSchedule,
    x_t: &[f64],
    x_bar: &[f64],
    s: f64,
) -> Result<Vec<f64>> {
    check_input(x_t, model.dim())?;
    check_input(x_bar, model.dim())?;
    let [w1, w2, w3] = inner_weights(params, inner, s)?;
    let d = inner_denoise(model, params, inner, x_t, x_bar, s)?;
    Ok(x_bar
        .iter()
        .zip(&d)
        .zip(x_t)
        .map(|((xb, di), xt)| w1 * xb + w2 * di + w3 * xt)
        .collect())
}

/// `t*(s)` at the `m_steps + 1` grid points `s = i / m_steps`, skipping the
/// singular endpoint when `sigma_bar = 0`.
pub fn t_star_trace(sched: Scheduler, params: &GlassParams, m_steps: usize) -> Result<Vec<(f64, f64)>> {
    let inner = params.inner();
    let mut out = Vec::with_capacity(m_steps + 1);
    for i in 0..=m_steps {
        let s = i as f64 / m_steps as f64;
        if inner.eval(s).sigma == 0.0 {
            continue;
        }
        let m = inner_measurement(params, &inner, s)?;
        out.push((s, t_star(sched, &m)?));
    }
    Ok(out)
}

/// Closed-form inner marginal `p_s(. | x_t)` for mixture data:
/// `sum_k w_k(x_t) N(alpha_bar_s m_k + gamma_bar x_t, alpha_bar_s^2 s_k^2 + sigma_bar_s^2)`
/// with the posterior components `(w_k, m_k, s_k^2)` of `p_{1|t}(. | x_t)`.
pub fn inner_marginal(model: &FlowModel, params: &GlassParams, x_t: &[f64], s: f64) -> Result<GaussianMixture> {
    let post = model.posterior(x_t, params.t)?;
    let p = params.inner().eval(s);
    let comps = post
        .components()
        .iter()
        .map(|c| crate::mixture::Component {
            weight: c.weight,
            mean: c
                .mean
                .iter()
                .zip(x_t)
                .map(|(m, x)| p.alpha * m + params.gamma_bar * x)
                .collect(),
            var: p.alpha * p.alpha * c.var + p.sigma * p.sigma,
        })
        .collect();
    rebuild(comps)
}

/// Closed-form transition law `p_{t'|t}(. | x_t)`; the `s = 1` inner marginal.
pub fn transition_mixture(model: &FlowModel, params: &GlassParams, x_t: &[f64]) -> Result<GaussianMixture> {
    inner_marginal(model, params, x_t, 1.0)
}

/// Closed-form DDPM transition `p_{t'|t}(. | x_t)`, computed by Bayes on the
/// forward noising kernel `X_t | X_{t'} ~ N((alpha_t / alpha_{t'}) X_{t'}, b^2)`,
/// `b^2 = sigma_t^2 - (alpha_t / alpha_{t'})^2 sigma_{t'}^2`.
pub fn ddpm_transition_mixture(model: &FlowModel, t: f64, t_prime: f64, x_t: &[f64]) -> Result<GaussianMixture> {
    let sched = model.scheduler();
    let p = sched.eval(t)?;
    let q = sched.eval(t_prime)?;
    if !(t < t_prime) {
        return Err(Error::domain("need t < t'"));
    }
    let post = model.posterior(x_t, t)?;
    if q.sigma == 0.0 {
        return Ok(post);
    }
    if q.alpha == 0.0 {
        return Err(Error::domain("DDPM transition undefined for alpha_{t'} = 0"));
    }
    let a = p.alpha / q.alpha;
    let b2 = p.sigma * p.sigma - a * a * q.sigma * q.sigma;
    let sq2 = q.sigma * q.sigma;
    let prec = a * a / b2 + 1.0 / sq2;
    let cz = q.alpha / sq2 / prec;
    let comps = post
        .components()
        .iter()
        .map(|c| crate::mixture::Component {
            weight: c.weight,
            mean: c
                .mean
                .iter()
                .zip(x_t)
                .map(|(m, x)| (a * x / b2) / prec + cz * m)
                .collect(),
            var: 1.0 / prec + cz * cz * c.var,
        })
        .collect();
    rebuild(comps)
}

fn rebuild(comps: Vec<crate::mixture::Component>) -> Result<GaussianMixture> {
    let log_w: Vec<f64> = comps.iter().map(|c| crate::math::ln(c.weight)).collect();
    let (means, vars) = comps.into_iter().map(|c| (c.mean, c.var)).unzip();
    GaussianMixture::from_log_weights(&log_w, means, vars)
}
