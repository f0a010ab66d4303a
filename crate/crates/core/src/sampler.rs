//! Outer ODE and SDE samplers, the multi-transition GLASS sampler, and the
//! one-step DDIM transition.
//!
//! Every sample owns an RNG stream keyed by its index. Block 0 of that stream
//! holds the initial noise and block `k + 1` the noise of transition `k`, so a
//! sample never depends on how the batch is split across threads.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::glass::{ddpm_rho, inner_denoise, GlassParams, DEFAULT_SIGMA_BAR0};
use crate::math::sqrt;
use crate::model::{check_input, velocity, velocity_coefficients, Denoiser, FlowModel};
use crate::rng::RngStream;
use crate::scheduler::Scheduler;
use crate::{Error, Result};

/// Time clamp for the SDE at both ends of `[0, 1]`.
pub const SDE_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Ode,
    #[cfg_attr(feature = "serde", serde(rename = "sde"))]
    SdeDdpm,
    Glass,
    Ddim,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ode => "ode",
            Method::SdeDdpm => "sde",
            Method::Glass => "glass",
            Method::Ddim => "ddim",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ode" => Ok(Method::Ode),
            "sde" | "sde_ddpm" | "ddpm" => Ok(Method::SdeDdpm),
            "glass" => Ok(Method::Glass),
            "ddim" => Ok(Method::Ddim),
            other => Err(Error::Config(alloc::format!("unknown method `{other}`"))),
        }
    }
}

/// How the correlation of each GLASS transition is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RhoPolicy {
    /// The DDPM correlation of each `(t, t')` pair.
    Ddpm,
    Fixed(f64),
}

impl RhoPolicy {
    pub fn rho(self, sched: Scheduler, t: f64, t_prime: f64) -> Result<f64> {
        match self {
            RhoPolicy::Ddpm => ddpm_rho(sched, t, t_prime),
            RhoPolicy::Fixed(r) => Ok(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SamplerConfig {
    pub method: Method,
    /// Steps per transition (`M`). For a single ODE/SDE transition this is the total.
    pub steps: usize,
    /// Number of transitions `K`, used when `transition_times` is not given.
    pub transitions: usize,
    /// Explicit grid `0 = t_0 < ... < t_K = 1`.
    pub transition_times: Option<Vec<f64>>,
    pub rho_policy: RhoPolicy,
    pub sigma_bar0: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: Method::Glass,
            steps: 10,
            transitions: 5,
            transition_times: None,
            rho_policy: RhoPolicy::Ddpm,
            sigma_bar0: DEFAULT_SIGMA_BAR0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn ode(steps: usize, seed: u64) -> Self {
        Self {
            method: Method::Ode,
            steps,
            transitions: 1,
            seed,
            ..Self::default()
        }
    }

    pub fn sde(steps: usize, seed: u64) -> Self {
        Self {
            method: Method::SdeDdpm,
            ..Self::ode(steps, seed)
        }
    }

    pub fn glass(transitions: usize, steps: usize, rho_policy: RhoPolicy, seed: u64) -> Self {
        Self {
            method: Method::Glass,
            steps,
            transitions,
            rho_policy,
            seed,
            ..Self::default()
        }
    }

    pub fn ddim(transitions: usize, rho_policy: RhoPolicy, seed: u64) -> Self {
        Self {
            method: Method::Ddim,
            steps: 1,
            ..Self::glass(transitions, 1, rho_policy, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if !(self.sigma_bar0 > 0.0) || !self.sigma_bar0.is_finite() {
            return Err(Error::Config("sigma_bar0 must be positive".into()));
        }
        if let RhoPolicy::Fixed(r) = self.rho_policy {
            if !(-1.0..=1.0).contains(&r) {
                return Err(Error::Config("fixed rho must lie in [-1, 1]".into()));
            }
        }
        self.transition_grid().map(|_| ())
    }

    /// The transition times, explicit or uniform.
    pub fn transition_grid(&self) -> Result<Vec<f64>> {
        match &self.transition_times {
            Some(ts) => {
                let ok = ts.len() >= 2 && ts[0] == 0.0 && ts[ts.len() - 1] == 1.0 && ts.windows(2).all(|w| w[0] < w[1]);
                if !ok {
                    return Err(Error::Config(
                        "transition_times must increase strictly from 0 to 1".into(),
                    ));
                }
                Ok(ts.clone())
            }
            None => {
                if self.transitions == 0 {
                    return Err(Error::Config("transitions must be >= 1".into()));
                }
                let k = self.transitions;
                Ok((0..=k)
                    .map(|i| if i == k { 1.0 } else { i as f64 / k as f64 })
                    .collect())
            }
        }
    }

    /// Model evaluations per sample path.
    pub fn nfe(&self) -> Result<usize> {
        let k = self.transition_grid()?.len() - 1;
        Ok(match self.method {
            Method::Ddim => k,
            _ => k * self.steps,
        })
    }

    /// GLASS parameters for the transition `t -> t'` under this config.
    pub fn glass_params(&self, sched: Scheduler, t: f64, t_prime: f64) -> Result<GlassParams> {
        let rho = self.rho_policy.rho(sched, t, t_prime)?;
        GlassParams::new(sched, rho, t, t_prime, self.sigma_bar0)
    }
}

/// `n` samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub data: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    /// Model evaluations per sample.
    pub nfe: usize,
}

impl SampleBatch {
    pub fn from_rows(rows: Vec<Vec<f64>>, dim: usize, nfe: usize) -> Self {
        let n = rows.len();
        Self {
            data: rows.into_iter().flatten().collect(),
            n,
            dim,
            nfe,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// One coordinate across all samples.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

fn tag(e: Error, transition: usize, step: usize) -> Error {
    match e {
        Error::AtStep { step, source, .. } => Error::AtStep {
            transition,
            step,
            source,
        },
        other => other.at_step(transition, step),
    }
}

fn check_segment(t0: f64, t1: f64, steps: usize) -> Result<f64> {
    if steps == 0 {
        return Err(Error::domain("at least one step is required"));
    }
    if !(0.0..1.0).contains(&t0) || !(t0 < t1 && t1 <= 1.0) {
        return Err(Error::domain("segment times must satisfy 0 <= t0 < t1 <= 1"));
    }
    Ok((t1 - t0) / steps as f64)
}

/// Euler integration of the probability-flow ODE from `t0` to `t1`, in place.
pub fn ode_segment<M: Denoiser + ?Sized>(model: &M, x: &mut [f64], t0: f64, t1: f64, steps: usize) -> Result<()> {
    let h = check_segment(t0, t1, steps)?;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let u = velocity(model, x, t).map_err(|e| tag(e, 0, i))?;
        for (xi, ui) in x.iter_mut().zip(&u) {
            *xi += h * ui;
        }
    }
    Ok(())
}

/// Euler-Maruyama for the time-reversal SDE from `t0` to `t1`, in place.
///
/// Drift `u + (nu^2 / 2) score`, diffusion `nu`, both scaled by `nu_scale`.
/// Integration is confined to `[SDE_EPS, 1 - SDE_EPS]`: a step starting below
/// `SDE_EPS` is a plain ODE step, and when `t1 = 1` the last step stops at
/// `1 - SDE_EPS` and then jumps to the denoiser output there. The jump's
/// evaluation is not counted in the NFE.
pub fn sde_segment<M: Denoiser + ?Sized>(
    model: &M,
    x: &mut [f64],
    t0: f64,
    t1: f64,
    steps: usize,
    nu_scale: f64,
    rng: &mut RngStream,
) -> Result<()> {
    let h = check_segment(t0, t1, steps)?;
    let sched = model.scheduler();
    let mut noise = vec![0.0; x.len()];
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let step = |x: &mut [f64], noise: &mut [f64], rng: &mut RngStream| -> Result<()> {
            if t < SDE_EPS {
                let u = velocity(model, x, t)?;
                x.iter_mut().zip(&u).for_each(|(xi, ui)| *xi += h * ui);
                return Ok(());
            }
            let last = t1 == 1.0 && i + 1 == steps;
            // The final step ends at the clamp.
            let h = if last { (1.0 - SDE_EPS - t).max(0.0) } else { h };
            if h > 0.0 {
                let te = t.min(1.0 - SDE_EPS);
                let d = model.denoise(x, te)?;
                let p = sched.eval(te)?;
                let (cx, cd) = velocity_coefficients(&p);
                let nu2 = sched.nu_squared(te)? * nu_scale * nu_scale;
                let k = 0.5 * nu2 / (p.sigma * p.sigma);
                let sd = sqrt(h * nu2);
                rng.fill_normal(noise);
                for ((xi, di), ni) in x.iter_mut().zip(&d).zip(noise.iter()) {
                    let u = cx * *xi + cd * di;
                    let drift = u + k * (p.alpha * di - *xi);
                    *xi += h * drift + sd * ni;
                }
            }
            if last {
                let d = model.denoise(x, 1.0 - SDE_EPS)?;
                x.copy_from_slice(&d);
            }
            Ok(())
        };
        step(x, &mut noise, rng).map_err(|e| tag(e, 0, i))?;
    }
    Ok(())
}

/// One GLASS transition: `M` Euler steps of the inner flow from
/// `x_bar_0 = gamma_bar x_t + sigma_bar0 eps`.
pub fn glass_transition<M: Denoiser + ?Sized>(
    model: &M,
    params: &GlassParams,
    x_t: &[f64],
    eps: &[f64],
    steps: usize,
) -> Result<Vec<f64>> {
    glass_transition_observed(model, params, x_t, eps, steps, |_, _| {})
}

/// [`glass_transition`] calling `observe(j, x_bar)` after step `j` (at `s = j / M`).
///
/// Each Euler step is taken in the equivalent form
/// `x_bar_{s+h} = gamma_bar x_t + alpha_bar_{s+h} D + sigma_bar_{s+h} eps_hat`
/// with `eps_hat = (x_bar_s - gamma_bar x_t - alpha_bar_s D) / sigma_bar_s`,
/// which stays finite when `sigma_bar_1 = 0`. At `s = 0` the noise estimate is
/// the injected `eps` itself.
pub fn glass_transition_observed<M, F>(
    model: &M,
    params: &GlassParams,
    x_t: &[f64],
    eps: &[f64],
    steps: usize,
    mut observe: F,
) -> Result<Vec<f64>>
where
    M: Denoiser + ?Sized,
    F: FnMut(usize, &[f64]),
{
    if steps == 0 {
        return Err(Error::domain("at least one inner step is required"));
    }
    check_input(x_t, model.dim())?;
    check_input(eps, model.dim())?;
    let inner = params.inner();
    let g = params.gamma_bar;
    let p0 = inner.eval(0.0);
    let mut xb: Vec<f64> = x_t.iter().zip(eps).map(|(x, e)| g * x + p0.sigma * e).collect();
    let mut eps_hat = eps.to_vec();
    for j in 0..steps {
        let s = j as f64 / steps as f64;
        let s_next = (j + 1) as f64 / steps as f64;
        let d = inner_denoise(model, params, &inner, x_t, &xb, s).map_err(|e| tag(e, 0, j))?;
        let p = inner.eval(s);
        if p.alpha != 0.0 {
            if !(p.sigma > 0.0) {
                return Err(tag(Error::InnerSingularity { s }, 0, j));
            }
            for (((e, xbi), xti), di) in eps_hat.iter_mut().zip(&xb).zip(x_t).zip(&d) {
                *e = (xbi - g * xti - p.alpha * di) / p.sigma;
            }
        }
        let q = inner.eval(s_next);
        for (((xbi, xti), di), e) in xb.iter_mut().zip(x_t).zip(&d).zip(&eps_hat) {
            *xbi = g * xti + q.alpha * di + q.sigma * e;
        }
        observe(j + 1, &xb);
    }
    Ok(xb)
}

/// One-step transition `gamma_bar x_t + alpha_bar D_t(x_t) + sigma_bar eps`.
pub fn step_ddim<M: Denoiser + ?Sized>(
    model: &M,
    params: &GlassParams,
    x_t: &[f64],
    noise: &[f64],
) -> Result<Vec<f64>> {
    check_input(noise, model.dim())?;
    let d = model.denoise(x_t, params.t)?;
    Ok(x_t
        .iter()
        .zip(&d)
        .zip(noise)
        .map(|((x, di), e)| params.gamma_bar * x + params.alpha_bar * di + params.sigma_bar * e)
        .collect())
}

/// Exact draws from the transition law: `z ~ p_{1|t}(. | x_t)`, then
/// `x_{t'} = alpha_bar z + gamma_bar x_t + sigma_bar eps`. Row-major `n x d`.
pub fn sample_transition_kernel_exact(
    model: &FlowModel,
    params: &GlassParams,
    x_t: &[f64],
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let post = model.posterior(x_t, params.t)?;
    let mut out = Vec::with_capacity(n * x_t.len());
    for _ in 0..n {
        let z = post.sample(rng);
        for (zi, xi) in z.iter().zip(x_t) {
            out.push(params.alpha_bar * zi + params.gamma_bar * xi + params.sigma_bar * rng.normal());
        }
    }
    Ok(out)
}

/// Advances one sample from `(x, t)` to `t'` with the configured method, using
/// block `block` of stream `stream`.
pub fn propagate<M: Denoiser + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    x: &[f64],
    t: f64,
    t_prime: f64,
    stream: u64,
    block: u64,
) -> Result<Vec<f64>> {
    check_input(x, model.dim())?;
    let mut rng = RngStream::at_block(cfg.seed, stream, block);
    match cfg.method {
        Method::Ode => {
            let mut y = x.to_vec();
            ode_segment(model, &mut y, t, t_prime, cfg.steps)?;
            Ok(y)
        }
        Method::SdeDdpm => {
            let mut y = x.to_vec();
            sde_segment(model, &mut y, t, t_prime, cfg.steps, 1.0, &mut rng)?;
            Ok(y)
        }
        Method::Glass => {
            let params = cfg.glass_params(model.scheduler(), t, t_prime)?;
            let eps = rng.normal_vec(model.dim());
            glass_transition(model, &params, x, &eps, cfg.steps)
        }
        Method::Ddim => {
            let params = cfg.glass_params(model.scheduler(), t, t_prime)?;
            let eps = rng.normal_vec(model.dim());
            step_ddim(model, &params, x, &eps).map_err(|e| tag(e, 0, 0))
        }
    }
}

/// Initial noise `X_0 ~ N(0, I)` of sample `index`.
pub fn initial_noise(cfg: &SamplerConfig, dim: usize, index: u64) -> Vec<f64> {
    RngStream::at_block(cfg.seed, index, 0).normal_vec(dim)
}

/// Full path of sample `index` from noise at `t = 0` to data at `t = 1`.
pub fn sample_one<M: Denoiser + ?Sized>(model: &M, cfg: &SamplerConfig, index: u64) -> Result<Vec<f64>> {
    let grid = cfg.transition_grid()?;
    let mut x = initial_noise(cfg, model.dim(), index);
    for (k, w) in grid.windows(2).enumerate() {
        x = propagate(model, cfg, &x, w[0], w[1], index, k as u64 + 1).map_err(|e| tag(e, k, 0))?;
    }
    Ok(x)
}

/// `n` samples with the configured method, sequentially.
pub fn sample<M: Denoiser + ?Sized>(model: &M, cfg: &SamplerConfig, n: usize) -> Result<SampleBatch> {
    cfg.validate()?;
    let rows = (0..n as u64)
        .map(|i| sample_one(model, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch::from_rows(rows, model.dim(), cfg.nfe()?))
}

fn require(cfg: &SamplerConfig, method: Method) -> Result<()> {
    if cfg.method != method {
        return Err(Error::Config(alloc::format!(
            "sampler called with method `{}`, expected `{}`",
            cfg.method,
            method
        )));
    }
    Ok(())
}

pub fn sample_ode<M: Denoiser + ?Sized>(model: &M, cfg: &SamplerConfig, n: usize) -> Result<SampleBatch> {
    require(cfg, Method::Ode)?;
    sample(model, cfg, n)
}

pub fn sample_sde_ddpm<M: Denoiser + ?Sized>(model: &M, cfg: &SamplerConfig, n: usize) -> Result<SampleBatch> {
    require(cfg, Method::SdeDdpm)?;
    sample(model, cfg, n)
}

pub fn sample_glass<M: Denoiser + ?Sized>(model: &M, cfg: &SamplerConfig, n: usize) -> Result<SampleBatch> {
    require(cfg, Method::Glass)?;
    sample(model, cfg, n)
}

/// `n` draws of `X_{t'}` given a fixed `x_t` (e.g. posterior sampling with `t' = 1`).
/// Draw `i` uses stream `i`, block 1.
pub fn sample_from<M: Denoiser + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    x_t: &[f64],
    t: f64,
    t_prime: f64,
    n: usize,
) -> Result<SampleBatch> {
    cfg.validate()?;
    let rows = (0..n as u64)
        .map(|i| propagate(model, cfg, x_t, t, t_prime, i, 1))
        .collect::<Result<Vec<_>>>()?;
    let nfe = if cfg.method == Method::Ddim { 1 } else { cfg.steps };
    Ok(SampleBatch::from_rows(rows, model.dim(), nfe))
}

/// Summary label for reports, e.g. `glass(K=5, M=10, rho=ddpm)`.
pub fn describe(cfg: &SamplerConfig) -> String {
    let k = cfg.transition_grid().map(|g| g.len() - 1).unwrap_or(cfg.transitions);
    match cfg.method {
        Method::Ode | Method::SdeDdpm => alloc::format!("{}(K={k}, M={})", cfg.method, cfg.steps),
        Method::Glass | Method::Ddim => {
            let rho = match cfg.rho_policy {
                RhoPolicy::Ddpm => String::from("ddpm"),
                RhoPolicy::Fixed(r) => alloc::format!("{r}"),
            };
            alloc::format!("{}(K={k}, M={}, rho={rho})", cfg.method, cfg.steps)
        }
    }
}
