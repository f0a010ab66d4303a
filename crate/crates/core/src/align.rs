//! Inference-time reward alignment: reward guidance, Feynman-Kac steering,
//! Best-of-N and Monte-Carlo value estimation.
//!
//! Guidance is expressed as a tilted denoiser
//! `D^r_t(x) = D_t(x) + beta_t Cov[z | x] grad r(D_t(x))`, which is exact for a
//! single Gaussian and a linear reward. Since `J_D = (alpha / sigma^2) Cov`,
//! substituting `D^r` into the velocity adds `(nu^2 / 2) grad_x [beta_t r(D_t(x))]`,
//! and substituting it into the GLASS velocity adds the same term weighted by
//! `w2(s)` at the reparameterized time `t*`.

use alloc::vec;
use alloc::vec::Vec;

use crate::glass::{glass_velocity, GlassParams, InnerSchedule};
use crate::math::{exp, ln, log_mean_exp, log_sum_exp};
use crate::model::{check_input, velocity, Denoiser};
use crate::reward::Reward;
use crate::rng::RngStream;
use crate::sampler::{initial_noise, propagate, sample_from, sample_one, Method, SampleBatch, SamplerConfig};
use crate::scheduler::Scheduler;
use crate::{Error, Result};

/// Time mask applied to a guidance strength.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BetaMask {
    None,
    /// `beta_t = 0` for `lo <= t <= hi`.
    ZeroInside {
        lo: f64,
        hi: f64,
    },
    /// `beta_t = 0` outside `[lo, hi]`.
    ZeroOutside {
        lo: f64,
        hi: f64,
    },
}

/// Constant guidance strength with an optional window.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaSchedule {
    pub value: f64,
    pub mask: BetaMask,
}

impl BetaSchedule {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            mask: BetaMask::None,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn at(&self, t: f64) -> f64 {
        let masked = match self.mask {
            BetaMask::None => false,
            BetaMask::ZeroInside { lo, hi } => (lo..=hi).contains(&t),
            BetaMask::ZeroOutside { lo, hi } => !(lo..=hi).contains(&t),
        };
        if masked {
            0.0
        } else {
            self.value
        }
    }
}

/// A denoiser tilted towards a reward.
pub struct GuidedModel<'a, M: ?Sized> {
    base: &'a M,
    reward: &'a Reward,
    beta: BetaSchedule,
}

impl<'a, M: Denoiser + ?Sized> GuidedModel<'a, M> {
    pub fn new(base: &'a M, reward: &'a Reward, beta: BetaSchedule) -> Self {
        Self { base, reward, beta }
    }
}

impl<M: Denoiser + ?Sized> Denoiser for GuidedModel<'_, M> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn scheduler(&self) -> Scheduler {
        self.base.scheduler()
    }

    fn denoise_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self.base.denoise_into(x, t, out)?;
        let beta = self.beta.at(t);
        if beta == 0.0 {
            return Ok(());
        }
        let g = self.reward.grad(out);
        let shift = self.base.posterior_cov_mul(x, t, &g)?;
        for (o, s) in out.iter_mut().zip(&shift) {
            *o += beta * s;
        }
        Ok(())
    }

    fn posterior_cov_mul(&self, x: &[f64], t: f64, v: &[f64]) -> Result<Vec<f64>> {
        self.base.posterior_cov_mul(x, t, v)
    }
}

/// `grad_x [beta_t r(D_t(x))] = beta_t (alpha_t / sigma_t^2) Cov[z | x] grad r(D_t(x))`.
pub fn guidance_gradient<M: Denoiser + ?Sized>(
    model: &M,
    x: &[f64],
    t: f64,
    reward: &Reward,
    beta: &BetaSchedule,
) -> Result<Vec<f64>> {
    let sched = model.scheduler();
    let p = sched.eval(t)?;
    if p.sigma == 0.0 {
        return Err(Error::SchedulerBoundary {
            scheduler: sched.name(),
            what: "sigma_t = 0, denoiser Jacobian undefined",
            t,
        });
    }
    let d = model.denoise(x, t)?;
    let g = reward.grad(&d);
    let c = model.posterior_cov_mul(x, t, &g)?;
    let k = beta.at(t) * p.alpha / (p.sigma * p.sigma);
    Ok(c.iter().map(|v| k * v).collect())
}

/// `u_t(x) + (nu_t^2 / 2) grad_x [beta_t r(D_t(x))]`.
pub fn ode_guided_velocity<M: Denoiser + ?Sized>(
    model: &M,
    x: &[f64],
    t: f64,
    reward: &Reward,
    beta: &BetaSchedule,
) -> Result<Vec<f64>> {
    velocity(&GuidedModel::new(model, reward, *beta), x, t)
}

/// GLASS velocity of the tilted denoiser; the guidance strength is read at `t*`.
#[allow(clippy::too_many_arguments)]
pub fn glass_guided_velocity<M: Denoiser + ?Sized>(
    model: &M,
    params: &GlassParams,
    inner: &InnerSchedule,
    x_t: &[f64],
    x_bar: &[f64],
    s: f64,
    reward: &Reward,
    beta: &BetaSchedule,
) -> Result<Vec<f64>> {
    glass_velocity(&GuidedModel::new(model, reward, *beta), params, inner, x_t, x_bar, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Potential {
    /// `exp(lambda [r(D_{t'}(x_{t'})) - r(D_t(x_t))])`.
    Difference,
    /// `exp(lambda [r(x_{t'}) - r(x_t)])`, rewards applied to noisy states.
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Resampling {
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FksConfig {
    pub particles: usize,
    pub potential: Potential,
    pub lambda_temp: f64,
    pub resampling: Resampling,
    /// Resample only when `ESS < threshold * K'`. `None` resamples every transition.
    pub ess_threshold: Option<f64>,
}

impl Default for FksConfig {
    fn default() -> Self {
        Self {
            particles: 64,
            potential: Potential::Difference,
            lambda_temp: 1.0,
            resampling: Resampling::Multinomial,
            ess_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FksDiagnostics {
    /// ESS before resampling, per transition.
    pub ess: Vec<f64>,
    pub resampled: Vec<bool>,
    pub mean_reward: Vec<f64>,
    pub max_reward: Vec<f64>,
    /// Parent index of every particle, per transition.
    pub genealogy: Vec<Vec<usize>>,
    /// Model evaluations per particle spent on proposals.
    pub proposal_nfe: usize,
    /// Model evaluations per particle spent on potentials.
    pub potential_nfe: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FksOutput {
    pub samples: SampleBatch,
    pub log_weights: Vec<f64>,
    pub diagnostics: FksDiagnostics,
}

/// Stream reserved for resampling draws; block `k` serves transition `k`.
const RESAMPLE_STREAM: u64 = u64::MAX;

/// `(sum w)^2 / sum w^2` from log-weights.
pub fn ess_from_log_weights(log_w: &[f64]) -> f64 {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (s1, s2) = log_w.iter().fold((0.0, 0.0), |(a, b), &l| {
        let w = exp(l - max);
        (a + w, b + w * w)
    });
    s1 * s1 / s2
}

/// Ancestor indices drawn from normalized weights.
pub fn resample(weights: &[f64], kind: Resampling, rng: &mut RngStream) -> Vec<usize> {
    let n = weights.len();
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cum.push(acc);
    }
    let pick = |u: f64| cum.partition_point(|&c| c <= u * acc).min(n - 1);
    match kind {
        Resampling::Multinomial => (0..n).map(|_| pick(rng.uniform())).collect(),
        Resampling::Systematic => {
            let u0 = rng.uniform();
            (0..n).map(|j| pick((u0 + j as f64) / n as f64)).collect()
        }
    }
}

fn potential_reward<M: Denoiser + ?Sized>(
    model: &M,
    reward: &Reward,
    kind: Potential,
    x: &[f64],
    t: f64,
) -> Result<(f64, usize)> {
    match kind {
        Potential::Noisy => Ok((reward.eval(x), 0)),
        Potential::Difference if t == 1.0 => Ok((reward.eval(x), 0)),
        Potential::Difference => Ok((reward.eval(&model.denoise(x, t)?), 1)),
    }
}

/// Feynman-Kac steering with `K'` particles between the configured transition
/// times. Particle `j` uses RNG stream `j`, so one particle reproduces plain
/// sampling.
pub fn fks_run<M: Denoiser + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    reward: &Reward,
    fks: &FksConfig,
) -> Result<FksOutput> {
    cfg.validate()?;
    if fks.particles == 0 {
        return Err(Error::Config("at least one particle is required".into()));
    }
    if !matches!(cfg.method, Method::SdeDdpm | Method::Glass) {
        return Err(Error::Config("FKS proposals must be `sde` or `glass`".into()));
    }
    if !fks.lambda_temp.is_finite() {
        return Err(Error::Config("lambda_temp must be finite".into()));
    }
    let grid = cfg.transition_grid()?;
    let kp = fks.particles;
    let dim = model.dim();
    let mut xs: Vec<Vec<f64>> = (0..kp as u64).map(|j| initial_noise(cfg, dim, j)).collect();
    let mut diag = FksDiagnostics {
        proposal_nfe: cfg.nfe()?,
        ..FksDiagnostics::default()
    };
    let mut r_prev = Vec::with_capacity(kp);
    for x in &xs {
        let (r, nfe) = potential_reward(model, reward, fks.potential, x, grid[0])?;
        if r.is_nan() {
            return Err(Error::NanReward);
        }
        r_prev.push(r);
        diag.potential_nfe = nfe;
    }
    let mut log_w = vec![0.0; kp];

    for (k, w) in grid.windows(2).enumerate() {
        let (t, tp) = (w[0], w[1]);
        let mut r_new = Vec::with_capacity(kp);
        for (j, x) in xs.iter_mut().enumerate() {
            *x = propagate(model, cfg, x, t, tp, j as u64, k as u64 + 1).map_err(|e| match e {
                Error::AtStep { step, source, .. } => Error::AtStep {
                    transition: k,
                    step,
                    source,
                },
                other => other.at_step(k, 0),
            })?;
            let (r, nfe) = potential_reward(model, reward, fks.potential, x, tp)?;
            if j == 0 {
                diag.potential_nfe += nfe;
            }
            let lg = fks.lambda_temp * (r - r_prev[j]);
            if !lg.is_finite() {
                return Err(Error::NonFinitePotential {
                    particle: j,
                    transition: k,
                });
            }
            log_w[j] += lg;
            r_new.push(r);
        }
        let ess = ess_from_log_weights(&log_w);
        diag.ess.push(ess);
        diag.mean_reward.push(r_new.iter().sum::<f64>() / kp as f64);
        diag.max_reward
            .push(r_new.iter().copied().fold(f64::NEG_INFINITY, f64::max));

        let trigger = fks.ess_threshold.is_none_or(|th| ess < th * kp as f64);
        if trigger {
            let lse = log_sum_exp(&log_w);
            let weights: Vec<f64> = log_w.iter().map(|l| exp(l - lse)).collect();
            let mut rng = RngStream::at_block(cfg.seed, RESAMPLE_STREAM, k as u64);
            let parents = resample(&weights, fks.resampling, &mut rng);
            xs = parents.iter().map(|&a| xs[a].clone()).collect();
            r_prev = parents.iter().map(|&a| r_new[a]).collect();
            log_w.iter_mut().for_each(|l| *l = 0.0);
            diag.genealogy.push(parents);
        } else {
            r_prev = r_new;
            diag.genealogy.push((0..kp).collect());
        }
        diag.resampled.push(trigger);
    }

    Ok(FksOutput {
        samples: SampleBatch::from_rows(xs, dim, diag.proposal_nfe),
        log_weights: log_w,
        diagnostics: diag,
    })
}

/// Highest-reward sample among `n_candidates` independent paths; ties go to
/// the lowest candidate index. Candidate `c` of draw `index` uses stream
/// `index * n_candidates + c`. Returns the sample and the winning index.
pub fn best_of_n<M: Denoiser + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    reward: &Reward,
    n_candidates: usize,
    index: u64,
) -> Result<(Vec<f64>, usize)> {
    if n_candidates == 0 {
        return Err(Error::Config("n_candidates must be >= 1".into()));
    }
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    for c in 0..n_candidates {
        let x = sample_one(model, cfg, index * n_candidates as u64 + c as u64)?;
        let r = reward.eval(&x);
        if r.is_nan() {
            return Err(Error::NanReward);
        }
        if best.as_ref().is_none_or(|(b, _, _)| r > *b) {
            best = Some((r, x, c));
        }
    }
    let (_, x, c) = best.expect("n_candidates >= 1");
    Ok((x, c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueEstimate {
    pub value: f64,
    pub rewards: Vec<f64>,
}

/// `log mean exp r(z_i)` over `n` posterior draws `z_i ~ p_{1|t}(. | x)` produced
/// by the configured sampler between `t` and 1.
pub fn estimate_value<M: Denoiser + ?Sized>(
    model: &M,
    x: &[f64],
    t: f64,
    reward: &Reward,
    cfg: &SamplerConfig,
    n_samples: usize,
) -> Result<ValueEstimate> {
    check_input(x, model.dim())?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain("value estimation needs 0 < t < 1"));
    }
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be >= 1".into()));
    }
    let draws = sample_from(model, cfg, x, t, 1.0, n_samples)?;
    let rewards: Vec<f64> = draws.rows().map(|z| reward.eval(z)).collect();
    if rewards.iter().any(|r| r.is_nan()) {
        return Err(Error::NanReward);
    }
    Ok(ValueEstimate {
        value: log_mean_exp(&rewards),
        rewards,
    })
}

/// Log-weights `log w_i = lambda_temp r(x_i) - log Z` normalizing a sample set towards
/// the tilt; useful for diagnostics.
pub fn normalized_log_weights(rewards: &[f64], lambda_temp: f64) -> Vec<f64> {
    let lw: Vec<f64> = rewards.iter().map(|r| lambda_temp * r).collect();
    let lse = log_sum_exp(&lw);
    lw.iter().map(|l| l - lse).collect()
}

/// `ln` of the ESS fraction `ESS / K'`.
pub fn log_ess_fraction(log_w: &[f64]) -> f64 {
    ln(ess_from_log_weights(log_w) / log_w.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glass::glass_params;
    use crate::mixture::{Component, GaussianMixture};
    use crate::model::{velocity_coefficients, FlowModel};
    use crate::sampler::{sample, RhoPolicy};

    fn gmm3() -> GaussianMixture {
        GaussianMixture::new(vec![
            Component::new(0.3, vec![-2.0], 0.09),
            Component::new(0.45, vec![0.5], 0.16),
            Component::new(0.25, vec![2.5], 0.04),
        ])
        .unwrap()
    }

    #[test]
    fn beta_windows() {
        let b = BetaSchedule {
            value: 2.0,
            mask: BetaMask::ZeroInside { lo: 0.2, hi: 0.7 },
        };
        assert_eq!(
            (b.at(0.1), b.at(0.2), b.at(0.5), b.at(0.7), b.at(0.9)),
            (2.0, 0.0, 0.0, 0.0, 2.0)
        );
        let b = BetaSchedule {
            value: 2.0,
            mask: BetaMask::ZeroOutside { lo: 0.2, hi: 0.7 },
        };
        assert_eq!((b.at(0.1), b.at(0.5), b.at(0.9)), (0.0, 2.0, 0.0));
    }

    #[test]
    fn zero_beta_is_plain() {
        let model = FlowModel::new(gmm3(), Scheduler::CondOt);
        let r = Reward::Linear(vec![1.3]);
        let z = BetaSchedule::zero();
        assert_eq!(
            ode_guided_velocity(&model, &[0.4], 0.3, &r, &z).unwrap(),
            velocity(&model, &[0.4], 0.3).unwrap()
        );
        let p = glass_params(Scheduler::CondOt, 0.5, 0.2, 0.7, 1.0).unwrap();
        let inner = p.inner();
        assert_eq!(
            glass_guided_velocity(&model, &p, &inner, &[0.4], &[0.1], 0.6, &r, &z).unwrap(),
            glass_velocity(&model, &p, &inner, &[0.4], &[0.1], 0.6).unwrap()
        );
    }

    #[test]
    fn guidance_gradient_matches_finite_differences() {
        let model = FlowModel::new(gmm3(), Scheduler::Cosine);
        let beta = BetaSchedule::constant(0.7);
        for r in [
            Reward::Linear(vec![1.1]),
            Reward::Quadratic {
                target: vec![1.0],
                tau: 0.5,
            },
        ] {
            for &(x, t) in &[(0.3, 0.4), (-1.5, 0.7), (2.2, 0.2)] {
                let g = guidance_gradient(&model, &[x], t, &r, &beta).unwrap()[0];
                let f = |y: f64| 0.7 * r.eval(&model.denoise(&[y], t).unwrap());
                let h = 1e-5;
                let fd = (f(x + h) - f(x - h)) / (2.0 * h);
                assert!((g - fd).abs() < 1e-5 * fd.abs().max(1.0), "{g} vs {fd}");
            }
        }
    }

    #[test]
    fn ode_guidance_term_is_half_nu_squared_times_gradient() {
        let model = FlowModel::new(gmm3(), Scheduler::CondOt);
        let r = Reward::Quadratic {
            target: vec![0.5],
            tau: 0.3,
        };
        let beta = BetaSchedule::constant(1.5);
        for &(x, t) in &[(0.3, 0.4), (-1.5, 0.7)] {
            let guided = ode_guided_velocity(&model, &[x], t, &r, &beta).unwrap()[0];
            let plain = velocity(&model, &[x], t).unwrap()[0];
            let nu2 = Scheduler::CondOt.nu_squared(t).unwrap();
            let g = guidance_gradient(&model, &[x], t, &r, &beta).unwrap()[0];
            assert!((guided - plain - 0.5 * nu2 * g).abs() < 1e-10);
            let (_, cd) = velocity_coefficients(&Scheduler::CondOt.eval(t).unwrap());
            assert!(cd.is_finite());
        }
    }

    #[test]
    fn tilted_denoiser_is_exact_for_gaussian_linear() {
        let (m, v) = (0.4, 0.8);
        let model = FlowModel::new(GaussianMixture::gaussian(vec![m], v).unwrap(), Scheduler::CondOt);
        let lambda = [1.3];
        let r = Reward::Linear(lambda.to_vec());
        let tilted = FlowModel::new(model.tilted(&lambda).unwrap(), Scheduler::CondOt);
        let g = GuidedModel::new(&model, &r, BetaSchedule::constant(1.0));
        for &(x, t) in &[(0.3, 0.2), (-1.0, 0.6), (2.0, 0.9)] {
            let a = g.denoise(&[x], t).unwrap()[0];
            let b = tilted.denoise(&[x], t).unwrap()[0];
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ess_and_resampling() {
        assert_eq!(ess_from_log_weights(&[0.0; 16]), 16.0);
        assert!((ess_from_log_weights(&[0.0, -1e4, -1e4]) - 1.0).abs() < 1e-12);
        let mut rng = RngStream::new(1, 0);
        let w = [0.1, 0.0, 0.6, 0.3];
        for kind in [Resampling::Multinomial, Resampling::Systematic] {
            let a = resample(&w, kind, &mut rng);
            assert_eq!(a.len(), 4);
            assert!(a.iter().all(|&i| i < 4 && i != 1));
        }
        let a = resample(&[1.0, 0.0, 0.0], Resampling::Systematic, &mut rng);
        assert_eq!(a, vec![0, 0, 0]);
    }

    #[test]
    fn single_particle_is_plain_sampling() {
        let model = FlowModel::new(gmm3(), Scheduler::CondOt);
        let cfg = SamplerConfig::glass(4, 3, RhoPolicy::Ddpm, 17);
        let fks = FksConfig {
            particles: 1,
            ..FksConfig::default()
        };
        let out = fks_run(&model, &cfg, &Reward::Linear(vec![1.0]), &fks).unwrap();
        assert_eq!(out.samples.data, sample(&model, &cfg, 1).unwrap().data);
    }

    #[test]
    fn constant_reward_keeps_full_ess() {
        let model = FlowModel::new(gmm3(), Scheduler::CondOt);
        let cfg = SamplerConfig::glass(3, 3, RhoPolicy::Ddpm, 2);
        let fks = FksConfig {
            particles: 16,
            ..FksConfig::default()
        };
        let out = fks_run(&model, &cfg, &Reward::Constant(4.0), &fks).unwrap();
        assert!(out.diagnostics.ess.iter().all(|&e| e == 16.0));
    }

    #[test]
    fn shift_leaves_genealogy_unchanged() {
        let model = FlowModel::new(gmm3(), Scheduler::CondOt);
        let cfg = SamplerConfig::sde(4, 5);
        let cfg = SamplerConfig { transitions: 4, ..cfg };
        let fks = FksConfig {
            particles: 32,
            ..FksConfig::default()
        };
        let r = Reward::Linear(vec![0.8]);
        let a = fks_run(&model, &cfg, &r, &fks).unwrap();
        let b = fks_run(&model, &cfg, &r.clone().shifted(3.0), &fks).unwrap();
        assert_eq!(a.diagnostics.genealogy, b.diagnostics.genealogy);
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn non_finite_potential_is_reported() {
        let model = FlowModel::new(gmm3(), Scheduler::CondOt);
        let cfg = SamplerConfig::glass(2, 2, RhoPolicy::Ddpm, 0);
        let r = Reward::custom(|z| if z[0] > 0.0 { f64::INFINITY } else { 0.0 });
        let fks = FksConfig {
            particles: 64,
            ..FksConfig::default()
        };
        assert!(matches!(
            fks_run(&model, &cfg, &r, &fks),
            Err(Error::NonFinitePotential { .. })
        ));
    }

    #[test]
    fn best_of_n_basics() {
        let model = FlowModel::new(gmm3(), Scheduler::CondOt);
        let cfg = SamplerConfig::glass(2, 4, RhoPolicy::Ddpm, 8);
        let r = Reward::Linear(vec![1.0]);
        let (x, c) = best_of_n(&model, &cfg, &r, 1, 5).unwrap();
        assert_eq!((x, c), (sample_one(&model, &cfg, 5).unwrap(), 0));
        let a = best_of_n(&model, &cfg, &r, 8, 2).unwrap();
        assert_eq!(a, best_of_n(&model, &cfg, &r, 8, 2).unwrap());
        let (_, c) = best_of_n(&model, &cfg, &Reward::Constant(0.0), 8, 2).unwrap();
        assert_eq!(c, 0);
    }

    #[test]
    fn value_estimate_of_zero_reward_is_zero() {
        let model = FlowModel::new(gmm3(), Scheduler::CondOt);
        let cfg = SamplerConfig::glass(1, 4, RhoPolicy::Fixed(0.0), 1);
        let v = estimate_value(&model, &[0.2], 0.3, &Reward::Constant(0.0), &cfg, 50).unwrap();
        assert_eq!(v.value, 0.0);
        let nan = Reward::custom(|_| f64::NAN);
        assert_eq!(
            estimate_value(&model, &[0.2], 0.3, &nan, &cfg, 5),
            Err(Error::NanReward)
        );
        assert!(estimate_value(&model, &[0.2], 0.0, &nan, &cfg, 5).is_err());
    }

    #[test]
    fn value_estimate_overflow_safe() {
        let model = FlowModel::new(gmm3(), Scheduler::CondOt);
        let cfg = SamplerConfig::glass(1, 4, RhoPolicy::Fixed(0.0), 1);
        let r = Reward::Linear(vec![400.0]);
        let v = estimate_value(&model, &[0.2], 0.3, &r, &cfg, 50).unwrap();
        assert!(v.value.is_finite() && v.value > 0.0);
    }
}
