//! Rayon drivers. Every item derives its randomness from its own index, so
//! results are bit-identical to the sequential functions in `glassflow_core`.

use glassflow_core::align::{fks_run, FksConfig, FksOutput};
use glassflow_core::sampler::{propagate, sample_one, SampleBatch, SamplerConfig};
use glassflow_core::{Denoiser, Result, Reward};
use rayon::prelude::*;

/// `n` full sample paths.
pub fn sample<M: Denoiser + ?Sized>(model: &M, cfg: &SamplerConfig, n: usize) -> Result<SampleBatch> {
    cfg.validate()?;
    let rows = (0..n as u64)
        .into_par_iter()
        .map(|i| sample_one(model, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch::from_rows(rows, model.dim(), cfg.nfe()?))
}

/// `n` draws of `X_{t'}` from a fixed `x_t`; draw `i` matches `sampler::sample_from`.
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
        .into_par_iter()
        .map(|i| propagate(model, cfg, x_t, t, t_prime, i, 1))
        .collect::<Result<Vec<_>>>()?;
    let nfe = if cfg.method == glassflow_core::Method::Ddim {
        1
    } else {
        cfg.steps
    };
    Ok(SampleBatch::from_rows(rows, model.dim(), nfe))
}

/// Independent FKS runs; run `r` uses seed `derive_seed(cfg.seed, r)`.
pub fn fks_runs<M: Denoiser + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    reward: &Reward,
    fks: &FksConfig,
    runs: usize,
) -> Result<Vec<FksOutput>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let c = SamplerConfig {
                seed: glassflow_core::rng::derive_seed(cfg.seed, r),
                ..cfg.clone()
            };
            fks_run(model, &c, reward, fks)
        })
        .collect()
}

/// Maps `f` over `0..n` in parallel, keeping order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}
