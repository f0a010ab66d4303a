//! The desk-scale experiment suite. Each experiment turns a resolved
//! [`ExperimentConfig`] into long-format result rows; the `cell`-level
//! functions are public so tests can drive single grid points.

use glassflow_core::metrics::{energy_distance, energy_distance_to_mixture_1d, w2_to_mixture_1d, SampleSet};
use glassflow_core::rng::{derive_seed, RngStream};
use glassflow_core::{FlowModel, GaussianMixture, Reward, SampleBatch};
use serde_json::Value;

use crate::config::{Experiment, ExperimentConfig, Metric};
use crate::io::ResultRow;

pub mod ddim_equiv;
pub mod fks;
pub mod guidance;
pub mod posterior_sweep;
pub mod sampling_compare;
pub mod value_corr;

/// Everything an experiment produces besides the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<ResultRow>,
    /// Written to `diagnostics.json` when present.
    pub diagnostics: Option<Value>,
    /// Named sample sets, written when `write_samples` is set.
    pub samples: Vec<(String, SampleBatch)>,
    /// False when a pass/fail experiment failed.
    pub passed: bool,
}

pub fn run(cfg: &ExperimentConfig, model: &FlowModel, reward: &Reward) -> anyhow::Result<Outcome> {
    match cfg.experiment {
        Experiment::PosteriorSweep => posterior_sweep::run(cfg, model),
        Experiment::ValueCorr => value_corr::run(cfg, model, reward),
        Experiment::SamplingCompare => sampling_compare::run(cfg, model, reward),
        Experiment::Fks => fks::run(cfg, model, reward),
        Experiment::Guidance => guidance::run(cfg, model, reward),
        Experiment::DdimEquiv => ddim_equiv::run(cfg, model),
    }
}

/// `n` exact draws from `mix`, row-major.
pub fn exact_draws(mix: &GaussianMixture, n: usize, seed: u64) -> Vec<f64> {
    mix.sample_n(n, &mut RngStream::new(seed, 0))
}

/// Distance from samples to a mixture: closed forms in 1-D, sample-based otherwise.
pub fn distance_to_mixture(
    metric: Metric,
    data: &[f64],
    dim: usize,
    mix: &GaussianMixture,
    seed: u64,
) -> anyhow::Result<f64> {
    let n = data.len() / dim;
    Ok(match (metric, dim) {
        (Metric::W2, 1) => w2_to_mixture_1d(data, mix, n)?,
        (Metric::Energy, 1) => energy_distance_to_mixture_1d(data, mix)?,
        (Metric::W2, _) => anyhow::bail!("metric `w2` needs 1-D data (got dimension {dim})"),
        (Metric::Energy, _) => {
            let reference = SampleSet::new(exact_draws(mix, n, seed), dim, "exact")?;
            energy_distance(&SampleSet::new(data.to_vec(), dim, "samples")?, &reference)?
        }
    })
}

/// Noised test points `x = alpha_t z + sigma_t eps`, `z` from the data mixture.
pub fn noised_points(model: &FlowModel, t: f64, count: usize, seed: u64) -> anyhow::Result<Vec<Vec<f64>>> {
    let p = glassflow_core::Denoiser::scheduler(model).eval(t)?;
    let seed = derive_seed(seed, 0x6e6f_6973);
    Ok((0..count as u64)
        .map(|i| {
            let mut rng = RngStream::new(seed, i);
            let z = model.mixture().sample(&mut rng);
            z.iter().map(|zi| p.alpha * zi + p.sigma * rng.normal()).collect()
        })
        .collect())
}

pub fn metric_name(metric: Metric) -> &'static str {
    match metric {
        Metric::W2 => "w2",
        Metric::Energy => "energy",
    }
}

pub fn mean_reward(batch: &SampleBatch, reward: &Reward) -> f64 {
    let s: f64 = batch.rows().map(|x| reward.eval(x)).sum();
    s / batch.n as f64
}
