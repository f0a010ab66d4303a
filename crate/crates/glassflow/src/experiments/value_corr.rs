//! Value-function estimation against the closed form for linear rewards.

use glassflow_core::align::estimate_value;
use glassflow_core::metrics::{mse, pearson};
use glassflow_core::rng::derive_seed;
use glassflow_core::{FlowModel, Method, Reward, SamplerConfig};

use super::posterior_sweep::posterior_sampler;
use super::{noised_points, Outcome};
use crate::config::ExperimentConfig;
use crate::io::ResultRow;
use crate::parallel;

#[derive(Debug, Clone, PartialEq)]
pub struct ValueCell {
    pub estimates: Vec<f64>,
    pub exact: Vec<f64>,
    pub corr: f64,
    pub mse: f64,
}

/// Estimates at `points` with `samples` posterior draws of `M = m` steps each.
#[allow(clippy::too_many_arguments)]
pub fn value_cell(
    model: &FlowModel,
    method: Method,
    t: f64,
    m: usize,
    points: &[Vec<f64>],
    samples: usize,
    lambda: &[f64],
    seed: u64,
) -> anyhow::Result<ValueCell> {
    let reward = Reward::Linear(lambda.to_vec());
    let base = posterior_sampler(method, m, seed)?;
    let estimates = parallel::map_indexed(points.len(), |p| {
        let cfg = SamplerConfig {
            seed: derive_seed(seed, p as u64),
            ..base.clone()
        };
        estimate_value(model, &points[p], t, &reward, &cfg, samples).map(|v| v.value)
    })?;
    let exact = points
        .iter()
        .map(|x| model.value_function_exact(x, t, lambda))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ValueCell {
        corr: pearson(&estimates, &exact)?,
        mse: mse(&estimates, &exact)?,
        estimates,
        exact,
    })
}

pub fn run(cfg: &ExperimentConfig, model: &FlowModel, reward: &Reward) -> anyhow::Result<Outcome> {
    let lambda = reward
        .linear_lambda()
        .ok_or_else(|| anyhow::anyhow!("reward: value_corr needs a linear reward (exact value function)"))?;
    let mut rows = Vec::new();
    for (ti, &t) in cfg.grid.t.iter().enumerate() {
        if t <= 0.0 {
            anyhow::bail!("grid.t: value estimation needs t > 0");
        }
        let points = noised_points(model, t, cfg.points, derive_seed(cfg.seed, ti as u64))?;
        for &m in &cfg.grid.m {
            for method in [Method::Glass, Method::SdeDdpm] {
                let seed = derive_seed(cfg.seed, 0x2000 + method as u64);
                let cell = value_cell(model, method, t, m, &points, cfg.samples, lambda, seed)?;
                for (metric, v) in [("corr", cell.corr), ("mse", cell.mse)] {
                    rows.push(
                        ResultRow::new("value_corr", method.name(), metric, v)
                            .t(t)
                            .m(m)
                            .nfe(m * cfg.samples),
                    );
                }
            }
        }
    }
    Ok(Outcome {
        rows,
        passed: true,
        ..Outcome::default()
    })
}
