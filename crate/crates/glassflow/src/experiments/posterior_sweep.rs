//! Posterior sampling: noise a data point to `x_t`, sample `p_{1|t}(. | x_t)`
//! with GLASS (`rho = 0`, `t' = 1`) or the SDE, compare to the exact posterior.

use glassflow_core::metrics::{mean, standard_error};
use glassflow_core::rng::derive_seed;
use glassflow_core::{FlowModel, Method, RhoPolicy, SamplerConfig};

use super::{distance_to_mixture, metric_name, noised_points, Outcome};
use crate::config::{ExperimentConfig, Metric};
use crate::io::ResultRow;
use crate::parallel;

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorCell {
    pub method: Method,
    pub t: f64,
    pub m: usize,
    /// Distance for each test point.
    pub per_point: Vec<f64>,
}

impl PosteriorCell {
    pub fn mean(&self) -> f64 {
        mean(&self.per_point)
    }

    pub fn se(&self) -> f64 {
        standard_error(&self.per_point)
    }
}

pub fn posterior_sampler(method: Method, m: usize, seed: u64) -> anyhow::Result<SamplerConfig> {
    Ok(match method {
        Method::Glass => SamplerConfig::glass(1, m, RhoPolicy::Fixed(0.0), seed),
        Method::SdeDdpm => SamplerConfig::sde(m, seed),
        Method::Ode => SamplerConfig::ode(m, seed),
        Method::Ddim => anyhow::bail!("posterior sampling with `ddim` is a point estimate"),
    })
}

/// One `(method, t, M)` cell over the given test points.
#[allow(clippy::too_many_arguments)]
pub fn posterior_cell(
    model: &FlowModel,
    method: Method,
    t: f64,
    m: usize,
    points: &[Vec<f64>],
    samples: usize,
    metric: Metric,
    seed: u64,
) -> anyhow::Result<PosteriorCell> {
    let dim = model.mixture().dim();
    let mut per_point = Vec::with_capacity(points.len());
    for (p, x) in points.iter().enumerate() {
        let s = derive_seed(seed, p as u64);
        let cfg = posterior_sampler(method, m, s)?;
        let batch = parallel::sample_from(model, &cfg, x, t, 1.0, samples)?;
        let exact = model.posterior(x, t)?;
        per_point.push(distance_to_mixture(
            metric,
            &batch.data,
            dim,
            &exact,
            derive_seed(s, 1),
        )?);
    }
    Ok(PosteriorCell {
        method,
        t,
        m,
        per_point,
    })
}

pub fn run(cfg: &ExperimentConfig, model: &FlowModel) -> anyhow::Result<Outcome> {
    let mut rows = Vec::new();
    for (ti, &t) in cfg.grid.t.iter().enumerate() {
        let points = noised_points(model, t, cfg.points, derive_seed(cfg.seed, ti as u64))?;
        for &m in &cfg.grid.m {
            for method in [Method::Glass, Method::SdeDdpm] {
                // Both methods see the same points but independent noise.
                let seed = derive_seed(cfg.seed, 0x1000 + method as u64);
                let cell = posterior_cell(model, method, t, m, &points, cfg.samples, cfg.metric, seed)?;
                rows.push(
                    ResultRow::new("posterior_sweep", method.name(), metric_name(cfg.metric), cell.mean())
                        .t(t)
                        .m(m)
                        .se(cell.se())
                        .nfe(m),
                );
            }
        }
    }
    Ok(Outcome {
        rows,
        passed: true,
        ..Outcome::default()
    })
}
