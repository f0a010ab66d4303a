//! Reward guidance swept over the strength `beta`.

use glassflow_core::align::{BetaSchedule, GuidedModel};
use glassflow_core::rng::derive_seed;
use glassflow_core::{FlowModel, Reward, RhoPolicy, SamplerConfig};

use super::{distance_to_mixture, mean_reward, metric_name, Outcome};
use crate::config::ExperimentConfig;
use crate::io::ResultRow;
use crate::parallel;

pub fn guided_arms(k: usize, m: usize, seed: u64) -> [(&'static str, SamplerConfig); 3] {
    [
        ("ode_guidance", SamplerConfig::ode(k * m, seed)),
        ("sde_guidance", SamplerConfig::sde(k * m, seed)),
        ("glass_guidance", SamplerConfig::glass(k, m, RhoPolicy::Ddpm, seed)),
    ]
}

pub fn run(cfg: &ExperimentConfig, model: &FlowModel, reward: &Reward) -> anyhow::Result<Outcome> {
    let (k, m) = (cfg.sampler.transitions, cfg.sampler.steps);
    let dim = model.mixture().dim();
    let ref_seed = derive_seed(cfg.seed, 0xda7a);
    let mut out = Outcome {
        passed: true,
        ..Outcome::default()
    };
    for &beta in &cfg.grid.beta {
        let schedule = BetaSchedule {
            value: beta,
            mask: cfg.beta_mask,
        };
        let guided = GuidedModel::new(model, reward, schedule);
        let tilt = match reward.linear_lambda() {
            Some(l) => Some(model.tilted(&l.iter().map(|v| v * beta).collect::<Vec<_>>())?),
            None => None,
        };
        for (i, (label, sc)) in guided_arms(k, m, 0).into_iter().enumerate() {
            let sc = SamplerConfig {
                seed: derive_seed(cfg.seed, i as u64),
                ..sc
            };
            let batch = parallel::sample(&guided, &sc, cfg.samples)?;
            let param = format!("beta={beta}");
            let mut push = |metric: String, v: f64| {
                out.rows.push(
                    ResultRow::new("guidance", label, metric, v)
                        .param(param.clone())
                        .nfe(batch.nfe),
                );
            };
            push("mean_reward".into(), mean_reward(&batch, reward));
            let name = metric_name(cfg.metric);
            push(
                format!("{name}_to_data"),
                distance_to_mixture(cfg.metric, &batch.data, dim, model.mixture(), ref_seed)?,
            );
            if let Some(tilt) = &tilt {
                push(
                    format!("{name}_to_tilt"),
                    distance_to_mixture(cfg.metric, &batch.data, dim, tilt, ref_seed)?,
                );
            }
            if cfg.write_samples {
                out.samples.push((format!("{label}_beta{beta}"), batch));
            }
        }
    }
    Ok(out)
}
