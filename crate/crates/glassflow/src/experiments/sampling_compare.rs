//! Unconditional sampling at a fixed budget of `K * M` model evaluations.

use glassflow_core::rng::derive_seed;
use glassflow_core::{FlowModel, Reward, RhoPolicy, SamplerConfig};

use super::{distance_to_mixture, mean_reward, metric_name, Outcome};
use crate::config::ExperimentConfig;
use crate::io::ResultRow;
use crate::parallel;

/// The compared samplers, labelled: ODE and SDE with `K * M` steps, GLASS with
/// `K` transitions of `M` steps under the DDPM correlation and each fixed `rho`.
pub fn arms(k: usize, m: usize, rhos: &[f64], seed: u64) -> Vec<(String, SamplerConfig)> {
    let mut arms = vec![
        ("ode".to_string(), SamplerConfig::ode(k * m, seed)),
        ("sde".to_string(), SamplerConfig::sde(k * m, seed)),
        (
            "glass_ddpm".to_string(),
            SamplerConfig::glass(k, m, RhoPolicy::Ddpm, seed),
        ),
    ];
    for &rho in rhos {
        arms.push((
            format!("glass_rho{rho}"),
            SamplerConfig::glass(k, m, RhoPolicy::Fixed(rho), seed),
        ));
    }
    arms
}

pub fn run(cfg: &ExperimentConfig, model: &FlowModel, reward: &Reward) -> anyhow::Result<Outcome> {
    let (k, m) = (cfg.sampler.transitions, cfg.sampler.steps);
    let dim = model.mixture().dim();
    let mut out = Outcome {
        passed: true,
        ..Outcome::default()
    };
    for (i, (label, sc)) in arms(k, m, &cfg.grid.rho, cfg.seed).into_iter().enumerate() {
        let sc = SamplerConfig {
            seed: derive_seed(cfg.seed, i as u64),
            ..sc
        };
        let batch = parallel::sample(model, &sc, cfg.samples)?;
        let d = distance_to_mixture(
            cfg.metric,
            &batch.data,
            dim,
            model.mixture(),
            derive_seed(cfg.seed, 0xda7a),
        )?;
        let nfe = batch.nfe;
        out.rows.push(
            ResultRow::new("sampling_compare", label.as_str(), metric_name(cfg.metric), d)
                .m(m)
                .param(format!("K={k}"))
                .nfe(nfe),
        );
        out.rows.push(
            ResultRow::new(
                "sampling_compare",
                label.as_str(),
                "mean_reward",
                mean_reward(&batch, reward),
            )
            .m(m)
            .param(format!("K={k}"))
            .nfe(nfe),
        );
        out.samples.push((label, batch));
    }
    Ok(out)
}
