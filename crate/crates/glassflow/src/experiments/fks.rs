//! Reward steering: unsteered baseline, Best-of-N and Feynman-Kac steering
//! with SDE or GLASS proposals. The `nfe` column counts model evaluations per
//! returned sample.

use glassflow_core::align::{best_of_n, FksConfig, FksOutput};
use glassflow_core::metrics::mean;
use glassflow_core::rng::derive_seed;
use glassflow_core::{FlowModel, GaussianMixture, Reward, RhoPolicy, SampleBatch, SamplerConfig};
use serde_json::json;

use super::{distance_to_mixture, mean_reward, metric_name, Outcome};
use crate::config::{ExperimentConfig, Metric};
use crate::io::ResultRow;
use crate::parallel;

/// FKS proposals with `K` transitions of `M` steps.
pub fn fks_arms(k: usize, m: usize, rhos: &[f64]) -> Vec<(String, SamplerConfig)> {
    let mut sde = SamplerConfig::sde(m, 0);
    sde.transitions = k;
    let mut arms = vec![
        ("fks_sde".to_string(), sde),
        (
            "fks_glass_ddpm".to_string(),
            SamplerConfig::glass(k, m, RhoPolicy::Ddpm, 0),
        ),
    ];
    for &rho in rhos {
        arms.push((
            format!("fks_glass_rho{rho}"),
            SamplerConfig::glass(k, m, RhoPolicy::Fixed(rho), 0),
        ));
    }
    arms
}

/// Pooled final particles of `runs` independent FKS runs.
pub fn pooled_fks(
    model: &FlowModel,
    proposal: &SamplerConfig,
    reward: &Reward,
    fks: &FksConfig,
    runs: usize,
) -> anyhow::Result<(SampleBatch, Vec<FksOutput>)> {
    let outs = parallel::fks_runs(model, proposal, reward, fks, runs)?;
    let rows: Vec<Vec<f64>> = outs
        .iter()
        .flat_map(|o| o.samples.rows().map(<[f64]>::to_vec))
        .collect();
    let nfe = outs
        .first()
        .map_or(0, |o| o.diagnostics.proposal_nfe + o.diagnostics.potential_nfe);
    Ok((SampleBatch::from_rows(rows, model.mixture().dim(), nfe), outs))
}

/// The target of exact steering with a linear reward.
pub fn tilt_target(model: &FlowModel, reward: &Reward, lambda_temp: f64) -> anyhow::Result<Option<GaussianMixture>> {
    Ok(match reward.linear_lambda() {
        Some(l) => {
            let l: Vec<f64> = l.iter().map(|v| v * lambda_temp).collect();
            Some(model.tilted(&l)?)
        }
        None => None,
    })
}

struct Row<'a> {
    label: &'a str,
    batch: &'a SampleBatch,
    nfe: usize,
    particles: usize,
}

fn push_rows(
    out: &mut Outcome,
    row: Row<'_>,
    reward: &Reward,
    tilt: Option<&GaussianMixture>,
    metric: Metric,
    seed: u64,
) -> anyhow::Result<()> {
    let param = format!("particles={}", row.particles);
    out.rows.push(
        ResultRow::new("fks", row.label, "mean_reward", mean_reward(row.batch, reward))
            .param(param.clone())
            .nfe(row.nfe),
    );
    if let Some(tilt) = tilt {
        let d = distance_to_mixture(metric, &row.batch.data, row.batch.dim, tilt, seed)?;
        out.rows.push(
            ResultRow::new("fks", row.label, format!("{}_to_tilt", metric_name(metric)), d)
                .param(param)
                .nfe(row.nfe),
        );
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, model: &FlowModel, reward: &Reward) -> anyhow::Result<Outcome> {
    let (k, m) = (cfg.sampler.transitions, cfg.sampler.steps);
    let tilt = tilt_target(model, reward, cfg.fks.lambda_temp)?;
    let mut out = Outcome {
        passed: true,
        ..Outcome::default()
    };
    let mut diagnostics = serde_json::Map::new();
    let ref_seed = derive_seed(cfg.seed, 0x7117);

    let base = SamplerConfig::ode(k * m, derive_seed(cfg.seed, 0));
    let baseline = parallel::sample(model, &base, cfg.samples)?;
    push_rows(
        &mut out,
        Row {
            label: "baseline",
            batch: &baseline,
            nfe: k * m,
            particles: 1,
        },
        reward,
        tilt.as_ref(),
        cfg.metric,
        ref_seed,
    )?;

    for &kp in &cfg.grid.particles {
        for (i, (label, sc)) in [
            ("best_of_n_ode", SamplerConfig::ode(k * m, 0)),
            ("best_of_n_sde", SamplerConfig::sde(k * m, 0)),
        ]
        .into_iter()
        .enumerate()
        {
            let sc = SamplerConfig {
                seed: derive_seed(cfg.seed, 0x100 + i as u64),
                ..sc
            };
            let rows = parallel::map_indexed(cfg.samples, |j| {
                best_of_n(model, &sc, reward, kp, j as u64).map(|(x, _)| x)
            })?;
            let batch = SampleBatch::from_rows(rows, model.mixture().dim(), kp * k * m);
            push_rows(
                &mut out,
                Row {
                    label,
                    batch: &batch,
                    nfe: kp * k * m,
                    particles: kp,
                },
                reward,
                tilt.as_ref(),
                cfg.metric,
                ref_seed,
            )?;
        }
        let fks = FksConfig {
            particles: kp,
            ..cfg.fks
        };
        for (i, (label, sc)) in fks_arms(k, m, &cfg.grid.rho).into_iter().enumerate() {
            let sc = SamplerConfig {
                seed: derive_seed(cfg.seed, 0x200 + i as u64),
                ..sc
            };
            let (batch, outs) = pooled_fks(model, &sc, reward, &fks, cfg.runs)?;
            push_rows(
                &mut out,
                Row {
                    label: &label,
                    batch: &batch,
                    nfe: batch.nfe,
                    particles: kp,
                },
                reward,
                tilt.as_ref(),
                cfg.metric,
                ref_seed,
            )?;
            let n_steps = outs.first().map_or(0, |o| o.diagnostics.ess.len());
            let mean_ess: Vec<f64> = (0..n_steps)
                .map(|s| mean(&outs.iter().map(|o| o.diagnostics.ess[s]).collect::<Vec<_>>()))
                .collect();
            diagnostics.insert(
                format!("{label}/particles={kp}"),
                json!({ "mean_ess": mean_ess, "first_run": outs.first().map(|o| &o.diagnostics) }),
            );
            if cfg.write_samples {
                out.samples.push((format!("{label}_p{kp}"), batch));
            }
        }
    }
    out.diagnostics = Some(serde_json::Value::Object(diagnostics));
    Ok(out)
}
