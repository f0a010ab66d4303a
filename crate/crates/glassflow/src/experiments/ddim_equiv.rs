//! Bit-level check that a one-step GLASS transition is the DDIM update.

use glassflow_core::rng::{derive_seed, RngStream};
use glassflow_core::sampler::{glass_transition, step_ddim};
use glassflow_core::{Denoiser, FlowModel, GlassParams};

use super::{noised_points, Outcome};
use crate::config::ExperimentConfig;
use crate::io::ResultRow;

#[derive(Debug, Clone, PartialEq)]
pub struct DdimCheck {
    pub t: f64,
    pub t_prime: f64,
    pub rho: f64,
    pub cases: usize,
    pub bit_equal: usize,
    pub max_abs_diff: f64,
}

/// Compares both updates on `n` noised points under shared noise.
pub fn check_cell(model: &FlowModel, params: &GlassParams, n: usize, seed: u64) -> anyhow::Result<DdimCheck> {
    let points = noised_points(model, params.t, n, seed)?;
    let mut check = DdimCheck {
        t: params.t,
        t_prime: params.t_prime,
        rho: params.rho,
        cases: n,
        bit_equal: 0,
        max_abs_diff: 0.0,
    };
    for (i, x) in points.iter().enumerate() {
        let eps = RngStream::new(derive_seed(seed, 1), i as u64).normal_vec(model.dim());
        let a = glass_transition(model, params, x, &eps, 1)?;
        let b = step_ddim(model, params, x, &eps)?;
        if a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()) {
            check.bit_equal += 1;
        }
        let diff = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        check.max_abs_diff = check.max_abs_diff.max(diff);
    }
    Ok(check)
}

/// All `(t, t', rho)` combinations of the grid with `t < t'`.
pub fn grid_checks(
    model: &FlowModel,
    ts: &[f64],
    tps: &[f64],
    rhos: &[f64],
    n: usize,
    sigma_bar0: f64,
    seed: u64,
) -> anyhow::Result<Vec<DdimCheck>> {
    let sched = model.scheduler();
    let mut checks = Vec::new();
    for &t in ts {
        for &tp in tps.iter().filter(|&&tp| tp > t) {
            for &rho in rhos {
                let params = GlassParams::new(sched, rho, t, tp, sigma_bar0)?;
                checks.push(check_cell(model, &params, n, derive_seed(seed, checks.len() as u64))?);
            }
        }
    }
    Ok(checks)
}

pub fn run(cfg: &ExperimentConfig, model: &FlowModel) -> anyhow::Result<Outcome> {
    let g = &cfg.grid;
    let checks = grid_checks(
        model,
        &g.t,
        &g.t_prime,
        &g.rho,
        cfg.samples,
        cfg.sampler.sigma_bar0,
        cfg.seed,
    )?;
    let mut out = Outcome {
        passed: checks.iter().all(|c| c.bit_equal == c.cases),
        ..Outcome::default()
    };
    for c in &checks {
        let row = |metric: &str, v: f64| {
            ResultRow::new("ddim_equiv", "glass_m1_vs_ddim", metric, v)
                .t(c.t)
                .m(1)
                .rho(c.rho.to_string())
                .param(format!("t_prime={}", c.t_prime))
        };
        out.rows
            .push(row("bit_equal_fraction", c.bit_equal as f64 / c.cases as f64));
        out.rows.push(row("max_abs_diff", c.max_abs_diff));
    }
    out.diagnostics = Some(serde_json::json!({
        "cells": checks.len(),
        "cases": checks.iter().map(|c| c.cases).sum::<usize>(),
        "passed": out.passed,
    }));
    Ok(out)
}
