use glassflow_core::align::{ess_from_log_weights, resample, Resampling};
use glassflow_core::glass::{ddpm_rho, inner_measurement, t_star};
use glassflow_core::metrics::{energy_distance, ks_statistic, pearson, w2_1d, SampleSet};
use glassflow_core::rng::RngStream;
use glassflow_core::sampler::{glass_transition, step_ddim};
use glassflow_core::{Component, Denoiser, FlowModel, GaussianMixture, GlassParams, Scheduler};
use proptest::prelude::*;

fn scheduler() -> impl Strategy<Value = Scheduler> {
    prop_oneof![Just(Scheduler::CondOt), Just(Scheduler::Cosine)]
}

fn gmm() -> GaussianMixture {
    GaussianMixture::new(vec![
        Component::new(0.3, vec![-2.0], 0.09),
        Component::new(0.45, vec![0.5], 0.16),
        Component::new(0.25, vec![2.5], 0.04),
    ])
    .unwrap()
}

/// `(t, t')` with `0 < t < t' <= 1`.
fn time_pair() -> impl Strategy<Value = (f64, f64)> {
    (0.01f64..0.95, 0.02f64..1.0).prop_map(|(t, f)| (t, t + f * (1.0 - t)))
}

proptest! {
    #[test]
    fn noise_scale_round_trip(sched in scheduler(), t in 0.01f64..0.99) {
        let g = sched.noise_scale(t).unwrap();
        let back = sched.noise_scale_inverse(g).unwrap();
        prop_assert!((back - t).abs() < 1e-9, "{back} vs {t}");
    }

    #[test]
    fn schedule_monotone(sched in scheduler(), t in 0.01f64..0.98, dt in 0.001f64..0.02) {
        let (a, b) = (sched.eval(t).unwrap(), sched.eval(t + dt).unwrap());
        prop_assert!(b.alpha > a.alpha);
        prop_assert!(b.sigma < a.sigma);
        prop_assert!(sched.noise_scale(t + dt).unwrap() < sched.noise_scale(t).unwrap());
        prop_assert!(sched.nu_squared(t).unwrap() >= 0.0);
    }

    #[test]
    fn glass_params_valid((t, tp) in time_pair(), rho in 0.0f64..=1.0, sched in scheduler()) {
        let p = GlassParams::new(sched, rho, t, tp, 1.0).unwrap();
        prop_assert!(p.gamma_bar >= 0.0);
        prop_assert!(p.sigma_bar >= 0.0);
        let pt = sched.eval(tp).unwrap();
        // Marginal variance of X_{t'} given z is preserved.
        let v = p.gamma_bar * p.gamma_bar * p.sigma_t * p.sigma_t + p.sigma_bar * p.sigma_bar;
        prop_assert!((v - pt.sigma * pt.sigma).abs() < 1e-12);
    }

    #[test]
    fn inner_covariance_pd_and_t_star_bounds((t, tp) in time_pair(), rho in 0.0f64..0.99, s in 0.0f64..0.999, sched in scheduler()) {
        let p = GlassParams::new(sched, rho, t, tp, 1.0).unwrap();
        let m = inner_measurement(&p, &p.inner(), s).unwrap();
        prop_assert!(m.cov[0][0] > 0.0 && m.det() > 0.0);
        let w = m.statistic_weights().unwrap();
        // S is an unbiased estimate of z.
        prop_assert!((w[0] * m.mu[0] + w[1] * m.mu[1] - 1.0).abs() < 1e-9);
        let ts = t_star(sched, &m).unwrap();
        prop_assert!(ts >= t - 1e-9 && ts <= 1.0, "t* = {ts}, t = {t}");
        if s == 0.0 {
            prop_assert!((ts - t).abs() < 1e-9);
        }
    }

    #[test]
    fn ddpm_rho_in_unit_interval((t, tp) in time_pair(), sched in scheduler()) {
        let r = ddpm_rho(sched, t, tp).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn one_step_glass_is_ddim((t, tp) in time_pair(), rho in 0.0f64..=1.0, x in -3.0f64..3.0, e in -3.0f64..3.0) {
        let model = FlowModel::new(gmm(), Scheduler::CondOt);
        let p = GlassParams::new(Scheduler::CondOt, rho, t, tp, 1.0).unwrap();
        let a = glass_transition(&model, &p, &[x], &[e], 1).unwrap();
        let b = step_ddim(&model, &p, &[x], &[e]).unwrap();
        prop_assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn denoiser_in_hull_of_point_masses(x in -10.0f64..10.0, t in 0.01f64..0.99) {
        let mix = GaussianMixture::new(vec![
            Component::new(0.2, vec![-1.0], 0.0),
            Component::new(0.5, vec![0.3], 0.0),
            Component::new(0.3, vec![2.0], 0.0),
        ]).unwrap();
        let d = FlowModel::new(mix, Scheduler::CondOt).denoise(&[x], t).unwrap()[0];
        prop_assert!((-1.0..=2.0).contains(&d));
    }

    #[test]
    fn posterior_weights_normalized(x in -5.0f64..5.0, t in 0.01f64..0.99) {
        let post = FlowModel::new(gmm(), Scheduler::Cosine).posterior(&[x], t).unwrap();
        let s: f64 = post.components().iter().map(|c| c.weight).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w2_symmetric_nonnegative(a in prop::collection::vec(-5.0f64..5.0, 2..40), b in prop::collection::vec(-5.0f64..5.0, 2..40)) {
        let ab = w2_1d(&a, &b).unwrap();
        let ba = w2_1d(&b, &a).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert_eq!(w2_1d(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn energy_symmetric_nonnegative(a in prop::collection::vec(-5.0f64..5.0, 4..30), b in prop::collection::vec(-5.0f64..5.0, 4..30)) {
        let (sa, sb) = (SampleSet::new(a.clone(), 2, "a"), SampleSet::new(b.clone(), 2, "b"));
        prop_assume!(sa.is_ok() && sb.is_ok());
        let (sa, sb) = (sa.unwrap(), sb.unwrap());
        let ab = energy_distance(&sa, &sb).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - energy_distance(&sb, &sa).unwrap()).abs() < 1e-12);
        prop_assert_eq!(energy_distance(&sa, &sa).unwrap(), 0.0);
    }

    #[test]
    fn ks_and_pearson_ranges(a in prop::collection::vec(-5.0f64..5.0, 3..30), b in prop::collection::vec(-5.0f64..5.0, 3..30)) {
        let ks = ks_statistic(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ks));
        let n = a.len().min(b.len());
        if let Ok(r) = pearson(&a[..n], &b[..n]) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn ess_bounds(lw in prop::collection::vec(-20.0f64..20.0, 1..64)) {
        let e = ess_from_log_weights(&lw);
        prop_assert!(e > 0.0 && e <= lw.len() as f64 + 1e-9);
    }

    #[test]
    fn resampling_preserves_count(w in prop::collection::vec(0.001f64..1.0, 1..64), seed in any::<u64>(), systematic in any::<bool>()) {
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / total).collect();
        let kind = if systematic { Resampling::Systematic } else { Resampling::Multinomial };
        let idx = resample(&w, kind, &mut RngStream::new(seed, 0));
        prop_assert_eq!(idx.len(), w.len());
        prop_assert!(idx.iter().all(|&i| i < w.len()));
    }

    #[test]
    fn rng_blocks_reproducible(seed in any::<u64>(), stream in any::<u64>(), block in 0u64..1000) {
        let a = RngStream::at_block(seed, stream, block).normal_vec(8);
        let b = RngStream::at_block(seed, stream, block).normal_vec(8);
        prop_assert_eq!(a, b);
    }
}
