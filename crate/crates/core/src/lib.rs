//! Markov transition sampling for flow-matching models.
//!
//! A pre-trained flow-matching model defines a denoiser `D_t(x) = E[z | x_t = x]`.
//! Two correlated Gaussian views `(x_t, x_{t'})` of the same latent `z` can be
//! collapsed into a single view through their sufficient statistic, and the
//! single view corresponds to a reparameterized time `t*` of the original
//! probability path. That turns the ordinary denoiser into the denoiser of an
//! "inner" flow whose endpoint is distributed as an arbitrary Gaussian-coupled
//! transition `p_{t'|t}(. | x_t)`. This crate provides:
//!
//! - [`scheduler`]: `(alpha_t, sigma_t)` paths and the noise-scale map `g`.
//! - [`model`]: an analytic Gaussian-mixture flow model that serves as ground truth.
//! - [`glass`]: transition parameters, the sufficient statistic, `t*`, and the
//!   inner velocity field.
//! - [`sampler`]: ODE, SDE, transition and DDIM samplers with reproducible RNG streams.
//! - [`align`]: Feynman-Kac steering, value estimation, Best-of-N and reward guidance.
//! - [`metrics`]: Wasserstein-2, energy distance, MMD, correlation, KS and ESS.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is disabled.

#![cfg_attr(not(feature = "std"), no_std)]
// NaN must fail validation, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod align;
pub mod error;
pub mod glass;
pub mod math;
pub mod metrics;
pub mod mixture;
pub mod model;
pub mod reward;
pub mod rng;
pub mod sampler;
pub mod scheduler;

pub use error::{Error, Result};
pub use glass::{GaussianPairMeasurement, GlassParams, InnerSchedule};
pub use mixture::{Component, GaussianMixture};
pub use model::{Denoiser, FlowModel};
pub use reward::Reward;
pub use rng::RngStream;
pub use sampler::{Method, RhoPolicy, SampleBatch, SamplerConfig};
pub use scheduler::Scheduler;
