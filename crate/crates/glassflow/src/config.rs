//! Experiment configuration: one JSON document, optionally overridden by
//! dotted-path assignments such as `sampler.steps=20`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use glassflow_core::align::{BetaMask, FksConfig};
use glassflow_core::model::CfgSpec;
use glassflow_core::{Component, FlowModel, GaussianMixture, Reward, SamplerConfig, Scheduler};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    PosteriorSweep,
    ValueCorr,
    SamplingCompare,
    Fks,
    Guidance,
    DdimEquiv,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::PosteriorSweep => "posterior_sweep",
            Experiment::ValueCorr => "value_corr",
            Experiment::SamplingCompare => "sampling_compare",
            Experiment::Fks => "fks",
            Experiment::Guidance => "guidance",
            Experiment::DdimEquiv => "ddim_equiv",
        }
    }
}

/// Mixture file contents: components plus optional labelled conditionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub components: Vec<Component>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub conditionals: BTreeMap<String, Vec<Component>>,
    #[serde(default)]
    pub guidance_weight: f64,
}

impl MixtureSpec {
    pub fn mixture(&self) -> anyhow::Result<GaussianMixture> {
        Ok(GaussianMixture::new(self.components.clone())?)
    }

    pub fn model(&self, sched: Scheduler) -> anyhow::Result<FlowModel> {
        let model = FlowModel::new(self.mixture()?, sched);
        if self.conditionals.is_empty() {
            return Ok(model);
        }
        let conditionals = self
            .conditionals
            .iter()
            .map(|(k, c)| {
                GaussianMixture::new(c.clone())
                    .map(|m| (k.clone(), m))
                    .with_context(|| format!("conditional `{k}`"))
            })
            .collect::<anyhow::Result<_>>()?;
        Ok(model.with_cfg(CfgSpec {
            conditionals,
            weight: self.guidance_weight,
        })?)
    }
}

/// A mixture given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MixtureSource {
    Path(PathBuf),
    Inline(MixtureSpec),
}

impl MixtureSource {
    /// The mixture description and, for file sources, the raw file bytes.
    pub fn load(&self, base: &Path) -> anyhow::Result<(MixtureSpec, Option<Vec<u8>>)> {
        match self {
            MixtureSource::Inline(s) => Ok((s.clone(), None)),
            MixtureSource::Path(p) => {
                let path = if p.is_relative() { base.join(p) } else { p.clone() };
                let bytes = fs::read(&path).with_context(|| format!("mixture: cannot read {}", path.display()))?;
                let spec = parse_json(&bytes, &path.display().to_string())?;
                Ok((spec, Some(bytes)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RewardSpec {
    Linear { lambda: Vec<f64> },
    Quadratic { target: Vec<f64>, tau: f64 },
    Constant { value: f64 },
}

impl RewardSpec {
    pub fn build(&self) -> Reward {
        match self {
            RewardSpec::Linear { lambda } => Reward::Linear(lambda.clone()),
            RewardSpec::Quadratic { target, tau } => Reward::Quadratic {
                target: target.clone(),
                tau: *tau,
            },
            RewardSpec::Constant { value } => Reward::Constant(*value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    W2,
    Energy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub t: Vec<f64>,
    pub t_prime: Vec<f64>,
    pub m: Vec<usize>,
    pub rho: Vec<f64>,
    pub particles: Vec<usize>,
    pub beta: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            t: vec![0.05, 0.15, 0.7],
            t_prime: vec![1.0],
            m: vec![2, 4, 8, 16, 50],
            rho: vec![0.5],
            particles: vec![64],
            beta: vec![0.0, 0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub scheduler: Scheduler,
    pub mixture: MixtureSource,
    pub sampler: SamplerConfig,
    pub reward: RewardSpec,
    pub grid: Grid,
    /// Noised test points (posterior and value studies).
    pub points: usize,
    /// Samples per cell.
    pub samples: usize,
    /// Independent repetitions (FKS runs, Best-of-N candidates).
    pub runs: usize,
    pub metric: Metric,
    pub fks: FksConfig,
    pub beta_mask: BetaMask,
    pub write_samples: bool,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// Three well-separated components in 1-D.
pub fn default_mixture() -> MixtureSpec {
    MixtureSpec {
        components: vec![
            Component::new(0.3, vec![-2.0], 0.09),
            Component::new(0.45, vec![0.5], 0.16),
            Component::new(0.25, vec![2.5], 0.04),
        ],
        conditionals: BTreeMap::new(),
        guidance_weight: 0.0,
    }
}

/// Two symmetric narrow modes in 1-D.
pub fn bimodal_mixture() -> MixtureSpec {
    MixtureSpec {
        components: vec![
            Component::new(0.5, vec![-2.0], 0.0625),
            Component::new(0.5, vec![2.0], 0.0625),
        ],
        conditionals: BTreeMap::new(),
        guidance_weight: 0.0,
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn default_for(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            scheduler: Scheduler::CondOt,
            mixture: MixtureSource::Inline(default_mixture()),
            sampler: SamplerConfig::default(),
            reward: RewardSpec::Linear { lambda: vec![1.0] },
            grid: Grid::default(),
            points: 20,
            samples: 2000,
            runs: 16,
            metric: Metric::W2,
            fks: FksConfig::default(),
            beta_mask: BetaMask::None,
            write_samples: false,
            output_dir: PathBuf::from("out").join(experiment.name()),
            seed: 0,
        };
        match experiment {
            Experiment::PosteriorSweep => base,
            Experiment::ValueCorr => Self {
                grid: Grid {
                    t: vec![0.15],
                    m: vec![4],
                    ..Grid::default()
                },
                points: 200,
                samples: 50,
                ..base
            },
            Experiment::SamplingCompare => Self {
                mixture: MixtureSource::Inline(bimodal_mixture()),
                samples: 100_000,
                ..base
            },
            Experiment::Fks => Self {
                runs: 32,
                metric: Metric::Energy,
                ..base
            },
            Experiment::Guidance => Self {
                samples: 10_000,
                ..base
            },
            Experiment::DdimEquiv => Self {
                grid: Grid {
                    t: vec![0.0, 0.15, 0.3, 0.45, 0.6],
                    t_prime: vec![0.65, 0.75, 0.85, 0.95, 1.0],
                    rho: vec![0.0, 0.5, 1.0],
                    ..Grid::default()
                },
                samples: 64,
                ..base
            },
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let g = &self.grid;
        let need = |ok: bool, field: &str| -> anyhow::Result<()> {
            if ok {
                Ok(())
            } else {
                bail!("grid.{field}: must be non-empty")
            }
        };
        match self.experiment {
            Experiment::PosteriorSweep | Experiment::ValueCorr => {
                need(!g.t.is_empty(), "t")?;
                need(!g.m.is_empty(), "m")?;
            }
            Experiment::DdimEquiv => {
                need(!g.t.is_empty(), "t")?;
                need(!g.t_prime.is_empty(), "t_prime")?;
                need(!g.rho.is_empty(), "rho")?;
            }
            Experiment::Guidance => need(!g.beta.is_empty(), "beta")?,
            Experiment::Fks => need(!g.particles.is_empty(), "particles")?,
            Experiment::SamplingCompare => {}
        }
        if let Some(t) = g.t.iter().find(|t| !(0.0..1.0).contains(*t)) {
            bail!("grid.t: value {t} outside [0, 1)");
        }
        if g.m.contains(&0) {
            bail!("grid.m: step counts must be >= 1");
        }
        if self.samples < 2 {
            bail!("samples: need at least 2");
        }
        self.sampler.validate().context("sampler")?;
        Ok(())
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8], origin: &str) -> anyhow::Result<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| anyhow::anyhow!("{origin}: field `{}`: {}", e.path(), e.inner()))
}

/// Sets `path` (dot separated) in `root` to `raw`, parsed as JSON when possible
/// and as a string otherwise. Intermediate objects are created as needed.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> anyhow::Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override `{path}`: empty path segment");
    }
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), value);
                    return Ok(());
                }
                map.entry(key.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .with_context(|| format!("override `{path}`: `{key}` is not an array index"))?;
                let slot = items
                    .get_mut(idx)
                    .with_context(|| format!("override `{path}`: index {idx} out of range"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => bail!("override `{path}`: `{key}` is not inside an object"),
        };
    }
    Ok(())
}

/// Resolves a configuration: file (or the experiment default), then overrides.
pub fn resolve(
    experiment: Experiment,
    file: Option<&Path>,
    overrides: &[(String, String)],
) -> anyhow::Result<(ExperimentConfig, Value)> {
    let mut value = match file {
        Some(p) => {
            let bytes = fs::read(p).with_context(|| format!("cannot read config {}", p.display()))?;
            let mut v: Value =
                serde_json::from_slice(&bytes).with_context(|| format!("{}: invalid JSON", p.display()))?;
            // Fill omitted fields from the experiment default.
            let mut base = serde_json::to_value(ExperimentConfig::default_for(experiment))?;
            merge(&mut base, std::mem::take(&mut v));
            base
        }
        None => serde_json::to_value(ExperimentConfig::default_for(experiment))?,
    };
    for (k, v) in overrides {
        apply_override(&mut value, k, v)?;
    }
    let origin = file.map_or_else(|| "config".to_string(), |p| p.display().to_string());
    let bytes = serde_json::to_vec(&value)?;
    let cfg: ExperimentConfig = parse_json(&bytes, &origin)?;
    if cfg.experiment != experiment {
        bail!(
            "{origin}: field `experiment`: config is for `{}` but the command runs `{}`",
            cfg.experiment.name(),
            experiment.name()
        );
    }
    cfg.validate().with_context(|| origin.clone())?;
    let resolved = serde_json::to_value(&cfg)?;
    Ok((cfg, resolved))
}

/// Recursive object merge; `patch` wins.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}
