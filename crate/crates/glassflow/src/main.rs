use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use glassflow::config::{resolve, Experiment, MixtureSource};
use glassflow::experiments;
use glassflow::io::{self, InputDigest, Manifest};

#[derive(Parser)]
#[command(name = "glassflow", version, about = "Desk-scale GLASS flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Posterior sampling error of GLASS vs SDE over (t, M).
    PosteriorSweep(RunArgs),
    /// Value-function estimates vs the closed form.
    ValueCorr(RunArgs),
    /// ODE / SDE / GLASS at a fixed evaluation budget.
    SamplingCompare(RunArgs),
    /// Baseline, Best-of-N and Feynman-Kac steering.
    Fks(RunArgs),
    /// Reward guidance over a sweep of strengths.
    Guidance(RunArgs),
    /// One-step GLASS vs DDIM, bit for bit.
    DdimEquiv(RunArgs),
    /// Print the default configuration of an experiment.
    DefaultConfig { experiment: String },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; omitted fields take the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-path overrides: `--sampler.steps 20` or `--grid.t=[0.1,0.2]`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--PATH VALUE")]
    overrides: Vec<String>,
}

fn parse_overrides(raw: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = raw.iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            bail!("unexpected argument `{arg}` (overrides look like `--path.to.field value`)");
        };
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().with_context(|| format!("override `--{key}` needs a value"))?;
                out.push((key.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn parse_experiment(name: &str) -> anyhow::Result<Experiment> {
    serde_json::from_value(serde_json::Value::String(name.replace('-', "_")))
        .map_err(|_| anyhow::anyhow!("unknown experiment `{name}`"))
}

fn execute(experiment: Experiment, mut args: RunArgs) -> anyhow::Result<bool> {
    let mut overrides = Vec::new();
    // Named flags that follow an override land in the trailing list.
    for (k, v) in parse_overrides(&args.overrides)? {
        match k.as_str() {
            "config" => args.config = Some(v.into()),
            "out" => args.out = Some(v.into()),
            _ => overrides.push((k, v)),
        }
    }
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(out) = &args.out {
        overrides.push(("output_dir".into(), serde_json::to_string(out)?));
    }
    let (cfg, resolved) = resolve(experiment, args.config.as_deref(), &overrides)?;
    let base = args
        .config
        .as_deref()
        .and_then(Path::parent)
        .map_or_else(PathBuf::new, Path::to_path_buf);
    let (spec, mixture_bytes) = cfg.mixture.load(&base)?;
    let model = spec.model(cfg.scheduler).context("mixture")?;
    let reward = cfg.reward.build();
    io::prepare_output_dir(&cfg.output_dir)?;

    let mut inputs = Vec::new();
    if let (MixtureSource::Path(p), Some(bytes)) = (&cfg.mixture, &mixture_bytes) {
        inputs.push(InputDigest {
            name: p.display().to_string(),
            sha256: io::sha256_hex(bytes),
        });
    }
    let mut manifest = Manifest::new(experiment.name(), cfg.seed, resolved, inputs)?;

    let outcome = experiments::run(&cfg, &model, &reward)?;
    let dir = &cfg.output_dir;
    io::write_results_csv(&dir.join("results.csv"), &outcome.rows)?;
    manifest.outputs.push("results.csv".into());
    if let Some(d) = &outcome.diagnostics {
        io::write_json(&dir.join("diagnostics.json"), d)?;
        manifest.outputs.push("diagnostics.json".into());
    }
    if cfg.write_samples {
        for (name, batch) in &outcome.samples {
            let file = format!("samples_{name}.bin");
            io::write_samples_bin(&dir.join(&file), &batch.data, batch.dim)?;
            manifest.outputs.push(file);
        }
    }
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    eprintln!(
        "{}: {} rows -> {}",
        experiment.name(),
        outcome.rows.len(),
        dir.display()
    );
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::PosteriorSweep(a) => (Experiment::PosteriorSweep, a),
        Command::ValueCorr(a) => (Experiment::ValueCorr, a),
        Command::SamplingCompare(a) => (Experiment::SamplingCompare, a),
        Command::Fks(a) => (Experiment::Fks, a),
        Command::Guidance(a) => (Experiment::Guidance, a),
        Command::DdimEquiv(a) => (Experiment::DdimEquiv, a),
        Command::DefaultConfig { experiment } => {
            return match parse_experiment(&experiment).and_then(|e| {
                Ok(serde_json::to_string_pretty(
                    &glassflow::config::ExperimentConfig::default_for(e),
                )?)
            }) {
                Ok(s) => {
                    println!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(2)
                }
            };
        }
    };
    match execute(experiment, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}: check failed", experiment.name());
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
