//! Result tables, sample files, manifests and diagnostics.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Version of the CSV schemas written by this crate; every row carries it.
pub const FORMAT_VERSION: u32 = 1;

const SAMPLES_MAGIC: &[u8; 8] = b"GLSAMP01";

/// One row of a long-format result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub format_version: u32,
    pub experiment: String,
    pub method: String,
    pub t: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub rho: Option<String>,
    pub param: Option<String>,
    pub metric: String,
    pub value: f64,
    pub se: Option<f64>,
    pub nfe: Option<usize>,
}

impl ResultRow {
    pub fn new(experiment: &str, method: impl Into<String>, metric: impl Into<String>, value: f64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            experiment: experiment.to_string(),
            method: method.into(),
            t: None,
            m: None,
            rho: None,
            param: None,
            metric: metric.into(),
            value,
            se: None,
            nfe: None,
        }
    }

    pub fn t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn m(mut self, m: usize) -> Self {
        self.m = Some(m);
        self
    }

    pub fn rho(mut self, rho: impl Into<String>) -> Self {
        self.rho = Some(rho.into());
        self
    }

    pub fn param(mut self, p: impl Into<String>) -> Self {
        self.param = Some(p.into());
        self
    }

    pub fn se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self
    }

    pub fn nfe(mut self, nfe: usize) -> Self {
        self.nfe = Some(nfe);
        self
    }
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> anyhow::Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let rows = r.deserialize().collect::<Result<Vec<ResultRow>, _>>()?;
    if let Some(bad) = rows.iter().find(|r| r.format_version != FORMAT_VERSION) {
        bail!(
            "{}: format_version {} is not supported (expected {FORMAT_VERSION})",
            path.display(),
            bad.format_version
        );
    }
    Ok(rows)
}

/// Flat binary: magic, `u64` dimension, `u64` count, then row-major little-endian `f64`.
pub fn write_samples_bin(path: &Path, data: &[f64], dim: usize) -> anyhow::Result<()> {
    if dim == 0 || !data.len().is_multiple_of(dim) {
        bail!("sample data length {} is not a multiple of dimension {dim}", data.len());
    }
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot write {}", path.display()))?);
    w.write_all(SAMPLES_MAGIC)?;
    w.write_all(&(dim as u64).to_le_bytes())?;
    w.write_all(&((data.len() / dim) as u64).to_le_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Returns `(data, dim)`.
pub fn read_samples_bin(path: &Path) -> anyhow::Result<(Vec<f64>, usize)> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("cannot read {}", path.display()))?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SAMPLES_MAGIC {
        bail!("{}: not a samples file", path.display());
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let dim = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n * dim {
        r.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        bail!("{}: {} trailing bytes", path.display(), rest.len());
    }
    Ok((data, dim))
}

/// One row per sample, columns `x0 .. x{d-1}`.
pub fn write_samples_csv(path: &Path, data: &[f64], dim: usize) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..dim).map(|j| format!("x{j}")))?;
    for row in data.chunks_exact(dim) {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv(path: &Path) -> anyhow::Result<(Vec<f64>, usize)> {
    let mut r = csv::Reader::from_path(path)?;
    let dim = r.headers()?.len();
    let mut data = Vec::new();
    for rec in r.records() {
        for f in rec?.iter() {
            data.push(f.parse::<f64>().with_context(|| format!("bad number `{f}`"))?);
        }
    }
    Ok((data, dim))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

/// Everything needed to re-run an experiment bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub format_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    /// SHA-256 over the resolved config (minus `output_dir`) and every input digest.
    pub content_hash: String,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new(experiment: &str, seed: u64, config: Value, inputs: Vec<InputDigest>) -> anyhow::Result<Self> {
        // Where results go is not an input.
        let mut hashed = config.clone();
        if let Some(obj) = hashed.as_object_mut() {
            obj.remove("output_dir");
        }
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&hashed)?);
        for i in &inputs {
            h.update(i.name.as_bytes());
            h.update(i.sha256.as_bytes());
        }
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: FORMAT_VERSION,
            experiment: experiment.to_string(),
            seed,
            config,
            inputs,
            content_hash: hex::encode(h.finalize()),
            outputs: Vec::new(),
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot write {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Creates `dir` and checks that it accepts files.
pub fn prepare_output_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("output_dir: cannot create {}", dir.display()))?;
    let probe = dir.join(".write-test");
    fs::write(&probe, b"").with_context(|| format!("output_dir: {} is not writable", dir.display()))?;
    fs::remove_file(probe)?;
    Ok(())
}
