//! Two-sample distances and summary statistics.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math::{exp, normal_cdf, sqrt};
use crate::mixture::GaussianMixture;
use crate::rng::RngStream;
use crate::sampler::SampleBatch;
use crate::{Error, Result};

/// `n x d` samples with a label.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub data: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub label: String,
}

impl SampleSet {
    pub fn new(data: Vec<f64>, dim: usize, label: impl Into<String>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::domain("sample data length is not a multiple of the dimension"));
        }
        let n = data.len() / dim;
        if n < 2 {
            return Err(Error::domain("a sample set needs at least two points"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            data,
            n,
            dim,
            label: label.into(),
        })
    }

    pub fn from_batch(batch: &SampleBatch, label: impl Into<String>) -> Result<Self> {
        Self::new(batch.data.clone(), batch.dim, label)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// Exact W2 between two 1-D empirical measures: the quantile step functions
/// are merged on the union of their breakpoints.
pub fn w2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let ea = (i + 1) as f64 / na;
        let eb = (j + 1) as f64 / nb;
        let next = ea.min(eb);
        let d = a[i] - b[j];
        acc += (next - u) * d * d;
        u = next;
        if ea <= next {
            i += 1;
        }
        if eb <= next {
            j += 1;
        }
    }
    Ok(sqrt(acc.max(0.0)))
}

pub fn wasserstein2_1d(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    if a.dim != 1 || b.dim != 1 {
        return Err(Error::Unsupported("Wasserstein-2 is implemented for d = 1 only"));
    }
    w2_1d(&a.data, &b.data)
}

/// W2 between a 1-D sample and a 1-D mixture, using `max(n, grid)` mid-point quantiles.
pub fn w2_to_mixture_1d(samples: &[f64], mix: &GaussianMixture, grid: usize) -> Result<f64> {
    let q = mix.quantile_grid_1d(samples.len().max(grid))?;
    w2_1d(samples, &q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Includes the zero diagonal terms; exactly 0 on identical inputs.
    V,
    /// Unbiased within-sample means.
    U,
}

/// Sum of `|x_i - x_j|` over ordered pairs `i != j` for sorted `s`.
fn within_abs_sum_sorted(s: &[f64]) -> f64 {
    let n = s.len() as f64;
    2.0 * s
        .iter()
        .enumerate()
        .map(|(k, v)| v * (2.0 * k as f64 - (n - 1.0)))
        .sum::<f64>()
}

/// Sum of `|x_i - y_j|` over all pairs, for sorted inputs.
fn cross_abs_sum_sorted(x: &[f64], y: &[f64]) -> f64 {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix[prefix.len() - 1] + v);
    }
    let total = prefix[x.len()];
    let mut acc = 0.0;
    let mut k = 0;
    for &v in y {
        while k < x.len() && x[k] < v {
            k += 1;
        }
        let below = k as f64 * v - prefix[k];
        let above = (total - prefix[k]) - (x.len() - k) as f64 * v;
        acc += below + above;
    }
    acc
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    sqrt(crate::math::dist_sq(a, b))
}

/// Energy distance `2 E|X - Y| - E|X - X'| - E|Y - Y'|`. At most `cap` points
/// of each set are used (the first ones). 1-D inputs use an `O(n log n)` path.
pub fn energy_distance_with(a: &SampleSet, b: &SampleSet, est: Estimator, cap: Option<usize>) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Dimension {
            expected: a.dim,
            got: b.dim,
        });
    }
    let na = cap.map_or(a.n, |c| c.min(a.n));
    let nb = cap.map_or(b.n, |c| c.min(b.n));
    let (fa, fb) = (na as f64, nb as f64);
    let (wa, wb) = match est {
        Estimator::V => (fa * fa, fb * fb),
        Estimator::U => (fa * (fa - 1.0), fb * (fb - 1.0)),
    };
    let (xx, yy, xy) = if a.dim == 1 {
        let x = sorted(&a.data[..na]);
        let y = sorted(&b.data[..nb]);
        (
            within_abs_sum_sorted(&x),
            within_abs_sum_sorted(&y),
            cross_abs_sum_sorted(&x, &y),
        )
    } else {
        let within = |s: &SampleSet, n: usize| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    acc += euclid(s.row(i), s.row(j));
                }
            }
            2.0 * acc
        };
        // Pairs are visited in the same order as `within`, so identical
        // inputs cancel exactly.
        let m = na.min(nb);
        let mut xy = 0.0;
        for i in 0..m {
            xy += euclid(a.row(i), b.row(i));
            for j in (i + 1)..m {
                xy += euclid(a.row(i), b.row(j)) + euclid(a.row(j), b.row(i));
            }
        }
        for i in 0..na {
            let js = if i < m { m..nb } else { 0..nb };
            for j in js {
                xy += euclid(a.row(i), b.row(j));
            }
        }
        (within(a, na), within(b, nb), xy)
    };
    let d = 2.0 * xy / (fa * fb) - xx / wa - yy / wb;
    // The V-statistic is a squared distance; negative values are rounding.
    Ok(match est {
        Estimator::V => d.max(0.0),
        Estimator::U => d,
    })
}

pub fn energy_distance(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    energy_distance_with(a, b, Estimator::V, None)
}

fn normal_pdf(x: f64) -> f64 {
    exp(-0.5 * x * x) / sqrt(2.0 * core::f64::consts::PI)
}

/// `E|N(mu, v)|`.
fn folded_normal_mean(mu: f64, v: f64) -> f64 {
    if v == 0.0 {
        return mu.abs();
    }
    let s = sqrt(v);
    mu * (2.0 * normal_cdf(mu / s) - 1.0) + 2.0 * s * normal_pdf(mu / s)
}

/// Energy distance between a 1-D sample (V-statistic) and a 1-D Gaussian
/// mixture, with the mixture expectations in closed form.
pub fn energy_distance_to_mixture_1d(samples: &[f64], mix: &GaussianMixture) -> Result<f64> {
    if mix.dim() != 1 {
        return Err(Error::Unsupported("closed-form energy distance needs a 1-D mixture"));
    }
    if samples.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let n = samples.len() as f64;
    let comps = mix.components();
    let xy: f64 = samples
        .iter()
        .map(|x| {
            comps
                .iter()
                .map(|c| c.weight * folded_normal_mean(x - c.mean[0], c.var))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n;
    let mut yy = 0.0;
    for a in comps {
        for b in comps {
            yy += a.weight * b.weight * folded_normal_mean(a.mean[0] - b.mean[0], a.var + b.var);
        }
    }
    let xx = within_abs_sum_sorted(&sorted(samples)) / (n * n);
    Ok(2.0 * xy - xx - yy)
}

/// Squared MMD with a Gaussian kernel of bandwidth `h` (V-statistic).
pub fn mmd(a: &SampleSet, b: &SampleSet, h: f64) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Dimension {
            expected: a.dim,
            got: b.dim,
        });
    }
    if !(h > 0.0) {
        return Err(Error::domain("kernel bandwidth must be positive"));
    }
    let k = |x: &[f64], y: &[f64]| exp(-crate::math::dist_sq(x, y) / (2.0 * h * h));
    let mean_k = |p: &SampleSet, q: &SampleSet| {
        let mut acc = 0.0;
        for i in 0..p.n {
            for j in 0..q.n {
                acc += k(p.row(i), q.row(j));
            }
        }
        acc / (p.n * q.n) as f64
    };
    Ok((mean_k(a, a) + mean_k(b, b) - 2.0 * mean_k(a, b)).max(0.0))
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::domain("mse needs equal, non-empty lengths"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::domain(
            "correlation needs two equal-length series of length >= 2",
        ));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::domain("correlation undefined for a constant series"));
    }
    Ok((sab / sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample KS statistic against a 1-D mixture CDF.
pub fn ks_to_mixture_1d(samples: &[f64], mix: &GaussianMixture) -> Result<f64> {
    let s = sorted(samples);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = mix.cdf_1d(*x)?;
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Effective sample size `(sum w)^2 / sum w^2` of nonnegative weights.
pub fn ess(weights: &[f64]) -> f64 {
    let s1: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    s1 * s1 / s2
}

/// Bootstrap standard error of `stat` over `n_boot` resamples.
pub fn bootstrap_se<F>(values: &[f64], n_boot: usize, rng: &mut RngStream, stat: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if values.is_empty() || n_boot < 2 {
        return Err(Error::domain("bootstrap needs data and at least two resamples"));
    }
    let n = values.len();
    let mut buf = alloc::vec![0.0; n];
    let stats: Vec<f64> = (0..n_boot)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = values[(rng.next_u64() % n as u64) as usize];
            }
            stat(&buf)
        })
        .collect();
    Ok(sqrt(variance(&stats)))
}

/// Standard error of the mean.
pub fn standard_error(v: &[f64]) -> f64 {
    sqrt(variance(v) / v.len() as f64)
}
