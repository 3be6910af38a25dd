//! Normalized histograms and Kolmogorov-Smirnov distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equal-width bins on `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl BinSpec {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            return Err(Error::InvalidParameter(format!("bad bin spec [{lo}, {hi}) x {bins}")));
        }
        Ok(Self { lo, hi, bins })
    }

    /// Bins of the given width; the upper edge is rounded to a whole bin.
    pub fn with_width(lo: f64, hi: f64, width: f64) -> Result<Self> {
        Self::new(lo, hi, ((hi - lo) / width).round().max(1.0) as usize)
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins).map(|i| self.lo + i as f64 * self.width()).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|i| self.lo + (i as f64 + 0.5) * self.width()).collect()
    }

    fn index(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x < self.hi) {
            return None;
        }
        Some((((x - self.lo) / self.width()) as usize).min(self.bins - 1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramDensity {
    pub statistic: String,
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    /// All values offered, including out-of-range ones.
    pub sample_count: usize,
    pub underflow: usize,
    pub overflow: usize,
}

impl HistogramDensity {
    pub fn in_range(&self) -> usize {
        self.sample_count - self.underflow - self.overflow
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    /// `sum density * width`, 1 unless every value fell outside the bins.
    pub fn total_mass(&self) -> f64 {
        self.densities.iter().enumerate().map(|(i, d)| d * self.width(i)).sum()
    }

    /// Cumulative integral at the upper bin edges.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.densities
            .iter()
            .enumerate()
            .map(|(i, d)| {
                acc += d * self.width(i);
                acc
            })
            .collect()
    }

    pub fn peak(&self) -> f64 {
        self.densities.iter().copied().fold(0.0, f64::max)
    }
}

/// Density normalized over the in-range values; out-of-range values are
/// counted in `underflow`/`overflow` (NaN counts as overflow).
pub fn histogram(statistic: &str, values: &[f64], spec: BinSpec) -> Result<HistogramDensity> {
    if values.is_empty() {
        return Err(Error::Empty("histogram input"));
    }
    let mut counts = vec![0usize; spec.bins];
    let (mut underflow, mut overflow) = (0, 0);
    for &x in values {
        match spec.index(x) {
            Some(i) => counts[i] += 1,
            None if x < spec.lo => underflow += 1,
            None => overflow += 1,
        }
    }
    let inside = values.len() - underflow - overflow;
    let norm = if inside > 0 { 1.0 / (inside as f64 * spec.width()) } else { 0.0 };
    Ok(HistogramDensity {
        statistic: statistic.to_string(),
        edges: spec.edges(),
        densities: counts.iter().map(|&c| c as f64 * norm).collect(),
        sample_count: values.len(),
        underflow,
        overflow,
    })
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("ks_distance sample"));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample Kolmogorov-Smirnov distance to a continuous CDF.
pub fn ks_to_cdf(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("ks_to_cdf sample"));
    }
    let s = sorted(sample);
    let n = s.len() as f64;
    Ok(s.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}
