//! Unfolding and spectral fluctuation measures.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::histogram::{histogram, ks_to_cdf, BinSpec, HistogramDensity};
use crate::spectrum::{FoldPolicy, SpectrumRecord};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Levels discarded at the bottom of the spectrum by default.
pub const DEFAULT_DISCARD: usize = 50;
pub const DEFAULT_WINDOWS: usize = 1000;
pub const MIN_HISTOGRAM_LEVELS: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnfoldedSpectrum {
    pub values: Vec<f64>,
    pub source_digest: String,
}

impl UnfoldedSpectrum {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("spectrum"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("spectrum must be sorted".into()));
        }
        Ok(Self { values, source_digest: String::new() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mean_spacing(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return f64::NAN;
        }
        (self.values[n - 1] - self.values[0]) / (n - 1) as f64
    }

    /// Drops the lowest `n` levels.
    pub fn discard_lowest(&self, n: usize) -> Result<Self> {
        if n >= self.values.len() {
            return Err(Error::InsufficientData(format!("cannot discard {n} of {} levels", self.values.len())));
        }
        Ok(Self { values: self.values[n..].to_vec(), source_digest: self.source_digest.clone() })
    }

    /// Number of levels in `[a, a + l)`.
    fn count(&self, a: f64, l: f64) -> usize {
        let lo = self.values.partition_point(|&x| x < a);
        let hi = self.values.partition_point(|&x| x < a + l);
        hi - lo
    }

    fn window_starts(&self, l: f64, windows: usize, seed: u64) -> Result<Vec<f64>> {
        let (first, last) = (self.values[0], self.values[self.values.len() - 1]);
        if l <= 0.0 || first + l >= last {
            return Err(Error::InvalidParameter(format!("window length {l} exceeds spectrum span {}", last - first)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(l.to_bits());
        Ok((0..windows).map(|_| rng.random_range(first..last - l)).collect())
    }
}

/// Unit-mean-spacing rescaling `x = k L / pi`, halved for folded spectra.
pub fn unfold(spectrum: &SpectrumRecord, total_length: f64) -> Result<UnfoldedSpectrum> {
    if spectrum.eigenwavenumbers.is_empty() {
        return Err(Error::Empty("spectrum"));
    }
    let density = match spectrum.fold {
        FoldPolicy::Raw => total_length / PI,
        FoldPolicy::KramersFolded => total_length / (2.0 * PI),
    };
    let mut u = UnfoldedSpectrum::from_values(spectrum.eigenwavenumbers.iter().map(|k| k * density).collect())?;
    u.source_digest = spectrum.topology_digest.clone();
    Ok(u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingDistribution {
    pub histogram: HistogramDensity,
    /// `I(s)` at the upper bin edges.
    pub cumulative: Vec<f64>,
    pub spacings: Vec<f64>,
    pub too_few_levels: bool,
}

/// Spacing histogram with bin width 0.1 on `[0, 4)` unless `bins` is given.
pub fn spacing_distribution(unfolded: &UnfoldedSpectrum, bins: Option<BinSpec>) -> Result<SpacingDistribution> {
    let spacings = unfolded.spacings();
    if spacings.is_empty() {
        return Err(Error::InsufficientData("need at least two levels".into()));
    }
    let spec = match bins {
        Some(b) => b,
        None => BinSpec::with_width(0.0, 4.0, 0.1)?,
    };
    let histogram = histogram("s", &spacings, spec)?;
    let cumulative = histogram.cumulative();
    Ok(SpacingDistribution {
        histogram,
        cumulative,
        spacings,
        too_few_levels: unfolded.len() < MIN_HISTOGRAM_LEVELS,
    })
}

/// `Sigma^2(L)` from `windows` uniformly placed windows per `L`.
pub fn number_variance(unfolded: &UnfoldedSpectrum, l_grid: &[f64], windows: usize, seed: u64) -> Result<Vec<f64>> {
    l_grid
        .par_iter()
        .map(|&l| {
            let starts = unfolded.window_starts(l, windows, seed)?;
            let var = starts
                .iter()
                .map(|&a| {
                    let d = unfolded.count(a, l) as f64 - l;
                    d * d
                })
                .sum::<f64>()
                / windows as f64;
            Ok(var)
        })
        .collect()
}

/// Least-squares deviation of the staircase from a straight line on one window.
fn delta3_window(unfolded: &UnfoldedSpectrum, a: f64, l: f64) -> f64 {
    let lo = unfolded.values.partition_point(|&x| x < a);
    let hi = unfolded.values.partition_point(|&x| x < a + l);
    let (mut i0, mut i1, mut i2) = (0.0, 0.0, 0.0);
    for (n, &x) in unfolded.values[lo..hi].iter().enumerate() {
        let y = x - a;
        i0 += l - y;
        i1 += 0.5 * (l * l - y * y);
        i2 += (2 * n + 1) as f64 * (l - y);
    }
    // normal equations for N(y) ~ c0 + c1 y on [0, l]
    let (m00, m01, m11) = (l, 0.5 * l * l, l * l * l / 3.0);
    let det = m00 * m11 - m01 * m01;
    let c0 = (m11 * i0 - m01 * i1) / det;
    let c1 = (m00 * i1 - m01 * i0) / det;
    ((i2 - c0 * i0 - c1 * i1) / l).max(0.0)
}

/// `Delta_3(L)` averaged over `windows` uniformly placed windows per `L`.
pub fn rigidity(unfolded: &UnfoldedSpectrum, l_grid: &[f64], windows: usize, seed: u64) -> Result<Vec<f64>> {
    l_grid
        .par_iter()
        .map(|&l| {
            let starts = unfolded.window_starts(l, windows, seed)?;
            Ok(starts.iter().map(|&a| delta3_window(unfolded, a, l)).sum::<f64>() / windows as f64)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Poisson,
    Goe,
    Gue,
    Gse,
}

impl Reference {
    pub const ALL: [Reference; 4] = [Reference::Poisson, Reference::Goe, Reference::Gue, Reference::Gse];

    pub fn name(self) -> &'static str {
        match self {
            Reference::Poisson => "poisson",
            Reference::Goe => "goe",
            Reference::Gue => "gue",
            Reference::Gse => "gse",
        }
    }

    /// Poisson or Wigner-surmise spacing density.
    pub fn spacing_pdf(self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        match self {
            Reference::Poisson => (-s).exp(),
            Reference::Goe => 0.5 * PI * s * (-0.25 * PI * s * s).exp(),
            Reference::Gue => 32.0 / (PI * PI) * s * s * (-4.0 * s * s / PI).exp(),
            Reference::Gse => {
                2f64.powi(18) / (3f64.powi(6) * PI.powi(3)) * s.powi(4) * (-64.0 * s * s / (9.0 * PI)).exp()
            }
        }
    }

    pub fn spacing_cdf(self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            Reference::Poisson => 1.0 - (-s).exp(),
            Reference::Goe => 1.0 - (-0.25 * PI * s * s).exp(),
            Reference::Gue => {
                let a = 4.0 / PI;
                let c = 32.0 / (PI * PI);
                c * (-s * (-a * s * s).exp() / (2.0 * a) + PI.sqrt() / (4.0 * a.powf(1.5)) * erf(a.sqrt() * s))
            }
            Reference::Gse => {
                let b = 64.0 / (9.0 * PI);
                let c = 2f64.powi(18) / (3f64.powi(6) * PI.powi(3));
                let poly = s.powi(3) / (2.0 * b) + 3.0 * s / (4.0 * b * b);
                c * (-poly * (-b * s * s).exp() + 3.0 * PI.sqrt() / (8.0 * b.powf(2.5)) * erf(b.sqrt() * s))
            }
        }
    }

    /// Large-`L` number variance (exact for Poisson).
    pub fn number_variance(self, l: f64) -> f64 {
        let pi2 = PI * PI;
        match self {
            Reference::Poisson => l,
            Reference::Goe => 2.0 / pi2 * ((2.0 * PI * l).ln() + EULER_GAMMA + 1.0 - pi2 / 8.0),
            Reference::Gue => 1.0 / pi2 * ((2.0 * PI * l).ln() + EULER_GAMMA + 1.0),
            Reference::Gse => 1.0 / (2.0 * pi2) * ((4.0 * PI * l).ln() + EULER_GAMMA + 1.0 + pi2 / 8.0),
        }
        .max(0.0)
    }

    /// Large-`L` spectral rigidity (exact for Poisson).
    pub fn rigidity(self, l: f64) -> f64 {
        let pi2 = PI * PI;
        match self {
            Reference::Poisson => l / 15.0,
            Reference::Goe => 1.0 / pi2 * ((2.0 * PI * l).ln() + EULER_GAMMA - 1.25 - pi2 / 8.0),
            Reference::Gue => 1.0 / (2.0 * pi2) * ((2.0 * PI * l).ln() + EULER_GAMMA - 1.25),
            Reference::Gse => 1.0 / (4.0 * pi2) * ((4.0 * PI * l).ln() + EULER_GAMMA - 1.25 + pi2 / 8.0),
        }
        .max(0.0)
    }
}

/// One-sample KS distance of the spacings to a reference distribution.
pub fn ks_to_reference(spacings: &[f64], reference: Reference) -> Result<f64> {
    ks_to_cdf(spacings, |s| reference.spacing_cdf(s))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticsConfig {
    pub discard: usize,
    pub windows: usize,
    pub seed: u64,
    pub l_grid: Vec<f64>,
}

impl Default for StatisticsConfig {
    fn default() -> Self {
        Self {
            discard: DEFAULT_DISCARD,
            windows: DEFAULT_WINDOWS,
            seed: 0,
            l_grid: (1..=20).map(|i| i as f64 * 0.5).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCurves {
    pub name: Reference,
    pub spacing_pdf: Vec<f64>,
    pub spacing_cdf: Vec<f64>,
    pub number_variance: Vec<f64>,
    pub rigidity: Vec<f64>,
    pub ks_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticsReport {
    pub source_digest: String,
    pub levels: usize,
    pub discarded: usize,
    pub mean_spacing: f64,
    pub too_few_levels: bool,
    pub seed: u64,
    pub windows: usize,
    pub spacing_centers: Vec<f64>,
    pub spacing_density: Vec<f64>,
    pub spacing_edges: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub l_grid: Vec<f64>,
    pub number_variance: Vec<f64>,
    pub rigidity: Vec<f64>,
    pub references: Vec<ReferenceCurves>,
}

impl StatisticsReport {
    pub fn ks(&self, reference: Reference) -> f64 {
        self.references.iter().find(|r| r.name == reference).map(|r| r.ks_distance).unwrap_or(f64::NAN)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_spacing_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,density,cumulative,poisson,goe,gue,gse")?;
        for (i, s) in self.spacing_centers.iter().enumerate() {
            write!(w, "{s},{},{}", self.spacing_density[i], self.cumulative[i])?;
            for r in &self.references {
                write!(w, ",{}", r.spacing_pdf[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_long_range_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "L,number_variance,rigidity")?;
        for (i, l) in self.l_grid.iter().enumerate() {
            writeln!(w, "{l},{},{}", self.number_variance[i], self.rigidity[i])?;
        }
        Ok(())
    }
}

/// Full fluctuation analysis of an unfolded spectrum.
pub fn statistics_report(unfolded: &UnfoldedSpectrum, config: &StatisticsConfig) -> Result<StatisticsReport> {
    let u = unfolded.discard_lowest(config.discard)?;
    let spacing = spacing_distribution(&u, None)?;
    let sigma2 = number_variance(&u, &config.l_grid, config.windows, config.seed)?;
    let delta3 = rigidity(&u, &config.l_grid, config.windows, config.seed)?;
    let centers = BinSpec::with_width(0.0, 4.0, 0.1)?.centers();
    let upper = &spacing.histogram.edges[1..];
    let references = Reference::ALL
        .iter()
        .map(|&r| {
            Ok(ReferenceCurves {
                name: r,
                spacing_pdf: centers.iter().map(|&s| r.spacing_pdf(s)).collect(),
                spacing_cdf: upper.iter().map(|&s| r.spacing_cdf(s)).collect(),
                number_variance: config.l_grid.iter().map(|&l| r.number_variance(l)).collect(),
                rigidity: config.l_grid.iter().map(|&l| r.rigidity(l)).collect(),
                ks_distance: ks_to_reference(&spacing.spacings, r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StatisticsReport {
        source_digest: u.source_digest.clone(),
        levels: u.len(),
        discarded: config.discard,
        mean_spacing: u.mean_spacing(),
        too_few_levels: spacing.too_few_levels,
        seed: config.seed,
        windows: config.windows,
        spacing_centers: centers,
        spacing_density: spacing.histogram.densities.clone(),
        spacing_edges: spacing.histogram.edges.clone(),
        cumulative: spacing.cumulative,
        l_grid: config.l_grid.clone(),
        number_variance: sigma2,
        rigidity: delta3,
        references,
    })
}
