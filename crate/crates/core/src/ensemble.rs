//! Ensembles of scattering matrices, sample files and distribution comparisons.

use std::f64::consts::TAU;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{apply_phase_shifter, GraphTopology, PhaseShifterSetting, VertexId};
pub use crate::histogram::{histogram, ks_distance, BinSpec, HistogramDensity};
use crate::histogram::variance;
use crate::rmt::RmtModel;
use crate::scattering::{BondScatteringSystem, ScatteringSample};

/// Graph ensemble: mirrored length increments spanning one phase turn at band
/// centre, S sampled on an even k-grid for every realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphEnsembleConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub k_points: usize,
    pub realizations: usize,
    pub eps: f64,
    /// Shifted subgraph bond; its mirror receives the same increment.
    pub shifter_bond: (u32, u32),
    pub seed: u64,
}

impl Default for GraphEnsembleConfig {
    fn default() -> Self {
        Self {
            k_min: 100.0,
            k_max: 300.0,
            k_points: 2000,
            realizations: 30,
            eps: 0.0175,
            shifter_bond: crate::graph::defaults::SHIFTER_BOND,
            seed: 0,
        }
    }
}

impl GraphEnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_min > 0.0 && self.k_max > self.k_min) || self.k_points == 0 {
            return Err(Error::InvalidParameter("k grid must be nonempty with 0 < k_min < k_max".into()));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidParameter("realizations must be >= 1".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be >= 0, got {}", self.eps)));
        }
        Ok(())
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        if self.k_points == 1 {
            return vec![0.5 * (self.k_min + self.k_max)];
        }
        let step = (self.k_max - self.k_min) / (self.k_points - 1) as f64;
        (0..self.k_points).map(|i| self.k_min + i as f64 * step).collect()
    }

    /// Increment of realization `r`: `r / R` of a `2 pi` turn at band centre.
    pub fn increment(&self, r: usize) -> f64 {
        let k_centre = 0.5 * (self.k_min + self.k_max);
        r as f64 * TAU / (k_centre * self.realizations as f64)
    }

    pub fn shifter(&self, r: usize) -> PhaseShifterSetting {
        let (a, b) = self.shifter_bond;
        PhaseShifterSetting::mirrored(VertexId::up(a), VertexId::up(b), self.increment(r))
    }
}

/// One sample tagged with its realization index.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSample {
    pub realization: usize,
    pub sample: ScatteringSample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Graph,
    Rmt,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Graph => "graph",
            Source::Rmt => "rmt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub source: Source,
    pub samples: Vec<EnsembleSample>,
}

pub fn run_graph_ensemble(topology: &GraphTopology, config: &GraphEnsembleConfig) -> Result<Ensemble> {
    config.validate()?;
    let ks = config.wavenumbers();
    let tasks: Vec<(usize, usize)> = (0..config.realizations)
        .flat_map(|r| (0..ks.len()).step_by(CHUNK).map(move |c| (r, c)))
        .collect();
    let systems = (0..config.realizations)
        .into_par_iter()
        .map(|r| Ok(BondScatteringSystem::new(&apply_phase_shifter(topology, &config.shifter(r))?)))
        .collect::<Result<Vec<_>>>()?;
    let chunks = tasks
        .into_par_iter()
        .map(|(r, c)| {
            ks[c..(c + CHUNK).min(ks.len())]
                .iter()
                .map(|&k| Ok(EnsembleSample { realization: r, sample: systems[r].s_matrix(k, config.eps)? }))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { source: Source::Graph, samples: chunks.into_iter().flatten().collect() })
}

const CHUNK: usize = 100;

pub fn run_rmt_ensemble(model: &RmtModel) -> Result<Ensemble> {
    model.validate()?;
    let per = (0..model.ensemble_size as u64)
        .into_par_iter()
        .map(|r| model.realization_samples(r))
        .collect::<Result<Vec<_>>>()?;
    let samples = per
        .into_iter()
        .enumerate()
        .flat_map(|(r, v)| v.into_iter().map(move |sample| EnsembleSample { realization: r, sample }))
        .collect();
    Ok(Ensemble { source: Source::Rmt, samples })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Re,
    Im,
    Abs,
}

impl Part {
    pub fn apply(self, z: Complex64) -> f64 {
        match self {
            Part::Re => z.re,
            Part::Im => z.im,
            Part::Abs => z.norm(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Part::Re => "Re",
            Part::Im => "Im",
            Part::Abs => "Abs",
        }
    }
}

/// Matrix element `S_{out,in}` labelled by port names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub label: String,
    pub out_port: usize,
    pub in_port: usize,
}

pub const PORT_NAMES: [&str; 4] = ["1", "2", "1bar", "2bar"];

impl Entry {
    pub fn new(out_port: usize, in_port: usize) -> Self {
        let name = |p: usize| PORT_NAMES.get(p).map_or_else(|| p.to_string(), |s| s.to_string());
        Self { label: format!("S[{},{}]", name(out_port), name(in_port)), out_port, in_port }
    }

    /// `S_11`, `S_12`, `S_1 1bar`, `S_1 2bar`.
    pub fn standard() -> Vec<Self> {
        vec![Self::new(0, 0), Self::new(0, 1), Self::new(0, 2), Self::new(0, 3)]
    }
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn values(&self, entry: &Entry, part: Part) -> Vec<f64> {
        self.samples.iter().map(|s| part.apply(s.sample.s[(entry.out_port, entry.in_port)])).collect()
    }

    pub fn elements(&self, entry: &Entry) -> Vec<Complex64> {
        self.samples.iter().map(|s| s.sample.s[(entry.out_port, entry.in_port)]).collect()
    }

    /// CSV with one row per matrix element.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "source,realization,k,eps,port_a,port_b,re,im")?;
        let src = self.source.as_str();
        for s in &self.samples {
            let m = &s.sample.s;
            for b in 0..m.nrows() {
                for a in 0..m.ncols() {
                    let z = m[(b, a)];
                    writeln!(w, "{src},{},{:e},{:e},{a},{b},{:e},{:e}", s.realization, s.sample.k, s.sample.eps, z.re, z.im)?;
                }
            }
        }
        Ok(())
    }

    /// Reads back a file written by [`Ensemble::write_csv`].
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut source = None;
        let mut samples: Vec<EnsembleSample> = Vec::new();
        let mut current: Vec<(usize, usize, Complex64)> = Vec::new();
        let mut key: Option<(usize, u64, u64)> = None;
        let flush = |key: Option<(usize, u64, u64)>, cur: &mut Vec<(usize, usize, Complex64)>, out: &mut Vec<EnsembleSample>| -> Result<()> {
            let Some((r, k, eps)) = key else { return Ok(()) };
            let dim = (cur.len() as f64).sqrt().round() as usize;
            if dim * dim != cur.len() {
                return Err(Error::Schema(format!("sample at k={} has {} entries", f64::from_bits(k), cur.len())));
            }
            let mut s = nalgebra::DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
            for &(a, b, z) in cur.iter() {
                if a >= dim || b >= dim {
                    return Err(Error::Schema("port index out of range".into()));
                }
                s[(b, a)] = z;
            }
            out.push(EnsembleSample {
                realization: r,
                sample: ScatteringSample { k: f64::from_bits(k), eps: f64::from_bits(eps), s },
            });
            cur.clear();
            Ok(())
        };
        for row in rdr.records() {
            let row = row.map_err(|e| Error::Schema(e.to_string()))?;
            if row.len() != 8 {
                return Err(Error::Schema(format!("expected 8 columns, got {}", row.len())));
            }
            let num = |i: usize| -> Result<f64> { row[i].parse().map_err(|_| Error::Schema(format!("bad number {:?}", &row[i]))) };
            let int = |i: usize| -> Result<usize> { row[i].parse().map_err(|_| Error::Schema(format!("bad index {:?}", &row[i]))) };
            let src = match &row[0] {
                "graph" => Source::Graph,
                "rmt" => Source::Rmt,
                other => return Err(Error::Schema(format!("unknown source {other:?}"))),
            };
            if *source.get_or_insert(src) != src {
                return Err(Error::Schema("mixed sources in one sample file".into()));
            }
            let this = (int(1)?, num(2)?.to_bits(), num(3)?.to_bits());
            let (a, b) = (int(4)?, int(5)?);
            if key != Some(this) || (a == 0 && b == 0) {
                flush(key, &mut current, &mut samples)?;
                key = Some(this);
            }
            current.push((a, b, Complex64::new(num(6)?, num(7)?)));
        }
        flush(key, &mut current, &mut samples)?;
        Ok(Self { source: source.ok_or(Error::Empty("sample file"))?, samples })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Largest KS distance accepted as agreement.
    pub ks_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { ks_max: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryComparison {
    pub entry: Entry,
    pub part: Part,
    pub ks: f64,
    pub variance_a: f64,
    pub variance_b: f64,
    pub variance_ratio: f64,
    pub pass: bool,
    pub histogram_a: HistogramDensity,
    pub histogram_b: HistogramDensity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub source_a: Source,
    pub source_b: Source,
    pub samples_a: usize,
    pub samples_b: usize,
    pub thresholds: Thresholds,
    pub comparisons: Vec<EntryComparison>,
    pub pass: bool,
}

impl CompareReport {
    pub fn get(&self, entry: &Entry, part: Part) -> Option<&EntryComparison> {
        self.comparisons.iter().find(|c| &c.entry == entry && c.part == part)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-entry histograms, KS distances and variance ratios of two ensembles.
pub fn compare_report(a: &Ensemble, b: &Ensemble, entries: &[Entry], thresholds: &Thresholds) -> Result<CompareReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("ensemble"));
    }
    let dim = |e: &Ensemble| e.samples[0].sample.s.nrows();
    if let Some(bad) = entries.iter().find(|e| e.out_port.max(e.in_port) >= dim(a).min(dim(b))) {
        return Err(Error::Shape(format!("entry {} outside the sampled matrices", bad.label)));
    }
    let bins = BinSpec::with_width(-1.0, 1.0, 0.05)?;
    let abs_bins = BinSpec::with_width(0.0, 1.0, 0.025)?;
    let mut comparisons = Vec::new();
    for entry in entries {
        for part in [Part::Re, Part::Im, Part::Abs] {
            let (va, vb) = (a.values(entry, part), b.values(entry, part));
            let spec = if part == Part::Abs { abs_bins } else { bins };
            let name = format!("{} {}", part.as_str(), entry.label);
            let ks = ks_distance(&va, &vb)?;
            let (var_a, var_b) = (variance(&va), variance(&vb));
            comparisons.push(EntryComparison {
                entry: entry.clone(),
                part,
                ks,
                variance_a: var_a,
                variance_b: var_b,
                variance_ratio: var_b / var_a,
                pass: ks < thresholds.ks_max,
                histogram_a: histogram(&name, &va, spec)?,
                histogram_b: histogram(&name, &vb, spec)?,
            });
        }
    }
    let pass = comparisons.iter().all(|c| c.pass);
    Ok(CompareReport {
        source_a: a.source,
        source_b: b.source,
        samples_a: a.len(),
        samples_b: b.len(),
        thresholds: thresholds.clone(),
        comparisons,
        pass,
    })
}

/// `var(Re S_{1 2bar}) / var(Re S_12)` and `KS(Re S_12, Re S_{1 2bar})`.
pub fn cross_sector_ratio(e: &Ensemble) -> Result<(f64, f64)> {
    let direct = e.values(&Entry::new(0, 1), Part::Re);
    let cross = e.values(&Entry::new(0, 3), Part::Re);
    Ok((variance(&cross) / variance(&direct), ks_distance(&direct, &cross)?))
}
