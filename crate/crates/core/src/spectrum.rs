//! Closed-graph eigenwavenumbers from the vertex secular matrix.
//!
//! Roots are bracketed with an exact counting function rather than sign
//! changes of the determinant: on a graph with Kramers degeneracy every root
//! is (at least) double and the determinant touches zero without crossing.
//! Between poles the eigenvalues of `H(k)` increase monotonically with `k`;
//! at a pole of bond `b` (`sin(kL_b + phi_b) = 0`) exactly one eigenvalue runs
//! off to `+inf` and re-enters from `-inf`. Hence
//!
//! `R(k) = #poles in (0, k] - #negative eigenvalues of H(k)`
//!
//! increases by the multiplicity of every root and is constant elsewhere.
//! Simple roots are then polished by bisection on the sign of the regularized
//! secular function, clusters by bisection on `R`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphTopology;

/// Smallest admissible `|sin(kL_b + phi_b)|` for [`secular_matrix`].
pub const POLE_GUARD: f64 = 1e-9;

/// Absolute root tolerance in k.
pub const ROOT_TOLERANCE: f64 = 1e-10;

const CLUSTER_WIDTH: f64 = 1e-11;
const REGULARIZATION_SWITCH: f64 = 1e-3;
const CIRCLE_RADIUS: f64 = 1e-2;
const CIRCLE_NODES: usize = 16;

#[derive(Clone, Debug)]
pub struct SecularMatrix {
    pub k: f64,
    pub entries: DMatrix<Complex64>,
}

impl SecularMatrix {
    pub fn hermiticity_defect(&self) -> f64 {
        let h = &self.entries;
        (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug)]
struct BondTerm {
    i: usize,
    j: usize,
    length: f64,
    offset: f64,
    /// `e^{-i phase}` for the `(from, to)` entry.
    coupling: Complex64,
}

/// Per-bond data needed to evaluate the secular matrix at any k.
#[derive(Clone, Debug)]
pub struct SecularSystem {
    n: usize,
    terms: Vec<BondTerm>,
    total_length: f64,
    digest: String,
}

impl SecularSystem {
    pub fn new(topology: &GraphTopology) -> Self {
        let conv = topology.convention();
        let terms = topology
            .bonds()
            .iter()
            .enumerate()
            .map(|(b, bond)| {
                let (i, j) = topology.endpoints(b);
                BondTerm {
                    i,
                    j,
                    length: bond.length,
                    offset: bond.phase_offset(conv),
                    coupling: Complex64::from_polar(1.0, -bond.directed_phase(conv)),
                }
            })
            .collect();
        Self {
            n: topology.vertex_count(),
            terms,
            total_length: topology.total_length(),
            digest: topology.digest(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    fn min_sin(&self, k: f64) -> (f64, usize) {
        self.terms
            .iter()
            .enumerate()
            .map(|(b, t)| ((k * t.length + t.offset).sin().abs(), b))
            .fold((f64::INFINITY, 0), |acc, x| if x.0 < acc.0 { x } else { acc })
    }

    pub fn matrix(&self, k: f64) -> Result<SecularMatrix> {
        let (smallest, bond) = self.min_sin(k);
        if smallest <= POLE_GUARD {
            return Err(Error::NearBondResonance { k, bond });
        }
        let mut h = DMatrix::zeros(self.n, self.n);
        for t in &self.terms {
            let theta = k * t.length + t.offset;
            let (s, c) = theta.sin_cos();
            h[(t.i, t.i)] -= Complex64::from(c / s);
            h[(t.j, t.j)] -= Complex64::from(c / s);
            h[(t.i, t.j)] += t.coupling / s;
            h[(t.j, t.i)] += t.coupling.conj() / s;
        }
        Ok(SecularMatrix { k, entries: h })
    }

    /// `det H(z) * prod_b sin(z L_b + phi_b)` at complex `z` (off the poles).
    fn regularized_det_complex(&self, z: Complex64) -> Complex64 {
        let mut h = DMatrix::<Complex64>::zeros(self.n, self.n);
        let mut prod = Complex64::from(1.0);
        for t in &self.terms {
            let theta = z * t.length + t.offset;
            let (s, c) = (theta.sin(), theta.cos());
            h[(t.i, t.i)] -= c / s;
            h[(t.j, t.j)] -= c / s;
            h[(t.i, t.j)] += t.coupling / s;
            h[(t.j, t.i)] += t.coupling.conj() / s;
            prod *= s;
        }
        h.lu().determinant() * prod
    }

    /// `det H(k) * prod_b sin(kL_b + phi_b)`: real, finite and entire in k.
    ///
    /// Close to a pole the value is taken as the mean over a small circle in
    /// the complex k plane, exact for an entire function up to the
    /// trapezoidal error.
    pub fn secular_function(&self, k: f64) -> f64 {
        if self.min_sin(k).0 > REGULARIZATION_SWITCH {
            return self.regularized_det_complex(Complex64::from(k)).re;
        }
        let sum: Complex64 = (0..CIRCLE_NODES)
            .map(|j| {
                let angle = PI * (2 * j + 1) as f64 / CIRCLE_NODES as f64;
                self.regularized_det_complex(k + Complex64::from_polar(CIRCLE_RADIUS, angle))
            })
            .sum();
        (sum / CIRCLE_NODES as f64).re
    }

    /// Number of bond poles in `(0, k]`.
    pub fn pole_count(&self, k: f64) -> i64 {
        self.terms
            .iter()
            .map(|t| {
                let off = t.offset - PI * (t.offset / PI).floor();
                ((k * t.length + off) / PI).floor() as i64
            })
            .sum()
    }

    /// Number of negative eigenvalues of `H(k)`.
    pub fn negative_eigenvalues(&self, k: f64) -> Result<i64> {
        let h = self.matrix(k)?;
        Ok(h.entries.symmetric_eigenvalues().iter().filter(|&&l| l < 0.0).count() as i64)
    }

    /// Shifts `k` upwards by tiny steps until it clears the pole guard.
    fn clear_of_poles(&self, mut k: f64) -> f64 {
        let mut step = 1e-9 * k.abs().max(1.0);
        while self.min_sin(k).0 <= 1e3 * POLE_GUARD {
            k += step;
            step *= 2.0;
        }
        k
    }

    /// Counting function `R(k)`; increases by the multiplicity of each root.
    pub fn root_count(&self, k: f64) -> i64 {
        let k = self.clear_of_poles(k);
        self.pole_count(k) - self.negative_eigenvalues(k).expect("k cleared of poles")
    }

    fn refine_sign(&self, mut lo: f64, mut hi: f64) -> Option<f64> {
        let mut f_lo = self.secular_function(lo);
        let f_hi = self.secular_function(hi);
        if !(f_lo * f_hi < 0.0) {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 0.1 * CLUSTER_WIDTH || mid <= lo || mid >= hi {
                break;
            }
            let f_mid = self.secular_function(mid);
            if f_mid == 0.0 {
                return Some(mid);
            }
            if (f_mid < 0.0) == (f_lo < 0.0) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    fn isolate(&self, lo: f64, hi: f64, r_lo: i64, r_hi: i64, out: &mut Vec<f64>) {
        let m = r_hi - r_lo;
        if m <= 0 {
            return;
        }
        if m == 1 {
            if let Some(root) = self.refine_sign(lo, hi) {
                out.push(root);
                return;
            }
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo <= CLUSTER_WIDTH || mid <= lo || mid >= hi {
            out.extend(std::iter::repeat_n(mid, m as usize));
            return;
        }
        let r_mid = self.root_count(mid);
        self.isolate(lo, mid, r_lo, r_mid.clamp(r_lo, r_hi), out);
        self.isolate(mid, hi, r_mid.clamp(r_lo, r_hi), r_hi, out);
    }
}

pub fn secular_matrix(topology: &GraphTopology, k: f64) -> Result<SecularMatrix> {
    SecularSystem::new(topology).matrix(k)
}

pub fn secular_function(topology: &GraphTopology, k: f64) -> f64 {
    SecularSystem::new(topology).secular_function(k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldPolicy {
    Raw,
    KramersFolded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub eigenwavenumbers: Vec<f64>,
    pub fold: FoldPolicy,
    pub topology_digest: String,
    /// Gap inside each folded doublet; empty for raw records.
    pub doublet_gaps: Vec<f64>,
    pub tolerance: f64,
}

impl SpectrumRecord {
    pub fn len(&self) -> usize {
        self.eigenwavenumbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenwavenumbers.is_empty()
    }

    /// Distance of each root to its partner (folded) or nearest neighbour (raw).
    pub fn partner_gaps(&self) -> Vec<f64> {
        if self.fold == FoldPolicy::KramersFolded {
            return self.doublet_gaps.clone();
        }
        let k = &self.eigenwavenumbers;
        (0..k.len())
            .map(|i| {
                let left = if i > 0 { k[i] - k[i - 1] } else { f64::INFINITY };
                let right = if i + 1 < k.len() { k[i + 1] - k[i] } else { f64::INFINITY };
                left.min(right)
            })
            .collect()
    }

    /// CSV export: `index,k,doublet_partner_gap`, metadata in `#` header lines.
    pub fn write_csv<W: Write>(&self, mut w: W, seed: Option<u64>) -> Result<()> {
        writeln!(w, "# topology_digest={}", self.topology_digest)?;
        match seed {
            Some(s) => writeln!(w, "# seed={s}")?,
            None => writeln!(w, "# seed=none")?,
        }
        writeln!(w, "# root_tolerance={:e}", self.tolerance)?;
        let fold = match self.fold {
            FoldPolicy::Raw => "raw",
            FoldPolicy::KramersFolded => "kramers-folded",
        };
        writeln!(w, "# fold={fold}")?;
        writeln!(w, "index,k,doublet_partner_gap")?;
        for (i, (k, g)) in self.eigenwavenumbers.iter().zip(self.partner_gaps()).enumerate() {
            writeln!(w, "{i},{k},{g:e}")?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut digest = String::new();
        let mut fold = FoldPolicy::Raw;
        let mut tolerance = ROOT_TOLERANCE;
        let mut ks = Vec::new();
        let mut gaps = Vec::new();
        for line in text.lines() {
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((key, value)) = meta.trim().split_once('=') {
                    match key {
                        "topology_digest" => digest = value.to_string(),
                        "fold" if value == "kramers-folded" => fold = FoldPolicy::KramersFolded,
                        "root_tolerance" => tolerance = value.parse().unwrap_or(ROOT_TOLERANCE),
                        _ => {}
                    }
                }
                continue;
            }
            if line.starts_with("index") || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Schema(format!("spectrum row needs 3 columns: {line}")));
            }
            ks.push(cols[1].parse::<f64>().map_err(|e| Error::Schema(e.to_string()))?);
            gaps.push(cols[2].parse::<f64>().map_err(|e| Error::Schema(e.to_string()))?);
        }
        let doublet_gaps = if fold == FoldPolicy::KramersFolded { gaps } else { Vec::new() };
        Ok(Self { eigenwavenumbers: ks, fold, topology_digest: digest, doublet_gaps, tolerance })
    }
}

/// All roots of the regularized secular function in `(k_min, k_max]`,
/// listed with multiplicity.
pub fn find_eigenwavenumbers(topology: &GraphTopology, k_min: f64, k_max: f64, step: f64) -> Result<SpectrumRecord> {
    let system = SecularSystem::new(topology);
    if !(k_min > 0.0) || !(k_max > k_min) {
        return Err(Error::InvalidParameter(format!("need 0 < k_min < k_max, got ({k_min}, {k_max})")));
    }
    let required = PI / (8.0 * system.total_length());
    if !(step > 0.0) || step > required {
        return Err(Error::ScanTooCoarse { step, required });
    }
    let n = ((k_max - k_min) / step).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| if i == n { k_max } else { k_min + i as f64 * step }).collect();
    let counts: Vec<i64> = grid.par_iter().map(|&k| system.root_count(k)).collect();
    let roots: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut out = Vec::new();
            system.isolate(grid[i], grid[i + 1], counts[i], counts[i + 1], &mut out);
            out
        })
        .collect();
    Ok(SpectrumRecord {
        eigenwavenumbers: roots,
        fold: FoldPolicy::Raw,
        topology_digest: system.digest.clone(),
        doublet_gaps: Vec::new(),
        tolerance: ROOT_TOLERANCE,
    })
}

/// Default scan step: a quarter of the maximal admissible one.
pub fn default_scan_step(topology: &GraphTopology) -> f64 {
    PI / (32.0 * topology.total_length())
}

/// The first `count` roots above `k_min`, using the mean density L/pi to size
/// the scan window.
pub fn first_eigenwavenumbers(topology: &GraphTopology, count: usize, k_min: f64) -> Result<SpectrumRecord> {
    let step = default_scan_step(topology);
    let spacing = PI / topology.total_length();
    let mut k_max = k_min + (count as f64 + 20.0) * spacing;
    loop {
        let mut record = find_eigenwavenumbers(topology, k_min, k_max, step)?;
        if record.len() >= count {
            record.eigenwavenumbers.truncate(count);
            return Ok(record);
        }
        k_max += (count - record.len() + 20) as f64 * spacing;
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DoubletPairing {
    pub pairs: Vec<(usize, usize)>,
    pub unpaired: Vec<usize>,
}

impl DoubletPairing {
    pub fn unpaired_fraction(&self, total: usize) -> f64 {
        if total == 0 {
            0.0
        } else {
            self.unpaired.len() as f64 / total as f64
        }
    }
}

/// Greedy pairing of consecutive sorted values closer than `tolerance`.
pub fn pair_doublets(values: &[f64], tolerance: f64) -> DoubletPairing {
    let mut pairing = DoubletPairing::default();
    let mut i = 0;
    while i < values.len() {
        if i + 1 < values.len() && values[i + 1] - values[i] <= tolerance {
            pairing.pairs.push((i, i + 1));
            i += 2;
        } else {
            pairing.unpaired.push(i);
            i += 1;
        }
    }
    pairing
}

/// Replaces every Kramers doublet by its mean.
pub fn kramers_fold(record: &SpectrumRecord, tolerance: f64) -> Result<SpectrumRecord> {
    let k = &record.eigenwavenumbers;
    let pairing = pair_doublets(k, tolerance);
    if let Some(&index) = pairing.unpaired.first() {
        return Err(Error::UnpairedRoot { index, k: k[index] });
    }
    Ok(SpectrumRecord {
        eigenwavenumbers: pairing.pairs.iter().map(|&(a, b)| 0.5 * (k[a] + k[b])).collect(),
        fold: FoldPolicy::KramersFolded,
        topology_digest: record.topology_digest.clone(),
        doublet_gaps: pairing.pairs.iter().map(|&(a, b)| k[b] - k[a]).collect(),
        tolerance: record.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Bond, VertexId};

    fn interval(length: f64) -> GraphTopology {
        GraphTopology::new(
            vec![VertexId::up(1), VertexId::up(2)],
            vec![Bond::new(VertexId::up(1), VertexId::up(2), length)],
            vec![],
        )
        .unwrap()
    }

    fn raw(values: Vec<f64>) -> SpectrumRecord {
        SpectrumRecord {
            eigenwavenumbers: values,
            fold: FoldPolicy::Raw,
            topology_digest: String::new(),
            doublet_gaps: Vec::new(),
            tolerance: ROOT_TOLERANCE,
        }
    }

    #[test]
    fn interval_matrix_at_quarter_wave() {
        let h = secular_matrix(&interval(1.0), PI / 2.0).unwrap();
        let expected = [[0.0, 1.0], [1.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h.entries[(i, j)] - Complex64::from(expected[i][j])).norm() < 1e-15);
            }
        }
        assert!((h.entries.clone().lu().determinant() + 1.0).norm() < 1e-15);
    }

    #[test]
    fn pole_guard() {
        let err = secular_matrix(&interval(1.0), PI).unwrap_err();
        assert!(matches!(err, Error::NearBondResonance { bond: 0, .. }));
    }

    #[test]
    fn interval_secular_function_is_minus_sine() {
        // det [[-cot, 1/s], [1/s, -cot]] = cot^2 - 1/s^2 = -1, times sin(k).
        let g = interval(1.0);
        for &k in &[0.3, 1.0, 2.5, PI - 1e-7, PI, 2.0 * PI + 1e-5, 7.7] {
            let f = secular_function(&g, k);
            assert!((f + k.sin()).abs() < 1e-9, "k={k}: {f} vs {}", -k.sin());
        }
    }

    #[test]
    fn interval_spectrum() {
        let rec = find_eigenwavenumbers(&interval(1.0), 0.1, 10.0, PI / 8.0).unwrap();
        assert_eq!(rec.len(), 3);
        for (n, k) in rec.eigenwavenumbers.iter().enumerate() {
            assert!((k - (n + 1) as f64 * PI).abs() < ROOT_TOLERANCE, "{k}");
        }
    }

    #[test]
    fn coarse_scan_refused() {
        let err = find_eigenwavenumbers(&interval(1.0), 0.1, 10.0, 1.0).unwrap_err();
        match err {
            Error::ScanTooCoarse { required, .. } => assert!((required - PI / 8.0).abs() < 1e-15),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn fold_exact_pairs() {
        let rec = raw(vec![1.0, 1.0 + 1e-9, 2.0, 2.0 + 1e-9]);
        let folded = kramers_fold(&rec, 1e-8).unwrap();
        assert_eq!(folded.len(), 2);
        assert!((folded.eigenwavenumbers[0] - (1.0 + 5e-10)).abs() < 1e-15);
        assert!((folded.eigenwavenumbers[1] - (2.0 + 5e-10)).abs() < 1e-15);
        assert_eq!(folded.fold, FoldPolicy::KramersFolded);
    }

    #[test]
    fn fold_odd_count_fails() {
        let rec = raw(vec![1.0, 1.0 + 1e-9, 2.0]);
        assert!(matches!(kramers_fold(&rec, 1e-8), Err(Error::UnpairedRoot { index: 2, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let rec = kramers_fold(&raw(vec![1.0, 1.0 + 1e-9, 2.5, 2.5 + 2e-9]), 1e-8).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf, Some(7)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("# seed=7"));
        let back = SpectrumRecord::read_csv(&text).unwrap();
        assert_eq!(back.eigenwavenumbers, rec.eigenwavenumbers);
        assert_eq!(back.fold, FoldPolicy::KramersFolded);
    }
}
