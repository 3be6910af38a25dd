//! Open-graph scattering in the space of directed bonds.
//!
//! `S_B(k) = D(k) U` with `D` the diagonal bond propagator and `U` the vertex
//! transition operator. Port-to-port scattering follows from one LU
//! factorization of `1 - S_B` per wavenumber, reused for every input port.
//!
//! The closed-graph secular function `zeta_B(k) = det(1 - S_B(k))` is also
//! provided, together with a root finder based on the eigenphases of the
//! unitary `S_B(k)`: their sum grows exactly like `2 L_tot k`, so the number
//! of eigenphases that wrapped through zero in `(a, b]` (i.e. the number of
//! roots, with multiplicity) is
//!
//! `(2 L_tot (b - a) - (Theta(b) - Theta(a))) / 2 pi`
//!
//! with `Theta` the sum of the eigenphases reduced to `[0, 2 pi)`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{apply_phase_shifter, wavenumber_to_frequency, GraphTopology, PhaseShifterSetting, VertexId};

/// Minimum absorption used in sweeps to stay off exact resonances.
pub const EPS_FLOOR: f64 = 1e-12;

const ZETA_CLUSTER_WIDTH: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DirectedBondIndex {
    pub bond: usize,
    /// Vertex positions.
    pub from: usize,
    pub to: usize,
}

/// Directed-bond operators of one graph; `k`-independent parts precomputed.
#[derive(Clone, Debug)]
pub struct BondScatteringSystem {
    directed: Vec<DirectedBondIndex>,
    lengths: Vec<f64>,
    /// Phase added to `kL` on each directed bond.
    phases: Vec<f64>,
    transition: DMatrix<f64>,
    /// Vertex position and `tau = 2 / valence` of each port.
    ports: Vec<(usize, f64)>,
    valences: Vec<usize>,
    total_length: f64,
}

/// `S_B = D U` at one wavenumber.
#[derive(Clone, Debug)]
pub struct BondOperator {
    pub propagator: DVector<Complex64>,
    pub transition: DMatrix<f64>,
    pub matrix: DMatrix<Complex64>,
}

impl BondScatteringSystem {
    pub fn new(topology: &GraphTopology) -> Self {
        let conv = topology.convention();
        let valences = topology.valences();
        let mut directed = Vec::with_capacity(2 * topology.bond_count());
        let mut lengths = Vec::with_capacity(2 * topology.bond_count());
        let mut phases = Vec::with_capacity(2 * topology.bond_count());
        for (b, bond) in topology.bonds().iter().enumerate() {
            let (i, j) = topology.endpoints(b);
            let odd = bond.directed_phase(conv);
            let even = bond.phase_offset(conv);
            directed.push(DirectedBondIndex { bond: b, from: i, to: j });
            directed.push(DirectedBondIndex { bond: b, from: j, to: i });
            lengths.extend([bond.length, bond.length]);
            phases.extend([even + odd, even - odd]);
        }
        let n = directed.len();
        let mut transition = DMatrix::zeros(n, n);
        for (out_idx, out) in directed.iter().enumerate() {
            for (in_idx, inc) in directed.iter().enumerate() {
                if inc.to == out.from {
                    let back = if inc.bond == out.bond { 1.0 } else { 0.0 };
                    transition[(out_idx, in_idx)] = 2.0 / valences[out.from] as f64 - back;
                }
            }
        }
        let ports = topology
            .leads()
            .iter()
            .map(|l| {
                let v = topology.position(l.vertex).expect("lead vertex validated");
                (v, 2.0 / valences[v] as f64)
            })
            .collect();
        Self { directed, lengths, phases, transition, ports, valences, total_length: topology.total_length() }
    }

    pub fn directed_bonds(&self) -> &[DirectedBondIndex] {
        &self.directed
    }

    pub fn dimension(&self) -> usize {
        self.directed.len()
    }

    pub fn port_count(&self) -> usize {
        self.ports.len()
    }

    pub fn valences(&self) -> &[usize] {
        &self.valences
    }

    pub fn propagator(&self, k: f64, eps: f64) -> DVector<Complex64> {
        DVector::from_iterator(
            self.dimension(),
            self.lengths
                .iter()
                .zip(&self.phases)
                .map(|(&l, &p)| Complex64::from_polar((-eps * l).exp(), k * l + p)),
        )
    }

    fn bond_matrix(&self, d: &DVector<Complex64>) -> DMatrix<Complex64> {
        let n = self.dimension();
        DMatrix::from_fn(n, n, |r, c| d[r] * self.transition[(r, c)])
    }

    pub fn bond_operator(&self, k: f64, eps: f64) -> BondOperator {
        let d = self.propagator(k, eps);
        let matrix = self.bond_matrix(&d);
        BondOperator { propagator: d, transition: self.transition.clone(), matrix }
    }

    /// Port-space scattering matrix, `S[(b, a)]` from port `a` into port `b`.
    pub fn s_matrix(&self, k: f64, eps: f64) -> Result<ScatteringSample> {
        if self.ports.is_empty() {
            return Err(Error::InvalidParameter("s_matrix needs at least one lead".into()));
        }
        let n = self.dimension();
        let np = self.ports.len();
        let d = self.propagator(k, eps);
        let mut a = -self.bond_matrix(&d);
        for i in 0..n {
            a[(i, i)] += Complex64::from(1.0);
        }
        let mut rhs = DMatrix::<Complex64>::zeros(n, np);
        for (p, &(v, tau)) in self.ports.iter().enumerate() {
            for (idx, db) in self.directed.iter().enumerate() {
                if db.from == v {
                    rhs[(idx, p)] = d[idx] * tau;
                }
            }
        }
        let x = a.lu().solve(&rhs).ok_or(Error::OnResonance(k))?;
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::OnResonance(k));
        }
        let mut s = DMatrix::<Complex64>::zeros(np, np);
        for (b, &(vb, tau_b)) in self.ports.iter().enumerate() {
            for (a_port, &(va, _)) in self.ports.iter().enumerate() {
                let mut sum = Complex64::from(0.0);
                for (idx, db) in self.directed.iter().enumerate() {
                    if db.to == vb {
                        sum += x[(idx, a_port)];
                    }
                }
                let mut direct = 0.0;
                if va == vb {
                    direct = tau_b - if a_port == b { 1.0 } else { 0.0 };
                }
                s[(b, a_port)] = Complex64::from(direct) + sum * tau_b;
            }
        }
        Ok(ScatteringSample { k, eps, s })
    }

    /// `det(1 - S_B(k))` for the closed graph (this system must have no leads).
    pub fn zeta(&self, k: f64) -> Complex64 {
        let mut a = -self.bond_operator(k, 0.0).matrix;
        for i in 0..self.dimension() {
            a[(i, i)] += Complex64::from(1.0);
        }
        a.lu().determinant()
    }

    /// Sum of the eigenphases of `S_B(k)`, each reduced to `[0, 2 pi)`.
    pub fn eigenphase_sum(&self, k: f64) -> f64 {
        let m = self.bond_operator(k, 0.0).matrix;
        let eig = m.schur().eigenvalues().expect("complex Schur form is triangular");
        eig.iter().map(|z| z.arg().rem_euclid(TAU)).sum()
    }

    /// Number of closed-graph roots in `(a, b]` from the eigenphase sums at the ends.
    fn roots_between(&self, a: f64, theta_a: f64, b: f64, theta_b: f64) -> i64 {
        ((2.0 * self.total_length * (b - a) - (theta_b - theta_a)) / TAU).round() as i64
    }

    fn isolate(&self, lo: f64, hi: f64, th_lo: f64, th_hi: f64, m: i64, out: &mut Vec<f64>) {
        if m <= 0 {
            return;
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo <= ZETA_CLUSTER_WIDTH || mid <= lo || mid >= hi {
            out.extend(std::iter::repeat_n(mid, m as usize));
            return;
        }
        let th_mid = self.eigenphase_sum(mid);
        let left = self.roots_between(lo, th_lo, mid, th_mid).clamp(0, m);
        self.isolate(lo, mid, th_lo, th_mid, left, out);
        self.isolate(mid, hi, th_mid, th_hi, m - left, out);
    }
}

/// Single-shot construction of `S_B = D U`.
pub fn build_bond_operator(topology: &GraphTopology, k: f64, eps: f64) -> BondOperator {
    BondScatteringSystem::new(topology).bond_operator(k, eps)
}

pub fn s_matrix(topology: &GraphTopology, k: f64, eps: f64) -> Result<ScatteringSample> {
    BondScatteringSystem::new(topology).s_matrix(k, eps)
}

/// `zeta_B(k) = det(1 - S_B(k))` of the closed graph; leads are ignored.
pub fn secular_zeta(topology: &GraphTopology, k: f64) -> Complex64 {
    BondScatteringSystem::new(&topology.closed()).zeta(k)
}

/// Real zeros of `zeta_B` in `(k_min, k_max]`, with multiplicity.
pub fn find_zeta_roots(topology: &GraphTopology, k_min: f64, k_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(k_min > 0.0) || !(k_max > k_min) || !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < k_min < k_max and step > 0, got ({k_min}, {k_max}, {step})"
        )));
    }
    let system = BondScatteringSystem::new(&topology.closed());
    let n = ((k_max - k_min) / step).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| if i == n { k_max } else { k_min + i as f64 * step }).collect();
    let theta: Vec<f64> = grid.par_iter().map(|&k| system.eigenphase_sum(k)).collect();
    Ok((0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let m = system.roots_between(grid[i], theta[i], grid[i + 1], theta[i + 1]);
            let mut out = Vec::new();
            system.isolate(grid[i], grid[i + 1], theta[i], theta[i + 1], m, &mut out);
            out
        })
        .collect())
}

/// One port-space S matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringSample {
    pub k: f64,
    pub eps: f64,
    pub s: DMatrix<Complex64>,
}

impl ScatteringSample {
    /// `max |S S^dagger - 1|`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = &self.s * self.s.adjoint();
        let n = p.nrows();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (p[(i, j)] - if i == j { Complex64::from(1.0) } else { Complex64::from(0.0) }).norm())
            .fold(0.0, f64::max)
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.s.clone().singular_values().iter().copied().collect()
    }
}

/// Transmission-amplitude map `|S_ba|` over length increments (rows) and
/// wavenumbers (columns), lengthening one bond.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweep {
    pub increments_m: Vec<f64>,
    pub wavenumbers: Vec<f64>,
    pub frequencies_hz: Vec<f64>,
    pub target: (VertexId, VertexId),
    pub port_in: usize,
    pub port_out: usize,
    pub eps: f64,
    pub topology_digest: String,
    #[serde(skip)]
    pub amplitudes: Vec<Vec<f64>>,
}

impl PhaseSweep {
    pub fn column(&self, k_index: usize) -> Vec<f64> {
        self.amplitudes.iter().map(|row| row[k_index]).collect()
    }

    /// Dense CSV: one row per increment, first column the increment.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "increment_m")?;
        for f in &self.frequencies_hz {
            write!(w, ",{f}")?;
        }
        writeln!(w)?;
        for (dl, row) in self.increments_m.iter().zip(&self.amplitudes) {
            write!(w, "{dl}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep metadata serializes")
    }
}

/// Sweep of `|S_{out,in}|` while the bond `target` is lengthened by each increment.
pub fn phase_sweep(
    topology: &GraphTopology,
    target: (VertexId, VertexId),
    increments: &[f64],
    wavenumbers: &[f64],
    port_out: usize,
    port_in: usize,
    eps: f64,
) -> Result<PhaseSweep> {
    if increments.is_empty() || wavenumbers.is_empty() {
        return Err(Error::Empty("sweep grid"));
    }
    if port_out >= topology.leads().len() || port_in >= topology.leads().len() {
        return Err(Error::InvalidParameter("sweep port out of range".into()));
    }
    let eps = eps.max(EPS_FLOOR);
    let amplitudes = increments
        .par_iter()
        .map(|&dl| {
            let shifted = apply_phase_shifter(topology, &PhaseShifterSetting { targets: vec![target], increment: dl })?;
            let system = BondScatteringSystem::new(&shifted);
            wavenumbers
                .iter()
                .map(|&k| system.s_matrix(k, eps).map(|s| s.s[(port_out, port_in)].norm()))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseSweep {
        increments_m: increments.to_vec(),
        wavenumbers: wavenumbers.to_vec(),
        frequencies_hz: wavenumbers.iter().map(|&k| wavenumber_to_frequency(k).unwrap_or(f64::NAN)).collect(),
        target,
        port_in,
        port_out,
        eps,
        topology_digest: topology.digest(),
        amplitudes,
    })
}

/// Increment at which the accumulated phase `k dl` equals `phase`.
pub fn increment_for_phase(k: f64, phase: f64) -> f64 {
    phase / k
}

/// Indices of strict local minima of a sequence (interior points only).
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] < values[i - 1] && values[i] <= values[i + 1])
        .collect()
}

/// Expected minima positions `(2m+1) pi / k` inside `[0, max]`.
pub fn predicted_minima(k: f64, stored_phase: f64, max_increment: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut m = 0;
    loop {
        let target = (2 * m + 1) as f64 * PI - stored_phase;
        m += 1;
        if target < 0.0 {
            continue;
        }
        let dl = target / k;
        if dl > max_increment {
            break;
        }
        out.push(dl);
    }
    out
}
