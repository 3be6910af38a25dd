//! Graph topologies: vertices in two spin sectors, bonds carrying a length,
//! a magnetic vector potential and a static phase, and lead attachments.
//!
//! A [`GraphTopology`] is validated on construction and immutable afterwards.
//! Doubled (symplectic) graphs are produced from a [`GseDoublingSpec`] by
//! [`build_gse_graph`].

mod config;
pub mod defaults;
mod doubling;
mod units;

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use config::{parse_graph_config, BondConfig, CouplingPairConfig, DoublingConfig, GraphConfig, LeadConfig};
pub use doubling::{build_gse_graph, CouplingPair, GseDoublingSpec};
pub use units::{frequency_to_wavenumber, wavenumber_to_frequency, SPEED_OF_LIGHT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    #[default]
    Up,
    Down,
}

impl Sector {
    pub fn flipped(self) -> Self {
        match self {
            Sector::Up => Sector::Down,
            Sector::Down => Sector::Up,
        }
    }
}

/// Vertex label; `Down` vertices are the barred copies of the spin-down subgraph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId {
    pub index: u32,
    #[serde(default)]
    pub sector: Sector,
}

impl VertexId {
    pub const fn up(index: u32) -> Self {
        Self { index, sector: Sector::Up }
    }

    pub const fn down(index: u32) -> Self {
        Self { index, sector: Sector::Down }
    }

    /// The same index in the other sector.
    pub fn mirror(self) -> Self {
        Self { index: self.index, sector: self.sector.flipped() }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sector {
            Sector::Up => write!(f, "{}", self.index),
            Sector::Down => write!(f, "{}bar", self.index),
        }
    }
}

/// How a bond's static phase enters the wave propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PhaseConvention {
    /// Same phase in both propagation directions, like an added length:
    /// the bond phase becomes `kL + phi`.
    #[default]
    Symmetric,
    /// Opposite phases in the two directions, like a magnetic flux `phi`
    /// accumulated along the declared direction.
    Directional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    /// Declared direction: traversal `from -> to` accumulates `+A L`.
    pub from: VertexId,
    pub to: VertexId,
    pub length: f64,
    pub potential: f64,
    pub static_phase: f64,
}

impl Bond {
    pub fn new(from: VertexId, to: VertexId, length: f64) -> Self {
        Self { from, to, length, potential: 0.0, static_phase: 0.0 }
    }

    pub fn with_potential(mut self, potential: f64) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_static_phase(mut self, phase: f64) -> Self {
        self.static_phase = phase;
        self
    }

    pub fn joins(&self, a: VertexId, b: VertexId) -> bool {
        (self.from == a && self.to == b) || (self.from == b && self.to == a)
    }

    pub fn is_cross_sector(&self) -> bool {
        self.from.sector != self.to.sector
    }

    /// Phase added to `kL` in both directions.
    pub fn phase_offset(&self, convention: PhaseConvention) -> f64 {
        match convention {
            PhaseConvention::Symmetric => self.static_phase,
            PhaseConvention::Directional => 0.0,
        }
    }

    /// Odd (direction-dependent) phase picked up going `from -> to`.
    pub fn directed_phase(&self, convention: PhaseConvention) -> f64 {
        let magnetic = self.potential * self.length;
        match convention {
            PhaseConvention::Symmetric => magnetic,
            PhaseConvention::Directional => magnetic + self.static_phase,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lead {
    pub vertex: VertexId,
    pub port: String,
}

/// Validated, immutable graph.
#[derive(Clone, Debug)]
pub struct GraphTopology {
    vertices: Vec<VertexId>,
    bonds: Vec<Bond>,
    leads: Vec<Lead>,
    convention: PhaseConvention,
    position: HashMap<VertexId, usize>,
}

impl GraphTopology {
    pub fn new(vertices: Vec<VertexId>, bonds: Vec<Bond>, leads: Vec<Lead>) -> Result<Self> {
        Self::with_convention(vertices, bonds, leads, PhaseConvention::default())
    }

    pub fn with_convention(
        vertices: Vec<VertexId>,
        bonds: Vec<Bond>,
        leads: Vec<Lead>,
        convention: PhaseConvention,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Schema("graph has no vertices".into()));
        }
        let mut position = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if v.index == 0 {
                return Err(Error::Schema(format!("vertex index must be >= 1, got {v}")));
            }
            if position.insert(*v, i).is_some() {
                return Err(Error::DuplicateVertex(*v));
            }
        }
        let mut seen = HashMap::new();
        for b in &bonds {
            for v in [b.from, b.to] {
                if !position.contains_key(&v) {
                    return Err(Error::UnknownVertex(v));
                }
            }
            if b.from == b.to {
                return Err(Error::SelfLoop(b.from));
            }
            if !(b.length > 0.0) || !b.length.is_finite() {
                return Err(Error::NonPositiveLength { from: b.from, to: b.to, length: b.length });
            }
            if !b.potential.is_finite() {
                return Err(Error::Schema(format!("bond {}-{} has non-finite potential", b.from, b.to)));
            }
            if !(0.0..std::f64::consts::TAU).contains(&b.static_phase) {
                return Err(Error::Schema(format!(
                    "bond {}-{} static phase {} outside [0, 2pi)",
                    b.from, b.to, b.static_phase
                )));
            }
            let key = if b.from < b.to { (b.from, b.to) } else { (b.to, b.from) };
            if seen.insert(key, ()).is_some() {
                return Err(Error::DuplicateBond(key.0, key.1));
            }
        }
        let mut ports = HashMap::new();
        for l in &leads {
            if !position.contains_key(&l.vertex) {
                return Err(Error::UnknownVertex(l.vertex));
            }
            if ports.insert(l.port.clone(), ()).is_some() {
                return Err(Error::Schema(format!("duplicate port name {}", l.port)));
            }
        }
        let topology = Self { vertices, bonds, leads, convention, position };
        topology.check_connected()?;
        Ok(topology)
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.vertices.len();
        let adjacency = self.adjacency();
        let mut reached = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        reached[0] = true;
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &adjacency[v] {
                if !reached[w] {
                    reached[w] = true;
                    queue.push_back(w);
                }
            }
        }
        match reached.iter().position(|r| !r) {
            Some(i) => Err(Error::Disconnected(self.vertices[i])),
            None => Ok(()),
        }
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn leads(&self) -> &[Lead] {
        &self.leads
    }

    pub fn convention(&self) -> PhaseConvention {
        self.convention
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn position(&self, v: VertexId) -> Option<usize> {
        self.position.get(&v).copied()
    }

    /// Position of both endpoints of bond `b`.
    pub fn endpoints(&self, b: usize) -> (usize, usize) {
        let bond = &self.bonds[b];
        (self.position[&bond.from], self.position[&bond.to])
    }

    /// For each vertex position, the list of (neighbor position, bond index).
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (b, bond) in self.bonds.iter().enumerate() {
            let i = self.position[&bond.from];
            let j = self.position[&bond.to];
            adj[i].push((j, b));
            adj[j].push((i, b));
        }
        adj
    }

    /// Symmetric 0/1 connectivity matrix with zero diagonal.
    pub fn connectivity(&self) -> Vec<Vec<u8>> {
        let n = self.vertices.len();
        let mut c = vec![vec![0u8; n]; n];
        for b in 0..self.bonds.len() {
            let (i, j) = self.endpoints(b);
            c[i][j] = 1;
            c[j][i] = 1;
        }
        c
    }

    /// Total length: sum of all bond lengths.
    pub fn total_length(&self) -> f64 {
        self.bonds.iter().map(|b| b.length).sum()
    }

    /// Number of bonds plus leads at every vertex.
    pub fn valences(&self) -> Vec<usize> {
        let mut v = vec![0usize; self.vertices.len()];
        for b in 0..self.bonds.len() {
            let (i, j) = self.endpoints(b);
            v[i] += 1;
            v[j] += 1;
        }
        for l in &self.leads {
            v[self.position[&l.vertex]] += 1;
        }
        v
    }

    pub fn find_bond(&self, a: VertexId, b: VertexId) -> Option<usize> {
        self.bonds.iter().position(|bond| bond.joins(a, b))
    }

    pub fn port_index(&self, port: &str) -> Option<usize> {
        self.leads.iter().position(|l| l.port == port)
    }

    /// Same graph with all leads removed.
    pub fn closed(&self) -> Self {
        Self { leads: Vec::new(), ..self.clone() }
    }

    pub fn with_leads(&self, leads: Vec<Lead>) -> Result<Self> {
        Self::with_convention(self.vertices.clone(), self.bonds.clone(), leads, self.convention)
    }

    pub fn with_phase_convention(&self, convention: PhaseConvention) -> Self {
        Self { convention, ..self.clone() }
    }

    /// Same graph with `f` applied to every bond (validation re-run).
    pub fn map_bonds(&self, f: impl FnMut(&Bond) -> Bond) -> Result<Self> {
        let bonds = self.bonds.iter().map(f).collect();
        Self::with_convention(self.vertices.clone(), bonds, self.leads.clone(), self.convention)
    }

    /// Hex digest over the canonical textual form of the graph.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?};", self.convention).as_bytes());
        for v in &self.vertices {
            h.update(format!("v{v};").as_bytes());
        }
        for b in &self.bonds {
            h.update(
                format!("b{}>{}:{:e}:{:e}:{:e};", b.from, b.to, b.length, b.potential, b.static_phase)
                    .as_bytes(),
            );
        }
        for l in &self.leads {
            h.update(format!("l{}:{};", l.vertex, l.port).as_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }

    /// Mirrored-bond check: every bond (i,j) inside one sector has a partner
    /// (i bar, j bar) with equal length, negated potential and equal static phase.
    pub fn mirror_defects(&self) -> Vec<usize> {
        self.bonds
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.is_cross_sector())
            .filter(|(_, b)| {
                let partners: Vec<_> = self
                    .bonds
                    .iter()
                    .filter(|p| p.from == b.from.mirror() && p.to == b.to.mirror())
                    .collect();
                !(partners.len() == 1
                    && partners[0].length == b.length
                    && partners[0].potential == -b.potential
                    && partners[0].static_phase == b.static_phase)
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// Lengthening of a set of bonds by a common increment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseShifterSetting {
    pub targets: Vec<(VertexId, VertexId)>,
    pub increment: f64,
}

impl PhaseShifterSetting {
    /// Bond (a,b) together with its mirror image in the other sector.
    pub fn mirrored(a: VertexId, b: VertexId, increment: f64) -> Self {
        Self { targets: vec![(a, b), (a.mirror(), b.mirror())], increment }
    }

    /// Extra phase picked up at wavenumber `k`.
    pub fn induced_phase(&self, k: f64) -> f64 {
        k * self.increment
    }
}

/// Returns a copy of `topology` with the target bonds lengthened.
pub fn apply_phase_shifter(topology: &GraphTopology, setting: &PhaseShifterSetting) -> Result<GraphTopology> {
    if !(setting.increment >= 0.0) || !setting.increment.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "phase shifter increment must be >= 0, got {}",
            setting.increment
        )));
    }
    let mut targets = Vec::with_capacity(setting.targets.len());
    for &(a, b) in &setting.targets {
        targets.push(topology.find_bond(a, b).ok_or(Error::MissingBond(a, b))?);
    }
    if setting.increment == 0.0 {
        return Ok(topology.clone());
    }
    let mut bonds = topology.bonds().to_vec();
    for t in targets {
        bonds[t].length += setting.increment;
    }
    GraphTopology::with_convention(
        topology.vertices().to_vec(),
        bonds,
        topology.leads().to_vec(),
        topology.convention(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(length: f64) -> GraphTopology {
        GraphTopology::new(
            vec![VertexId::up(1), VertexId::up(2)],
            vec![Bond::new(VertexId::up(1), VertexId::up(2), length)],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn minimal_graph() {
        let g = interval(1.0);
        assert_eq!(g.total_length(), 1.0);
        assert_eq!(g.connectivity(), vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn self_loop_rejected() {
        let err = GraphTopology::new(
            vec![VertexId::up(1), VertexId::up(2)],
            vec![Bond::new(VertexId::up(1), VertexId::up(1), 1.0), Bond::new(VertexId::up(1), VertexId::up(2), 1.0)],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "self-loop not supported at vertex 1");
    }

    #[test]
    fn invalid_graphs_rejected() {
        let v = vec![VertexId::up(1), VertexId::up(2), VertexId::up(3)];
        let b12 = Bond::new(VertexId::up(1), VertexId::up(2), 1.0);
        let disconnected = GraphTopology::new(v.clone(), vec![b12.clone()], vec![]);
        assert!(matches!(disconnected, Err(Error::Disconnected(x)) if x == VertexId::up(3)));

        let dup = GraphTopology::new(
            v.clone(),
            vec![b12.clone(), Bond::new(VertexId::up(2), VertexId::up(1), 0.5), Bond::new(VertexId::up(2), VertexId::up(3), 1.0)],
            vec![],
        );
        assert!(matches!(dup, Err(Error::DuplicateBond(..))));

        let neg = GraphTopology::new(
            v.clone(),
            vec![b12.clone(), Bond::new(VertexId::up(2), VertexId::up(3), -1.0)],
            vec![],
        );
        assert!(matches!(neg, Err(Error::NonPositiveLength { length, .. }) if length == -1.0));

        let missing_lead = GraphTopology::new(
            vec![VertexId::up(1), VertexId::up(2)],
            vec![b12],
            vec![Lead { vertex: VertexId::down(1), port: "P".into() }],
        );
        assert!(matches!(missing_lead, Err(Error::UnknownVertex(_))));
    }

    #[test]
    fn phase_shifter_identity_and_additivity() {
        let g = interval(0.5);
        let same = apply_phase_shifter(
            &g,
            &PhaseShifterSetting { targets: vec![(VertexId::up(1), VertexId::up(2))], increment: 0.0 },
        )
        .unwrap();
        assert_eq!(same.bonds(), g.bonds());

        let longer = apply_phase_shifter(
            &g,
            &PhaseShifterSetting { targets: vec![(VertexId::up(2), VertexId::up(1))], increment: 0.1 },
        )
        .unwrap();
        assert!((longer.bonds()[0].length - 0.6).abs() < 1e-15);
    }

    #[test]
    fn phase_shifter_induced_phase() {
        let s = PhaseShifterSetting { targets: vec![], increment: 0.1 };
        assert!((s.induced_phase(31.4159) - 3.14159).abs() < 1e-12);
    }

    #[test]
    fn phase_shifter_missing_target() {
        let g = interval(0.5);
        let err = apply_phase_shifter(&g, &PhaseShifterSetting::mirrored(VertexId::up(1), VertexId::up(2), 0.1));
        assert!(matches!(err, Err(Error::MissingBond(..))));
    }

    #[test]
    fn digest_stable_and_sensitive() {
        let a = interval(1.0);
        assert_eq!(a.digest(), interval(1.0).digest());
        assert_ne!(a.digest(), interval(1.0 + 1e-12).digest());
    }
}
