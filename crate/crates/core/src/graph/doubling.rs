use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Bond, GraphTopology, Lead, Sector, VertexId};
use crate::error::{Error, Result};

/// Pair of cross-sector bonds `(up, down bar)` and `(down, up bar)` of equal length.
///
/// With the GSE condition the first member carries the static phase pi.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPair {
    pub up: u32,
    pub down: u32,
    pub length: f64,
    pub partner_length: f64,
}

impl CouplingPair {
    pub fn new(up: u32, down: u32, length: f64) -> Self {
        Self { up, down, length, partner_length: length }
    }

    /// The two bonds this pair contributes; the first one is the pi-phase bond.
    pub fn bonds(&self, gse_condition: bool) -> [Bond; 2] {
        let phase = if gse_condition { PI } else { 0.0 };
        [
            Bond::new(VertexId::up(self.up), VertexId::down(self.down), self.length).with_static_phase(phase),
            Bond::new(VertexId::up(self.down), VertexId::down(self.up), self.partner_length),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct GseDoublingSpec {
    /// Spin-up subgraph; its complex-conjugate copy is generated.
    pub subgraph: GraphTopology,
    pub coupling_pairs: Vec<CouplingPair>,
    /// Put phase pi on one bond of every coupling pair (V = -V^T).
    pub gse_condition: bool,
    /// Leads of the doubled graph, in port order.
    pub leads: Vec<Lead>,
}

impl GseDoublingSpec {
    /// Removes the intra-sector bond (a,b) and its mirror and replaces them
    /// with the cross-sector pair (a, b bar), (b, a bar) of the same length.
    pub fn move_bond_to_coupling(&self, a: u32, b: u32) -> Result<Self> {
        let (va, vb) = (VertexId::up(a), VertexId::up(b));
        let idx = self.subgraph.find_bond(va, vb).ok_or(Error::MissingBond(va, vb))?;
        let length = self.subgraph.bonds()[idx].length;
        let bonds: Vec<Bond> = self
            .subgraph
            .bonds()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != idx)
            .map(|(_, b)| b.clone())
            .collect();
        let subgraph = GraphTopology::with_convention(
            self.subgraph.vertices().to_vec(),
            bonds,
            Vec::new(),
            self.subgraph.convention(),
        )?;
        let mut coupling_pairs = self.coupling_pairs.clone();
        coupling_pairs.push(CouplingPair::new(a, b, length));
        Ok(Self { subgraph, coupling_pairs, gse_condition: self.gse_condition, leads: self.leads.clone() })
    }
}

/// Doubles the subgraph into two mirrored sectors joined by the coupling pairs.
pub fn build_gse_graph(spec: &GseDoublingSpec) -> Result<GraphTopology> {
    let sub = &spec.subgraph;
    if let Some(v) = sub.vertices().iter().find(|v| v.sector != Sector::Up) {
        return Err(Error::Schema(format!("subgraph vertex {v} must be in the up sector")));
    }
    let mut vertices = sub.vertices().to_vec();
    vertices.extend(sub.vertices().iter().map(|v| v.mirror()));

    let mut bonds = sub.bonds().to_vec();
    bonds.extend(sub.bonds().iter().map(|b| Bond {
        from: b.from.mirror(),
        to: b.to.mirror(),
        length: b.length,
        potential: -b.potential,
        static_phase: b.static_phase,
    }));

    for pair in &spec.coupling_pairs {
        for idx in [pair.up, pair.down] {
            if sub.position(VertexId::up(idx)).is_none() {
                return Err(Error::UnknownVertex(VertexId::up(idx)));
            }
        }
        if pair.length != pair.partner_length {
            return Err(Error::CouplingLengthMismatch {
                up: pair.up,
                down: pair.down,
                a: pair.length,
                b: pair.partner_length,
            });
        }
        bonds.extend(pair.bonds(spec.gse_condition));
    }
    GraphTopology::with_convention(vertices, bonds, spec.leads.clone(), sub.convention())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::defaults;

    fn two_vertex_spec() -> GseDoublingSpec {
        let sub = GraphTopology::new(
            vec![VertexId::up(1), VertexId::up(2)],
            vec![Bond::new(VertexId::up(1), VertexId::up(2), 0.7).with_potential(0.3)],
            vec![],
        )
        .unwrap();
        GseDoublingSpec {
            subgraph: sub,
            coupling_pairs: vec![CouplingPair::new(1, 2, 0.4)],
            gse_condition: true,
            leads: vec![],
        }
    }

    #[test]
    fn smallest_doubling() {
        let g = build_gse_graph(&two_vertex_spec()).unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.bond_count(), 4);
        assert!(g.mirror_defects().is_empty());
        let mirrored = &g.bonds()[1];
        assert_eq!((mirrored.from, mirrored.to), (VertexId::down(1), VertexId::down(2)));
        assert_eq!(mirrored.length, 0.7);
        assert_eq!(mirrored.potential, -0.3);
        let pi_bonds = g.bonds().iter().filter(|b| b.static_phase == PI).count();
        assert_eq!(pi_bonds, 1);
    }

    #[test]
    fn default_graph_counts() {
        let g = defaults::default_gse_graph();
        assert_eq!(g.vertex_count(), 18);
        assert_eq!(g.bond_count(), 22);
        assert!(g.mirror_defects().is_empty());
        let cross: Vec<_> = g.bonds().iter().filter(|b| b.is_cross_sector()).collect();
        assert_eq!(cross.len(), 2);
        assert!(cross.iter().all(|b| b.potential == 0.0));
        assert_eq!(cross.iter().filter(|b| b.static_phase == PI).count(), 1);
        assert_eq!(cross[0].length, cross[1].length);
    }

    #[test]
    fn four_coupling_variant() {
        let spec = defaults::default_doubling_spec().move_bond_to_coupling(7, 8).unwrap();
        let g = build_gse_graph(&spec).unwrap();
        assert_eq!(g.bond_count(), 22);
        let cross: Vec<_> = g.bonds().iter().filter(|b| b.is_cross_sector()).collect();
        assert_eq!(cross.len(), 4);
        assert!(g.find_bond(VertexId::up(7), VertexId::up(8)).is_none());
        assert!(g.find_bond(VertexId::down(7), VertexId::down(8)).is_none());
        assert!(g.find_bond(VertexId::up(7), VertexId::down(8)).is_some());
        assert!(g.find_bond(VertexId::up(8), VertexId::down(7)).is_some());
    }

    #[test]
    fn missing_coupling_vertex() {
        let mut spec = two_vertex_spec();
        spec.coupling_pairs = vec![CouplingPair::new(1, 5, 0.4)];
        assert!(matches!(build_gse_graph(&spec), Err(Error::UnknownVertex(v)) if v == VertexId::up(5)));
    }

    #[test]
    fn mismatched_coupling_lengths() {
        let mut spec = two_vertex_spec();
        spec.coupling_pairs[0].partner_length = 0.5;
        assert!(matches!(build_gse_graph(&spec), Err(Error::CouplingLengthMismatch { .. })));
    }

    #[test]
    fn goe_condition_has_no_pi_bond() {
        let mut spec = two_vertex_spec();
        spec.gse_condition = false;
        let g = build_gse_graph(&spec).unwrap();
        assert!(g.bonds().iter().all(|b| b.static_phase == 0.0));
    }
}
