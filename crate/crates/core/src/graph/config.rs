//! JSON graph configuration documents.
//!
//! Without a `doubling` section the document describes the full graph. With
//! one, `vertices` and `bonds` describe the spin-up subgraph only and the
//! mirrored copy plus the coupling bonds are generated; leads may then
//! reference vertices of either sector.

use serde::{Deserialize, Serialize};

use super::{build_gse_graph, Bond, CouplingPair, GraphTopology, GseDoublingSpec, Lead, PhaseConvention, VertexId};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub vertices: Vec<VertexId>,
    pub bonds: Vec<BondConfig>,
    #[serde(default)]
    pub leads: Vec<LeadConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doubling: Option<DoublingConfig>,
    #[serde(default)]
    pub phase_convention: PhaseConvention,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondConfig {
    pub from: VertexId,
    pub to: VertexId,
    pub length_m: f64,
    #[serde(default)]
    pub potential_rad_per_m: f64,
    #[serde(default)]
    pub static_phase_rad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeadConfig {
    pub vertex: VertexId,
    pub port: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoublingConfig {
    pub coupling_pairs: Vec<CouplingPairConfig>,
    #[serde(default = "default_true")]
    pub gse_condition: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingPairConfig {
    /// Joined to `down` bar by the pi-phase bond.
    pub up: u32,
    pub down: u32,
    pub length_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner_length_m: Option<f64>,
}

fn default_true() -> bool {
    true
}

impl From<&Bond> for BondConfig {
    fn from(b: &Bond) -> Self {
        Self {
            from: b.from,
            to: b.to,
            length_m: b.length,
            potential_rad_per_m: b.potential,
            static_phase_rad: b.static_phase,
        }
    }
}

impl From<&BondConfig> for Bond {
    fn from(b: &BondConfig) -> Self {
        Bond {
            from: b.from,
            to: b.to,
            length: b.length_m,
            potential: b.potential_rad_per_m,
            static_phase: b.static_phase_rad,
        }
    }
}

fn leads_of(cfg: &[LeadConfig]) -> Vec<Lead> {
    cfg.iter().map(|l| Lead { vertex: l.vertex, port: l.port.clone() }).collect()
}

fn lead_configs(leads: &[Lead]) -> Vec<LeadConfig> {
    leads.iter().map(|l| LeadConfig { vertex: l.vertex, port: l.port.clone() }).collect()
}

impl GraphConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph config serializes")
    }

    /// Full (undoubled) description of an existing topology.
    pub fn from_topology(t: &GraphTopology) -> Self {
        Self {
            vertices: t.vertices().to_vec(),
            bonds: t.bonds().iter().map(BondConfig::from).collect(),
            leads: lead_configs(t.leads()),
            doubling: None,
            phase_convention: t.convention(),
        }
    }

    pub fn from_doubling_spec(spec: &GseDoublingSpec) -> Self {
        Self {
            vertices: spec.subgraph.vertices().to_vec(),
            bonds: spec.subgraph.bonds().iter().map(BondConfig::from).collect(),
            leads: lead_configs(&spec.leads),
            doubling: Some(DoublingConfig {
                coupling_pairs: spec
                    .coupling_pairs
                    .iter()
                    .map(|p| CouplingPairConfig {
                        up: p.up,
                        down: p.down,
                        length_m: p.length,
                        partner_length_m: (p.partner_length != p.length).then_some(p.partner_length),
                    })
                    .collect(),
                gse_condition: spec.gse_condition,
            }),
            phase_convention: spec.subgraph.convention(),
        }
    }

    /// The doubling spec, when the document has a `doubling` section.
    pub fn doubling_spec(&self) -> Result<Option<GseDoublingSpec>> {
        let Some(d) = &self.doubling else { return Ok(None) };
        let subgraph = GraphTopology::with_convention(
            self.vertices.clone(),
            self.bonds.iter().map(Bond::from).collect(),
            Vec::new(),
            self.phase_convention,
        )?;
        let coupling_pairs = d
            .coupling_pairs
            .iter()
            .map(|p| CouplingPair {
                up: p.up,
                down: p.down,
                length: p.length_m,
                partner_length: p.partner_length_m.unwrap_or(p.length_m),
            })
            .collect();
        Ok(Some(GseDoublingSpec {
            subgraph,
            coupling_pairs,
            gse_condition: d.gse_condition,
            leads: leads_of(&self.leads),
        }))
    }

    pub fn topology(&self) -> Result<GraphTopology> {
        match self.doubling_spec()? {
            Some(spec) => build_gse_graph(&spec),
            None => GraphTopology::with_convention(
                self.vertices.clone(),
                self.bonds.iter().map(Bond::from).collect(),
                leads_of(&self.leads),
                self.phase_convention,
            ),
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_graph_config(text: &str) -> Result<GraphTopology> {
    GraphConfig::from_json(text)?.topology()
}
