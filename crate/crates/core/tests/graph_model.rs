use std::f64::consts::PI;

use gsegraph::graph::{
    apply_phase_shifter, defaults, frequency_to_wavenumber, parse_graph_config, wavenumber_to_frequency,
    GraphTopology, PhaseShifterSetting, Sector, VertexId, SPEED_OF_LIGHT,
};

fn shipped(name: &str) -> GraphTopology {
    let path = format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_graph_config(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn shipped_documents_match_built_in_graphs() {
    assert_eq!(shipped("default_gse_graph.json").digest(), defaults::default_gse_graph().digest());
    assert_eq!(shipped("four_coupling_gse_graph.json").digest(), defaults::four_coupling_gse_graph().digest());
}

#[test]
fn default_graph_shape() {
    let g = shipped("default_gse_graph.json");
    let up = g.vertices().iter().filter(|v| v.sector == Sector::Up).count();
    assert_eq!((up, g.vertex_count(), g.bond_count()), (9, 18, 22));
    let c = g.connectivity();
    for i in 0..c.len() {
        assert_eq!(c[i][i], 0);
        for j in 0..c.len() {
            assert_eq!(c[i][j], c[j][i]);
        }
    }
}

#[test]
fn every_bond_has_a_mirror() {
    for g in [defaults::default_gse_graph(), defaults::four_coupling_gse_graph()] {
        assert!(g.mirror_defects().is_empty());
        for b in g.bonds().iter().filter(|b| !b.is_cross_sector()) {
            let m = &g.bonds()[g.find_bond(b.from.mirror(), b.to.mirror()).unwrap()];
            assert_eq!(m.length, b.length);
            assert_eq!(m.potential, -b.potential);
        }
    }
}

#[test]
fn gse_condition_bonds() {
    let g = defaults::default_gse_graph();
    let cross: Vec<_> = g.bonds().iter().filter(|b| b.is_cross_sector()).collect();
    assert_eq!(cross.len(), 2);
    assert!(cross.iter().all(|b| b.potential == 0.0));
    assert_eq!(cross.iter().filter(|b| b.static_phase == PI).count(), 1);
    let four = defaults::four_coupling_gse_graph();
    assert_eq!(four.bond_count(), 22);
    assert_eq!(four.bonds().iter().filter(|b| b.is_cross_sector()).count(), 4);
}

#[test]
fn shifter_lengthens_mirrored_pair() {
    let g = defaults::default_gse_graph();
    let (a, b) = defaults::SHIFTER_BOND;
    let setting = PhaseShifterSetting::mirrored(VertexId::up(a), VertexId::up(b), 0.1);
    let shifted = apply_phase_shifter(&g, &setting).unwrap();
    for (x, y) in [(VertexId::up(a), VertexId::up(b)), (VertexId::down(a), VertexId::down(b))] {
        let before = g.bonds()[g.find_bond(x, y).unwrap()].length;
        let after = shifted.bonds()[shifted.find_bond(x, y).unwrap()].length;
        assert!((after - before - 0.1).abs() < 1e-15);
    }
    assert!((shifted.total_length() - g.total_length() - 0.2).abs() < 1e-12);
    assert!((setting.induced_phase(31.4159) - 3.14159).abs() < 1e-12);
    let identity = apply_phase_shifter(&g, &PhaseShifterSetting { increment: 0.0, ..setting }).unwrap();
    assert_eq!(identity.digest(), g.digest());
}

#[test]
fn frequency_conversion() {
    assert_eq!(frequency_to_wavenumber(0.0).unwrap(), 0.0);
    assert!((frequency_to_wavenumber(SPEED_OF_LIGHT / (2.0 * PI)).unwrap() - 1.0).abs() < 1e-15);
    for f in [1e6, 3.3e9, 1.7e10] {
        let back = wavenumber_to_frequency(frequency_to_wavenumber(f).unwrap()).unwrap();
        assert!(((back - f) / f).abs() < 1e-15);
    }
    assert!(frequency_to_wavenumber(-1.0).is_err());
}
