use gsegraph::graph::{defaults, GraphConfig};
use gsegraph::rmt::RmtModel;

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "configs".into());
    let two = GraphConfig::from_doubling_spec(&defaults::default_doubling_spec());
    std::fs::write(format!("{out}/default_gse_graph.json"), two.to_json_pretty() + "\n").unwrap();
    let four = GraphConfig::from_doubling_spec(&defaults::four_coupling_doubling_spec());
    std::fs::write(format!("{out}/four_coupling_gse_graph.json"), four.to_json_pretty() + "\n").unwrap();
    std::fs::write(format!("{out}/default_rmt_model.json"), RmtModel::default().to_json_pretty() + "\n").unwrap();
}
