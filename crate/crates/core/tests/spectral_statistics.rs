use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gsegraph::graph::defaults;
use gsegraph::spectrum::{first_eigenwavenumbers, kramers_fold, FoldPolicy, SpectrumRecord};
use gsegraph::stats::{
    number_variance, rigidity, spacing_distribution, statistics_report, unfold, Reference, StatisticsConfig,
    UnfoldedSpectrum,
};

fn poisson_levels(n: usize, seed: u64) -> UnfoldedSpectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    let values = (0..n)
        .map(|_| {
            x += -(1.0 - rng.random::<f64>()).ln();
            x
        })
        .collect();
    UnfoldedSpectrum::from_values(values).unwrap()
}

fn lattice(n: usize) -> UnfoldedSpectrum {
    UnfoldedSpectrum::from_values((1..=n).map(|j| j as f64).collect()).unwrap()
}

#[test]
fn picket_fence_from_wavenumbers() {
    let l = 2.5;
    let record = SpectrumRecord {
        eigenwavenumbers: (1..=300).map(|j| j as f64 * PI / l).collect(),
        fold: FoldPolicy::Raw,
        topology_digest: String::new(),
        doublet_gaps: vec![],
        tolerance: 1e-10,
    };
    let u = unfold(&record, l).unwrap();
    assert!(u.spacings().iter().all(|s| (s - 1.0).abs() < 1e-12));
    let p = spacing_distribution(&u, None).unwrap();
    let filled: Vec<usize> = (0..p.histogram.densities.len()).filter(|&i| p.histogram.densities[i] > 0.0).collect();
    // 1.0 sits on a bin edge; rounding may split the mass between its neighbours
    assert!(!filled.is_empty() && filled.len() <= 2);
    for &bin in &filled {
        assert!(p.histogram.edges[bin] - 1e-9 <= 1.0 && 1.0 <= p.histogram.edges[bin + 1] + 1e-9);
    }
    let width = p.histogram.edges[1] - p.histogram.edges[0];
    let mass: f64 = filled.iter().map(|&b| p.histogram.densities[b] * width).sum();
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn picket_fence_long_range() {
    let u = lattice(5000);
    let l_grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5 + 0.013).collect();
    let sigma2 = number_variance(&u, &l_grid, 20_000, 1).unwrap();
    for (&l, &s) in l_grid.iter().zip(&sigma2) {
        // count is floor(L) or ceil(L): variance f (1 - f) <= 1/4
        let f = l.fract();
        assert!((s - f * (1.0 - f)).abs() < 0.02, "L={l}: {s}");
    }
    let d3 = rigidity(&u, &[20.0, 40.0], 500, 1).unwrap();
    assert!(d3.iter().all(|&d| (d - 1.0 / 12.0).abs() < 0.01), "{d3:?}");
}

#[test]
fn poisson_spacings_are_exponential() {
    let u = poisson_levels(100_000, 2);
    let config = StatisticsConfig { windows: 20_000, ..Default::default() };
    let report = statistics_report(&u, &config).unwrap();
    assert!(report.ks(Reference::Poisson) < 0.01);
    for (i, &l) in report.l_grid.iter().enumerate() {
        assert!((report.number_variance[i] / l - 1.0).abs() < 0.05, "L={l}");
        assert!((report.rigidity[i] / (l / 15.0) - 1.0).abs() < 0.05, "L={l}");
        assert!(report.rigidity[i] <= report.number_variance[i] / 2.0);
    }
}

#[test]
fn default_graph_statistics() {
    let g = defaults::default_gse_graph();
    let raw = first_eigenwavenumbers(&g, 4100, 0.05).unwrap();
    let folded = kramers_fold(&raw, 1e-8).unwrap();
    let u = unfold(&folded, g.total_length()).unwrap();
    assert!((u.mean_spacing() - 1.0).abs() < 0.01);
    let report = statistics_report(&u, &StatisticsConfig::default()).unwrap();
    assert_eq!(report.levels, 2000);
    assert!(report.ks(Reference::Gse) < 0.05);
    let gse = report.references.iter().find(|r| r.name == Reference::Gse).unwrap();
    let deviation = |i: usize| (report.number_variance[i] - gse.number_variance[i]).abs();
    let last = report.l_grid.len() - 1;
    assert!(deviation(last) > deviation(1));
}

#[test]
fn empty_spectrum_rejected() {
    let record = SpectrumRecord {
        eigenwavenumbers: vec![],
        fold: FoldPolicy::Raw,
        topology_digest: String::new(),
        doublet_gaps: vec![],
        tolerance: 1e-10,
    };
    assert!(unfold(&record, 1.0).is_err());
}
