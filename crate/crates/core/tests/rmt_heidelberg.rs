use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gsegraph::rmt::{
    assemble_gse, estimate_transmission, gamma_from_transmission, sample_coupling_v, sample_coupling_w, sample_gue,
    transmission_from_gamma, RmtModel, VStructure,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn gue_density_follows_semicircle() {
    let n = 200;
    let realizations = 500;
    let bins = 10;
    let mut counts = vec![0usize; bins];
    let mut r = rng(4);
    for _ in 0..realizations {
        let h = sample_gue(n, 1.0 / n as f64, &mut r).unwrap();
        for e in h.symmetric_eigenvalues().iter() {
            let x = (e + 1.0) / 2.0 * bins as f64;
            if (0.0..bins as f64).contains(&x) {
                counts[x as usize] += 1;
            }
        }
    }
    // radius 2: rho(x) = sqrt(4 - x^2) / (2 pi), bulk |x| < 1
    for (i, &c) in counts.iter().enumerate() {
        let (a, b) = (-1.0 + 0.2 * i as f64, -1.0 + 0.2 * (i + 1) as f64);
        let cdf = |x: f64| (x * (4.0 - x * x).sqrt() + 4.0 * (x / 2.0).asin()) / (4.0 * PI);
        let expected = (cdf(b) - cdf(a)) * (n * realizations) as f64;
        assert!((c as f64 / expected - 1.0).abs() < 0.05, "bin {i}: {c} vs {expected}");
    }
}

fn rank(m: &DMatrix<Complex64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    sv.iter().filter(|&&s| s > 1e-10 * top).count()
}

#[test]
fn coupling_v_rank() {
    let mut r = rng(5);
    let sparse = sample_coupling_v(200, &VStructure::sparse(5), 1.0, &mut r).unwrap();
    assert!(rank(&sparse.matrix) <= 10);
    assert!((&sparse.matrix + sparse.matrix.transpose()).iter().all(|z| z.norm() < 1e-14));
    let full = sample_coupling_v(200, &VStructure::Full, 1.0, &mut r).unwrap();
    assert_eq!(rank(&full.matrix), 200);
}

#[test]
fn zero_coupling_doubles_a_real_spectrum() {
    let mut r = rng(6);
    let n = 40;
    let h0 = sample_gue(n, 1.0 / n as f64, &mut r).unwrap().map(|z| Complex64::new(z.re, 0.0));
    let h0 = (&h0 + h0.transpose()) * Complex64::new(0.5, 0.0);
    let h = assemble_gse(&h0, &DMatrix::zeros(n, n)).unwrap();
    let doubled = h.eigenvalues();
    let single = h0.symmetric_eigenvalues();
    let mut single: Vec<f64> = single.iter().copied().collect();
    single.sort_by(f64::total_cmp);
    for (i, e) in single.iter().enumerate() {
        assert!((doubled[2 * i] - e).abs() < 1e-12 && (doubled[2 * i + 1] - e).abs() < 1e-12);
    }
}

#[test]
fn doublet_gaps_small_level_gaps_large() {
    let model = RmtModel { n: 60, ..Default::default() };
    let real = model.sample_realization(3).unwrap();
    let h = &real.hamiltonian;
    assert!(h.symplectic_defect() < 1e-13);
    let e = h.eigenvalues();
    let inner = (0..h.n()).map(|d| e[2 * d + 1] - e[2 * d]).fold(0.0, f64::max);
    let outer = (1..h.n()).map(|d| e[2 * d] - e[2 * d - 1]).fold(f64::INFINITY, f64::min);
    assert!(inner < 1e-10 * h.norm());
    assert!(outer > 1e3 * inner.max(1e-16));
}

#[test]
fn coupling_w_orthogonal_and_validated() {
    let model = RmtModel::default();
    let w = sample_coupling_w(&model, &mut rng(7)).unwrap();
    assert!(w.orthogonality_residual() < 1e-10);
    for block in [w.overlap_block(0, 1), w.overlap_block(1, 0), w.overlap_block(0, 2)] {
        assert!(block.iter().flatten().all(|z| z.norm() < 1e-10));
    }
    let bad = RmtModel { gammas: vec![0.0, 0.5], ..Default::default() };
    assert!(sample_coupling_w(&bad, &mut rng(7)).is_err());
}

#[test]
fn transmission_coefficients() {
    assert_eq!(transmission_from_gamma(1.0).unwrap(), 1.0);
    assert!(transmission_from_gamma(1e-9).unwrap() < 1e-8);
    for i in 1..=9 {
        let t = i as f64 / 10.0;
        assert!((transmission_from_gamma(gamma_from_transmission(t).unwrap()).unwrap() - t).abs() < 1e-12);
    }
    assert_eq!(estimate_transmission(&vec![Complex64::new(0.0, 0.0); 100]).unwrap(), 1.0);
    assert!(estimate_transmission(&vec![Complex64::new(0.6, 0.8); 100]).unwrap().abs() < 1e-12);
}

#[test]
fn ensemble_recovers_coupling_and_averages_out_off_diagonals() {
    let t = 0.6;
    let g = gamma_from_transmission(t).unwrap();
    let model = RmtModel {
        n: 100,
        lambda: 0,
        tau_abs: 0.0,
        gammas: vec![g, g],
        v_structure: VStructure::Full,
        ensemble_size: 100,
        energies: 101,
        ..Default::default()
    };
    let samples: Vec<_> = (0..model.ensemble_size as u64).flat_map(|r| model.realization_samples(r).unwrap()).collect();
    assert!(samples.len() >= 10_000);
    let s11: Vec<Complex64> = samples.iter().map(|s| s.s[(0, 0)]).collect();
    let recovered = estimate_transmission(&s11).unwrap();
    assert!((recovered / t - 1.0).abs() < 0.02, "{recovered}");
    for (a, b) in [(0, 1), (1, 0), (0, 3), (3, 0)] {
        let v: Vec<Complex64> = samples.iter().map(|s| s.s[(a, b)]).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<Complex64>() / n;
        let spread = (v.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0)).sqrt();
        // energies within a realization are correlated; count realizations only
        let sigma = spread / (model.ensemble_size as f64).sqrt();
        assert!(mean.norm() < 3.0 * sigma, "S[{a},{b}] mean {mean}");
    }
}

#[test]
fn absorbing_model_is_subunitary() {
    let model = RmtModel { n: 60, ensemble_size: 2, energies: 5, ..Default::default() };
    assert!((model.fictitious_transmission().unwrap() - 0.5).abs() < 1e-15);
    for s in model.realization_samples(0).unwrap() {
        assert!(s.singular_values().iter().all(|&x| x < 1.0));
    }
}

#[test]
fn unitarity_deficit_grows_with_absorption() {
    let deficit = |tau_abs: f64| {
        let model = RmtModel { n: 60, tau_abs, ensemble_size: 10, energies: 11, ..Default::default() };
        let samples: Vec<_> = (0..10).flat_map(|r| model.realization_samples(r).unwrap()).collect();
        samples.iter().map(|s| s.unitarity_defect()).sum::<f64>() / samples.len() as f64
    };
    let d: Vec<f64> = [1.0, 5.0, 25.0].into_iter().map(deficit).collect();
    assert!(d[0] > 0.0 && d[0] < d[1] && d[1] < d[2], "{d:?}");
}
