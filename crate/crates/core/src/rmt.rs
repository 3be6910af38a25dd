//! Heidelberg-approach scattering matrices for symplectic random Hamiltonians.
//!
//! Normalization: the assembled `2N x 2N` Hamiltonian has its semicircle on
//! `[-2, 2]`. With `W_c^dagger W_c = gamma_c / pi` this makes the average
//! diagonal element at band centre `(1 - gamma) / (1 + gamma)`, so the
//! transmission coefficient is `4 gamma / (1 + gamma)^2`.
//!
//! Channel order of the full S matrix: physical up (M), fictitious up
//! (Lambda), physical down (M), fictitious down (Lambda); the down channel of
//! a pair is the Kramers partner of the up one.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scattering::ScatteringSample;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C {
    let s = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C::new(s * re, s * im)
}

/// GUE matrix with `E|H_ij|^2 = variance` for every entry (diagonal real).
/// The spectrum fills `[-2 sqrt(N variance), 2 sqrt(N variance)]`.
pub fn sample_gue<R: Rng + ?Sized>(n: usize, variance: f64, rng: &mut R) -> Result<DMatrix<C>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("GUE dimension must be >= 2, got {n}")));
    }
    let mut h = DMatrix::from_element(n, n, ZERO);
    for i in 0..n {
        let d: f64 = StandardNormal.sample(rng);
        h[(i, i)] = C::from(variance.sqrt() * d);
        for j in i + 1..n {
            let z = complex_gaussian(rng, variance);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    Ok(h)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VStructure {
    Full,
    /// Nonzero only in the rows and columns listed in `indices` (0-based);
    /// without `indices`, `size` rows are drawn afresh for every realization.
    Sparse {
        size: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        indices: Option<Vec<usize>>,
    },
}

impl VStructure {
    pub fn sparse(size: usize) -> Self {
        VStructure::Sparse { size, indices: None }
    }
}

/// Antisymmetric coupling block together with the rows it occupies.
#[derive(Clone, Debug)]
pub struct CouplingV {
    pub matrix: DMatrix<C>,
    pub support: Vec<usize>,
}

/// Complex antisymmetric `V` with `E|V_ij|^2 = variance` on its support.
pub fn sample_coupling_v<R: Rng + ?Sized>(
    n: usize,
    structure: &VStructure,
    variance: f64,
    rng: &mut R,
) -> Result<CouplingV> {
    let support: Vec<usize> = match structure {
        VStructure::Full => (0..n).collect(),
        VStructure::Sparse { indices: Some(ix), .. } => {
            if let Some(&bad) = ix.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidParameter(format!("sparse index {bad} out of range 0..{n}")));
            }
            let mut ix = ix.clone();
            ix.sort_unstable();
            ix.dedup();
            ix
        }
        VStructure::Sparse { size, indices: None } => {
            if *size > n {
                return Err(Error::InvalidParameter(format!("sparse size {size} exceeds N = {n}")));
            }
            let mut ix = sample_indices(rng, n, *size).into_vec();
            ix.sort_unstable();
            ix
        }
    };
    let mut in_support = vec![false; n];
    for &i in &support {
        in_support[i] = true;
    }
    let mut v = DMatrix::from_element(n, n, ZERO);
    for i in 0..n {
        for j in i + 1..n {
            if in_support[i] || in_support[j] {
                let z = complex_gaussian(rng, variance);
                v[(i, j)] = z;
                v[(j, i)] = -z;
            }
        }
    }
    Ok(CouplingV { matrix: v, support })
}

/// `Y^T M` without forming `Y = [[0, -1], [1, 0]] (x) 1_N`.
fn apply_y(v: &[C], n: usize) -> Vec<C> {
    (0..2 * n).map(|i| if i < n { -v[i + n] } else { v[i - n] }).collect()
}

/// Kramers partner `Y v*` of a `2N` vector.
pub fn kramers_partner(v: &[C]) -> Vec<C> {
    let n = v.len() / 2;
    let conj: Vec<C> = v.iter().map(|z| z.conj()).collect();
    apply_y(&conj, n)
}

#[derive(Clone, Debug)]
pub struct GseHamiltonian {
    pub h: DMatrix<C>,
}

impl GseHamiltonian {
    /// Block dimension `N`.
    pub fn n(&self) -> usize {
        self.h.nrows() / 2
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.h - self.h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |Y H^T Y^T - H|`.
    pub fn symplectic_defect(&self) -> f64 {
        let n = self.n();
        let h = &self.h;
        let mut worst: f64 = 0.0;
        for i in 0..2 * n {
            for j in 0..2 * n {
                // (Y H^T Y^T)_{ij} = s_i s_j H_{j', i'} with ' the sector flip
                let (ip, si) = if i < n { (i + n, -1.0) } else { (i - n, 1.0) };
                let (jp, sj) = if j < n { (j + n, -1.0) } else { (j - n, 1.0) };
                let t = h[(jp, ip)] * (si * sj);
                worst = worst.max((t - h[(i, j)]).norm());
            }
        }
        worst
    }

    pub fn norm(&self) -> f64 {
        self.h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Ascending eigenvalues and matching eigenvectors (columns).
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<C>) {
        let eig = self.h.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.h.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.h.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// `[[H0, V], [-V*, H0*]]`.
pub fn assemble_gse(h0: &DMatrix<C>, v: &DMatrix<C>) -> Result<GseHamiltonian> {
    let n = h0.nrows();
    if h0.ncols() != n || v.nrows() != n || v.ncols() != n {
        return Err(Error::Shape(format!(
            "H0 {}x{} and V {}x{} must be square of equal size",
            h0.nrows(),
            h0.ncols(),
            v.nrows(),
            v.ncols()
        )));
    }
    let scale = h0.iter().chain(v.iter()).map(|z| z.norm()).fold(1.0, f64::max);
    let herm = (h0 - h0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-12 * scale {
        return Err(Error::Invariant(format!("H0 not Hermitian (defect {herm:e})")));
    }
    let anti = (v + v.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if anti > 1e-12 * scale {
        return Err(Error::Invariant(format!("V not antisymmetric (defect {anti:e})")));
    }
    let mut h = DMatrix::from_element(2 * n, 2 * n, ZERO);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = h0[(i, j)];
            h[(i, j + n)] = v[(i, j)];
            h[(i + n, j)] = -v[(i, j)].conj();
            h[(i + n, j + n)] = h0[(i, j)].conj();
        }
    }
    Ok(GseHamiltonian { h })
}

/// Kramers-paired coupling matrix: columns `c` and `c + pairs` form pair `c`.
#[derive(Clone, Debug)]
pub struct CouplingMatrix {
    pub w: DMatrix<C>,
    pub gammas: Vec<f64>,
}

impl CouplingMatrix {
    pub fn pairs(&self) -> usize {
        self.gammas.len()
    }

    /// Builds `W_c = sqrt(gamma_c / pi) [v_c, Y v_c*]` from orthonormal vectors
    /// belonging to distinct Kramers pairs.
    pub fn from_vectors(vectors: &[Vec<C>], gammas: &[f64]) -> Result<Self> {
        if vectors.len() != gammas.len() {
            return Err(Error::Shape(format!("{} vectors for {} couplings", vectors.len(), gammas.len())));
        }
        if let Some(g) = gammas.iter().find(|&&g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidParameter(format!("coupling strength must be positive, got {g}")));
        }
        let p = gammas.len();
        let dim = vectors.first().map_or(0, Vec::len);
        let mut w = DMatrix::from_element(dim, 2 * p, ZERO);
        for (c, (v, &g)) in vectors.iter().zip(gammas).enumerate() {
            let s = (g / PI).sqrt();
            let partner = kramers_partner(v);
            for r in 0..dim {
                w[(r, c)] = v[r] * s;
                w[(r, c + p)] = partner[r] * s;
            }
        }
        Ok(Self { w, gammas: gammas.to_vec() })
    }

    /// `max_cd || pi W_c^dagger W_d - gamma_c delta_cd 1_2 ||`.
    pub fn orthogonality_residual(&self) -> f64 {
        let p = self.pairs();
        let gram = self.w.adjoint() * &self.w * C::from(PI);
        let mut worst: f64 = 0.0;
        for a in 0..2 * p {
            for b in 0..2 * p {
                let expected = if a == b { self.gammas[a % p] } else { 0.0 };
                worst = worst.max((gram[(a, b)] - expected).norm());
            }
        }
        worst
    }

    /// The 2x2 block `W_c^dagger W_d`.
    pub fn overlap_block(&self, c: usize, d: usize) -> [[C; 2]; 2] {
        let p = self.pairs();
        let col = |k: usize, s: usize| self.w.column(k + s * p);
        let dot = |x: usize, y: usize| col(c, x).dotc(&col(d, y));
        [[dot(0, 0), dot(0, 1)], [dot(1, 0), dot(1, 1)]]
    }
}

/// One vector per Kramers doublet of `h`, chosen inside the doublet to carry
/// the largest possible spin-up weight; its partner `Y v*` is then mostly
/// spin-down.
fn polarized_doublets(h: &GseHamiltonian, count: usize, rng: &mut impl Rng) -> Result<Vec<Vec<C>>> {
    let n = h.n();
    if count > n {
        return Err(Error::InsufficientData(format!("{count} channel pairs requested, only {n} Kramers pairs")));
    }
    let (_, vectors) = h.eigen();
    let chosen = sample_indices(rng, n, count).into_vec();
    Ok(chosen
        .into_iter()
        .map(|d| {
            let a = vectors.column(2 * d);
            let b = vectors.column(2 * d + 1);
            let up = |x: &nalgebra::DVectorView<C>, y: &nalgebra::DVectorView<C>| {
                (0..n).map(|i| x[i].conj() * y[i]).sum::<C>()
            };
            let m = nalgebra::Matrix2::new(up(&a, &a), up(&a, &b), up(&b, &a), up(&b, &b));
            let eig = m.symmetric_eigen();
            let top = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
            let (alpha, beta) = (eig.eigenvectors[(0, top)], eig.eigenvectors[(1, top)]);
            let v: Vec<C> = (0..2 * n).map(|i| a[i] * alpha + b[i] * beta).collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|z| z / norm).collect()
        })
        .collect())
}

/// Spin-up weight of a `2N` vector.
pub fn up_weight(v: &[C]) -> f64 {
    v[..v.len() / 2].iter().map(|z| z.norm_sqr()).sum()
}

/// `W` from eigenvector pairs of an auxiliary GSE matrix drawn from the same
/// model as the Hamiltonian (same `V` structure, independent draw).
pub fn sample_coupling_w<R: Rng>(model: &RmtModel, rng: &mut R) -> Result<CouplingMatrix> {
    model.validate()?;
    let variance = model.variance(&model.v_structure);
    let h0 = sample_gue(model.n, variance, rng)?;
    let v = sample_coupling_v(model.n, &model.v_structure, variance, rng)?;
    let aux = assemble_gse(&h0, &v.matrix)?;
    let gammas = model.channel_gammas()?;
    let vectors = polarized_doublets(&aux, gammas.len(), rng)?;
    CouplingMatrix::from_vectors(&vectors, &gammas)
}

/// `S(E) = 1 - 2 pi i W^dagger (E - H + i pi W W^dagger)^-1 W` by direct solve.
pub fn rmt_s_matrix(h: &GseHamiltonian, w: &CouplingMatrix, energy: f64) -> Result<DMatrix<C>> {
    let dim = h.h.nrows();
    let ww = &w.w * w.w.adjoint();
    let mut ginv = -&h.h + ww * C::new(0.0, PI);
    for i in 0..dim {
        ginv[(i, i)] += C::from(energy);
    }
    let x = ginv.lu().solve(&w.w).ok_or(Error::SingularResolvent(energy))?;
    let mut s = w.w.adjoint() * x * C::new(0.0, -2.0 * PI);
    for i in 0..s.nrows() {
        s[(i, i)] += ONE;
    }
    Ok(s)
}

/// `H` diagonalized once, coupling rotated into its eigenbasis; evaluates
/// `S(E) = (1 - iK)(1 + iK)^-1` with `K = pi W^dagger (E - H)^-1 W`.
#[derive(Clone, Debug)]
pub struct SpectralResolvent {
    eigenvalues: Vec<f64>,
    rotated: DMatrix<C>,
}

impl SpectralResolvent {
    pub fn new(h: &GseHamiltonian, w: &CouplingMatrix) -> Self {
        let (eigenvalues, vectors) = h.eigen();
        Self { eigenvalues, rotated: vectors.adjoint() * &w.w }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn s_matrix(&self, energy: f64) -> Result<DMatrix<C>> {
        let mut scaled = self.rotated.clone();
        for (r, &lambda) in self.eigenvalues.iter().enumerate() {
            let d = energy - lambda;
            if d == 0.0 {
                return Err(Error::SingularResolvent(energy));
            }
            scaled.row_mut(r).scale_mut(PI / d);
        }
        let k = self.rotated.adjoint() * scaled;
        let m = k.nrows();
        let i_k = k * C::new(0.0, 1.0);
        let id = DMatrix::<C>::identity(m, m);
        let plus = &id + &i_k;
        let minus = &id - &i_k;
        // S = (1 - iK)(1 + iK)^-1; the two factors commute
        plus.lu().solve(&minus).ok_or(Error::SingularResolvent(energy))
    }
}

pub fn transmission_from_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok(4.0 * gamma / ((1.0 + gamma) * (1.0 + gamma)))
}

/// Weak-coupling branch `gamma <= 1` of the inverse.
pub fn gamma_from_transmission(t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidParameter(format!("transmission must lie in (0, 1], got {t}")));
    }
    Ok((2.0 - t - 2.0 * (1.0 - t).sqrt()) / t)
}

pub const MIN_TRANSMISSION_SAMPLES: usize = 100;

/// `T = 1 - |<S_aa>|^2`.
pub fn estimate_transmission(samples: &[C]) -> Result<f64> {
    if samples.len() < MIN_TRANSMISSION_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_TRANSMISSION_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let mean = samples.iter().sum::<C>() / samples.len() as f64;
    Ok(1.0 - mean.norm_sqr())
}

fn default_window() -> [f64; 2] {
    [-0.5, 0.5]
}

/// Ensemble model; serialized with the keys of the model document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmtModel {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Lambda")]
    pub lambda: usize,
    pub tau_abs: f64,
    /// Physical channel couplings, one per Kramers channel pair.
    pub gammas: Vec<f64>,
    #[serde(rename = "V_structure")]
    pub v_structure: VStructure,
    pub ensemble_size: usize,
    /// Number of energies per realization, evenly spaced over `energy_window`.
    pub energies: usize,
    #[serde(default = "default_window")]
    pub energy_window: [f64; 2],
    pub seed: u64,
}

/// Default physical transmission (not a fitted value).
pub const DEFAULT_TRANSMISSION: f64 = 0.9;

impl Default for RmtModel {
    fn default() -> Self {
        let g = gamma_from_transmission(DEFAULT_TRANSMISSION).expect("valid default");
        Self {
            n: 200,
            lambda: 25,
            tau_abs: 25.0,
            gammas: vec![g, g],
            v_structure: VStructure::sparse(5),
            ensemble_size: 300,
            energies: 51,
            energy_window: default_window(),
            seed: 1,
        }
    }
}

impl RmtModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.gammas.len();
        if m == 0 {
            return Err(Error::InvalidParameter("at least one physical channel required".into()));
        }
        if self.lambda + m >= self.n {
            return Err(Error::InvalidParameter(format!(
                "Lambda + M = {} must be below N = {}",
                self.lambda + m,
                self.n
            )));
        }
        if let Some(g) = self.gammas.iter().find(|&&g| !(g > 0.0)) {
            return Err(Error::InvalidParameter(format!("coupling strength must be positive, got {g}")));
        }
        let tf = self.fictitious_transmission()?;
        if !(0.0..=1.0).contains(&tf) {
            return Err(Error::InvalidParameter(format!(
                "tau_abs = {} needs T_f = {tf} in [0, 1] with Lambda = {}",
                self.tau_abs, self.lambda
            )));
        }
        if self.energies == 0 || self.ensemble_size == 0 {
            return Err(Error::InvalidParameter("energies and ensemble_size must be positive".into()));
        }
        if !(self.energy_window[1] >= self.energy_window[0]) {
            return Err(Error::InvalidParameter("energy window reversed".into()));
        }
        Ok(())
    }

    pub fn physical_channels(&self) -> usize {
        self.gammas.len()
    }

    /// `T_f = tau_abs / (2 Lambda)`.
    pub fn fictitious_transmission(&self) -> Result<f64> {
        if self.lambda == 0 {
            return if self.tau_abs == 0.0 {
                Ok(0.0)
            } else {
                Err(Error::InvalidParameter("tau_abs > 0 needs Lambda > 0".into()))
            };
        }
        Ok(self.tau_abs / (2.0 * self.lambda as f64))
    }

    /// Physical then fictitious couplings. A zero absorption keeps `Lambda`
    /// channels out of the model altogether.
    pub fn channel_gammas(&self) -> Result<Vec<f64>> {
        let mut g = self.gammas.clone();
        let tf = self.fictitious_transmission()?;
        if tf > 0.0 {
            g.extend(std::iter::repeat_n(gamma_from_transmission(tf)?, self.lambda));
        }
        Ok(g)
    }

    /// Indices of the physical ports 1, 2, .., 1bar, 2bar, .. in the full S.
    pub fn physical_ports(&self) -> Result<Vec<usize>> {
        let pairs = self.channel_gammas()?.len();
        let m = self.physical_channels();
        Ok((0..m).chain(pairs..pairs + m).collect())
    }

    /// Entry variance giving semicircle radius 2 for the assembled matrix.
    pub fn variance(&self, structure: &VStructure) -> f64 {
        match structure {
            VStructure::Full => 1.0 / (2.0 * self.n as f64),
            VStructure::Sparse { .. } => 1.0 / self.n as f64,
        }
    }

    pub fn energy_grid(&self) -> Vec<f64> {
        let [lo, hi] = self.energy_window;
        if self.energies == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..self.energies).map(|i| lo + (hi - lo) * i as f64 / (self.energies - 1) as f64).collect()
    }

    /// Generator of one realization: independent stream per index.
    pub fn realization_rng(&self, realization: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(realization);
        rng
    }

    pub fn sample_realization(&self, realization: u64) -> Result<RmtRealization> {
        self.validate()?;
        let mut rng = self.realization_rng(realization);
        let variance = self.variance(&self.v_structure);
        let h0 = sample_gue(self.n, variance, &mut rng)?;
        let v = sample_coupling_v(self.n, &self.v_structure, variance, &mut rng)?;
        let hamiltonian = assemble_gse(&h0, &v.matrix)?;
        let coupling = sample_coupling_w(self, &mut rng)?;
        Ok(RmtRealization { hamiltonian, coupling, support: v.support })
    }

    /// Physical-port S matrices of one realization over the energy grid.
    pub fn realization_samples(&self, realization: u64) -> Result<Vec<ScatteringSample>> {
        let r = self.sample_realization(realization)?;
        let ports = self.physical_ports()?;
        let resolvent = SpectralResolvent::new(&r.hamiltonian, &r.coupling);
        self.energy_grid()
            .into_iter()
            .map(|e| {
                let s = resolvent.s_matrix(e)?;
                let phys = DMatrix::from_fn(ports.len(), ports.len(), |i, j| s[(ports[i], ports[j])]);
                Ok(ScatteringSample { k: e, eps: self.tau_abs, s: phys })
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct RmtRealization {
    pub hamiltonian: GseHamiltonian,
    pub coupling: CouplingMatrix,
    pub support: Vec<usize>,
}
