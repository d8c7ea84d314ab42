//! Bloch Hamiltonian of the modulated honeycomb lattice and its Floquet
//! extension.
//!
//! Sublattice ordering inside every 2×2 block is `(b, a)`, so that
//! `σ_z = |b⟩⟨b| − |a⟩⟨a| = diag(1, −1)` and `⟨b|H|a⟩ = h_x − i h_y`.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j_symmetric;
use crate::config::{Geometry, LatticeConfig};
use crate::error::{Result, SlError};

pub type C64 = Complex64;

pub const IDX_B: usize = 0;
pub const IDX_A: usize = 1;

/// A point of the real-space Brillouin zone (a quasi-momentum of the
/// momentum-space lattice), in units where `|k_j| = 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochPoint {
    pub x: f64,
    pub y: f64,
}

impl BlochPoint {
    pub const ORIGIN: BlochPoint = BlochPoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        BlochPoint { x, y }
    }

    pub fn dot(self, other: BlochPoint) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl Add for BlochPoint {
    type Output = BlochPoint;
    fn add(self, o: BlochPoint) -> BlochPoint {
        BlochPoint::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for BlochPoint {
    type Output = BlochPoint;
    fn sub(self, o: BlochPoint) -> BlochPoint {
        BlochPoint::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for BlochPoint {
    type Output = BlochPoint;
    fn neg(self) -> BlochPoint {
        BlochPoint::new(-self.x, -self.y)
    }
}

impl Mul<f64> for BlochPoint {
    type Output = BlochPoint;
    fn mul(self, s: f64) -> BlochPoint {
        BlochPoint::new(self.x * s, self.y * s)
    }
}

/// Real-space Brillouin zone: the torus dual to the momentum lattice
/// spanned by `b1 = k1 − k2` and `b2 = k1 − k3`.
///
/// Fractional coordinates `(s1, s2)` satisfy `r = s1·a1 + s2·a2` with
/// `a_i · b_j = 2π δ_ij`.
#[derive(Clone, Debug)]
pub struct BrillouinZone {
    pub k: [BlochPoint; 3],
    pub b1: BlochPoint,
    pub b2: BlochPoint,
    pub a1: BlochPoint,
    pub a2: BlochPoint,
}

impl BrillouinZone {
    pub fn new(geometry: &Geometry) -> Self {
        let k = geometry.wavevectors();
        let b1 = k[0] - k[1];
        let b2 = k[0] - k[2];
        let det = b1.x * b2.y - b1.y * b2.x;
        // rows of 2π (Bᵀ)⁻¹
        let a1 = BlochPoint::new(b2.y, -b2.x) * (TAU / det);
        let a2 = BlochPoint::new(-b1.y, b1.x) * (TAU / det);
        BrillouinZone { k, b1, b2, a1, a2 }
    }

    pub fn from_fractional(&self, s1: f64, s2: f64) -> BlochPoint {
        self.a1 * s1 + self.a2 * s2
    }

    pub fn to_fractional(&self, r: BlochPoint) -> (f64, f64) {
        (self.b1.dot(r) / TAU, self.b2.dot(r) / TAU)
    }

    /// Image of `r` inside the fundamental cell `s ∈ [0, 1)²`.
    pub fn reduce(&self, r: BlochPoint) -> BlochPoint {
        let (s1, s2) = self.to_fractional(r);
        self.from_fractional(wrap_unit(s1), wrap_unit(s2))
    }

    /// Shortest distance between `p` and any periodic image of `q`.
    pub fn min_image_distance(&self, p: BlochPoint, q: BlochPoint) -> f64 {
        let (d1, d2) = self.to_fractional(p - q);
        let (d1, d2) = (d1 - d1.round(), d2 - d2.round());
        let mut best = f64::INFINITY;
        for i in -1..=1 {
            for j in -1..=1 {
                let d = self.from_fractional(d1 + i as f64, d2 + j as f64).norm();
                best = best.min(d);
            }
        }
        best
    }

    /// Sign of `a1 × a2`; `+1` when fractional axes keep the orientation of `(x, y)`.
    pub fn orientation(&self) -> f64 {
        (self.a1.x * self.a2.y - self.a1.y * self.a2.x).signum()
    }

    pub fn diameter(&self) -> f64 {
        (self.a1 + self.a2).norm().max((self.a1 - self.a2).norm())
    }

    pub fn gamma(&self) -> BlochPoint {
        BlochPoint::ORIGIN
    }

    /// Dirac point with chirality `+1` in the static lattice.
    pub fn k_point(&self) -> BlochPoint {
        self.from_fractional(1.0 / 3.0, 2.0 / 3.0)
    }

    /// Dirac point with chirality `−1` in the static lattice.
    pub fn k_prime_point(&self) -> BlochPoint {
        self.from_fractional(2.0 / 3.0, 1.0 / 3.0)
    }

    /// Zone-edge midpoint between `K` and a neighbouring `K′` image.
    pub fn m_point(&self) -> BlochPoint {
        self.from_fractional(0.5, 0.0)
    }

    /// Mirror that exchanges `k2` and `k3` (swaps the fractional coordinates).
    pub fn mirror(&self, r: BlochPoint) -> BlochPoint {
        let (s1, s2) = self.to_fractional(r);
        self.from_fractional(s2, s1)
    }

    /// Phase `e^{−i k1·r}` that makes the off-diagonal element periodic on the torus.
    pub fn periodic_phase(&self, r: BlochPoint) -> C64 {
        C64::from_polar(1.0, -self.k[0].dot(r))
    }

    /// Named high-symmetry point: `G`/`Gamma`, `K`, `Kp`/`K'`, `M`.
    pub fn named_point(&self, label: &str) -> Result<BlochPoint> {
        match label.trim() {
            "G" | "Gamma" | "Γ" => Ok(self.gamma()),
            "K" => Ok(self.k_point()),
            "Kp" | "K'" | "K′" => Ok(self.k_prime_point()),
            "M" => Ok(self.m_point()),
            other => Err(SlError::InvalidParameter(format!(
                "unknown high-symmetry point `{other}` (use G, K, Kp, M)"
            ))),
        }
    }

    /// Piecewise-linear path through labelled points, `points` samples per segment.
    pub fn path(&self, labels: &[&str], points: usize) -> Result<Vec<BlochPoint>> {
        if labels.len() < 2 || points < 1 {
            return Err(SlError::InvalidParameter(
                "a path needs at least two labels and one point per segment".into(),
            ));
        }
        let corners = labels
            .iter()
            .map(|l| self.named_point(l))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(points * (corners.len() - 1) + 1);
        for w in corners.windows(2) {
            for i in 0..points {
                let t = i as f64 / points as f64;
                out.push(w[0] + (w[1] - w[0]) * t);
            }
        }
        out.push(*corners.last().unwrap());
        Ok(out)
    }
}

fn wrap_unit(s: f64) -> f64 {
    let w = s.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// `Ω Σ_j exp[i(k_j·r + f sin(δt + φ_j))]`: the instantaneous `⟨b|H(t)|a⟩`.
pub fn coupling_field(cfg: &LatticeConfig, r: BlochPoint, t: f64) -> C64 {
    cfg.wavevectors()
        .iter()
        .zip(cfg.phi.iter())
        .map(|(k, phi)| C64::from_polar(1.0, k.dot(r) + cfg.f * (cfg.delta * t + phi).sin()))
        .sum::<C64>()
        * cfg.omega
}

/// Fourier amplitudes `G[n][j] = Ω J_n(f) e^{i n φ_j}` for `|n| <= n_max`,
/// precomputed once per configuration.
#[derive(Clone, Debug)]
pub struct HarmonicCouplings {
    n_max: usize,
    amp: Vec<[C64; 3]>,
    k: [BlochPoint; 3],
}

impl HarmonicCouplings {
    pub fn new(cfg: &LatticeConfig) -> Self {
        let n_max = cfg.n_max();
        let bessel = bessel_j_symmetric(n_max, cfg.f);
        let amp = (0..=2 * n_max)
            .map(|idx| {
                let n = idx as i64 - n_max as i64;
                let jn = cfg.omega * bessel[idx];
                std::array::from_fn(|j| C64::from_polar(jn, n as f64 * cfg.phi[j]))
            })
            .collect();
        HarmonicCouplings {
            n_max,
            amp,
            k: cfg.wavevectors(),
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `G[n][j]`, zero outside the truncation.
    pub fn amplitude(&self, n: i64, j: usize) -> C64 {
        if n.unsigned_abs() as usize > self.n_max {
            C64::new(0.0, 0.0)
        } else {
            self.amp[(n + self.n_max as i64) as usize][j]
        }
    }

    /// `g_n(r) = ⟨b|H_n|a⟩ = Σ_j G[n][j] e^{i k_j·r}`.
    pub fn g(&self, n: i64, phases: &[C64; 3]) -> C64 {
        (0..3).map(|j| self.amplitude(n, j) * phases[j]).sum()
    }

    pub fn plane_waves(&self, r: BlochPoint) -> [C64; 3] {
        self.k.map(|k| C64::from_polar(1.0, k.dot(r)))
    }

    /// Block `H_n(r)` in `(b, a)` ordering.
    pub fn block(&self, n: i64, phases: &[C64; 3]) -> Matrix2<C64> {
        let zero = C64::new(0.0, 0.0);
        let ba = self.g(n, phases);
        let ab = self.g(-n, phases).conj();
        Matrix2::new(zero, ba, ab, zero)
    }
}

/// Fourier block `H_n(r)` of the time-periodic Bloch Hamiltonian.
pub fn fourier_block(cfg: &LatticeConfig, r: BlochPoint, n: i32) -> Result<Matrix2<C64>> {
    let n_max = cfg.n_max();
    if n.unsigned_abs() as usize > n_max {
        return Err(SlError::Truncation { order: n, n_max });
    }
    let hc = HarmonicCouplings::new(cfg);
    Ok(hc.block(n as i64, &hc.plane_waves(r)))
}

/// Truncated Floquet Hamiltonian, dimension `2(2·n_max + 1)`.
///
/// Row/column index of `(harmonic m, sublattice s)` is `2(m + n_max) + s`.
#[derive(Clone, Debug)]
pub struct FloquetMatrix {
    pub n_max: usize,
    pub matrix: DMatrix<C64>,
}

impl FloquetMatrix {
    pub fn index(&self, m: i64, sublattice: usize) -> usize {
        2 * (m + self.n_max as i64) as usize + sublattice
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |H − H†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let h = &self.matrix;
        let mut worst = 0.0f64;
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

pub fn build_floquet_matrix(cfg: &LatticeConfig, r: BlochPoint) -> FloquetMatrix {
    let hc = HarmonicCouplings::new(cfg);
    floquet_matrix_with(&hc, cfg.delta, r)
}

pub(crate) fn floquet_matrix_with(hc: &HarmonicCouplings, delta: f64, r: BlochPoint) -> FloquetMatrix {
    let n_max = hc.n_max();
    let nh = 2 * n_max + 1;
    let phases = hc.plane_waves(r);
    let blocks: Vec<Matrix2<C64>> = (-(2 * n_max as i64)..=2 * n_max as i64)
        .map(|n| hc.block(n, &phases))
        .collect();
    let mut h = DMatrix::<C64>::zeros(2 * nh, 2 * nh);
    for (mi, m) in (-(n_max as i64)..=n_max as i64).enumerate() {
        for (mj, mp) in (-(n_max as i64)..=n_max as i64).enumerate() {
            let block = &blocks[(m - mp + 2 * n_max as i64) as usize];
            for s in 0..2 {
                for t in 0..2 {
                    h[(2 * mi + s, 2 * mj + t)] = block[(s, t)];
                }
            }
        }
        for s in 0..2 {
            h[(2 * mi + s, 2 * mi + s)] += C64::new(m as f64 * delta, 0.0);
        }
    }
    FloquetMatrix { n_max, matrix: h }
}

/// The two Floquet bands with the largest weight in the `m = 0` harmonic.
#[derive(Clone, Debug)]
pub struct CentralBands {
    /// Quasi-energies folded into `(−δ/2, δ/2]`, ascending.
    pub energies: [f64; 2],
    /// Eigenvectors of the Floquet matrix, same order as `energies`.
    pub vectors: [DVector<C64>; 2],
    pub m0_weights: [f64; 2],
    /// The selection was not unique: the runner-up weight ties the second band.
    pub ambiguous: bool,
}

impl CentralBands {
    pub fn gap(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }
}

pub fn fold_quasienergy(e: f64, delta: f64) -> f64 {
    let mut x = e - delta * (e / delta).round();
    if x <= -delta / 2.0 {
        x += delta;
    }
    if x > delta / 2.0 {
        x -= delta;
    }
    x
}

pub fn quasienergy_bands(cfg: &LatticeConfig, r: BlochPoint) -> CentralBands {
    central_bands_of(&build_floquet_matrix(cfg, r), cfg.delta)
}

pub(crate) fn central_bands_of(fm: &FloquetMatrix, delta: f64) -> CentralBands {
    let eig = fm.matrix.clone().symmetric_eigen();
    let i0 = fm.index(0, IDX_B);
    let weights: Vec<f64> = (0..fm.dim())
        .map(|c| eig.eigenvectors[(i0, c)].norm_sqr() + eig.eigenvectors[(i0 + 1, c)].norm_sqr())
        .collect();
    let mut order: Vec<usize> = (0..fm.dim()).collect();
    order.sort_by(|&p, &q| weights[q].total_cmp(&weights[p]));
    let ambiguous = order.len() > 2 && (weights[order[1]] - weights[order[2]]).abs() < 1e-9;

    let mut picked = [order[0], order[1]];
    let fold = |c: usize| fold_quasienergy(eig.eigenvalues[c], delta);
    if fold(picked[0]) > fold(picked[1]) {
        picked.swap(0, 1);
    }
    CentralBands {
        energies: picked.map(fold),
        vectors: picked.map(|c| eig.eigenvectors.column(c).into_owned()),
        m0_weights: picked.map(|c| weights[c]),
        ambiguous,
    }
}
