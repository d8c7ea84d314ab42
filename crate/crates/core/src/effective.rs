//! High-frequency (van Vleck) effective two-band Hamiltonian.
//!
//! `H_eff = H_0 + Σ_{m≥1} [H_m, H_{−m}]/(mδ) + O(Ω³/δ²)`. The second
//! order term is kept by default: it generates the longer-range hoppings
//! responsible for the satellite Dirac points at strong modulation.
//!
//! Two evaluation routes exist. [`effective_hamiltonian`] forms the nested
//! commutators of the Fourier blocks at a single point. [`EffectiveModel`]
//! expands the same sums once into plane-wave harmonics and is what the
//! topology and sweep code evaluates on grids.

use std::f64::consts::TAU;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::config::LatticeConfig;
use crate::error::{Result, SlError};
use crate::lattice::{BlochPoint, BrillouinZone, HarmonicCouplings, C64, IDX_A, IDX_B};

/// Bloch vector of `H_eff = h·σ` (MHz).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        HVector { x, y, z }
    }

    /// Build from the off-diagonal element `⟨b|H|a⟩ = h_x − i h_y` and `h_z`.
    pub fn from_parts(offdiag: C64, z: f64) -> Self {
        HVector::new(offdiag.re, -offdiag.im, z)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn in_plane(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Splitting of the two bands, `2|h|`.
    pub fn gap(&self) -> f64 {
        2.0 * self.norm()
    }

    pub fn offdiag(&self) -> C64 {
        C64::new(self.x, -self.y)
    }

    pub fn matrix(&self) -> Matrix2<C64> {
        let z = C64::new(self.z, 0.0);
        Matrix2::new(z, self.offdiag(), self.offdiag().conj(), -z)
    }

    /// Normalized lower-band eigenvector in `(b, a)` ordering.
    pub fn lower_state(&self) -> [C64; 2] {
        let n = self.norm();
        let v = if self.z >= 0.0 {
            [C64::new(-self.x, self.y), C64::new(self.z + n, 0.0)]
        } else {
            [C64::new(n - self.z, 0.0), C64::new(-self.x, -self.y)]
        };
        let len = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        if len == 0.0 {
            return [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        }
        [v[0] / len, v[1] / len]
    }

    /// `⟨σ_z⟩` of the lower and upper band.
    pub fn polarization(&self) -> [f64; 2] {
        let n = self.norm();
        if n == 0.0 {
            return [0.0, 0.0];
        }
        [-self.z / n, self.z / n]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpansionOrder {
    First,
    #[default]
    Second,
}

/// `H_eff` split into the traceless part `h·σ` and the identity part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveHamiltonian {
    pub h: HVector,
    pub identity: f64,
}

impl EffectiveHamiltonian {
    fn from_matrix(m: &Matrix2<C64>) -> Self {
        let ba = m[(IDX_B, IDX_A)];
        let ab = m[(IDX_A, IDX_B)];
        let offdiag = (ba + ab.conj()) * 0.5;
        let zb = m[(IDX_B, IDX_B)].re;
        let za = m[(IDX_A, IDX_A)].re;
        EffectiveHamiltonian {
            h: HVector::from_parts(offdiag, 0.5 * (zb - za)),
            identity: 0.5 * (zb + za),
        }
    }
}

fn comm(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix2<C64> {
    a * b - b * a
}

fn warn_if_not_perturbative(cfg: &LatticeConfig) {
    if cfg.omega >= cfg.delta {
        log::warn!(
            "Ω = {} MHz is not below δ = {} MHz; the high-frequency expansion is unreliable",
            cfg.omega,
            cfg.delta
        );
    }
}

/// `H_eff(r)` by explicit nested commutators of the Fourier blocks.
pub fn effective_hamiltonian(
    cfg: &LatticeConfig,
    r: BlochPoint,
    order: ExpansionOrder,
) -> EffectiveHamiltonian {
    warn_if_not_perturbative(cfg);
    let hc = HarmonicCouplings::new(cfg);
    let n = hc.n_max() as i64;
    let phases = hc.plane_waves(r);
    let blocks: Vec<Matrix2<C64>> = (-2 * n..=2 * n).map(|m| hc.block(m, &phases)).collect();
    let h = |m: i64| &blocks[(m + 2 * n) as usize];
    let delta = cfg.delta;

    let mut total = *h(0);
    for m in 1..=n {
        total += comm(h(m), h(-m)) / C64::from(m as f64 * delta);
    }
    if order == ExpansionOrder::Second {
        let d2 = delta * delta;
        for m in (-n..=n).filter(|&m| m != 0) {
            let mf = m as f64;
            total += comm(h(-m), &comm(h(0), h(m))) / C64::from(2.0 * mf * mf * d2);
            for mp in (-n..=n).filter(|&mp| mp != 0 && mp != m) {
                total += comm(h(-mp), &comm(h(mp - m), h(m))) / C64::from(3.0 * mf * mp as f64 * d2);
            }
        }
    }
    EffectiveHamiltonian::from_matrix(&total)
}

/// Bloch vector of `H_eff` at `r` (second-order expansion).
pub fn effective_h_vector(cfg: &LatticeConfig, r: BlochPoint) -> HVector {
    effective_hamiltonian(cfg, r, ExpansionOrder::Second).h
}

// Harmonic tables are indexed by the lattice offset (m, n) of a plane wave
// e^{i q·r} with q = k1 − c2·… ; off-diagonal waves are stored relative to k1
// so that w_p = e^{−i k1·r} w is periodic on the torus.
const OFF_SPAN: i32 = 2;
const OFF_W: usize = (2 * OFF_SPAN + 1) as usize;
const DIAG_SPAN: i32 = 1;
const DIAG_W: usize = (2 * DIAG_SPAN + 1) as usize;

/// Lattice offset of the plane wave `Σ c_j k_j`, with `Σ c_j = 1` for
/// off-diagonal and `Σ c_j = 0` for diagonal waves.
fn offset(c: [i32; 3]) -> (i32, i32) {
    (-c[1], -c[2])
}

type OffTable = [[C64; OFF_W]; OFF_W];
type DiagTable = [[C64; DIAG_W]; DIAG_W];

/// Plane-wave expansion of `H_eff`, order by order.
#[derive(Clone, Debug)]
pub struct EffectiveModel {
    zone: BrillouinZone,
    order: ExpansionOrder,
    /// Off-diagonal harmonics of `⟨b|H|a⟩` from `H_0`.
    zeroth: OffTable,
    /// Harmonics of `h_z` from the first-order commutators.
    first: DiagTable,
    /// Off-diagonal harmonics from the second-order commutators.
    second: OffTable,
}

impl EffectiveModel {
    pub fn new(cfg: &LatticeConfig) -> Self {
        Self::with_order(cfg, ExpansionOrder::Second)
    }

    pub fn with_order(cfg: &LatticeConfig, order: ExpansionOrder) -> Self {
        warn_if_not_perturbative(cfg);
        let hc = HarmonicCouplings::new(cfg);
        let n = hc.n_max() as i64;
        let g = |m: i64, j: usize| hc.amplitude(m, j);
        let delta = cfg.delta;
        let zero = C64::new(0.0, 0.0);

        let mut zeroth = [[zero; OFF_W]; OFF_W];
        for j in 0..3 {
            let mut c = [0; 3];
            c[j] = 1;
            *off_slot(&mut zeroth, c) += g(0, j);
        }

        let mut first = [[zero; DIAG_W]; DIAG_W];
        for i in 0..3 {
            for j in 0..3 {
                let mut d = zero;
                for m in 1..=n {
                    d += (g(m, i) * g(m, j).conj() - g(-m, i) * g(-m, j).conj()) / (m as f64 * delta);
                }
                let mut c = [0; 3];
                c[i] += 1;
                c[j] -= 1;
                *diag_slot(&mut first, c) += d;
            }
        }

        let mut second = [[zero; OFF_W]; OFF_W];
        if order == ExpansionOrder::Second {
            let mut t = [[[zero; 3]; 3]; 3];
            let d2 = delta * delta;
            // ⟨b|[H_a, [H_p, H_q]]|a⟩ = −2 g_a (g_p g̃_q − g_q g̃_p), g̃_q = conj(g_{−q})
            let mut nested = |coef: f64, a: i64, p: i64, q: i64| {
                for i in 0..3 {
                    let ga = g(a, i) * (-2.0 * coef);
                    if ga == zero {
                        continue;
                    }
                    for j in 0..3 {
                        for l in 0..3 {
                            t[i][j][l] += ga
                                * (g(p, j) * g(-q, l).conj() - g(q, j) * g(-p, l).conj());
                        }
                    }
                }
            };
            for m in (-n..=n).filter(|&m| m != 0) {
                let mf = m as f64;
                nested(1.0 / (2.0 * mf * mf * d2), -m, 0, m);
                for mp in (-n..=n).filter(|&mp| mp != 0 && mp != m) {
                    if (mp - m).abs() > n {
                        continue;
                    }
                    nested(1.0 / (3.0 * mf * mp as f64 * d2), -mp, mp - m, m);
                }
            }
            for (i, ti) in t.iter().enumerate() {
                for (j, tij) in ti.iter().enumerate() {
                    for (l, v) in tij.iter().enumerate() {
                        let mut c = [0; 3];
                        c[i] += 1;
                        c[j] += 1;
                        c[l] -= 1;
                        *off_slot(&mut second, c) += *v;
                    }
                }
            }
        }

        EffectiveModel {
            zone: BrillouinZone::new(&cfg.geometry),
            order,
            zeroth,
            first,
            second,
        }
    }

    pub fn zone(&self) -> &BrillouinZone {
        &self.zone
    }

    pub fn order(&self) -> ExpansionOrder {
        self.order
    }

    /// Bloch vector in the periodic gauge at fractional coordinates.
    pub fn h_periodic_frac(&self, s1: f64, s2: f64) -> HVector {
        let u = C64::from_polar(1.0, TAU * s1);
        let v = C64::from_polar(1.0, TAU * s2);
        let up = powers::<OFF_W>(u);
        let vp = powers::<OFF_W>(v);
        let mut w = C64::new(0.0, 0.0);
        for a in 0..OFF_W {
            for b in 0..OFF_W {
                let c = self.zeroth[a][b] + self.second[a][b];
                if c.re != 0.0 || c.im != 0.0 {
                    w += c * up[a] * vp[b];
                }
            }
        }
        let o = (OFF_SPAN - DIAG_SPAN) as usize;
        let mut z = C64::new(0.0, 0.0);
        for a in 0..DIAG_W {
            for b in 0..DIAG_W {
                z += self.first[a][b] * up[a + o] * vp[b + o];
            }
        }
        HVector::from_parts(w, z.re)
    }

    /// Bloch vector in the periodic gauge, where `⟨b|H|a⟩` carries an
    /// extra `e^{−i k1·r}`.
    pub fn h_periodic(&self, r: BlochPoint) -> HVector {
        let (s1, s2) = self.zone.to_fractional(r);
        self.h_periodic_frac(s1, s2)
    }

    /// Bloch vector in the natural gauge (same as [`effective_h_vector`]).
    pub fn h_vector(&self, r: BlochPoint) -> HVector {
        let p = self.h_periodic(r);
        let w = p.offdiag() * C64::from_polar(1.0, self.zone.k[0].dot(r));
        HVector::from_parts(w, p.z)
    }

    /// Per-order periodic-gauge parts `(⟨b|H_0|a⟩, h_z, ⟨b|H^(2)|a⟩)`.
    fn parts_frac(&self, s1: f64, s2: f64) -> (C64, f64, C64) {
        let up = powers::<OFF_W>(C64::from_polar(1.0, TAU * s1));
        let vp = powers::<OFF_W>(C64::from_polar(1.0, TAU * s2));
        let mut w0 = C64::new(0.0, 0.0);
        let mut w2 = C64::new(0.0, 0.0);
        for a in 0..OFF_W {
            for b in 0..OFF_W {
                w0 += self.zeroth[a][b] * up[a] * vp[b];
                w2 += self.second[a][b] * up[a] * vp[b];
            }
        }
        let o = (OFF_SPAN - DIAG_SPAN) as usize;
        let mut z = C64::new(0.0, 0.0);
        for a in 0..DIAG_W {
            for b in 0..DIAG_W {
                z += self.first[a][b] * up[a + o] * vp[b + o];
            }
        }
        (w0, z.re, w2)
    }
}

fn off_slot(t: &mut OffTable, c: [i32; 3]) -> &mut C64 {
    let (m, n) = offset(c);
    &mut t[(m + OFF_SPAN) as usize][(n + OFF_SPAN) as usize]
}

fn diag_slot(t: &mut DiagTable, c: [i32; 3]) -> &mut C64 {
    let (m, n) = offset(c);
    &mut t[(m + DIAG_SPAN) as usize][(n + DIAG_SPAN) as usize]
}

/// `[x^{−S}, …, x^{S}]` for a unit-modulus `x`, `W = 2S + 1`.
fn powers<const W: usize>(x: C64) -> [C64; W] {
    let s = W / 2;
    let mut out = [C64::new(1.0, 0.0); W];
    for k in 1..=s {
        out[s + k] = out[s + k - 1] * x;
        out[s - k] = out[s - k + 1] * x.conj();
    }
    out
}

/// Dominant hopping amplitude of each harmonic class of `H_eff` (MHz).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoppingSet {
    /// Nearest-neighbour hopping carried by `H_0`.
    pub t1: f64,
    /// Complex next-nearest-neighbour hopping (`b`-sublattice sign).
    pub t2: C64,
    /// Third-neighbour hopping across the hexagon.
    pub t3: C64,
    /// Third-neighbour hopping of the `2k_i − k_l` type.
    pub t4: C64,
    /// Nearest-neighbour hopping including the second-order renormalization.
    pub t1_dressed: f64,
}

pub const DEFAULT_HOPPING_GRID: usize = 48;

const NN_CLASS: [[i32; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
const NNN_CLASS: [[i32; 3]; 6] = [
    [1, -1, 0],
    [-1, 1, 0],
    [0, 1, -1],
    [0, -1, 1],
    [-1, 0, 1],
    [1, 0, -1],
];
const T3_CLASS: [[i32; 3]; 3] = [[1, 1, -1], [1, -1, 1], [-1, 1, 1]];
const T4_CLASS: [[i32; 3]; 6] = [
    [2, -1, 0],
    [2, 0, -1],
    [-1, 2, 0],
    [0, 2, -1],
    [-1, 0, 2],
    [0, -1, 2],
];

/// Hopping amplitudes by discrete Fourier transform of `H_eff` sampled on a
/// `grid × grid` torus.
///
/// Each class is read from the order of the expansion that generates it:
/// `t1` from `H_0`, `t2` from the first-order `h_z`, `t3` and `t4` from the
/// second-order off-diagonal term. `t1_dressed` uses the full off-diagonal
/// element.
pub fn effective_hoppings(cfg: &LatticeConfig, grid: usize) -> Result<HoppingSet> {
    cfg.validate()?;
    let model = EffectiveModel::new(cfg);
    let required = 2 * OFF_SPAN as usize + 1;
    if grid < required {
        return Err(SlError::Resolution { grid, required });
    }
    let zero = C64::new(0.0, 0.0);
    let mut w0 = vec![zero; grid * grid];
    let mut hz = vec![zero; grid * grid];
    let mut w2 = vec![zero; grid * grid];
    for i in 0..grid {
        for j in 0..grid {
            let (a, z, b) = model.parts_frac(i as f64 / grid as f64, j as f64 / grid as f64);
            w0[i * grid + j] = a;
            hz[i * grid + j] = C64::new(z, 0.0);
            w2[i * grid + j] = b;
        }
    }
    let coefficient = |samples: &[C64], c: &[i32; 3]| -> C64 {
        let (m, n) = offset(*c);
        let mut acc = zero;
        for i in 0..grid {
            for j in 0..grid {
                let arg = -TAU * (m as f64 * i as f64 + n as f64 * j as f64) / grid as f64;
                acc += samples[i * grid + j] * C64::from_polar(1.0, arg);
            }
        }
        acc / (grid * grid) as f64
    };
    let dominant = |samples: &[C64], class: &[[i32; 3]]| -> C64 {
        class
            .iter()
            .map(|c| coefficient(samples, c))
            .fold(zero, |best, x| if x.norm() > best.norm() { x } else { best })
    };
    let full: Vec<C64> = w0.iter().zip(&w2).map(|(a, b)| a + b).collect();
    Ok(HoppingSet {
        t1: dominant(&w0, &NN_CLASS).re,
        t2: dominant(&hz, &NNN_CLASS),
        t3: dominant(&w2, &T3_CLASS),
        t4: dominant(&w2, &T4_CLASS),
        t1_dressed: dominant(&full, &NN_CLASS).re,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_j;
    use crate::config::{reference_phases, Geometry};
    use crate::lattice::quasienergy_bands;
    use std::f64::consts::PI;

    fn cfg(omega: f64, f: f64, phi: [f64; 3]) -> LatticeConfig {
        LatticeConfig::new(omega, f, 80.0, phi).unwrap()
    }

    fn sample_points() -> Vec<BlochPoint> {
        let z = BrillouinZone::new(&Geometry::Symmetric);
        let mut pts = vec![z.k_point(), z.k_prime_point(), z.gamma(), z.m_point()];
        for i in 0..5 {
            for j in 0..5 {
                pts.push(z.from_fractional(0.13 + 0.19 * i as f64, 0.07 + 0.21 * j as f64));
            }
        }
        pts
    }

    #[test]
    fn routes_agree() {
        for (omega, f, phi) in [
            (10.0, 1.0, reference_phases()),
            (25.0, 2.6, reference_phases()),
            (25.0, 3.2, [0.0, 1.3, 4.4]),
            (40.0, 5.7, [0.4, 2.9, 0.8]),
        ] {
            let c = cfg(omega, f, phi);
            let model = EffectiveModel::new(&c);
            for r in sample_points() {
                let direct = effective_hamiltonian(&c, r, ExpansionOrder::Second);
                let fast = model.h_vector(r);
                let d = direct.h;
                let err = ((d.x - fast.x).powi(2) + (d.y - fast.y).powi(2) + (d.z - fast.z).powi(2)).sqrt();
                assert!(err < 1e-11 * omega, "f={f} r={r:?} err={err}");
                assert!(direct.identity.abs() < 1e-12 * omega);
            }
        }
    }

    #[test]
    fn static_limit_has_no_mass() {
        let c = cfg(10.0, 0.0, reference_phases());
        let model = EffectiveModel::new(&c);
        for r in sample_points() {
            assert!(effective_h_vector(&c, r).z.abs() < 1e-12);
            assert!(model.h_vector(r).z.abs() < 1e-12);
        }
    }

    #[test]
    fn equal_phases_have_no_mass() {
        let c = cfg(25.0, 2.6, [1.1, 1.1, 1.1]);
        let model = EffectiveModel::new(&c);
        for r in sample_points() {
            assert!(effective_h_vector(&c, r).z.abs() < 1e-12);
            assert!(model.h_vector(r).z.abs() < 1e-12);
        }
    }

    #[test]
    fn gap_at_k_matches_exact_floquet() {
        let c = cfg(10.0, 1.0, reference_phases());
        let z = BrillouinZone::new(&Geometry::Symmetric);
        let k = z.k_point();
        let exact = quasienergy_bands(&c.clone().with_n_max(10), k).gap();
        let approx = effective_h_vector(&c, k).gap();
        assert!(((approx - exact) / exact).abs() < 0.05, "{approx} vs {exact}");
    }

    #[test]
    fn gap_at_k_first_order_value() {
        // h_z(K) = (3√3 Ω²/δ) Σ_n J_n² sin(2πn/3)/n · sign, first order only
        let c = cfg(10.0, 1.0, reference_phases());
        let z = BrillouinZone::new(&Geometry::Symmetric);
        let h = EffectiveModel::with_order(&c, ExpansionOrder::First).h_vector(z.k_point());
        let mut s = 0.0;
        for n in 1..=12 {
            let j = bessel_j(n, 1.0).unwrap();
            for k in 0..3 {
                s += j * j * (n as f64 * (reference_phases()[(k + 1) % 3] - reference_phases()[k])).sin()
                    / n as f64;
            }
        }
        let want = 2.0 * 3f64.sqrt() * c.omega * c.omega / c.delta * s;
        assert!((h.z.abs() - want.abs()).abs() < 1e-10, "{} vs {}", h.z, want);
        assert!(h.in_plane() < 1e-12);
    }

    #[test]
    fn mirror_antisymmetry() {
        // The reflection fixing K (x -> -x) flips h_z; the one exchanging
        // k2 and k3 (y -> -y) maps the swapped model onto the original.
        let c = cfg(25.0, 3.2, [0.0, 1.1, 3.9]);
        let m = cfg(25.0, 3.2, [0.0, 3.9, 1.1]);
        let (mc, mm) = (EffectiveModel::new(&c), EffectiveModel::new(&m));
        let z = mc.zone().clone();
        for i in 0..12 {
            for j in 0..12 {
                let r = z.from_fractional(i as f64 / 12.0, j as f64 / 12.0);
                let a = mc.h_vector(r).z;
                let flipped = mm.h_vector(-z.mirror(r)).z;
                let swapped = mm.h_vector(z.mirror(r));
                assert!((a + flipped).abs() < 1e-9, "{a} {flipped}");
                assert!((a - swapped.z).abs() < 1e-9);
                assert!((mc.h_vector(r).in_plane() - swapped.in_plane()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn periodic_gauge_is_periodic() {
        let c = cfg(25.0, 2.6, reference_phases());
        let model = EffectiveModel::new(&c);
        let z = model.zone().clone();
        let r = BlochPoint::new(0.3, 0.8);
        let a = model.h_periodic(r);
        let b = model.h_periodic(r + z.a1 * 2.0 - z.a2);
        assert!((a.x - b.x).abs() < 1e-10 && (a.y - b.y).abs() < 1e-10 && (a.z - b.z).abs() < 1e-10);
    }

    #[test]
    fn lower_state_is_eigenvector() {
        for h in [
            HVector::new(1.0, -2.0, 0.5),
            HVector::new(0.3, 0.1, -4.0),
            HVector::new(0.0, 0.0, 2.0),
            HVector::new(0.0, 0.0, -2.0),
        ] {
            let u = h.lower_state();
            let m = h.matrix();
            let hu = [m[(0, 0)] * u[0] + m[(0, 1)] * u[1], m[(1, 0)] * u[0] + m[(1, 1)] * u[1]];
            for k in 0..2 {
                assert!((hu[k] + u[k] * h.norm()).norm() < 1e-12);
            }
            let pz = u[0].norm_sqr() - u[1].norm_sqr();
            assert!((pz - h.polarization()[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn hoppings_static() {
        let h = effective_hoppings(&cfg(10.0, 0.0, reference_phases()), DEFAULT_HOPPING_GRID).unwrap();
        assert!((h.t1 - 10.0).abs() < 1e-9);
        assert!(h.t2.norm() < 1e-9 && h.t3.norm() < 1e-9 && h.t4.norm() < 1e-9);
    }

    #[test]
    fn hoppings_follow_bessel() {
        let h = effective_hoppings(&cfg(10.0, 1.0, reference_phases()), DEFAULT_HOPPING_GRID).unwrap();
        let j0 = bessel_j(0, 1.0).unwrap();
        assert!((h.t1 - 10.0 * j0).abs() / 10.0 < 1e-3);
        assert!((h.t2.arg().abs() - PI / 2.0).abs() < 1e-6, "{}", h.t2);

        let flat = effective_hoppings(&cfg(25.0, 2.40483, reference_phases()), DEFAULT_HOPPING_GRID).unwrap();
        assert!(flat.t1.abs() < 1e-2 * 25.0);
        assert!(flat.t3.norm() > 0.0 && flat.t4.norm() > 0.0);
    }

    #[test]
    fn hoppings_real_at_reference_phases() {
        let h = effective_hoppings(&cfg(25.0, 2.6, reference_phases()), DEFAULT_HOPPING_GRID).unwrap();
        assert!(h.t3.im.abs() < 1e-9 * h.t3.norm().max(1e-300), "{}", h.t3);
        assert!(h.t4.im.abs() < 1e-9 * h.t4.norm().max(1e-300), "{}", h.t4);
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(matches!(
            effective_hoppings(&cfg(10.0, 1.0, reference_phases()), 4),
            Err(SlError::Resolution { grid: 4, required: 5 })
        ));
    }
}
