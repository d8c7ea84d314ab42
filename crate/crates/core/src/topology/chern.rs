use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::bands::min_bandgap;
use super::dirac::find_dirac_points;
use super::GAP_TOLERANCE;
use crate::bessel::{bessel_j_table, MAX_ORDER};
use crate::config::LatticeConfig;
use crate::effective::EffectiveModel;
use crate::error::{Result, SlError};
use crate::lattice::{central_bands_of, floquet_matrix_with, HarmonicCouplings, C64, IDX_B};

pub const DEFAULT_FHS_GRID: usize = 60;
pub const MIN_FHS_GRID: usize = 12;
const FHS_RESIDUAL: f64 = 1e-3;
const FHS_GAP: f64 = 1e-6;
const SMALL_F_ZERO: f64 = 1e-12;
const BESSEL_ZERO: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChernMethod {
    DpCounting,
    SmallF,
    BesselSum,
    FhsWilson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernResult {
    pub value: i32,
    pub method: ChernMethod,
    /// Smallest band splitting seen by the method (MHz).
    pub min_gap: f64,
    pub reliable: bool,
    /// Distance of the raw plaquette sum from the nearest integer.
    pub residual: Option<f64>,
    pub note: Option<String>,
}

/// Which lower band the plaquette sum runs over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSource {
    #[default]
    Effective,
    ExactFloquet,
}

/// `sgn{sin[(φ1−φ2)/2] sin[(φ2−φ3)/2] sin[(φ3−φ1)/2]}`, 0 on phase boundaries.
pub fn chern_small_f(phi: [f64; 3]) -> i8 {
    let p = ((phi[0] - phi[1]) / 2.0).sin() * ((phi[1] - phi[2]) / 2.0).sin() * ((phi[2] - phi[0]) / 2.0).sin();
    if p.abs() < SMALL_F_ZERO {
        0
    } else {
        p.signum() as i8
    }
}

/// Value of `Σ_{n=1}^{N} Σ_j J_n(f)² sin[n(φ_{j+1} − φ_j)]/n` with `φ_4 ≡ φ_1`.
pub fn bessel_sum(phi: [f64; 3], f: f64, n_terms: usize) -> f64 {
    let table = bessel_j_table(n_terms, f.abs());
    let mut sum = 0.0;
    for (n, jn) in table.iter().enumerate().skip(1) {
        let nf = n as f64;
        let cycle: f64 = (0..3).map(|j| (nf * (phi[(j + 1) % 3] - phi[j])).sin()).sum();
        sum += jn * jn * cycle / nf;
    }
    sum
}

/// Sign of the truncated Bessel sum; requires `n_terms >= ceil(f) + 6`.
pub fn chern_bessel(phi: [f64; 3], f: f64, n_terms: usize) -> Result<i8> {
    let needed = f.abs().ceil() as usize + 6;
    if n_terms < needed || n_terms > MAX_ORDER as usize {
        return Err(SlError::InvalidParameter(format!(
            "n_terms = {n_terms} must lie in [{needed}, {MAX_ORDER}] for f = {f}"
        )));
    }
    let s = bessel_sum(phi, f, n_terms);
    Ok(if s.abs() < BESSEL_ZERO { 0 } else { s.signum() as i8 })
}

pub fn chern_bessel_default(phi: [f64; 3], f: f64) -> Result<i8> {
    chern_bessel(phi, f, f.abs().ceil() as usize + 6)
}

/// `C = ½ Σ sgn(h_z) χ` over all Dirac points.
pub fn chern_dp_counting(cfg: &LatticeConfig) -> Result<ChernResult> {
    let search = find_dirac_points(cfg)?;
    let gap_tol = GAP_TOLERANCE * cfg.omega;
    let twice: i32 = search.points.iter().map(|p| p.hz_sign as i32 * p.chirality as i32).sum();
    let mut notes = Vec::new();
    if !search.unresolved.is_empty() {
        notes.push(format!("{} unresolved Dirac candidates", search.unresolved.len()));
    }
    if search.points.iter().any(|p| p.gap < gap_tol) {
        notes.push("gapless Dirac point".to_string());
    }
    if twice % 2 != 0 {
        notes.push("odd sum of sgn(h_z)χ".to_string());
    }
    if search.total_chirality() != 0 {
        notes.push("non-zero total chirality".to_string());
    }
    let min_gap = match search.points.iter().map(|p| p.gap).reduce(f64::min) {
        Some(g) => g,
        None => min_bandgap(cfg, 24)?.gap,
    };
    Ok(ChernResult {
        value: twice / 2,
        method: ChernMethod::DpCounting,
        min_gap,
        reliable: notes.is_empty(),
        residual: None,
        note: if notes.is_empty() { None } else { Some(notes.join("; ")) },
    })
}

pub fn chern_fhs(cfg: &LatticeConfig, grid: usize) -> Result<ChernResult> {
    chern_fhs_with(cfg, grid, BandSource::Effective)
}

/// Plaquette (lattice gauge) Berry-flux sum of the lower band on a
/// `grid × grid` torus.
pub fn chern_fhs_with(cfg: &LatticeConfig, grid: usize, source: BandSource) -> Result<ChernResult> {
    cfg.validate()?;
    if grid < MIN_FHS_GRID {
        return Err(SlError::InvalidParameter(format!(
            "plaquette grid {grid} is below {MIN_FHS_GRID}"
        )));
    }
    let frac = |idx: usize| ((idx / grid) as f64 / grid as f64, (idx % grid) as f64 / grid as f64);
    let (states, gaps): (Vec<Vec<C64>>, Vec<f64>) = match source {
        BandSource::Effective => {
            let model = EffectiveModel::new(cfg);
            (0..grid * grid)
                .map(|idx| {
                    let (s1, s2) = frac(idx);
                    let h = model.h_periodic_frac(s1, s2);
                    (h.lower_state().to_vec(), h.gap())
                })
                .unzip()
        }
        BandSource::ExactFloquet => {
            let hc = HarmonicCouplings::new(cfg);
            let zone = crate::lattice::BrillouinZone::new(&cfg.geometry);
            (0..grid * grid)
                .map(|idx| {
                    let (s1, s2) = frac(idx);
                    let r = zone.from_fractional(s1, s2);
                    let fm = floquet_matrix_with(&hc, cfg.delta, r);
                    let bands = central_bands_of(&fm, cfg.delta);
                    let phase = zone.periodic_phase(r);
                    let mut v: Vec<C64> = bands.vectors[0].iter().copied().collect();
                    for m in 0..(2 * fm.n_max + 1) {
                        v[2 * m + IDX_B] *= phase;
                    }
                    (v, bands.gap())
                })
                .unzip()
        }
    };
    let orientation = crate::lattice::BrillouinZone::new(&cfg.geometry).orientation();
    let raw = fhs_chern_from_states(&states, grid, orientation);
    let value = raw.round();
    let residual = (raw - value).abs();
    if residual > FHS_RESIDUAL {
        return Err(SlError::GridTooCoarse { residual });
    }
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let reliable = min_gap > FHS_GAP * cfg.omega;
    Ok(ChernResult {
        value: value as i32,
        method: ChernMethod::FhsWilson,
        min_gap,
        reliable,
        residual: Some(residual),
        note: if reliable { None } else { Some("band gap closes on the grid".into()) },
    })
}

/// Raw (unrounded) Chern number from lower-band states on a periodic
/// `grid × grid` mesh, index `i·grid + j` for fractional point `(i, j)/grid`.
///
/// Uses `A = i⟨u|∇u⟩`; `orientation` is the sign of `a1 × a2`.
pub fn fhs_chern_from_states(states: &[Vec<C64>], grid: usize, orientation: f64) -> f64 {
    assert_eq!(states.len(), grid * grid, "state mesh has the wrong size");
    let link = |a: usize, b: usize| -> C64 {
        states[a].iter().zip(&states[b]).map(|(x, y)| x.conj() * y).sum()
    };
    let idx = |i: usize, j: usize| (i % grid) * grid + (j % grid);
    let mut flux = 0.0;
    for i in 0..grid {
        for j in 0..grid {
            let p00 = idx(i, j);
            let p10 = idx(i + 1, j);
            let p11 = idx(i + 1, j + 1);
            let p01 = idx(i, j + 1);
            let u = link(p00, p10) * link(p10, p11) * link(p11, p01) * link(p01, p00);
            flux += u.arg();
        }
    }
    -orientation * flux / TAU
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference_phases;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cfg(omega: f64, f: f64, phi: [f64; 3]) -> LatticeConfig {
        LatticeConfig::new(omega, f, 80.0, phi).unwrap()
    }

    #[test]
    fn small_f_signs() {
        assert_eq!(chern_small_f(reference_phases()), 1);
        assert_eq!(chern_small_f([0.0, 4.0 * PI / 3.0, 2.0 * PI / 3.0]), -1);
        for phi in [0.0, 1.0, 3.3] {
            assert_eq!(chern_small_f([0.0, phi, phi]), 0);
        }
    }

    #[test]
    fn bessel_signs() {
        assert_eq!(chern_bessel(reference_phases(), 1.0, 7).unwrap(), 1);
        assert_eq!(chern_bessel(reference_phases(), 0.0, 6).unwrap(), 0);
        assert_eq!(chern_bessel(reference_phases(), 1e-7, 7).unwrap(), 0);
        assert!(chern_bessel(reference_phases(), 3.2, 9).is_err());
        // n = 1 term dominates at f = 1
        let j1 = crate::bessel::bessel_j(1, 1.0).unwrap();
        let s = bessel_sum(reference_phases(), 1.0, 12);
        assert!((s - 3.0 * j1 * j1 * (2.0 * PI / 3.0).sin()).abs() < 0.2 * s.abs());
    }

    #[test]
    fn bessel_matches_small_f_at_f1() {
        for i in 0..24 {
            for j in 0..24 {
                let phi = [0.0, TAU * i as f64 / 24.0, TAU * j as f64 / 24.0];
                let p = ((phi[0] - phi[1]) / 2.0).sin() * ((phi[1] - phi[2]) / 2.0).sin() * ((phi[2] - phi[0]) / 2.0).sin();
                if p.abs() < 0.05 {
                    continue;
                }
                assert_eq!(chern_bessel(phi, 1.0, 12).unwrap(), chern_small_f(phi), "{phi:?}");
            }
        }
    }

    #[test]
    fn fhs_reference_point() {
        let r = chern_fhs(&cfg(10.0, 1.0, reference_phases()), 60).unwrap();
        assert_eq!(r.value, 1);
        assert!(r.reliable);
        assert!(r.residual.unwrap() < 1e-9);
        let swapped = chern_fhs(&cfg(10.0, 1.0, [0.0, 4.0 * PI / 3.0, 2.0 * PI / 3.0]), 60).unwrap();
        assert_eq!(swapped.value, -1);
    }

    #[test]
    fn fhs_static_is_unreliable() {
        let r = chern_fhs(&cfg(10.0, 0.0, reference_phases()), 60).unwrap();
        assert!(!r.reliable);
    }

    #[test]
    fn fhs_exact_floquet_agrees() {
        let c = cfg(10.0, 1.0, reference_phases());
        let r = chern_fhs_with(&c, 24, BandSource::ExactFloquet).unwrap();
        assert_eq!(r.value, 1);
        assert!(r.reliable);
    }

    #[test]
    fn fhs_gauge_invariance() {
        let c = cfg(25.0, 2.6, reference_phases());
        let model = EffectiveModel::new(&c);
        let grid = 48;
        let states: Vec<Vec<C64>> = (0..grid * grid)
            .map(|idx| {
                let h = model.h_periodic_frac((idx / grid) as f64 / grid as f64, (idx % grid) as f64 / grid as f64);
                h.lower_state().to_vec()
            })
            .collect();
        let base = fhs_chern_from_states(&states, grid, 1.0).round();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let rotated: Vec<Vec<C64>> = states
                .iter()
                .map(|v| {
                    let ph = C64::from_polar(1.0, rng.gen_range(0.0..TAU));
                    v.iter().map(|x| x * ph).collect()
                })
                .collect();
            assert_eq!(fhs_chern_from_states(&rotated, grid, 1.0).round(), base);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(chern_fhs(&cfg(10.0, 1.0, reference_phases()), 8).is_err());
    }

    #[test]
    fn dp_counting_reference_point() {
        let r = chern_dp_counting(&cfg(10.0, 1.0, reference_phases())).unwrap();
        assert_eq!(r.value, 1);
        assert!(r.reliable);
        let g = chern_dp_counting(&cfg(10.0, 1.0, [0.0, 2.0, 2.0])).unwrap();
        assert!(!g.reliable);
    }
}
