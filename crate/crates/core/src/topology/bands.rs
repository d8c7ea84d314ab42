use serde::{Deserialize, Serialize};

use crate::config::LatticeConfig;
use crate::effective::EffectiveModel;
use crate::error::{Result, SlError};
use crate::lattice::BlochPoint;

pub const MIN_GAP_GRID: usize = 24;
const REFINE_SEEDS: usize = 8;
const REFINE_STEP_FLOOR: f64 = 1e-10;
const REFINE_MAX_MOVES: usize = 20_000;
// relative to Ω; below this the gap is closed to roundoff
const CLOSED_GAP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSample {
    pub position: BlochPoint,
    /// Lower and upper band energy of `H_eff` (MHz).
    pub energies: [f64; 2],
    /// `⟨σ_z⟩` of the lower and upper band.
    pub polarization: [f64; 2],
}

/// Energies and sublattice polarization of `H_eff` along a path.
pub fn band_polarization(cfg: &LatticeConfig, path: &[BlochPoint]) -> Result<Vec<BandSample>> {
    cfg.validate()?;
    let model = EffectiveModel::new(cfg);
    Ok(path
        .iter()
        .map(|&r| {
            let h = model.h_vector(r);
            BandSample {
                position: r,
                energies: [-h.norm(), h.norm()],
                polarization: h.polarization(),
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapMinimum {
    pub gap: f64,
    pub argmin: BlochPoint,
}

/// Smallest splitting `2|h|` over the zone: grid scan, then pattern search
/// from the lowest local minima of the grid.
pub fn min_bandgap(cfg: &LatticeConfig, grid: usize) -> Result<GapMinimum> {
    cfg.validate()?;
    if grid < MIN_GAP_GRID {
        return Err(SlError::InvalidParameter(format!(
            "gap scan grid {grid} is below {MIN_GAP_GRID}"
        )));
    }
    let model = EffectiveModel::new(cfg);
    let gap_at = |s1: f64, s2: f64| model.h_periodic_frac(s1, s2).gap();
    let n = grid;
    let values: Vec<f64> = (0..n * n)
        .map(|idx| gap_at((idx / n) as f64 / n as f64, (idx % n) as f64 / n as f64))
        .collect();
    let at = |i: usize, j: usize| values[(i % n) * n + (j % n)];

    let mut minima: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = at(i, j);
            let lowest = [n - 1, 0, 1]
                .iter()
                .flat_map(|&di| [n - 1, 0, 1].map(move |dj| (di, dj)))
                .filter(|&d| d != (0, 0))
                .all(|(di, dj)| at(i + di, j + dj) >= v);
            if lowest {
                minima.push((v, i, j));
            }
        }
    }
    minima.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &(v, i, j) in minima.iter().take(REFINE_SEEDS) {
        let mut s = (i as f64 / n as f64, j as f64 / n as f64);
        let mut cur = v;
        let mut step = 1.0 / n as f64;
        let mut moves = 0;
        while step > REFINE_STEP_FLOOR && cur > CLOSED_GAP * cfg.omega && moves < REFINE_MAX_MOVES {
            moves += 1;
            let mut moved = false;
            for (d1, d2) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
                let t = (s.0 + d1 * step, s.1 + d2 * step);
                let g = gap_at(t.0, t.1);
                if g < cur {
                    cur = g;
                    s = t;
                    moved = true;
                    break;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if cur < best.0 {
            best = (cur, s.0, s.1);
        }
    }
    let zone = model.zone();
    Ok(GapMinimum {
        gap: best.0,
        argmin: zone.reduce(zone.from_fractional(best.1, best.2)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference_phases;

    fn cfg(omega: f64, f: f64, phi: [f64; 3]) -> LatticeConfig {
        LatticeConfig::new(omega, f, 80.0, phi).unwrap()
    }

    #[test]
    fn static_bands_unpolarized() {
        let c = cfg(10.0, 0.0, reference_phases());
        let zone = crate::lattice::BrillouinZone::new(&c.geometry);
        let path = zone.path(&["K", "G", "M", "Kp"], 10).unwrap();
        for s in band_polarization(&c, &path).unwrap() {
            assert!(s.polarization[0].abs() < 1e-12 && s.polarization[1].abs() < 1e-12);
            assert!(s.energies[0] <= s.energies[1]);
        }
    }

    #[test]
    fn opposite_polarization_at_k_and_kp() {
        let c = cfg(10.0, 1.0, reference_phases());
        let zone = crate::lattice::BrillouinZone::new(&c.geometry);
        let s = band_polarization(&c, &[zone.k_point(), zone.k_prime_point()]).unwrap();
        let hz = EffectiveModel::new(&c).h_vector(zone.k_point()).z;
        assert!((s[0].polarization[0] + hz.signum()).abs() < 1e-9);
        assert!((s[0].polarization[0].abs() - 1.0).abs() < 1e-9);
        assert_eq!(s[0].polarization[0].signum(), -s[1].polarization[0].signum());
    }

    #[test]
    fn mirror_symmetric_phases_are_gapless() {
        let g = min_bandgap(&cfg(10.0, 1.0, [0.0, 2.0, 2.0]), 24).unwrap();
        assert!(g.gap < 1e-6 * 10.0, "{}", g.gap);
    }

    #[test]
    fn modulation_opens_gap() {
        let g0 = min_bandgap(&cfg(10.0, 0.0, reference_phases()), 24).unwrap().gap;
        let g1 = min_bandgap(&cfg(10.0, 1.0, reference_phases()), 24).unwrap().gap;
        assert!(g0 < 1e-8 && g1 > 0.1);
        assert!(min_bandgap(&cfg(10.0, 1.0, reference_phases()), 23).is_err());
    }
}
