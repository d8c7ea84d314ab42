use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::GAP_TOLERANCE;
use crate::config::LatticeConfig;
use crate::effective::EffectiveModel;
use crate::error::{Result, SlError};
use crate::lattice::{BlochPoint, BrillouinZone};

pub const DEFAULT_DIRAC_GRID: usize = 96;
const MAX_NEWTON_ITERATIONS: usize = 100;
const MERGE_DISTANCE: f64 = 1e-4;
const CHIRALITY_STEPS: [f64; 2] = [1e-4, 1e-5];
const MIN_JACOBIAN: f64 = 1e-8;
// keeps grid nodes off the high-symmetry corners
const GRID_OFFSET: (f64, f64) = (0.311, 0.173);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracPoint {
    pub position: BlochPoint,
    pub chirality: i8,
    pub hz_sign: i8,
    /// `2|h_z|` at the point (MHz).
    pub gap: f64,
    /// `|h_x + i h_y|` at the located point (MHz).
    pub in_plane_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnresolvedCandidate {
    pub position: BlochPoint,
    pub residual: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracSearch {
    pub points: Vec<DiracPoint>,
    pub unresolved: Vec<UnresolvedCandidate>,
}

impl DiracSearch {
    pub fn total_chirality(&self) -> i32 {
        self.points.iter().map(|p| p.chirality as i32).sum()
    }
}

pub fn find_dirac_points(cfg: &LatticeConfig) -> Result<DiracSearch> {
    find_dirac_points_with(cfg, DEFAULT_DIRAC_GRID)
}

/// Zeros of the in-plane field `h_x + i h_y` in one Brillouin zone.
///
/// Seeds are plaquettes of a `grid × grid` scan with non-zero winding, plus
/// local minima of `|h_x + i h_y|` (which catch pairs of opposite winding
/// sharing a plaquette). Each seed is refined by damped Newton iteration.
/// Winding seeds that fail to converge are reported as unresolved.
pub fn find_dirac_points_with(cfg: &LatticeConfig, grid: usize) -> Result<DiracSearch> {
    cfg.validate()?;
    if grid < 8 {
        return Err(SlError::InvalidParameter(format!("Dirac scan grid {grid} is below 8")));
    }
    let model = EffectiveModel::new(cfg);
    let zone = model.zone().clone();
    let frac = |i: usize, j: usize| {
        (
            (i as f64 + GRID_OFFSET.0) / grid as f64,
            (j as f64 + GRID_OFFSET.1) / grid as f64,
        )
    };
    let mut field = vec![(0.0, 0.0); grid * grid];
    for i in 0..grid {
        for j in 0..grid {
            let (s1, s2) = frac(i, j);
            let h = model.h_periodic_frac(s1, s2);
            field[i * grid + j] = (h.x, h.y);
        }
    }
    let at = |i: usize, j: usize| field[(i % grid) * grid + (j % grid)];
    let magnitude = |v: (f64, f64)| v.0.hypot(v.1);
    let max_mag = field.iter().map(|v| magnitude(*v)).fold(0.0, f64::max);

    let mut winding_seeds = Vec::new();
    let mut probe_seeds = Vec::new();
    for i in 0..grid {
        for j in 0..grid {
            let corners = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let mut turn = 0.0;
            for k in 0..4 {
                let a = corners[k].1.atan2(corners[k].0);
                let b = corners[(k + 1) % 4].1.atan2(corners[(k + 1) % 4].0);
                turn += wrap_angle(b - a);
            }
            let (s1, s2) = frac(i, j);
            let centre = zone.from_fractional(s1 + 0.5 / grid as f64, s2 + 0.5 / grid as f64);
            if (turn / TAU).round() != 0.0 {
                winding_seeds.push(centre);
            }

            let here = magnitude(at(i, j));
            let mut is_min = here < 0.05 * max_mag;
            for di in [grid - 1, 0, 1] {
                for dj in [grid - 1, 0, 1] {
                    if (di, dj) != (0, 0) && magnitude(at(i + di, j + dj)) < here {
                        is_min = false;
                    }
                }
            }
            if is_min {
                probe_seeds.push(zone.from_fractional(s1, s2));
            }
        }
    }

    let tolerance = 1e-10 * cfg.omega;
    let gap_tol = GAP_TOLERANCE * cfg.omega;
    let mut search = DiracSearch::default();
    let seeds = winding_seeds
        .iter()
        .map(|s| (*s, true))
        .chain(probe_seeds.iter().map(|s| (*s, false)));
    for (seed, required) in seeds {
        match newton(&model, &zone, seed, tolerance) {
            Ok(root) => {
                let root = zone.reduce(root);
                if search
                    .points
                    .iter()
                    .any(|p| zone.min_image_distance(p.position, root) < MERGE_DISTANCE)
                {
                    continue;
                }
                let h = model.h_periodic(root);
                let chirality = match chirality_of(&model, root) {
                    Ok(c) => c,
                    Err(e) => {
                        search.unresolved.push(UnresolvedCandidate {
                            position: root,
                            residual: h.in_plane(),
                            reason: e.to_string(),
                        });
                        continue;
                    }
                };
                let gap = 2.0 * h.z.abs();
                search.points.push(DiracPoint {
                    position: root,
                    chirality,
                    hz_sign: if gap < gap_tol { 0 } else { h.z.signum() as i8 },
                    gap,
                    in_plane_residual: h.in_plane(),
                });
            }
            Err((last, residual)) if required => {
                let last = zone.reduce(last);
                if !search
                    .unresolved
                    .iter()
                    .any(|u| zone.min_image_distance(u.position, last) < MERGE_DISTANCE)
                {
                    search.unresolved.push(UnresolvedCandidate {
                        position: last,
                        residual,
                        reason: format!("Newton did not converge in {MAX_NEWTON_ITERATIONS} iterations"),
                    });
                }
            }
            Err(_) => {}
        }
    }
    // a later seed may have converged onto an unresolved candidate's root
    search.unresolved.retain(|u| {
        !search
            .points
            .iter()
            .any(|p| zone.min_image_distance(p.position, u.position) < 1e-3)
    });
    search
        .points
        .sort_by(|a, b| a.position.x.total_cmp(&b.position.x).then(a.position.y.total_cmp(&b.position.y)));
    Ok(search)
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

fn in_plane(model: &EffectiveModel, r: BlochPoint) -> Vector2<f64> {
    let h = model.h_periodic(r);
    Vector2::new(h.x, h.y)
}

fn jacobian(model: &EffectiveModel, r: BlochPoint, step: f64) -> Matrix2<f64> {
    let dx = BlochPoint::new(step, 0.0);
    let dy = BlochPoint::new(0.0, step);
    let cx = (in_plane(model, r + dx) - in_plane(model, r - dx)) / (2.0 * step);
    let cy = (in_plane(model, r + dy) - in_plane(model, r - dy)) / (2.0 * step);
    Matrix2::from_columns(&[cx, cy])
}

/// Damped Newton on `(h_x, h_y)` with pseudo-inverse steps clamped to a
/// tenth of the zone diameter. Returns the last iterate on failure.
fn newton(
    model: &EffectiveModel,
    zone: &BrillouinZone,
    seed: BlochPoint,
    tolerance: f64,
) -> std::result::Result<BlochPoint, (BlochPoint, f64)> {
    let clamp = 0.1 * zone.diameter();
    let mut r = seed;
    let mut f = in_plane(model, r);
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if f.norm() < tolerance {
            return Ok(r);
        }
        let j = jacobian(model, r, 1e-7);
        let pinv = match j.pseudo_inverse(1e-14 * j.norm()) {
            Ok(p) => p,
            Err(_) => break,
        };
        let mut step = -(pinv * f);
        if step.norm() > clamp {
            step *= clamp / step.norm();
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = r + BlochPoint::new(step.x, step.y) * lambda;
            let ft = in_plane(model, trial);
            if ft.norm() < f.norm() {
                r = trial;
                f = ft;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if f.norm() < tolerance {
        Ok(r)
    } else {
        Err((r, f.norm()))
    }
}

fn chirality_of(model: &EffectiveModel, p: BlochPoint) -> Result<i8> {
    let dets = CHIRALITY_STEPS.map(|h| jacobian(model, p, h).determinant());
    let degenerate = |reason: String| SlError::DegenerateCone { x: p.x, y: p.y, reason };
    if dets.iter().any(|d| d.abs() < MIN_JACOBIAN) {
        return Err(degenerate(format!("|det J| = {:.3e} below {MIN_JACOBIAN:e}", dets[0].abs())));
    }
    let spread = (dets[0] - dets[1]).abs() / dets[0].abs().max(dets[1].abs());
    if dets[0].signum() != dets[1].signum() || spread > 1e-3 {
        return Err(degenerate(format!(
            "finite-difference steps disagree ({:.6e} vs {:.6e})",
            dets[0], dets[1]
        )));
    }
    Ok(dets[0].signum() as i8)
}

/// `sgn(∂_x h × ∂_y h)_z` at an in-plane zero `p`.
pub fn chirality(cfg: &LatticeConfig, p: BlochPoint) -> Result<i8> {
    cfg.validate()?;
    chirality_of(&EffectiveModel::new(cfg), p)
}
