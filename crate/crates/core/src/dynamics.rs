//! Driven-dissipative steady state of the truncated momentum-space lattice.
//!
//! Unknowns are the amplitudes `c_{s,M}` of every site `s` in every Floquet
//! harmonic `M ∈ [−n_max, n_max]`. The probe drives the origin `b` site in
//! the `M = 0` harmonic with unit amplitude:
//!
//! `[(Δ_p − Mδ − ε_s) + iγ_s/2] c_{s,M} − Σ W c_{s′,M−n} = δ_{s,0} δ_{M,0}`.

use std::collections::{HashMap, VecDeque};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j_symmetric;
use crate::config::LatticeConfig;
use crate::error::{Result, SlError};
use crate::lattice::{BlochPoint, C64};

/// Global sign relating the superradiance contrast to the Chern number:
/// `sgn(η) = ETA_CHERN_SIGN · sgn(C)` with `k₊ = k_p + k₁ − k₂`, on
/// resonance (`Δ_p = 0`) at `v = 0`.
pub const ETA_CHERN_SIGN: i32 = 1;

const RESIDUAL_TOLERANCE: f64 = 1e-9;
const ETA_FLOOR: f64 = 1e-15;
const PASSIVITY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sublattice {
    A,
    B,
}

/// A timed-Dicke-state node. Its momentum relative to the probe is
/// `m(k₁−k₂) + n(k₁−k₃)`, minus `k₁` on the `a` sublattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub sublattice: Sublattice,
    pub m: i32,
    pub n: i32,
}

impl Site {
    pub const fn b(m: i32, n: i32) -> Self {
        Site { sublattice: Sublattice::B, m, n }
    }

    pub const fn a(m: i32, n: i32) -> Self {
        Site { sublattice: Sublattice::A, m, n }
    }

    /// Neighbours with the index of the coupling field on the edge.
    fn neighbours(&self) -> [(Site, usize); 3] {
        let (m, n) = (self.m, self.n);
        match self.sublattice {
            Sublattice::B => [(Site::a(m, n), 0), (Site::a(m + 1, n), 1), (Site::a(m, n + 1), 2)],
            Sublattice::A => [(Site::b(m, n), 0), (Site::b(m - 1, n), 1), (Site::b(m, n - 1), 2)],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub b: usize,
    pub a: usize,
    /// Index `j` of the coupling field `Ω e^{iθ_j(t)}` that drives `a → b`.
    pub field: usize,
}

#[derive(Clone, Debug)]
pub struct SiteGraph {
    pub sites: Vec<Site>,
    pub edges: Vec<Edge>,
    pub origin: usize,
    pub k_plus: usize,
    pub k_minus: usize,
    lookup: HashMap<Site, usize>,
    /// Per site: `(neighbour, field)` pairs.
    adjacency: Vec<Vec<(usize, usize)>>,
    b1: BlochPoint,
    b2: BlochPoint,
    k1: BlochPoint,
}

impl SiteGraph {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn index_of(&self, site: Site) -> Option<usize> {
        self.lookup.get(&site).copied()
    }

    /// Momentum of a site relative to the probe wavevector.
    pub fn momentum(&self, idx: usize) -> BlochPoint {
        let s = self.sites[idx];
        let base = self.b1 * s.m as f64 + self.b2 * s.n as f64;
        match s.sublattice {
            Sublattice::B => base,
            Sublattice::A => base - self.k1,
        }
    }
}

/// Truncated honeycomb within `2·n_shells` hops of the probed `b` site.
pub fn build_site_graph(cfg: &LatticeConfig) -> SiteGraph {
    let radius = 2 * cfg.n_shells;
    let origin = Site::b(0, 0);
    let mut sites = vec![origin];
    let mut lookup = HashMap::from([(origin, 0usize)]);
    let mut queue = VecDeque::from([(origin, 0usize)]);
    while let Some((site, dist)) = queue.pop_front() {
        if dist == radius {
            continue;
        }
        for (nb, _) in site.neighbours() {
            if !lookup.contains_key(&nb) {
                lookup.insert(nb, sites.len());
                sites.push(nb);
                queue.push_back((nb, dist + 1));
            }
        }
    }
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); sites.len()];
    for (i, s) in sites.iter().enumerate() {
        for (nb, field) in s.neighbours() {
            if let Some(&j) = lookup.get(&nb) {
                adjacency[i].push((j, field));
                if s.sublattice == Sublattice::B {
                    edges.push(Edge { b: i, a: j, field });
                }
            }
        }
    }
    let k = cfg.wavevectors();
    SiteGraph {
        k_plus: lookup[&Site::b(1, 0)],
        k_minus: lookup[&Site::b(0, 1)],
        origin: 0,
        sites,
        edges,
        lookup,
        adjacency,
        b1: k[0] - k[1],
        b2: k[0] - k[2],
        k1: k[0],
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteadyStateResult {
    /// `c_{s,M}` at index `s·(2n_max+1) + M + n_max`.
    pub amplitudes: Vec<C64>,
    pub n_max: usize,
    /// `None` when `|c₊|² + |c₋|²` is below `1e−15`.
    pub eta: Option<f64>,
    pub absorption: f64,
    pub residual: f64,
    pub c_plus: C64,
    pub c_minus: C64,
    pub c_origin: C64,
}

impl SteadyStateResult {
    pub fn amplitude(&self, site: usize, harmonic: i32) -> C64 {
        self.amplitudes[site * (2 * self.n_max + 1) + (harmonic + self.n_max as i32) as usize]
    }
}

/// Sparse steady-state solver. The sparsity pattern and its symbolic LU
/// factorization depend only on the graph and truncation, so one solver
/// serves any phases, depth, detuning and velocity with the same shape.
pub struct SteadyStateSolver {
    graph: SiteGraph,
    n_max: usize,
    n_shells: usize,
    pattern: Vec<(usize, usize)>,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    lu: SymbolicLu<usize>,
}

impl SteadyStateSolver {
    pub fn new(cfg: &LatticeConfig) -> Result<Self> {
        cfg.validate()?;
        // determinism: parallelism belongs to the callers, not the factorization
        faer::set_global_parallelism(faer::Par::Seq);
        let graph = build_site_graph(cfg);
        let n_max = cfg.n_max();
        let pattern = matrix_pattern(&graph, n_max);
        let dim = graph.len() * (2 * n_max + 1);
        let pairs: Vec<Pair<usize, usize>> = pattern.iter().map(|&(row, col)| Pair { row, col }).collect();
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(dim, dim, &pairs)
            .map_err(|e| SlError::Solver(format!("sparsity pattern: {e:?}")))?;
        let lu = SymbolicLu::try_new(symbolic.as_ref())
            .map_err(|e| SlError::Solver(format!("symbolic factorization: {e:?}")))?;
        Ok(SteadyStateSolver {
            graph,
            n_max,
            n_shells: cfg.n_shells,
            pattern,
            symbolic,
            argsort,
            lu,
        })
    }

    pub fn graph(&self) -> &SiteGraph {
        &self.graph
    }

    pub fn dimension(&self) -> usize {
        self.graph.len() * (2 * self.n_max + 1)
    }

    fn check_shape(&self, cfg: &LatticeConfig) -> Result<()> {
        cfg.validate()?;
        if cfg.n_max() != self.n_max || cfg.n_shells != self.n_shells {
            return Err(SlError::Configuration(format!(
                "solver built for n_max = {}, n_shells = {}; got n_max = {}, n_shells = {}",
                self.n_max,
                self.n_shells,
                cfg.n_max(),
                cfg.n_shells
            )));
        }
        let k = cfg.wavevectors();
        if (k[0] - k[1] - self.graph.b1).norm() > 0.0 || (k[0] - k[2] - self.graph.b2).norm() > 0.0 {
            return Err(SlError::Configuration("solver built for a different geometry".into()));
        }
        if cfg.gamma_b <= 0.0 && cfg.gamma_a <= 0.0 {
            return Err(SlError::Configuration(
                "steady state needs gamma_b > 0 or gamma_a > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn solve(&self, cfg: &LatticeConfig, delta_p: f64, v: f64) -> Result<SteadyStateResult> {
        self.solve_with_drive(cfg, delta_p, v, C64::new(1.0, 0.0))
    }

    /// Steady state for drive amplitude `drive` at the origin.
    pub fn solve_with_drive(
        &self,
        cfg: &LatticeConfig,
        delta_p: f64,
        v: f64,
        drive: C64,
    ) -> Result<SteadyStateResult> {
        self.check_shape(cfg)?;
        if !delta_p.is_finite() || !v.is_finite() {
            return Err(SlError::InvalidParameter("probe detuning and velocity must be finite".into()));
        }
        let values = matrix_values(&self.graph, cfg, self.n_max, delta_p, v);
        let mat = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, &values)
            .map_err(|e| SlError::Solver(format!("matrix assembly: {e:?}")))?;
        let lu = Lu::try_new_with_symbolic(self.lu.clone(), mat.as_ref())
            .map_err(|e| SlError::Solver(format!("numeric factorization: {e:?}")))?;
        let nh = 2 * self.n_max + 1;
        let dim = self.dimension();
        let drive_idx = self.graph.origin * nh + self.n_max;
        let rhs = faer::Col::<C64>::from_fn(dim, |i| if i == drive_idx { drive } else { C64::new(0.0, 0.0) });
        let x = lu.solve(&rhs);
        let amplitudes: Vec<C64> = (0..dim).map(|i| x[i]).collect();

        let mut ax = vec![C64::new(0.0, 0.0); dim];
        for (&(row, col), val) in self.pattern.iter().zip(&values) {
            ax[row] += val * amplitudes[col];
        }
        ax[drive_idx] -= drive;
        let residual = ax.iter().map(|r| r.norm_sqr()).sum::<f64>().sqrt();
        if !residual.is_finite() || residual > RESIDUAL_TOLERANCE * drive.norm().max(f64::MIN_POSITIVE) {
            return Err(SlError::Solver(format!("linear-solve residual {residual:.3e} above tolerance")));
        }

        let at0 = |site: usize| amplitudes[site * nh + self.n_max];
        let (c_plus, c_minus, c_origin) = (at0(self.graph.k_plus), at0(self.graph.k_minus), at0(self.graph.origin));
        let (ip, im) = (c_plus.norm_sqr(), c_minus.norm_sqr());
        let eta = if ip + im < ETA_FLOOR { None } else { Some((ip - im) / (ip + im)) };
        Ok(SteadyStateResult {
            amplitudes,
            n_max: self.n_max,
            eta,
            absorption: -c_origin.im * cfg.gamma_b,
            residual,
            c_plus,
            c_minus,
            c_origin,
        })
    }
}

/// Row/column of every stored entry, diagonal first in each row.
fn matrix_pattern(graph: &SiteGraph, n_max: usize) -> Vec<(usize, usize)> {
    let nh = 2 * n_max + 1;
    let nm = n_max as i64;
    let mut pattern = Vec::new();
    for s in 0..graph.len() {
        for mi in 0..nh {
            let row = s * nh + mi;
            pattern.push((row, row));
            let m = mi as i64 - nm;
            for &(nb, _) in &graph.adjacency[s] {
                for n in -nm..=nm {
                    let mp = m - n;
                    if mp.abs() <= nm {
                        pattern.push((row, nb * nh + (mp + nm) as usize));
                    }
                }
            }
        }
    }
    pattern
}

/// Values in the order of [`matrix_pattern`].
fn matrix_values(graph: &SiteGraph, cfg: &LatticeConfig, n_max: usize, delta_p: f64, v: f64) -> Vec<C64> {
    let nh = 2 * n_max + 1;
    let nm = n_max as i64;
    let bessel = bessel_j_symmetric(n_max, cfg.f);
    // weight[j][n + n_max] for b ← a; a ← b uses J_{−n}
    let to_b: Vec<Vec<C64>> = (0..3)
        .map(|j| {
            (-nm..=nm)
                .map(|n| C64::from_polar(cfg.omega * bessel[(n + nm) as usize], n as f64 * cfg.phi[j]))
                .collect()
        })
        .collect();
    let to_a: Vec<Vec<C64>> = (0..3)
        .map(|j| {
            (-nm..=nm)
                .map(|n| C64::from_polar(cfg.omega * bessel[(nm - n) as usize], n as f64 * cfg.phi[j]))
                .collect()
        })
        .collect();
    let mut values = Vec::new();
    for s in 0..graph.len() {
        let site = graph.sites[s];
        let eps = v * graph.momentum(s).x;
        let (gamma, weights) = match site.sublattice {
            Sublattice::B => (cfg.gamma_b, &to_b),
            Sublattice::A => (cfg.gamma_a, &to_a),
        };
        for mi in 0..nh {
            let m = mi as i64 - nm;
            values.push(C64::new(delta_p - m as f64 * cfg.delta - eps, gamma / 2.0));
            for &(_, field) in &graph.adjacency[s] {
                for n in -nm..=nm {
                    if (m - n).abs() <= nm {
                        values.push(-weights[field][(n + nm) as usize]);
                    }
                }
            }
        }
    }
    values
}

pub fn steady_state(cfg: &LatticeConfig, delta_p: f64, v: f64) -> Result<SteadyStateResult> {
    SteadyStateSolver::new(cfg)?.solve(cfg, delta_p, v)
}

/// `η = (|c₊|² − |c₋|²)/(|c₊|² + |c₋|²)`; `None` when both channels are dark.
pub fn superradiance_contrast(cfg: &LatticeConfig, delta_p: f64, v: f64) -> Result<Option<f64>> {
    Ok(steady_state(cfg, delta_p, v)?.eta)
}

/// Probe absorption `−γ_b Im c_origin` at each detuning.
pub fn absorption_spectrum(cfg: &LatticeConfig, delta_grid: &[f64], v: f64) -> Result<Vec<f64>> {
    let solver = SteadyStateSolver::new(cfg)?;
    absorption_with(&solver, cfg, delta_grid, v)
}

pub(crate) fn absorption_with(
    solver: &SteadyStateSolver,
    cfg: &LatticeConfig,
    delta_grid: &[f64],
    v: f64,
) -> Result<Vec<f64>> {
    delta_grid
        .par_iter()
        .map(|&dp| {
            let a = solver.solve(cfg, dp, v)?.absorption;
            if a < -PASSIVITY_SLACK {
                return Err(SlError::Passivity { value: a, delta_p: dp });
            }
            Ok(a)
        })
        .collect()
}

/// Gauss–Hermite nodes and weights for `∫ e^{−x²} g(x) dx` (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut jacobi = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Contrast of emission intensities averaged over a Gaussian velocity
/// distribution `∝ exp(−v²/(2σ²))` with `nodes` quadrature points.
pub fn doppler_averaged_contrast(cfg: &LatticeConfig, delta_p: f64, sigma_v: f64, nodes: usize) -> Result<Option<f64>> {
    if !(sigma_v >= 0.0) || nodes == 0 {
        return Err(SlError::InvalidParameter("Doppler width must be >= 0 and nodes >= 1".into()));
    }
    let solver = SteadyStateSolver::new(cfg)?;
    let rule = gauss_hermite(nodes);
    let parts: Vec<(f64, f64)> = rule
        .par_iter()
        .map(|&(x, w)| {
            let r = solver.solve(cfg, delta_p, std::f64::consts::SQRT_2 * sigma_v * x)?;
            Ok((w * r.c_plus.norm_sqr(), w * r.c_minus.norm_sqr()))
        })
        .collect::<Result<_>>()?;
    let (ip, im) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Ok(if ip + im < ETA_FLOOR { None } else { Some((ip - im) / (ip + im)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference_phases;
    use std::f64::consts::PI;

    fn cfg(omega: f64, f: f64, phi: [f64; 3], shells: usize) -> LatticeConfig {
        LatticeConfig::new(omega, f, 80.0, phi).unwrap().with_n_shells(shells)
    }

    #[test]
    fn one_shell_graph() {
        let g = build_site_graph(&cfg(10.0, 0.0, reference_phases(), 1));
        assert_eq!(g.len(), 1 + 3 + 6);
        assert_eq!(g.sites[g.k_plus], Site::b(1, 0));
        assert_eq!(g.sites[g.k_minus], Site::b(0, 1));
        let k = cfg(10.0, 0.0, reference_phases(), 1).wavevectors();
        assert!((g.momentum(g.k_plus) - (k[0] - k[1])).norm() < 1e-15);
        assert!((g.momentum(g.k_minus) - (k[0] - k[2])).norm() < 1e-15);
    }

    #[test]
    fn graph_is_bipartite_and_quadratic() {
        let sizes: Vec<usize> = (1..=6)
            .map(|s| {
                let g = build_site_graph(&cfg(10.0, 0.0, reference_phases(), s));
                for e in &g.edges {
                    assert_eq!(g.sites[e.b].sublattice, Sublattice::B);
                    assert_eq!(g.sites[e.a].sublattice, Sublattice::A);
                    let dk = g.momentum(e.b) - g.momentum(e.a);
                    assert!((dk - g_wave(&g, e.field)).norm() < 1e-12);
                }
                g.len()
            })
            .collect();
        // second differences constant for a quadratic
        let d2: Vec<i64> = sizes.windows(3).map(|w| w[2] as i64 - 2 * w[1] as i64 + w[0] as i64).collect();
        assert!(d2.iter().all(|&d| d == d2[0] && d > 0), "{sizes:?}");
        assert_eq!(build_site_graph(&cfg(10.0, 0.0, reference_phases(), 12)).len(), 901);
    }

    fn g_wave(g: &SiteGraph, field: usize) -> BlochPoint {
        let k1 = g.k1;
        match field {
            0 => k1,
            1 => k1 - g.b1,
            _ => k1 - g.b2,
        }
    }

    #[test]
    fn isolated_site() {
        let mut c = cfg(10.0, 1.0, reference_phases(), 2);
        c.omega = 1e-300;
        let r = steady_state(&c, 3.0, 0.0).unwrap();
        let want = C64::new(1.0, 0.0) / C64::new(3.0, c.gamma_b / 2.0);
        assert!((r.c_origin - want).norm() < 1e-12);
        assert!(r.eta.is_none());
    }

    #[test]
    fn mirror_symmetric_phases_have_no_contrast() {
        let c = cfg(10.0, 1.0, [0.0, 2.0, 2.0], 6);
        let eta = superradiance_contrast(&c, 0.0, 0.0).unwrap().unwrap();
        assert!(eta.abs() < 1e-9, "{eta}");
    }

    #[test]
    fn contrast_antisymmetric_under_phase_swap() {
        let a = superradiance_contrast(&cfg(10.0, 1.0, reference_phases(), 6), 0.0, 0.0).unwrap().unwrap();
        let b = superradiance_contrast(&cfg(10.0, 1.0, [0.0, 4.0 * PI / 3.0, 2.0 * PI / 3.0], 6), 0.0, 0.0)
            .unwrap()
            .unwrap();
        assert!((a + b).abs() < 1e-9, "{a} {b}");
        assert!(a.abs() > 1e-6 && a.abs() <= 1.0);
        assert_eq!(a.signum() as i32, ETA_CHERN_SIGN);
    }

    #[test]
    fn linear_in_drive() {
        let c = cfg(25.0, 3.2, [0.0, 1.9, 4.4], 4);
        let solver = SteadyStateSolver::new(&c).unwrap();
        let base = solver.solve(&c, 5.0, 0.0).unwrap();
        let lambda = C64::new(-0.3, 2.2);
        let scaled = solver.solve_with_drive(&c, 5.0, 0.0, lambda).unwrap();
        for (x, y) in base.amplitudes.iter().zip(&scaled.amplitudes) {
            assert!((x * lambda - y).norm() < 1e-10 * (1.0 + y.norm()));
        }
        assert!((base.eta.unwrap() - scaled.eta.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn static_lattice_keeps_harmonics_dark() {
        let c = cfg(10.0, 0.0, reference_phases(), 4);
        let r = steady_state(&c, 7.0, 0.0).unwrap();
        for s in 0..build_site_graph(&c).len() {
            for m in -(r.n_max as i32)..=(r.n_max as i32) {
                if m != 0 {
                    assert!(r.amplitude(s, m).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn no_decay_is_a_configuration_error() {
        let c = cfg(10.0, 1.0, reference_phases(), 2).with_decay(0.0, 0.0);
        assert!(matches!(steady_state(&c, 0.0, 0.0), Err(SlError::Configuration(_))));
    }

    #[test]
    fn far_detuned_absorption_vanishes() {
        let c = cfg(10.0, 1.0, reference_phases(), 3);
        let far = 3.0 * c.omega + c.n_max() as f64 * c.delta + 1e5;
        let a = absorption_spectrum(&c, &[far, -far, 0.0], 0.0).unwrap();
        assert!(a[0] < 1e-8 && a[1] < 1e-8);
        assert!(a[2] > 0.0);
    }

    #[test]
    fn gauss_hermite_moments() {
        let rule = gauss_hermite(12);
        let m0: f64 = rule.iter().map(|(_, w)| w).sum();
        let m2: f64 = rule.iter().map(|(x, w)| w * x * x).sum();
        assert!((m0 - PI.sqrt()).abs() < 1e-12);
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_width_doppler_matches_single_velocity() {
        let c = cfg(10.0, 1.0, reference_phases(), 4);
        let a = doppler_averaged_contrast(&c, 0.0, 0.0, 3).unwrap().unwrap();
        let b = superradiance_contrast(&c, 0.0, 0.0).unwrap().unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
