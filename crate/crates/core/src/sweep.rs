//! Parameter-grid engines for phase diagrams and spectrum maps.
//!
//! Cells are evaluated independently on the rayon pool; failures are
//! recorded in the cell and never abort the sweep. Output ordering is
//! row-major in `(axis1, axis2)` and does not depend on the worker count.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigFile, LatticeConfig};
use crate::dynamics::{absorption_with, SteadyStateSolver};
use crate::error::{Result, SlError};
use crate::topology::{chern_bessel_default, chern_fhs, min_bandgap, GAP_TOLERANCE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    ChernFhs,
    ChernAnalyticSign,
    MinGap,
    Eta,
}

impl Observable {
    pub const ALL: [Observable; 4] = [
        Observable::ChernFhs,
        Observable::ChernAnalyticSign,
        Observable::MinGap,
        Observable::Eta,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Observable::ChernFhs => "chern_fhs",
            Observable::ChernAnalyticSign => "chern_analytic_sign",
            Observable::MinGap => "min_gap",
            Observable::Eta => "eta",
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = SlError;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s.trim())
            .ok_or_else(|| {
                SlError::InvalidParameter(format!(
                    "unknown observable `{s}` (expected chern_fhs, chern_analytic_sign, min_gap, eta)"
                ))
            })
    }
}

/// Parse a comma-separated observable list.
pub fn parse_observables(list: &str) -> Result<BTreeSet<Observable>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    pub observables: BTreeSet<Observable>,
    /// Plaquette grid for `chern_fhs`.
    pub fhs_grid: usize,
    /// `chern_fhs` is evaluated on cells whose indices are both multiples of this.
    pub fhs_stride: usize,
    /// Scan grid for `min_gap`.
    pub gap_grid: usize,
    pub delta_p_mhz: f64,
    pub velocity: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            observables: Observable::ALL.into_iter().collect(),
            fhs_grid: crate::topology::DEFAULT_FHS_GRID,
            fhs_stride: 2,
            gap_grid: crate::topology::MIN_GAP_GRID,
            delta_p_mhz: 0.0,
            velocity: 0.0,
        }
    }
}

impl SweepOptions {
    pub fn with_observables(observables: impl IntoIterator<Item = Observable>) -> Self {
        SweepOptions {
            observables: observables.into_iter().collect(),
            fhs_stride: 1,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.fhs_stride == 0 {
            return Err(SlError::InvalidParameter("fhs_stride must be >= 1".into()));
        }
        if !self.delta_p_mhz.is_finite() || !self.velocity.is_finite() {
            return Err(SlError::InvalidParameter("probe detuning and velocity must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub chern_fhs: Option<i32>,
    pub chern_analytic_sign: i8,
    pub min_gap: Option<f64>,
    pub eta: Option<f64>,
    pub reliable: bool,
    pub note: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Phase,
    Modulation,
    SpectrumVsF,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridMeta {
    pub kind: SweepKind,
    /// Base configuration; per-cell values come from the axes.
    pub config: ConfigFile,
    pub options: SweepOptions,
    pub code_version: String,
    pub timestamp: String,
}

impl GridMeta {
    fn new(kind: SweepKind, cfg: &LatticeConfig, options: &SweepOptions) -> Self {
        GridMeta {
            kind,
            config: cfg.to_file_format(),
            options: options.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramGrid {
    pub axis1: Axis,
    pub axis2: Axis,
    /// `cells[i][j]` belongs to `(axis1.values[i], axis2.values[j])`.
    pub cells: Vec<Vec<Cell>>,
    pub meta: GridMeta,
}

pub const AXIS_PHI2: &str = "phi2_rad";
pub const AXIS_PHI3: &str = "phi3_rad";
pub const AXIS_OMEGA: &str = "omega_mhz";
pub const AXIS_F: &str = "f";
pub const AXIS_DELTA_P: &str = "delta_p_mhz";

pub const CSV_HEADER: [&str; 7] = [
    "axis1_value",
    "axis2_value",
    "chern_fhs",
    "chern_analytic_sign",
    "min_gap_mhz",
    "eta",
    "reliable",
];

/// Uniform phase grid `2π k / n`, `k = 0..n`.
pub fn phase_axis(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// Solvers keyed by harmonic truncation, one cache per worker.
type SolverCache = HashMap<usize, SteadyStateSolver>;

fn cell_config(meta_cfg: &LatticeConfig, kind: SweepKind, x1: f64, x2: f64) -> LatticeConfig {
    match kind {
        SweepKind::Phase => meta_cfg.clone().with_phi([meta_cfg.phi[0], x1, x2]),
        SweepKind::Modulation | SweepKind::SpectrumVsF => meta_cfg.clone().with_omega(x1).with_f(x2),
    }
}

fn evaluate_cell(
    cfg: &LatticeConfig,
    options: &SweepOptions,
    with_fhs: bool,
    cache: &mut SolverCache,
) -> Cell {
    let mut cell = Cell {
        reliable: true,
        ..Default::default()
    };
    let mut notes: Vec<String> = Vec::new();
    let mut fail = |cell: &mut Cell, what: &str, e: &dyn fmt::Display| {
        cell.reliable = false;
        notes.push(format!("{what}: {e}"));
    };
    if let Err(e) = cfg.validate() {
        fail(&mut cell, "config", &e);
        cell.note = Some(notes.join("; "));
        return cell;
    }
    let obs = &options.observables;

    if obs.contains(&Observable::ChernAnalyticSign) {
        match chern_bessel_default(cfg.phi, cfg.f) {
            Ok(s) => cell.chern_analytic_sign = s,
            Err(e) => fail(&mut cell, "chern_analytic_sign", &e),
        }
    }
    if obs.contains(&Observable::MinGap) {
        match min_bandgap(cfg, options.gap_grid) {
            Ok(g) => {
                cell.min_gap = Some(g.gap);
                if g.gap < GAP_TOLERANCE * cfg.omega {
                    fail(&mut cell, "min_gap", &"gap below tolerance");
                }
            }
            Err(e) => fail(&mut cell, "min_gap", &e),
        }
    }
    if obs.contains(&Observable::ChernFhs) && with_fhs {
        match chern_fhs(cfg, options.fhs_grid) {
            Ok(r) => {
                cell.chern_fhs = Some(r.value);
                if !r.reliable {
                    fail(&mut cell, "chern_fhs", &r.note.unwrap_or_default());
                }
            }
            Err(e) => fail(&mut cell, "chern_fhs", &e),
        }
    }
    if obs.contains(&Observable::Eta) {
        let key = cfg.n_max();
        let solver = match cache.get(&key) {
            Some(s) => Ok(s),
            None => SteadyStateSolver::new(cfg).map(|s| &*cache.entry(key).or_insert(s)),
        };
        match solver.and_then(|s| s.solve(cfg, options.delta_p_mhz, options.velocity)) {
            Ok(r) => {
                cell.eta = r.eta;
                if r.eta.is_none() {
                    fail(&mut cell, "eta", &"both emission channels dark");
                }
            }
            Err(e) => fail(&mut cell, "eta", &e),
        }
    }
    if !notes.is_empty() {
        cell.note = Some(notes.join("; "));
    }
    cell
}

fn run_grid(
    kind: SweepKind,
    cfg: &LatticeConfig,
    axis1: Axis,
    axis2: Axis,
    options: &SweepOptions,
) -> Result<PhaseDiagramGrid> {
    cfg.validate()?;
    options.validate()?;
    let (n1, n2) = (axis1.values.len(), axis2.values.len());
    let flat: Vec<Cell> = (0..n1 * n2)
        .into_par_iter()
        .map_init(SolverCache::new, |cache, idx| {
            let (i, j) = (idx / n2, idx % n2);
            let c = cell_config(cfg, kind, axis1.values[i], axis2.values[j]);
            let with_fhs = i % options.fhs_stride == 0 && j % options.fhs_stride == 0;
            evaluate_cell(&c, options, with_fhs, cache)
        })
        .collect();
    let mut rows = flat.into_iter();
    let cells = (0..n1).map(|_| rows.by_ref().take(n2).collect()).collect();
    Ok(PhaseDiagramGrid {
        axis1,
        axis2,
        cells,
        meta: GridMeta::new(kind, cfg, options),
    })
}

/// Observables on the uniform `(φ₂, φ₃) ∈ [0, 2π)²` grid at fixed `φ₁`.
pub fn sweep_phase(cfg: &LatticeConfig, grid_n: usize, options: &SweepOptions) -> Result<PhaseDiagramGrid> {
    if grid_n < 4 {
        return Err(SlError::InvalidParameter(format!("grid_n = {grid_n} is below 4")));
    }
    let axis = phase_axis(grid_n);
    run_grid(
        SweepKind::Phase,
        cfg,
        Axis { name: AXIS_PHI2.into(), values: axis.clone() },
        Axis { name: AXIS_PHI3.into(), values: axis },
        options,
    )
}

/// Observables on an `(Ω, f)` grid at fixed phases.
pub fn sweep_modulation(
    cfg: &LatticeConfig,
    phi: [f64; 3],
    omega_values: &[f64],
    f_values: &[f64],
    options: &SweepOptions,
) -> Result<PhaseDiagramGrid> {
    if omega_values.is_empty() || f_values.is_empty() {
        return Err(SlError::InvalidParameter("empty Ω or f axis".into()));
    }
    if omega_values.iter().any(|o| !(o.is_finite() && *o > 0.0)) || f_values.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(SlError::InvalidParameter("Ω values must be finite and positive, f finite and >= 0".into()));
    }
    run_grid(
        SweepKind::Modulation,
        &cfg.clone().with_phi(phi),
        Axis { name: AXIS_OMEGA.into(), values: omega_values.to_vec() },
        Axis { name: AXIS_F.into(), values: f_values.to_vec() },
        options,
    )
}

/// Re-evaluate one stored cell from the grid metadata alone.
pub fn rerun_cell(grid: &PhaseDiagramGrid, i: usize, j: usize) -> Result<Cell> {
    let (Some(&x1), Some(&x2)) = (grid.axis1.values.get(i), grid.axis2.values.get(j)) else {
        return Err(SlError::InvalidParameter(format!("cell ({i}, {j}) outside the grid")));
    };
    if grid.meta.kind == SweepKind::SpectrumVsF {
        return Err(SlError::InvalidParameter("spectrum maps have no cells".into()));
    }
    let base = grid.meta.config.clone().into_config()?;
    let opts = &grid.meta.options;
    let c = cell_config(&base, grid.meta.kind, x1, x2);
    let with_fhs = i % opts.fhs_stride == 0 && j % opts.fhs_stride == 0;
    Ok(evaluate_cell(&c, opts, with_fhs, &mut SolverCache::new()))
}

impl PhaseDiagramGrid {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record(CSV_HEADER)?;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                w.write_record([
                    self.axis1.values[i].to_string(),
                    self.axis2.values[j].to_string(),
                    c.chern_fhs.map(|v| v.to_string()).unwrap_or_default(),
                    c.chern_analytic_sign.to_string(),
                    c.min_gap.map(|v| v.to_string()).unwrap_or_default(),
                    c.eta.map(|v| v.to_string()).unwrap_or_default(),
                    c.reliable.to_string(),
                ])?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumMap {
    /// Modulation depth `f`.
    pub axis1: Axis,
    /// Probe detuning (MHz).
    pub axis2: Axis,
    /// `absorption[i][j]`, null where the row failed.
    pub absorption: Vec<Vec<Option<f64>>>,
    pub notes: Vec<Option<String>>,
    pub meta: GridMeta,
}

impl SpectrumMap {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Absorption on an `f × Δ_p` grid at fixed `Ω` and phases.
pub fn spectrum_vs_f(
    cfg: &LatticeConfig,
    phi: [f64; 3],
    omega: f64,
    f_values: &[f64],
    delta_grid: &[f64],
    velocity: f64,
) -> Result<SpectrumMap> {
    let base = cfg.clone().with_phi(phi).with_omega(omega);
    base.validate()?;
    if f_values.iter().chain(delta_grid).any(|x| !x.is_finite()) {
        return Err(SlError::InvalidParameter("f and Δ_p values must be finite".into()));
    }
    let rows: Vec<(Vec<Option<f64>>, Option<String>)> = f_values
        .par_iter()
        .map(|&f| {
            let c = base.clone().with_f(f);
            let out = SteadyStateSolver::new(&c).and_then(|s| absorption_with(&s, &c, delta_grid, velocity));
            match out {
                Ok(v) => (v.into_iter().map(Some).collect(), None),
                Err(e) => (vec![None; delta_grid.len()], Some(e.to_string())),
            }
        })
        .collect();
    let (absorption, notes) = rows.into_iter().unzip();
    let options = SweepOptions {
        observables: BTreeSet::new(),
        velocity,
        ..Default::default()
    };
    Ok(SpectrumMap {
        axis1: Axis { name: AXIS_F.into(), values: f_values.to_vec() },
        axis2: Axis { name: AXIS_DELTA_P.into(), values: delta_grid.to_vec() },
        absorption,
        notes,
        meta: GridMeta::new(SweepKind::SpectrumVsF, &base, &options),
    })
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}
