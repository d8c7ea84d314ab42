//! File formats written by the command-line tool and a strict checker that
//! reads them back.
//!
//! JSON documents:
//! - phase/modulation grid: keys `axis1`, `axis2`, `cells`, `meta`
//! - spectrum map: keys `axis1`, `axis2`, `absorption`, `notes`, `meta`
//! - Dirac list: keys `config`, `total_chirality`, `points`, `unresolved`
//!
//! CSV tables (fixed headers, empty field = missing value):
//! - bands: [`BANDS_HEADER`]
//! - spectrum: [`SPECTRUM_HEADER`]
//! - sweep cells: [`crate::sweep::CSV_HEADER`]

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::error::{Result, SlError};
use crate::sweep::{PhaseDiagramGrid, SpectrumMap, SweepKind, CSV_HEADER, AXIS_DELTA_P, AXIS_F, AXIS_OMEGA, AXIS_PHI2, AXIS_PHI3};
use crate::topology::{BandSample, DiracPoint, DiracSearch, UnresolvedCandidate};

pub const BANDS_HEADER: [&str; 7] = [
    "index",
    "kx",
    "ky",
    "energy_lower_mhz",
    "energy_upper_mhz",
    "sigma_z_lower",
    "sigma_z_upper",
];

pub const SPECTRUM_HEADER: [&str; 2] = ["delta_p_mhz", "absorption"];

const GRID_KEYS: [&str; 4] = ["axis1", "axis2", "cells", "meta"];
const SPECTRUM_MAP_KEYS: [&str; 5] = ["axis1", "axis2", "absorption", "notes", "meta"];
const DIRAC_KEYS: [&str; 4] = ["config", "total_chirality", "points", "unresolved"];

// absorption may dip below zero by solver roundoff only
const ABSORPTION_FLOOR: f64 = -1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracFile {
    pub config: ConfigFile,
    pub total_chirality: i32,
    pub points: Vec<DiracPoint>,
    pub unresolved: Vec<UnresolvedCandidate>,
}

impl DiracFile {
    pub fn new(config: ConfigFile, search: DiracSearch) -> Self {
        DiracFile {
            config,
            total_chirality: search.total_chirality(),
            points: search.points,
            unresolved: search.unresolved,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub axis1_value: f64,
    pub axis2_value: f64,
    pub chern_fhs: Option<i32>,
    pub chern_analytic_sign: i8,
    pub min_gap_mhz: Option<f64>,
    pub eta: Option<f64>,
    pub reliable: bool,
}

/// A successfully checked file.
#[derive(Clone, Debug, PartialEq)]
pub enum Document {
    Grid(PhaseDiagramGrid),
    SpectrumMap(SpectrumMap),
    Dirac(DiracFile),
    Bands(Vec<BandSample>),
    Spectrum(Vec<(f64, f64)>),
    SweepCsv(Vec<SweepRow>),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Grid(_) => "phase-grid",
            Document::SpectrumMap(_) => "spectrum-map",
            Document::Dirac(_) => "dirac",
            Document::Bands(_) => "bands-csv",
            Document::Spectrum(_) => "spectrum-csv",
            Document::SweepCsv(_) => "sweep-csv",
        }
    }
}

pub fn write_bands_csv<W: Write>(out: W, samples: &[BandSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BANDS_HEADER)?;
    for (i, s) in samples.iter().enumerate() {
        w.write_record([
            i.to_string(),
            s.position.x.to_string(),
            s.position.y.to_string(),
            s.energies[0].to_string(),
            s.energies[1].to_string(),
            s.polarization[0].to_string(),
            s.polarization[1].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum_csv<W: Write>(out: W, delta_p: &[f64], absorption: &[f64]) -> Result<()> {
    if delta_p.len() != absorption.len() {
        return Err(SlError::InvalidParameter("detuning and absorption lengths differ".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SPECTRUM_HEADER)?;
    for (d, a) in delta_p.iter().zip(absorption) {
        w.write_record([d.to_string(), a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a file and validate it against the format implied by its extension.
pub fn check_path(path: &Path) -> Result<Document> {
    let text = std::fs::read_to_string(path)?;
    let name = path.display().to_string();
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => check_json(&text, &name),
        Some("csv") => check_csv(&text, &name),
        other => Err(schema_err(&name, format!("unsupported extension {other:?}"))),
    }
}

fn schema_err(file: &str, detail: impl Into<String>) -> SlError {
    SlError::Schema {
        file: file.to_string(),
        detail: detail.into(),
    }
}

fn key_diff(file: &str, found: &BTreeSet<String>, expected: &[&str]) -> Result<()> {
    let expected: BTreeSet<String> = expected.iter().map(|s| s.to_string()).collect();
    let missing: Vec<_> = expected.difference(found).cloned().collect();
    let extra: Vec<_> = found.difference(&expected).cloned().collect();
    if missing.is_empty() && extra.is_empty() {
        return Ok(());
    }
    Err(schema_err(file, format!("missing keys {missing:?}, unexpected keys {extra:?}")))
}

fn strict<T: DeserializeOwned>(file: &str, value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value)
        .map_err(|e| schema_err(file, format!("at `{}`: {}", e.path(), e.inner())))
}

pub fn check_json(text: &str, file: &str) -> Result<Document> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| schema_err(file, format!("invalid JSON: {e}")))?;
    let Some(obj) = value.as_object() else {
        return Err(schema_err(file, "top level is not an object"));
    };
    let keys: BTreeSet<String> = obj.keys().cloned().collect();
    if keys.contains("cells") {
        key_diff(file, &keys, &GRID_KEYS)?;
        let g: PhaseDiagramGrid = strict(file, value)?;
        check_grid(file, &g)?;
        Ok(Document::Grid(g))
    } else if keys.contains("absorption") {
        key_diff(file, &keys, &SPECTRUM_MAP_KEYS)?;
        let m: SpectrumMap = strict(file, value)?;
        check_spectrum_map(file, &m)?;
        Ok(Document::SpectrumMap(m))
    } else if keys.contains("points") {
        key_diff(file, &keys, &DIRAC_KEYS)?;
        let d: DiracFile = strict(file, value)?;
        check_dirac(file, &d)?;
        Ok(Document::Dirac(d))
    } else {
        Err(schema_err(file, format!("unrecognised document with keys {keys:?}")))
    }
}

fn all_finite(file: &str, what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(schema_err(file, format!("{what}[{i}] is not finite"))),
        None => Ok(()),
    }
}

fn check_grid(file: &str, g: &PhaseDiagramGrid) -> Result<()> {
    let names = match g.meta.kind {
        SweepKind::Phase => (AXIS_PHI2, AXIS_PHI3),
        SweepKind::Modulation => (AXIS_OMEGA, AXIS_F),
        SweepKind::SpectrumVsF => return Err(schema_err(file, "grid document with spectrum meta")),
    };
    if (g.axis1.name.as_str(), g.axis2.name.as_str()) != names {
        return Err(schema_err(file, format!("axis names ({}, {}) do not match {:?}", g.axis1.name, g.axis2.name, names)));
    }
    all_finite(file, "axis1.values", &g.axis1.values)?;
    all_finite(file, "axis2.values", &g.axis2.values)?;
    if g.cells.len() != g.axis1.values.len() {
        return Err(schema_err(file, format!("{} rows for {} axis1 values", g.cells.len(), g.axis1.values.len())));
    }
    for (i, row) in g.cells.iter().enumerate() {
        if row.len() != g.axis2.values.len() {
            return Err(schema_err(file, format!("row {i} has {} cells for {} axis2 values", row.len(), g.axis2.values.len())));
        }
        for (j, c) in row.iter().enumerate() {
            let bad = |what: &str| schema_err(file, format!("cells[{i}][{j}].{what} out of range"));
            if !(-1..=1).contains(&c.chern_analytic_sign) {
                return Err(bad("chern_analytic_sign"));
            }
            if c.min_gap.is_some_and(|v| !(v.is_finite() && v >= 0.0)) {
                return Err(bad("min_gap"));
            }
            if c.eta.is_some_and(|v| !(v.is_finite() && v.abs() <= 1.0 + 1e-12)) {
                return Err(bad("eta"));
            }
        }
    }
    g.meta.config.clone().into_config().map_err(|e| schema_err(file, format!("meta.config: {e}")))?;
    Ok(())
}

fn check_spectrum_map(file: &str, m: &SpectrumMap) -> Result<()> {
    if m.meta.kind != SweepKind::SpectrumVsF || m.axis1.name != AXIS_F || m.axis2.name != AXIS_DELTA_P {
        return Err(schema_err(file, "spectrum map axes or kind mismatch"));
    }
    all_finite(file, "axis1.values", &m.axis1.values)?;
    all_finite(file, "axis2.values", &m.axis2.values)?;
    let rows = m.axis1.values.len();
    if m.absorption.len() != rows || m.notes.len() != rows {
        return Err(schema_err(file, format!("{} absorption rows and {} notes for {rows} f values", m.absorption.len(), m.notes.len())));
    }
    for (i, row) in m.absorption.iter().enumerate() {
        if row.len() != m.axis2.values.len() {
            return Err(schema_err(file, format!("absorption row {i} has {} entries", row.len())));
        }
        if let Some(j) = row.iter().position(|a| a.is_some_and(|a| !(a.is_finite() && a >= ABSORPTION_FLOOR))) {
            return Err(schema_err(file, format!("absorption[{i}][{j}] is negative or not finite")));
        }
    }
    m.meta.config.clone().into_config().map_err(|e| schema_err(file, format!("meta.config: {e}")))?;
    Ok(())
}

fn check_dirac(file: &str, d: &DiracFile) -> Result<()> {
    d.config.clone().into_config().map_err(|e| schema_err(file, format!("config: {e}")))?;
    for (i, p) in d.points.iter().enumerate() {
        if p.chirality.abs() != 1 || p.hz_sign.abs() > 1 {
            return Err(schema_err(file, format!("points[{i}] has chirality {} and hz_sign {}", p.chirality, p.hz_sign)));
        }
        all_finite(file, "points.position", &[p.position.x, p.position.y, p.gap, p.in_plane_residual])?;
    }
    let sum: i32 = d.points.iter().map(|p| p.chirality as i32).sum();
    if sum != d.total_chirality {
        return Err(schema_err(file, format!("total_chirality {} but points sum to {sum}", d.total_chirality)));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(file: &str, row: usize, col: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| schema_err(file, format!("row {row}, column {col}: cannot parse `{s}`")))
}

fn parse_optional<T: std::str::FromStr>(file: &str, row: usize, col: &str, s: &str) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(file, row, col, s).map(Some)
    }
}

pub fn check_csv(text: &str, file: &str) -> Result<Document> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    let matches = |h: &[&str]| header.iter().map(String::as_str).eq(h.iter().copied());

    if matches(&BANDS_HEADER) {
        let mut out = Vec::with_capacity(records.len());
        for (r, rec) in records.iter().enumerate() {
            let v: Vec<f64> = (1..7)
                .map(|c| parse_field(file, r, BANDS_HEADER[c], &rec[c]))
                .collect::<Result<_>>()?;
            let idx: usize = parse_field(file, r, "index", &rec[0])?;
            if idx != r {
                return Err(schema_err(file, format!("row {r} has index {idx}")));
            }
            all_finite(file, "row", &v)?;
            if v[2] > v[3] || v[4].abs() > 1.0 + 1e-9 || v[5].abs() > 1.0 + 1e-9 {
                return Err(schema_err(file, format!("row {r}: bands out of order or polarization outside [-1, 1]")));
            }
            out.push(BandSample {
                position: crate::lattice::BlochPoint::new(v[0], v[1]),
                energies: [v[2], v[3]],
                polarization: [v[4], v[5]],
            });
        }
        Ok(Document::Bands(out))
    } else if matches(&SPECTRUM_HEADER) {
        let mut out = Vec::with_capacity(records.len());
        for (r, rec) in records.iter().enumerate() {
            let d: f64 = parse_field(file, r, "delta_p_mhz", &rec[0])?;
            let a: f64 = parse_field(file, r, "absorption", &rec[1])?;
            if !(d.is_finite() && a.is_finite() && a >= ABSORPTION_FLOOR) {
                return Err(schema_err(file, format!("row {r}: non-finite or negative absorption")));
            }
            out.push((d, a));
        }
        Ok(Document::Spectrum(out))
    } else if matches(&CSV_HEADER) {
        let mut out = Vec::with_capacity(records.len());
        for (r, rec) in records.iter().enumerate() {
            let row = SweepRow {
                axis1_value: parse_field(file, r, CSV_HEADER[0], &rec[0])?,
                axis2_value: parse_field(file, r, CSV_HEADER[1], &rec[1])?,
                chern_fhs: parse_optional(file, r, CSV_HEADER[2], &rec[2])?,
                chern_analytic_sign: parse_field(file, r, CSV_HEADER[3], &rec[3])?,
                min_gap_mhz: parse_optional(file, r, CSV_HEADER[4], &rec[4])?,
                eta: parse_optional(file, r, CSV_HEADER[5], &rec[5])?,
                reliable: parse_field(file, r, CSV_HEADER[6], &rec[6])?,
            };
            if !(-1..=1).contains(&row.chern_analytic_sign) {
                return Err(schema_err(file, format!("row {r}: chern_analytic_sign out of range")));
            }
            out.push(row);
        }
        Ok(Document::SweepCsv(out))
    } else {
        Err(schema_err(file, format!("unrecognised CSV header {header:?}")))
    }
}
