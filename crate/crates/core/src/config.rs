//! Physical and numerical parameters, plus the JSON config-file format.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlError};
use crate::lattice::BlochPoint;

pub const DEFAULT_DELTA_MHZ: f64 = 80.0;
pub const DEFAULT_GAMMA_B_MHZ: f64 = 6.0;
pub const DEFAULT_GAMMA_A_MHZ: f64 = 0.1;
pub const DEFAULT_N_SHELLS: usize = 12;

/// The three coupling wavevectors.
#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    /// Unit vectors at mutual 120°: `k1` along `-x`, `k2` below and `k3`
    /// above the `x` axis, so the mirror `y -> -y` exchanges `k2` and `k3`.
    Symmetric,
    Custom([BlochPoint; 3]),
}

impl Geometry {
    pub fn wavevectors(&self) -> [BlochPoint; 3] {
        match self {
            Geometry::Symmetric => {
                let s = 3f64.sqrt() / 2.0;
                [
                    BlochPoint::new(-1.0, 0.0),
                    BlochPoint::new(0.5, -s),
                    BlochPoint::new(0.5, s),
                ]
            }
            Geometry::Custom(k) => *k,
        }
    }
}

/// Every parameter of one simulation point.
///
/// Frequencies are angular frequencies in MHz with ħ = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeConfig {
    pub omega: f64,
    pub f: f64,
    pub delta: f64,
    pub phi: [f64; 3],
    pub geometry: Geometry,
    pub gamma_b: f64,
    pub gamma_a: f64,
    /// Floquet truncation order; `None` means `max(8, ceil(f) + 6)`.
    pub n_max: Option<usize>,
    pub n_shells: usize,
}

impl LatticeConfig {
    /// Symmetric geometry with default decay rates and truncations.
    pub fn new(omega: f64, f: f64, delta: f64, phi: [f64; 3]) -> Result<Self> {
        let cfg = LatticeConfig {
            omega,
            f,
            delta,
            phi: reduce_phases(phi),
            geometry: Geometry::Symmetric,
            gamma_b: DEFAULT_GAMMA_B_MHZ,
            gamma_a: DEFAULT_GAMMA_A_MHZ,
            n_max: None,
            n_shells: DEFAULT_N_SHELLS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_phi(mut self, phi: [f64; 3]) -> Self {
        self.phi = reduce_phases(phi);
        self
    }

    pub fn with_f(mut self, f: f64) -> Self {
        self.f = f;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = Some(n_max);
        self
    }

    pub fn with_n_shells(mut self, n_shells: usize) -> Self {
        self.n_shells = n_shells;
        self
    }

    pub fn with_decay(mut self, gamma_b: f64, gamma_a: f64) -> Self {
        self.gamma_b = gamma_b;
        self.gamma_a = gamma_a;
        self
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = geometry;
        self
    }

    pub fn default_n_max(f: f64) -> usize {
        8.max(f.ceil() as usize + 6)
    }

    /// Resolved Floquet truncation order.
    pub fn n_max(&self) -> usize {
        self.n_max.unwrap_or_else(|| Self::default_n_max(self.f))
    }

    pub fn wavevectors(&self) -> [BlochPoint; 3] {
        self.geometry.wavevectors()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SlError::InvalidParameter(msg));
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return bad(format!("omega must be > 0, got {}", self.omega));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return bad(format!("delta must be > 0, got {}", self.delta));
        }
        if !(self.f.is_finite() && self.f >= 0.0) {
            return bad(format!("f must be >= 0, got {}", self.f));
        }
        if self.f > crate::bessel::MAX_ARGUMENT {
            return bad(format!("f = {} exceeds the Bessel range", self.f));
        }
        for (name, g) in [("gamma_b", self.gamma_b), ("gamma_a", self.gamma_a)] {
            if !(g.is_finite() && g >= 0.0) {
                return bad(format!("{name} must be >= 0, got {g}"));
            }
        }
        for (j, p) in self.phi.iter().enumerate() {
            if !(p.is_finite() && (0.0..TAU).contains(p)) {
                return bad(format!("phi[{j}] = {p} not reduced to [0, 2π)"));
            }
        }
        let n_max = self.n_max();
        if n_max < 1 || 2 * n_max > crate::bessel::MAX_ORDER as usize {
            return bad(format!("n_max = {n_max} outside 1..=32"));
        }
        if self.n_shells < 1 {
            return bad("n_shells must be >= 1".into());
        }
        if let Geometry::Custom(k) = &self.geometry {
            if k.iter().any(|v| !(v.x.is_finite() && v.y.is_finite()) || v.norm() == 0.0) {
                return bad("custom wavevectors must be finite and non-zero".into());
            }
            let b1 = k[0] - k[1];
            let b2 = k[0] - k[2];
            if (b1.x * b2.y - b1.y * b2.x).abs() < 1e-9 {
                return bad("k1 - k2 and k1 - k3 must be linearly independent".into());
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ConfigFile::parse(&text)?.into_config()
    }

    pub fn to_file_format(&self) -> ConfigFile {
        ConfigFile::from(self)
    }
}

/// Reduce each phase into `[0, 2π)`.
pub fn reduce_phases(phi: [f64; 3]) -> [f64; 3] {
    phi.map(|p| {
        let r = p.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        if r >= TAU {
            0.0
        } else {
            r
        }
    })
}

/// The phase triple `(0, 2π/3, 4π/3)`.
pub fn reference_phases() -> [f64; 3] {
    [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometryFile {
    Named(GeometryName),
    Custom(CustomVectors),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryName {
    Symmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomVectors {
    pub k1: [f64; 2],
    pub k2: [f64; 2],
    pub k3: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NMaxFile {
    Auto(AutoTag),
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA_MHZ
}
fn default_gamma_b() -> f64 {
    DEFAULT_GAMMA_B_MHZ
}
fn default_gamma_a() -> f64 {
    DEFAULT_GAMMA_A_MHZ
}
fn default_n_shells() -> usize {
    DEFAULT_N_SHELLS
}
fn default_geometry() -> GeometryFile {
    GeometryFile::Named(GeometryName::Symmetric)
}
fn default_n_max() -> NMaxFile {
    NMaxFile::Auto(AutoTag::Auto)
}

/// On-disk JSON config. Unknown keys are rejected; `omega_mhz`, `f` and
/// `phi` are required, everything else has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub omega_mhz: f64,
    pub f: f64,
    #[serde(default = "default_delta")]
    pub delta_mhz: f64,
    pub phi: [f64; 3],
    #[serde(default = "default_geometry")]
    pub geometry: GeometryFile,
    #[serde(default = "default_gamma_b")]
    pub gamma_b_mhz: f64,
    #[serde(default = "default_gamma_a")]
    pub gamma_a_mhz: f64,
    #[serde(default = "default_n_max")]
    pub n_max: NMaxFile,
    #[serde(default = "default_n_shells")]
    pub n_shells: usize,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            SlError::ConfigParse {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })
    }

    pub fn into_config(self) -> Result<LatticeConfig> {
        let geometry = match self.geometry {
            GeometryFile::Named(GeometryName::Symmetric) => Geometry::Symmetric,
            GeometryFile::Custom(v) => Geometry::Custom([
                BlochPoint::new(v.k1[0], v.k1[1]),
                BlochPoint::new(v.k2[0], v.k2[1]),
                BlochPoint::new(v.k3[0], v.k3[1]),
            ]),
        };
        let cfg = LatticeConfig {
            omega: self.omega_mhz,
            f: self.f,
            delta: self.delta_mhz,
            phi: reduce_phases(self.phi),
            geometry,
            gamma_b: self.gamma_b_mhz,
            gamma_a: self.gamma_a_mhz,
            n_max: match self.n_max {
                NMaxFile::Auto(_) => None,
                NMaxFile::Fixed(n) => Some(n),
            },
            n_shells: self.n_shells,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<&LatticeConfig> for ConfigFile {
    fn from(cfg: &LatticeConfig) -> Self {
        ConfigFile {
            omega_mhz: cfg.omega,
            f: cfg.f,
            delta_mhz: cfg.delta,
            phi: cfg.phi,
            geometry: match &cfg.geometry {
                Geometry::Symmetric => GeometryFile::Named(GeometryName::Symmetric),
                Geometry::Custom(k) => GeometryFile::Custom(CustomVectors {
                    k1: [k[0].x, k[0].y],
                    k2: [k[1].x, k[1].y],
                    k3: [k[2].x, k[2].y],
                }),
            },
            gamma_b_mhz: cfg.gamma_b,
            gamma_a_mhz: cfg.gamma_a,
            n_max: match cfg.n_max {
                None => NMaxFile::Auto(AutoTag::Auto),
                Some(n) => NMaxFile::Fixed(n),
            },
            n_shells: cfg.n_shells,
        }
    }
}
