//! Floquet-modulated honeycomb superradiance lattice.
//!
//! Band structure, Dirac points, Chern numbers and driven-dissipative
//! steady states of a momentum-space honeycomb lattice whose three coupling
//! fields are phase modulated as `θ_j(t) = f sin(δt + φ_j)`.
//!
//! Units: angular frequencies in MHz with `ħ = 1`; wavevectors scaled so
//! that `|k_j| = 1`.

pub mod bessel;
pub mod config;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod lattice;
pub mod schema;
pub mod sweep;
pub mod topology;

pub use bessel::bessel_j;
pub use config::{Geometry, LatticeConfig};
pub use effective::{effective_h_vector, effective_hoppings, EffectiveModel, HVector, HoppingSet};
pub use error::{Result, SlError};
pub use lattice::{build_floquet_matrix, coupling_field, fourier_block, quasienergy_bands, BlochPoint, FloquetMatrix};
