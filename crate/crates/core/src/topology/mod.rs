//! Dirac points, sublattice polarization and Chern numbers.

mod bands;
mod chern;
mod dirac;

pub use bands::{band_polarization, min_bandgap, BandSample, GapMinimum, MIN_GAP_GRID};
pub use chern::{
    bessel_sum, chern_bessel, chern_bessel_default, chern_dp_counting, chern_fhs, chern_fhs_with, chern_small_f,
    fhs_chern_from_states, BandSource, ChernMethod, ChernResult, DEFAULT_FHS_GRID, MIN_FHS_GRID,
};
pub use dirac::{
    chirality, find_dirac_points, find_dirac_points_with, DiracPoint, DiracSearch, UnresolvedCandidate,
    DEFAULT_DIRAC_GRID,
};

/// Gap below which a Dirac point counts as closed, relative to `Ω`.
pub const GAP_TOLERANCE: f64 = 1e-3;
