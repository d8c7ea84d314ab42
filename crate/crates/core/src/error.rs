use thiserror::Error;

pub type Result<T> = std::result::Result<T, SlError>;

#[derive(Debug, Error)]
pub enum SlError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("harmonic order {order} exceeds the truncation n_max = {n_max}")]
    Truncation { order: i32, n_max: usize },

    #[error("grid of {grid} points per axis cannot resolve the requested harmonics (need at least {required})")]
    Resolution { grid: usize, required: usize },

    #[error("plaquette sum is {residual:.2e} away from an integer; refine the grid")]
    GridTooCoarse { residual: f64 },

    #[error("degenerate Dirac cone at ({x:.6}, {y:.6}): {reason}")]
    DegenerateCone { x: f64, y: f64, reason: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("negative absorption {value:.3e} at probe detuning {delta_p} MHz; check the solver sign convention")]
    Passivity { value: f64, delta_p: f64 },

    #[error("config parse error at `{path}` (line {line}, column {column}): {message}")]
    ConfigParse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema mismatch in {file}: {detail}")]
    Schema { file: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SlError {
    /// True for errors caused by user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            SlError::InvalidParameter(_)
                | SlError::Configuration(_)
                | SlError::ConfigParse { .. }
                | SlError::Json(_)
                | SlError::Schema { .. }
        )
    }
}
