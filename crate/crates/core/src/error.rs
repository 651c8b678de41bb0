//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors reported by grid construction, propagation, simulation, metrics and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is out of range, non-finite, or inconsistent with the rest of
    /// the call (bad geometry, empty input, uncovered grid, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two containers that must share a shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The depth-marching step exceeds the quarter-wavelength validity limit.
    #[error("marching step {dz_m:.3e} m exceeds quarter-wavelength limit {limit_m:.3e} m")]
    StepTooLarge { dz_m: f64, limit_m: f64 },

    /// Frequency-band selection is empty or violates the sampling rate.
    #[error("frequency band error: {0}")]
    Band(String),

    /// A geometric kernel was evaluated at a singular point (zero range).
    #[error("singular geometry: {0}")]
    Singularity(String),

    /// A metric target could not be resolved inside its region of interest.
    #[error("unresolved target: {0}")]
    UnresolvedTarget(String),

    /// A requested feature is finer than the grid can represent.
    #[error("grid resolution too coarse: {0}")]
    Resolution(String),

    /// Two metric reports cannot be compared.
    #[error("report comparison failed: {0}")]
    Comparison(String),

    /// Invalid run configuration (CLI or file based).
    #[error("configuration error: {0}")]
    Config(String),

    /// A binary or text artifact did not match its documented layout.
    #[error("bad file format: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;
