//! Beamformed image container and log-compressed views.

use crate::error::{Error, Result};
use crate::grid::ImagingGrid;
use crate::scalar::{cast, Scalar};
use ndarray::Array2;

/// Floor applied to the log view so that empty pixels stay finite.
const DB_FLOOR: f64 = -300.0;

/// A beamformed intensity image on an imaging grid.
///
/// Intensity values are non-negative linear magnitudes; log compression is a
/// view, never stored back.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane<T: Scalar> {
    grid: ImagingGrid<T>,
    intensity: Array2<T>,
}

impl<T: Scalar> ImagePlane<T> {
    pub fn new(grid: ImagingGrid<T>, intensity: Array2<T>) -> Result<Self> {
        if intensity.dim() != (grid.nz(), grid.nx()) {
            return Err(Error::DimensionMismatch(format!(
                "intensity is {:?}, grid is ({}, {})",
                intensity.dim(),
                grid.nz(),
                grid.nx()
            )));
        }
        if intensity.iter().any(|&v| !v.is_finite() || v < T::zero()) {
            return Err(Error::InvalidParameter(
                "intensity must be finite and non-negative".into(),
            ));
        }
        Ok(Self { grid, intensity })
    }

    pub fn grid(&self) -> &ImagingGrid<T> {
        &self.grid
    }

    pub fn intensity(&self) -> &Array2<T> {
        &self.intensity
    }

    pub fn into_intensity(self) -> Array2<T> {
        self.intensity
    }

    /// Peak intensity.
    pub fn max(&self) -> T {
        self.intensity
            .iter()
            .fold(T::zero(), |m, &v| if v > m { v } else { m })
    }

    /// Log-compressed view: `20 log10(I / max)` in dB, floored at -300 dB so
    /// empty pixels stay finite. An all-zero image maps to all zeros.
    pub fn db(&self) -> Array2<T> {
        let max = self.max();
        let floor = cast::<T>(DB_FLOOR);
        if max == T::zero() {
            return Array2::zeros(self.intensity.raw_dim());
        }
        let twenty = cast::<T>(20.0);
        self.intensity.mapv(|v| {
            if v == T::zero() {
                floor
            } else {
                (twenty * (v / max).log10()).max(floor)
            }
        })
    }

    /// Log view clipped to `[-dynamic_range_db, 0]`, for display and export.
    pub fn db_clipped(&self, dynamic_range_db: T) -> Result<Array2<T>> {
        if !(dynamic_range_db.is_finite() && dynamic_range_db > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "dynamic range must be finite and positive, got {dynamic_range_db}"
            )));
        }
        let lo = -dynamic_range_db;
        Ok(self.db().mapv(|v| v.max(lo).min(T::zero())))
    }
}
