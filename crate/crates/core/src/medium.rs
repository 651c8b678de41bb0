//! Sound-speed (and optional density) maps of the imaged medium.

use crate::error::{Error, Result};
use crate::grid::ImagingGrid;
use crate::scalar::{cast, Scalar};
use ndarray::Array2;

/// Sound-speed map on an [`ImagingGrid`], with the homogeneous reference speed
/// `c0` the propagators fall back to, and an optional density map used by the
/// synthetic data generator.
///
/// Arrays are stored depth-major: `c[(j, i)]` is depth row `j`, lateral column `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumMap<T: Scalar> {
    grid: ImagingGrid<T>,
    c: Array2<T>,
    c0: T,
    rho: Option<Array2<T>>,
    rho0: T,
}

impl<T: Scalar> MediumMap<T> {
    /// Builds a map from a `(nz, nx)` speed array (m/s) and reference speed `c0`.
    pub fn new(grid: ImagingGrid<T>, c: Array2<T>, c0: T) -> Result<Self> {
        if c.dim() != (grid.nz(), grid.nx()) {
            return Err(Error::DimensionMismatch(format!(
                "speed map is {:?}, grid is ({}, {})",
                c.dim(),
                grid.nz(),
                grid.nx()
            )));
        }
        if !(c0.is_finite() && c0 > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "reference speed must be finite and positive, got {c0}"
            )));
        }
        if c.iter().any(|&v| !(v.is_finite() && v > T::zero())) {
            return Err(Error::InvalidParameter(
                "speed map entries must be finite and positive".into(),
            ));
        }
        Ok(Self { grid, c, c0, rho: None, rho0: cast(1000.0) })
    }

    /// Uniform medium at the reference speed.
    pub fn uniform(grid: ImagingGrid<T>, c0: T) -> Result<Self> {
        let c = Array2::from_elem((grid.nz(), grid.nx()), c0);
        Self::new(grid, c, c0)
    }

    /// Attaches a density map (kg/m^3) of the same shape.
    pub fn with_density(mut self, rho: Array2<T>, rho0: T) -> Result<Self> {
        if rho.dim() != self.c.dim() {
            return Err(Error::DimensionMismatch(format!(
                "density map is {:?}, speed map is {:?}",
                rho.dim(),
                self.c.dim()
            )));
        }
        if !(rho0.is_finite() && rho0 > T::zero())
            || rho.iter().any(|&v| !(v.is_finite() && v > T::zero()))
        {
            return Err(Error::InvalidParameter(
                "density values must be finite and positive".into(),
            ));
        }
        self.rho = Some(rho);
        self.rho0 = rho0;
        Ok(self)
    }

    pub fn grid(&self) -> &ImagingGrid<T> {
        &self.grid
    }

    pub fn c(&self) -> &Array2<T> {
        &self.c
    }

    /// Homogeneous reference speed (m/s).
    pub fn c0(&self) -> T {
        self.c0
    }

    pub fn rho(&self) -> Option<&Array2<T>> {
        self.rho.as_ref()
    }

    pub fn rho0(&self) -> T {
        self.rho0
    }

    /// Smallest speed present, including the reference (m/s). Sets the strictest
    /// quarter-wavelength marching limit.
    pub fn c_min(&self) -> T {
        self.c.iter().cloned().fold(self.c0, T::min)
    }

    /// Largest speed present, including the reference (m/s).
    pub fn c_max(&self) -> T {
        self.c.iter().cloned().fold(self.c0, T::max)
    }

    /// True when every node equals the reference speed bit-for-bit.
    pub fn is_uniform_reference(&self) -> bool {
        self.c.iter().all(|&v| v == self.c0)
    }

    /// Bilinear sample of the speed map at `(x, z)`, clamped to the grid edges.
    ///
    /// When the four surrounding nodes carry the same value the value is
    /// returned directly, so uniform regions sample exactly.
    pub fn sample_c(&self, x: T, z: T) -> T {
        bilinear(&self.c, &self.grid, x, z)
    }

    /// Resamples onto `target` by bilinear interpolation (edge-clamped).
    ///
    /// The grids must overlap spatially; values outside the source extent take
    /// the nearest-edge value.
    pub fn resample(&self, target: &ImagingGrid<T>) -> Result<MediumMap<T>> {
        let overlap_x = self.grid.x0().max(target.x0()) <= self.grid.x_end().min(target.x_end());
        let overlap_z = self.grid.z0().max(target.z0()) <= self.grid.z_end().min(target.z_end());
        if !(overlap_x && overlap_z) {
            return Err(Error::InvalidParameter(
                "resample target does not overlap the source grid".into(),
            ));
        }
        let mut c = Array2::zeros((target.nz(), target.nx()));
        for j in 0..target.nz() {
            let z = target.z(j);
            for i in 0..target.nx() {
                c[(j, i)] = bilinear(&self.c, &self.grid, target.x(i), z);
            }
        }
        let mut out = MediumMap::new(target.clone(), c, self.c0)?;
        if let Some(rho) = &self.rho {
            let mut r = Array2::zeros((target.nz(), target.nx()));
            for j in 0..target.nz() {
                let z = target.z(j);
                for i in 0..target.nx() {
                    r[(j, i)] = bilinear(rho, &self.grid, target.x(i), z);
                }
            }
            out = out.with_density(r, self.rho0)?;
        }
        Ok(out)
    }
}

/// Edge-clamped bilinear interpolation of a depth-major array.
fn bilinear<T: Scalar>(a: &Array2<T>, grid: &ImagingGrid<T>, x: T, z: T) -> T {
    let nx = grid.nx();
    let nz = grid.nz();
    let fx = ((x - grid.x0()) / grid.dx())
        .max(T::zero())
        .min(cast::<T>((nx - 1) as f64));
    let fz = ((z - grid.z0()) / grid.dz())
        .max(T::zero())
        .min(cast::<T>((nz - 1) as f64));
    let i0 = fx.floor().to_f64() as usize;
    let j0 = fz.floor().to_f64() as usize;
    let i1 = (i0 + 1).min(nx - 1);
    let j1 = (j0 + 1).min(nz - 1);
    let c00 = a[(j0, i0)];
    let c01 = a[(j0, i1)];
    let c10 = a[(j1, i0)];
    let c11 = a[(j1, i1)];
    // Exact passthrough for locally uniform data (keeps homogeneous regions
    // bit-identical to the reference value).
    if c00 == c01 && c00 == c10 && c00 == c11 {
        return c00;
    }
    let wx = fx - cast::<T>(i0 as f64);
    let wz = fz - cast::<T>(j0 as f64);
    let top = c00 + (c01 - c00) * wx;
    let bottom = c10 + (c11 - c10) * wx;
    top + (bottom - top) * wz
}
