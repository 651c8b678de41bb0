//! Imaging grids, transducer geometry and transmit-event descriptions.
//!
//! Everything is expressed in SI units (metres, seconds, Hz, rad). The imaging
//! plane is 2-D: `x` is the lateral coordinate along the array face, `z` is
//! depth, positive into the medium, with the array at `z = 0`.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

// ---------------------------------------------------------------------------
// Imaging grid
// ---------------------------------------------------------------------------

/// Regular rectangular lateral/depth grid on which media and images live.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingGrid<T: Scalar> {
    nx: usize,
    nz: usize,
    dx: T,
    dz: T,
    x0: T,
    z0: T,
}

impl<T: Scalar> ImagingGrid<T> {
    /// Builds a grid with `nx × nz` nodes, spacings `dx`/`dz` (m) and origin
    /// `(x0, z0)` at node `(0, 0)`.
    pub fn new(nx: usize, nz: usize, dx: T, dz: T, x0: T, z0: T) -> Result<Self> {
        if nx < 2 || nz < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 nodes per axis, got {nx} x {nz}"
            )));
        }
        for (name, v) in [("dx", dx), ("dz", dz)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "grid spacing {name} must be finite and positive, got {v}"
                )));
            }
        }
        if !x0.is_finite() || !z0.is_finite() {
            return Err(Error::InvalidParameter("grid origin must be finite".into()));
        }
        Ok(Self { nx, nz, dx, dz, x0, z0 })
    }

    /// Grid centred laterally on `x = 0`.
    pub fn centered(nx: usize, nz: usize, dx: T, dz: T, z0: T) -> Result<Self> {
        let half = cast::<T>((nx - 1) as f64 / 2.0);
        Self::new(nx, nz, dx, dz, -half * dx, z0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    /// Lateral spacing (m).
    pub fn dx(&self) -> T {
        self.dx
    }

    /// Depth spacing (m); also the depth-marching step of the propagators.
    pub fn dz(&self) -> T {
        self.dz
    }

    pub fn x0(&self) -> T {
        self.x0
    }

    pub fn z0(&self) -> T {
        self.z0
    }

    /// Lateral coordinate of column `i`.
    pub fn x(&self, i: usize) -> T {
        self.x0 + cast::<T>(i as f64) * self.dx
    }

    /// Depth coordinate of row `j`.
    pub fn z(&self, j: usize) -> T {
        self.z0 + cast::<T>(j as f64) * self.dz
    }

    /// Last lateral coordinate.
    pub fn x_end(&self) -> T {
        self.x(self.nx - 1)
    }

    /// Last depth coordinate.
    pub fn z_end(&self) -> T {
        self.z(self.nz - 1)
    }

    /// All lateral coordinates.
    pub fn xs(&self) -> Vec<T> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    /// All depth coordinates.
    pub fn zs(&self) -> Vec<T> {
        (0..self.nz).map(|j| self.z(j)).collect()
    }

    /// Whether `(x, z)` lies inside the grid extent (inclusive).
    pub fn contains(&self, x: T, z: T) -> bool {
        x >= self.x0 && x <= self.x_end() && z >= self.z0 && z <= self.z_end()
    }

    /// Whether this grid spatially covers `other` (both extents inclusive).
    pub fn covers(&self, other: &ImagingGrid<T>) -> bool {
        self.x0 <= other.x0
            && self.x_end() >= other.x_end()
            && self.z0 <= other.z0
            && self.z_end() >= other.z_end()
    }

    /// Nearest node index of a point, clamped to the grid.
    pub fn nearest(&self, x: T, z: T) -> (usize, usize) {
        let fi = ((x - self.x0) / self.dx).round().to_f64().max(0.0);
        let fj = ((z - self.z0) / self.dz).round().to_f64().max(0.0);
        (
            (fj as usize).min(self.nz - 1),
            (fi as usize).min(self.nx - 1),
        )
    }
}

// ---------------------------------------------------------------------------
// Transducer geometry
// ---------------------------------------------------------------------------

/// Linear transducer array centred on `x = 0` at `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry<T: Scalar> {
    n_elements: usize,
    pitch: T,
    center_frequency: T,
}

impl<T: Scalar> ArrayGeometry<T> {
    /// `n_elements` element centres spaced by `pitch` (m), with the array's
    /// nominal centre frequency (Hz) used for band selection.
    pub fn new(n_elements: usize, pitch: T, center_frequency: T) -> Result<Self> {
        if n_elements < 2 {
            return Err(Error::InvalidParameter(format!(
                "array needs at least 2 elements, got {n_elements}"
            )));
        }
        if !(pitch.is_finite() && pitch > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "element pitch must be finite and positive, got {pitch}"
            )));
        }
        if !(center_frequency.is_finite() && center_frequency > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "center frequency must be finite and positive, got {center_frequency}"
            )));
        }
        Ok(Self { n_elements, pitch, center_frequency })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    /// Element spacing (m).
    pub fn pitch(&self) -> T {
        self.pitch
    }

    /// Nominal centre frequency (Hz).
    pub fn center_frequency(&self) -> T {
        self.center_frequency
    }

    /// Physical aperture width, first to last element centre (m).
    pub fn aperture(&self) -> T {
        cast::<T>((self.n_elements - 1) as f64) * self.pitch
    }

    /// Lateral position of element `i`, centred about `x = 0`.
    pub fn element_x(&self, i: usize) -> T {
        let centre = cast::<T>((self.n_elements - 1) as f64 / 2.0);
        (cast::<T>(i as f64) - centre) * self.pitch
    }

    /// All element positions.
    pub fn element_positions(&self) -> Vec<T> {
        (0..self.n_elements).map(|i| self.element_x(i)).collect()
    }
}

// ---------------------------------------------------------------------------
// Transmit events
// ---------------------------------------------------------------------------

/// One steered plane-wave emission: firing delays plus the emitted pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitEvent<T: Scalar> {
    /// Steering angle from the depth axis (rad, positive toward +x).
    pub steering_angle: T,
    /// Per-element firing delays (s), non-negative with minimum zero.
    pub delays: Vec<T>,
    /// Centre frequency of the emitted pulse (Hz).
    pub pulse_center_frequency: T,
    /// Number of carrier cycles inside the pulse envelope.
    pub pulse_cycles: u32,
    /// Sound speed used to compute the delays (m/s).
    pub reference_c: T,
}

impl<T: Scalar> TransmitEvent<T> {
    /// Builds a plane-wave event for `array` steered by `angle` (rad) assuming
    /// background speed `c0`.
    pub fn plane_wave(
        array: &ArrayGeometry<T>,
        angle: T,
        c0: T,
        pulse_center_frequency: T,
        pulse_cycles: u32,
    ) -> Result<Self> {
        if !(pulse_center_frequency.is_finite() && pulse_center_frequency > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "pulse center frequency must be finite and positive, got {pulse_center_frequency}"
            )));
        }
        if pulse_cycles == 0 {
            return Err(Error::InvalidParameter("pulse must contain at least one cycle".into()));
        }
        let delays = plane_wave_delays(array, angle, c0)?;
        Ok(Self {
            steering_angle: angle,
            delays,
            pulse_center_frequency,
            pulse_cycles,
            reference_c: c0,
        })
    }

    /// Linear delay law evaluated at an arbitrary lateral position (s).
    ///
    /// Interpolates (and extrapolates) the element delays with the straight
    /// line they lie on; exact for plane-wave delay laws.
    pub fn delay_at(&self, array: &ArrayGeometry<T>, x: T) -> T {
        let n = self.delays.len();
        let x_first = array.element_x(0);
        let x_last = array.element_x(n - 1);
        let slope = (self.delays[n - 1] - self.delays[0]) / (x_last - x_first);
        self.delays[0] + slope * (x - x_first)
    }
}

/// Per-element firing delays (s) for a plane wave steered by `angle` (rad) in a
/// background of speed `c0` (m/s). Delays are shifted so the earliest is zero.
pub fn plane_wave_delays<T: Scalar>(
    array: &ArrayGeometry<T>,
    angle: T,
    c0: T,
) -> Result<Vec<T>> {
    if !angle.is_finite() {
        return Err(Error::InvalidParameter("steering angle must be finite".into()));
    }
    let quarter_turn = T::FRAC_PI_2();
    if angle.abs() >= quarter_turn {
        return Err(Error::InvalidParameter(format!(
            "steering angle {} rad must lie strictly inside (-pi/2, pi/2)",
            angle
        )));
    }
    if !(c0.is_finite() && c0 > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "sound speed must be finite and positive, got {c0}"
        )));
    }
    let s = angle.sin();
    let raw: Vec<T> = array
        .element_positions()
        .into_iter()
        .map(|x| x * s / c0)
        .collect();
    let min = raw.iter().cloned().fold(T::infinity(), T::min);
    Ok(raw.into_iter().map(|t| t - min).collect())
}
