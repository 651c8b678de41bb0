//! Lateral sampling lattices, FFT plumbing and single-frequency field planes.
//!
//! A field plane holds one temporal frequency of the wavefield on a padded
//! lateral lattice, either as spatial samples or as its lateral spectrum. The
//! spectrum uses the standard discrete ordering: bin `i` carries angular
//! spatial frequency `2*pi*i/(n*dx)` for `i <= n/2` and the negative
//! frequencies above.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Transform lengths and windows
// ---------------------------------------------------------------------------

/// Smallest 5-smooth integer (factors 2, 3, 5 only) not below `n`; these are
/// the lengths the FFT handles at full speed.
pub fn next_fast_len(n: usize) -> usize {
    fn is_smooth(mut m: usize) -> bool {
        for f in [2, 3, 5] {
            while m % f == 0 {
                m /= f;
            }
        }
        m == 1
    }
    let mut m = n.max(1);
    while !is_smooth(m) {
        m += 1;
    }
    m
}

/// Symmetric Tukey (tapered cosine) window of length `n` with taper ratio
/// `alpha` in `[0, 1]`; `alpha = 0` is rectangular, `alpha = 1` is Hann.
pub fn tukey<T: Scalar>(n: usize, alpha: T) -> Vec<T> {
    assert!(
        alpha >= T::zero() && alpha <= T::one(),
        "tukey taper ratio must lie in [0, 1]"
    );
    if n == 1 {
        return vec![T::one()];
    }
    let m = cast::<T>((n - 1) as f64);
    let edge = alpha * m / cast(2.0);
    (0..n)
        .map(|i| {
            let x = cast::<T>(i as f64);
            let x = x.min(m - x); // fold to the left half
            if alpha == T::zero() || x >= edge {
                T::one()
            } else {
                let half = cast::<T>(0.5);
                half * (T::one() + (T::PI() * (x / edge - T::one())).cos())
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Lateral lattice
// ---------------------------------------------------------------------------

/// Uniform lateral sample lattice of a padded field plane.
///
/// The window `[phys_start, phys_start + phys_len)` marks the physical
/// aperture samples; the rest is numerical guard padding. Propagators sample
/// medium heterogeneity only inside the physical window and treat the padding
/// as reference background.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralLattice<T: Scalar> {
    dx: T,
    len: usize,
    phys_start: usize,
    phys_len: usize,
    x0: T,
}

impl<T: Scalar> LateralLattice<T> {
    pub fn new(dx: T, len: usize, phys_start: usize, phys_len: usize, x0: T) -> Result<Self> {
        if !(dx.is_finite() && dx > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "lattice spacing must be finite and positive, got {dx}"
            )));
        }
        if len == 0 || phys_len == 0 || phys_start + phys_len > len {
            return Err(Error::InvalidParameter(format!(
                "physical window [{phys_start}, {}) must fit in lattice of length {len}",
                phys_start + phys_len
            )));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidParameter("lattice origin must be finite".into()));
        }
        Ok(Self { dx, len, phys_start, phys_len, x0 })
    }

    /// Lattice whose every sample is physical.
    pub fn full(dx: T, len: usize, x0: T) -> Result<Self> {
        Self::new(dx, len, 0, len, x0)
    }

    /// Lattice for a physical window of `phys_len` samples centred (up to
    /// rounding) in a padded length of `len`, with the physical window centred
    /// on `x = 0`.
    pub fn padded_centered(dx: T, len: usize, phys_len: usize) -> Result<Self> {
        if phys_len > len {
            return Err(Error::InvalidParameter(format!(
                "physical window {phys_len} longer than padded lattice {len}"
            )));
        }
        let phys_start = (len - phys_len) / 2;
        let centre = cast::<T>(phys_start as f64 + (phys_len - 1) as f64 / 2.0);
        Self::new(dx, len, phys_start, phys_len, -centre * dx)
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn phys_start(&self) -> usize {
        self.phys_start
    }

    pub fn phys_len(&self) -> usize {
        self.phys_len
    }

    pub fn x0(&self) -> T {
        self.x0
    }

    /// Lateral position of sample `i`.
    pub fn x(&self, i: usize) -> T {
        self.x0 + cast::<T>(i as f64) * self.dx
    }

    pub fn x_end(&self) -> T {
        self.x(self.len - 1)
    }

    /// Whether sample `i` lies in the physical aperture window.
    pub fn is_physical(&self, i: usize) -> bool {
        i >= self.phys_start && i < self.phys_start + self.phys_len
    }

    /// Angular spatial frequencies (rad/m) in discrete transform order.
    pub fn kx(&self) -> Vec<T> {
        let n = self.len;
        let dk = cast::<T>(2.0) * T::PI() / (cast::<T>(n as f64) * self.dx);
        (0..n)
            .map(|i| {
                let idx = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
                cast::<T>(idx) * dk
            })
            .collect()
    }
}

/// Precomputed linear interpolation from a lattice onto arbitrary target
/// positions (used to record marched rows on an imaging grid).
#[derive(Debug, Clone)]
pub struct LinearResample<T: Scalar> {
    lower: Vec<usize>,
    frac: Vec<T>,
}

impl<T: Scalar> LinearResample<T> {
    /// Targets must lie inside the lattice span.
    pub fn new(lattice: &LateralLattice<T>, targets: &[T]) -> Result<Self> {
        let mut lower = Vec::with_capacity(targets.len());
        let mut frac = Vec::with_capacity(targets.len());
        for &x in targets {
            if x < lattice.x0() || x > lattice.x_end() {
                return Err(Error::InvalidParameter(format!(
                    "resample target {x} outside lattice span [{}, {}]",
                    lattice.x0(),
                    lattice.x_end()
                )));
            }
            let f = ((x - lattice.x0()) / lattice.dx()).to_f64();
            let i = (f.floor() as usize).min(lattice.len() - 2);
            lower.push(i);
            frac.push(cast::<T>(f - i as f64));
        }
        Ok(Self { lower, frac })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Interpolates `src` (lattice samples) into `dst` (target samples).
    pub fn apply(&self, src: &[Complex<T>], dst: &mut [Complex<T>]) {
        debug_assert_eq!(dst.len(), self.lower.len());
        for (k, out) in dst.iter_mut().enumerate() {
            let i = self.lower[k];
            let w = self.frac[k];
            let a = src[i];
            let b = src[i + 1];
            *out = a + (b - a).scale(w);
        }
    }
}

// ---------------------------------------------------------------------------
// FFT plumbing
// ---------------------------------------------------------------------------

/// Matched forward/inverse FFT plan of one length. The inverse applies the
/// `1/n` normalisation so that a forward/inverse round trip is the identity.
pub struct FftPair<T: Scalar> {
    len: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Scalar> FftPair<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform (space to spatial frequency).
    pub fn forward(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len);
        self.fwd.process(buf);
    }

    /// In-place normalised inverse transform (spatial frequency to space).
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inv.process(buf);
        let scale = T::one() / cast::<T>(self.len as f64);
        for v in buf.iter_mut() {
            *v = v.scale(scale);
        }
    }
}

impl<T: Scalar> std::fmt::Debug for FftPair<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPair").field("len", &self.len).finish()
    }
}

// ---------------------------------------------------------------------------
// Single-frequency field plane
// ---------------------------------------------------------------------------

/// Domain a [`SpectralField`] is currently expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// Complex field samples over lateral position.
    Space,
    /// Complex amplitudes over lateral spatial frequency.
    SpatialFrequency,
}

/// One temporal-frequency component of the wavefield on a lateral line at a
/// fixed depth, convertible between space and spatial-frequency
/// representations. Time dependence is `exp(-i*omega*t)`.
#[derive(Debug, Clone)]
pub struct SpectralField<T: Scalar> {
    omega: T,
    z: T,
    repr: Representation,
    values: Vec<Complex<T>>,
    lattice: LateralLattice<T>,
}

impl<T: Scalar> SpectralField<T> {
    pub fn new(
        omega: T,
        z: T,
        repr: Representation,
        values: Vec<Complex<T>>,
        lattice: LateralLattice<T>,
    ) -> Result<Self> {
        if !(omega.is_finite() && omega > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "angular frequency must be finite and positive, got {omega}"
            )));
        }
        if values.len() != lattice.len() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} samples, lattice expects {}",
                values.len(),
                lattice.len()
            )));
        }
        Ok(Self { omega, z, repr, values, lattice })
    }

    /// Builds a plane from spatial samples.
    pub fn from_space(
        omega: T,
        z: T,
        values: Vec<Complex<T>>,
        lattice: LateralLattice<T>,
    ) -> Result<Self> {
        Self::new(omega, z, Representation::Space, values, lattice)
    }

    /// Angular frequency (rad/s).
    pub fn omega(&self) -> T {
        self.omega
    }

    /// Depth of the plane (m).
    pub fn z(&self) -> T {
        self.z
    }

    pub fn set_z(&mut self, z: T) {
        self.z = z;
    }

    pub fn repr(&self) -> Representation {
        self.repr
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn lattice(&self) -> &LateralLattice<T> {
        &self.lattice
    }

    /// Converts to the spatial-frequency representation (no-op if already there).
    pub fn to_spatial_frequency(&mut self, fft: &FftPair<T>) -> Result<()> {
        self.check_fft(fft)?;
        if self.repr == Representation::Space {
            fft.forward(&mut self.values);
            self.repr = Representation::SpatialFrequency;
        }
        Ok(())
    }

    /// Converts to the spatial representation (no-op if already there).
    pub fn to_space(&mut self, fft: &FftPair<T>) -> Result<()> {
        self.check_fft(fft)?;
        if self.repr == Representation::SpatialFrequency {
            fft.inverse(&mut self.values);
            self.repr = Representation::Space;
        }
        Ok(())
    }

    fn check_fft(&self, fft: &FftPair<T>) -> Result<()> {
        if fft.len() != self.values.len() {
            return Err(Error::DimensionMismatch(format!(
                "FFT length {} does not match field length {}",
                fft.len(),
                self.values.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn next_fast_len_examples() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(243), 243);
        assert_eq!(next_fast_len(319), 320);
        assert_eq!(next_fast_len(321), 324);
        assert_eq!(next_fast_len(641), 648);
        // 1.25 x (2 * 128 - 1) = 318.75 rounds up to the 5-smooth 320.
        assert_eq!(next_fast_len((318.75f64).ceil() as usize), 320);
    }

    #[test]
    fn tukey_shape() {
        let w = tukey::<f64>(101, 0.25);
        assert_relative_eq!(w[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(w[100], 0.0, epsilon = 1e-15);
        assert_relative_eq!(w[50], 1.0);
        // Flat region: taper occupies 12.5 samples at each end.
        assert_relative_eq!(w[20], 1.0);
        // Symmetry.
        for i in 0..101 {
            assert_relative_eq!(w[i], w[100 - i], epsilon = 1e-15);
        }
        let rect = tukey::<f64>(16, 0.0);
        assert!(rect.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn lattice_layout_and_kx() {
        let l = LateralLattice::<f64>::padded_centered(0.15e-3, 8, 5).unwrap();
        // Physical window [1, 6) centred; x = 0 at its middle sample.
        assert_eq!(l.phys_start(), 1);
        assert!(l.is_physical(1) && l.is_physical(5) && !l.is_physical(0) && !l.is_physical(6));
        assert_relative_eq!(l.x(3), 0.0, epsilon = 1e-18);
        let kx = l.kx();
        let dk = 2.0 * std::f64::consts::PI / (8.0 * 0.15e-3);
        assert_relative_eq!(kx[0], 0.0);
        assert_relative_eq!(kx[1], dk, epsilon = 1e-9);
        assert_relative_eq!(kx[4], 4.0 * dk, epsilon = 1e-9);
        assert_relative_eq!(kx[5], -3.0 * dk, epsilon = 1e-9);
        assert_relative_eq!(kx[7], -dk, epsilon = 1e-9);
    }

    #[test]
    fn fft_round_trip_is_identity_f64() {
        let n = 320;
        let fft = FftPair::<f64>::new(n);
        let lattice = LateralLattice::full(0.15e-3, n, 0.0).unwrap();
        let values: Vec<Complex<f64>> = (0..n)
            .map(|i| Complex::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut f =
            SpectralField::from_space(2.0 * std::f64::consts::PI * 5e6, 0.0, values.clone(), lattice)
                .unwrap();
        f.to_spatial_frequency(&fft).unwrap();
        assert_eq!(f.repr(), Representation::SpatialFrequency);
        f.to_space(&fft).unwrap();
        for (a, b) in f.values().iter().zip(values.iter()) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn fft_round_trip_is_identity_f32() {
        let n = 128;
        let fft = FftPair::<f32>::new(n);
        let lattice = LateralLattice::full(0.15e-3f32, n, 0.0).unwrap();
        let values: Vec<Complex<f32>> = (0..n)
            .map(|i| Complex::new((i as f32 * 0.37).sin(), (i as f32 * 0.11).cos()))
            .collect();
        let mut f = SpectralField::from_space(3.1e7f32, 0.0, values.clone(), lattice).unwrap();
        f.to_spatial_frequency(&fft).unwrap();
        f.to_space(&fft).unwrap();
        for (a, b) in f.values().iter().zip(values.iter()) {
            assert_relative_eq!(a.re, b.re, epsilon = 2e-5);
            assert_relative_eq!(a.im, b.im, epsilon = 2e-5);
        }
    }

    #[test]
    fn single_k_line_transforms_to_pure_phase_ramp() {
        // Spectrum with one occupied bin is a complex exponential in space.
        let n = 90;
        let fft = FftPair::<f64>::new(n);
        let lattice = LateralLattice::full(1e-4, n, 0.0).unwrap();
        let mut spec = vec![Complex::new(0.0, 0.0); n];
        spec[3] = Complex::new(1.0, 0.0);
        let mut f = SpectralField::new(
            1e7,
            0.0,
            Representation::SpatialFrequency,
            spec,
            lattice,
        )
        .unwrap();
        f.to_space(&fft).unwrap();
        for (i, v) in f.values().iter().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * 3.0 * i as f64 / n as f64;
            assert_relative_eq!(v.re, phase.cos() / n as f64, epsilon = 1e-12);
            assert_relative_eq!(v.im, phase.sin() / n as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn resample_matches_hand_lerp() {
        let l = LateralLattice::full(1.0, 5, 0.0).unwrap();
        let src: Vec<Complex<f64>> = (0..5).map(|i| Complex::new(i as f64, -(i as f64))).collect();
        let rs = LinearResample::new(&l, &[0.0, 1.5, 3.25, 4.0]).unwrap();
        let mut out = vec![Complex::new(0.0, 0.0); 4];
        rs.apply(&src, &mut out);
        assert_relative_eq!(out[1].re, 1.5);
        assert_relative_eq!(out[2].re, 3.25);
        assert_relative_eq!(out[3].re, 4.0);
        assert!(LinearResample::new(&l, &[4.5]).is_err());
        assert!(LinearResample::new(&l, &[-0.1]).is_err());
    }

    #[test]
    fn field_shape_mismatch_rejected() {
        let lattice = LateralLattice::full(1e-4, 8, 0.0).unwrap();
        let r = SpectralField::<f64>::from_space(1e7, 0.0, vec![Complex::default(); 7], lattice);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }
}
