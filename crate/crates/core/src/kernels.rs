//! Frequency-domain depth propagation: spectral one-step operators, the
//! slab-by-slab depth marcher, and a direct aperture-integral reference used to
//! validate them.
//!
//! All operators act on a single temporal frequency with time dependence
//! `exp(-i*omega*t)`. Forward propagation advances the field toward larger
//! depth; the backward direction applies the conjugated one-step operator
//! (time reversal), which retraces propagating waves and still *decays*
//! evanescent components so that back propagation never amplifies noise.

use crate::error::{Error, Result};
use crate::grid::{ArrayGeometry, ImagingGrid};
use crate::medium::MediumMap;
use crate::scalar::{cast, Scalar};
use crate::spectral::{FftPair, LateralLattice, LinearResample, Representation, SpectralField};
use ndarray::Array2;
use num_complex::Complex;

/// Propagation direction of a one-step operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// March into the medium (increasing depth).
    Forward,
    /// Conjugated (time-reversed) operator used for back propagation.
    Backward,
}

impl Direction {
    fn phase_sign<T: Scalar>(self) -> T {
        match self {
            Direction::Forward => T::one(),
            Direction::Backward => -T::one(),
        }
    }
}

/// One-step operator family used by the depth marcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationKernel {
    /// Homogeneous angular-spectrum step at the reference speed.
    Asm,
    /// Heterogeneous angular-spectrum step: exact spectral transfer at the
    /// slab's laterally averaged squared slowness, plus a windowed first-order
    /// scattering correction for the zero-mean lateral residual.
    Hasm,
    /// Split-step: spectral step at the slab's mean slowness followed by a
    /// spatial residual phase screen.
    SplitStep,
}

/// Spectral admission window for the scattering correction, in units of
/// `kz^2 / k^2`: bins steeper than `sqrt(CONE_HI)` (relative vertical
/// wavenumber) pass unchanged, bins shallower than `sqrt(CONE_LO)` - including
/// the whole evanescent region - receive no correction, with a raised-cosine
/// blend between. Near cutoff the `1/kz` Green's-function gain would otherwise
/// amplify the correction by orders of magnitude on every step and the march
/// would diverge; the excluded bins are waves travelling nearly parallel to
/// the array, which carry no usable image content.
const CONE_LO: f64 = 0.04;
const CONE_HI: f64 = 0.25;

fn cone_window<T: Scalar>(u: T) -> T {
    let lo = cast::<T>(CONE_LO);
    let hi = cast::<T>(CONE_HI);
    if u <= lo {
        T::zero()
    } else if u >= hi {
        T::one()
    } else {
        let t = (u - lo) / (hi - lo);
        cast::<T>(0.5) * (T::one() - (T::PI() * t).cos())
    }
}

/// Quarter-wavelength marching limit (m) for angular frequency `omega` in the
/// slowest medium speed `c_min`.
pub fn quarter_wave_limit<T: Scalar>(omega: T, c_min: T) -> T {
    T::PI() * c_min / (cast::<T>(2.0) * omega)
}

// ---------------------------------------------------------------------------
// Slab descriptions
// ---------------------------------------------------------------------------

/// Lateral sound-speed profile of one marching slab, sampled on the field
/// lattice at the slab's midpoint depth.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralProfile<T: Scalar> {
    /// Speed at each lattice sample (m/s).
    pub c: Vec<T>,
    /// Midpoint depth of the slab (m).
    pub z_mid: T,
    /// Slab thickness (m).
    pub dz: T,
}

impl<T: Scalar> LateralProfile<T> {
    pub fn new(c: Vec<T>, z_mid: T, dz: T) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidParameter("slab profile is empty".into()));
        }
        if c.iter().any(|&v| !(v.is_finite() && v > T::zero())) {
            return Err(Error::InvalidParameter(
                "slab speeds must be finite and positive".into(),
            ));
        }
        if !(dz.is_finite() && dz > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "slab thickness must be finite and positive, got {dz}"
            )));
        }
        Ok(Self { c, z_mid, dz })
    }

    /// Mean slowness of the profile (s/m); invariant under lateral permutation.
    pub fn mean_slowness(&self) -> T {
        let sum: T = self.c.iter().map(|&c| T::one() / c).sum();
        sum / cast::<T>(self.c.len() as f64)
    }
}

/// Spectral heterogeneity source of one slab:
/// `lambda(x) = omega^2/c0^2 - omega^2/c(x)^2` (rad^2/m^2), identically zero
/// wherever the slab speed equals the reference speed.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneitySlab<T: Scalar> {
    pub lambda: Vec<T>,
    pub z_mid: T,
    pub dz: T,
}

impl<T: Scalar> HeterogeneitySlab<T> {
    /// Derives the heterogeneity source from a speed profile.
    pub fn from_profile(profile: &LateralProfile<T>, omega: T, c0: T) -> Result<Self> {
        if !(omega.is_finite() && omega > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "angular frequency must be finite and positive, got {omega}"
            )));
        }
        if !(c0.is_finite() && c0 > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "reference speed must be finite and positive, got {c0}"
            )));
        }
        let w2 = omega * omega;
        let lambda = profile
            .c
            .iter()
            // Same expression on both sides: bit-equal speeds give exactly zero.
            .map(|&c| w2 / (c0 * c0) - w2 / (c * c))
            .collect();
        Ok(Self { lambda, z_mid: profile.z_mid, dz: profile.dz })
    }

    pub fn is_zero(&self) -> bool {
        self.lambda.iter().all(|&v| v == T::zero())
    }
}

// ---------------------------------------------------------------------------
// Transfer tables
// ---------------------------------------------------------------------------

/// Homogeneous one-step transfer per spatial-frequency bin: phase advance
/// `exp(+/- i kz dz)` on the propagating disc, real decay `exp(-|kz| dz)` on
/// evanescent bins regardless of direction.
fn homogeneous_transfer<T: Scalar>(
    kx: &[T],
    omega: T,
    c: T,
    dz: T,
    direction: Direction,
) -> Vec<Complex<T>> {
    let mut out = vec![Complex::new(T::zero(), T::zero()); kx.len()];
    homogeneous_transfer_into(kx, omega, c, dz, direction, &mut out);
    out
}

/// As [`homogeneous_transfer`], writing into an existing buffer.
fn homogeneous_transfer_into<T: Scalar>(
    kx: &[T],
    omega: T,
    c: T,
    dz: T,
    direction: Direction,
    out: &mut [Complex<T>],
) {
    let k = omega / c;
    transfer_from_k2_into(kx, k * k, dz, direction, out);
}

/// One-step transfer for a given squared wavenumber `k2`: phase advance
/// `exp(+/- i kz dz)` on the propagating disc, real decay `exp(-|kz| dz)` on
/// evanescent bins regardless of direction.
fn transfer_from_k2_into<T: Scalar>(
    kx: &[T],
    k2: T,
    dz: T,
    direction: Direction,
    out: &mut [Complex<T>],
) {
    let sign = direction.phase_sign::<T>();
    for (slot, &kxi) in out.iter_mut().zip(kx.iter()) {
        let kz2 = k2 - kxi * kxi;
        *slot = if kz2 >= T::zero() {
            Complex::from_polar(T::one(), sign * kz2.sqrt() * dz)
        } else {
            Complex::new((-(-kz2).sqrt() * dz).exp(), T::zero())
        };
    }
}

/// Scattering transfer of the heterogeneous step for background squared
/// wavenumber `k2`: `W * exp(+/- i kz dz) / (2 i kz) * dz`, conjugated as a
/// whole for the backward direction so that back propagation stays the exact
/// adjoint of forward propagation. `W` is the [`cone_window`] admission
/// window, which zeroes the near-cutoff and evanescent bins where `1/kz` is
/// ill conditioned.
fn scattering_transfer_into<T: Scalar>(
    kx: &[T],
    k2: T,
    dz: T,
    direction: Direction,
    out: &mut [Complex<T>],
) {
    let zero = Complex::new(T::zero(), T::zero());
    if !(k2 > T::zero()) {
        out.fill(zero);
        return;
    }
    let sign = direction.phase_sign::<T>();
    let half = cast::<T>(0.5);
    let half_pi = T::FRAC_PI_2();
    for (slot, &kxi) in out.iter_mut().zip(kx.iter()) {
        let kz2 = k2 - kxi * kxi;
        let w = cone_window(kz2 / k2);
        *slot = if w > T::zero() {
            // The window guarantees kz2 > 0 here.
            let kz = kz2.sqrt();
            // exp(i kz dz) / (2 i kz) has magnitude 1/(2 kz) and phase
            // kz dz - pi/2; the backward kernel is its conjugate.
            Complex::from_polar(w * half * dz / kz, sign * (kz * dz - half_pi))
        } else {
            zero
        };
    }
}

// ---------------------------------------------------------------------------
// One-step operators
// ---------------------------------------------------------------------------

fn require_spatial_frequency<T: Scalar>(field: &SpectralField<T>) -> Result<()> {
    if field.repr() != Representation::SpatialFrequency {
        return Err(Error::InvalidParameter(
            "one-step operators require the spatial-frequency representation".into(),
        ));
    }
    Ok(())
}

fn check_step<T: Scalar>(dz: T, c: T) -> Result<()> {
    if !(dz.is_finite() && dz > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "step must be finite and positive, got {dz}"
        )));
    }
    if !(c.is_finite() && c > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "speed must be finite and positive, got {c}"
        )));
    }
    Ok(())
}

/// Homogeneous angular-spectrum step by `dz` at speed `c0`.
pub fn asm_step<T: Scalar>(
    mut field: SpectralField<T>,
    dz: T,
    c0: T,
    direction: Direction,
) -> Result<SpectralField<T>> {
    require_spatial_frequency(&field)?;
    check_step(dz, c0)?;
    let h = homogeneous_transfer(&field.lattice().kx(), field.omega(), c0, dz, direction);
    for (v, t) in field.values_mut().iter_mut().zip(h.iter()) {
        *v *= *t;
    }
    let z = field.z();
    field.set_z(z + dz);
    Ok(field)
}

/// Heterogeneous angular-spectrum step.
///
/// The slab's lateral-mean contrast is folded into the one-step transfer
/// exactly: the spectral advance uses the laterally averaged squared slowness
/// of the slab, so a laterally uniform slab propagates with a pure phase
/// advance (or evanescent decay) at its own speed and the step never amplifies
/// such fields. Only the zero-mean lateral residual of the contrast enters
/// through the first-order scattering term, evaluated via the convolution
/// theorem (transform to space, multiply by the residual, transform back) and
/// restricted by a spectral admission window to bins where the `1/kz`
/// Green's-function factor is well conditioned.
pub fn hasm_step<T: Scalar>(
    mut field: SpectralField<T>,
    slab: &HeterogeneitySlab<T>,
    c0: T,
    direction: Direction,
) -> Result<SpectralField<T>> {
    require_spatial_frequency(&field)?;
    check_step(slab.dz, c0)?;
    let n = field.values().len();
    if slab.lambda.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "slab has {} samples, field has {n}",
            slab.lambda.len()
        )));
    }
    let kx = field.lattice().kx();
    let omega = field.omega();
    if slab.is_zero() {
        let h = homogeneous_transfer(&kx, omega, c0, slab.dz, direction);
        for (v, t) in field.values_mut().iter_mut().zip(h.iter()) {
            *v *= *t;
        }
    } else {
        let first = slab.lambda[0];
        let uniform = slab.lambda.iter().all(|&l| l == first);
        let lambda_mean = if uniform {
            first
        } else {
            let sum: T = slab.lambda.iter().copied().sum();
            sum / cast::<T>(n as f64)
        };
        let k = omega / c0;
        // k^2 - mean(lambda) = omega^2 * mean(1/c^2): the squared wavenumber
        // of the laterally averaged slab, positive for any physical speeds.
        let k2_bar = k * k - lambda_mean;
        if !(k2_bar > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "slab contrast leaves no propagating band (mean wavenumber^2 = {})",
                k2_bar.to_f64()
            )));
        }
        let zero = Complex::new(T::zero(), T::zero());
        let mut h = vec![zero; n];
        transfer_from_k2_into(&kx, k2_bar, slab.dz, direction, &mut h);
        if uniform {
            for (v, t) in field.values_mut().iter_mut().zip(h.iter()) {
                *v *= *t;
            }
        } else {
            let mut s = vec![zero; n];
            scattering_transfer_into(&kx, k2_bar, slab.dz, direction, &mut s);
            let fft = FftPair::new(n);
            let mut q: Vec<Complex<T>> = field.values().to_vec();
            fft.inverse(&mut q);
            for (v, &l) in q.iter_mut().zip(slab.lambda.iter()) {
                *v = v.scale(l - lambda_mean);
            }
            fft.forward(&mut q);
            for ((v, t), (sc, qv)) in field
                .values_mut()
                .iter_mut()
                .zip(h.iter())
                .zip(s.iter().zip(q.iter()))
            {
                *v = *v * *t + *sc * *qv;
            }
        }
    }
    let z = field.z();
    field.set_z(z + slab.dz);
    Ok(field)
}

/// Split-step Fourier step: spectral advance at the slab's mean slowness, then
/// a spatial residual phase screen `exp(+/- i k_res(x) dz)` with
/// `k_res = omega * (1/c(x) - mean(1/c))`.
pub fn split_step<T: Scalar>(
    mut field: SpectralField<T>,
    profile: &LateralProfile<T>,
    direction: Direction,
) -> Result<SpectralField<T>> {
    require_spatial_frequency(&field)?;
    let n = field.values().len();
    if profile.c.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "slab has {} samples, field has {n}",
            profile.c.len()
        )));
    }
    check_step(profile.dz, profile.c[0])?;
    let omega = field.omega();
    let mean_slowness = profile.mean_slowness();
    let c_bar = T::one() / mean_slowness;
    let h = homogeneous_transfer(&field.lattice().kx(), omega, c_bar, profile.dz, direction);
    for (v, t) in field.values_mut().iter_mut().zip(h.iter()) {
        *v *= *t;
    }
    let fft = FftPair::new(n);
    let sign = direction.phase_sign::<T>();
    let dz = profile.dz;
    {
        let values = field.values_mut();
        fft.inverse(values);
        for (v, &c) in values.iter_mut().zip(profile.c.iter()) {
            let k_res = omega * (T::one() / c - mean_slowness);
            *v *= Complex::from_polar(T::one(), sign * k_res * dz);
        }
        fft.forward(values);
    }
    let z = field.z();
    field.set_z(z + dz);
    Ok(field)
}

// ---------------------------------------------------------------------------
// Depth profile cache
// ---------------------------------------------------------------------------

/// Frequency-independent description of one marching slab on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow<T: Scalar> {
    /// Slowness `1/c(x)` at each lattice sample (padding samples take the
    /// nearest medium edge value).
    pub inv_c: Vec<T>,
    /// `1/c0^2 - 1/c(x)^2`; multiply by `omega^2` to obtain the heterogeneity
    /// source. Exactly zero wherever the speed equals the reference.
    pub lambda_unit: Vec<T>,
    /// Lattice-wide mean slowness of the slab.
    pub mean_slowness: T,
}

/// Slab profiles for a whole march, shared across frequencies and transmits.
///
/// Rows are `None` where the slab is uniformly at the reference speed, letting
/// heterogeneous kernels fall back to the homogeneous fast path.
#[derive(Debug, Clone)]
pub struct DepthProfiles<T: Scalar> {
    dz: T,
    rows: Vec<Option<ProfileRow<T>>>,
}

impl<T: Scalar> DepthProfiles<T> {
    /// Samples `n_steps` slab midpoints starting at `z_start` across the whole
    /// `lattice`; edge-clamped interpolation extends the medium's boundary
    /// values into the padding guard.
    pub fn build(
        medium: &MediumMap<T>,
        lattice: &LateralLattice<T>,
        z_start: T,
        dz: T,
        n_steps: usize,
    ) -> Result<Self> {
        if !(dz.is_finite() && dz > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "slab thickness must be finite and positive, got {dz}"
            )));
        }
        let half = cast::<T>(0.5);
        let c0 = medium.c0();
        let inv_c0 = T::one() / c0;
        let uniform = medium.is_uniform_reference();
        let n = lattice.len();
        let mut rows = Vec::with_capacity(n_steps);
        for m in 0..n_steps {
            if uniform {
                rows.push(None);
                continue;
            }
            let z_mid = z_start + (cast::<T>(m as f64) + half) * dz;
            let mut inv_c = vec![inv_c0; n];
            let mut heterogeneous = false;
            for (i, slot) in inv_c.iter_mut().enumerate() {
                let c = medium.sample_c(lattice.x(i), z_mid);
                if c != c0 {
                    *slot = T::one() / c;
                    heterogeneous = true;
                }
            }
            if !heterogeneous {
                rows.push(None);
                continue;
            }
            let lambda_unit: Vec<T> =
                inv_c.iter().map(|&ic| inv_c0 * inv_c0 - ic * ic).collect();
            let sum: T = inv_c.iter().copied().sum();
            let mean_slowness = sum / cast::<T>(n as f64);
            rows.push(Some(ProfileRow { inv_c, lambda_unit, mean_slowness }));
        }
        Ok(Self { dz, rows })
    }

    pub fn dz(&self) -> T {
        self.dz
    }

    pub fn n_steps(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, m: usize) -> Option<&ProfileRow<T>> {
        self.rows[m].as_ref()
    }
}

// ---------------------------------------------------------------------------
// Depth marcher
// ---------------------------------------------------------------------------

/// Stateful slab-by-slab depth marcher for one temporal frequency.
///
/// Keeps the spatial-frequency spectrum and the spatial row synchronised after
/// every step, reusing FFT plans and transfer tables. Heterogeneity is sampled
/// from the medium at each slab's midpoint depth across the whole lattice (or
/// taken from a shared [`DepthProfiles`] cache); edge-clamped sampling extends
/// the medium's boundary values into the padding guard.
pub struct Marcher<'m, T: Scalar> {
    medium: &'m MediumMap<T>,
    kernel: PropagationKernel,
    direction: Direction,
    lattice: LateralLattice<T>,
    kx: Vec<T>,
    fft: FftPair<T>,
    omega: T,
    dz: T,
    h: Vec<Complex<T>>,
    h_var: Vec<Complex<T>>,
    s_var: Vec<Complex<T>>,
    /// Squared wavenumber the variable transfer tables were built for; NaN
    /// until the first heterogeneous slab. Layered media rebuild the tables
    /// only when the slab speed actually changes.
    var_k2: T,
    spectrum: Vec<Complex<T>>,
    row: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
    lam: Vec<T>,
    inv_c: Vec<T>,
    z: T,
    uniform: bool,
}

impl<'m, T: Scalar> Marcher<'m, T> {
    /// Starts a march from `initial` with step `dz`, refusing steps above the
    /// quarter-wavelength limit of the slowest speed the kernel can encounter.
    pub fn new(
        initial: &SpectralField<T>,
        medium: &'m MediumMap<T>,
        kernel: PropagationKernel,
        direction: Direction,
        dz: T,
    ) -> Result<Self> {
        if !(dz.is_finite() && dz > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "marching step must be finite and positive, got {dz}"
            )));
        }
        let omega = initial.omega();
        let c_min = match kernel {
            PropagationKernel::Asm => medium.c0(),
            _ => medium.c_min(),
        };
        let limit = quarter_wave_limit(omega, c_min);
        if dz > limit {
            return Err(Error::StepTooLarge {
                dz_m: dz.to_f64(),
                limit_m: limit.to_f64(),
            });
        }
        let lattice = initial.lattice().clone();
        let n = lattice.len();
        let fft = FftPair::new(n);
        let kx = lattice.kx();
        let h = homogeneous_transfer(&kx, omega, medium.c0(), dz, direction);
        let mut spectrum = initial.values().to_vec();
        if initial.repr() == Representation::Space {
            fft.forward(&mut spectrum);
        }
        let mut row = spectrum.clone();
        fft.inverse(&mut row);
        let uniform = medium.is_uniform_reference();
        Ok(Self {
            medium,
            kernel,
            direction,
            lattice,
            kx,
            fft,
            omega,
            dz,
            h,
            h_var: vec![Complex::new(T::zero(), T::zero()); n],
            s_var: vec![Complex::new(T::zero(), T::zero()); n],
            var_k2: T::nan(),
            spectrum,
            row,
            scratch: vec![Complex::new(T::zero(), T::zero()); n],
            lam: vec![T::zero(); n],
            inv_c: vec![T::zero(); n],
            z: initial.z(),
            uniform,
        })
    }

    /// Current depth (m).
    pub fn z(&self) -> T {
        self.z
    }

    /// Spatial field samples at the current depth, on the lattice.
    pub fn row(&self) -> &[Complex<T>] {
        &self.row
    }

    /// Spatial-frequency spectrum at the current depth.
    pub fn spectrum(&self) -> &[Complex<T>] {
        &self.spectrum
    }

    pub fn lattice(&self) -> &LateralLattice<T> {
        &self.lattice
    }

    /// Samples the slab slowness profile at the given midpoint depth.
    ///
    /// The whole lattice is sampled; edge-clamped interpolation extends the
    /// medium's boundary values into the padding guard, so laterally uniform
    /// slabs stay uniform across the lattice instead of acquiring an
    /// artificial contrast step at the window edge.
    fn sample_row(&mut self, z_mid: T) -> bool {
        let c0 = self.medium.c0();
        let inv_c0 = T::one() / c0;
        let mut heterogeneous = false;
        for i in 0..self.lattice.len() {
            self.inv_c[i] = if self.uniform {
                inv_c0
            } else {
                let c = self.medium.sample_c(self.lattice.x(i), z_mid);
                if c != c0 {
                    heterogeneous = true;
                    T::one() / c
                } else {
                    inv_c0
                }
            };
        }
        heterogeneous
    }

    /// Homogeneous transfer and row sync.
    fn apply_homogeneous(&mut self) {
        for (v, t) in self.spectrum.iter_mut().zip(self.h.iter()) {
            *v *= *t;
        }
        self.row.copy_from_slice(&self.spectrum);
        self.fft.inverse(&mut self.row);
    }

    /// Heterogeneous step using the pre-filled `self.lam` source row; see
    /// [`hasm_step`] for the scheme.
    fn apply_hasm(&mut self) {
        let first = self.lam[0];
        let uniform = self.lam.iter().all(|&l| l == first);
        let lambda_mean = if uniform {
            first
        } else {
            let sum: T = self.lam.iter().copied().sum();
            sum / cast::<T>(self.lam.len() as f64)
        };
        let k = self.omega / self.medium.c0();
        let k2_bar = k * k - lambda_mean;
        if self.var_k2 != k2_bar {
            transfer_from_k2_into(&self.kx, k2_bar, self.dz, self.direction, &mut self.h_var);
            scattering_transfer_into(&self.kx, k2_bar, self.dz, self.direction, &mut self.s_var);
            self.var_k2 = k2_bar;
        }
        if uniform {
            for (v, t) in self.spectrum.iter_mut().zip(self.h_var.iter()) {
                *v *= *t;
            }
        } else {
            // Residual scattering term via the convolution theorem: the
            // current spatial row is the field at the slab entry.
            for ((q, r), &l) in self.scratch.iter_mut().zip(self.row.iter()).zip(self.lam.iter()) {
                *q = r.scale(l - lambda_mean);
            }
            self.fft.forward(&mut self.scratch);
            for ((v, t), (sc, qv)) in self
                .spectrum
                .iter_mut()
                .zip(self.h_var.iter())
                .zip(self.s_var.iter().zip(self.scratch.iter()))
            {
                *v = *v * *t + *sc * *qv;
            }
        }
        self.row.copy_from_slice(&self.spectrum);
        self.fft.inverse(&mut self.row);
    }

    /// Split step using the pre-filled `self.inv_c` slowness row.
    fn apply_split(&mut self, mean_slowness: T) {
        let c_bar = T::one() / mean_slowness;
        homogeneous_transfer_into(
            &self.kx,
            self.omega,
            c_bar,
            self.dz,
            self.direction,
            &mut self.h_var,
        );
        for (v, t) in self.spectrum.iter_mut().zip(self.h_var.iter()) {
            *v *= *t;
        }
        self.row.copy_from_slice(&self.spectrum);
        self.fft.inverse(&mut self.row);
        let sign = self.direction.phase_sign::<T>();
        for (v, &ic) in self.row.iter_mut().zip(self.inv_c.iter()) {
            let k_res = self.omega * (ic - mean_slowness);
            *v *= Complex::from_polar(T::one(), sign * k_res * self.dz);
        }
        self.spectrum.copy_from_slice(&self.row);
        self.fft.forward(&mut self.spectrum);
    }

    /// Advances one slab, sampling the medium at the slab midpoint.
    pub fn step(&mut self) {
        let half = cast::<T>(0.5);
        let z_mid = self.z + half * self.dz;
        match self.kernel {
            PropagationKernel::Asm => self.apply_homogeneous(),
            PropagationKernel::Hasm => {
                if self.sample_row(z_mid) {
                    let w2 = self.omega * self.omega;
                    let inv_c0 = T::one() / self.medium.c0();
                    for (l, &ic) in self.lam.iter_mut().zip(self.inv_c.iter()) {
                        *l = w2 * (inv_c0 * inv_c0 - ic * ic);
                    }
                    self.apply_hasm();
                } else {
                    self.apply_homogeneous();
                }
            }
            PropagationKernel::SplitStep => {
                self.sample_row(z_mid);
                let sum: T = self.inv_c.iter().copied().sum();
                let mean = sum / cast::<T>(self.inv_c.len() as f64);
                self.apply_split(mean);
            }
        }
        self.z = self.z + self.dz;
    }

    /// Advances one slab using a cached profile row (`None` = uniform slab).
    pub fn step_cached(&mut self, profile: Option<&ProfileRow<T>>) {
        match (self.kernel, profile) {
            (PropagationKernel::Asm, _) | (_, None) => self.apply_homogeneous(),
            (PropagationKernel::Hasm, Some(r)) => {
                debug_assert_eq!(r.lambda_unit.len(), self.lam.len());
                let w2 = self.omega * self.omega;
                for (l, &u) in self.lam.iter_mut().zip(r.lambda_unit.iter()) {
                    *l = w2 * u;
                }
                self.apply_hasm();
            }
            (PropagationKernel::SplitStep, Some(r)) => {
                debug_assert_eq!(r.inv_c.len(), self.inv_c.len());
                self.inv_c.copy_from_slice(&r.inv_c);
                self.apply_split(r.mean_slowness);
            }
        }
        self.z = self.z + self.dz;
    }
}

/// Marches `initial` through `medium` and records the spatial field on every
/// depth row of `record_grid` (marching step = `record_grid.dz()`).
///
/// The first recorded row must lie an integer number of steps below the
/// initial plane; the medium must cover the record grid; the record grid's
/// lateral extent must lie inside the field lattice.
pub fn march_field<T: Scalar>(
    initial: &SpectralField<T>,
    medium: &MediumMap<T>,
    kernel: PropagationKernel,
    direction: Direction,
    record_grid: &ImagingGrid<T>,
) -> Result<Array2<Complex<T>>> {
    if !medium.grid().covers(record_grid) {
        return Err(Error::InvalidParameter(
            "medium map does not cover the record grid".into(),
        ));
    }
    let dz = record_grid.dz();
    let offset = ((record_grid.z0() - initial.z()) / dz).to_f64();
    let n_pre = offset.round();
    if n_pre < 0.0 || (offset - n_pre).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "first record depth must be a whole number of steps below the source plane \
             (offset = {offset:.6} steps)"
        )));
    }
    let resample = LinearResample::new(initial.lattice(), &record_grid.xs())?;
    let mut marcher = Marcher::new(initial, medium, kernel, direction, dz)?;
    for _ in 0..n_pre as usize {
        marcher.step();
    }
    let mut out = Array2::from_elem(
        (record_grid.nz(), record_grid.nx()),
        Complex::new(T::zero(), T::zero()),
    );
    for j in 0..record_grid.nz() {
        if j > 0 {
            marcher.step();
        }
        let mut row = out.row_mut(j);
        resample.apply(marcher.row(), row.as_slice_mut().expect("contiguous row"));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Aperture-integral reference
// ---------------------------------------------------------------------------

/// Direct aperture projection used as an independent validation reference.
///
/// Each element is treated as a 2-D line source with the outgoing large-argument
/// cylindrical kernel `exp(i (k r + pi/4)) / sqrt(r)` (phase constant `+pi/4`
/// from the asymptotic Hankel form) and overall prefactor
/// `-i omega rho0 / (2 pi) * pitch`, mapping element normal velocities to
/// pressure at the target points.
pub fn rayleigh_project<T: Scalar>(
    velocity: &[Complex<T>],
    array: &ArrayGeometry<T>,
    targets: &[(T, T)],
    omega: T,
    c0: T,
    rho0: T,
) -> Result<Vec<Complex<T>>> {
    if velocity.len() != array.n_elements() {
        return Err(Error::DimensionMismatch(format!(
            "velocity vector has {} entries, array has {} elements",
            velocity.len(),
            array.n_elements()
        )));
    }
    if !(omega.is_finite() && omega > T::zero()) || !(c0.is_finite() && c0 > T::zero()) {
        return Err(Error::InvalidParameter(
            "frequency and speed must be finite and positive".into(),
        ));
    }
    if !(rho0.is_finite() && rho0 > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "density must be finite and positive, got {rho0}"
        )));
    }
    let k = omega / c0;
    let quarter_pi = T::FRAC_PI_4();
    // -i omega rho0 / (2 pi) * pitch
    let prefactor = Complex::new(T::zero(), -omega * rho0 / (cast::<T>(2.0) * T::PI()))
        .scale(array.pitch());
    let mut out = Vec::with_capacity(targets.len());
    for &(x, z) in targets {
        if z < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "target depth must be non-negative, got {z}"
            )));
        }
        let mut acc = Complex::new(T::zero(), T::zero());
        for (e, v) in velocity.iter().enumerate() {
            let dx = x - array.element_x(e);
            let r = (dx * dx + z * z).sqrt();
            if r == T::zero() {
                return Err(Error::Singularity(
                    "aperture projection evaluated at an element position".into(),
                ));
            }
            acc += *v * Complex::from_polar(T::one() / r.sqrt(), k * r + quarter_pi);
        }
        out.push(acc * prefactor);
    }
    Ok(out)
}
