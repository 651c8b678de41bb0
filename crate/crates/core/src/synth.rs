//! Desk-scale synthetic acquisitions: parametric phantoms and a straight-ray
//! Born echo synthesiser.
//!
//! The synthesiser treats every scatterer as an independent point reflector:
//! the transmit leg follows the plane-wave steering direction from the array
//! face to the scatterer, the receive leg is the straight segment back to each
//! element, and travel times integrate the phantom's slowness along those
//! segments. Amplitudes follow 2-D cylindrical spreading, `1/sqrt(r)` per leg.
//! No multiple scattering, refraction, or attenuation is modelled; the point
//! is repeatable data whose arrival times carry exactly the medium's lateral
//! speed structure.

use crate::beamform::ChannelData;
use crate::error::{Error, Result};
use crate::grid::{ArrayGeometry, ImagingGrid, TransmitEvent};
use crate::medium::MediumMap;
use crate::pulse::Pulse;
use crate::scalar::{cast, Scalar};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Acoustic bulk properties of one tissue type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material<T: Scalar> {
    /// Sound speed (m/s).
    pub c: T,
    /// Density (kg/m^3).
    pub rho: T,
}

impl<T: Scalar> Material<T> {
    pub fn new(c: T, rho: T) -> Result<Self> {
        if !(c.is_finite() && c > T::zero()) || !(rho.is_finite() && rho > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "material properties must be finite and positive, got c={c}, rho={rho}"
            )));
        }
        Ok(Self { c, rho })
    }

    pub fn liver() -> Self {
        Self { c: cast(1560.0), rho: cast(1070.0) }
    }

    pub fn muscle() -> Self {
        Self { c: cast(1590.0), rho: cast(1050.0) }
    }

    pub fn fat() -> Self {
        Self { c: cast(1440.0), rho: cast(900.0) }
    }

    pub fn blood() -> Self {
        Self { c: cast(1580.0), rho: cast(1000.0) }
    }

    pub fn water() -> Self {
        Self { c: cast(1540.0), rho: cast(1000.0) }
    }
}

/// Horizontal layer `z_top <= z < z_bottom` of a different material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab<T: Scalar> {
    pub z_top: T,
    pub z_bottom: T,
    pub material: Material<T>,
    /// Speckle amplitude scale inside the layer (1 = background strength).
    pub echogenicity: T,
}

/// Circular inclusion of a different material and/or speckle strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lesion<T: Scalar> {
    pub x: T,
    pub z: T,
    pub radius: T,
    pub material: Material<T>,
    /// Speckle amplitude scale inside (0 = anechoic).
    pub echogenicity: T,
}

/// Isolated strong point reflector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pin<T: Scalar> {
    pub x: T,
    pub z: T,
    pub reflectivity: T,
}

/// Parametric phantom description.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec<T: Scalar> {
    pub background: Material<T>,
    /// Diffuse scatterer density (per cm^2 of imaged area). Zero disables
    /// speckle.
    pub speckle_per_cm2: T,
    /// Relative half-range of multiplicative property jitter (0 = none).
    /// Each region — the background, each slab, each lesion — draws one
    /// jittered (speed, density) pair per realisation, so regions stay
    /// internally uniform and layered scenes stay laterally uniform.
    pub jitter_fraction: T,
    /// Layers override the background; later entries win where they overlap.
    pub slabs: Vec<Slab<T>>,
    /// Lesions override layers and background; later entries win.
    pub lesions: Vec<Lesion<T>>,
    pub pins: Vec<Pin<T>>,
    pub seed: u64,
}

impl<T: Scalar> PhantomSpec<T> {
    /// Uniform background with nothing in it.
    pub fn plain(background: Material<T>, seed: u64) -> Self {
        Self {
            background,
            speckle_per_cm2: T::zero(),
            jitter_fraction: T::zero(),
            slabs: Vec::new(),
            lesions: Vec::new(),
            pins: Vec::new(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.speckle_per_cm2.is_finite() && self.speckle_per_cm2 >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "speckle density must be finite and non-negative, got {}",
                self.speckle_per_cm2
            )));
        }
        if !(self.jitter_fraction.is_finite()
            && self.jitter_fraction >= T::zero()
            && self.jitter_fraction < T::one())
        {
            return Err(Error::InvalidParameter(format!(
                "jitter fraction must lie in [0, 1), got {}",
                self.jitter_fraction
            )));
        }
        for s in &self.slabs {
            if !(s.z_top.is_finite() && s.z_bottom.is_finite() && s.z_top < s.z_bottom) {
                return Err(Error::InvalidParameter(
                    "slab must have z_top < z_bottom".into(),
                ));
            }
            Material::new(s.material.c, s.material.rho)?;
        }
        for l in &self.lesions {
            if !(l.radius.is_finite() && l.radius > T::zero()) {
                return Err(Error::InvalidParameter(
                    "lesion radius must be finite and positive".into(),
                ));
            }
            Material::new(l.material.c, l.material.rho)?;
        }
        Material::new(self.background.c, self.background.rho)?;
        Ok(())
    }

    /// Material at a point, honouring the override order
    /// lesion > slab > background (later entries win within each class).
    pub fn material_at(&self, x: T, z: T) -> Material<T> {
        for l in self.lesions.iter().rev() {
            let (dx, dz) = (x - l.x, z - l.z);
            if dx * dx + dz * dz <= l.radius * l.radius {
                return l.material;
            }
        }
        for s in self.slabs.iter().rev() {
            if z >= s.z_top && z < s.z_bottom {
                return s.material;
            }
        }
        self.background
    }

    /// Speckle amplitude scale at a point (same override order).
    fn echogenicity_at(&self, x: T, z: T) -> T {
        for l in self.lesions.iter().rev() {
            let (dx, dz) = (x - l.x, z - l.z);
            if dx * dx + dz * dz <= l.radius * l.radius {
                return l.echogenicity;
            }
        }
        for s in self.slabs.iter().rev() {
            if z >= s.z_top && z < s.z_bottom {
                return s.echogenicity;
            }
        }
        T::one()
    }
}

/// One point scatterer of the realised phantom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer<T: Scalar> {
    pub x: T,
    pub z: T,
    pub reflectivity: T,
}

/// A realised phantom: the speed/density map plus the scatterer population.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom<T: Scalar> {
    pub medium: MediumMap<T>,
    pub scatterers: Vec<Scatterer<T>>,
}

fn jittered_material<T: Scalar>(
    rng: &mut ChaCha8Rng,
    fraction: T,
    m: Material<T>,
) -> Material<T> {
    if fraction > T::zero() {
        let uc: f64 = rng.gen_range(-1.0..1.0);
        let ur: f64 = rng.gen_range(-1.0..1.0);
        Material {
            c: m.c * (T::one() + fraction * cast(uc)),
            rho: m.rho * (T::one() + fraction * cast(ur)),
        }
    } else {
        m
    }
}

/// Realises a phantom on `grid`. The reference speed stays the nominal
/// background speed; property jitter is drawn once per region and both jitter
/// and speckle come from one seeded generator, so equal specs and grids give
/// bit-identical phantoms.
pub fn build_phantom<T: Scalar>(
    spec: &PhantomSpec<T>,
    grid: &ImagingGrid<T>,
) -> Result<Phantom<T>> {
    spec.validate()?;
    for s in &spec.slabs {
        if s.z_bottom - s.z_top < grid.dz() {
            return Err(Error::InvalidParameter(format!(
                "slab [{}, {}] m is thinner than one grid cell ({} m)",
                s.z_top,
                s.z_bottom,
                grid.dz()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut realised = spec.clone();
    realised.background = jittered_material(&mut rng, spec.jitter_fraction, spec.background);
    for s in &mut realised.slabs {
        s.material = jittered_material(&mut rng, spec.jitter_fraction, s.material);
    }
    for l in &mut realised.lesions {
        l.material = jittered_material(&mut rng, spec.jitter_fraction, l.material);
    }
    let (nz, nx) = (grid.nz(), grid.nx());
    let mut c = ndarray::Array2::zeros((nz, nx));
    let mut rho = ndarray::Array2::zeros((nz, nx));
    for j in 0..nz {
        let z = grid.z(j);
        for i in 0..nx {
            let m = realised.material_at(grid.x(i), z);
            c[(j, i)] = m.c;
            rho[(j, i)] = m.rho;
        }
    }
    let medium = MediumMap::new(grid.clone(), c, spec.background.c)?
        .with_density(rho, spec.background.rho)?;

    let mut scatterers = Vec::new();
    if spec.speckle_per_cm2 > T::zero() {
        let width = (grid.x_end() - grid.x0()).to_f64();
        let depth = (grid.z_end() - grid.z0()).to_f64();
        let area_cm2 = width * depth * 1e4;
        let n = (spec.speckle_per_cm2.to_f64() * area_cm2).round() as usize;
        for _ in 0..n {
            let x = grid.x0() + cast::<T>(rng.gen_range(0.0..1.0)) * (grid.x_end() - grid.x0());
            let z = grid.z0() + cast::<T>(rng.gen_range(0.0..1.0)) * (grid.z_end() - grid.z0());
            let amp: f64 = StandardNormal.sample(&mut rng);
            let r = cast::<T>(amp) * spec.echogenicity_at(x, z);
            if r != T::zero() {
                scatterers.push(Scatterer { x, z, reflectivity: r });
            }
        }
    }
    for p in &spec.pins {
        scatterers.push(Scatterer { x: p.x, z: p.z, reflectivity: p.reflectivity });
    }
    Ok(Phantom { medium, scatterers })
}

/// Regular grid of equal pins, handy for resolution scenes.
pub fn pin_grid<T: Scalar>(
    xs: &[T],
    zs: &[T],
    reflectivity: T,
) -> Vec<Pin<T>> {
    let mut pins = Vec::with_capacity(xs.len() * zs.len());
    for &z in zs {
        for &x in xs {
            pins.push(Pin { x, z, reflectivity });
        }
    }
    pins
}

/// Straight-ray travel-time evaluator over one medium.
///
/// Uniform maps reduce to `length / c0`. Laterally uniform (layered) maps use
/// a precomputed cumulative slowness table: the depth-interpolated speed is
/// piecewise linear, so each cell integrates in closed form and a ray costs
/// two table lookups. Anything else falls back to trapezoid integration of
/// the sampled slowness at steps no longer than half the depth spacing.
pub struct RayIntegrator<'m, T: Scalar> {
    medium: &'m MediumMap<T>,
    kind: RayKind<T>,
}

enum RayKind<T> {
    Uniform,
    /// Cumulative travel time from the grid top to each node row.
    Layered(Vec<T>),
    General,
}

impl<'m, T: Scalar> RayIntegrator<'m, T> {
    pub fn new(medium: &'m MediumMap<T>) -> Self {
        let kind = if medium.is_uniform_reference() {
            RayKind::Uniform
        } else if Self::is_layered(medium) {
            RayKind::Layered(Self::cumulative_time(medium))
        } else {
            RayKind::General
        };
        Self { medium, kind }
    }

    fn is_layered(medium: &MediumMap<T>) -> bool {
        let c = medium.c();
        let (nz, nx) = c.dim();
        (0..nz).all(|j| (1..nx).all(|i| c[(j, i)] == c[(j, 0)]))
    }

    /// `cum[j]`: travel time of a vertical ray from the first node row to row
    /// `j`, integrating the linear speed interpolation exactly
    /// (`int dz / c = dz ln(c1/c0) / (c1 - c0)` per cell).
    fn cumulative_time(medium: &MediumMap<T>) -> Vec<T> {
        let g = medium.grid();
        let c = medium.c();
        let mut cum = Vec::with_capacity(g.nz());
        cum.push(T::zero());
        for j in 1..g.nz() {
            let (a, b) = (c[(j - 1, 0)], c[(j, 0)]);
            cum.push(cum[j - 1] + linear_cell_time(a, b, g.dz()));
        }
        cum
    }

    /// Cumulative vertical travel time from the grid top to depth `z`,
    /// extended with the edge slowness outside the grid (mirroring the
    /// clamped sampling of the general path).
    fn layered_cumulative(&self, cum: &[T], z: T) -> T {
        let g = self.medium.grid();
        let c = self.medium.c();
        let nz = g.nz();
        if z <= g.z0() {
            return (z - g.z0()) / c[(0, 0)];
        }
        if z >= g.z_end() {
            return cum[nz - 1] + (z - g.z_end()) / c[(nz - 1, 0)];
        }
        let pos = ((z - g.z0()) / g.dz()).to_f64();
        let j = (pos.floor() as usize).min(nz - 2);
        let frac = cast::<T>(pos - j as f64);
        let (a, b) = (c[(j, 0)], c[(j + 1, 0)]);
        let cz = a + (b - a) * frac;
        cum[j] + linear_cell_time(a, cz, frac * g.dz())
    }

    /// Travel time along the straight segment from `(x0, z0)` to `(x1, z1)`.
    pub fn time(&self, x0: T, z0: T, x1: T, z1: T) -> T {
        let (dx, dz) = (x1 - x0, z1 - z0);
        let length = (dx * dx + dz * dz).sqrt();
        if length == T::zero() {
            return T::zero();
        }
        match &self.kind {
            RayKind::Uniform => length / self.medium.c0(),
            RayKind::Layered(cum) => {
                if dz == T::zero() {
                    return length / self.medium.sample_c(x0, z0);
                }
                let (lo, hi) = if z0 < z1 { (z0, z1) } else { (z1, z0) };
                let dt = self.layered_cumulative(cum, hi) - self.layered_cumulative(cum, lo);
                length * dt / (hi - lo)
            }
            RayKind::General => {
                let step = self.medium.grid().dz() / cast::<T>(2.0);
                let n = (length / step).to_f64().ceil().max(1.0) as usize;
                let h = length / cast::<T>(n as f64);
                let mut sum = T::zero();
                for k in 0..=n {
                    let f = cast::<T>(k as f64 / n as f64);
                    let s = T::one() / self.medium.sample_c(x0 + dx * f, z0 + dz * f);
                    let w = if k == 0 || k == n { cast::<T>(0.5) } else { T::one() };
                    sum = sum + s * w;
                }
                sum * h
            }
        }
    }
}

/// `int_0^dz dz' / c(z')` for `c` linear from `a` to `b` over `dz`.
fn linear_cell_time<T: Scalar>(a: T, b: T, dz: T) -> T {
    if (b - a).abs() < a * cast::<T>(1e-12) {
        dz / a
    } else {
        dz * (b / a).ln() / (b - a)
    }
}

/// One-off travel time along a straight segment (see [`RayIntegrator`]).
pub fn ray_time<T: Scalar>(medium: &MediumMap<T>, x0: T, z0: T, x1: T, z1: T) -> T {
    RayIntegrator::new(medium).time(x0, z0, x1, z1)
}

/// Hard-baffle directivity of a flat strip element: the aperture sinc times
/// the obliquity cosine, evaluated at `s = sin(angle from the element
/// normal)` for an element of `w_over_lambda` wavelengths width.
fn element_directivity<T: Scalar>(s: T, w_over_lambda: T) -> T {
    let c2 = T::one() - s * s;
    if c2 <= T::zero() {
        return T::zero();
    }
    let arg = T::PI() * w_over_lambda * s;
    let sinc = if arg.abs() < cast::<T>(1e-6) {
        T::one()
    } else {
        arg.sin() / arg
    };
    c2.sqrt() * sinc
}

/// Synthesises element traces for every transmit event.
///
/// `fs` is the sampling rate, `t0` the first-sample time, and `duration` the
/// trace length (s); the trace must cover the deepest two-way arrival plus
/// one pulse. Scatterers outside the medium extent (or at or above the array
/// plane) are skipped and counted in the returned channel data.
///
/// Elements are modelled as pitch-wide strips in a hard baffle: the
/// transmitted plane wave is weighted by the strip directivity at its
/// steering angle, and each receive path by the directivity at its arrival
/// angle, both at the pulse centre frequency.
pub fn simulate_rf<T: Scalar>(
    phantom: &Phantom<T>,
    array: &ArrayGeometry<T>,
    events: &[TransmitEvent<T>],
    fs: T,
    t0: T,
    duration: T,
) -> Result<ChannelData<T>> {
    if events.is_empty() {
        return Err(Error::InvalidParameter("no transmit events".into()));
    }
    if !(fs.is_finite() && fs > T::zero()) || !(duration.is_finite() && duration > T::zero()) {
        return Err(Error::InvalidParameter(
            "sampling rate and duration must be finite and positive".into(),
        ));
    }
    let medium = &phantom.medium;
    let grid = medium.grid();
    let n_el = array.n_elements();
    let n_time = (duration * fs).to_f64().ceil() as usize;
    if n_time < 2 {
        return Err(Error::InvalidParameter(
            "duration shorter than two samples".into(),
        ));
    }

    let mut kept = Vec::with_capacity(phantom.scatterers.len());
    let mut rejected = 0usize;
    for s in &phantom.scatterers {
        if s.z > T::zero() && grid.contains(s.x, s.z) {
            kept.push(*s);
        } else {
            rejected += 1;
        }
    }

    // Coverage check: deepest scatterer, farthest element, straight rays at
    // the slowest speed present.
    if let Some(worst) = kept
        .iter()
        .map(|s| {
            let r_tx = s.z.to_f64();
            let r_rx = (0..n_el)
                .map(|e| {
                    let dx = (s.x - array.element_x(e)).to_f64();
                    (dx * dx + (s.z * s.z).to_f64()).sqrt()
                })
                .fold(0.0f64, f64::max);
            r_tx + r_rx
        })
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    {
        let max_delay = events
            .iter()
            .flat_map(|e| e.delays.iter())
            .fold(T::zero(), |a, &d| a.max(d))
            .to_f64();
        let pulse_len = events
            .iter()
            .map(|e| e.pulse_cycles as f64 / e.pulse_center_frequency.to_f64())
            .fold(0.0, f64::max);
        let need = worst / medium.c_min().to_f64() + max_delay + pulse_len;
        if need > t0.to_f64() + duration.to_f64() {
            return Err(Error::InvalidParameter(format!(
                "trace of {:.2} us cannot hold the deepest arrival at {:.2} us",
                duration.to_f64() * 1e6,
                need * 1e6
            )));
        }
    }

    let rays = RayIntegrator::new(medium);
    let mut samples = Array3::zeros((events.len(), n_el, n_time));
    for (t_idx, event) in events.iter().enumerate() {
        let pulse = Pulse::new(event.pulse_center_frequency, event.pulse_cycles)?;
        let pulse_len = pulse.duration();
        let theta = event.steering_angle;
        let (sin_t, cos_t) = (theta.sin(), theta.cos());
        let r_floor = medium.c0() / event.pulse_center_frequency;
        let w_over_lambda = array.pitch() / r_floor;
        let d_tx = element_directivity(sin_t, w_over_lambda);

        // Transmit leg per scatterer: entry point of the steered ray on the
        // array plane, launch delay there, then the in-medium travel time.
        let tx_leg: Vec<(T, T)> = kept
            .iter()
            .map(|s| {
                let x_entry = s.x - s.z * sin_t / cos_t;
                let tau = event.delay_at(array, x_entry)
                    + rays.time(x_entry, T::zero(), s.x, s.z);
                let r_tx = s.z / cos_t;
                (tau, r_tx)
            })
            .collect();

        let traces: Vec<Vec<T>> = (0..n_el)
            .into_par_iter()
            .map(|e| {
                let xe = array.element_x(e);
                let mut trace = vec![T::zero(); n_time];
                for (s, &(tau_tx, r_tx)) in kept.iter().zip(&tx_leg) {
                    let dxe = s.x - xe;
                    let r_rx = (dxe * dxe + s.z * s.z).sqrt();
                    let tau = tau_tx + rays.time(s.x, s.z, xe, T::zero());
                    let d_rx = element_directivity(dxe / r_rx, w_over_lambda);
                    let amp = s.reflectivity * d_tx * d_rx
                        / (r_tx.max(r_floor) * r_rx.max(r_floor)).sqrt();
                    let first = ((tau - t0) * fs).to_f64().ceil().max(0.0) as usize;
                    let last_t = tau + pulse_len;
                    let last = (((last_t - t0) * fs).to_f64().floor() as isize)
                        .min(n_time as isize - 1);
                    let mut n = first as isize;
                    while n <= last {
                        let tn = t0 + cast::<T>(n as f64) / fs;
                        trace[n as usize] =
                            trace[n as usize] + amp * pulse.sample(tn - tau);
                        n += 1;
                    }
                }
                trace
            })
            .collect();
        for (e, trace) in traces.into_iter().enumerate() {
            for (n, &v) in trace.iter().enumerate() {
                samples[(t_idx, e, n)] = v;
            }
        }
    }

    ChannelData::new(
        array.clone(),
        events.to_vec(),
        samples,
        fs,
        t0,
        rejected,
    )
}
