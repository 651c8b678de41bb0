//! Objective image-quality metrics: lateral width of a point response,
//! histogram-overlap lesion contrast, and a gradient sharpness index.

use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::scalar::{cast, Scalar};
use serde::{Deserialize, Serialize};

/// Number of shared histogram bins used by the contrast metric.
const GCNR_BINS: usize = 256;

/// Fewest pixels per region for a meaningful histogram.
const MIN_REGION_PIXELS: usize = 100;

/// Floor applied to the log view inside the sharpness metric (dB).
const SHARPNESS_DB_FLOOR: f64 = -120.0;

/// Rectangular region of the imaging plane, in metres (inclusive bounds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x_min: T,
    pub x_max: T,
    pub z_min: T,
    pub z_max: T,
}

/// Pixel-selection region for the contrast metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Region<T> {
    Rect(Rect<T>),
    Circle { x: T, z: T, radius: T },
    /// Ring between the two radii (inner exclusive, outer inclusive).
    Annulus { x: T, z: T, inner: T, outer: T },
}

impl<T: Scalar> Region<T> {
    pub fn contains(&self, x: T, z: T) -> bool {
        match *self {
            Region::Rect(r) => {
                x >= r.x_min && x <= r.x_max && z >= r.z_min && z <= r.z_max
            }
            Region::Circle { x: cx, z: cz, radius } => {
                let (dx, dz) = (x - cx, z - cz);
                dx * dx + dz * dz <= radius * radius
            }
            Region::Annulus { x: cx, z: cz, inner, outer } => {
                let (dx, dz) = (x - cx, z - cz);
                let d2 = dx * dx + dz * dz;
                d2 > inner * inner && d2 <= outer * outer
            }
        }
    }
}

/// How sample values enter the contrast histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GcnrMode {
    /// Histogram the intensities directly.
    Linear,
    /// Histogram pooled ranks instead of values, making the result invariant
    /// to any strictly monotone remapping of the intensities.
    RankBased,
}

/// Contrast result with a degeneracy flag for constant regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gcnr<T> {
    /// Generalised contrast-to-noise ratio in `[0, 1]`.
    pub value: T,
    /// True when the pooled samples had zero spread, making the histogram
    /// overlap (and hence the value) meaningless.
    pub degenerate: bool,
}

/// Lateral full width at half maximum of the brightest response inside
/// `window` (the whole image when `None`).
///
/// The peak pixel is located first; the metric then walks its image row
/// outward and linearly interpolates the half-maximum crossings on each side.
pub fn fwhm_lateral<T: Scalar>(
    image: &ImagePlane<T>,
    window: Option<Rect<T>>,
) -> Result<T> {
    let grid = image.grid();
    let inten = image.intensity();
    let (pi, pj) = brightest_pixel(image, &window)?;
    let peak = inten[(pj, pi)];
    let half = peak / cast::<T>(2.0);

    // Walk outward from the peak along its row to the first half crossings.
    let cross = |from: usize, step: isize| -> Result<T> {
        let mut i = from as isize;
        loop {
            let next = i + step;
            if next < 0 || next >= grid.nx() as isize {
                return Err(Error::UnresolvedTarget(
                    "half-maximum crossing leaves the image laterally".into(),
                ));
            }
            let a = inten[(pj, i as usize)];
            let b = inten[(pj, next as usize)];
            if b <= half {
                // Linear interpolation between samples i and next.
                let frac = (a - half) / (a - b);
                let x_a = grid.x(i as usize);
                let x_b = grid.x(next as usize);
                return Ok(x_a + (x_b - x_a) * frac);
            }
            i = next;
        }
    };
    let left = cross(pi, -1)?;
    let right = cross(pi, 1)?;
    let width = right - left;
    if width < grid.dx() {
        return Err(Error::Resolution(format!(
            "half width {width} below one pixel {}",
            grid.dx()
        )));
    }
    Ok(width)
}

fn brightest_pixel<T: Scalar>(
    image: &ImagePlane<T>,
    window: &Option<Rect<T>>,
) -> Result<(usize, usize)> {
    let grid = image.grid();
    let inten = image.intensity();
    let inside = |i: usize, j: usize| match window {
        None => true,
        Some(w) => {
            let (x, z) = (grid.x(i), grid.z(j));
            x >= w.x_min && x <= w.x_max && z >= w.z_min && z <= w.z_max
        }
    };
    let mut peak = T::zero();
    let mut peak_ij: Option<(usize, usize)> = None;
    for j in 0..grid.nz() {
        for i in 0..grid.nx() {
            if inside(i, j) && inten[(j, i)] > peak {
                peak = inten[(j, i)];
                peak_ij = Some((i, j));
            }
        }
    }
    peak_ij.ok_or_else(|| {
        Error::UnresolvedTarget("no positive intensity inside the search window".into())
    })
}

/// Three-point parabola vertex offset from the centre sample, clamped to half
/// a pixel; zero when the samples are collinear.
fn parabolic_offset<T: Scalar>(a: T, b: T, c: T) -> T {
    let half = cast::<T>(0.5);
    let denom = (a - b - b + c) * cast::<T>(2.0);
    if denom == T::zero() {
        return T::zero();
    }
    let off = (a - c) / denom;
    if off > half {
        half
    } else if off < -half {
        -half
    } else {
        off
    }
}

/// Sub-pixel location of the brightest response inside `window` (the whole
/// image when `None`), refined by a separable three-point parabolic fit.
pub fn peak_position<T: Scalar>(
    image: &ImagePlane<T>,
    window: Option<Rect<T>>,
) -> Result<(T, T)> {
    let grid = image.grid();
    let inten = image.intensity();
    let (pi, pj) = brightest_pixel(image, &window)?;
    let mut x = grid.x(pi);
    let mut z = grid.z(pj);
    if pi > 0 && pi + 1 < grid.nx() {
        let off = parabolic_offset(inten[(pj, pi - 1)], inten[(pj, pi)], inten[(pj, pi + 1)]);
        x = x + off * grid.dx();
    }
    if pj > 0 && pj + 1 < grid.nz() {
        let off = parabolic_offset(inten[(pj - 1, pi)], inten[(pj, pi)], inten[(pj + 1, pi)]);
        z = z + off * grid.dz();
    }
    Ok((x, z))
}

/// Generalised contrast-to-noise ratio between two pixel regions:
/// `1 - sum_k min(h_in[k], h_out[k])` over a shared histogram.
///
/// Both regions need at least 100 pixels and must not overlap.
pub fn gcnr<T: Scalar>(
    image: &ImagePlane<T>,
    inside: &Region<T>,
    outside: &Region<T>,
    mode: GcnrMode,
) -> Result<Gcnr<T>> {
    let grid = image.grid();
    let inten = image.intensity();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut shared = 0usize;
    for j in 0..grid.nz() {
        let z = grid.z(j);
        for i in 0..grid.nx() {
            let x = grid.x(i);
            let in_a = inside.contains(x, z);
            let in_b = outside.contains(x, z);
            if in_a && in_b {
                shared += 1;
            } else if in_a {
                a.push(inten[(j, i)]);
            } else if in_b {
                b.push(inten[(j, i)]);
            }
        }
    }
    if shared > 0 {
        return Err(Error::InvalidParameter(format!(
            "contrast regions overlap on {shared} pixels"
        )));
    }
    for (name, v) in [("inside", &a), ("outside", &b)] {
        if v.len() < MIN_REGION_PIXELS {
            return Err(Error::Resolution(format!(
                "{name} region holds {} pixels, need at least {MIN_REGION_PIXELS}",
                v.len()
            )));
        }
    }
    Ok(gcnr_from_samples(&a, &b, mode))
}

/// Contrast between two explicit sample sets (the image-driven [`gcnr`]
/// reduces to this).
pub fn gcnr_from_samples<T: Scalar>(a: &[T], b: &[T], mode: GcnrMode) -> Gcnr<T> {
    match mode {
        GcnrMode::Linear => histogram_overlap(a, b),
        GcnrMode::RankBased => {
            let ranks = pooled_ranks(a, b);
            let (ra, rb) = ranks.split_at(a.len());
            histogram_overlap(ra, rb)
        }
    }
}

/// Average pooled ranks (ties share their mean rank), returned in input
/// order: `a`'s ranks first, then `b`'s.
fn pooled_ranks<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len() + b.len();
    let mut order: Vec<usize> = (0..n).collect();
    let value = |idx: usize| if idx < a.len() { a[idx] } else { b[idx - a.len()] };
    order.sort_by(|&p, &q| value(p).partial_cmp(&value(q)).expect("finite intensities"));
    let mut ranks = vec![T::zero(); n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && value(order[end]) == value(order[start]) {
            end += 1;
        }
        // Mean of ranks start..end (1-based).
        let mean = cast::<T>((start + end + 1) as f64 / 2.0);
        for &idx in &order[start..end] {
            ranks[idx] = mean;
        }
        start = end;
    }
    ranks
}

fn histogram_overlap<T: Scalar>(a: &[T], b: &[T]) -> Gcnr<T> {
    let mut lo = a[0];
    let mut hi = a[0];
    for &v in a.iter().chain(b.iter()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == lo {
        return Gcnr { value: T::zero(), degenerate: true };
    }
    let scale = cast::<T>(GCNR_BINS as f64) / (hi - lo);
    let fill = |v: &[T]| {
        let mut h = vec![0u64; GCNR_BINS];
        for &x in v {
            let bin = ((x - lo) * scale).to_f64() as usize;
            h[bin.min(GCNR_BINS - 1)] += 1;
        }
        h
    };
    let ha = fill(a);
    let hb = fill(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut overlap = 0.0;
    for k in 0..GCNR_BINS {
        overlap += (ha[k] as f64 / na).min(hb[k] as f64 / nb);
    }
    Gcnr { value: cast(1.0 - overlap), degenerate: false }
}

/// Mean absolute lateral+axial gradient of the log-compressed view, over the
/// central 90% of the image, scaled by 100.
///
/// The log view is `20 log10(I / max)` floored at -120 dB, so the index is
/// dynamic-range independent; sharper edges and tighter speckle raise it.
pub fn sharpness<T: Scalar>(image: &ImagePlane<T>) -> Result<T> {
    let db = image.db();
    let (nz, nx) = db.dim();
    let floor = cast::<T>(SHARPNESS_DB_FLOOR);
    let clamp = |v: T| v.max(floor);
    // Central 90% crop (5% margin on each side, at least one pixel kept).
    let mx = (nx as f64 * 0.05).floor() as usize;
    let mz = (nz as f64 * 0.05).floor() as usize;
    let (i0, i1) = (mx, nx - mx);
    let (j0, j1) = (mz, nz - mz);
    if i1 - i0 < 2 || j1 - j0 < 2 {
        return Err(Error::Resolution(
            "image too small for the sharpness crop".into(),
        ));
    }
    let mut sum = T::zero();
    let mut count = 0u64;
    for j in j0..j1 {
        for i in i0..i1 {
            let v = clamp(db[(j, i)]);
            if i + 1 < i1 {
                sum = sum + (clamp(db[(j, i + 1)]) - v).abs();
                count += 1;
            }
            if j + 1 < j1 {
                sum = sum + (clamp(db[(j + 1, i)]) - v).abs();
                count += 1;
            }
        }
    }
    Ok(sum / cast::<T>(count as f64) * cast::<T>(100.0))
}

/// Metric values for one image (absent entries were not measured).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport<T> {
    /// Lateral full width at half maximum (m).
    pub fwhm_m: Option<T>,
    /// Generalised contrast-to-noise ratio.
    pub gcnr: Option<T>,
    /// Gradient sharpness index.
    pub sharpness: Option<T>,
}

/// Differences between a baseline report and a candidate report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison<T> {
    /// Width reduction as a percentage of the baseline width (positive =
    /// candidate is narrower).
    pub fwhm_improvement_percent: Option<T>,
    /// Absolute contrast gain (candidate minus baseline).
    pub gcnr_gain: Option<T>,
    /// Sharpness gain as a percentage of the baseline (positive = candidate
    /// is sharper).
    pub sharpness_improvement_percent: Option<T>,
}

/// Compares `candidate` against `baseline`. Metrics present in only one
/// report are an error; metrics absent from both are skipped.
pub fn compare_reports<T: Scalar>(
    baseline: &MetricReport<T>,
    candidate: &MetricReport<T>,
) -> Result<MetricComparison<T>> {
    let hundred = cast::<T>(100.0);
    let pair = |name: &str, a: Option<T>, b: Option<T>| -> Result<Option<(T, T)>> {
        match (a, b) {
            (Some(a), Some(b)) => Ok(Some((a, b))),
            (None, None) => Ok(None),
            _ => Err(Error::Comparison(format!(
                "{name} present in only one report"
            ))),
        }
    };
    let fwhm = pair("fwhm", baseline.fwhm_m, candidate.fwhm_m)?
        .map(|(a, b)| {
            if a <= T::zero() {
                return Err(Error::Comparison("baseline width must be positive".into()));
            }
            Ok((a - b) / a * hundred)
        })
        .transpose()?;
    let gcnr = pair("gcnr", baseline.gcnr, candidate.gcnr)?.map(|(a, b)| b - a);
    let sharp = pair("sharpness", baseline.sharpness, candidate.sharpness)?
        .map(|(a, b)| {
            if a <= T::zero() {
                return Err(Error::Comparison(
                    "baseline sharpness must be positive".into(),
                ));
            }
            Ok((b - a) / a * hundred)
        })
        .transpose()?;
    Ok(MetricComparison {
        fwhm_improvement_percent: fwhm,
        gcnr_gain: gcnr,
        sharpness_improvement_percent: sharp,
    })
}
