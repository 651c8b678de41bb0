//! On-disk artifacts: medium maps, channel data, images, and metric tables.
//!
//! # Binary layouts (all little-endian)
//!
//! Medium map, magic `WCMEDIUM`, version 1:
//!
//! | offset | type        | field |
//! |--------|-------------|-------|
//! | 0      | `[u8; 8]`   | magic |
//! | 8      | `u64`       | version (1) |
//! | 16     | `u64`       | `nx` |
//! | 24     | `u64`       | `nz` |
//! | 32     | `f64`       | `dx` (m) |
//! | 40     | `f64`       | `dz` (m) |
//! | 48     | `f64`       | `x0` (m) |
//! | 56     | `f64`       | `z0` (m) |
//! | 64     | `f64`       | `c0` (m/s) |
//! | 72     | `f32 * nz*nx` | speeds, depth row major |
//!
//! Channel data, magic `WCCHDATA`, version 1:
//!
//! | offset | type      | field |
//! |--------|-----------|-------|
//! | 0      | `[u8; 8]` | magic |
//! | 8      | `u64`     | version (1) |
//! | 16     | `u64`     | `n_transmits` |
//! | 24     | `u64`     | `n_elements` |
//! | 32     | `u64`     | `n_time` |
//! | 40     | `f64`     | `fs` (Hz) |
//! | 48     | `f64`     | `t0` (s) |
//! | 56     | `f64`     | element pitch (m) |
//! | 64     | `f64`     | array centre frequency (Hz) |
//! | 72     | event * n_transmits | see below |
//! | ...    | `f32 * n_tx*n_el*n_time` | traces, transmit then element major |
//!
//! Each event is 32 bytes: steering angle `f64` (rad), pulse centre frequency
//! `f64` (Hz), pulse cycles `u64`, reference speed `f64` (m/s). Plane-wave
//! element delays are a pure function of those fields and are rebuilt on load.

use crate::beamform::ChannelData;
use crate::error::{Error, Result};
use crate::grid::{ArrayGeometry, ImagingGrid, TransmitEvent};
use crate::image::ImagePlane;
use crate::medium::MediumMap;
use crate::metrics::{MetricComparison, MetricReport};
use crate::scalar::{cast, Scalar};
use crate::synth::Scatterer;
use ndarray::{Array2, Array3};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MEDIUM_MAGIC: &[u8; 8] = b"WCMEDIUM";
const CHANNEL_MAGIC: &[u8; 8] = b"WCCHDATA";
const FORMAT_VERSION: u64 = 1;

/// Default display dynamic range for image exports (dB).
pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 40.0;

// ---------------------------------------------------------------------------
// Little-endian primitives
// ---------------------------------------------------------------------------

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f32<W: Write>(w: &mut W, v: f32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_f32<R: Read>(r: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn check_magic<R: Read>(r: &mut R, magic: &[u8; 8], what: &str) -> Result<()> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    if &b != magic {
        return Err(Error::Format(format!(
            "{what}: bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&b),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = get_u64(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{what}: unsupported version {version}, expected {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

fn usize_field(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v)
        .map_err(|_| Error::Format(format!("{what} {v} does not fit in memory")))
}

// ---------------------------------------------------------------------------
// Medium map
// ---------------------------------------------------------------------------

/// Writes a medium map. Speeds are stored as `f32`; any density map is not
/// persisted.
pub fn write_medium<T: Scalar, P: AsRef<Path>>(path: P, medium: &MediumMap<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = medium.grid();
    w.write_all(MEDIUM_MAGIC)?;
    put_u64(&mut w, FORMAT_VERSION)?;
    put_u64(&mut w, g.nx() as u64)?;
    put_u64(&mut w, g.nz() as u64)?;
    put_f64(&mut w, g.dx().to_f64())?;
    put_f64(&mut w, g.dz().to_f64())?;
    put_f64(&mut w, g.x0().to_f64())?;
    put_f64(&mut w, g.z0().to_f64())?;
    put_f64(&mut w, medium.c0().to_f64())?;
    for j in 0..g.nz() {
        for i in 0..g.nx() {
            put_f32(&mut w, medium.c()[(j, i)].to_f64() as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a medium map written by [`write_medium`].
pub fn read_medium<T: Scalar, P: AsRef<Path>>(path: P) -> Result<MediumMap<T>> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, MEDIUM_MAGIC, "medium map")?;
    let nx = usize_field(get_u64(&mut r)?, "nx")?;
    let nz = usize_field(get_u64(&mut r)?, "nz")?;
    let dx = get_f64(&mut r)?;
    let dz = get_f64(&mut r)?;
    let x0 = get_f64(&mut r)?;
    let z0 = get_f64(&mut r)?;
    let c0 = get_f64(&mut r)?;
    let grid = ImagingGrid::new(nx, nz, cast::<T>(dx), cast(dz), cast(x0), cast(z0))?;
    let mut c = Array2::zeros((nz, nx));
    for j in 0..nz {
        for i in 0..nx {
            c[(j, i)] = cast::<T>(get_f32(&mut r)? as f64);
        }
    }
    expect_eof(&mut r, "medium map")?;
    MediumMap::new(grid, c, cast(c0))
}

// ---------------------------------------------------------------------------
// Channel data
// ---------------------------------------------------------------------------

/// Writes channel data. Traces are stored as `f32`.
pub fn write_channel<T: Scalar, P: AsRef<Path>>(
    path: P,
    channel: &ChannelData<T>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (n_tx, n_el, n_time) = channel.samples().dim();
    w.write_all(CHANNEL_MAGIC)?;
    put_u64(&mut w, FORMAT_VERSION)?;
    put_u64(&mut w, n_tx as u64)?;
    put_u64(&mut w, n_el as u64)?;
    put_u64(&mut w, n_time as u64)?;
    put_f64(&mut w, channel.fs().to_f64())?;
    put_f64(&mut w, channel.t0().to_f64())?;
    put_f64(&mut w, channel.array().pitch().to_f64())?;
    put_f64(&mut w, channel.array().center_frequency().to_f64())?;
    for ev in channel.events() {
        put_f64(&mut w, ev.steering_angle.to_f64())?;
        put_f64(&mut w, ev.pulse_center_frequency.to_f64())?;
        put_u64(&mut w, ev.pulse_cycles as u64)?;
        put_f64(&mut w, ev.reference_c.to_f64())?;
    }
    for t in 0..n_tx {
        for e in 0..n_el {
            for n in 0..n_time {
                put_f32(&mut w, channel.samples()[(t, e, n)].to_f64() as f32)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads channel data written by [`write_channel`], rebuilding plane-wave
/// delays from the stored event parameters. The rejected-scatterer count is
/// not persisted and reads back as zero.
pub fn read_channel<T: Scalar, P: AsRef<Path>>(path: P) -> Result<ChannelData<T>> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, CHANNEL_MAGIC, "channel data")?;
    let n_tx = usize_field(get_u64(&mut r)?, "n_transmits")?;
    let n_el = usize_field(get_u64(&mut r)?, "n_elements")?;
    let n_time = usize_field(get_u64(&mut r)?, "n_time")?;
    let fs = get_f64(&mut r)?;
    let t0 = get_f64(&mut r)?;
    let pitch = get_f64(&mut r)?;
    let fc = get_f64(&mut r)?;
    let array = ArrayGeometry::new(n_el, cast::<T>(pitch), cast(fc))?;
    let mut events = Vec::with_capacity(n_tx);
    for _ in 0..n_tx {
        let angle = get_f64(&mut r)?;
        let pulse_fc = get_f64(&mut r)?;
        let cycles = get_u64(&mut r)?;
        let reference_c = get_f64(&mut r)?;
        let cycles = u32::try_from(cycles)
            .map_err(|_| Error::Format(format!("pulse cycle count {cycles} out of range")))?;
        events.push(TransmitEvent::plane_wave(
            &array,
            cast::<T>(angle),
            cast(reference_c),
            cast(pulse_fc),
            cycles,
        )?);
    }
    let mut samples = Array3::zeros((n_tx, n_el, n_time));
    for t in 0..n_tx {
        for e in 0..n_el {
            for n in 0..n_time {
                samples[(t, e, n)] = cast::<T>(get_f32(&mut r)? as f64);
            }
        }
    }
    expect_eof(&mut r, "channel data")?;
    ChannelData::new(array, events, samples, cast(fs), cast(t0), 0)
}

fn expect_eof<R: Read>(r: &mut R, what: &str) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Format(format!("{what}: trailing bytes after payload"))),
    }
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

/// Writes the log-compressed image as an 8-bit binary PGM (`P5`), mapping
/// `[-dynamic_range_db, 0]` dB onto `[0, 255]`, shallowest row on top.
pub fn write_pgm<T: Scalar, P: AsRef<Path>>(
    path: P,
    image: &ImagePlane<T>,
    dynamic_range_db: T,
) -> Result<()> {
    let db = image.db_clipped(dynamic_range_db)?;
    let (nz, nx) = db.dim();
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{nx} {nz}\n255\n")?;
    let dr = dynamic_range_db.to_f64();
    for j in 0..nz {
        for i in 0..nx {
            let v = (db[(j, i)].to_f64() + dr) / dr; // 0..1
            let byte = (v * 255.0).round().clamp(0.0, 255.0) as u8;
            w.write_all(&[byte])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the raw intensity as `<base>.f64` (row-major `f64`, little-endian)
/// plus a `<base>.txt` sidecar describing the grid, one `key=value` per line.
pub fn write_raw_image<T: Scalar, P: AsRef<Path>>(base: P, image: &ImagePlane<T>) -> Result<()> {
    let base = base.as_ref();
    let g = image.grid();
    let mut w = BufWriter::new(File::create(base.with_extension("f64"))?);
    for &v in image.intensity().iter() {
        put_f64(&mut w, v.to_f64())?;
    }
    w.flush()?;
    let mut s = BufWriter::new(File::create(base.with_extension("txt"))?);
    writeln!(s, "nx={}", g.nx())?;
    writeln!(s, "nz={}", g.nz())?;
    writeln!(s, "dx_m={:e}", g.dx().to_f64())?;
    writeln!(s, "dz_m={:e}", g.dz().to_f64())?;
    writeln!(s, "x0_m={:e}", g.x0().to_f64())?;
    writeln!(s, "z0_m={:e}", g.z0().to_f64())?;
    writeln!(s, "layout=depth-major")?;
    s.flush()?;
    Ok(())
}

/// Reads an image written by [`write_raw_image`].
pub fn read_raw_image<T: Scalar, P: AsRef<Path>>(base: P) -> Result<ImagePlane<T>> {
    let base = base.as_ref();
    let sidecar = File::open(base.with_extension("txt"))?;
    let mut fields = std::collections::HashMap::new();
    for line in BufReader::new(sidecar).lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Format(format!("image sidecar: malformed line {line:?}"))
        })?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| -> Result<&str> {
        fields
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("image sidecar: missing field {k}")))
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|e| Error::Format(format!("image sidecar: bad {k}: {e}")))
    };
    let parse_f64 = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|e| Error::Format(format!("image sidecar: bad {k}: {e}")))
    };
    let nx = parse_usize("nx")?;
    let nz = parse_usize("nz")?;
    let grid = ImagingGrid::new(
        nx,
        nz,
        cast::<T>(parse_f64("dx_m")?),
        cast(parse_f64("dz_m")?),
        cast(parse_f64("x0_m")?),
        cast(parse_f64("z0_m")?),
    )?;
    let mut r = BufReader::new(File::open(base.with_extension("f64"))?);
    let mut inten = Array2::zeros((nz, nx));
    for j in 0..nz {
        for i in 0..nx {
            inten[(j, i)] = cast::<T>(get_f64(&mut r)?);
        }
    }
    expect_eof(&mut r, "raw image")?;
    ImagePlane::new(grid, inten)
}

// ---------------------------------------------------------------------------
// Scatterers and metric tables (CSV)
// ---------------------------------------------------------------------------

/// Writes scatterers as CSV: `x_m,z_m,reflectivity` with a header row.
pub fn write_scatterers_csv<T: Scalar, P: AsRef<Path>>(
    path: P,
    scatterers: &[Scatterer<T>],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x_m,z_m,reflectivity")?;
    for s in scatterers {
        writeln!(
            w,
            "{:e},{:e},{:e}",
            s.x.to_f64(),
            s.z.to_f64(),
            s.reflectivity.to_f64()
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads scatterers written by [`write_scatterers_csv`].
pub fn read_scatterers_csv<T: Scalar, P: AsRef<Path>>(path: P) -> Result<Vec<Scatterer<T>>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if idx == 0 || line.is_empty() {
            continue; // header
        }
        let mut cols = line.split(',');
        let mut field = |name: &str| -> Result<f64> {
            cols.next()
                .ok_or_else(|| {
                    Error::Format(format!("scatterer CSV line {}: missing {name}", idx + 1))
                })?
                .trim()
                .parse()
                .map_err(|e| {
                    Error::Format(format!("scatterer CSV line {}: bad {name}: {e}", idx + 1))
                })
        };
        let x = field("x_m")?;
        let z = field("z_m")?;
        let reflectivity = field("reflectivity")?;
        out.push(Scatterer {
            x: cast::<T>(x),
            z: cast(z),
            reflectivity: cast(reflectivity),
        });
    }
    Ok(out)
}

/// Writes labelled metric reports as CSV (`label,fwhm_m,gcnr,sharpness`,
/// absent metrics left empty).
pub fn write_metrics_csv<T: Scalar, P: AsRef<Path>>(
    path: P,
    rows: &[(String, MetricReport<T>)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "label,fwhm_m,gcnr,sharpness")?;
    let fmt = |v: Option<T>| v.map(|x| format!("{:e}", x.to_f64())).unwrap_or_default();
    for (label, rep) in rows {
        writeln!(
            w,
            "{label},{},{},{}",
            fmt(rep.fwhm_m),
            fmt(rep.gcnr),
            fmt(rep.sharpness)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads labelled metric reports written by [`write_metrics_csv`].
pub fn read_metrics_csv<T: Scalar, P: AsRef<Path>>(
    path: P,
) -> Result<Vec<(String, MetricReport<T>)>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if idx == 0 || line.is_empty() {
            continue; // header
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Format(format!(
                "metrics CSV line {}: expected 4 columns, got {}",
                idx + 1,
                cols.len()
            )));
        }
        let field = |name: &str, v: &str| -> Result<Option<T>> {
            let v = v.trim();
            if v.is_empty() {
                return Ok(None);
            }
            v.parse::<f64>().map(|x| Some(cast::<T>(x))).map_err(|e| {
                Error::Format(format!("metrics CSV line {}: bad {name}: {e}", idx + 1))
            })
        };
        out.push((
            cols[0].to_string(),
            MetricReport {
                fwhm_m: field("fwhm_m", cols[1])?,
                gcnr: field("gcnr", cols[2])?,
                sharpness: field("sharpness", cols[3])?,
            },
        ));
    }
    Ok(out)
}

/// Writes a baseline/candidate comparison as CSV (`metric,value`).
pub fn write_comparison_csv<T: Scalar, P: AsRef<Path>>(
    path: P,
    cmp: &MetricComparison<T>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "metric,value")?;
    if let Some(v) = cmp.fwhm_improvement_percent {
        writeln!(w, "fwhm_improvement_percent,{:e}", v.to_f64())?;
    }
    if let Some(v) = cmp.gcnr_gain {
        writeln!(w, "gcnr_gain,{:e}", v.to_f64())?;
    }
    if let Some(v) = cmp.sharpness_improvement_percent {
        writeln!(w, "sharpness_improvement_percent,{:e}", v.to_f64())?;
    }
    w.flush()?;
    Ok(())
}
