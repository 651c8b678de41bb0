//! One function per pipeline stage, each reading and writing files under the
//! output directory so stages can be re-run and inspected independently.

use std::path::{Path, PathBuf};
use std::time::Instant;

use wavecor::beamform::ChannelData;
use wavecor::error::{Error, Result};
use wavecor::image::ImagePlane;
use wavecor::io;
use wavecor::medium::MediumMap;
use wavecor::metrics::{
    compare_reports, fwhm_lateral, gcnr, sharpness, GcnrMode, MetricComparison, MetricReport,
};
use wavecor::scalar::{cast, Scalar};
use wavecor::synth::{build_phantom, simulate_rf, Phantom};

use crate::config::{KernelSpec, ModeSpec, PipelineConfig, Precision};

/// Flag overrides for the beamform stage.
#[derive(Debug, Default, Clone)]
pub struct BeamformArgs {
    pub mode: Option<ModeSpec>,
    pub kernel: Option<KernelSpec>,
    pub band_fraction: Option<f64>,
    pub dynamic_range_db: Option<f64>,
    pub medium: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Builds the phantom and writes the medium map, the scatterer table, and
/// the fully resolved configuration.
pub fn cmd_phantom(cfg: &PipelineConfig, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let grid = cfg.grid.to_grid::<f64>()?;
    let spec = cfg.phantom.to_spec(cfg.seed, &grid)?;
    let phantom = build_phantom(&spec, &grid)?;
    io::write_medium(out_dir.join(&cfg.paths.medium), &phantom.medium)?;
    io::write_scatterers_csv(out_dir.join(&cfg.paths.scatterers), &phantom.scatterers)?;
    let resolved = toml::to_string_pretty(cfg)
        .map_err(|e| Error::Config(format!("serialising configuration: {e}")))?;
    std::fs::write(out_dir.join(&cfg.paths.spec), resolved)?;
    println!(
        "phantom: {}x{} grid, {} scatterers ({} pins), c {:.0}..{:.0} m/s, seed {} -> {}",
        grid.nx(),
        grid.nz(),
        phantom.scatterers.len(),
        spec.pins.len(),
        phantom.medium.c_min(),
        phantom.medium.c_max(),
        cfg.seed,
        out_dir.join(&cfg.paths.medium).display(),
    );
    Ok(())
}

/// Synthesises channel data from the phantom files written by
/// [`cmd_phantom`].
pub fn cmd_simulate(cfg: &PipelineConfig, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let medium: MediumMap<f64> = io::read_medium(out_dir.join(&cfg.paths.medium))?;
    let scatterers = io::read_scatterers_csv(out_dir.join(&cfg.paths.scatterers))?;
    let phantom = Phantom { medium, scatterers };
    let array = cfg.array.to_array::<f64>()?;
    let events = cfg
        .simulate
        .to_events(&array, cfg.phantom.background.resolve()?.c)?;
    let t = Instant::now();
    let channel = simulate_rf(
        &phantom,
        &array,
        &events,
        cfg.simulate.fs_mhz * 1e6,
        cfg.simulate.t0_us * 1e-6,
        cfg.simulate.duration_us * 1e-6,
    )?;
    let path = out_dir.join(&cfg.paths.channel);
    io::write_channel(&path, &channel)?;
    println!(
        "channel: {} transmits x {} elements x {} samples ({} scatterers rejected, {:.1} s) -> {}",
        channel.n_transmits(),
        channel.array().n_elements(),
        channel.n_time(),
        channel.rejected_scatterers(),
        t.elapsed().as_secs_f64(),
        path.display(),
    );
    Ok(())
}

/// Forms an image from recorded channel data.
pub fn cmd_beamform(cfg: &PipelineConfig, out_dir: &Path, args: &BeamformArgs) -> Result<()> {
    ensure_dir(out_dir)?;
    let mut cfg = cfg.clone();
    if let Some(m) = args.mode {
        cfg.beamform.mode = m;
    }
    if let Some(k) = args.kernel {
        cfg.beamform.kernel = Some(k);
    }
    if let Some(b) = args.band_fraction {
        cfg.beamform.band_fraction = b;
    }
    if let Some(d) = args.dynamic_range_db {
        cfg.beamform.dynamic_range_db = d;
    }
    cfg.validate()?;
    let mode = cfg.beamform.mode;

    let input = args
        .input
        .clone()
        .unwrap_or_else(|| out_dir.join(&cfg.paths.channel));
    let medium_path = match (&args.medium, mode) {
        (Some(p), _) => Some(p.clone()),
        (None, ModeSpec::Hwci) => {
            let p = out_dir.join(&cfg.paths.medium);
            if p.exists() {
                Some(p)
            } else {
                return Err(Error::Config(
                    "mode hwci needs a medium map: pass --medium <file> or run the \
                     phantom stage into this --out-dir first"
                        .into(),
                ));
            }
        }
        (None, ModeSpec::Wci) => None,
    };
    let output = args.output.clone().unwrap_or_else(|| {
        out_dir.join(format!("{}_{}", cfg.paths.image, mode.name()))
    });

    match cfg.precision {
        Precision::F32 => run_beamform::<f32>(&cfg, &input, medium_path.as_deref(), &output),
        Precision::F64 => run_beamform::<f64>(&cfg, &input, medium_path.as_deref(), &output),
    }
}

fn run_beamform<T: Scalar>(
    cfg: &PipelineConfig,
    input: &Path,
    medium_path: Option<&Path>,
    output: &Path,
) -> Result<()> {
    let channel: ChannelData<T> = io::read_channel(input)?;
    let medium: Option<MediumMap<T>> = match medium_path {
        Some(p) => Some(io::read_medium(p)?),
        None => None,
    };
    let grid = cfg.beamform.image.to_grid::<T>()?;
    let bf = cfg.beamform.to_config::<T>()?;
    let t = Instant::now();
    let img = wavecor::beamform::beamform(&channel, &grid, medium.as_ref(), &bf)?;
    io::write_raw_image(output, &img)?;
    io::write_pgm(
        output.with_extension("pgm"),
        &img,
        cast::<T>(cfg.beamform.dynamic_range_db),
    )?;
    println!(
        "{}: {}x{} image from {} transmits ({:.1} s) -> {}.{{f64,txt,pgm}}",
        cfg.beamform.mode.name(),
        grid.nx(),
        grid.nz(),
        channel.n_transmits(),
        t.elapsed().as_secs_f64(),
        output.display(),
    );
    Ok(())
}

/// Measures the configured metrics on one image and writes a metric table.
pub fn cmd_evaluate(
    cfg: &PipelineConfig,
    out_dir: &Path,
    image: Option<&Path>,
    output: Option<&Path>,
) -> Result<PathBuf> {
    let base = match image {
        Some(p) => p.to_path_buf(),
        None => out_dir.join(format!("{}_{}", cfg.paths.image, cfg.beamform.mode.name())),
    };
    let img: ImagePlane<f64> = io::read_raw_image(&base)?;
    let mut rows = Vec::new();
    for pin in cfg.evaluate.resolved_pins(&cfg.phantom) {
        let w = fwhm_lateral(&img, Some(pin.window()))?;
        rows.push((
            pin.label(),
            MetricReport { fwhm_m: Some(w), ..MetricReport::default() },
        ));
    }
    for lesion in cfg.evaluate.resolved_lesions(&cfg.phantom) {
        let (inside, outside) = lesion.regions();
        let g = gcnr(&img, &inside, &outside, GcnrMode::RankBased)?;
        rows.push((
            lesion.label(),
            MetricReport { gcnr: Some(g.value), ..MetricReport::default() },
        ));
    }
    if cfg.evaluate.sharpness {
        rows.push((
            "image".to_string(),
            MetricReport { sharpness: Some(sharpness(&img)?), ..MetricReport::default() },
        ));
    }
    let out = match output {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(format!("{}_metrics.csv", base.display())),
    };
    io::write_metrics_csv(&out, &rows)?;
    for (label, rep) in &rows {
        match (rep.fwhm_m, rep.gcnr, rep.sharpness) {
            (Some(w), _, _) => println!("{label}: fwhm {:.3} mm", w * 1e3),
            (_, Some(g), _) => println!("{label}: gcnr {g:.4}"),
            (_, _, Some(s)) => println!("{label}: sharpness {s:.4e}"),
            _ => {}
        }
    }
    println!("metrics -> {}", out.display());
    Ok(out)
}

/// Compares two metric tables label by label and prints a summary block.
pub fn cmd_compare(
    baseline: &Path,
    candidate: &Path,
    output: Option<&Path>,
) -> Result<()> {
    let a: Vec<(String, MetricReport<f64>)> = io::read_metrics_csv(baseline)?;
    let b: Vec<(String, MetricReport<f64>)> = io::read_metrics_csv(candidate)?;
    let la: Vec<&str> = a.iter().map(|(l, _)| l.as_str()).collect();
    let lb: Vec<&str> = b.iter().map(|(l, _)| l.as_str()).collect();
    if la != lb {
        return Err(Error::Comparison(format!(
            "region lists differ: baseline has {la:?}, candidate has {lb:?}"
        )));
    }

    println!("metric                     baseline   candidate      change");
    let mut fwhm_improvements = Vec::new();
    let mut gcnr_gains = Vec::new();
    let mut sharp_improvements = Vec::new();
    let mut widths_a = Vec::new();
    let mut widths_b = Vec::new();
    for ((label, ra), (_, rb)) in a.iter().zip(&b) {
        let cmp = compare_reports(ra, rb)?;
        if let (Some(wa), Some(wb), Some(imp)) =
            (ra.fwhm_m, rb.fwhm_m, cmp.fwhm_improvement_percent)
        {
            println!(
                "{:<22} {:>8.3} mm {:>8.3} mm {:>+8.1} %",
                format!("{label} fwhm"),
                wa * 1e3,
                wb * 1e3,
                imp
            );
            fwhm_improvements.push(imp);
            widths_a.push(wa);
            widths_b.push(wb);
        }
        if let (Some(ga), Some(gb), Some(gain)) = (ra.gcnr, rb.gcnr, cmp.gcnr_gain) {
            println!(
                "{:<22} {:>11.4} {:>11.4} {:>+8.4}",
                format!("{label} gcnr"),
                ga,
                gb,
                gain
            );
            gcnr_gains.push(gain);
        }
        if let (Some(sa), Some(sb), Some(imp)) =
            (ra.sharpness, rb.sharpness, cmp.sharpness_improvement_percent)
        {
            println!(
                "{:<22} {:>11.4e} {:>11.4e} {:>+8.1} %",
                format!("{label} sharpness"),
                sa,
                sb,
                imp
            );
            sharp_improvements.push(imp);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let cv = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt() / m
    };
    if !fwhm_improvements.is_empty() {
        println!("mean fwhm improvement: {:+.1} %", mean(&fwhm_improvements));
        if widths_a.len() >= 2 {
            println!(
                "fwhm spread (cv): {:.3} -> {:.3}",
                cv(&widths_a),
                cv(&widths_b)
            );
        }
    }
    if !gcnr_gains.is_empty() {
        println!("mean gcnr gain: {:+.4}", mean(&gcnr_gains));
    }

    if let Some(out) = output {
        let summary = MetricComparison {
            fwhm_improvement_percent: (!fwhm_improvements.is_empty())
                .then(|| mean(&fwhm_improvements)),
            gcnr_gain: (!gcnr_gains.is_empty()).then(|| mean(&gcnr_gains)),
            sharpness_improvement_percent: (!sharp_improvements.is_empty())
                .then(|| mean(&sharp_improvements)),
        };
        io::write_comparison_csv(out, &summary)?;
        println!("comparison -> {}", out.display());
    }
    Ok(())
}

/// Runs phantom, simulation, both beamforming modes, evaluation, and the
/// comparison in one go.
pub fn cmd_repro(cfg: &PipelineConfig, out_dir: &Path) -> Result<()> {
    cmd_phantom(cfg, out_dir)?;
    cmd_simulate(cfg, out_dir)?;

    let mut metric_files = Vec::new();
    for mode in [ModeSpec::Wci, ModeSpec::Hwci] {
        let mut stage_cfg = cfg.clone();
        stage_cfg.beamform.mode = mode;
        // A kernel pinned for the other mode must not poison this one.
        if mode == ModeSpec::Hwci && stage_cfg.beamform.kernel == Some(KernelSpec::Asm) {
            stage_cfg.beamform.kernel = None;
        }
        cmd_beamform(&stage_cfg, out_dir, &BeamformArgs::default())?;
        metric_files.push(cmd_evaluate(&stage_cfg, out_dir, None, None)?);
    }
    cmd_compare(
        &metric_files[0],
        &metric_files[1],
        Some(&out_dir.join("comparison.csv")),
    )
}
