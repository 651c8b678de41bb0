//! `wavecor` — frequency-domain ultrasound beamforming pipeline.
//!
//! One subcommand per stage with file handoffs, plus `repro` to chain them:
//! phantom -> simulate -> beamform (both modes) -> evaluate -> compare.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod config;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use wavecor::error::Error;

use commands::BeamformArgs;
use config::{KernelSpec, ModeSpec, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "wavecor",
    version,
    about = "Frequency-domain ultrasound beamforming pipeline",
    propagate_version = true
)]
struct Cli {
    /// Configuration file (TOML); flags override file values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for pipeline artifacts
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out_dir: PathBuf,
    /// Beamformer worker threads (0 = automatic)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Phantom realisation seed
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Wci,
    Hwci,
}

impl From<ModeArg> for ModeSpec {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Wci => ModeSpec::Wci,
            ModeArg::Hwci => ModeSpec::Hwci,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Asm,
    Hasm,
    SplitStep,
}

impl From<KernelArg> for KernelSpec {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Asm => KernelSpec::Asm,
            KernelArg::Hasm => KernelSpec::Hasm,
            KernelArg::SplitStep => KernelSpec::SplitStep,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the phantom: medium map, scatterer table, resolved spec
    Phantom {
        /// Replace the layer stack, e.g. "fat:10mm,liver:30mm"; the last
        /// entry continues to the bottom of the grid
        #[arg(long, value_name = "LIST")]
        layers: Option<String>,
    },
    /// Synthesise channel data from the phantom files
    Simulate,
    /// Form an image from channel data
    Beamform {
        /// Imaging mode
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Propagation kernel (defaults by mode: wci=asm, hwci=hasm)
        #[arg(long, value_enum)]
        kernel: Option<KernelArg>,
        /// Fractional bandwidth around the array centre frequency
        #[arg(long, value_name = "FRACTION")]
        band_fraction: Option<f64>,
        /// Display dynamic range for the grey-map export (dB)
        #[arg(long, value_name = "DB")]
        dynamic_range_db: Option<f64>,
        /// Medium map for heterogeneous imaging (hwci)
        #[arg(long, value_name = "FILE")]
        medium: Option<PathBuf>,
        /// Channel data file (defaults to the configured path)
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Image base name (defaults to the configured path plus mode)
        #[arg(long, value_name = "BASE")]
        output: Option<PathBuf>,
    },
    /// Measure image quality metrics on a beamformed image
    Evaluate {
        /// Image base name as produced by beamform
        #[arg(long, value_name = "BASE")]
        image: Option<PathBuf>,
        /// Metrics CSV destination (defaults to <image>_metrics.csv)
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Compare two metric tables and print a summary block
    Compare {
        /// Baseline metrics CSV
        baseline: PathBuf,
        /// Candidate metrics CSV
        candidate: PathBuf,
        /// Aggregate comparison CSV destination
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Run the whole pipeline end to end and print the comparison
    Repro,
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cfg.threads > 0 {
        // Ignore the error if a pool already exists (e.g. repeated calls in
        // tests within one process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }
    let out_dir = cli.out_dir;
    match cli.cmd {
        Cmd::Phantom { layers } => {
            if let Some(list) = layers {
                config::apply_layers(&mut cfg.phantom, &list)?;
            }
            commands::cmd_phantom(&cfg, &out_dir)
        }
        Cmd::Simulate => commands::cmd_simulate(&cfg, &out_dir),
        Cmd::Beamform {
            mode,
            kernel,
            band_fraction,
            dynamic_range_db,
            medium,
            input,
            output,
        } => commands::cmd_beamform(
            &cfg,
            &out_dir,
            &BeamformArgs {
                mode: mode.map(Into::into),
                kernel: kernel.map(Into::into),
                band_fraction,
                dynamic_range_db,
                medium,
                input,
                output,
            },
        ),
        Cmd::Evaluate { image, output } => commands::cmd_evaluate(
            &cfg,
            &out_dir,
            image.as_deref(),
            output.as_deref(),
        )
        .map(|_| ()),
        Cmd::Compare { baseline, candidate, output } => {
            commands::cmd_compare(&baseline, &candidate, output.as_deref())
        }
        Cmd::Repro => commands::cmd_repro(&cfg, &out_dir),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        let code = match e {
            Error::Config(_) => 2,
            _ => 1,
        };
        std::process::exit(code);
    }
}
