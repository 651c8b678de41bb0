//! Pipeline configuration.
//!
//! A TOML file with nested sections; every field has a default, and the
//! defaults describe the bundled demonstration scene: a 128-element linear
//! array at 7.1 MHz imaging fat and muscle layers over a liver background,
//! with three axial pin targets and one anechoic lesion, each region's
//! material properties jittered within 3% of its tabulated mean.
//! Command-line flags override file values.
//!
//! Schema (all keys optional):
//!
//! ```toml
//! threads = 0            # beamformer worker threads, 0 = automatic
//! seed = 1               # phantom realisation seed
//! precision = "f32"      # beamforming arithmetic: "f32" | "f64"
//!
//! [paths]                # artifact names, relative to --out-dir
//! spec = "spec.toml"
//! medium = "medium.bin"
//! scatterers = "scatterers.csv"
//! channel = "channel.bin"
//! image = "image"        # base name; mode suffix and extensions are added
//!
//! [array]
//! n_elements = 128
//! pitch_mm = 0.3
//! center_frequency_mhz = 7.1
//!
//! [grid]                 # phantom / medium grid, laterally centred on 0
//! width_mm = 40.0
//! depth_mm = 46.0
//! spacing_mm = 0.1
//!
//! [phantom]
//! background = "liver"   # material name, or inline { c = 1540.0, rho = 1000.0 }
//! speckle_per_cm2 = 3000.0
//! jitter_fraction = 0.03 # per-region material jitter half-range
//!
//! [[phantom.layers]]     # stacked from z = 0 downward, in order;
//! material = "fat"       # the background continues below the stack
//! thickness_mm = 10.0
//! echogenicity = 1.0
//!
//! [[phantom.layers]]
//! material = "muscle"
//! thickness_mm = 5.0
//!
//! [[phantom.lesions]]
//! x_mm = 5.0
//! z_mm = 35.0
//! radius_mm = 2.0
//! # material defaults to the background material
//! echogenicity = 0.0
//!
//! [[phantom.pins]]
//! x_mm = 0.0
//! z_mm = 20.0
//! reflectivity = 25.0
//!
//! [phantom.pin_grid]     # optional regular pin lattice, replaces nothing:
//! depth_step_mm = 10.0   # pins are appended to the explicit list
//! lateral_step_mm = 2.5
//! reflectivity = 25.0
//!
//! [simulate]
//! fs_mhz = 40.0
//! t0_us = 0.0
//! duration_us = 80.0
//! angles_deg = [-12.0, -6.0, 0.0, 6.0, 12.0]
//! pulse_cycles = 3
//! # pulse_center_frequency_mhz defaults to the array centre frequency
//! # reference_c defaults to the background sound speed (m/s)
//!
//! [beamform]
//! mode = "wci"           # "wci" | "hwci"
//! # kernel defaults by mode: wci -> "asm", hwci -> "hasm"; "split-step" allowed
//! band_fraction = 0.9
//! compounding = "coherent"   # or "incoherent"
//! dynamic_range_db = 40.0
//!
//! [beamform.image]
//! width_mm = 19.2
//! z_start_mm = 15.0
//! z_end_mm = 45.0
//! lateral_spacing_mm = 0.05
//! axial_spacing_mm = 0.03
//!
//! [evaluate]
//! sharpness = true
//! # pins / lesions default to the phantom's pins and anechoic lesions
//! [[evaluate.pins]]
//! x_mm = 0.0
//! z_mm = 20.0
//! half_width_mm = 2.5
//! half_depth_mm = 1.5
//! [[evaluate.lesions]]
//! x_mm = 5.0
//! z_mm = 35.0
//! radius_mm = 2.0
//! # annulus_inner_mm defaults to radius + 0.5, annulus_outer_mm to 2 * radius
//! ```

use serde::{Deserialize, Serialize};
use std::path::Path;
use wavecor::beamform::{BeamformConfig, Compounding};
use wavecor::error::{Error, Result};
use wavecor::grid::{ArrayGeometry, ImagingGrid, TransmitEvent};
use wavecor::kernels::PropagationKernel;
use wavecor::metrics::{Rect, Region};
use wavecor::scalar::{cast, Scalar};
use wavecor::scenes;
use wavecor::synth::{pin_grid, Lesion, Material, PhantomSpec, Pin, Slab};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Beamformer worker threads; 0 keeps the library default.
    pub threads: usize,
    /// Seed used when realising the phantom.
    pub seed: u64,
    /// Arithmetic precision of the beamforming stage.
    pub precision: Precision,
    pub paths: Paths,
    pub array: ArraySection,
    pub grid: GridSection,
    pub phantom: PhantomSection,
    pub simulate: SimulateSection,
    pub beamform: BeamformSection,
    pub evaluate: EvaluateSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threads: 0,
            seed: 1,
            precision: Precision::F32,
            paths: Paths::default(),
            array: ArraySection::default(),
            grid: GridSection::default(),
            phantom: PhantomSection::default(),
            simulate: SimulateSection::default(),
            beamform: BeamformSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

impl PipelineConfig {
    /// Loads a TOML file, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: Self = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text).map_err(|e| {
                    Error::Config(format!("config {}: {e}", p.display()))
                })?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beamform.band_fraction > 0.0 && self.beamform.band_fraction < 1.0) {
            return Err(Error::Config(format!(
                "band_fraction must lie in (0, 1), got {}",
                self.beamform.band_fraction
            )));
        }
        if !(self.beamform.dynamic_range_db > 0.0) {
            return Err(Error::Config(format!(
                "dynamic_range_db must be positive, got {}",
                self.beamform.dynamic_range_db
            )));
        }
        for (name, v) in [
            ("array.pitch_mm", self.array.pitch_mm),
            ("array.center_frequency_mhz", self.array.center_frequency_mhz),
            ("grid.width_mm", self.grid.width_mm),
            ("grid.depth_mm", self.grid.depth_mm),
            ("grid.spacing_mm", self.grid.spacing_mm),
            ("simulate.fs_mhz", self.simulate.fs_mhz),
            ("simulate.duration_us", self.simulate.duration_us),
            ("beamform.image.width_mm", self.beamform.image.width_mm),
            (
                "beamform.image.lateral_spacing_mm",
                self.beamform.image.lateral_spacing_mm,
            ),
            (
                "beamform.image.axial_spacing_mm",
                self.beamform.image.axial_spacing_mm,
            ),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.beamform.image.z_end_mm <= self.beamform.image.z_start_mm {
            return Err(Error::Config(
                "image z_end_mm must exceed z_start_mm".into(),
            ));
        }
        if self.array.n_elements < 2 {
            return Err(Error::Config("array needs at least 2 elements".into()));
        }
        if self.simulate.angles_deg.is_empty() {
            return Err(Error::Config("simulate.angles_deg must not be empty".into()));
        }
        if self.beamform.mode == ModeSpec::Hwci && self.beamform.kernel == Some(KernelSpec::Asm)
        {
            return Err(Error::Config(
                "hwci needs a heterogeneous kernel (hasm or split-step)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub spec: String,
    pub medium: String,
    pub scatterers: String,
    pub channel: String,
    pub image: String,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            spec: "spec.toml".into(),
            medium: "medium.bin".into(),
            scatterers: "scatterers.csv".into(),
            channel: "channel.bin".into(),
            image: "image".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub n_elements: usize,
    pub pitch_mm: f64,
    pub center_frequency_mhz: f64,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            n_elements: 128,
            pitch_mm: 0.3,
            center_frequency_mhz: scenes::SCENE_FC / 1e6,
        }
    }
}

impl ArraySection {
    pub fn to_array<T: Scalar>(&self) -> Result<ArrayGeometry<T>> {
        ArrayGeometry::new(
            self.n_elements,
            cast(self.pitch_mm * 1e-3),
            cast(self.center_frequency_mhz * 1e6),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub width_mm: f64,
    pub depth_mm: f64,
    pub spacing_mm: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { width_mm: 40.0, depth_mm: 46.0, spacing_mm: 0.1 }
    }
}

impl GridSection {
    pub fn to_grid<T: Scalar>(&self) -> Result<ImagingGrid<T>> {
        let s = self.spacing_mm * 1e-3;
        let nx = (self.width_mm / self.spacing_mm).round() as usize + 1;
        let nz = (self.depth_mm / self.spacing_mm).round() as usize + 1;
        ImagingGrid::centered(nx, nz, cast(s), cast(s), T::zero())
    }
}

/// A material either named after a preset or spelled out as
/// `{ c = m/s, rho = kg/m3 }`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MaterialSpec {
    Named(String),
    Explicit { c: f64, rho: f64 },
}

impl MaterialSpec {
    pub fn resolve(&self) -> Result<Material<f64>> {
        match self {
            Self::Explicit { c, rho } => Material::new(*c, *rho),
            Self::Named(name) => match name.as_str() {
                "water" => Ok(Material::water()),
                "fat" => Ok(Material::fat()),
                "liver" => Ok(Material::liver()),
                "muscle" => Ok(Material::muscle()),
                "blood" => Ok(Material::blood()),
                other => Err(Error::Config(format!(
                    "unknown material {other:?}; use water/fat/liver/muscle/blood \
                     or an inline {{ c, rho }} table"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LayerSection {
    pub material: MaterialSpec,
    pub thickness_mm: f64,
    pub echogenicity: f64,
}

impl Default for LayerSection {
    fn default() -> Self {
        Self {
            material: MaterialSpec::Named("fat".into()),
            thickness_mm: 10.0,
            echogenicity: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LesionSection {
    pub x_mm: f64,
    pub z_mm: f64,
    pub radius_mm: f64,
    /// Defaults to the background material.
    pub material: Option<MaterialSpec>,
    pub echogenicity: f64,
}

impl Default for LesionSection {
    fn default() -> Self {
        let (x, z, r) = scenes::SCENE_LESION;
        Self {
            x_mm: x * 1e3,
            z_mm: z * 1e3,
            radius_mm: r * 1e3,
            material: None,
            echogenicity: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PinSection {
    pub x_mm: f64,
    pub z_mm: f64,
    pub reflectivity: f64,
}

impl Default for PinSection {
    fn default() -> Self {
        Self { x_mm: 0.0, z_mm: 20.0, reflectivity: scenes::SCENE_PIN_REFLECTIVITY }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PinGridSection {
    pub depth_step_mm: f64,
    pub lateral_step_mm: f64,
    pub reflectivity: f64,
}

impl Default for PinGridSection {
    fn default() -> Self {
        Self {
            depth_step_mm: 10.0,
            lateral_step_mm: 2.5,
            reflectivity: scenes::SCENE_PIN_REFLECTIVITY,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    pub background: MaterialSpec,
    pub speckle_per_cm2: f64,
    pub jitter_fraction: f64,
    pub layers: Vec<LayerSection>,
    pub lesions: Vec<LesionSection>,
    pub pins: Vec<PinSection>,
    pub pin_grid: Option<PinGridSection>,
}

impl Default for PhantomSection {
    /// Fat and muscle layers over a liver background, each region's
    /// properties jittered within 3% of its tabulated mean.
    fn default() -> Self {
        Self {
            background: MaterialSpec::Named("liver".into()),
            speckle_per_cm2: scenes::SCENE_SPECKLE_PER_CM2,
            jitter_fraction: 0.03,
            layers: vec![
                LayerSection::default(),
                LayerSection {
                    material: MaterialSpec::Named("muscle".into()),
                    thickness_mm: 5.0,
                    ..LayerSection::default()
                },
            ],
            lesions: vec![LesionSection::default()],
            pins: scenes::SCENE_PIN_DEPTHS
                .iter()
                .map(|&z| PinSection { x_mm: 0.0, z_mm: z * 1e3, ..PinSection::default() })
                .collect(),
            pin_grid: None,
        }
    }
}

impl PhantomSection {
    /// Expands the section to a phantom spec on the given grid extent.
    pub fn to_spec(&self, seed: u64, grid: &ImagingGrid<f64>) -> Result<PhantomSpec<f64>> {
        let background = self.background.resolve()?;
        let mut slabs = Vec::new();
        let mut z = 0.0;
        for layer in &self.layers {
            if !(layer.thickness_mm.is_finite() && layer.thickness_mm > 0.0) {
                return Err(Error::Config(format!(
                    "layer thickness must be positive, got {} mm",
                    layer.thickness_mm
                )));
            }
            let bottom = z + layer.thickness_mm * 1e-3;
            slabs.push(Slab {
                z_top: z,
                z_bottom: bottom,
                material: layer.material.resolve()?,
                echogenicity: layer.echogenicity,
            });
            z = bottom;
        }
        let lesions = self
            .lesions
            .iter()
            .map(|l| {
                Ok(Lesion {
                    x: l.x_mm * 1e-3,
                    z: l.z_mm * 1e-3,
                    radius: l.radius_mm * 1e-3,
                    material: match &l.material {
                        Some(m) => m.resolve()?,
                        None => background,
                    },
                    echogenicity: l.echogenicity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut pins: Vec<Pin<f64>> = self
            .pins
            .iter()
            .map(|p| Pin { x: p.x_mm * 1e-3, z: p.z_mm * 1e-3, reflectivity: p.reflectivity })
            .collect();
        if let Some(pg) = &self.pin_grid {
            if !(pg.depth_step_mm > 0.0 && pg.lateral_step_mm > 0.0) {
                return Err(Error::Config("pin grid steps must be positive".into()));
            }
            let xs = centred_steps(pg.lateral_step_mm * 1e-3, grid.x0(), grid.x_end());
            let zs = depth_steps(pg.depth_step_mm * 1e-3, grid.z_end());
            pins.extend(pin_grid(&xs, &zs, pg.reflectivity));
        }
        Ok(PhantomSpec {
            background,
            speckle_per_cm2: self.speckle_per_cm2,
            jitter_fraction: self.jitter_fraction,
            slabs,
            lesions,
            pins,
            seed,
        })
    }
}

/// Multiples of `step` centred on zero, clipped to `[lo, hi]`; the centre pin
/// alone when even one step does not fit.
fn centred_steps(step: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut k = 1;
    loop {
        let x = step * k as f64;
        let mut grew = false;
        if -x >= lo {
            out.insert(0, -x);
            grew = true;
        }
        if x <= hi {
            out.push(x);
            grew = true;
        }
        if !grew {
            return out;
        }
        k += 1;
    }
}

/// Multiples of `step` from one step down to `depth` inclusive; the midpoint
/// alone when the extent is shorter than one step.
fn depth_steps(step: f64, depth: f64) -> Vec<f64> {
    let n = (depth / step).floor() as usize;
    if n == 0 {
        return vec![depth / 2.0];
    }
    (1..=n).map(|k| step * k as f64).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub fs_mhz: f64,
    pub t0_us: f64,
    pub duration_us: f64,
    pub angles_deg: Vec<f64>,
    pub pulse_cycles: u32,
    /// Defaults to the array centre frequency.
    pub pulse_center_frequency_mhz: Option<f64>,
    /// Plane-wave delay reference speed (m/s); defaults to the background
    /// sound speed.
    pub reference_c: Option<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            fs_mhz: scenes::SCENE_FS / 1e6,
            t0_us: 0.0,
            duration_us: scenes::SCENE_DURATION * 1e6,
            angles_deg: scenes::SCENE_ANGLES_DEG.to_vec(),
            pulse_cycles: 3,
            pulse_center_frequency_mhz: None,
            reference_c: None,
        }
    }
}

impl SimulateSection {
    pub fn to_events(
        &self,
        array: &ArrayGeometry<f64>,
        background_c: f64,
    ) -> Result<Vec<TransmitEvent<f64>>> {
        let c = self.reference_c.unwrap_or(background_c);
        let fc = self
            .pulse_center_frequency_mhz
            .map(|f| f * 1e6)
            .unwrap_or(array.center_frequency());
        self.angles_deg
            .iter()
            .map(|&deg| TransmitEvent::plane_wave(array, deg.to_radians(), c, fc, self.pulse_cycles))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    Wci,
    Hwci,
}

impl ModeSpec {
    pub fn name(self) -> &'static str {
        match self {
            Self::Wci => "wci",
            Self::Hwci => "hwci",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSpec {
    Asm,
    Hasm,
    SplitStep,
}

impl KernelSpec {
    pub fn to_kernel(self) -> PropagationKernel {
        match self {
            Self::Asm => PropagationKernel::Asm,
            Self::Hasm => PropagationKernel::Hasm,
            Self::SplitStep => PropagationKernel::SplitStep,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CompoundingSpec {
    Coherent,
    Incoherent,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BeamformSection {
    pub mode: ModeSpec,
    /// Defaults by mode: wci uses asm, hwci uses hasm.
    pub kernel: Option<KernelSpec>,
    pub band_fraction: f64,
    pub compounding: CompoundingSpec,
    pub dynamic_range_db: f64,
    pub image: ImageSection,
}

impl Default for BeamformSection {
    fn default() -> Self {
        Self {
            mode: ModeSpec::Wci,
            kernel: None,
            band_fraction: 0.9,
            compounding: CompoundingSpec::Coherent,
            dynamic_range_db: wavecor::io::DEFAULT_DYNAMIC_RANGE_DB,
            image: ImageSection::default(),
        }
    }
}

impl BeamformSection {
    /// Beamformer configuration for the requested mode, with section
    /// overrides applied.
    pub fn to_config<T: Scalar>(&self) -> Result<BeamformConfig<T>> {
        let mut cfg = match self.mode {
            ModeSpec::Wci => BeamformConfig::wci(),
            ModeSpec::Hwci => BeamformConfig::hwci(),
        };
        if let Some(k) = self.kernel {
            cfg.kernel = k.to_kernel();
        }
        cfg.band_fraction = cast(self.band_fraction);
        cfg.compounding = match self.compounding {
            CompoundingSpec::Coherent => Compounding::Coherent,
            CompoundingSpec::Incoherent => Compounding::Incoherent,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ImageSection {
    pub width_mm: f64,
    pub z_start_mm: f64,
    pub z_end_mm: f64,
    pub lateral_spacing_mm: f64,
    pub axial_spacing_mm: f64,
}

impl Default for ImageSection {
    fn default() -> Self {
        Self {
            width_mm: 19.2,
            z_start_mm: 15.0,
            z_end_mm: 45.0,
            lateral_spacing_mm: 0.05,
            axial_spacing_mm: 0.03,
        }
    }
}

impl ImageSection {
    pub fn to_grid<T: Scalar>(&self) -> Result<ImagingGrid<T>> {
        let dx = self.lateral_spacing_mm * 1e-3;
        let dz = self.axial_spacing_mm * 1e-3;
        let nx = (self.width_mm / self.lateral_spacing_mm).round() as usize;
        let nz = ((self.z_end_mm - self.z_start_mm) / self.axial_spacing_mm).round() as usize + 1;
        ImagingGrid::centered(nx, nz, cast(dx), cast(dz), cast(self.z_start_mm * 1e-3))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvalPinSection {
    pub x_mm: f64,
    pub z_mm: f64,
    pub half_width_mm: f64,
    pub half_depth_mm: f64,
}

impl Default for EvalPinSection {
    fn default() -> Self {
        Self { x_mm: 0.0, z_mm: 20.0, half_width_mm: 2.5, half_depth_mm: 1.5 }
    }
}

impl EvalPinSection {
    pub fn window(&self) -> Rect<f64> {
        Rect {
            x_min: (self.x_mm - self.half_width_mm) * 1e-3,
            x_max: (self.x_mm + self.half_width_mm) * 1e-3,
            z_min: (self.z_mm - self.half_depth_mm) * 1e-3,
            z_max: (self.z_mm + self.half_depth_mm) * 1e-3,
        }
    }
    pub fn label(&self) -> String {
        format!("pin_{:.0}mm", self.z_mm)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvalLesionSection {
    pub x_mm: f64,
    pub z_mm: f64,
    pub radius_mm: f64,
    pub annulus_inner_mm: Option<f64>,
    pub annulus_outer_mm: Option<f64>,
}

impl Default for EvalLesionSection {
    fn default() -> Self {
        let (x, z, r) = scenes::SCENE_LESION;
        Self {
            x_mm: x * 1e3,
            z_mm: z * 1e3,
            radius_mm: r * 1e3,
            annulus_inner_mm: None,
            annulus_outer_mm: None,
        }
    }
}

impl EvalLesionSection {
    pub fn regions(&self) -> (Region<f64>, Region<f64>) {
        let (x, z, r) = (self.x_mm * 1e-3, self.z_mm * 1e-3, self.radius_mm * 1e-3);
        let inner = self.annulus_inner_mm.map(|v| v * 1e-3).unwrap_or(r + 0.5e-3);
        let outer = self.annulus_outer_mm.map(|v| v * 1e-3).unwrap_or(2.0 * r);
        (
            Region::Circle { x, z, radius: r },
            Region::Annulus { x, z, inner, outer },
        )
    }
    pub fn label(&self) -> String {
        format!("lesion_{:.0}mm", self.z_mm)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Pin measurement windows; defaults to the phantom's pins.
    pub pins: Option<Vec<EvalPinSection>>,
    /// Lesion contrast regions; defaults to the phantom's anechoic lesions.
    pub lesions: Option<Vec<EvalLesionSection>>,
    pub sharpness: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { pins: None, lesions: None, sharpness: true }
    }
}

impl EvaluateSection {
    /// Concrete pin windows, falling back to the phantom section.
    pub fn resolved_pins(&self, phantom: &PhantomSection) -> Vec<EvalPinSection> {
        match &self.pins {
            Some(p) => p.clone(),
            None => phantom
                .pins
                .iter()
                .map(|p| EvalPinSection {
                    x_mm: p.x_mm,
                    z_mm: p.z_mm,
                    ..EvalPinSection::default()
                })
                .collect(),
        }
    }

    /// Concrete lesion regions, falling back to the phantom's anechoic
    /// lesions.
    pub fn resolved_lesions(&self, phantom: &PhantomSection) -> Vec<EvalLesionSection> {
        match &self.lesions {
            Some(l) => l.clone(),
            None => phantom
                .lesions
                .iter()
                .filter(|l| l.echogenicity == 0.0)
                .map(|l| EvalLesionSection {
                    x_mm: l.x_mm,
                    z_mm: l.z_mm,
                    radius_mm: l.radius_mm,
                    annulus_inner_mm: None,
                    annulus_outer_mm: None,
                })
                .collect(),
        }
    }
}

/// Applies a layer override such as `fat:10mm,liver:30mm` to a phantom
/// section: the entries stack from the surface and the last one continues to
/// the bottom of the grid (it replaces the background material, so a single
/// entry yields a constant map).
pub fn apply_layers(phantom: &mut PhantomSection, text: &str) -> Result<()> {
    let mut layers = parse_layers(text)?;
    let last = layers.pop().expect("parse_layers yields at least one entry");
    phantom.background = last.material;
    phantom.layers = layers;
    Ok(())
}

/// Parses a layer list such as `fat:10mm,liver:30mm`.
fn parse_layers(text: &str) -> Result<Vec<LayerSection>> {
    text.split(',')
        .map(|part| {
            let part = part.trim();
            let (name, len) = part.split_once(':').ok_or_else(|| {
                Error::Config(format!(
                    "layer {part:?} must look like material:thickness, e.g. fat:10mm"
                ))
            })?;
            let len = len.trim();
            let mm: f64 = len
                .strip_suffix("mm")
                .ok_or_else(|| {
                    Error::Config(format!("layer thickness {len:?} must end in mm"))
                })?
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("layer thickness {len:?}: {e}")))?;
            let material = MaterialSpec::Named(name.trim().to_string());
            material.resolve()?;
            Ok(LayerSection { material, thickness_mm: mm, echogenicity: 1.0 })
        })
        .collect()
}
