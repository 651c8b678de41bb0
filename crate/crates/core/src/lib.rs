//! Frequency-domain ultrasound beamforming toolkit.
//!
//! Images are formed by cross-correlating a forward-marched transmit field
//! with a backward-marched receive field, per temporal frequency, and
//! compounding over transmissions. A heterogeneous one-step operator corrects
//! the march for laterally varying sound speed when a medium map is supplied.

pub mod beamform;
pub mod error;
pub mod grid;
pub mod image;
pub mod io;
pub mod kernels;
pub mod medium;
pub mod metrics;
pub mod pulse;
pub mod scalar;
pub mod scenes;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Single-precision medium map.
pub type MediumMap32 = medium::MediumMap<f32>;
/// Double-precision medium map.
pub type MediumMap64 = medium::MediumMap<f64>;
/// Single-precision channel data.
pub type ChannelData32 = beamform::ChannelData<f32>;
/// Double-precision channel data.
pub type ChannelData64 = beamform::ChannelData<f64>;
/// Single-precision image plane.
pub type ImagePlane32 = image::ImagePlane<f32>;
/// Double-precision image plane.
pub type ImagePlane64 = image::ImagePlane<f64>;
/// Single-precision imaging grid.
pub type ImagingGrid32 = grid::ImagingGrid<f32>;
/// Double-precision imaging grid.
pub type ImagingGrid64 = grid::ImagingGrid<f64>;
