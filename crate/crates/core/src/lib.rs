//! Procedural generator of synthetic, pixel-annotated crop/weed field images.
//!
//! The pipeline builds a textured soil patch from blended noise, assembles
//! plants out of kinematically posed leaves, scatters them on the ground and
//! renders every scene twice from a single shared visibility resolve: a shaded
//! RGB image and an unlit label mask. Segmentation metrics and a small
//! per-pixel baseline segmenter close the train/evaluate loop.
//!
//! Module overview:
//!
//! - [`rng`], [`math`], [`config`], [`raster`]: seeded randomness, geometry
//!   helpers, the generator configuration and plain image rasters.
//! - [`leafgen`]: leaf skeleton kinematics, skinning and texture maps.
//! - [`plantgen`]: multi-layer radial assembly of leaves into plants.
//! - [`terrain`]: gradient noise, soil textures and the displaced ground mesh.
//! - [`scene`]: camera, light and object scattering.
//! - [`render`]: software rasterizer producing the RGB and label passes.
//! - [`dataset`]: whole-dataset generation and the on-disk layout.
//! - [`metrics`]: confusion matrices and GA / CA / IoU / P / R.
//! - [`baseline`]: diagonal-Gaussian per-pixel segmenter.

pub mod baseline;
pub mod config;
pub mod dataset;
pub mod error;
pub mod leafgen;
pub mod math;
pub mod metrics;
pub mod plantgen;
pub mod raster;
pub mod render;
pub mod rng;
pub mod scene;
pub mod terrain;

pub use config::GeneratorConfig;
pub use error::{Error, Result};
pub use rng::Rng;

/// Version string recorded in manifests and model files.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
