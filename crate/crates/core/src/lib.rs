//! Per-building damage assessment from georeferenced sUAS orthomosaics and
//! building footprints.
//!
//! The pipeline tiles a raster, runs a segmentation backend per tile,
//! rasterizes each footprint under the tile grid and sums per-class pixel
//! scores into one label per building. Around it sit evaluation (macro F1,
//! split manifests), misalignment simulation and recovery, and the
//! GeoJSON/CSV products.
//!
//! Geometry and metric code is generic over [`scalar::Scalar`]; the aliases
//! below fix the common choices.

pub mod alignment;
pub mod assessment;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod footprints;
pub mod inference;
pub mod products;
pub mod raster;
pub mod scalar;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result, Warning};

pub type GeoTransform = raster::GeoTransform<f64>;
pub type GeoTransform32 = raster::GeoTransform<f32>;
pub type BuildingFootprint = footprints::BuildingFootprint<f64>;
pub type BuildingFootprint32 = footprints::BuildingFootprint<f32>;
pub type Ring = footprints::Ring<f64>;
pub type Point = footprints::Point<f64>;
pub type ClassMetrics = evaluation::ClassMetrics<f64>;
pub type ClassMetrics32 = evaluation::ClassMetrics<f32>;
