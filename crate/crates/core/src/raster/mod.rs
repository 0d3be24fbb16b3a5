//! Georeferenced rasters: geotransform math, tiled window access, GSD
//! resampling and validation.

mod geotransform;
pub mod io;
mod resample;
mod source;
mod tiles;

pub use geotransform::GeoTransform;
pub use resample::{resample_to_gsd, resampled_dim, ResampleMethod};
pub use source::{GeoRaster, MemorySource, MeterLease, PixelBuffer, PixelMeter, PixelSource};
pub use tiles::{Tile, TileGrid, Window, DEFAULT_TILE_SIZE};

use crate::error::{Result, Warning};

/// Smallest ground sample distance seen operationally, in meters per pixel.
pub const GSD_ENVELOPE_MIN: f64 = 0.0165;
/// Largest ground sample distance seen operationally, in meters per pixel.
pub const GSD_ENVELOPE_MAX: f64 = 0.253;

pub fn tile_grid(raster: &GeoRaster, tile_size: usize) -> Result<TileGrid> {
    TileGrid::new(raster.width, raster.height, tile_size, raster.transform)
}

/// Warns when the raster GSD falls outside the inclusive operational
/// envelope, or when its pixels are not square. Never fails.
pub fn validate_gsd(raster: &GeoRaster) -> Vec<Warning> {
    let mut out = Vec::new();
    let gx = raster.transform.pixel_width.abs();
    let gy = raster.transform.pixel_height.abs();
    for (axis, g) in [("x", gx), ("y", gy)] {
        if !(GSD_ENVELOPE_MIN..=GSD_ENVELOPE_MAX).contains(&g) {
            out.push(Warning::new(
                "gsd_out_of_envelope",
                format!(
                    "GSD {g} m/px along {axis} is outside [{GSD_ENVELOPE_MIN}, {GSD_ENVELOPE_MAX}] m/px"
                ),
            ));
        }
    }
    if (gx - gy).abs() > 1e-12 * gx.max(gy) {
        out.push(Warning::new(
            "non_square_pixels",
            format!("pixel size {gx} x {gy} m is not square"),
        ));
    }
    out
}
