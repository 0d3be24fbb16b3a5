//! Building footprints: damage classes, polygons, GeoJSON I/O and
//! pixel-center rasterization.

mod class;
pub mod geojson;
mod polygon;
mod rasterize;

pub use class::{DamageClass, NUM_CLASSES};
pub use geojson::{emit_footprints, parse_footprints, ParsedFootprints};
pub use polygon::{Bounds, BuildingFootprint, Point, Ring};
pub use rasterize::{mask_iou, rasterize, PixelMask, Span};

use crate::raster::{GeoTransform, Window};

/// Pixel window covering the footprint's bounding box (one pixel of slack
/// on each side), clipped to `[0, width) x [0, height)`. `None` when the
/// footprint lies entirely off the raster.
pub fn pixel_bounds(
    f: &BuildingFootprint<f64>,
    t: &GeoTransform<f64>,
    width: usize,
    height: usize,
) -> Option<Window> {
    let b = f.bounds();
    let (ca, ra) = t.world_to_pixel(b.min_x, b.min_y);
    let (cb, rb) = t.world_to_pixel(b.max_x, b.max_y);
    let c0 = (ca.min(cb).floor() - 1.0).max(0.0);
    let r0 = (ra.min(rb).floor() - 1.0).max(0.0);
    let c1 = (ca.max(cb).ceil() + 1.0).min(width as f64);
    let r1 = (ra.max(rb).ceil() + 1.0).min(height as f64);
    if !(c0 < c1 && r0 < r1) {
        return None;
    }
    let (c0, r0, c1, r1) = (c0 as usize, r0 as usize, c1 as usize, r1 as usize);
    Some(Window::new(c0, r0, c1 - c0, r1 - r0))
}
