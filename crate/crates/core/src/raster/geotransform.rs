use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Axis-aligned affine transform between pixel and world coordinates.
///
/// `(origin_x, origin_y)` is the world position of the top-left corner of
/// pixel (0, 0). North-up rasters have a negative `pixel_height`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform<T = f64> {
    pub origin_x: T,
    pub origin_y: T,
    pub pixel_width: T,
    pub pixel_height: T,
}

impl<T: Scalar> GeoTransform<T> {
    pub fn new(origin_x: T, origin_y: T, pixel_width: T, pixel_height: T) -> Result<Self> {
        let t = GeoTransform {
            origin_x,
            origin_y,
            pixel_width,
            pixel_height,
        };
        t.validate()?;
        Ok(t)
    }

    /// North-up transform with square pixels of size `gsd`.
    pub fn north_up(origin_x: T, origin_y: T, gsd: T) -> Result<Self> {
        Self::new(origin_x, origin_y, gsd, -gsd)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.origin_x, self.origin_y, self.pixel_width, self.pixel_height]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "geotransform terms must be finite".into(),
            ));
        }
        if self.pixel_width == T::zero() || self.pixel_height == T::zero() {
            return Err(Error::InvalidArgument(
                "geotransform pixel size must be non-zero".into(),
            ));
        }
        Ok(())
    }

    /// World coordinates to fractional pixel coordinates `(col, row)`.
    /// Results may fall outside the raster.
    #[inline]
    pub fn world_to_pixel(&self, x: T, y: T) -> (T, T) {
        (
            (x - self.origin_x) / self.pixel_width,
            (y - self.origin_y) / self.pixel_height,
        )
    }

    #[inline]
    pub fn pixel_to_world(&self, col: T, row: T) -> (T, T) {
        (
            self.origin_x + col * self.pixel_width,
            self.origin_y + row * self.pixel_height,
        )
    }

    /// World X of the center of pixel column `col`.
    #[inline]
    pub fn center_x(&self, col: usize) -> T {
        self.origin_x + (T::from_usize_lossy(col) + T::lit(0.5)) * self.pixel_width
    }

    /// World Y of the center of pixel row `row`.
    #[inline]
    pub fn center_y(&self, row: usize) -> T {
        self.origin_y + (T::from_usize_lossy(row) + T::lit(0.5)) * self.pixel_height
    }

    /// Ground sample distance along X (meters per pixel).
    pub fn gsd(&self) -> T {
        self.pixel_width.abs()
    }

    /// Transform of a sub-window whose top-left pixel is `(col_off, row_off)`.
    pub fn shifted(&self, col_off: usize, row_off: usize) -> Self {
        let (x, y) = self.pixel_to_world(T::from_usize_lossy(col_off), T::from_usize_lossy(row_off));
        GeoTransform {
            origin_x: x,
            origin_y: y,
            ..*self
        }
    }
}
