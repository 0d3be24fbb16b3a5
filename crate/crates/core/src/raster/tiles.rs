use serde::{Deserialize, Serialize};

use super::GeoTransform;
use crate::error::{Error, Result};

/// Tile edge length used when none is configured.
pub const DEFAULT_TILE_SIZE: usize = 2048;

/// Rectangular pixel window in raster coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub col_off: usize,
    pub row_off: usize,
    pub width: usize,
    pub height: usize,
}

impl Window {
    pub fn new(col_off: usize, row_off: usize, width: usize, height: usize) -> Self {
        Window {
            col_off,
            row_off,
            width,
            height,
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Window::new(0, 0, width, height)
    }

    #[inline]
    pub fn col_end(&self) -> usize {
        self.col_off + self.width
    }

    #[inline]
    pub fn row_end(&self) -> usize {
        self.row_off + self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    #[inline]
    pub fn contains(&self, col: usize, row: usize) -> bool {
        col >= self.col_off && col < self.col_end() && row >= self.row_off && row < self.row_end()
    }

    pub fn intersect(&self, other: &Window) -> Option<Window> {
        let c0 = self.col_off.max(other.col_off);
        let r0 = self.row_off.max(other.row_off);
        let c1 = self.col_end().min(other.col_end());
        let r1 = self.row_end().min(other.row_end());
        (c0 < c1 && r0 < r1).then(|| Window::new(c0, r0, c1 - c0, r1 - r0))
    }
}

/// One tile of a [`TileGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub col: usize,
    pub row: usize,
    pub window: Window,
    pub transform: GeoTransform<f64>,
}

/// Non-overlapping partition of a raster into square tiles. Edge tiles keep
/// their natural, smaller size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileGrid {
    pub raster_width: usize,
    pub raster_height: usize,
    pub tile_size: usize,
    pub cols: usize,
    pub rows: usize,
    pub transform: GeoTransform<f64>,
}

impl TileGrid {
    pub fn new(
        raster_width: usize,
        raster_height: usize,
        tile_size: usize,
        transform: GeoTransform<f64>,
    ) -> Result<Self> {
        if tile_size == 0 {
            return Err(Error::InvalidArgument("tile size must be at least 1".into()));
        }
        Ok(TileGrid {
            raster_width,
            raster_height,
            tile_size,
            cols: raster_width.div_ceil(tile_size),
            rows: raster_height.div_ceil(tile_size),
            transform,
        })
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn window(&self, col: usize, row: usize) -> Window {
        let col_off = col * self.tile_size;
        let row_off = row * self.tile_size;
        Window::new(
            col_off,
            row_off,
            self.tile_size.min(self.raster_width - col_off),
            self.tile_size.min(self.raster_height - row_off),
        )
    }

    pub fn tile(&self, col: usize, row: usize) -> Tile {
        let window = self.window(col, row);
        Tile {
            col,
            row,
            window,
            transform: self.transform.shifted(window.col_off, window.row_off),
        }
    }

    /// Row-major linear index of a tile.
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.cols + col
    }

    /// Tile coordinates containing pixel `(col, row)`.
    pub fn tile_of(&self, col: usize, row: usize) -> (usize, usize) {
        (col / self.tile_size, row / self.tile_size)
    }

    /// Tiles in row-major order.
    pub fn tiles(&self) -> impl Iterator<Item = Tile> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| self.tile(c, r)))
    }

    /// Tiles whose window intersects `w`, row-major.
    pub fn tiles_touching(&self, w: &Window) -> impl Iterator<Item = Tile> + '_ {
        let (c0, r0, c1, r1) = if w.is_empty() {
            (0, 0, 0, 0)
        } else {
            let c0 = w.col_off / self.tile_size;
            let r0 = w.row_off / self.tile_size;
            let c1 = (w.col_end().min(self.raster_width)).div_ceil(self.tile_size);
            let r1 = (w.row_end().min(self.raster_height)).div_ceil(self.tile_size);
            (c0, r0, c1.max(c0), r1.max(r0))
        };
        (r0..r1).flat_map(move |r| (c0..c1).map(move |c| self.tile(c, r)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(w: usize, h: usize, ts: usize) -> TileGrid {
        TileGrid::new(w, h, ts, GeoTransform::new(0.0, 0.0, 1.0, -1.0).unwrap()).unwrap()
    }

    #[test]
    fn single_full_tile() {
        let g = grid(2048, 2048, DEFAULT_TILE_SIZE);
        assert_eq!(g.len(), 1);
        assert_eq!(g.window(0, 0), Window::new(0, 0, 2048, 2048));
    }

    #[test]
    fn four_full_tiles() {
        let g = grid(4096, 4096, 2048);
        assert_eq!((g.cols, g.rows), (2, 2));
        assert!(g.tiles().all(|t| t.window.width == 2048 && t.window.height == 2048));
    }

    #[test]
    fn edge_tiles_keep_natural_size() {
        // 5000 = 2*2048 + 904, 3000 = 2048 + 952
        let g = grid(5000, 3000, 2048);
        assert_eq!((g.cols, g.rows), (3, 2));
        assert_eq!(g.len(), 6);
        assert_eq!(g.window(2, 0).width, 904);
        assert_eq!(g.window(0, 1).height, 952);
        assert_eq!(g.window(2, 1), Window::new(4096, 2048, 904, 952));
    }

    #[test]
    fn zero_tile_size_rejected() {
        let t = GeoTransform::new(0.0, 0.0, 1.0, -1.0).unwrap();
        assert!(matches!(
            TileGrid::new(10, 10, 0, t),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn tile_transform_is_shifted_origin() {
        let g = TileGrid::new(
            100,
            100,
            30,
            GeoTransform::new(10.0, 50.0, 0.5, -0.5).unwrap(),
        )
        .unwrap();
        let t = g.tile(1, 2);
        assert_eq!(t.transform.origin_x, 10.0 + 30.0 * 0.5);
        assert_eq!(t.transform.origin_y, 50.0 - 60.0 * 0.5);
    }

    #[test]
    fn touching_tiles() {
        let g = grid(100, 100, 30);
        let hits: Vec<_> = g
            .tiles_touching(&Window::new(25, 25, 10, 40))
            .map(|t| (t.col, t.row))
            .collect();
        assert_eq!(hits, vec![(0, 0), (1, 0), (0, 1), (1, 1), (0, 2), (1, 2)]);
    }

    proptest! {
        #[test]
        fn tiles_partition_the_raster(w in 1usize..300, h in 1usize..300, ts in 1usize..130) {
            let g = grid(w, h, ts);
            let mut seen = vec![0u8; w * h];
            let mut total = 0;
            for t in g.tiles() {
                total += t.window.area();
                for r in t.window.row_off..t.window.row_end() {
                    for c in t.window.col_off..t.window.col_end() {
                        seen[r * w + c] += 1;
                    }
                }
            }
            prop_assert_eq!(total, w * h);
            prop_assert!(seen.iter().all(|&n| n == 1));
        }
    }
}
