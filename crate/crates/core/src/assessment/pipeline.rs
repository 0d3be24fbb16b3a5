use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::consolidate::{BuildingAssessment, ClassSums, ConsolidationMode};
use crate::error::{Error, Result, Warning};
use crate::footprints::{pixel_bounds, rasterize, BuildingFootprint};
use crate::inference::SegmentationBackend;
use crate::raster::{GeoRaster, PixelMeter, Tile, TileGrid, DEFAULT_TILE_SIZE};

pub const DEFAULT_MAX_PIXEL_BYTES: u64 = 512 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct AssessOptions {
    pub tile_size: usize,
    pub min_pixels: usize,
    pub workers: usize,
    pub mode: ConsolidationMode,
    /// Cap on resident pixel-buffer bytes.
    pub max_pixel_bytes: u64,
    /// Overrides the in-flight tile count derived from `workers` and the cap.
    pub max_tiles_in_flight: Option<usize>,
}

impl Default for AssessOptions {
    fn default() -> Self {
        AssessOptions {
            tile_size: DEFAULT_TILE_SIZE,
            min_pixels: 1,
            workers: default_workers(),
            mode: ConsolidationMode::ScoreSum,
            max_pixel_bytes: DEFAULT_MAX_PIXEL_BYTES,
            max_tiles_in_flight: None,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub wall_seconds: f64,
    pub tile_count: usize,
    pub building_count: usize,
    /// Size of the raster payload consumed.
    pub input_bytes: u64,
    /// Decoded pixel bytes read across all tiles.
    pub pixel_bytes_read: u64,
    pub backend_name: String,
    pub workers: usize,
    pub max_tiles_in_flight: usize,
    pub peak_pixel_bytes: u64,
    pub warnings: Vec<Warning>,
}

impl RunStats {
    pub fn input_gigabytes(&self) -> f64 {
        self.input_bytes as f64 / 1e9
    }
}

/// Number of tiles processed concurrently under the pixel cap.
pub fn tiles_in_flight(raster: &GeoRaster, grid: &TileGrid, opts: &AssessOptions) -> Result<usize> {
    let tile_bytes = grid.tile_size.min(raster.width) as u64 * grid.tile_size.min(raster.height) as u64 * raster.bands as u64;
    if tile_bytes > opts.max_pixel_bytes {
        return Err(Error::InvalidArgument(format!(
            "a {tile_bytes}-byte tile does not fit the {}-byte pixel cap",
            opts.max_pixel_bytes
        )));
    }
    let by_cap = (opts.max_pixel_bytes / tile_bytes) as usize;
    let want = opts.max_tiles_in_flight.unwrap_or(opts.workers.max(1));
    Ok(want.clamp(1, by_cap))
}

struct TileResult {
    partials: Vec<(usize, ClassSums)>,
    bytes: u64,
}

/// Tiles the raster, runs the backend on every tile, rasterizes each
/// footprint per tile and consolidates. Output follows footprint order.
pub fn assess_run(
    raster: &GeoRaster,
    footprints: &[BuildingFootprint<f64>],
    backend: &dyn SegmentationBackend,
    opts: &AssessOptions,
) -> Result<(Vec<BuildingAssessment>, RunStats)> {
    let started = Instant::now();
    let grid = TileGrid::new(raster.width, raster.height, opts.tile_size, raster.transform)?;
    let in_flight = tiles_in_flight(raster, &grid, opts)?;
    let workers = opts.workers.max(1);
    let mut warnings = crate::raster::validate_gsd(raster);

    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); grid.len()];
    for (i, f) in footprints.iter().enumerate() {
        if f.area() == 0.0 {
            warnings.push(Warning::new("zero_area", format!("footprint `{}` has zero area", f.id)));
        }
        if let Some(w) = pixel_bounds(f, &raster.transform, raster.width, raster.height) {
            for t in grid.tiles_touching(&w) {
                candidates[grid.index(t.col, t.row)].push(i);
            }
        }
    }

    let meter = PixelMeter::new();
    let metered = raster.clone().with_meter(meter.clone());
    let serial = Mutex::new(());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;

    let process = |tile: &Tile| -> Result<TileResult> {
        let pixels = metered.read_window(tile.window)?;
        let bytes = pixels.byte_len() as u64;
        let scores = if backend.serial() {
            let _guard = serial.lock().map_err(|_| Error::Internal("backend lock poisoned".into()))?;
            backend.infer(tile, &pixels)?
        } else {
            backend.infer(tile, &pixels)?
        };
        drop(pixels);
        if (scores.width as usize, scores.height as usize) != (tile.window.width, tile.window.height) {
            return Err(Error::Backend {
                backend: backend.name(),
                message: format!(
                    "tile ({}, {}) scores are {}x{}, expected {}x{}",
                    tile.col, tile.row, scores.width, scores.height, tile.window.width, tile.window.height
                ),
            });
        }
        let partials = candidates[grid.index(tile.col, tile.row)]
            .iter()
            .map(|&i| {
                let mask = rasterize(&footprints[i], &raster.transform, tile.window);
                let mut acc = ClassSums::default();
                acc.add_tile_fragment(&mask, &tile.window, &scores, opts.mode);
                (i, acc)
            })
            .collect();
        Ok(TileResult { partials, bytes })
    };

    let tiles: Vec<Tile> = grid.tiles().collect();
    let mut sums = vec![ClassSums::default(); footprints.len()];
    let mut pixel_bytes_read = 0u64;
    for chunk in tiles.chunks(in_flight) {
        let results: Vec<TileResult> = pool.install(|| chunk.par_iter().map(process).collect::<Result<_>>())?;
        for r in results {
            pixel_bytes_read += r.bytes;
            for (i, part) in r.partials {
                sums[i].merge(&part);
            }
        }
    }

    let assessments: Vec<BuildingAssessment> = footprints
        .iter()
        .zip(&sums)
        .map(|(f, s)| s.finalize(f.id.clone(), opts.min_pixels))
        .collect();
    let stats = RunStats {
        wall_seconds: started.elapsed().as_secs_f64(),
        tile_count: grid.len(),
        building_count: assessments.len(),
        input_bytes: raster.payload_bytes(),
        pixel_bytes_read,
        backend_name: backend.name(),
        workers,
        max_tiles_in_flight: in_flight,
        peak_pixel_bytes: meter.peak() as u64,
        warnings,
    };
    Ok((assessments, stats))
}
