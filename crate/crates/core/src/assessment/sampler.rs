use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footprints::{BuildingFootprint, NUM_CLASSES};
use crate::raster::TileGrid;

/// Buildings per class in one tile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileClassCounts {
    pub tile_col: usize,
    pub tile_row: usize,
    pub counts: [u64; NUM_CLASSES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub target: [f64; NUM_CLASSES],
    pub tiles: Vec<TileClassCounts>,
    pub sample_count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDraw {
    pub tile_col: usize,
    pub tile_row: usize,
    pub draw_index: usize,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn uniform(tiles: Vec<TileClassCounts>, sample_count: usize, seed: u64) -> Self {
        SamplerSpec {
            target: [1.0 / NUM_CLASSES as f64; NUM_CLASSES],
            tiles,
            sample_count,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("target weights must be finite and non-negative".into()));
        }
        let total: f64 = self.target.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("target weights sum to {total}, expected 1")));
        }
        if self.sample_count == 0 {
            return Err(Error::InvalidArgument("sample_count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn global_counts(&self) -> [u64; NUM_CLASSES] {
        let mut g = [0u64; NUM_CLASSES];
        for t in &self.tiles {
            for (acc, &n) in g.iter_mut().zip(&t.counts) {
                *acc += n;
            }
        }
        g
    }
}

/// `w_t = sum_c n_tc * target_c / N_c`, skipping classes with `N_c = 0`.
pub fn tile_weights(spec: &SamplerSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let global = spec.global_counts();
    Ok(spec
        .tiles
        .iter()
        .map(|t| {
            (0..NUM_CLASSES)
                .filter(|&k| global[k] > 0)
                .map(|k| t.counts[k] as f64 * spec.target[k] / global[k] as f64)
                .sum()
        })
        .collect())
}

/// Draws `sample_count` tiles with replacement, proportionally to weight.
pub fn weighted_tile_sample(spec: &SamplerSpec) -> Result<Vec<SampleDraw>> {
    let weights = tile_weights(spec)?;
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::NoSampleableTiles);
    }
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Internal(format!("sampler weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.sample_count)
        .map(|draw_index| {
            let t = &spec.tiles[dist.sample(&mut rng)];
            SampleDraw {
                tile_col: t.tile_col,
                tile_row: t.tile_row,
                draw_index,
                seed: spec.seed,
            }
        })
        .collect())
}

/// Counts labeled buildings per tile, assigning each to the tile holding
/// the center of its bounding box. Unlabeled and off-raster footprints are
/// skipped. Tiles without buildings are listed with zero counts.
pub fn tile_class_counts(footprints: &[BuildingFootprint<f64>], grid: &TileGrid) -> Vec<TileClassCounts> {
    let mut out: Vec<TileClassCounts> = grid
        .tiles()
        .map(|t| TileClassCounts {
            tile_col: t.col,
            tile_row: t.row,
            counts: [0; NUM_CLASSES],
        })
        .collect();
    for f in footprints {
        let Some(label) = f.truth_label else { continue };
        let b = f.bounds();
        let (c, r) = grid
            .transform
            .world_to_pixel((b.min_x + b.max_x) / 2.0, (b.min_y + b.max_y) / 2.0);
        if c < 0.0 || r < 0.0 || c >= grid.raster_width as f64 || r >= grid.raster_height as f64 {
            continue;
        }
        let (tc, tr) = grid.tile_of(c as usize, r as usize);
        out[grid.index(tc, tr)].counts[label.index()] += 1;
    }
    out
}

/// Class distribution of the buildings in the drawn tiles, normalized.
pub fn sampled_class_distribution(spec: &SamplerSpec, draws: &[SampleDraw]) -> [f64; NUM_CLASSES] {
    let mut totals = [0.0; NUM_CLASSES];
    for d in draws {
        if let Some(t) = spec.tiles.iter().find(|t| (t.tile_col, t.tile_row) == (d.tile_col, d.tile_row)) {
            for (acc, &n) in totals.iter_mut().zip(&t.counts) {
                *acc += n as f64;
            }
        }
    }
    let n: f64 = totals.iter().sum();
    if n > 0.0 {
        totals.iter_mut().for_each(|v| *v /= n);
    }
    totals
}
