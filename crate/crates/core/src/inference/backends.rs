use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::score_plane::{read_score_plane, score_plane_path, ScorePlaneTile};
use crate::error::{Error, Result};
use crate::footprints::{pixel_bounds, rasterize, BuildingFootprint, DamageClass, NUM_CLASSES};
use crate::raster::{GeoTransform, PixelBuffer, Tile, Window};

/// Per-pixel segmentation model producing a [`ScorePlaneTile`] per tile.
pub trait SegmentationBackend: Send + Sync {
    fn name(&self) -> String;

    /// True when output depends only on (seed, tile identity, pixels).
    fn deterministic(&self) -> bool;

    /// Backends that cannot be invoked concurrently return true; the
    /// pipeline then serializes calls.
    fn serial(&self) -> bool {
        false
    }

    fn infer(&self, tile: &Tile, pixels: &PixelBuffer) -> Result<ScorePlaneTile>;
}

fn one_hot(tile: &Tile, labels: impl Fn(usize, usize) -> DamageClass) -> ScorePlaneTile {
    let (w, h) = (tile.window.width, tile.window.height);
    let mut s = ScorePlaneTile::zeros(tile.col as u32, tile.row as u32, w as u32, h as u32);
    for r in 0..h {
        for c in 0..w {
            s.set(labels(c, r).index(), c, r, 1.0);
        }
    }
    s
}

/// Emits one-hot scores from labeled footprints: pixels under a footprint
/// get its class, all other pixels are `no_damage`. Overlaps resolve to the
/// more severe class.
pub struct ReplayOracleBackend {
    footprints: Vec<(BuildingFootprint<f64>, DamageClass, Window)>,
    transform: GeoTransform<f64>,
}

pub fn replay_oracle_backend(
    footprints: &[BuildingFootprint<f64>],
    transform: GeoTransform<f64>,
) -> Result<ReplayOracleBackend> {
    let big = usize::MAX / 4;
    let footprints = footprints
        .iter()
        .filter_map(|f| match f.truth_label {
            None => Some(Err(Error::MissingLabel(f.id.clone()))),
            Some(label) => pixel_bounds(f, &transform, big, big).map(|w| Ok((f.clone(), label, w))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplayOracleBackend {
        footprints,
        transform,
    })
}

impl SegmentationBackend for ReplayOracleBackend {
    fn name(&self) -> String {
        "replay".into()
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn infer(&self, tile: &Tile, _pixels: &PixelBuffer) -> Result<ScorePlaneTile> {
        let win = tile.window;
        let mut labels: Vec<Option<DamageClass>> = vec![None; win.area()];
        for (f, label, bounds) in &self.footprints {
            let Some(sub) = bounds.intersect(&win) else { continue };
            let mask = rasterize(f, &self.transform, sub);
            for (c, r) in mask.pixels() {
                let slot = &mut labels[(r - win.row_off) * win.width + (c - win.col_off)];
                if slot.is_none_or(|cur| label.severity_rank() > cur.severity_rank()) {
                    *slot = Some(*label);
                }
            }
        }
        Ok(one_hot(tile, |c, r| {
            labels[r * win.width + c].unwrap_or(DamageClass::NoDamage)
        }))
    }
}

/// Uniform scores in `[0, 1)` from a counter-based stream: the ChaCha
/// stream is selected by the tile coordinates and each value's position is
/// fixed by `(class, row, col)`, so results do not depend on scheduling.
#[derive(Debug, Clone, Copy)]
pub struct UniformRandomBackend {
    pub seed: u64,
}

pub fn uniform_random_backend(seed: u64) -> UniformRandomBackend {
    UniformRandomBackend { seed }
}

impl SegmentationBackend for UniformRandomBackend {
    fn name(&self) -> String {
        format!("random:{}", self.seed)
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn infer(&self, tile: &Tile, _pixels: &PixelBuffer) -> Result<ScorePlaneTile> {
        let (w, h) = (tile.window.width, tile.window.height);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((tile.col as u64) << 32) | tile.row as u64);
        let scores: Vec<f32> = (0..NUM_CLASSES * w * h).map(|_| rng.gen::<f32>()).collect();
        ScorePlaneTile::from_scores(tile.col as u32, tile.row as u32, w as u32, h as u32, scores)
    }
}

/// Every pixel one-hot in a fixed class.
#[derive(Debug, Clone, Copy)]
pub struct ConstantBackend {
    pub class: DamageClass,
}

pub fn constant_backend(class: DamageClass) -> ConstantBackend {
    ConstantBackend { class }
}

impl SegmentationBackend for ConstantBackend {
    fn name(&self) -> String {
        format!("constant:{}", self.class)
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn infer(&self, tile: &Tile, _pixels: &PixelBuffer) -> Result<ScorePlaneTile> {
        let (w, h) = (tile.window.width as u32, tile.window.height as u32);
        let mut s = ScorePlaneTile::zeros(tile.col as u32, tile.row as u32, w, h);
        s.plane_mut(self.class).fill(1.0);
        Ok(s)
    }
}

/// Reads precomputed `scores_<col>_<row>.ssp` files written by an external
/// model.
#[derive(Debug, Clone)]
pub struct ScoreDirBackend {
    pub dir: PathBuf,
}

impl SegmentationBackend for ScoreDirBackend {
    fn name(&self) -> String {
        format!("scoredir:{}", self.dir.display())
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn infer(&self, tile: &Tile, _pixels: &PixelBuffer) -> Result<ScorePlaneTile> {
        let path = score_plane_path(&self.dir, tile.col, tile.row);
        if !path.exists() {
            return Err(Error::MissingScores {
                tile_col: tile.col,
                tile_row: tile.row,
            });
        }
        let s = read_score_plane(&path)?;
        let expect = (tile.col as u32, tile.row as u32, tile.window.width as u32, tile.window.height as u32);
        if (s.tile_col, s.tile_row, s.width, s.height) != expect {
            return Err(Error::InvalidData(format!(
                "{}: header describes tile ({}, {}) {}x{}, expected ({}, {}) {}x{}",
                path.display(),
                s.tile_col,
                s.tile_row,
                s.width,
                s.height,
                expect.0,
                expect.1,
                expect.2,
                expect.3
            )));
        }
        Ok(s)
    }
}
