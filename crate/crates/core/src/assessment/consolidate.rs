use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footprints::{DamageClass, PixelMask, NUM_CLASSES};
use crate::inference::ScorePlaneTile;
use crate::raster::{TileGrid, Window};

/// How per-pixel scores under a mask are reduced to class totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsolidationMode {
    /// Sum raw scores per class.
    #[default]
    ScoreSum,
    /// Count pixels by their per-pixel argmax class.
    PixelVote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentFlag {
    LowCoverage,
    OffRaster,
    TieBroken,
}

impl AssessmentFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            AssessmentFlag::LowCoverage => "low_coverage",
            AssessmentFlag::OffRaster => "off_raster",
            AssessmentFlag::TieBroken => "tie_broken",
        }
    }
}

impl std::str::FromStr for AssessmentFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low_coverage" => Ok(AssessmentFlag::LowCoverage),
            "off_raster" => Ok(AssessmentFlag::OffRaster),
            "tie_broken" => Ok(AssessmentFlag::TieBroken),
            other => Err(Error::InvalidData(format!("unknown flag `{other}`"))),
        }
    }
}

/// One building's consolidated label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingAssessment {
    pub building_id: String,
    pub class_sums: [f64; NUM_CLASSES],
    pub pixel_count: usize,
    pub predicted: DamageClass,
    /// Sorted, without duplicates.
    pub flags: Vec<AssessmentFlag>,
}

/// Running per-class totals for one building. Partial totals from
/// different tiles merge by addition.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassSums {
    pub sums: [f64; NUM_CLASSES],
    pub pixels: usize,
}

/// Class with the largest value; ties go to the more severe class and
/// `un_classified` loses every tie. Returns whether a tie was broken.
pub fn argmax_severity<V: PartialOrd + Copy>(values: &[V; NUM_CLASSES]) -> (DamageClass, bool) {
    let mut best = DamageClass::TIE_PRIORITY[0];
    for &c in &DamageClass::TIE_PRIORITY[1..] {
        if values[c.index()] > values[best.index()] {
            best = c;
        }
    }
    let ties = DamageClass::ALL
        .iter()
        .filter(|c| values[c.index()] == values[best.index()])
        .count();
    (best, ties > 1)
}

impl ClassSums {
    pub fn merge(&mut self, other: &ClassSums) {
        for k in 0..NUM_CLASSES {
            self.sums[k] += other.sums[k];
        }
        self.pixels += other.pixels;
    }

    /// Adds the pixels of `mask` that fall in `tile_window`, reading scores
    /// from the tile covering that window.
    pub fn add_tile_fragment(
        &mut self,
        mask: &PixelMask,
        tile_window: &Window,
        scores: &ScorePlaneTile,
        mode: ConsolidationMode,
    ) {
        for s in mask.spans() {
            if s.row < tile_window.row_off || s.row >= tile_window.row_end() {
                continue;
            }
            let start = s.start.max(tile_window.col_off);
            let end = s.end.min(tile_window.col_end());
            let lr = s.row - tile_window.row_off;
            for c in start..end {
                let lc = c - tile_window.col_off;
                match mode {
                    ConsolidationMode::ScoreSum => {
                        for k in 0..NUM_CLASSES {
                            self.sums[k] += scores.get(k, lc, lr) as f64;
                        }
                    }
                    ConsolidationMode::PixelVote => {
                        let px: [f32; NUM_CLASSES] = std::array::from_fn(|k| scores.get(k, lc, lr));
                        self.sums[argmax_severity(&px).0.index()] += 1.0;
                    }
                }
            }
            self.pixels += end.saturating_sub(start);
        }
    }

    /// Adds a mask that may span several tiles, looking up each tile's
    /// scores. Fails if a tile holding mask pixels has no scores.
    pub fn accumulate<'a>(
        &mut self,
        mask: &PixelMask,
        grid: &TileGrid,
        lookup: impl Fn(usize, usize) -> Option<&'a ScorePlaneTile>,
        mode: ConsolidationMode,
    ) -> Result<()> {
        let mut touched: Vec<(usize, usize)> = Vec::new();
        for s in mask.spans() {
            if s.is_empty() {
                continue;
            }
            let tr = s.row / grid.tile_size;
            for tc in (s.start / grid.tile_size)..=((s.end - 1) / grid.tile_size) {
                if !touched.contains(&(tc, tr)) {
                    touched.push((tc, tr));
                }
            }
        }
        touched.sort_by_key(|&(c, r)| (r, c));
        for (tc, tr) in touched {
            let tile = lookup(tc, tr).ok_or(Error::MissingScores {
                tile_col: tc,
                tile_row: tr,
            })?;
            self.add_tile_fragment(mask, &grid.window(tc, tr), tile, mode);
        }
        Ok(())
    }

    pub fn finalize(&self, building_id: impl Into<String>, min_pixels: usize) -> BuildingAssessment {
        let mut flags = Vec::new();
        if self.pixels < min_pixels {
            flags.push(AssessmentFlag::LowCoverage);
        }
        let predicted = if self.pixels == 0 {
            flags.push(AssessmentFlag::OffRaster);
            DamageClass::UnClassified
        } else {
            let (best, tie) = argmax_severity(&self.sums);
            if tie {
                flags.push(AssessmentFlag::TieBroken);
            }
            best
        };
        flags.sort();
        BuildingAssessment {
            building_id: building_id.into(),
            class_sums: self.sums,
            pixel_count: self.pixels,
            predicted,
            flags,
        }
    }
}

/// Consolidates mask fragments (possibly from several tiles) of one
/// building against the given score tiles.
pub fn consolidate<'a>(
    building_id: &str,
    fragments: &[PixelMask],
    grid: &TileGrid,
    lookup: impl Fn(usize, usize) -> Option<&'a ScorePlaneTile> + Copy,
    mode: ConsolidationMode,
    min_pixels: usize,
) -> Result<BuildingAssessment> {
    let mut acc = ClassSums::default();
    for frag in fragments {
        let mut part = ClassSums::default();
        part.accumulate(frag, grid, lookup, mode)?;
        acc.merge(&part);
    }
    Ok(acc.finalize(building_id, min_pixels))
}
