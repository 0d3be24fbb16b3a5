//! Footprint/imagery misalignment: planting offsets, recovering them by
//! exhaustive translation search, and measuring the F1 cost.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assessment::{assess_run, AssessOptions, ClassSums, ConsolidationMode};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_run, AlignmentMode};
use crate::footprints::{pixel_bounds, rasterize, BuildingFootprint, PixelMask};
use crate::inference::{ScorePlaneTile, SegmentationBackend};
use crate::raster::{GeoRaster, TileGrid, Window, DEFAULT_TILE_SIZE};

/// Translates every footprint by `(dx, dy)` meters. The planted offset is
/// added to each footprint's recorded `alignment_offset`.
pub fn perturb(footprints: &[BuildingFootprint<f64>], dx: f64, dy: f64) -> Vec<BuildingFootprint<f64>> {
    footprints.iter().map(|f| f.translate(dx, dy)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentObjective {
    /// Mean share of a building's score mass held by its dominant class.
    #[default]
    Concentration,
    /// Mean correlation between mask outlines and image gradient magnitude.
    MaskCorrelation,
}

impl fmt::Display for AlignmentObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlignmentObjective::Concentration => "concentration",
            AlignmentObjective::MaskCorrelation => "mask_correlation",
        })
    }
}

impl FromStr for AlignmentObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concentration" => Ok(AlignmentObjective::Concentration),
            "mask_correlation" => Ok(AlignmentObjective::MaskCorrelation),
            other => Err(Error::InvalidArgument(format!(
                "unknown objective `{other}` (concentration|mask_correlation)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSearchSpec {
    /// Half-width of the search square, meters per axis.
    pub window: f64,
    /// Grid spacing, meters.
    pub step: f64,
    pub objective: AlignmentObjective,
    /// Tile size used when computing backend scores.
    pub tile_size: usize,
    pub keep_surface: bool,
}

impl AlignmentSearchSpec {
    pub fn new(window: f64, step: f64, objective: AlignmentObjective) -> Self {
        AlignmentSearchSpec {
            window,
            step,
            objective,
            tile_size: DEFAULT_TILE_SIZE,
            keep_surface: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.step)));
        }
        if !(self.window.is_finite() && self.window >= self.step) {
            return Err(Error::InvalidArgument(format!(
                "window {} must be at least the step {}",
                self.window, self.step
            )));
        }
        if self.tile_size == 0 {
            return Err(Error::InvalidArgument("tile size must be at least 1".into()));
        }
        Ok(())
    }

    /// Grid steps per side: offsets are `k * step` for `k` in `-K..=K`.
    pub fn steps_per_side(&self) -> i64 {
        (self.window / self.step * (1.0 + 1e-12)).floor() as i64
    }

    pub fn offset(&self, k: i64) -> f64 {
        k as f64 * self.step
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub kx: i64,
    pub ky: i64,
    pub dx: f64,
    pub dy: f64,
    /// `None` where no footprint had pixels on the raster.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub best_offset: (f64, f64),
    /// Grid indices of `best_offset`, in steps.
    pub best_index: (i64, i64),
    pub objective: AlignmentObjective,
    pub objective_value: f64,
    pub surface: Option<Vec<SurfacePoint>>,
}

struct Prepared {
    grid: TileGrid,
    scores: HashMap<(usize, usize), ScorePlaneTile>,
    gradients: Vec<Option<GradientPatch>>,
}

/// Gradient magnitude over a fixed pixel region around one footprint.
struct GradientPatch {
    region: Window,
    values: Vec<f64>,
}

/// Footprint bounding box grown by `pad_px` pixels and clipped to the
/// raster; covers every translated mask the search will evaluate.
fn search_region(f: &BuildingFootprint<f64>, raster: &GeoRaster, pad_px: usize) -> Option<Window> {
    let b = f.bounds();
    let (ca, ra) = raster.transform.world_to_pixel(b.min_x, b.min_y);
    let (cb, rb) = raster.transform.world_to_pixel(b.max_x, b.max_y);
    let pad = pad_px as f64 + 1.0;
    let c0 = (ca.min(cb).floor() - pad).max(0.0);
    let r0 = (ra.min(rb).floor() - pad).max(0.0);
    let c1 = (ca.max(cb).ceil() + pad).min(raster.width as f64);
    let r1 = (ra.max(rb).ceil() + pad).min(raster.height as f64);
    if !(c0 < c1 && r0 < r1) {
        return None;
    }
    let (c0, r0) = (c0 as usize, r0 as usize);
    Some(Window::new(c0, r0, c1 as usize - c0, r1 as usize - r0))
}

fn gradient_patch(raster: &GeoRaster, region: Window) -> Result<GradientPatch> {
    let px = raster.read_window(region)?;
    let (w, h) = (region.width, region.height);
    let mut values = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let (cl, cr) = (c.saturating_sub(1), (c + 1).min(w - 1));
            let (ru, rd) = (r.saturating_sub(1), (r + 1).min(h - 1));
            let gx = (px.gray(cr, r) - px.gray(cl, r)) / (cr - cl).max(1) as f64;
            let gy = (px.gray(c, rd) - px.gray(c, ru)) / (rd - ru).max(1) as f64;
            values[r * w + c] = gx.hypot(gy);
        }
    }
    Ok(GradientPatch { region, values })
}

/// Normalized cross-correlation between the outline of `mask` and the
/// gradient patch. `None` when either side has zero variance.
fn outline_ncc(mask: &PixelMask, patch: &GradientPatch) -> Option<f64> {
    let reg = patch.region;
    let inside = |c: usize, r: usize| mask.contains(c, r);
    let n = reg.area() as f64;
    let mut outline = vec![0.0; reg.area()];
    for (c, r) in mask.pixels() {
        if !reg.contains(c, r) {
            continue;
        }
        let edge = c == 0
            || r == 0
            || !inside(c - 1, r)
            || !inside(c + 1, r)
            || !inside(c, r - 1)
            || !inside(c, r + 1);
        if edge {
            outline[(r - reg.row_off) * reg.width + (c - reg.col_off)] = 1.0;
        }
    }
    let mo = outline.iter().sum::<f64>() / n;
    let mg = patch.values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (o, g) in outline.iter().zip(&patch.values) {
        let (a, b) = (o - mo, g - mg);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

fn prepare(
    raster: &GeoRaster,
    footprints: &[BuildingFootprint<f64>],
    spec: &AlignmentSearchSpec,
    backend: Option<&dyn SegmentationBackend>,
) -> Result<Prepared> {
    let grid = TileGrid::new(raster.width, raster.height, spec.tile_size, raster.transform)?;
    let reach_px = (spec.steps_per_side() as f64 * spec.step / raster.gsd()).ceil() as usize + 1;
    let mut scores = HashMap::new();
    let mut gradients = Vec::new();
    match spec.objective {
        AlignmentObjective::Concentration => {
            let backend = backend.ok_or_else(|| {
                Error::InvalidArgument("the concentration objective needs a segmentation backend".into())
            })?;
            let mut needed = BTreeSet::new();
            for f in footprints {
                if let Some(w) = search_region(f, raster, reach_px) {
                    for t in grid.tiles_touching(&w) {
                        needed.insert((t.row, t.col));
                    }
                }
            }
            let tiles: Vec<_> = needed.into_iter().map(|(r, c)| grid.tile(c, r)).collect();
            let computed = tiles
                .par_iter()
                .map(|t| {
                    let px = raster.read_window(t.window)?;
                    Ok(((t.col, t.row), backend.infer(t, &px)?))
                })
                .collect::<Result<Vec<_>>>()?;
            scores.extend(computed);
        }
        AlignmentObjective::MaskCorrelation => {
            for f in footprints {
                gradients.push(match search_region(f, raster, reach_px) {
                    Some(region) => Some(gradient_patch(raster, region)?),
                    None => None,
                });
            }
        }
    }
    Ok(Prepared { grid, scores, gradients })
}

fn objective_at(
    raster: &GeoRaster,
    footprints: &[BuildingFootprint<f64>],
    spec: &AlignmentSearchSpec,
    prep: &Prepared,
    dx: f64,
    dy: f64,
) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (i, f) in footprints.iter().enumerate() {
        let g = f.translate(dx, dy);
        match spec.objective {
            AlignmentObjective::Concentration => {
                let Some(w) = pixel_bounds(&g, &raster.transform, raster.width, raster.height) else { continue };
                let mask = rasterize(&g, &raster.transform, w);
                if mask.is_empty() {
                    continue;
                }
                let mut acc = ClassSums::default();
                acc.accumulate(&mask, &prep.grid, |c, r| prep.scores.get(&(c, r)), ConsolidationMode::ScoreSum)?;
                let best = acc.sums.iter().cloned().fold(0.0, f64::max);
                total += best / acc.pixels as f64;
                n += 1;
            }
            AlignmentObjective::MaskCorrelation => {
                let Some(patch) = &prep.gradients[i] else { continue };
                let mask = rasterize(&g, &raster.transform, patch.region);
                if mask.is_empty() {
                    continue;
                }
                if let Some(v) = outline_ncc(&mask, patch) {
                    total += v;
                    n += 1;
                }
            }
        }
    }
    Ok((n > 0).then(|| total / n as f64))
}

/// Exhaustive search over `(k_x * step, k_y * step)` for the translation
/// that best registers the footprints to the imagery. Ties go to the
/// smallest offset norm, then the smallest dx, then the smallest dy.
pub fn search_alignment(
    raster: &GeoRaster,
    footprints: &[BuildingFootprint<f64>],
    spec: &AlignmentSearchSpec,
    backend: Option<&dyn SegmentationBackend>,
) -> Result<AlignmentResult> {
    spec.validate()?;
    let prep = prepare(raster, footprints, spec, backend)?;
    let k = spec.steps_per_side();
    let grid: Vec<(i64, i64)> = (-k..=k).flat_map(|ky| (-k..=k).map(move |kx| (kx, ky))).collect();
    let surface = grid
        .par_iter()
        .map(|&(kx, ky)| {
            let (dx, dy) = (spec.offset(kx), spec.offset(ky));
            let value = objective_at(raster, footprints, spec, &prep, dx, dy)?;
            Ok(SurfacePoint { kx, ky, dx, dy, value })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(&SurfacePoint, f64)> = None;
    for p in &surface {
        let Some(v) = p.value else { continue };
        let better = match best {
            None => true,
            Some((b, bv)) => {
                v > bv
                    || (v == bv
                        && (p.kx * p.kx + p.ky * p.ky, p.kx, p.ky) < (b.kx * b.kx + b.ky * b.ky, b.kx, b.ky))
            }
        };
        if better {
            best = Some((p, v));
        }
    }
    let (b, value) = best.ok_or(Error::NoSignal)?;
    Ok(AlignmentResult {
        best_offset: (b.dx, b.dy),
        best_index: (b.kx, b.ky),
        objective: spec.objective,
        objective_value: value,
        surface: spec.keep_surface.then_some(surface),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationRow {
    pub dx: f64,
    pub dy: f64,
    pub macro_f1: f64,
    /// `(F1_0 - F1_o) / F1_0`, or 0 when `F1_0` is 0.
    pub relative_drop: f64,
}

/// Assesses and evaluates the footprints shifted by each offset, pooled
/// over all buildings, against the unshifted baseline.
pub fn degradation_report(
    raster: &GeoRaster,
    footprints: &[BuildingFootprint<f64>],
    backend: &dyn SegmentationBackend,
    offsets: &[(f64, f64)],
    opts: &AssessOptions,
) -> Result<Vec<DegradationRow>> {
    let f1_at = |dx: f64, dy: f64| -> Result<f64> {
        let moved = perturb(footprints, dx, dy);
        let (assessments, _) = assess_run(raster, &moved, backend, opts)?;
        Ok(evaluate_run(&assessments, &moved, AlignmentMode::Unaligned, None, None)?.macro_f1)
    };
    let base = f1_at(0.0, 0.0)?;
    offsets
        .iter()
        .map(|&(dx, dy)| {
            let f1 = if dx == 0.0 && dy == 0.0 { base } else { f1_at(dx, dy)? };
            let relative_drop = if base == 0.0 { 0.0 } else { (base - f1) / base };
            Ok(DegradationRow {
                dx,
                dy,
                macro_f1: f1,
                relative_drop,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::footprints::{DamageClass, Ring};
    use crate::inference::replay_oracle_backend;
    use crate::raster::GeoTransform;

    const GSD: f64 = 0.05;

    fn raster(w: usize, h: usize, data: Vec<u8>) -> GeoRaster {
        let t = GeoTransform::north_up(0.0, 0.0, GSD).unwrap();
        GeoRaster::from_memory(w, h, 3, t, "local", data).unwrap()
    }

    fn rect(id: &str, c: usize, r: usize, wpx: usize, hpx: usize, label: DamageClass) -> BuildingFootprint<f64> {
        let (x0, y0) = (c as f64 * GSD, -(r as f64) * GSD);
        BuildingFootprint::new(id, Ring::rect(x0, y0, x0 + wpx as f64 * GSD, y0 - hpx as f64 * GSD)).with_label(label)
    }

    fn scene() -> (GeoRaster, Vec<BuildingFootprint<f64>>) {
        let r = raster(120, 120, vec![0; 120 * 120 * 3]);
        let fps = vec![
            rect("a", 20, 20, 14, 10, DamageClass::Destroyed),
            rect("b", 60, 25, 12, 16, DamageClass::MinorDamage),
            rect("c", 30, 70, 18, 12, DamageClass::MajorDamage),
            rect("d", 75, 75, 10, 10, DamageClass::NoDamage),
        ];
        (r, fps)
    }

    #[test]
    fn perturb_roundtrip_and_pixel_shift() {
        let (r, fps) = scene();
        assert_eq!(perturb(&fps, 0.0, 0.0)[0].exterior, fps[0].exterior);
        let back = perturb(&perturb(&fps, 0.37, -1.2), -0.37, 1.2);
        for (a, b) in back.iter().zip(&fps) {
            for (p, q) in a.exterior.points().iter().zip(b.exterior.points()) {
                assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
            }
        }
        let shifted = perturb(&fps, 0.5, 0.0);
        let w = Window::full(120, 120);
        let m0 = rasterize(&fps[0], &r.transform, w);
        let m1 = rasterize(&shifted[0], &r.transform, w);
        let moved: Vec<_> = m0.pixels().map(|(c, row)| (c + 10, row)).collect();
        assert_eq!(m1.pixels().collect::<Vec<_>>(), moved);
        assert_eq!(shifted[0].alignment_offset, Some((0.5, 0.0)));
    }

    #[test]
    fn recovers_inverse_of_plant() {
        let (r, fps) = scene();
        let backend = replay_oracle_backend(&fps, r.transform).unwrap();
        let planted = perturb(&fps, -0.3, 0.2);
        let mut spec = AlignmentSearchSpec::new(0.5, 0.1, AlignmentObjective::Concentration);
        spec.tile_size = 64;
        spec.keep_surface = true;
        let res = search_alignment(&r, &planted, &spec, Some(&backend)).unwrap();
        assert_eq!(res.best_index, (3, -2));
        assert!((res.best_offset.0 - 0.3).abs() < 1e-12 && (res.best_offset.1 + 0.2).abs() < 1e-12);
        let surface = res.surface.unwrap();
        assert_eq!(surface.len(), 11 * 11);
        assert!(surface.iter().all(|p| p.value.unwrap() <= res.objective_value));
    }

    #[test]
    fn zero_plant_recovers_origin() {
        let (r, fps) = scene();
        let backend = replay_oracle_backend(&fps, r.transform).unwrap();
        let spec = AlignmentSearchSpec::new(0.3, 0.1, AlignmentObjective::Concentration);
        let res = search_alignment(&r, &fps, &spec, Some(&backend)).unwrap();
        assert_eq!(res.best_index, (0, 0));
        assert_eq!(res.objective_value, 1.0);
    }

    #[test]
    fn ties_prefer_smallest_offset() {
        // a lone no_damage building over no_damage background scores 1 everywhere
        let r = raster(60, 60, vec![0; 60 * 60 * 3]);
        let fps = vec![rect("n", 25, 25, 8, 8, DamageClass::NoDamage)];
        let backend = replay_oracle_backend(&fps, r.transform).unwrap();
        let spec = AlignmentSearchSpec::new(0.2, 0.1, AlignmentObjective::Concentration);
        assert_eq!(search_alignment(&r, &fps, &spec, Some(&backend)).unwrap().best_index, (0, 0));
    }

    #[test]
    fn symmetric_scene_has_symmetric_surface() {
        let r = raster(64, 64, vec![0; 64 * 64 * 3]);
        let fps = vec![rect("s", 24, 24, 16, 16, DamageClass::Destroyed)];
        let backend = replay_oracle_backend(&fps, r.transform).unwrap();
        let mut spec = AlignmentSearchSpec::new(0.4, 0.1, AlignmentObjective::Concentration);
        spec.keep_surface = true;
        let s = search_alignment(&r, &fps, &spec, Some(&backend)).unwrap().surface.unwrap();
        let at = |kx: i64, ky: i64| s.iter().find(|p| (p.kx, p.ky) == (kx, ky)).unwrap().value.unwrap();
        for p in &s {
            assert!((p.value.unwrap() - at(-p.kx, -p.ky)).abs() < 1e-6);
        }
    }

    #[test]
    fn mask_correlation_finds_bright_roofs() {
        let (w, h) = (100, 100);
        let (_, fps) = scene();
        let mut data = vec![30u8; w * h * 3];
        let t = GeoTransform::north_up(0.0, 0.0, GSD).unwrap();
        let full = Window::full(w, h);
        for f in &fps {
            for (c, r) in rasterize(f, &t, full).pixels() {
                data[(r * w + c) * 3..(r * w + c) * 3 + 3].fill(220);
            }
        }
        let r = raster(w, h, data);
        let planted = perturb(&fps, 0.2, -0.1);
        let spec = AlignmentSearchSpec::new(0.4, 0.1, AlignmentObjective::MaskCorrelation);
        let res = search_alignment(&r, &planted, &spec, None).unwrap();
        assert_eq!(res.best_index, (-2, 1));
    }

    #[test]
    fn no_overlap_is_no_signal() {
        let r = raster(20, 20, vec![0; 20 * 20 * 3]);
        let fps = vec![rect("far", 500, 500, 4, 4, DamageClass::Destroyed)];
        let backend = replay_oracle_backend(&fps, r.transform).unwrap();
        let spec = AlignmentSearchSpec::new(0.2, 0.1, AlignmentObjective::Concentration);
        assert!(matches!(search_alignment(&r, &fps, &spec, Some(&backend)), Err(Error::NoSignal)));
    }

    #[test]
    fn spec_checks() {
        assert!(AlignmentSearchSpec::new(0.05, 0.1, AlignmentObjective::Concentration).validate().is_err());
        assert!(AlignmentSearchSpec::new(0.5, 0.0, AlignmentObjective::Concentration).validate().is_err());
        assert_eq!(AlignmentSearchSpec::new(0.5, 0.1, AlignmentObjective::Concentration).steps_per_side(), 5);
        let (r, fps) = scene();
        let spec = AlignmentSearchSpec::new(0.2, 0.1, AlignmentObjective::Concentration);
        assert!(matches!(search_alignment(&r, &fps, &spec, None), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degradation_grows_with_offset() {
        let (r, fps) = scene();
        let backend = replay_oracle_backend(&fps, r.transform).unwrap();
        let opts = AssessOptions {
            tile_size: 64,
            workers: 2,
            ..AssessOptions::default()
        };
        let rows = degradation_report(&r, &fps, &backend, &[(0.0, 0.0), (0.05, 0.0), (1.0, 1.0)], &opts).unwrap();
        assert_eq!(rows[0].relative_drop, 0.0);
        assert_eq!(rows[0].macro_f1, rows[0].macro_f1.max(rows[2].macro_f1));
        assert!(rows[1].relative_drop >= 0.0);
        assert!(rows[2].relative_drop > 0.0);
    }
}
