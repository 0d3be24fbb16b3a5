//! Synthetic labeled scenes: colored rectangular roofs on a textured
//! background, rendered lazily so large rasters cost no memory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footprints::{emit_footprints, BuildingFootprint, DamageClass, Ring, NUM_CLASSES};
use crate::raster::io::write_raw;
use crate::raster::{GeoRaster, GeoTransform, PixelBuffer, PixelSource, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub gsd: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub crs_id: String,
    /// Buildings per class, in class order.
    pub class_counts: [usize; NUM_CLASSES],
    /// Roof side lengths in pixels, inclusive range.
    pub min_size_px: usize,
    pub max_size_px: usize,
    pub seed: u64,
}

impl SceneSpec {
    /// `buildings` spread evenly over the five classes.
    pub fn balanced(width: usize, height: usize, gsd: f64, buildings: usize, seed: u64) -> Self {
        let mut class_counts = [buildings / NUM_CLASSES; NUM_CLASSES];
        for c in class_counts.iter_mut().take(buildings % NUM_CLASSES) {
            *c += 1;
        }
        SceneSpec {
            width,
            height,
            gsd,
            origin_x: 500_000.0,
            origin_y: 3_300_000.0,
            crs_id: "EPSG:32617".into(),
            class_counts,
            min_size_px: 4,
            max_size_px: 24,
            seed,
        }
    }

    pub fn building_count(&self) -> usize {
        self.class_counts.iter().sum()
    }

    pub fn transform(&self) -> Result<GeoTransform<f64>> {
        GeoTransform::north_up(self.origin_x, self.origin_y, self.gsd)
    }
}

/// Roof fill color per class.
pub const CLASS_COLORS: [[u8; 3]; NUM_CLASSES] = [
    [205, 205, 200],
    [225, 195, 70],
    [225, 120, 45],
    [150, 35, 30],
    [60, 70, 190],
];

pub struct SyntheticScene {
    pub raster: GeoRaster,
    pub footprints: Vec<BuildingFootprint<f64>>,
    /// Pixel rectangles of the roofs, parallel to `footprints`.
    pub roofs: Vec<Window>,
}

#[inline]
fn hash3(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^= x >> 33;
    x = x.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    x ^ (x >> 33)
}

/// Renders pixels on demand from the roof layout.
struct SceneSource {
    width: usize,
    height: usize,
    seed: u64,
    cell_w: usize,
    cell_h: usize,
    cols: usize,
    /// Roof and color per layout cell.
    cells: Vec<Option<(Window, [u8; 3])>>,
}

impl SceneSource {
    fn pixel(&self, c: usize, r: usize) -> [u8; 3] {
        let h = hash3(self.seed, c as u64, r as u64);
        let noise = (h & 0x0F) as i16 - 8;
        let cell = (r / self.cell_h) * self.cols + c / self.cell_w;
        let base = match self.cells.get(cell).copied().flatten() {
            Some((w, color)) if w.contains(c, r) => color,
            _ => [95, 112, 78],
        };
        base.map(|v| (v as i16 + noise).clamp(0, 255) as u8)
    }
}

impl PixelSource for SceneSource {
    fn read_window(&self, w: Window, bands: usize) -> Result<PixelBuffer> {
        let mut data = Vec::with_capacity(w.area() * bands);
        for r in w.row_off..w.row_end() {
            for c in w.col_off..w.col_end() {
                data.extend_from_slice(&self.pixel(c, r)[..bands]);
            }
        }
        PixelBuffer::new(w.width, w.height, bands, data)
    }

    fn payload_bytes(&self) -> u64 {
        (self.width * self.height * 3) as u64
    }
}

/// Lays roofs out one per grid cell with random size and position, labels
/// them by `class_counts` in a shuffled order, and builds the raster.
pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    let n = spec.building_count();
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::InvalidArgument("scene dimensions must be positive".into()));
    }
    if spec.min_size_px == 0 || spec.min_size_px > spec.max_size_px {
        return Err(Error::InvalidArgument(format!(
            "roof sizes must satisfy 1 <= min <= max, got {}..={}",
            spec.min_size_px, spec.max_size_px
        )));
    }
    let t = spec.transform()?;
    let aspect = spec.width as f64 / spec.height as f64;
    let cols = ((n.max(1) as f64 * aspect).sqrt().ceil() as usize).clamp(1, spec.width);
    let rows = n.max(1).div_ceil(cols).min(spec.height);
    if cols * rows < n {
        return Err(Error::InvalidArgument(format!(
            "{n} buildings do not fit a {}x{} scene",
            spec.width, spec.height
        )));
    }
    let (cell_w, cell_h) = (spec.width / cols, spec.height / rows);
    let max_fit = cell_w.min(cell_h).saturating_sub(2).max(1);
    if spec.min_size_px > max_fit {
        return Err(Error::InvalidArgument(format!(
            "{n} roofs of at least {} px do not fit {}x{} cells",
            spec.min_size_px, cell_w, cell_h
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels: Vec<DamageClass> = spec
        .class_counts
        .iter()
        .enumerate()
        .flat_map(|(k, &m)| std::iter::repeat_n(DamageClass::ALL[k], m))
        .collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.gen_range(0..=i));
    }

    let mut cells = vec![None; cols * rows];
    let mut footprints = Vec::with_capacity(n);
    let mut roofs = Vec::with_capacity(n);
    for (i, label) in labels.into_iter().enumerate() {
        let (cc, cr) = (i % cols, i / cols);
        let hi = spec.max_size_px.min(max_fit);
        let w = rng.gen_range(spec.min_size_px..=hi);
        let h = rng.gen_range(spec.min_size_px..=hi);
        let c0 = cc * cell_w + 1 + rng.gen_range(0..=(cell_w - 2).saturating_sub(w));
        let r0 = cr * cell_h + 1 + rng.gen_range(0..=(cell_h - 2).saturating_sub(h));
        let roof = Window::new(c0, r0, w, h);
        let (x0, y0) = t.pixel_to_world(c0 as f64, r0 as f64);
        let (x1, y1) = t.pixel_to_world((c0 + w) as f64, (r0 + h) as f64);
        footprints.push(BuildingFootprint::new(format!("bldg-{i:05}"), Ring::rect(x0, y0, x1, y1)).with_label(label));
        cells[cr * cols + cc] = Some((roof, CLASS_COLORS[label.index()]));
        roofs.push(roof);
    }
    let source = SceneSource {
        width: spec.width,
        height: spec.height,
        seed: spec.seed,
        cell_w,
        cell_h,
        cols,
        cells,
    };
    let raster = GeoRaster::new(spec.width, spec.height, 3, t, spec.crs_id.clone(), Arc::new(source))?;
    Ok(SyntheticScene {
        raster,
        footprints,
        roofs,
    })
}

/// Writes `scene.json`/`scene.bin` and `footprints.geojson` into `dir`.
/// Returns the sidecar and footprint paths.
pub fn write_scene(scene: &SyntheticScene, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let raster_path = dir.join("scene.json");
    write_raw(&scene.raster, &raster_path)?;
    let fp_path = dir.join("footprints.geojson");
    let text = emit_footprints(&scene.footprints, Some(&scene.raster.crs_id));
    std::fs::write(&fp_path, text).map_err(|e| Error::io(&fp_path, e))?;
    Ok((raster_path, fp_path))
}
