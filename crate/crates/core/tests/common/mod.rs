#![allow(dead_code)]

use rand::Rng;
use suas_damage::footprints::{BuildingFootprint, PixelMask, Point, Ring};
use suas_damage::raster::{GeoTransform, Window};
use suas_damage::synthetic::{generate_scene, SceneSpec, SyntheticScene};

/// Crossing-number point test over all rings, written independently of
/// the library's scanline code.
pub fn point_in_footprint(f: &BuildingFootprint<f64>, x: f64, y: f64) -> bool {
    let mut inside = false;
    for ring in f.rings() {
        let pts = ring.points();
        let n = pts.len();
        let mut j = n - 1;
        for i in 0..n {
            let (p, q) = (pts[j], pts[i]);
            if (p.y > y) != (q.y > y) && x < (q.x - p.x) * (y - p.y) / (q.y - p.y) + p.x {
                inside = !inside;
            }
            j = i;
        }
    }
    inside
}

/// Brute-force mask: test every pixel center in the window.
pub fn brute_mask(f: &BuildingFootprint<f64>, t: &GeoTransform<f64>, w: Window) -> PixelMask {
    let mut px = Vec::new();
    for r in w.row_off..w.row_end() {
        for c in w.col_off..w.col_end() {
            let x = t.origin_x + (c as f64 + 0.5) * t.pixel_width;
            let y = t.origin_y + (r as f64 + 0.5) * t.pixel_height;
            if point_in_footprint(f, x, y) {
                px.push((c, r));
            }
        }
    }
    PixelMask::from_pixels(w, px)
}

/// Star-shaped polygon around `(cx, cy)`: sorted angles, random radii.
pub fn random_star(rng: &mut impl Rng, id: &str, cx: f64, cy: f64, rmax: f64) -> BuildingFootprint<f64> {
    let n = rng.gen_range(3..12);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    while angles.len() < 3 {
        angles = vec![0.0, 2.1, 4.2];
    }
    let pts: Vec<Point<f64>> = angles
        .iter()
        .map(|a| {
            let r = rng.gen_range(0.2 * rmax..rmax);
            Point::new(cx + r * a.cos(), cy + r * a.sin())
        })
        .collect();
    BuildingFootprint::new(id, Ring::new(pts).unwrap())
}

/// Balanced synthetic scene, roofs from 1 px up to `max_px`.
pub fn scene(width: usize, height: usize, buildings: usize, max_px: usize, seed: u64) -> SyntheticScene {
    let mut spec = SceneSpec::balanced(width, height, 0.05, buildings, seed);
    spec.min_size_px = 1;
    spec.max_size_px = max_px;
    generate_scene(&spec).unwrap()
}
