use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{GeoRaster, GeoTransform, PixelBuffer, PixelSource, Window};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleMethod {
    Nearest,
    Bilinear,
}

impl std::str::FromStr for ResampleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(ResampleMethod::Nearest),
            "bilinear" => Ok(ResampleMethod::Bilinear),
            other => Err(Error::InvalidArgument(format!("unknown resample method `{other}`"))),
        }
    }
}

/// Output size along one axis when resampling from `input_gsd` to `target_gsd`.
pub fn resampled_dim(input_dim: usize, input_gsd: f64, target_gsd: f64) -> usize {
    (input_dim as f64 * input_gsd / target_gsd).round() as usize
}

/// Returns a raster at `target_gsd` whose windows are computed on demand
/// from the input, so the full output is never materialized.
pub fn resample_to_gsd(
    raster: &GeoRaster,
    target_gsd: f64,
    method: ResampleMethod,
) -> Result<GeoRaster> {
    if !target_gsd.is_finite() || target_gsd <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "target GSD must be positive, got {target_gsd}"
        )));
    }
    let t = raster.transform;
    let gsd_x = t.pixel_width.abs();
    let gsd_y = t.pixel_height.abs();
    let width = resampled_dim(raster.width, gsd_x, target_gsd);
    let height = resampled_dim(raster.height, gsd_y, target_gsd);
    if width == 0 || height == 0 {
        return Err(Error::DegenerateOutput(format!(
            "resampling {}x{} to {target_gsd} m/px yields {width}x{height}",
            raster.width, raster.height
        )));
    }
    let transform = GeoTransform::new(
        t.origin_x,
        t.origin_y,
        target_gsd * t.pixel_width.signum(),
        target_gsd * t.pixel_height.signum(),
    )?;
    let source = ResampledSource {
        input: raster.clone(),
        ratio_x: target_gsd / gsd_x,
        ratio_y: target_gsd / gsd_y,
        method,
        out_width: width,
        out_height: height,
    };
    GeoRaster::new(
        width,
        height,
        raster.bands,
        transform,
        raster.crs_id.clone(),
        Arc::new(source),
    )
}

struct ResampledSource {
    input: GeoRaster,
    ratio_x: f64,
    ratio_y: f64,
    method: ResampleMethod,
    out_width: usize,
    out_height: usize,
}

/// Source sample indices and weights along one axis.
struct AxisMap {
    lo: Vec<usize>,
    hi: Vec<usize>,
    frac: Vec<f64>,
}

impl AxisMap {
    fn build(range: std::ops::Range<usize>, ratio: f64, in_len: usize, method: ResampleMethod) -> Self {
        let last = (in_len - 1) as f64;
        let n = range.len();
        let mut m = AxisMap {
            lo: Vec::with_capacity(n),
            hi: Vec::with_capacity(n),
            frac: Vec::with_capacity(n),
        };
        for i in range {
            match method {
                ResampleMethod::Nearest => {
                    let s = ((i as f64 + 0.5) * ratio).floor().clamp(0.0, last) as usize;
                    m.lo.push(s);
                    m.hi.push(s);
                    m.frac.push(0.0);
                }
                ResampleMethod::Bilinear => {
                    let s = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, last);
                    let s0 = s.floor();
                    m.lo.push(s0 as usize);
                    m.hi.push((s0 as usize + 1).min(in_len - 1));
                    m.frac.push(s - s0);
                }
            }
        }
        m
    }

    fn span(&self) -> (usize, usize) {
        let a = *self.lo.iter().min().unwrap();
        let b = *self.hi.iter().max().unwrap();
        (a, b + 1)
    }
}

impl PixelSource for ResampledSource {
    fn read_window(&self, w: Window, bands: usize) -> Result<PixelBuffer> {
        debug_assert!(w.col_end() <= self.out_width && w.row_end() <= self.out_height);
        let xs = AxisMap::build(w.col_off..w.col_end(), self.ratio_x, self.input.width, self.method);
        let ys = AxisMap::build(w.row_off..w.row_end(), self.ratio_y, self.input.height, self.method);
        let (c0, c1) = xs.span();
        let (r0, r1) = ys.span();
        let src = self.input.read_window(Window::new(c0, r0, c1 - c0, r1 - r0))?;
        let mut out = Vec::with_capacity(w.area() * bands);
        for j in 0..w.height {
            let (ya, yb, fy) = (ys.lo[j] - r0, ys.hi[j] - r0, ys.frac[j]);
            for i in 0..w.width {
                let (xa, xb, fx) = (xs.lo[i] - c0, xs.hi[i] - c0, xs.frac[i]);
                for b in 0..bands {
                    let v = match self.method {
                        ResampleMethod::Nearest => src.get(xa, ya, b),
                        ResampleMethod::Bilinear => {
                            let top = src.get(xa, ya, b) as f64 * (1.0 - fx) + src.get(xb, ya, b) as f64 * fx;
                            let bot = src.get(xa, yb, b) as f64 * (1.0 - fx) + src.get(xb, yb, b) as f64 * fx;
                            (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8
                        }
                    };
                    out.push(v);
                }
            }
        }
        PixelBuffer::new(w.width, w.height, bands, out)
    }

    fn payload_bytes(&self) -> u64 {
        (self.out_width * self.out_height * self.input.bands) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp(w: usize, h: usize, gsd: f64) -> GeoRaster {
        let data: Vec<u8> = (0..w * h * 3).map(|i| (i * 13 % 256) as u8).collect();
        GeoRaster::from_memory(w, h, 3, GeoTransform::north_up(0.0, 0.0, gsd).unwrap(), "x", data).unwrap()
    }

    #[test]
    fn identity_resample_nearest() {
        let r = ramp(17, 9, 0.05);
        let out = resample_to_gsd(&r, 0.05, ResampleMethod::Nearest).unwrap();
        assert_eq!((out.width, out.height), (17, 9));
        assert_eq!(
            out.read_window(out.full_window()).unwrap().data,
            r.read_window(r.full_window()).unwrap().data
        );
    }

    #[test]
    fn halving_resolution() {
        // 1000 * 0.0165 / 0.033 = 500
        let r = GeoRaster::from_memory(
            1000,
            1000,
            1,
            GeoTransform::north_up(0.0, 0.0, 0.0165).unwrap(),
            "x",
            vec![0; 1_000_000],
        )
        .unwrap();
        let out = resample_to_gsd(&r, 0.033, ResampleMethod::Nearest).unwrap();
        assert_eq!((out.width, out.height), (500, 500));
        assert_eq!(out.transform.pixel_width, 0.033);
        assert_eq!(out.transform.pixel_height, -0.033);
        assert_eq!(out.transform.origin_x, 0.0);
    }

    #[test]
    fn constant_raster_stays_constant() {
        let r = GeoRaster::from_memory(
            23,
            11,
            3,
            GeoTransform::north_up(5.0, 5.0, 0.07).unwrap(),
            "x",
            vec![137; 23 * 11 * 3],
        )
        .unwrap();
        for method in [ResampleMethod::Nearest, ResampleMethod::Bilinear] {
            for target in [0.03, 0.07, 0.19] {
                let out = resample_to_gsd(&r, target, method).unwrap();
                let px = out.read_window(out.full_window()).unwrap();
                assert!(px.data.iter().all(|&v| v == 137), "{method:?} {target}");
            }
        }
    }

    #[test]
    fn invalid_targets() {
        let r = ramp(4, 4, 0.05);
        assert!(matches!(
            resample_to_gsd(&r, 0.0, ResampleMethod::Nearest),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            resample_to_gsd(&r, -1.0, ResampleMethod::Bilinear),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            resample_to_gsd(&r, 10.0, ResampleMethod::Nearest),
            Err(Error::DegenerateOutput(_))
        ));
    }

    #[test]
    fn dimension_law_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 100 {
            let w = rng.gen_range(1..400usize);
            let h = rng.gen_range(1..400usize);
            let gsd = rng.gen_range(0.0165..0.253);
            let target = rng.gen_range(0.0165..0.253);
            let r = GeoRaster::from_memory(w, h, 1, GeoTransform::north_up(0.0, 0.0, gsd).unwrap(), "x", vec![0; w * h]).unwrap();
            let ew = (w as f64 * gsd / target).round() as usize;
            let eh = (h as f64 * gsd / target).round() as usize;
            match resample_to_gsd(&r, target, ResampleMethod::Nearest) {
                Ok(out) => assert_eq!((out.width, out.height), (ew, eh)),
                Err(Error::DegenerateOutput(_)) => assert!(ew == 0 || eh == 0),
                Err(e) => panic!("{e}"),
            }
            checked += 1;
        }
    }

    #[test]
    fn windows_agree_with_full_read() {
        let r = ramp(40, 30, 0.05);
        for method in [ResampleMethod::Nearest, ResampleMethod::Bilinear] {
            let out = resample_to_gsd(&r, 0.035, method).unwrap();
            let full = out.read_window(out.full_window()).unwrap();
            let w = Window::new(7, 5, 20, 13);
            let part = out.read_window(w).unwrap();
            for row in 0..w.height {
                for col in 0..w.width {
                    for b in 0..3 {
                        assert_eq!(part.get(col, row, b), full.get(col + 7, row + 5, b));
                    }
                }
            }
        }
    }
}
