//! Raster ingest: raw interleaved container with a JSON sidecar, and PNG
//! with an ESRI world file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{GeoRaster, GeoTransform, PixelBuffer, PixelSource, Window};
use crate::error::{Error, Result, Warning};

/// JSON sidecar of the raw raster container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_width: f64,
    pub pixel_height: f64,
    pub crs_id: String,
}

/// Reads windows straight from an uncompressed interleaved file with
/// positioned reads, so concurrent readers never share a cursor.
#[derive(Debug)]
pub struct RawFileSource {
    path: PathBuf,
    file: File,
    width: usize,
    len: u64,
}

impl PixelSource for RawFileSource {
    fn read_window(&self, w: Window, bands: usize) -> Result<PixelBuffer> {
        let row_bytes = w.width * bands;
        let mut out = vec![0u8; w.area() * bands];
        for (i, r) in (w.row_off..w.row_end()).enumerate() {
            let offset = ((r * self.width + w.col_off) * bands) as u64;
            self.file
                .read_exact_at(&mut out[i * row_bytes..(i + 1) * row_bytes], offset)
                .map_err(|e| Error::io(&self.path, e))?;
        }
        PixelBuffer::new(w.width, w.height, bands, out)
    }

    fn payload_bytes(&self) -> u64 {
        self.len
    }
}

fn raw_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("bin"))
}

/// Opens a raw container given either its `.json` sidecar or `.bin` payload.
pub fn open_raw(path: &Path) -> Result<GeoRaster> {
    let (json_path, bin_path) = raw_paths(path);
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let meta: RawSidecar = serde_json::from_str(&text)?;
    let file = File::open(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let len = file
        .metadata()
        .map_err(|e| Error::io(&bin_path, e))?
        .len();
    let expected = (meta.width * meta.height * meta.bands) as u64;
    if len != expected {
        return Err(Error::Length {
            expected,
            actual: len,
        });
    }
    let transform = GeoTransform::new(
        meta.origin_x,
        meta.origin_y,
        meta.pixel_width,
        meta.pixel_height,
    )?;
    let source = RawFileSource {
        path: bin_path,
        file,
        width: meta.width,
        len,
    };
    GeoRaster::new(
        meta.width,
        meta.height,
        meta.bands,
        transform,
        meta.crs_id,
        Arc::new(source),
    )
}

/// Writes `raster` as a raw container next to `path` (`.json` + `.bin`),
/// streaming one tile row at a time.
pub fn write_raw(raster: &GeoRaster, path: &Path) -> Result<()> {
    let (json_path, bin_path) = raw_paths(path);
    let meta = RawSidecar {
        width: raster.width,
        height: raster.height,
        bands: raster.bands,
        origin_x: raster.transform.origin_x,
        origin_y: raster.transform.origin_y,
        pixel_width: raster.transform.pixel_width,
        pixel_height: raster.transform.pixel_height,
        crs_id: raster.crs_id.clone(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    let file = File::create(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let mut out = BufWriter::new(file);
    let strip = 256;
    let mut row = 0;
    while row < raster.height {
        let h = strip.min(raster.height - row);
        let buf = raster.read_window(Window::new(0, row, raster.width, h))?;
        out.write_all(&buf.data).map_err(|e| Error::io(&bin_path, e))?;
        row += h;
    }
    out.flush().map_err(|e| Error::io(&bin_path, e))
}

/// Parses a six-line ESRI world file into a corner-referenced transform.
/// World files reference the center of the top-left pixel.
pub fn parse_world_file(text: &str) -> Result<GeoTransform<f64>> {
    let values: Vec<f64> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<f64>().map_err(|e| Error::Parse {
                line: i + 1,
                column: 1,
                message: format!("world file value `{l}`: {e}"),
            })
        })
        .collect::<Result<_>>()?;
    if values.len() != 6 {
        return Err(Error::InvalidData(format!(
            "world file must have 6 values, found {}",
            values.len()
        )));
    }
    let [a, d, b, e, c, f] = [values[0], values[1], values[2], values[3], values[4], values[5]];
    if d != 0.0 || b != 0.0 {
        return Err(Error::InvalidData(
            "rotated rasters are not supported (world file rotation terms must be 0)".into(),
        ));
    }
    GeoTransform::new(c - 0.5 * a, f - 0.5 * e, a, e)
}

pub fn format_world_file(t: &GeoTransform<f64>) -> String {
    format!(
        "{}\n0\n0\n{}\n{}\n{}\n",
        t.pixel_width,
        t.pixel_height,
        t.origin_x + 0.5 * t.pixel_width,
        t.origin_y + 0.5 * t.pixel_height
    )
}

fn find_world_file(png: &Path) -> Option<PathBuf> {
    ["pgw", "pngw", "wld"]
        .iter()
        .map(|ext| png.with_extension(ext))
        .find(|p| p.exists())
}

/// Opens a PNG with its world file. The image is decoded whole; a `.crs`
/// text file next to it supplies the CRS identifier.
pub fn open_png(path: &Path) -> Result<(GeoRaster, Vec<Warning>)> {
    let mut warnings = Vec::new();
    let wld = find_world_file(path).ok_or_else(|| {
        Error::io(
            path.with_extension("pgw"),
            std::io::Error::new(std::io::ErrorKind::NotFound, "world file not found"),
        )
    })?;
    let wtext = fs::read_to_string(&wld).map_err(|e| Error::io(&wld, e))?;
    let transform = parse_world_file(&wtext)?;
    let crs_path = path.with_extension("crs");
    let crs_id = match fs::read_to_string(&crs_path) {
        Ok(s) => s.trim().to_string(),
        Err(_) => {
            warnings.push(Warning::new(
                "missing_crs",
                format!("{} not found; crs_id set to `unknown`", crs_path.display()),
            ));
            "unknown".to_string()
        }
    };
    let file_len = fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    let img = image::open(path)
        .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let source = PngSource {
        inner: super::MemorySource::new(w, h, 3, img.into_raw())?,
        file_len,
    };
    let raster = GeoRaster::new(w, h, 3, transform, crs_id, Arc::new(source))?;
    Ok((raster, warnings))
}

struct PngSource {
    inner: super::MemorySource,
    file_len: u64,
}

impl PixelSource for PngSource {
    fn read_window(&self, w: Window, bands: usize) -> Result<PixelBuffer> {
        self.inner.read_window(w, bands)
    }

    fn payload_bytes(&self) -> u64 {
        self.file_len
    }
}

/// Writes an RGB raster as PNG + world file + `.crs`.
pub fn write_png(raster: &GeoRaster, path: &Path) -> Result<()> {
    if raster.bands != 3 {
        return Err(Error::InvalidArgument("PNG export requires 3 bands".into()));
    }
    let buf = raster.read_window(raster.full_window())?;
    let img = image::RgbImage::from_raw(raster.width as u32, raster.height as u32, buf.data.clone())
        .ok_or_else(|| Error::Internal("pixel buffer size mismatch".into()))?;
    img.save(path)
        .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?;
    let wld = path.with_extension("pgw");
    fs::write(&wld, format_world_file(&raster.transform)).map_err(|e| Error::io(&wld, e))?;
    let crs = path.with_extension("crs");
    fs::write(&crs, &raster.crs_id).map_err(|e| Error::io(&crs, e))
}

/// Opens a raster by extension: `.png` or a raw container (`.json`/`.bin`).
pub fn open_raster(path: &Path) -> Result<(GeoRaster, Vec<Warning>)> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("png") => open_png(path),
        _ => open_raw(path).map(|r| (r, Vec::new())),
    }
}
