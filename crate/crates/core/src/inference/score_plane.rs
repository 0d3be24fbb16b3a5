//! Per-tile score planes and their binary exchange format.
//!
//! Layout (little-endian): 8-byte magic `SUASSCR1`, then u32 fields
//! version, tile_col, tile_row, width, height, num_classes, dtype,
//! reserved, then 24 zero bytes (64-byte header), then the f32 payload in
//! class-major, row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::footprints::{DamageClass, NUM_CLASSES};

pub const MAGIC: &[u8; 8] = b"SUASSCR1";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;
const DTYPE_F32: u32 = 0;

/// Dense non-negative scores for one tile, indexed `[class][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePlaneTile {
    pub tile_col: u32,
    pub tile_row: u32,
    pub width: u32,
    pub height: u32,
    scores: Vec<f32>,
}

impl ScorePlaneTile {
    pub fn zeros(tile_col: u32, tile_row: u32, width: u32, height: u32) -> Self {
        ScorePlaneTile {
            tile_col,
            tile_row,
            width,
            height,
            scores: vec![0.0; NUM_CLASSES * width as usize * height as usize],
        }
    }

    pub fn from_scores(
        tile_col: u32,
        tile_row: u32,
        width: u32,
        height: u32,
        scores: Vec<f32>,
    ) -> Result<Self> {
        let expected = NUM_CLASSES * width as usize * height as usize;
        if scores.len() != expected {
            return Err(Error::InvalidData(format!(
                "score payload has {} values, expected {expected}",
                scores.len()
            )));
        }
        let t = ScorePlaneTile {
            tile_col,
            tile_row,
            width,
            height,
            scores,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((i, v)) = self
            .scores
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidData(format!(
                "tile ({}, {}) score #{i} is {v}; scores must be finite and non-negative",
                self.tile_col, self.tile_row
            )));
        }
        Ok(())
    }

    #[inline]
    fn plane_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Score of `class` at tile-local `(col, row)`.
    #[inline]
    pub fn get(&self, class: usize, col: usize, row: usize) -> f32 {
        self.scores[class * self.plane_len() + row * self.width as usize + col]
    }

    #[inline]
    pub fn set(&mut self, class: usize, col: usize, row: usize, v: f32) {
        let i = class * self.plane_len() + row * self.width as usize + col;
        self.scores[i] = v;
    }

    pub fn plane(&self, class: DamageClass) -> &[f32] {
        let n = self.plane_len();
        &self.scores[class.index() * n..(class.index() + 1) * n]
    }

    pub fn plane_mut(&mut self, class: DamageClass) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.scores[class.index() * n..(class.index() + 1) * n]
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn scale(&mut self, factor: f32) {
        self.scores.iter_mut().for_each(|v| *v *= factor);
    }

    /// Encoded size in bytes.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.scores.len() * 4
    }
}

pub fn score_plane_filename(tile_col: usize, tile_row: usize) -> String {
    format!("scores_{tile_col}_{tile_row}.ssp")
}

pub fn score_plane_path(dir: &Path, tile_col: usize, tile_row: usize) -> PathBuf {
    dir.join(score_plane_filename(tile_col, tile_row))
}

fn header(s: &ScorePlaneTile) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..8].copy_from_slice(MAGIC);
    let fields = [
        FORMAT_VERSION,
        s.tile_col,
        s.tile_row,
        s.width,
        s.height,
        NUM_CLASSES as u32,
        DTYPE_F32,
        0,
    ];
    for (i, v) in fields.iter().enumerate() {
        h[8 + 4 * i..12 + 4 * i].copy_from_slice(&v.to_le_bytes());
    }
    h
}

pub fn write_score_plane_to<W: Write>(s: &ScorePlaneTile, mut w: W) -> std::io::Result<()> {
    w.write_all(&header(s))?;
    let mut chunk = Vec::with_capacity(4 * 4096);
    for block in s.scores.chunks(4096) {
        chunk.clear();
        for v in block {
            chunk.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&chunk)?;
    }
    w.flush()
}

pub fn write_score_plane(s: &ScorePlaneTile, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_score_plane_to(s, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

fn u32_at(h: &[u8], field: usize) -> u32 {
    let o = 8 + 4 * field;
    u32::from_le_bytes([h[o], h[o + 1], h[o + 2], h[o + 3]])
}

/// Decodes a score plane, checking the header field by field.
pub fn decode_score_plane(bytes: &[u8]) -> Result<ScorePlaneTile> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Length {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let h = &bytes[..HEADER_LEN];
    if &h[..8] != MAGIC {
        return Err(Error::Format {
            field: "magic",
            message: format!("expected {:?}, found {:?}", MAGIC, &h[..8]),
        });
    }
    let check = |field: &'static str, idx: usize, ok: &dyn Fn(u32) -> bool, want: &str| {
        let v = u32_at(h, idx);
        if ok(v) {
            Ok(v)
        } else {
            Err(Error::Format {
                field,
                message: format!("found {v}, expected {want}"),
            })
        }
    };
    check("version", 0, &|v| v == FORMAT_VERSION, "1")?;
    let tile_col = u32_at(h, 1);
    let tile_row = u32_at(h, 2);
    let width = check("width", 3, &|v| v > 0, "a positive width")?;
    let height = check("height", 4, &|v| v > 0, "a positive height")?;
    check("num_classes", 5, &|v| v as usize == NUM_CLASSES, "5")?;
    check("dtype", 6, &|v| v == DTYPE_F32, "0 (binary32)")?;
    check("reserved", 7, &|v| v == 0, "0")?;
    if h[40..].iter().any(|&b| b != 0) {
        return Err(Error::Format {
            field: "padding",
            message: "header padding must be zero".into(),
        });
    }
    let n = NUM_CLASSES as u64 * width as u64 * height as u64;
    let expected = HEADER_LEN as u64 + 4 * n;
    if bytes.len() as u64 != expected {
        return Err(Error::Length {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let scores: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ScorePlaneTile::from_scores(tile_col, tile_row, width, height, scores).map_err(|e| Error::Format {
        field: "payload",
        message: e.to_string(),
    })
}

pub fn read_score_plane(path: &Path) -> Result<ScorePlaneTile> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(f)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode_score_plane(&bytes)
}
