use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::{GeoTransform, Window};
use crate::error::{Error, Result};

/// Tracks how many pixel-buffer bytes are alive and the peak ever observed.
#[derive(Debug, Clone, Default)]
pub struct PixelMeter {
    inner: Arc<MeterInner>,
}

#[derive(Debug, Default)]
struct MeterInner {
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl PixelMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lease(&self, bytes: usize) -> MeterLease {
        let now = self.inner.current.fetch_add(bytes, Ordering::SeqCst) + bytes;
        self.inner.peak.fetch_max(now, Ordering::SeqCst);
        MeterLease {
            meter: self.inner.clone(),
            bytes,
        }
    }

    pub fn current(&self) -> usize {
        self.inner.current.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.inner.peak.load(Ordering::SeqCst)
    }
}

/// Releases its bytes from the owning [`PixelMeter`] when dropped.
#[derive(Debug)]
pub struct MeterLease {
    meter: Arc<MeterInner>,
    bytes: usize,
}

impl Drop for MeterLease {
    fn drop(&mut self) {
        self.meter.current.fetch_sub(self.bytes, Ordering::SeqCst);
    }
}

/// Band-interleaved 8-bit pixels of one window.
pub struct PixelBuffer {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub data: Vec<u8>,
    leases: Vec<MeterLease>,
}

impl PixelBuffer {
    pub fn new(width: usize, height: usize, bands: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * bands {
            return Err(Error::Length {
                expected: (width * height * bands) as u64,
                actual: data.len() as u64,
            });
        }
        Ok(PixelBuffer {
            width,
            height,
            bands,
            data,
            leases: Vec::new(),
        })
    }

    pub fn with_lease(mut self, lease: MeterLease) -> Self {
        self.leases.push(lease);
        self
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize, band: usize) -> u8 {
        self.data[(row * self.width + col) * self.bands + band]
    }

    /// Mean over bands, as a luminance proxy.
    #[inline]
    pub fn gray(&self, col: usize, row: usize) -> f64 {
        let base = (row * self.width + col) * self.bands;
        let sum: u32 = self.data[base..base + self.bands].iter().map(|&v| v as u32).sum();
        sum as f64 / self.bands as f64
    }

    pub fn byte_len(&self) -> usize {
        self.data.len()
    }
}

impl fmt::Debug for PixelBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PixelBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("bands", &self.bands)
            .finish()
    }
}

/// Reader of pixel windows. Implementations must allow concurrent reads of
/// non-overlapping windows; windows are bounds-checked by [`GeoRaster`].
pub trait PixelSource: Send + Sync {
    fn read_window(&self, window: Window, bands: usize) -> Result<PixelBuffer>;

    /// Size in bytes of the stored payload backing this source.
    fn payload_bytes(&self) -> u64;
}

/// Pixels held in memory, row-major and band-interleaved.
#[derive(Debug, Clone)]
pub struct MemorySource {
    width: usize,
    bands: usize,
    data: Arc<Vec<u8>>,
}

impl MemorySource {
    pub fn new(width: usize, height: usize, bands: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * bands {
            return Err(Error::Length {
                expected: (width * height * bands) as u64,
                actual: data.len() as u64,
            });
        }
        Ok(MemorySource {
            width,
            bands,
            data: Arc::new(data),
        })
    }
}

impl PixelSource for MemorySource {
    fn read_window(&self, w: Window, bands: usize) -> Result<PixelBuffer> {
        debug_assert_eq!(bands, self.bands);
        let mut out = Vec::with_capacity(w.area() * bands);
        for r in w.row_off..w.row_end() {
            let start = (r * self.width + w.col_off) * bands;
            out.extend_from_slice(&self.data[start..start + w.width * bands]);
        }
        PixelBuffer::new(w.width, w.height, bands, out)
    }

    fn payload_bytes(&self) -> u64 {
        self.data.len() as u64
    }
}

/// Georeferenced multi-band raster with windowed access.
#[derive(Clone)]
pub struct GeoRaster {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub transform: GeoTransform<f64>,
    pub crs_id: String,
    source: Arc<dyn PixelSource>,
    meter: Option<PixelMeter>,
}

impl fmt::Debug for GeoRaster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeoRaster")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("bands", &self.bands)
            .field("transform", &self.transform)
            .field("crs_id", &self.crs_id)
            .finish()
    }
}

impl GeoRaster {
    pub fn new(
        width: usize,
        height: usize,
        bands: usize,
        transform: GeoTransform<f64>,
        crs_id: impl Into<String>,
        source: Arc<dyn PixelSource>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(Error::InvalidArgument(format!(
                "raster dimensions must be positive, got {width}x{height}x{bands}"
            )));
        }
        transform.validate()?;
        Ok(GeoRaster {
            width,
            height,
            bands,
            transform,
            crs_id: crs_id.into(),
            source,
            meter: None,
        })
    }

    pub fn from_memory(
        width: usize,
        height: usize,
        bands: usize,
        transform: GeoTransform<f64>,
        crs_id: impl Into<String>,
        data: Vec<u8>,
    ) -> Result<Self> {
        let src = MemorySource::new(width, height, bands, data)?;
        Self::new(width, height, bands, transform, crs_id, Arc::new(src))
    }

    /// Attaches a meter that accounts every buffer handed out by
    /// [`GeoRaster::read_window`] until it is dropped.
    pub fn with_meter(mut self, meter: PixelMeter) -> Self {
        self.meter = Some(meter);
        self
    }

    pub fn meter(&self) -> Option<&PixelMeter> {
        self.meter.as_ref()
    }

    pub fn full_window(&self) -> Window {
        Window::full(self.width, self.height)
    }

    pub fn gsd(&self) -> f64 {
        self.transform.gsd()
    }

    pub fn payload_bytes(&self) -> u64 {
        self.source.payload_bytes()
    }

    pub fn window_bytes(&self, w: &Window) -> usize {
        w.area() * self.bands
    }

    pub fn read_window(&self, w: Window) -> Result<PixelBuffer> {
        if w.is_empty() || w.col_end() > self.width || w.row_end() > self.height {
            return Err(Error::OutOfBounds {
                col_off: w.col_off,
                row_off: w.row_off,
                width: w.width,
                height: w.height,
                raster_width: self.width,
                raster_height: self.height,
            });
        }
        let buf = self.source.read_window(w, self.bands)?;
        if buf.width != w.width || buf.height != w.height || buf.bands != self.bands {
            return Err(Error::Internal(format!(
                "pixel source returned {}x{}x{} for a {}x{}x{} window",
                buf.width, buf.height, buf.bands, w.width, w.height, self.bands
            )));
        }
        Ok(match &self.meter {
            Some(m) => {
                let lease = m.lease(buf.byte_len());
                buf.with_lease(lease)
            }
            None => buf,
        })
    }
}
