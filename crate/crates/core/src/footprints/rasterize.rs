use super::BuildingFootprint;
use crate::error::{Error, Result};
use crate::raster::{GeoTransform, Window};
use crate::scalar::Scalar;

/// Half-open run of covered pixels `[start, end)` on one raster row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Span {
    pub row: usize,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Covered pixels of one footprint within a window, stored as disjoint row
/// spans sorted by `(row, start)`. Coordinates are absolute raster pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    pub window: Window,
    spans: Vec<Span>,
}

impl PixelMask {
    pub fn empty(window: Window) -> Self {
        PixelMask {
            window,
            spans: Vec::new(),
        }
    }

    /// Builds a mask from an arbitrary pixel set; pixels outside `window`
    /// are dropped.
    pub fn from_pixels(window: Window, pixels: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut px: Vec<(usize, usize)> = pixels
            .into_iter()
            .filter(|&(c, r)| window.contains(c, r))
            .map(|(c, r)| (r, c))
            .collect();
        px.sort_unstable();
        px.dedup();
        let mut spans: Vec<Span> = Vec::new();
        for (row, col) in px {
            match spans.last_mut() {
                Some(s) if s.row == row && s.end == col => s.end += 1,
                _ => spans.push(Span {
                    row,
                    start: col,
                    end: col + 1,
                }),
            }
        }
        PixelMask { window, spans }
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn pixel_count(&self) -> usize {
        self.spans.iter().map(Span::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn contains(&self, col: usize, row: usize) -> bool {
        let i = self.spans.partition_point(|s| (s.row, s.end) <= (row, col));
        self.spans
            .get(i)
            .is_some_and(|s| s.row == row && s.start <= col && col < s.end)
    }

    /// Covered pixels as `(col, row)`, row-major.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.spans
            .iter()
            .flat_map(|s| (s.start..s.end).map(move |c| (c, s.row)))
    }

    /// The part of this mask inside `sub`, re-windowed to `sub`.
    pub fn restrict(&self, sub: Window) -> PixelMask {
        let spans = self
            .spans
            .iter()
            .filter(|s| s.row >= sub.row_off && s.row < sub.row_end())
            .filter_map(|s| {
                let start = s.start.max(sub.col_off);
                let end = s.end.min(sub.col_end());
                (start < end).then_some(Span {
                    row: s.row,
                    start,
                    end,
                })
            })
            .collect();
        PixelMask { window: sub, spans }
    }

    /// Row-major occupancy bitmap over the window.
    pub fn to_bitmap(&self) -> Vec<bool> {
        let w = self.window;
        let mut bits = vec![false; w.area()];
        for (c, r) in self.pixels() {
            bits[(r - w.row_off) * w.width + (c - w.col_off)] = true;
        }
        bits
    }
}

/// First index in `[lo, hi)` where the monotone predicate turns true.
fn first_true(mut lo: usize, mut hi: usize, pred: impl Fn(usize) -> bool) -> usize {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Columns of `window` whose pixel-center X lies in `[a, b)`.
fn column_span<T: Scalar>(t: &GeoTransform<T>, window: &Window, a: T, b: T) -> (usize, usize) {
    let (c0, c1) = (window.col_off, window.col_end());
    if t.pixel_width > T::zero() {
        let lo = first_true(c0, c1, |c| t.center_x(c) >= a);
        let hi = first_true(c0, c1, |c| t.center_x(c) >= b);
        (lo, hi)
    } else {
        let below_a = first_true(c0, c1, |c| t.center_x(c) < a);
        let below_b = first_true(c0, c1, |c| t.center_x(c) < b);
        (below_b, below_a)
    }
}

/// Rasterizes a footprint into `window`: pixel `(c, r)` is covered iff its
/// center lies inside the polygon under the even-odd rule (holes subtract).
///
/// Each window row is intersected with every non-horizontal ring edge using
/// a half-open crossing rule, and covered column ranges are located by
/// binary search on exact pixel-center coordinates.
pub fn rasterize<T: Scalar>(f: &BuildingFootprint<T>, t: &GeoTransform<T>, window: Window) -> PixelMask {
    let mut mask = PixelMask::empty(window);
    if window.is_empty() {
        return mask;
    }
    if f.area() == T::zero() {
        log::warn!("footprint `{}` has zero area; mask is empty", f.id);
        return mask;
    }
    let edges: Vec<_> = f
        .rings()
        .flat_map(|r| r.edges())
        .filter(|(a, b)| a.y != b.y)
        .collect();
    if edges.is_empty() {
        return mask;
    }
    let b = f.bounds();
    let (_, ra) = t.world_to_pixel(b.min_x, b.min_y);
    let (_, rb) = t.world_to_pixel(b.max_x, b.max_y);
    let (ra, rb) = (ra.to_f64_lossy(), rb.to_f64_lossy());
    let lo = (ra.min(rb).floor() - 1.0).max(window.row_off as f64);
    let hi = (ra.max(rb).ceil() + 1.0).min(window.row_end() as f64);
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return mask;
    }
    let mut xs: Vec<T> = Vec::new();
    for row in (lo as usize)..(hi as usize) {
        let y = t.center_y(row);
        xs.clear();
        for &(p, q) in &edges {
            if (p.y > y) != (q.y > y) {
                xs.push((q.x - p.x) * (y - p.y) / (q.y - p.y) + p.x);
            }
        }
        xs.sort_by(|u, v| u.partial_cmp(v).expect("finite crossings"));
        for pair in xs.chunks_exact(2) {
            let (start, end) = column_span(t, &window, pair[0], pair[1]);
            if start < end {
                mask.spans.push(Span { row, start, end });
            }
        }
    }
    if t.pixel_width < T::zero() {
        mask.spans.sort_by_key(|s| (s.row, s.start));
    }
    // a hole thinner than a pixel leaves touching spans; join them
    mask.spans.dedup_by(|next, prev| {
        let touching = next.row == prev.row && next.start == prev.end;
        if touching {
            prev.end = next.end;
        }
        touching
    });
    mask
}

/// Intersection over union of two masks on the same window; 1 when both
/// are empty.
pub fn mask_iou(a: &PixelMask, b: &PixelMask) -> Result<f64> {
    if a.window != b.window {
        return Err(Error::InvalidArgument(format!(
            "mask windows differ: {:?} vs {:?}",
            a.window, b.window
        )));
    }
    let (na, nb) = (a.pixel_count(), b.pixel_count());
    if na == 0 && nb == 0 {
        return Ok(1.0);
    }
    let (sa, sb) = (a.spans(), b.spans());
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < sa.len() && j < sb.len() {
        let (x, y) = (sa[i], sb[j]);
        if x.row < y.row {
            i += 1;
        } else if x.row > y.row {
            j += 1;
        } else {
            let lo = x.start.max(y.start);
            let hi = x.end.min(y.end);
            inter += hi.saturating_sub(lo);
            if x.end < y.end {
                i += 1;
            } else {
                j += 1;
            }
        }
    }
    Ok(inter as f64 / (na + nb - inter) as f64)
}
