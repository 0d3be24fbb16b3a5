use serde_json::{Map, Value};

use super::DamageClass;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }
}

/// Closed vertex ring; the first vertex is repeated at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring<T = f64> {
    points: Vec<Point<T>>,
}

/// Axis-aligned bounding box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<T = f64> {
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

impl<T: Scalar> Ring<T> {
    /// Builds a ring, closing it if needed. Requires at least three
    /// distinct finite vertices.
    pub fn new(mut points: Vec<Point<T>>) -> Result<Self> {
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidData("ring has non-finite coordinates".into()));
        }
        if points.first() != points.last() {
            let first = points[0];
            points.push(first);
        }
        let mut distinct: Vec<Point<T>> = Vec::new();
        for p in &points[..points.len() - 1] {
            if !distinct.contains(p) {
                distinct.push(*p);
                if distinct.len() >= 3 {
                    break;
                }
            }
        }
        if distinct.len() < 3 {
            return Err(Error::InvalidData(
                "ring needs at least 3 distinct vertices".into(),
            ));
        }
        Ok(Ring { points })
    }

    pub fn rect(x0: T, y0: T, x1: T, y1: T) -> Self {
        Ring::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
        .expect("rectangle ring")
    }

    /// All vertices including the closing duplicate.
    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point<T>, Point<T>)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// Shoelace area, positive for counter-clockwise rings.
    pub fn signed_area(&self) -> T {
        // relative to the first vertex to avoid cancellation at projected magnitudes
        let o = self.points[0];
        let two = T::lit(2.0);
        self.edges()
            .fold(T::zero(), |acc, (a, b)| {
                let (ax, ay, bx, by) = (a.x - o.x, a.y - o.y, b.x - o.x, b.y - o.y);
                acc + (ax * by - bx * ay)
            })
            / two
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Ring { points }
    }

    pub fn oriented(&self, ccw: bool) -> Self {
        if (self.signed_area() > T::zero()) == ccw || self.signed_area() == T::zero() {
            self.clone()
        } else {
            self.reversed()
        }
    }

    pub fn translated(&self, dx: T, dy: T) -> Self {
        Ring {
            points: self
                .points
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }

    pub fn bounds(&self) -> Bounds<T> {
        let mut b = Bounds {
            min_x: T::infinity(),
            min_y: T::infinity(),
            max_x: T::neg_infinity(),
            max_y: T::neg_infinity(),
        };
        for p in &self.points {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        b
    }

    /// True if any two non-adjacent edges touch or cross.
    pub fn self_intersects(&self) -> bool {
        let edges: Vec<_> = self.edges().collect();
        let n = edges.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_touch(edges[i], edges[j]) {
                    return true;
                }
            }
        }
        false
    }
}

fn orient<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>) -> T {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment<T: Scalar>(a: Point<T>, b: Point<T>, p: Point<T>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch<T: Scalar>((a, b): (Point<T>, Point<T>), (c, d): (Point<T>, Point<T>)) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    let z = T::zero();
    if ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z)) {
        return true;
    }
    (d1 == z && on_segment(c, d, a))
        || (d2 == z && on_segment(c, d, b))
        || (d3 == z && on_segment(a, b, c))
        || (d4 == z && on_segment(a, b, d))
}

/// Identified building polygon in world coordinates.
///
/// `alignment_offset` is the displacement of the geometry from its
/// registered position on the imagery; [`BuildingFootprint::translate`]
/// accumulates into it and [`BuildingFootprint::registered`] undoes it.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingFootprint<T = f64> {
    pub id: String,
    pub exterior: Ring<T>,
    pub holes: Vec<Ring<T>>,
    pub truth_label: Option<DamageClass>,
    pub alignment_offset: Option<(T, T)>,
    /// Unrecognized GeoJSON properties, kept for round-tripping.
    pub properties: Map<String, Value>,
}

impl<T: Scalar> BuildingFootprint<T> {
    pub fn new(id: impl Into<String>, exterior: Ring<T>) -> Self {
        BuildingFootprint {
            id: id.into(),
            exterior,
            holes: Vec::new(),
            truth_label: None,
            alignment_offset: None,
            properties: Map::new(),
        }
    }

    pub fn with_holes(mut self, holes: Vec<Ring<T>>) -> Self {
        self.holes = holes;
        self
    }

    pub fn with_label(mut self, label: DamageClass) -> Self {
        self.truth_label = Some(label);
        self
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring<T>> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    /// Shoelace area with holes subtracted.
    pub fn area(&self) -> T {
        let holes = self
            .holes
            .iter()
            .fold(T::zero(), |acc, h| acc + h.signed_area().abs());
        self.exterior.signed_area().abs() - holes
    }

    pub fn bounds(&self) -> Bounds<T> {
        self.exterior.bounds()
    }

    /// Shifts all vertices by `(dx, dy)`; the alignment offset composes
    /// additively, id and labels are unchanged.
    pub fn translate(&self, dx: T, dy: T) -> Self {
        let (ox, oy) = self.alignment_offset.unwrap_or((T::zero(), T::zero()));
        BuildingFootprint {
            id: self.id.clone(),
            exterior: self.exterior.translated(dx, dy),
            holes: self.holes.iter().map(|h| h.translated(dx, dy)).collect(),
            truth_label: self.truth_label,
            alignment_offset: Some((ox + dx, oy + dy)),
            properties: self.properties.clone(),
        }
    }

    /// Geometry moved back onto its registered position, with the offset cleared.
    pub fn registered(&self) -> Self {
        match self.alignment_offset {
            Some((dx, dy)) => {
                let mut f = self.translate(-dx, -dy);
                f.alignment_offset = None;
                f
            }
            None => self.clone(),
        }
    }

    /// Rejects a self-intersecting exterior ring. Holes are not checked.
    pub fn validate(&self) -> Result<()> {
        if self.exterior.self_intersects() {
            return Err(Error::InvalidData(format!(
                "footprint `{}` has a self-intersecting exterior ring",
                self.id
            )));
        }
        Ok(())
    }

    pub fn property_str(&self, key: &str) -> Option<&str> {
        self.properties.get(key).and_then(Value::as_str)
    }
}
