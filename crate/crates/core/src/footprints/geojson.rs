//! GeoJSON FeatureCollection reading and writing for building footprints.
//!
//! Coordinates are `(easting, northing)` in the raster CRS. Rings are
//! normalized on read: exterior counter-clockwise, holes clockwise.

use std::collections::HashSet;

use serde_json::{json, Map, Value};

use super::{BuildingFootprint, DamageClass, Point, Ring};
use crate::error::{Error, Result, Warning};

/// Property keys interpreted by the reader; everything else is preserved.
const RESERVED_KEYS: [&str; 3] = ["id", "damage", "alignment_offset"];

#[derive(Debug, Clone, Default)]
pub struct ParsedFootprints {
    pub footprints: Vec<BuildingFootprint<f64>>,
    pub warnings: Vec<Warning>,
    /// Top-level `crs_id` foreign member, when present.
    pub crs_id: Option<String>,
}

fn value_id(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_position(v: &Value) -> Result<Point<f64>> {
    let arr = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| Error::InvalidData(format!("position must be [x, y], got {v}")))?;
    let x = arr[0].as_f64();
    let y = arr[1].as_f64();
    match (x, y) {
        (Some(x), Some(y)) => Ok(Point::new(x, y)),
        _ => Err(Error::InvalidData(format!("non-numeric position {v}"))),
    }
}

fn parse_ring(v: &Value) -> Result<Ring<f64>> {
    let pts = v
        .as_array()
        .ok_or_else(|| Error::InvalidData("ring must be an array of positions".into()))?
        .iter()
        .map(parse_position)
        .collect::<Result<Vec<_>>>()?;
    if pts.is_empty() {
        return Err(Error::InvalidData("empty ring".into()));
    }
    Ring::new(pts)
}

fn parse_polygon_rings(v: &Value) -> Result<(Ring<f64>, Vec<Ring<f64>>)> {
    let rings = v
        .as_array()
        .filter(|a| !a.is_empty())
        .ok_or_else(|| Error::InvalidData("polygon needs at least one ring".into()))?;
    let exterior = parse_ring(&rings[0])?.oriented(true);
    let holes = rings[1..]
        .iter()
        .map(|r| parse_ring(r).map(|r| r.oriented(false)))
        .collect::<Result<Vec<_>>>()?;
    Ok((exterior, holes))
}

/// Parses a GeoJSON FeatureCollection (or single Feature) into footprints.
///
/// MultiPolygon features are split into parts with ids `<id>#<k>`.
/// Non-polygon features are skipped with a warning; features without an id
/// receive `feature-<index>`.
pub fn parse_footprints(text: &str) -> Result<ParsedFootprints> {
    let root: Value = serde_json::from_str(text)?;
    let mut out = ParsedFootprints {
        crs_id: root.get("crs_id").and_then(Value::as_str).map(str::to_string),
        ..Default::default()
    };
    let features: Vec<&Value> = match root.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => root
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidData("FeatureCollection without `features` array".into()))?
            .iter()
            .collect(),
        Some("Feature") => vec![&root],
        other => {
            return Err(Error::InvalidData(format!(
                "expected a FeatureCollection, found type {other:?}"
            )))
        }
    };

    let mut seen = HashSet::new();
    for (index, feat) in features.into_iter().enumerate() {
        let empty = Map::new();
        let props = feat
            .get("properties")
            .and_then(Value::as_object)
            .unwrap_or(&empty);
        let id = match feat.get("id").and_then(value_id).or_else(|| props.get("id").and_then(value_id)) {
            Some(id) => id,
            None => {
                let id = format!("feature-{index}");
                out.warnings.push(Warning::new(
                    "missing_id",
                    format!("feature {index} has no id; assigned `{id}`"),
                ));
                id
            }
        };
        let geometry = feat.get("geometry").filter(|g| !g.is_null());
        let gtype = geometry.and_then(|g| g.get("type")).and_then(Value::as_str);
        let coords = geometry.and_then(|g| g.get("coordinates"));
        let parts: Vec<(String, &Value)> = match (gtype, coords) {
            (Some("Polygon"), Some(c)) => vec![(id.clone(), c)],
            (Some("MultiPolygon"), Some(Value::Array(polys))) => polys
                .iter()
                .enumerate()
                .map(|(k, p)| (format!("{id}#{k}"), p))
                .collect(),
            _ => {
                out.warnings.push(Warning::new(
                    "non_polygon",
                    format!("feature `{id}` has geometry {gtype:?}; skipped"),
                ));
                continue;
            }
        };

        let truth_label = match props.get("damage") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => match s.parse::<DamageClass>() {
                Ok(c) => Some(c),
                Err(_) => {
                    out.warnings.push(Warning::new(
                        "unknown_damage",
                        format!("feature `{id}` has unknown damage `{s}`; left unlabeled"),
                    ));
                    None
                }
            },
            Some(other) => {
                out.warnings.push(Warning::new(
                    "unknown_damage",
                    format!("feature `{id}` has non-string damage {other}; left unlabeled"),
                ));
                None
            }
        };
        let alignment_offset = match props.get("alignment_offset") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                parse_position(v)
                    .map(|p| (p.x, p.y))
                    .map_err(|_| Error::InvalidData(format!("feature `{id}`: alignment_offset must be [dx, dy]")))?,
            ),
        };
        let mut preserved = props.clone();
        for k in RESERVED_KEYS {
            preserved.shift_remove(k);
        }

        for (part_id, coords) in parts {
            let (exterior, holes) = match parse_polygon_rings(coords) {
                Ok(r) => r,
                Err(e) => {
                    out.warnings.push(Warning::new(
                        "invalid_polygon",
                        format!("feature `{part_id}`: {e}; skipped"),
                    ));
                    continue;
                }
            };
            let fp = BuildingFootprint {
                id: part_id.clone(),
                exterior,
                holes,
                truth_label,
                alignment_offset,
                properties: preserved.clone(),
            };
            if let Err(e) = fp.validate() {
                out.warnings.push(Warning::new("invalid_polygon", format!("{e}; skipped")));
                continue;
            }
            if !seen.insert(part_id.clone()) {
                return Err(Error::InvalidData(format!("duplicate footprint id `{part_id}`")));
            }
            out.footprints.push(fp);
        }
    }
    Ok(out)
}

fn ring_json(r: &Ring<f64>) -> Value {
    Value::Array(r.points().iter().map(|p| json!([p.x, p.y])).collect())
}

/// RFC 7946 Polygon geometry object.
pub fn geometry_json(f: &BuildingFootprint<f64>) -> Value {
    let rings: Vec<Value> = f.rings().map(ring_json).collect();
    json!({ "type": "Polygon", "coordinates": rings })
}

/// FeatureCollection with an optional `crs_id` and extra foreign members
/// placed before `features`.
pub(crate) fn collection(crs_id: Option<&str>, extra: &[(&str, Value)], features: Vec<Value>) -> Value {
    let mut root = Map::new();
    root.insert("type".into(), json!("FeatureCollection"));
    if let Some(crs) = crs_id {
        root.insert("crs_id".into(), json!(crs));
    }
    for (k, v) in extra {
        root.insert((*k).to_string(), v.clone());
    }
    root.insert("features".into(), Value::Array(features));
    Value::Object(root)
}

/// Serializes footprints as a FeatureCollection. Parsing the output yields
/// the same footprints.
pub fn emit_footprints(footprints: &[BuildingFootprint<f64>], crs_id: Option<&str>) -> String {
    let features = footprints
        .iter()
        .map(|f| {
            let mut props = Map::new();
            if let Some(c) = f.truth_label {
                props.insert("damage".into(), json!(c.as_str()));
            }
            if let Some((dx, dy)) = f.alignment_offset {
                props.insert("alignment_offset".into(), json!([dx, dy]));
            }
            for (k, v) in &f.properties {
                props.insert(k.clone(), v.clone());
            }
            json!({
                "type": "Feature",
                "id": f.id,
                "geometry": geometry_json(f),
                "properties": props,
            })
        })
        .collect();
    to_text(&collection(crs_id, &[], features))
}

pub(crate) fn to_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = r#"{"type":"FeatureCollection","features":[
        {"type":"Feature","id":"B1","geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]},
         "properties":{"damage":"destroyed","source":"survey"}}]}"#;

    #[test]
    fn single_feature() {
        let p = parse_footprints(SQUARE).unwrap();
        assert_eq!(p.footprints.len(), 1);
        let f = &p.footprints[0];
        assert_eq!(f.id, "B1");
        assert_eq!(f.truth_label, Some(DamageClass::Destroyed));
        assert_eq!(f.area(), 1.0);
        assert_eq!(f.property_str("source"), Some("survey"));
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn empty_collection() {
        let p = parse_footprints(r#"{"type":"FeatureCollection","features":[]}"#).unwrap();
        assert!(p.footprints.is_empty());
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn multipolygon_parts_are_suffixed() {
        let text = r#"{"type":"FeatureCollection","features":[{"type":"Feature","id":"B7",
            "geometry":{"type":"MultiPolygon","coordinates":[
              [[[0,0],[1,0],[1,1],[0,1],[0,0]]],
              [[[5,5],[6,5],[6,6],[5,6],[5,5]]]]},"properties":{"damage":"minor-damage"}}]}"#;
        let p = parse_footprints(text).unwrap();
        let ids: Vec<_> = p.footprints.iter().map(|f| f.id.as_str()).collect();
        assert_eq!(ids, ["B7#0", "B7#1"]);
        let again = parse_footprints(&emit_footprints(&p.footprints, None)).unwrap();
        assert_eq!(again.footprints.len(), 2);
        assert!(again.footprints.iter().all(|f| f.truth_label == Some(DamageClass::MinorDamage)));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_footprints("{\"type\": \"FeatureCollection\",\n \"features\": [,]}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_polygon_skipped_and_missing_id_assigned() {
        let text = r#"{"type":"FeatureCollection","features":[
          {"type":"Feature","geometry":{"type":"Point","coordinates":[1,2]},"properties":{}},
          {"type":"Feature","geometry":{"type":"Polygon","coordinates":[[[0,0],[2,0],[0,2]]]},"properties":null}]}"#;
        let p = parse_footprints(text).unwrap();
        assert_eq!(p.footprints.len(), 1);
        assert_eq!(p.footprints[0].id, "feature-1");
        let codes: Vec<_> = p.warnings.iter().map(|w| w.code.as_str()).collect();
        assert_eq!(codes, ["missing_id", "non_polygon", "missing_id"]);
    }

    #[test]
    fn clockwise_exterior_is_normalized() {
        let text = r#"{"type":"FeatureCollection","features":[{"type":"Feature","id":1,
            "geometry":{"type":"Polygon","coordinates":[[[0,0],[0,1],[1,1],[1,0],[0,0]]]},"properties":{}}]}"#;
        let p = parse_footprints(text).unwrap();
        assert_eq!(p.footprints[0].id, "1");
        assert!(p.footprints[0].exterior.signed_area() > 0.0);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = r#"{"type":"FeatureCollection","features":[
          {"type":"Feature","id":"a","geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[0,1]]]},"properties":{}},
          {"type":"Feature","id":"a","geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[0,1]]]},"properties":{}}]}"#;
        assert!(matches!(parse_footprints(text), Err(Error::InvalidData(_))));
    }

    #[test]
    fn emit_parse_fixpoint() {
        let text = r#"{"type":"FeatureCollection","crs_id":"EPSG:32617","features":[
          {"type":"Feature","id":"h","geometry":{"type":"Polygon","coordinates":[
             [[431000.125,3345000.5],[431010.25,3345000.5],[431010.25,3345012.75],[431000.125,3345012.75]],
             [[431002,3345002],[431002,3345004],[431004,3345004],[431004,3345002]]]},
           "properties":{"damage":"major_damage","alignment_offset":[0.3,-0.2],"orthomosaic_id":"o1","nested":{"a":[1,2]}}}]}"#;
        let first = parse_footprints(text).unwrap();
        let emitted = emit_footprints(&first.footprints, first.crs_id.as_deref());
        let second = parse_footprints(&emitted).unwrap();
        assert_eq!(second.footprints, first.footprints);
        assert_eq!(second.crs_id.as_deref(), Some("EPSG:32617"));
        assert_eq!(emit_footprints(&second.footprints, second.crs_id.as_deref()), emitted);
        let f = &second.footprints[0];
        assert_eq!(f.alignment_offset, Some((0.3, -0.2)));
        assert_eq!(f.holes.len(), 1);
        assert!(f.holes[0].signed_area() < 0.0);
    }
}
