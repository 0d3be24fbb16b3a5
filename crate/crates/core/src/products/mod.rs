//! Decision-maker products: GeoJSON and CSV assessments, and the JSON run
//! report.

mod report;

use std::collections::HashMap;

use serde_json::{json, Map, Value};

pub use report::{Clock, FixedClock, RunReport, SystemClock};

use crate::assessment::{AssessmentFlag, BuildingAssessment};
use crate::error::{Error, Result};
use crate::footprints::geojson::{collection, geometry_json, to_text};
use crate::footprints::{BuildingFootprint, DamageClass, NUM_CLASSES};

pub const CSV_HEADER: &str = "building_id,damage,pixel_count,sum_no_damage,sum_minor_damage,sum_major_damage,sum_destroyed,sum_un_classified,flags";
pub const CSV_SCHEMA_COMMENT: &str = "# schema: suas-damage assessments v1";

/// Formats like C's `%.6g`: six significant digits, trailing zeros
/// removed, exponent form outside `[1e-4, 1e6)`.
pub fn format_g6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    }
}

fn flags_text(flags: &[AssessmentFlag]) -> String {
    flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join("|")
}

/// One row per assessment, in input order.
pub fn emit_csv(assessments: &[BuildingAssessment], schema_comment: bool) -> Result<String> {
    let mut out = Vec::new();
    if schema_comment {
        out.extend_from_slice(CSV_SCHEMA_COMMENT.as_bytes());
        out.push(b'\n');
    }
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut out);
        w.write_record(CSV_HEADER.split(','))
            .map_err(|e| Error::Internal(format!("csv: {e}")))?;
        for a in assessments {
            let mut rec = vec![
                a.building_id.clone(),
                a.predicted.snake_name().to_string(),
                a.pixel_count.to_string(),
            ];
            rec.extend(a.class_sums.iter().map(|&s| format_g6(s)));
            rec.push(flags_text(&a.flags));
            w.write_record(&rec).map_err(|e| Error::Internal(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| Error::Internal(format!("csv: {e}")))?;
    }
    String::from_utf8(out).map_err(|e| Error::Internal(format!("csv: {e}")))
}

/// Reads assessments back from [`emit_csv`] output. Class sums carry the
/// six significant digits written.
pub fn parse_csv(text: &str) -> Result<Vec<BuildingAssessment>> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header = r
        .headers()
        .map_err(|e| Error::InvalidData(format!("csv header: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::InvalidData(format!("unexpected csv header `{header}`")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            column: 0,
            message: e.to_string(),
        })?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let bad = |k: usize, what: &str| Error::Parse {
            line,
            column: k + 1,
            message: format!("invalid {what} `{}`", field(k)),
        };
        let predicted: DamageClass = field(1).parse().map_err(|_| bad(1, "damage class"))?;
        let pixel_count: usize = field(2).parse().map_err(|_| bad(2, "pixel count"))?;
        let mut class_sums = [0.0; NUM_CLASSES];
        for (k, s) in class_sums.iter_mut().enumerate() {
            *s = field(3 + k).parse().map_err(|_| bad(3 + k, "class sum"))?;
        }
        let flags = field(8)
            .split('|')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse())
            .collect::<Result<Vec<AssessmentFlag>>>()
            .map_err(|_| bad(8, "flags"))?;
        out.push(BuildingAssessment {
            building_id: field(0).to_string(),
            class_sums,
            pixel_count,
            predicted,
            flags,
        });
    }
    Ok(out)
}

/// One Feature per assessment, in assessment order, carrying the
/// footprint geometry. Assessments and footprints must pair one-to-one by
/// id.
pub fn emit_geojson(
    assessments: &[BuildingAssessment],
    footprints: &[BuildingFootprint<f64>],
    crs_id: Option<&str>,
    run_id: &str,
) -> Result<String> {
    let by_id: HashMap<&str, &BuildingFootprint<f64>> = footprints.iter().map(|f| (f.id.as_str(), f)).collect();
    let unpaired: Vec<&str> = assessments
        .iter()
        .map(|a| a.building_id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !unpaired.is_empty() || assessments.len() != footprints.len() {
        return Err(Error::Pairing(format!(
            "{} assessments for {} footprints; unpaired assessments: {:?}",
            assessments.len(),
            footprints.len(),
            unpaired
        )));
    }
    let features = assessments
        .iter()
        .map(|a| {
            let f = by_id[a.building_id.as_str()];
            let mut props = Map::new();
            props.insert("id".into(), json!(a.building_id));
            props.insert("damage".into(), json!(a.predicted.as_str()));
            props.insert("class_sums".into(), json!(a.class_sums));
            props.insert("pixel_count".into(), json!(a.pixel_count));
            props.insert("flags".into(), json!(a.flags.iter().map(|f| f.as_str()).collect::<Vec<_>>()));
            props.insert("run_id".into(), json!(run_id));
            json!({
                "type": "Feature",
                "id": a.building_id,
                "geometry": geometry_json(f),
                "properties": props,
            })
        })
        .collect();
    Ok(to_text(&collection(crs_id, &[("run_id", Value::from(run_id))], features)))
}
