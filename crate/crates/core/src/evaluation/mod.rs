//! Building-level confusion matrices, macro F1, aligned/unaligned
//! evaluation and disaster-based split manifests.

mod manifest;
mod metrics;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use manifest::{summarize_manifest, ManifestEntry, Split, SplitManifest, SplitSummary};
pub use metrics::{class_metrics, confusion, macro_f1, ClassMetrics, ConfusionMatrix};

use crate::assessment::BuildingAssessment;
use crate::error::{Error, Result};
use crate::footprints::{BuildingFootprint, DamageClass};

/// Footprint property naming the orthomosaic a building belongs to.
pub const ORTHOMOSAIC_PROPERTY: &str = "orthomosaic_id";

/// Whether recorded alignment offsets are removed before assessment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentMode {
    #[default]
    Aligned,
    Unaligned,
}

impl AlignmentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AlignmentMode::Aligned => "aligned",
            AlignmentMode::Unaligned => "unaligned",
        }
    }

    /// Footprints as this mode feeds them to the pipeline: aligned undoes
    /// each footprint's recorded offset, unaligned uses them as given.
    pub fn prepare(self, footprints: &[BuildingFootprint<f64>]) -> Vec<BuildingFootprint<f64>> {
        match self {
            AlignmentMode::Aligned => footprints.iter().map(|f| f.registered()).collect(),
            AlignmentMode::Unaligned => footprints.to_vec(),
        }
    }
}

impl fmt::Display for AlignmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlignmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(AlignmentMode::Aligned),
            "unaligned" => Ok(AlignmentMode::Unaligned),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}` (aligned|unaligned)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassMetrics<f64>>,
    pub matrix: ConfusionMatrix,
    pub macro_f1: f64,
    pub alignment_mode: AlignmentMode,
    pub split_id: String,
    pub building_count: usize,
}

impl EvalReport {
    pub fn from_matrix(matrix: ConfusionMatrix, mode: AlignmentMode, split_id: impl Into<String>) -> Self {
        EvalReport {
            per_class: class_metrics::<f64>(&matrix).to_vec(),
            macro_f1: macro_f1::<f64>(&matrix),
            building_count: matrix.total() as usize,
            matrix,
            alignment_mode: mode,
            split_id: split_id.into(),
        }
    }
}

/// Pairs assessments with labeled truth by id and scores them. With a
/// manifest and split, only buildings whose `orthomosaic_id` property maps
/// to that split are counted; pairing is checked over all buildings first.
pub fn evaluate_run(
    assessments: &[BuildingAssessment],
    truth: &[BuildingFootprint<f64>],
    mode: AlignmentMode,
    manifest: Option<&SplitManifest>,
    split: Option<Split>,
) -> Result<EvalReport> {
    let truth_pairs = truth
        .iter()
        .map(|f| {
            f.truth_label
                .map(|l| (f.id.as_str(), l))
                .ok_or_else(|| Error::MissingLabel(f.id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let pred_pairs: Vec<(&str, DamageClass)> =
        assessments.iter().map(|a| (a.building_id.as_str(), a.predicted)).collect();
    let all = confusion(&truth_pairs, &pred_pairs)?;

    let (matrix, split_id) = match (manifest, split) {
        (Some(m), Some(s)) => {
            let mut keep: HashMap<&str, bool> = HashMap::new();
            for f in truth {
                let ortho = f.property_str(ORTHOMOSAIC_PROPERTY).ok_or_else(|| {
                    Error::InvalidData(format!("footprint `{}` has no `{ORTHOMOSAIC_PROPERTY}` property", f.id))
                })?;
                keep.insert(f.id.as_str(), m.split_of(ortho) == Some(s));
            }
            let t: Vec<_> = truth_pairs.iter().copied().filter(|p| keep[p.0]).collect();
            let p: Vec<_> = pred_pairs.iter().copied().filter(|p| keep[p.0]).collect();
            (confusion(&t, &p)?, s.as_str().to_string())
        }
        (None, None) => (all, "all".to_string()),
        _ => {
            return Err(Error::InvalidArgument(
                "a split filter needs both a manifest and a split".into(),
            ))
        }
    };
    Ok(EvalReport::from_matrix(matrix, mode, split_id))
}
