use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footprints::{DamageClass, NUM_CLASSES};
use crate::scalar::Scalar;

/// Building counts, rows are truth and columns are predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn add(&mut self, truth: DamageClass, predicted: DamageClass) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }
}

fn list_ids(ids: &[&str]) -> String {
    const SHOWN: usize = 10;
    let mut s = ids.iter().take(SHOWN).map(|i| format!("`{i}`")).collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(" and {} more", ids.len() - SHOWN));
    }
    s
}

/// Builds the confusion matrix from `(id, label)` pairs matched by id.
/// Any id present on only one side, or repeated, is a pairing error.
pub fn confusion(truth: &[(&str, DamageClass)], predicted: &[(&str, DamageClass)]) -> Result<ConfusionMatrix> {
    use std::collections::BTreeMap;
    let mut pred: BTreeMap<&str, DamageClass> = BTreeMap::new();
    let mut dup: Vec<&str> = Vec::new();
    for &(id, c) in predicted {
        if pred.insert(id, c).is_some() {
            dup.push(id);
        }
    }
    let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
    let mut missing_pred = Vec::new();
    for &(id, _) in truth {
        if seen.insert(id, ()).is_some() {
            dup.push(id);
        }
        if !pred.contains_key(id) {
            missing_pred.push(id);
        }
    }
    let missing_truth: Vec<&str> = predicted
        .iter()
        .map(|p| p.0)
        .filter(|id| !seen.contains_key(id))
        .collect();
    let mut problems = Vec::new();
    if !missing_pred.is_empty() {
        problems.push(format!("no prediction for {}", list_ids(&missing_pred)));
    }
    if !missing_truth.is_empty() {
        problems.push(format!("no truth for {}", list_ids(&missing_truth)));
    }
    if !dup.is_empty() {
        problems.push(format!("duplicate ids {}", list_ids(&dup)));
    }
    if !problems.is_empty() {
        return Err(Error::Pairing(problems.join("; ")));
    }
    let mut m = ConfusionMatrix::default();
    for &(id, t) in truth {
        m.add(t, pred[id]);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics<T = f64> {
    pub class: DamageClass,
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub support: u64,
}

fn ratio<T: Scalar>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::from_u64(num).unwrap_or_else(T::nan) / T::from_u64(den).unwrap_or_else(T::nan)
    }
}

/// Precision, recall and F1 per class; every 0/0 is taken as 0.
pub fn class_metrics<T: Scalar>(m: &ConfusionMatrix) -> [ClassMetrics<T>; NUM_CLASSES] {
    std::array::from_fn(|k| {
        let tp = m.counts[k][k];
        let precision: T = ratio(tp, m.col_sum(k));
        let recall: T = ratio(tp, m.row_sum(k));
        let denom = precision + recall;
        let f1 = if denom == T::zero() {
            T::zero()
        } else {
            T::lit(2.0) * precision * recall / denom
        };
        ClassMetrics {
            class: DamageClass::ALL[k],
            precision,
            recall,
            f1,
            support: m.row_sum(k),
        }
    })
}

/// Mean F1 over all five classes, absent classes included.
pub fn macro_f1<T: Scalar>(m: &ConfusionMatrix) -> T {
    let per = class_metrics::<T>(m);
    per.iter().fold(T::zero(), |acc, c| acc + c.f1) / T::from_usize_lossy(NUM_CLASSES)
}
