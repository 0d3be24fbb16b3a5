use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}` (train|val|test)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub disaster_id: String,
    pub split: Split,
}

/// Assignment of orthomosaics to splits, keyed by orthomosaic id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitManifest {
    pub entries: BTreeMap<String, ManifestEntry>,
}

impl SplitManifest {
    pub fn insert(&mut self, orthomosaic_id: impl Into<String>, disaster_id: impl Into<String>, split: Split) {
        self.entries.insert(
            orthomosaic_id.into(),
            ManifestEntry {
                disaster_id: disaster_id.into(),
                split,
            },
        );
    }

    pub fn split_of(&self, orthomosaic_id: &str) -> Option<Split> {
        self.entries.get(orthomosaic_id).map(|e| e.split)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: Split,
    pub orthomosaics: usize,
    pub disasters: usize,
}

/// Per-split orthomosaic and disaster counts. Fails if any disaster has
/// orthomosaics in more than one split.
pub fn summarize_manifest(m: &SplitManifest) -> Result<Vec<SplitSummary>> {
    let mut disaster_splits: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
    for e in m.entries.values() {
        disaster_splits.entry(&e.disaster_id).or_default().insert(e.split);
    }
    let leaking: Vec<String> = disaster_splits
        .iter()
        .filter(|(_, s)| s.len() > 1)
        .map(|(d, s)| {
            let names: Vec<&str> = s.iter().map(|x| x.as_str()).collect();
            format!("disaster `{d}` appears in {}", names.join(" and "))
        })
        .collect();
    if !leaking.is_empty() {
        return Err(Error::ManifestInvariant(leaking.join("; ")));
    }
    Ok(Split::ALL
        .iter()
        .map(|&split| SplitSummary {
            split,
            orthomosaics: m.entries.values().filter(|e| e.split == split).count(),
            disasters: disaster_splits.values().filter(|s| s.contains(&split)).count(),
        })
        .collect())
}
