use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

pub const NUM_CLASSES: usize = 5;

/// Joint Damage Scale building label.
///
/// The first four values are ordered by severity; `UnClassified` sits
/// outside that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum DamageClass {
    NoDamage = 0,
    MinorDamage = 1,
    MajorDamage = 2,
    Destroyed = 3,
    UnClassified = 4,
}

impl DamageClass {
    pub const ALL: [DamageClass; NUM_CLASSES] = [
        DamageClass::NoDamage,
        DamageClass::MinorDamage,
        DamageClass::MajorDamage,
        DamageClass::Destroyed,
        DamageClass::UnClassified,
    ];

    /// Classes from most to least preferred when scores tie.
    pub const TIE_PRIORITY: [DamageClass; NUM_CLASSES] = [
        DamageClass::Destroyed,
        DamageClass::MajorDamage,
        DamageClass::MinorDamage,
        DamageClass::NoDamage,
        DamageClass::UnClassified,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Product string, e.g. `"minor-damage"`.
    pub fn as_str(self) -> &'static str {
        match self {
            DamageClass::NoDamage => "no-damage",
            DamageClass::MinorDamage => "minor-damage",
            DamageClass::MajorDamage => "major-damage",
            DamageClass::Destroyed => "destroyed",
            DamageClass::UnClassified => "un-classified",
        }
    }

    /// Column-name form, e.g. `"minor_damage"`.
    pub fn snake_name(self) -> &'static str {
        match self {
            DamageClass::NoDamage => "no_damage",
            DamageClass::MinorDamage => "minor_damage",
            DamageClass::MajorDamage => "major_damage",
            DamageClass::Destroyed => "destroyed",
            DamageClass::UnClassified => "un_classified",
        }
    }

    /// Severity rank: higher is more severe, `UnClassified` ranks lowest.
    pub fn severity_rank(self) -> u8 {
        match self {
            DamageClass::UnClassified => 0,
            DamageClass::NoDamage => 1,
            DamageClass::MinorDamage => 2,
            DamageClass::MajorDamage => 3,
            DamageClass::Destroyed => 4,
        }
    }
}

impl fmt::Display for DamageClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DamageClass {
    type Err = Error;

    /// Accepts the hyphenated product strings and their snake_case forms.
    fn from_str(s: &str) -> Result<Self, Error> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        DamageClass::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| Error::InvalidData(format!("unknown damage class `{s}`")))
    }
}

impl Serialize for DamageClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DamageClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
