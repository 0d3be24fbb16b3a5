use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assessment::RunStats;
use crate::error::Warning;

pub trait Clock {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always reports the same instant.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

pub fn rfc3339(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub started_at: String,
    pub finished_at: String,
    pub wall_seconds: f64,
    pub input_bytes: u64,
    pub tile_count: usize,
    pub building_count: usize,
    pub backend_name: String,
    pub gsd_m_per_px: f64,
    pub peak_pixel_bytes: u64,
    pub warnings: Vec<Warning>,
    pub config: Value,
}

impl RunReport {
    pub fn new(
        run_id: impl Into<String>,
        started: DateTime<Utc>,
        finished: DateTime<Utc>,
        stats: &RunStats,
        gsd_m_per_px: f64,
        config: Value,
    ) -> Self {
        RunReport {
            run_id: run_id.into(),
            started_at: rfc3339(started),
            finished_at: rfc3339(finished.max(started)),
            wall_seconds: stats.wall_seconds,
            input_bytes: stats.input_bytes,
            tile_count: stats.tile_count,
            building_count: stats.building_count,
            backend_name: stats.backend_name.clone(),
            gsd_m_per_px,
            peak_pixel_bytes: stats.peak_pixel_bytes,
            warnings: stats.warnings.clone(),
            config,
        }
    }
}
