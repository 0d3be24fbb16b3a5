//! Pixel-to-building consolidation, the tiled assessment run and the
//! class-balancing tile sampler.

mod consolidate;
mod pipeline;
mod sampler;

pub use consolidate::{argmax_severity, consolidate, AssessmentFlag, BuildingAssessment, ClassSums, ConsolidationMode};
pub use pipeline::{assess_run, default_workers, tiles_in_flight, AssessOptions, RunStats, DEFAULT_MAX_PIXEL_BYTES};
pub use sampler::{
    sampled_class_distribution, tile_class_counts, tile_weights, weighted_tile_sample, SampleDraw, SamplerSpec,
    TileClassCounts,
};
