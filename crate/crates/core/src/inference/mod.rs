//! Segmentation backends and the score-plane exchange format.

mod backends;
pub mod score_plane;

pub use backends::{
    constant_backend, replay_oracle_backend, uniform_random_backend, ConstantBackend,
    ReplayOracleBackend, ScoreDirBackend, SegmentationBackend, UniformRandomBackend,
};
pub use score_plane::{
    decode_score_plane, read_score_plane, score_plane_filename, score_plane_path,
    write_score_plane, ScorePlaneTile,
};
