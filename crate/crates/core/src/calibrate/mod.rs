//! Court calibration: line-pair correspondences against the near-half
//! template, homography estimation, plausibility pruning, and the per-frame
//! detection pipeline.

mod candidates;
mod detect;
mod homography;

use serde::Serialize;
use thiserror::Error;

pub use candidates::{candidate_count, enumerate_candidates, is_plausible};
pub use detect::{
    detect_frame, extend_to_full_court, mix_seed, DetectionJson, FrameTrace, KeypointJson, Pipeline, PipelineError,
    ProjectedSegment,
};
pub use homography::{dlt_homography, project, Correspondence, HomographyMatrix, Provenance, W_EPSILON};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CalibrateError {
    #[error("need at least 4 correspondences, got {0}")]
    NotEnoughPoints(usize),
    #[error("{model} model points but {image} image points")]
    MismatchedLengths { model: usize, image: usize },
    #[error("degenerate point configuration")]
    DegenerateConfiguration,
    #[error("need at least 2 horizontal and 2 vertical lines, have {horizontal} and {vertical}")]
    InsufficientLines { horizontal: usize, vertical: usize },
}

/// A scored court hypothesis for one frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateDetection {
    /// Model to source-frame pixels.
    pub homography: HomographyMatrix<f64>,
    pub score: u64,
    pub frame_id: String,
    /// Whether a near-side crop translation was composed into `homography`.
    pub crop_origin_applied: bool,
    /// Position in the frame's candidate enumeration.
    pub candidate_index: usize,
    pub provenance: Option<Provenance>,
}
