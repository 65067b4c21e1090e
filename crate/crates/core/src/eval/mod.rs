//! Scoring detections against ground truth, benchmark reports, and the
//! synthetic scene generator used as test oracle.

mod synth;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use synth::{
    generate_scene, generate_scene_with, GenConfig, PoseRanges, SceneParams, Surface, SyntheticScene, MAX_POSE_DRAWS,
};

use crate::calibrate::{
    dlt_homography, is_plausible, CalibrateError, Correspondence, HomographyMatrix, Pipeline, PipelineError,
};
use crate::config::{EvalConfig, PlausibilityConfig};
use crate::court_model::{CourtDimensions, CourtModelError, CourtTemplate};
use crate::preprocess::{FrameInput, PreprocessError};
use crate::scalar::Point2;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ground-truth score is zero")]
    InvalidGroundTruth,
    #[error("frame {0}: no ground truth")]
    MissingGroundTruth(String),
    #[error("frame {frame}: unknown keypoint `{name}`")]
    UnknownKeypoint { frame: String, name: String },
    #[error("frame {0}: ground-truth homography is implausible")]
    ImplausibleGroundTruth(String),
    #[error("no frames to evaluate")]
    EmptyFrameSet,
    #[error("no plausible camera pose after {0} draws")]
    PoseRejectionExhausted(usize),
    #[error("invalid generator config: {0}")]
    InvalidGenConfig(String),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    CourtModel(#[from] CourtModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// `|detected - gt| <= fraction * gt`.
pub fn is_correct(detected: u64, gt: u64, tolerance_fraction: f64) -> Result<bool, EvalError> {
    if gt == 0 {
        return Err(EvalError::InvalidGroundTruth);
    }
    Ok((detected as f64 - gt as f64).abs() <= tolerance_fraction * gt as f64)
}

/// One-sided form: only a shortfall beyond the tolerance counts as wrong.
pub fn is_correct_at_least(detected: u64, gt: u64, tolerance_fraction: f64) -> Result<bool, EvalError> {
    if gt == 0 {
        return Err(EvalError::InvalidGroundTruth);
    }
    Ok(detected as f64 >= (1.0 - tolerance_fraction) * gt as f64)
}

fn judge(detected: u64, gt: u64, cfg: &EvalConfig) -> Result<bool, EvalError> {
    if cfg.two_sided {
        is_correct(detected, gt, cfg.tolerance_fraction)
    } else {
        is_correct_at_least(detected, gt, cfg.tolerance_fraction)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct KeypointRecord {
    name: String,
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthFile {
    keypoints: Vec<KeypointRecord>,
}

/// Annotated template keypoints for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub frame_id: String,
    pub keypoints: Vec<(String, Point2<f64>)>,
}

impl GroundTruth {
    pub fn path(dir: &Path, frame_id: &str) -> PathBuf {
        dir.join(format!("{frame_id}.gt.json"))
    }

    pub fn from_json(frame_id: impl Into<String>, text: &str) -> Result<Self, EvalError> {
        let file: GroundTruthFile = serde_json::from_str(text)?;
        Ok(Self {
            frame_id: frame_id.into(),
            keypoints: file
                .keypoints
                .into_iter()
                .map(|k| (k.name, Point2::new(k.x, k.y)))
                .collect(),
        })
    }

    pub fn load(dir: &Path, frame_id: &str) -> Result<Self, EvalError> {
        let path = Self::path(dir, frame_id);
        if !path.exists() {
            return Err(EvalError::MissingGroundTruth(frame_id.to_string()));
        }
        Self::from_json(frame_id, &std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = GroundTruthFile {
            keypoints: self
                .keypoints
                .iter()
                .map(|(name, p)| KeypointRecord {
                    name: name.clone(),
                    x: p.x,
                    y: p.y,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("ground truth serializes")
    }

    /// Least-squares homography through all annotated keypoints.
    pub fn homography(
        &self,
        template: &CourtTemplate<f64>,
        frame_dims: (u32, u32),
        court: &CourtDimensions<f64>,
        plausibility: &PlausibilityConfig,
    ) -> Result<HomographyMatrix<f64>, EvalError> {
        let mut model = Vec::with_capacity(self.keypoints.len());
        let mut image = Vec::with_capacity(self.keypoints.len());
        for (name, p) in &self.keypoints {
            let k = template.keypoint(name).ok_or_else(|| EvalError::UnknownKeypoint {
                frame: self.frame_id.clone(),
                name: name.clone(),
            })?;
            model.push(k.point);
            image.push(*p);
        }
        let h = dlt_homography(&Correspondence::new(model, image))?;
        if !is_plausible(&h, frame_dims, court, plausibility) {
            return Err(EvalError::ImplausibleGroundTruth(self.frame_id.clone()));
        }
        Ok(h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodOutcome {
    /// `None` when the method produced no detection.
    pub detected_score: Option<u64>,
    pub gt_score: u64,
    pub correct: bool,
    pub homography: Option<HomographyMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    pub frame_id: String,
    pub new: MethodOutcome,
    pub baseline: Option<MethodOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalResult {
    pub records: Vec<EvalRecord>,
    pub accuracy: f64,
    pub baseline_accuracy: Option<f64>,
}

fn accuracy(correct: impl Iterator<Item = bool>) -> f64 {
    let (mut n, mut k) = (0usize, 0usize);
    for c in correct {
        n += 1;
        k += c as usize;
    }
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

impl EvalResult {
    pub fn from_records(records: Vec<EvalRecord>) -> Self {
        let acc = accuracy(records.iter().map(|r| r.new.correct));
        let baseline_accuracy = records
            .iter()
            .all(|r| r.baseline.is_some())
            .then(|| accuracy(records.iter().filter_map(|r| r.baseline.as_ref().map(|b| b.correct))))
            .filter(|_| !records.is_empty());
        Self {
            records,
            accuracy: acc,
            baseline_accuracy,
        }
    }

    /// One report row: `Court <id> | <frames> | <baseline> | <new>`.
    pub fn report_row(&self, court_id: &str) -> String {
        let pct = |a: f64| format!("{:.1}%", 100.0 * a);
        format!(
            "Court {court_id} | {} | {} | {}",
            self.records.len(),
            self.baseline_accuracy.map(pct).unwrap_or_else(|| "-".into()),
            pct(self.accuracy)
        )
    }

    pub fn report(&self, court_id: &str) -> String {
        let mut s = String::from("Court | Frames | Baseline | New\n");
        let _ = writeln!(s, "{}", self.report_row(court_id));
        s
    }
}

fn run_method(
    pipeline: &Pipeline<'_>,
    input: &FrameInput,
    index: u64,
    h_gt: &HomographyMatrix<f64>,
) -> Result<MethodOutcome, EvalError> {
    let gt_score = pipeline.score_homography(input, h_gt)?;
    if gt_score == 0 {
        return Err(EvalError::InvalidGroundTruth);
    }
    let det = pipeline.detect_frame(input, index)?;
    let correct = match &det {
        Some(d) => judge(d.score, gt_score, &pipeline.config().eval)?,
        None => false,
    };
    Ok(MethodOutcome {
        detected_score: det.as_ref().map(|d| d.score),
        gt_score,
        correct,
        homography: det.map(|d| d.homography),
    })
}

/// Runs detection on every frame and judges it against the ground truth
/// score. With `baseline`, the threshold pipeline runs on the same frames.
pub fn evaluate(
    pipeline: &Pipeline<'_>,
    baseline: Option<&Pipeline<'_>>,
    frames: &[FrameInput],
    ground_truths: &[GroundTruth],
) -> Result<EvalResult, EvalError> {
    if frames.is_empty() {
        return Err(EvalError::EmptyFrameSet);
    }
    let cfg = pipeline.config();
    let records: Vec<Result<EvalRecord, EvalError>> = frames
        .par_iter()
        .enumerate()
        .map(|(i, input)| {
            let id = &input.frame.frame_id;
            let gt = ground_truths
                .iter()
                .find(|g| &g.frame_id == id)
                .ok_or_else(|| EvalError::MissingGroundTruth(id.clone()))?;
            let h_gt = gt.homography(
                pipeline.template(),
                input.frame.dimensions(),
                &cfg.court,
                &cfg.calibrate.plausibility,
            )?;
            let new = run_method(pipeline, input, i as u64, &h_gt)?;
            let base = baseline.map(|b| run_method(b, input, i as u64, &h_gt)).transpose()?;
            Ok(EvalRecord {
                frame_id: id.clone(),
                new,
                baseline: base,
            })
        })
        .collect();
    Ok(EvalResult::from_records(records.into_iter().collect::<Result<_, _>>()?))
}
