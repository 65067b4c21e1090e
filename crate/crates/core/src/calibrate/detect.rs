use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{dlt_homography, enumerate_candidates, is_plausible, CalibrateError, CandidateDetection, HomographyMatrix};
use crate::config::{ConfigError, FilterMethod, NoNetPolicy, PipelineConfig, ScoreReference};
use crate::court_model::{near_half_with, standard_template, CourtModelError, CourtTemplate, NearHalf, SegmentId};
use crate::filtering::{
    court_color_filter, sample_dominant_color, threshold_filter, BinaryMask, CourtColor, FilterError,
};
use crate::line_detect::{
    classify_lines, default_vote_threshold, hough_lines, merge_lines, refine_line, supporting_pixels, LineSet,
    PolarLine,
};
use crate::preprocess::{
    apply_shadow_removal, crop_near_side, detect_net, net_line_from_bbox, Adapters, Frame, FrameInput, NetBBox,
    NetLine, PreprocessError, ShadowRemoval, ShadowSource,
};
use crate::scalar::Point2;
use crate::scoring::{project_segment, ScoreContext};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    CourtModel(#[from] CourtModelError),
    #[error("frame {0}: no net detected and the no-net policy is `fail`")]
    NoNet(String),
    #[error("no frames to process")]
    NoFrames,
    #[error("no sampled frame produced a detection")]
    NoDetection,
    #[error("frame source: {0}")]
    Source(String),
}

/// Merge-then-refit rounds after the first, until the line count settles.
const MAX_MERGE_ROUNDS: usize = 3;

/// Stable per-frame seed derivation (splitmix64 of `seed ^ index`).
pub fn mix_seed(seed: u64, frame_index: u64) -> u64 {
    let mut z = (seed ^ frame_index).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Intermediate products of one frame's detection, kept for debugging.
#[derive(Clone, Debug)]
pub struct FrameTrace {
    pub shadow: ShadowRemoval,
    pub net_bbox: Option<NetBBox>,
    pub net_line: Option<NetLine>,
    /// The frame filtering ran on: the near-side crop, or the whole frame.
    pub working: Frame,
    pub court_color: Option<CourtColor>,
    pub mask: BinaryMask,
    /// Lines in working-frame coordinates.
    pub lines: LineSet<f64>,
    pub enumerated: usize,
    pub plausible: usize,
    pub scored: usize,
    pub detection: Option<CandidateDetection>,
    /// Winning homography before the crop translation.
    pub working_homography: Option<HomographyMatrix<f64>>,
    pub diagnostic: Option<String>,
}

/// Detection pipeline bound to one configuration and set of adapters.
pub struct Pipeline<'a> {
    config: PipelineConfig,
    template: CourtTemplate<f64>,
    near: NearHalf<f64>,
    adapters: Adapters<'a>,
}

impl<'a> Pipeline<'a> {
    pub fn new(config: PipelineConfig, adapters: Adapters<'a>) -> Result<Self, PipelineError> {
        config.validate()?;
        let template = standard_template(config.court)?;
        let near = near_half_with(&template, config.calibrate.include_net_line);
        Ok(Self {
            config,
            template,
            near,
            adapters,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn template(&self) -> &CourtTemplate<f64> {
        &self.template
    }

    /// Best detection for the frame, or `None` when no plausible candidate
    /// exists. `frame_index` feeds the per-frame seed.
    pub fn detect_frame(
        &self,
        input: &FrameInput,
        frame_index: u64,
    ) -> Result<Option<CandidateDetection>, PipelineError> {
        let trace = self.trace_frame(input, frame_index)?;
        if let Some(msg) = &trace.diagnostic {
            log::info!("frame {}: {msg}", input.frame.frame_id);
        }
        Ok(trace.detection)
    }

    fn shadow_stage(&self, input: &FrameInput) -> Result<ShadowRemoval, PipelineError> {
        if !self.config.preprocess.shadow_removal {
            return Ok(ShadowRemoval {
                frame: input.frame.clone(),
                source: ShadowSource::Identity,
            });
        }
        match apply_shadow_removal(&input.frame, &input.artifacts, self.adapters.shadow) {
            Ok(r) => Ok(r),
            Err(PreprocessError::AdapterFailure(msg)) if self.config.preprocess.adapters.fallback_on_failure => {
                log::warn!(
                    "frame {}: shadow adapter failed ({msg}); using input frame",
                    input.frame.frame_id
                );
                Ok(ShadowRemoval {
                    frame: input.frame.clone(),
                    source: ShadowSource::Identity,
                })
            }
            Err(e) => Err(e.into()),
        }
    }

    fn net_stage(&self, input: &FrameInput, frame: &Frame) -> Result<Option<NetBBox>, PipelineError> {
        let pre = &self.config.preprocess;
        match detect_net(frame, input.net_bbox, self.adapters.net, pre.net_confidence) {
            Ok(b) => Ok(b),
            Err(PreprocessError::AdapterFailure(msg)) if pre.adapters.fallback_on_failure => {
                log::warn!("frame {}: net adapter failed ({msg})", frame.frame_id);
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn trace_frame(&self, input: &FrameInput, frame_index: u64) -> Result<FrameTrace, PipelineError> {
        let cfg = &self.config;
        let seed = mix_seed(cfg.seed, frame_index);
        let shadow = self.shadow_stage(input)?;
        let source = &shadow.frame;

        let mut net_bbox = None;
        let mut net_line = None;
        let mut working = source.clone();
        if cfg.preprocess.net_crop {
            net_bbox = self.net_stage(input, source)?;
            match net_bbox {
                Some(bbox) => {
                    let line = net_line_from_bbox(source, &bbox);
                    match crop_near_side(source, &line, cfg.preprocess.crop_margin) {
                        Ok(c) => working = c,
                        Err(PreprocessError::EmptyCrop { height }) => {
                            log::warn!(
                                "frame {}: near-side crop too small ({height} rows); using full frame",
                                source.frame_id
                            );
                        }
                        Err(e) => return Err(e.into()),
                    }
                    net_line = Some(line);
                }
                None if cfg.preprocess.no_net == NoNetPolicy::Fail => {
                    return Err(PipelineError::NoNet(source.frame_id.clone()));
                }
                None => {}
            }
        }

        let mut trace = FrameTrace {
            shadow: shadow.clone(),
            net_bbox,
            net_line,
            working: working.clone(),
            court_color: None,
            mask: BinaryMask::new(working.width(), working.height()),
            lines: LineSet::default(),
            enumerated: 0,
            plausible: 0,
            scored: 0,
            detection: None,
            working_homography: None,
            diagnostic: None,
        };

        let f = &cfg.filter;
        trace.mask = match f.method {
            FilterMethod::CourtColor => {
                let court =
                    match sample_dominant_color(working.image(), f.n_samples, seed, f.bin_width, f.color_tolerance) {
                        Ok(c) => c,
                        Err(FilterError::AllMasked { .. }) => {
                            trace.diagnostic = Some("frame is entirely masked".into());
                            return Ok(trace);
                        }
                        Err(e) => return Err(e.into()),
                    };
                trace.court_color = Some(court);
                court_color_filter(working.image(), &court, &f.window_rule())
            }
            FilterMethod::Threshold => threshold_filter(working.image(), f.baseline_threshold),
        };

        trace.lines = self.detect_lines(&trace.mask);

        let enumerated = enumerate_candidates(&trace.lines, &self.near).map(|c| c.collect::<Vec<_>>());
        let candidates = match enumerated {
            Ok(c) => c,
            Err(CalibrateError::InsufficientLines { horizontal, vertical }) => {
                trace.diagnostic = Some(format!(
                    "insufficient lines: {horizontal} horizontal, {vertical} vertical"
                ));
                return Ok(trace);
            }
            Err(e) => return Err(e.into()),
        };
        trace.enumerated = candidates.len();

        let (ox, oy) = working.crop_origin;
        let (sx, sy) = source.crop_origin;
        let (dx, dy) = ((ox - sx) as f64, (oy - sy) as f64);
        let cropped = dx != 0.0 || dy != 0.0;
        let dims = source.dimensions();
        let plaus = &cfg.calibrate.plausibility;

        let mut plausible: Vec<(usize, HomographyMatrix<f64>, HomographyMatrix<f64>)> = candidates
            .par_iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let local = dlt_homography(c).ok()?;
                let full = if cropped { local.translated(dx, dy) } else { local };
                is_plausible(&full, dims, &cfg.court, plaus).then_some((i, local, full))
            })
            .collect();
        trace.plausible = plausible.len();
        let cap = cfg.calibrate.max_candidates;
        if plausible.len() > cap {
            // Keep the candidates built from the best-supported lines.
            let lines = &trace.lines;
            let support = |i: usize| -> u64 {
                candidates[i].provenance.map_or(0, |p| {
                    let (a, b) = p.detected_horizontal;
                    let (c, d) = p.detected_vertical;
                    [
                        &lines.horizontal[a],
                        &lines.horizontal[b],
                        &lines.vertical[c],
                        &lines.vertical[d],
                    ]
                    .iter()
                    .map(|l| l.votes as u64)
                    .sum()
                })
            };
            plausible.sort_by_key(|(i, _, _)| (std::cmp::Reverse(support(*i)), *i));
            plausible.truncate(cap);
            plausible.sort_by_key(|(i, _, _)| *i);
        }
        trace.scored = plausible.len();

        let reference = match cfg.scoring.reference {
            ScoreReference::ShadowRemoved => source.image(),
            ScoreReference::Raw => input.frame.image(),
        };
        let ctx = ScoreContext::new(
            &self.template,
            reference,
            cfg.scoring.stroke_width,
            cfg.scoring.white_threshold,
        );
        let best = plausible
            .par_iter()
            .map_init(
                || ctx.scratch(),
                |scratch, (i, _, full)| (ctx.score(full, scratch).0, *i),
            )
            .reduce_with(|a, b| {
                // higher score, then earlier candidate
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            });

        match best {
            Some((score, index)) => {
                let (_, local, full) = plausible
                    .iter()
                    .find(|(i, _, _)| *i == index)
                    .expect("winner comes from the scored list");
                trace.working_homography = Some(*local);
                trace.detection = Some(CandidateDetection {
                    homography: *full,
                    score,
                    frame_id: input.frame.frame_id.clone(),
                    crop_origin_applied: cropped,
                    candidate_index: index,
                    provenance: candidates[index].provenance,
                });
            }
            None => trace.diagnostic = Some("no plausible candidates".into()),
        }
        Ok(trace)
    }

    /// Score of `h` (source-frame coordinates) against the frame's scoring
    /// reference, as detection would compute it.
    pub fn score_homography(&self, input: &FrameInput, h: &HomographyMatrix<f64>) -> Result<u64, PipelineError> {
        let cfg = &self.config;
        let shadow;
        let reference = match cfg.scoring.reference {
            ScoreReference::ShadowRemoved => {
                shadow = self.shadow_stage(input)?;
                shadow.frame.image()
            }
            ScoreReference::Raw => input.frame.image(),
        };
        let ctx = ScoreContext::new(
            &self.template,
            reference,
            cfg.scoring.stroke_width,
            cfg.scoring.white_threshold,
        );
        Ok(ctx.score(h, &mut ctx.scratch()).0)
    }

    /// Hough peaks, optionally refined, merged (and refit), then classified
    /// and capped.
    pub fn detect_lines(&self, mask: &BinaryMask) -> LineSet<f64> {
        let l = &self.config.lines;
        let peaks = hough_lines(mask, &l.hough_params());
        let mp = l.merge_params();
        let merged;
        if !l.refine {
            merged = merge_lines(&peaks, mp.d_rho, mp.d_theta);
        } else {
            let refine_all = |lines: &[PolarLine<f64>]| -> Vec<PolarLine<f64>> {
                lines
                    .par_iter()
                    .map(|line| {
                        let mut cur = *line;
                        for _ in 0..l.refine_iterations {
                            let next = refine_line(mask, &cur, l.refine_band);
                            let settled = (next.rho - cur.rho).abs() < 1e-3 && (next.theta - cur.theta).abs() < 1e-6;
                            cur = next;
                            if settled {
                                break;
                            }
                        }
                        cur
                    })
                    .collect()
            };
            // Refining peaks before merging keeps nearby distinct lines from
            // collapsing into one cluster; merged means are then refit.
            let refined = refine_all(&peaks);
            let threshold = l
                .vote_threshold
                .unwrap_or_else(|| default_vote_threshold(mask.width(), mask.height()));
            let half = l.refine_band / 2.0;
            // A refit can settle on a row of crossing blobs rather than a
            // stroke; re-count support on the fitted line and drop such fits.
            let mut lines = refine_all(&merge_lines(&refined, mp.d_rho, mp.d_theta));
            for _ in 0..MAX_MERGE_ROUNDS {
                let next = refine_all(&merge_lines(&lines, mp.d_rho, mp.d_theta));
                let stable = next.len() == lines.len();
                lines = next;
                if stable {
                    break;
                }
            }
            merged = lines
                .into_iter()
                .filter_map(|line| {
                    let support = supporting_pixels(mask, &line, half).count() as u32;
                    (support >= threshold).then_some(PolarLine { votes: support, ..line })
                })
                .collect();
        }
        classify_lines(&merged, mask.width(), mask.height(), l.max_horizontal, l.max_vertical)
    }
}

/// One-shot form of [`Pipeline::detect_frame`] without adapters.
pub fn detect_frame(input: &FrameInput, config: &PipelineConfig) -> Result<Option<CandidateDetection>, PipelineError> {
    Pipeline::new(config.clone(), Adapters::default())?.detect_frame(input, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectedSegment {
    pub id: SegmentId,
    /// Image endpoints after clipping at the camera plane; `None` when the
    /// whole segment is behind the camera.
    pub endpoints: Option<(Point2<f64>, Point2<f64>)>,
}

/// All template segments projected through the detection's source-frame
/// homography.
pub fn extend_to_full_court(detection: &CandidateDetection, template: &CourtTemplate<f64>) -> Vec<ProjectedSegment> {
    template
        .segments
        .iter()
        .map(|s| ProjectedSegment {
            id: s.id,
            endpoints: project_segment(&detection.homography, &s.p0, &s.p1),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointJson {
    pub name: String,
    pub x: Option<f64>,
    pub y: Option<f64>,
}

/// On-disk detection record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionJson {
    pub frame_id: String,
    /// Row-major, model meters to source-frame pixels.
    pub homography: [f64; 9],
    pub score: u64,
    pub keypoints: Vec<KeypointJson>,
}

impl DetectionJson {
    pub fn new(detection: &CandidateDetection, template: &CourtTemplate<f64>) -> Self {
        let keypoints = template
            .keypoints
            .iter()
            .map(|k| {
                let p = detection.homography.project(&k.point);
                KeypointJson {
                    name: k.name.clone(),
                    x: p.map(|p| p.x),
                    y: p.map(|p| p.y),
                }
            })
            .collect();
        Self {
            frame_id: detection.frame_id.clone(),
            homography: detection.homography.to_row_major(),
            score: detection.score,
            keypoints,
        }
    }
}
