//! Pipeline configuration. Every tunable lives here; JSON is the on-disk form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::court_model::CourtDimensions;
use crate::filtering::WindowRule;
use crate::line_detect::{HoughParams, MergeParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config value out of range: {0}")]
    OutOfRange(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMethod {
    /// Sampled court color plus the 7x7 neighbourhood rule.
    CourtColor,
    /// Luminance threshold baseline.
    Threshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub method: FilterMethod,
    pub n_samples: usize,
    pub bin_width: u8,
    pub color_tolerance: u8,
    pub window_size: u32,
    pub min_court_neighbors: u32,
    pub include_center: bool,
    pub baseline_threshold: u8,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            method: FilterMethod::CourtColor,
            n_samples: 1000,
            bin_width: 8,
            color_tolerance: 24,
            window_size: 7,
            min_court_neighbors: 4,
            include_center: false,
            baseline_threshold: 180,
        }
    }
}

impl FilterConfig {
    pub fn window_rule(&self) -> WindowRule {
        WindowRule {
            size: self.window_size,
            min_court: self.min_court_neighbors,
            include_center: self.include_center,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineConfig {
    pub rho_res: f64,
    pub theta_res_deg: f64,
    /// `null` selects `max(40, 0.15 * min(width, height))`.
    pub vote_threshold: Option<u32>,
    pub merge_rho: f64,
    pub merge_theta_deg: f64,
    pub max_horizontal: usize,
    pub max_vertical: usize,
    pub refine: bool,
    pub refine_band: f64,
    /// Refits per line; each one re-collects support around the previous fit.
    pub refine_iterations: u32,
}

impl Default for LineConfig {
    fn default() -> Self {
        Self {
            rho_res: 1.0,
            theta_res_deg: 1.0,
            vote_threshold: None,
            merge_rho: 12.0,
            merge_theta_deg: 5.0,
            max_horizontal: 8,
            max_vertical: 8,
            refine: true,
            refine_band: 3.0,
            refine_iterations: 10,
        }
    }
}

impl LineConfig {
    pub fn hough_params(&self) -> HoughParams {
        HoughParams {
            rho_res: self.rho_res,
            theta_res: self.theta_res_deg.to_radians(),
            vote_threshold: self.vote_threshold,
        }
    }

    pub fn merge_params(&self) -> MergeParams {
        MergeParams {
            d_rho: self.merge_rho,
            d_theta: self.merge_theta_deg.to_radians(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlausibilityConfig {
    /// Court corners must project inside the frame scaled by this factor
    /// about its center.
    pub frame_expansion: f64,
    /// Minimum projected court width at the net, as a fraction of frame width.
    pub min_net_width_fraction: f64,
}

impl Default for PlausibilityConfig {
    fn default() -> Self {
        Self {
            frame_expansion: 2.0,
            min_net_width_fraction: 0.10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    /// Use the net as a transverse model line.
    pub include_net_line: bool,
    /// Cap on plausible candidates scored per frame. When exceeded, the
    /// candidates whose four lines have the most support are kept.
    pub max_candidates: usize,
    pub plausibility: PlausibilityConfig,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            include_net_line: true,
            max_candidates: 5000,
            plausibility: PlausibilityConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreReference {
    ShadowRemoved,
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub stroke_width: u32,
    pub white_threshold: u8,
    pub reference: ScoreReference,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            stroke_width: 3,
            white_threshold: 200,
            reference: ScoreReference::ShadowRemoved,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoNetPolicy {
    /// Detect on the whole frame.
    FullFrame,
    Fail,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    /// Argument vectors with `{input}`, `{mask}`, `{output}` placeholders.
    pub shadow_mask_command: Option<Vec<String>>,
    pub shadow_removal_command: Option<Vec<String>>,
    pub net_command: Option<Vec<String>>,
    /// Continue with the unmodified frame when an adapter fails.
    pub fallback_on_failure: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub shadow_removal: bool,
    pub net_crop: bool,
    pub net_confidence: f64,
    pub crop_margin: u32,
    pub no_net: NoNetPolicy,
    pub adapters: AdapterConfig,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            shadow_removal: true,
            net_crop: true,
            net_confidence: 0.25,
            crop_margin: 5,
            no_net: NoNetPolicy::FullFrame,
            adapters: AdapterConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VideoConfig {
    pub n_frames: usize,
    /// Argument vector with `{input}` and `{output_dir}` placeholders; must
    /// write an image sequence into `{output_dir}`.
    pub decoder_command: Option<Vec<String>>,
}

impl Default for VideoConfig {
    fn default() -> Self {
        Self {
            n_frames: 10,
            decoder_command: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub tolerance_fraction: f64,
    /// Also accept detections scoring above ground truth by the tolerance.
    pub two_sided: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tolerance_fraction: 0.05,
            two_sided: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub court: CourtDimensions<f64>,
    pub preprocess: PreprocessConfig,
    pub filter: FilterConfig,
    pub lines: LineConfig,
    pub calibrate: CalibrateConfig,
    pub scoring: ScoringConfig,
    pub video: VideoConfig,
    pub eval: EvalConfig,
}

fn check(ok: bool, what: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange(what.to_string()))
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The threshold-filter pipeline: no shadow removal, no net crop.
    pub fn baseline(&self) -> Self {
        let mut cfg = self.clone();
        cfg.filter.method = FilterMethod::Threshold;
        cfg.preprocess.shadow_removal = false;
        cfg.preprocess.net_crop = false;
        cfg.scoring.reference = ScoreReference::Raw;
        cfg
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.court
            .validate()
            .map_err(|e| ConfigError::OutOfRange(e.to_string()))?;
        let f = &self.filter;
        check(f.n_samples >= 1, "filter.n_samples >= 1")?;
        check(f.bin_width >= 1, "filter.bin_width >= 1")?;
        check(
            f.window_size >= 1 && f.window_size % 2 == 1,
            "filter.window_size must be odd and >= 1",
        )?;
        check(
            f.min_court_neighbors <= f.window_size * f.window_size,
            "filter.min_court_neighbors <= window_size^2",
        )?;
        let l = &self.lines;
        check(l.rho_res > 0.0 && l.rho_res.is_finite(), "lines.rho_res > 0")?;
        check(
            l.theta_res_deg > 0.0 && l.theta_res_deg <= 90.0,
            "lines.theta_res_deg in (0, 90]",
        )?;
        check(l.merge_rho >= 0.0 && l.merge_theta_deg >= 0.0, "merge thresholds >= 0")?;
        check(l.max_horizontal >= 1 && l.max_vertical >= 1, "line caps >= 1")?;
        check(l.refine_band > 0.0, "lines.refine_band > 0")?;
        check(l.refine_iterations >= 1, "lines.refine_iterations >= 1")?;
        let c = &self.calibrate;
        check(c.max_candidates >= 1, "calibrate.max_candidates >= 1")?;
        check(
            c.plausibility.frame_expansion >= 1.0,
            "plausibility.frame_expansion >= 1",
        )?;
        check(
            (0.0..=1.0).contains(&c.plausibility.min_net_width_fraction),
            "plausibility.min_net_width_fraction in [0, 1]",
        )?;
        check(self.scoring.stroke_width >= 1, "scoring.stroke_width >= 1")?;
        check(
            (0.0..=1.0).contains(&self.preprocess.net_confidence),
            "preprocess.net_confidence in [0, 1]",
        )?;
        check(self.video.n_frames >= 1, "video.n_frames >= 1")?;
        check(
            self.eval.tolerance_fraction >= 0.0 && self.eval.tolerance_fraction.is_finite(),
            "eval.tolerance_fraction >= 0",
        )?;
        Ok(())
    }
}
