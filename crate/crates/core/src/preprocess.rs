//! Frame preparation ahead of filtering: shadow removal and net-based
//! near-side cropping.
//!
//! The learned models (shadow mask, shadow removal, net detector) are not part
//! of this crate. Their outputs reach the pipeline either as per-frame sidecar
//! files written offline, or through the adapter traits below.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filtering::luminance;
use crate::scalar::Point2;

pub const MIN_FRAME_SIDE: u32 = 32;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("frame must be at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}, got {width}x{height}")]
    FrameTooSmall { width: u32, height: u32 },
    #[error("malformed sidecar {path}: {reason}")]
    MalformedSidecar { path: PathBuf, reason: String },
    #[error("sidecar {path} is {got:?}, frame is {expected:?}")]
    DimensionMismatch {
        path: PathBuf,
        expected: (u32, u32),
        got: (u32, u32),
    },
    #[error("adapter failure: {0}")]
    AdapterFailure(String),
    #[error("net bounding box {0:?} lies outside the frame")]
    BBoxOutOfBounds(NetBBox),
    #[error("near-side crop keeps only {height} rows (minimum {MIN_FRAME_SIDE})")]
    EmptyCrop { height: u32 },
}

/// An RGB frame plus where it sits inside its source frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub frame_id: String,
    image: RgbImage,
    /// Pixel offset of this frame within its source frame.
    pub crop_origin: (u32, u32),
}

impl Frame {
    pub fn new(frame_id: impl Into<String>, image: RgbImage) -> Result<Self, PreprocessError> {
        let (width, height) = image.dimensions();
        if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
            return Err(PreprocessError::FrameTooSmall { width, height });
        }
        Ok(Self {
            frame_id: frame_id.into(),
            image,
            crop_origin: (0, 0),
        })
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    pub fn into_image(self) -> RgbImage {
        self.image
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.image.dimensions()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShadowArtifacts {
    /// 255 marks shadow.
    pub mask: Option<GrayImage>,
    pub shadow_free: Option<Frame>,
}

/// Axis-aligned net box, `[x0, x1) x [y0, y1)` in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetBBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    pub conf: f64,
}

impl NetBBox {
    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.x0 < self.x1 && self.x1 <= width && self.y0 < self.y1 && self.y1 <= height
    }
}

/// Segment approximating the net; `a` is the left endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NetLine {
    pub a: Point2<f64>,
    pub b: Point2<f64>,
}

impl NetLine {
    /// `y` of the extended line at column `x`.
    pub fn y_at(&self, x: f64) -> f64 {
        let dx = self.b.x - self.a.x;
        if dx.abs() < f64::EPSILON {
            return self.a.y.min(self.b.y);
        }
        self.a.y + (self.b.y - self.a.y) * (x - self.a.x) / dx
    }
}

pub fn shadow_mask_path(dir: &Path, frame_id: &str) -> PathBuf {
    dir.join(format!("{frame_id}.shadowmask.png"))
}

pub fn shadow_free_path(dir: &Path, frame_id: &str) -> PathBuf {
    dir.join(format!("{frame_id}.shadowfree.png"))
}

pub fn net_bbox_path(dir: &Path, frame_id: &str) -> PathBuf {
    dir.join(format!("{frame_id}.net.json"))
}

fn malformed(path: &Path, reason: impl ToString) -> PreprocessError {
    PreprocessError::MalformedSidecar {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Reads whichever sidecar files exist for `frame_id` in `dir`.
///
/// `frame_dims`, when given, is checked against the image sidecars and the
/// net box.
pub fn load_sidecar(
    frame_id: &str,
    dir: &Path,
    frame_dims: Option<(u32, u32)>,
) -> Result<(ShadowArtifacts, Option<NetBBox>), PreprocessError> {
    let check = |path: &Path, got: (u32, u32)| match frame_dims {
        Some(expected) if expected != got => Err(PreprocessError::DimensionMismatch {
            path: path.to_path_buf(),
            expected,
            got,
        }),
        _ => Ok(()),
    };

    let mut artifacts = ShadowArtifacts::default();

    let mask_path = shadow_mask_path(dir, frame_id);
    if mask_path.is_file() {
        let img = image::open(&mask_path).map_err(|e| malformed(&mask_path, e))?;
        let mask = img.into_luma8();
        check(&mask_path, mask.dimensions())?;
        artifacts.mask = Some(mask);
    }

    let free_path = shadow_free_path(dir, frame_id);
    if free_path.is_file() {
        let img = image::open(&free_path).map_err(|e| malformed(&free_path, e))?;
        let rgb = img.into_rgb8();
        check(&free_path, rgb.dimensions())?;
        let frame = Frame::new(frame_id, rgb).map_err(|e| malformed(&free_path, e))?;
        artifacts.shadow_free = Some(frame);
    }

    let net_path = net_bbox_path(dir, frame_id);
    let bbox = if net_path.is_file() {
        let text = fs::read_to_string(&net_path).map_err(|e| malformed(&net_path, e))?;
        let bbox: NetBBox = serde_json::from_str(&text).map_err(|e| malformed(&net_path, e))?;
        if bbox.x0 >= bbox.x1 || bbox.y0 >= bbox.y1 || !(0.0..=1.0).contains(&bbox.conf) {
            return Err(malformed(
                &net_path,
                "box must satisfy x0 < x1, y0 < y1, 0 <= conf <= 1",
            ));
        }
        if let Some((w, h)) = frame_dims {
            if !bbox.fits(w, h) {
                return Err(PreprocessError::DimensionMismatch {
                    path: net_path,
                    expected: (w, h),
                    got: (bbox.x1, bbox.y1),
                });
            }
        }
        Some(bbox)
    } else {
        None
    };

    Ok((artifacts, bbox))
}

/// Produces a shadow mask (255 = shadow) for a frame.
pub trait ShadowDetector: Send + Sync {
    fn shadow_mask(&self, frame: &Frame) -> Result<GrayImage, PreprocessError>;
}

/// Removes shadows given a frame and its shadow mask.
pub trait ShadowRemover: Send + Sync {
    fn remove_shadows(&self, frame: &Frame, mask: &GrayImage) -> Result<RgbImage, PreprocessError>;
}

/// Returns candidate net boxes with confidences.
pub trait NetDetector: Send + Sync {
    fn detect(&self, frame: &Frame) -> Result<Vec<NetBBox>, PreprocessError>;
}

#[derive(Clone, Copy, Default)]
pub struct ShadowAdapters<'a> {
    pub detector: Option<&'a dyn ShadowDetector>,
    pub remover: Option<&'a dyn ShadowRemover>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShadowSource {
    /// A shadow-free sidecar was supplied.
    Sidecar,
    /// The removal adapter ran.
    Adapter,
    /// Nothing to do; frame returned unchanged.
    Identity,
    /// A mask was available but nothing could consume it; frame unchanged.
    MaskOnly,
}

#[derive(Clone, Debug)]
pub struct ShadowRemoval {
    pub frame: Frame,
    pub source: ShadowSource,
}

pub fn apply_shadow_removal(
    frame: &Frame,
    artifacts: &ShadowArtifacts,
    adapters: ShadowAdapters<'_>,
) -> Result<ShadowRemoval, PreprocessError> {
    if let Some(free) = &artifacts.shadow_free {
        let mut out = free.clone();
        out.frame_id = frame.frame_id.clone();
        out.crop_origin = frame.crop_origin;
        return Ok(ShadowRemoval {
            frame: out,
            source: ShadowSource::Sidecar,
        });
    }
    if let Some(remover) = adapters.remover {
        let detected;
        let mask = match (&artifacts.mask, adapters.detector) {
            (Some(m), _) => Some(m),
            (None, Some(det)) => {
                detected = det.shadow_mask(frame)?;
                Some(&detected)
            }
            (None, None) => None,
        };
        if let Some(mask) = mask {
            if mask.dimensions() != frame.dimensions() {
                return Err(PreprocessError::AdapterFailure(format!(
                    "shadow mask is {:?}, frame is {:?}",
                    mask.dimensions(),
                    frame.dimensions()
                )));
            }
            let image = remover.remove_shadows(frame, mask)?;
            if image.dimensions() != frame.dimensions() {
                return Err(PreprocessError::AdapterFailure(
                    "shadow removal changed the frame size".into(),
                ));
            }
            let mut out = Frame::new(frame.frame_id.clone(), image)?;
            out.crop_origin = frame.crop_origin;
            return Ok(ShadowRemoval {
                frame: out,
                source: ShadowSource::Adapter,
            });
        }
        log::warn!(
            "frame {}: shadow remover configured but no mask source; skipping",
            frame.frame_id
        );
    }
    let source = if artifacts.mask.is_some() {
        log::warn!(
            "frame {}: shadow mask present but no removal step available; frame left unchanged",
            frame.frame_id
        );
        ShadowSource::MaskOnly
    } else {
        ShadowSource::Identity
    };
    Ok(ShadowRemoval {
        frame: frame.clone(),
        source,
    })
}

/// Sidecar box wins; otherwise the adapter's most confident box at or above
/// `conf_threshold`; otherwise `None`.
pub fn detect_net(
    frame: &Frame,
    sidecar: Option<NetBBox>,
    detector: Option<&dyn NetDetector>,
    conf_threshold: f64,
) -> Result<Option<NetBBox>, PreprocessError> {
    let (w, h) = frame.dimensions();
    if let Some(b) = sidecar {
        return if b.fits(w, h) {
            Ok(Some(b))
        } else {
            Err(PreprocessError::BBoxOutOfBounds(b))
        };
    }
    let Some(detector) = detector else {
        return Ok(None);
    };
    let boxes = detector.detect(frame)?;
    let best = boxes
        .into_iter()
        .filter(|b| b.conf >= conf_threshold && b.fits(w, h))
        .fold(None::<NetBBox>, |best, b| match best {
            Some(cur) if cur.conf >= b.conf => Some(cur),
            _ => Some(b),
        });
    Ok(best)
}

fn sobel_magnitude(gray: &[f64], w: usize, h: usize, x: usize, y: usize) -> f64 {
    let at = |dx: i64, dy: i64| {
        let xx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
        let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
        gray[yy * w + xx]
    };
    let gx = at(1, -1) + 2.0 * at(1, 0) + at(1, 1) - at(-1, -1) - 2.0 * at(-1, 0) - at(-1, 1);
    let gy = at(-1, 1) + 2.0 * at(0, 1) + at(1, 1) - at(-1, -1) - 2.0 * at(0, -1) - at(1, -1);
    gx.hypot(gy)
}

/// Radius of the neighbourhood searched for the strongest edge response
/// around each diagonal sample. A thin bright cord has zero gradient on its
/// own center line, so the response is taken from its flanks.
pub const EDGE_SEARCH_RADIUS: i64 = 2;

/// Mean, over the integer points of segment `a -> b`, of the strongest Sobel
/// magnitude within [`EDGE_SEARCH_RADIUS`] of each point.
pub fn mean_edge_strength(image: &RgbImage, a: (u32, u32), b: (u32, u32)) -> f64 {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let gray: Vec<f64> = image.pixels().map(|p| luminance(p.0) as f64).collect();
    let (dx, dy) = (b.0 as f64 - a.0 as f64, b.1 as f64 - a.1 as f64);
    let steps = dx.abs().max(dy.abs()).round() as usize;
    let mut total = 0.0;
    for i in 0..=steps {
        let t = if steps == 0 { 0.0 } else { i as f64 / steps as f64 };
        let px = (a.0 as f64 + t * dx).round() as i64;
        let py = (a.1 as f64 + t * dy).round() as i64;
        let mut best: f64 = 0.0;
        for oy in -EDGE_SEARCH_RADIUS..=EDGE_SEARCH_RADIUS {
            for ox in -EDGE_SEARCH_RADIUS..=EDGE_SEARCH_RADIUS {
                let (qx, qy) = (px + ox, py + oy);
                if qx < 0 || qy < 0 || qx >= w as i64 || qy >= h as i64 {
                    continue;
                }
                best = best.max(sobel_magnitude(&gray, w, h, qx as usize, qy as usize));
            }
        }
        total += best;
    }
    total / (steps + 1) as f64
}

/// Picks the bbox diagonal that follows the net.
///
/// The diagonal with the stronger mean edge response wins. Boxes at most
/// 2 px tall, and ties (including flat images), fall back to the horizontal
/// midline. Coordinates use the box's last inclusive pixel.
pub fn net_line_from_bbox(frame: &Frame, bbox: &NetBBox) -> NetLine {
    let (w, _) = frame.dimensions();
    let xr = (bbox.x1.saturating_sub(1)).max(bbox.x0 + 1).min(w - 1);
    let xl = bbox.x0.min(xr - 1);
    let yb = bbox.y1.saturating_sub(1).max(bbox.y0);
    let mid = (bbox.y0 as f64 + yb as f64) / 2.0;
    let midline = NetLine {
        a: Point2::new(xl as f64, mid),
        b: Point2::new(xr as f64, mid),
    };
    if bbox.y1 - bbox.y0 <= 2 {
        return midline;
    }
    let down = mean_edge_strength(frame.image(), (xl, bbox.y0), (xr, yb));
    let up = mean_edge_strength(frame.image(), (xl, yb), (xr, bbox.y0));
    let scale = down.max(up).max(1.0);
    if (down - up).abs() <= 1e-9 * scale {
        midline
    } else if down > up {
        NetLine {
            a: Point2::new(xl as f64, bbox.y0 as f64),
            b: Point2::new(xr as f64, yb as f64),
        }
    } else {
        NetLine {
            a: Point2::new(xl as f64, yb as f64),
            b: Point2::new(xr as f64, bbox.y0 as f64),
        }
    }
}

/// Keeps the rows from `margin` above the net line's highest point down to
/// the bottom of the frame, and blacks out every retained pixel lying more
/// than `margin` rows above the extended net line.
pub fn crop_near_side(frame: &Frame, net_line: &NetLine, margin: u32) -> Result<Frame, PreprocessError> {
    let (w, h) = frame.dimensions();
    let top_f = net_line.a.y.min(net_line.b.y).floor() - margin as f64;
    let top = top_f.clamp(0.0, h as f64) as u32;
    let kept = h - top;
    if kept < MIN_FRAME_SIDE {
        return Err(PreprocessError::EmptyCrop { height: kept });
    }
    let src = frame.image();
    let limits: Vec<f64> = (0..w).map(|x| net_line.y_at(x as f64) - margin as f64).collect();
    let out = RgbImage::from_fn(w, kept, |x, y| {
        let src_y = y + top;
        if (src_y as f64) < limits[x as usize] {
            image::Rgb(crate::filtering::MASKED)
        } else {
            *src.get_pixel(x, src_y)
        }
    });
    let mut cropped = Frame::new(frame.frame_id.clone(), out)?;
    cropped.crop_origin = (frame.crop_origin.0, frame.crop_origin.1 + top);
    Ok(cropped)
}

/// A frame together with its offline model outputs.
#[derive(Clone, Debug)]
pub struct FrameInput {
    pub frame: Frame,
    pub artifacts: ShadowArtifacts,
    pub net_bbox: Option<NetBBox>,
}

impl FrameInput {
    pub fn new(frame: Frame) -> Self {
        Self {
            frame,
            artifacts: ShadowArtifacts::default(),
            net_bbox: None,
        }
    }

    /// Loads sidecars for `frame` from `dir`.
    pub fn with_sidecars(frame: Frame, dir: &Path) -> Result<Self, PreprocessError> {
        let (artifacts, net_bbox) = load_sidecar(&frame.frame_id, dir, Some(frame.dimensions()))?;
        Ok(Self {
            frame,
            artifacts,
            net_bbox,
        })
    }
}

/// In-process model adapters available to the pipeline.
#[derive(Clone, Copy, Default)]
pub struct Adapters<'a> {
    pub shadow: ShadowAdapters<'a>,
    pub net: Option<&'a dyn NetDetector>,
}

/// Adapters that shell out to user-supplied commands.
///
/// Argument templates may contain `{input}`, `{mask}` and `{output}`, which
/// are replaced by temporary file paths. Images are exchanged as PNG.
pub mod command {
    use super::*;

    fn run(template: &[String], subs: &[(&str, &Path)]) -> Result<(), PreprocessError> {
        let (prog, args) = template
            .split_first()
            .ok_or_else(|| PreprocessError::AdapterFailure("empty command".into()))?;
        let args: Vec<String> = args
            .iter()
            .map(|a| {
                subs.iter()
                    .fold(a.clone(), |acc, (k, v)| acc.replace(k, &v.to_string_lossy()))
            })
            .collect();
        let status = Command::new(prog)
            .args(&args)
            .status()
            .map_err(|e| PreprocessError::AdapterFailure(format!("{prog}: {e}")))?;
        if !status.success() {
            return Err(PreprocessError::AdapterFailure(format!("{prog} exited with {status}")));
        }
        Ok(())
    }

    fn write_frame(dir: &Path, frame: &Frame) -> Result<PathBuf, PreprocessError> {
        let path = dir.join("input.png");
        frame
            .image()
            .save(&path)
            .map_err(|e| PreprocessError::AdapterFailure(e.to_string()))?;
        Ok(path)
    }

    fn scratch() -> Result<tempfile::TempDir, PreprocessError> {
        tempfile::tempdir().map_err(|e| PreprocessError::AdapterFailure(e.to_string()))
    }

    /// Writes `{output}` as an 8-bit gray PNG.
    pub struct CommandShadowDetector(pub Vec<String>);

    impl ShadowDetector for CommandShadowDetector {
        fn shadow_mask(&self, frame: &Frame) -> Result<GrayImage, PreprocessError> {
            let dir = scratch()?;
            let input = write_frame(dir.path(), frame)?;
            let output = dir.path().join("mask.png");
            run(&self.0, &[("{input}", &input), ("{output}", &output)])?;
            image::open(&output)
                .map(|i| i.into_luma8())
                .map_err(|e| PreprocessError::AdapterFailure(e.to_string()))
        }
    }

    /// Reads `{input}` and `{mask}`, writes `{output}` as an RGB PNG.
    pub struct CommandShadowRemover(pub Vec<String>);

    impl ShadowRemover for CommandShadowRemover {
        fn remove_shadows(&self, frame: &Frame, mask: &GrayImage) -> Result<RgbImage, PreprocessError> {
            let dir = scratch()?;
            let input = write_frame(dir.path(), frame)?;
            let mask_path = dir.path().join("mask.png");
            mask.save(&mask_path)
                .map_err(|e| PreprocessError::AdapterFailure(e.to_string()))?;
            let output = dir.path().join("output.png");
            run(
                &self.0,
                &[("{input}", &input), ("{mask}", &mask_path), ("{output}", &output)],
            )?;
            image::open(&output)
                .map(|i| i.into_rgb8())
                .map_err(|e| PreprocessError::AdapterFailure(e.to_string()))
        }
    }

    /// Writes `{output}` as a JSON array of `{"x0","y0","x1","y1","conf"}`.
    pub struct CommandNetDetector(pub Vec<String>);

    impl NetDetector for CommandNetDetector {
        fn detect(&self, frame: &Frame) -> Result<Vec<NetBBox>, PreprocessError> {
            let dir = scratch()?;
            let input = write_frame(dir.path(), frame)?;
            let output = dir.path().join("boxes.json");
            run(&self.0, &[("{input}", &input), ("{output}", &output)])?;
            let text = fs::read_to_string(&output).map_err(|e| PreprocessError::AdapterFailure(e.to_string()))?;
            serde_json::from_str(&text).map_err(|e| PreprocessError::AdapterFailure(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn frame(w: u32, h: u32, c: [u8; 3]) -> Frame {
        Frame::new("f", RgbImage::from_pixel(w, h, Rgb(c))).unwrap()
    }

    #[test]
    fn frame_size_floor() {
        assert!(Frame::new("x", RgbImage::new(31, 100)).is_err());
        assert!(Frame::new("x", RgbImage::new(32, 32)).is_ok());
    }

    #[test]
    fn empty_sidecar_dir() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = load_sidecar("f001", dir.path(), None).unwrap();
        assert_eq!(a, ShadowArtifacts::default());
        assert_eq!(b, None);
    }

    #[test]
    fn sidecar_net_and_mask() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("f001.net.json"),
            r#"{"x0":100,"y0":300,"x1":1180,"y1":360,"conf":0.9}"#,
        )
        .unwrap();
        GrayImage::new(1280, 720)
            .save(dir.path().join("f001.shadowmask.png"))
            .unwrap();
        let (a, b) = load_sidecar("f001", dir.path(), Some((1280, 720))).unwrap();
        assert_eq!(
            b,
            Some(NetBBox {
                x0: 100,
                y0: 300,
                x1: 1180,
                y1: 360,
                conf: 0.9
            })
        );
        let mask = a.mask.unwrap();
        assert_eq!(mask.pixels().filter(|p| p.0[0] != 0).count(), 0);
        assert!(a.shadow_free.is_none());
    }

    #[test]
    fn sidecar_errors() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.net.json"), "{not json").unwrap();
        assert!(matches!(
            load_sidecar("a", dir.path(), None),
            Err(PreprocessError::MalformedSidecar { .. })
        ));
        GrayImage::new(64, 64)
            .save(dir.path().join("b.shadowmask.png"))
            .unwrap();
        assert!(matches!(
            load_sidecar("b", dir.path(), Some((100, 64))),
            Err(PreprocessError::DimensionMismatch { .. })
        ));
        fs::write(dir.path().join("c.shadowfree.png"), b"garbage").unwrap();
        assert!(matches!(
            load_sidecar("c", dir.path(), None),
            Err(PreprocessError::MalformedSidecar { .. })
        ));
    }

    #[test]
    fn shadow_removal_fallbacks() {
        let f = frame(40, 40, [10, 20, 30]);
        let g = frame(40, 40, [90, 90, 90]);
        let with_free = ShadowArtifacts {
            mask: None,
            shadow_free: Some(g.clone()),
        };
        let out = apply_shadow_removal(&f, &with_free, ShadowAdapters::default()).unwrap();
        assert_eq!(out.source, ShadowSource::Sidecar);
        assert_eq!(out.frame.image(), g.image());

        let out = apply_shadow_removal(&f, &ShadowArtifacts::default(), ShadowAdapters::default()).unwrap();
        assert_eq!(out.source, ShadowSource::Identity);
        assert_eq!(out.frame, f);

        let mask_only = ShadowArtifacts {
            mask: Some(GrayImage::new(40, 40)),
            shadow_free: None,
        };
        let out = apply_shadow_removal(&f, &mask_only, ShadowAdapters::default()).unwrap();
        assert_eq!(out.source, ShadowSource::MaskOnly);
        assert_eq!(out.frame, f);
    }

    struct Brighten;
    impl ShadowRemover for Brighten {
        fn remove_shadows(&self, frame: &Frame, mask: &GrayImage) -> Result<RgbImage, PreprocessError> {
            let mut img = frame.image().clone();
            for (p, m) in img.pixels_mut().zip(mask.pixels()) {
                if m.0[0] == 255 {
                    p.0 = p.0.map(|c| c.saturating_mul(2));
                }
            }
            Ok(img)
        }
    }
    struct HalfMask;
    impl ShadowDetector for HalfMask {
        fn shadow_mask(&self, frame: &Frame) -> Result<GrayImage, PreprocessError> {
            Ok(GrayImage::from_fn(frame.width(), frame.height(), |x, _| {
                image::Luma([if x < 20 { 255 } else { 0 }])
            }))
        }
    }

    #[test]
    fn adapter_mask_then_removal() {
        let f = frame(40, 40, [50, 50, 50]);
        let adapters = ShadowAdapters {
            detector: Some(&HalfMask),
            remover: Some(&Brighten),
        };
        let out = apply_shadow_removal(&f, &ShadowArtifacts::default(), adapters).unwrap();
        assert_eq!(out.source, ShadowSource::Adapter);
        assert_eq!(out.frame.image().get_pixel(0, 0).0, [100, 100, 100]);
        assert_eq!(out.frame.image().get_pixel(39, 0).0, [50, 50, 50]);
    }

    struct Boxes(Vec<NetBBox>);
    impl NetDetector for Boxes {
        fn detect(&self, _: &Frame) -> Result<Vec<NetBBox>, PreprocessError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn net_detection_priority() {
        let f = frame(200, 100, [0, 100, 0]);
        let side = NetBBox {
            x0: 1,
            y0: 2,
            x1: 50,
            y1: 20,
            conf: 0.5,
        };
        let lo = NetBBox {
            x0: 0,
            y0: 0,
            x1: 10,
            y1: 10,
            conf: 0.1,
        };
        let hi = NetBBox {
            x0: 5,
            y0: 5,
            x1: 100,
            y1: 30,
            conf: 0.8,
        };
        let det = Boxes(vec![lo, hi]);
        assert_eq!(detect_net(&f, Some(side), Some(&det), 0.25).unwrap(), Some(side));
        assert_eq!(detect_net(&f, None, None, 0.25).unwrap(), None);
        assert_eq!(detect_net(&f, None, Some(&det), 0.25).unwrap(), Some(hi));
        assert_eq!(detect_net(&f, None, Some(&Boxes(vec![lo])), 0.25).unwrap(), None);
    }

    #[test]
    fn thin_box_and_flat_image_use_midline() {
        let f = frame(100, 100, [30, 30, 30]);
        let thin = NetBBox {
            x0: 10,
            y0: 50,
            x1: 90,
            y1: 52,
            conf: 1.0,
        };
        let l = net_line_from_bbox(&f, &thin);
        assert_eq!(l.a.y, l.b.y);
        let tall = NetBBox {
            x0: 10,
            y0: 20,
            x1: 90,
            y1: 60,
            conf: 1.0,
        };
        let l = net_line_from_bbox(&f, &tall);
        assert_eq!((l.a.y, l.b.y), (39.5, 39.5));
        assert!(l.a.x < l.b.x);
    }

    #[test]
    fn crop_axis_aligned() {
        let f = frame(1280, 720, [10, 120, 10]);
        let line = NetLine {
            a: Point2::new(0.0, 300.0),
            b: Point2::new(1279.0, 300.0),
        };
        let c = crop_near_side(&f, &line, 0).unwrap();
        assert_eq!(c.dimensions(), (1280, 420));
        assert_eq!(c.crop_origin, (0, 300));
        assert!(c.image().pixels().all(|p| p.0 == [10, 120, 10]));
    }

    #[test]
    fn crop_too_low_fails() {
        let f = frame(1280, 720, [10, 120, 10]);
        let line = NetLine {
            a: Point2::new(0.0, 704.0),
            b: Point2::new(1279.0, 704.0),
        };
        assert!(matches!(
            crop_near_side(&f, &line, 0),
            Err(PreprocessError::EmptyCrop { height: 16 })
        ));
    }

    #[test]
    fn crop_origins_compose() {
        let f = frame(200, 200, [10, 120, 10]);
        let l1 = NetLine {
            a: Point2::new(0.0, 20.0),
            b: Point2::new(199.0, 30.0),
        };
        let c1 = crop_near_side(&f, &l1, 2).unwrap();
        let l2 = NetLine {
            a: Point2::new(0.0, 40.0),
            b: Point2::new(199.0, 35.0),
        };
        let c2 = crop_near_side(&c1, &l2, 2).unwrap();
        assert_eq!(c1.crop_origin, (0, 18));
        assert_eq!(c2.crop_origin, (0, 18 + 33));
    }
}
