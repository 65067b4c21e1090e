//! Detection scoring: draw the court under a homography and count how many
//! drawn pixels land on bright white pixels of the reference frame. Also the
//! selection of the best detection over candidates and video frames.

use image::RgbImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::calibrate::{CandidateDetection, HomographyMatrix, Pipeline, PipelineError};
use crate::court_model::CourtTemplate;
use crate::preprocess::FrameInput;
use crate::scalar::Point2;

/// Clipping plane for points behind or at the camera.
pub const W_CLIP: f64 = 1e-6;

/// Deduplicated pixels covered by the drawn court, in row-major order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RenderedCourt {
    pub pixels: Vec<(u32, u32)>,
}

impl RenderedCourt {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Score(pub u64);

/// Projects a model segment, first clipping it against the `w = W_CLIP`
/// plane. `None` when the whole segment is behind the camera.
pub fn project_segment(h: &HomographyMatrix, p0: &Point2<f64>, p1: &Point2<f64>) -> Option<(Point2<f64>, Point2<f64>)> {
    let (w0, w1) = (h.w(p0), h.w(p1));
    if w0 < W_CLIP && w1 < W_CLIP {
        return None;
    }
    let lerp = |t: f64| Point2::new(p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y));
    let (mut a, mut b) = (*p0, *p1);
    if w0 < W_CLIP {
        a = lerp((W_CLIP - w0) / (w1 - w0));
    } else if w1 < W_CLIP {
        b = lerp((W_CLIP - w0) / (w1 - w0));
    }
    let pa = h.apply(&a);
    let pb = h.apply(&b);
    let (wa, wb) = (pa[2].max(W_CLIP), pb[2].max(W_CLIP));
    Some((Point2::new(pa[0] / wa, pa[1] / wa), Point2::new(pb[0] / wb, pb[1] / wb)))
}

/// Liang-Barsky clip of `a -> b` to `[xmin, xmax] x [ymin, ymax]`.
fn clip_to_rect(
    a: Point2<f64>,
    b: Point2<f64>,
    (xmin, ymin, xmax, ymax): (f64, f64, f64, f64),
) -> Option<(Point2<f64>, Point2<f64>)> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [(-dx, a.x - xmin), (dx, xmax - a.x), (-dy, a.y - ymin), (dy, ymax - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
            if t0 > t1 {
                return None;
            }
        }
    }
    Some((
        Point2::new(a.x + t0 * dx, a.y + t0 * dy),
        Point2::new(a.x + t1 * dx, a.y + t1 * dy),
    ))
}

/// Bresenham walk between two integer points, inclusive.
fn walk_line(x0: i64, y0: i64, x1: i64, y1: i64, mut visit: impl FnMut(i64, i64)) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        visit(x, y);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Visits every in-frame pixel of the stroked 2D segment `a -> b`; pixels
/// may repeat.
pub fn rasterize_segment(
    a: Point2<f64>,
    b: Point2<f64>,
    (width, height): (u32, u32),
    stroke_width: u32,
    mut visit: impl FnMut(u32, u32),
) {
    let stroke = stroke_width.max(1) as i64;
    let lo = -(stroke - 1) / 2;
    let hi = stroke / 2;
    let pad = (hi.max(-lo) + 1) as f64;
    let bounds = (-pad, -pad, width as f64 - 1.0 + pad, height as f64 - 1.0 + pad);
    let Some((a, b)) = clip_to_rect(a, b, bounds) else {
        return;
    };
    let (w, h) = (width as i64, height as i64);
    walk_line(
        a.x.round() as i64,
        a.y.round() as i64,
        b.x.round() as i64,
        b.y.round() as i64,
        |x, y| {
            for oy in lo..=hi {
                let yy = y + oy;
                if yy < 0 || yy >= h {
                    continue;
                }
                for ox in lo..=hi {
                    let xx = x + ox;
                    if xx >= 0 && xx < w {
                        visit(xx as u32, yy as u32);
                    }
                }
            }
        },
    );
}

/// Visits the pixels of every template segment drawn under `h`.
pub fn rasterize_court(
    h: &HomographyMatrix,
    template: &CourtTemplate<f64>,
    dims: (u32, u32),
    stroke_width: u32,
    mut visit: impl FnMut(u32, u32),
) {
    for seg in &template.segments {
        if let Some((a, b)) = project_segment(h, &seg.p0, &seg.p1) {
            rasterize_segment(a, b, dims, stroke_width, &mut visit);
        }
    }
}

pub fn render_court(
    h: &HomographyMatrix,
    template: &CourtTemplate<f64>,
    dims: (u32, u32),
    stroke_width: u32,
) -> RenderedCourt {
    let (w, hgt) = dims;
    let mut covered = vec![false; w as usize * hgt as usize];
    rasterize_court(h, template, dims, stroke_width, |x, y| {
        covered[y as usize * w as usize + x as usize] = true;
    });
    let pixels = covered
        .iter()
        .enumerate()
        .filter(|(_, &c)| c)
        .map(|(i, _)| ((i % w as usize) as u32, (i / w as usize) as u32))
        .collect();
    RenderedCourt { pixels }
}

#[inline]
pub fn is_bright_white(px: [u8; 3], white_threshold: u8) -> bool {
    px.iter().all(|&c| c >= white_threshold)
}

pub fn score_detection(rendered: &RenderedCourt, reference: &RgbImage, white_threshold: u8) -> Score {
    Score(
        rendered
            .pixels
            .iter()
            .filter(|&&(x, y)| is_bright_white(reference.get_pixel(x, y).0, white_threshold))
            .count() as u64,
    )
}

/// Reusable scorer for many homographies against one reference frame.
///
/// Equivalent to `score_detection(render_court(..))` without materializing
/// the pixel set; deduplication uses a generation-stamped buffer.
pub struct ScoreContext<'a> {
    template: &'a CourtTemplate<f64>,
    dims: (u32, u32),
    stroke_width: u32,
    white: Vec<bool>,
}

pub struct ScoreScratch {
    stamp: Vec<u32>,
    generation: u32,
}

impl<'a> ScoreContext<'a> {
    pub fn new(template: &'a CourtTemplate<f64>, reference: &RgbImage, stroke_width: u32, white_threshold: u8) -> Self {
        Self {
            template,
            dims: reference.dimensions(),
            stroke_width,
            white: reference
                .pixels()
                .map(|p| is_bright_white(p.0, white_threshold))
                .collect(),
        }
    }

    pub fn scratch(&self) -> ScoreScratch {
        ScoreScratch {
            stamp: vec![0; self.white.len()],
            generation: 0,
        }
    }

    pub fn score(&self, h: &HomographyMatrix, scratch: &mut ScoreScratch) -> Score {
        scratch.generation = scratch.generation.wrapping_add(1);
        if scratch.generation == 0 {
            scratch.stamp.fill(0);
            scratch.generation = 1;
        }
        let gen = scratch.generation;
        let w = self.dims.0 as usize;
        let mut count = 0u64;
        rasterize_court(h, self.template, self.dims, self.stroke_width, |x, y| {
            let i = y as usize * w + x as usize;
            if scratch.stamp[i] != gen {
                scratch.stamp[i] = gen;
                count += self.white[i] as u64;
            }
        });
        Score(count)
    }
}

/// Highest score wins; ties go to the earliest `frame_id`, then the earliest
/// candidate index.
pub fn select_best(detections: &[CandidateDetection]) -> Option<&CandidateDetection> {
    detections.iter().min_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then_with(|| a.frame_id.cmp(&b.frame_id))
            .then_with(|| a.candidate_index.cmp(&b.candidate_index))
    })
}

/// `n` distinct indices out of `len`, ascending; all of them if `len <= n`.
pub fn sample_frame_indices(len: usize, n: usize, seed: u64) -> Vec<usize> {
    if len <= n {
        return (0..len).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, len, n).into_vec();
    picked.sort_unstable();
    picked
}

/// Runs frame detection on a seeded random subset of a video and keeps the
/// best-scoring detection.
///
/// `load` is called only for sampled indices, possibly from several threads.
pub fn detect_video<F>(
    pipeline: &Pipeline<'_>,
    frame_count: usize,
    n_frames: usize,
    seed: u64,
    load: F,
) -> Result<CandidateDetection, PipelineError>
where
    F: Fn(usize) -> Result<FrameInput, PipelineError> + Sync,
{
    if frame_count == 0 || n_frames == 0 {
        return Err(PipelineError::NoFrames);
    }
    let indices = sample_frame_indices(frame_count, n_frames, seed);
    let results: Vec<Result<Option<CandidateDetection>, PipelineError>> = indices
        .par_iter()
        .map(|&i| {
            let input = load(i)?;
            pipeline.detect_frame(&input, i as u64)
        })
        .collect();
    let mut found = Vec::new();
    for r in results {
        if let Some(d) = r? {
            found.push(d);
        }
    }
    select_best(&found).cloned().ok_or(PipelineError::NoDetection)
}
