//! Synthetic court scenes with known homography.
//!
//! A pinhole camera is placed behind the near baseline, looking down the
//! court. Pixels whose ray hits the ground inside the court-plus-apron area
//! get the court color, everything else the background color, and template
//! lines are painted white as exact bands of the configured width.

use std::path::{Path, PathBuf};

use image::{GrayImage, Luma, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalError, GroundTruth};
use crate::calibrate::{is_plausible, HomographyMatrix};
use crate::config::PlausibilityConfig;
use crate::court_model::{standard_template, AxisClass, CourtDimensions, CourtTemplate};
use crate::preprocess::{net_bbox_path, shadow_free_path, shadow_mask_path, Frame, NetBBox};
use crate::scalar::Point2;
use crate::scoring::project_segment;

pub const MAX_POSE_DRAWS: usize = 1000;

/// Net height used for the rendered net band, meters.
const NET_HEIGHT: f64 = 1.0;
/// Net posts stand this far outside the doubles sidelines.
const NET_POST_OFFSET: f64 = 0.914;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseRanges {
    /// Lateral camera offset from the center line, meters.
    pub lateral: [f64; 2],
    /// Distance behind the near baseline, meters.
    pub distance: [f64; 2],
    pub height: [f64; 2],
    /// Ground point the optical axis passes through.
    pub target_x: [f64; 2],
    pub target_y: [f64; 2],
    /// Focal length as a fraction of frame width.
    pub focal: [f64; 2],
    pub roll_deg: [f64; 2],
}

impl Default for PoseRanges {
    fn default() -> Self {
        Self {
            lateral: [-1.5, 1.5],
            distance: [3.0, 10.0],
            height: [4.0, 9.0],
            target_x: [-0.5, 0.5],
            target_y: [-2.0, 4.0],
            focal: [0.6, 1.4],
            roll_deg: [-2.0, 2.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub width: u32,
    pub height: u32,
    pub line_width: u32,
    /// Court color drawn per channel uniformly from `[min, max]`.
    pub court_color_min: [u8; 3],
    pub court_color_max: [u8; 3],
    /// Second surface color painted in bands across the court.
    pub stripe_color: Option<[u8; 3]>,
    pub stripe_period: f64,
    /// Apron around the doubles rectangle: sideways, then behind baselines.
    pub apron: [f64; 2],
    pub noise_sigma: f64,
    pub shadow_count: usize,
    /// Shadowed pixels become `round(p * (1 - darkness))`.
    pub shadow_darkness: f64,
    pub net_band: bool,
    pub net_color: [u8; 3],
    /// Draw the lines beyond the net.
    pub far_side: bool,
    /// Margin, in pixels, that near-half keypoints keep from the frame edge.
    pub edge_margin: f64,
    /// Required fraction of frame pixels on the court plane.
    pub min_court_fraction: f64,
    /// Projected lines must stay this close (degrees) to their image axis.
    pub max_line_tilt_deg: f64,
    pub pose: PoseRanges,
    pub court: CourtDimensions<f64>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 720,
            line_width: 3,
            court_color_min: [30, 70, 40],
            court_color_max: [110, 150, 170],
            stripe_color: None,
            stripe_period: 1.5,
            apron: [3.5, 5.5],
            noise_sigma: 0.0,
            shadow_count: 0,
            shadow_darkness: 0.5,
            net_band: false,
            net_color: [35, 35, 35],
            far_side: true,
            edge_margin: 8.0,
            min_court_fraction: 0.55,
            max_line_tilt_deg: 40.0,
            pose: PoseRanges::default(),
            court: CourtDimensions::default(),
        }
    }
}

impl GenConfig {
    /// A light surface whose luminance exceeds 180 throughout.
    pub fn bright() -> Self {
        Self {
            court_color_min: [195, 185, 155],
            court_color_max: [215, 198, 185],
            ..Self::default()
        }
    }
}

/// Per-pixel content of a generated scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[repr(u8)]
pub enum Surface {
    Background = 0,
    Court = 1,
    Line = 2,
    Net = 3,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SceneParams {
    pub seed: u64,
    pub court_color: [u8; 3],
    pub background: [u8; 3],
    pub line_width: u32,
    pub noise_sigma: f64,
    pub shadows: Vec<Vec<Point2<f64>>>,
    pub camera: [f64; 3],
    pub pose_draws: usize,
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub frame: Frame,
    pub h_gt: HomographyMatrix<f64>,
    pub params: SceneParams,
    /// Row-major, one entry per pixel.
    pub surface: Vec<Surface>,
    pub shadow_free: Option<RgbImage>,
    pub shadow_mask: Option<GrayImage>,
    pub net_bbox: Option<NetBBox>,
}

impl SyntheticScene {
    pub fn surface_at(&self, x: u32, y: u32) -> Surface {
        self.surface[(y * self.frame.width() + x) as usize]
    }

    /// Named keypoints projected through the ground truth, skipping those
    /// behind the camera.
    pub fn ground_truth(&self, template: &CourtTemplate<f64>) -> GroundTruth {
        let keypoints = template
            .keypoints
            .iter()
            .filter(|k| self.h_gt.w(&k.point) > 0.0)
            .filter_map(|k| Some((k.name.clone(), self.h_gt.project(&k.point)?)))
            .collect();
        GroundTruth {
            frame_id: self.frame.frame_id.clone(),
            keypoints,
        }
    }

    /// Writes `<id>.png`, `<id>.gt.json`, `<id>.h.json` and any sidecars.
    pub fn write(&self, dir: &Path, template: &CourtTemplate<f64>) -> Result<Vec<PathBuf>, EvalError> {
        let id = &self.frame.frame_id;
        let mut written = Vec::new();
        let png = dir.join(format!("{id}.png"));
        self.frame.image().save(&png)?;
        written.push(png);

        let gt = dir.join(format!("{id}.gt.json"));
        std::fs::write(&gt, self.ground_truth(template).to_json())?;
        written.push(gt);

        let h = dir.join(format!("{id}.h.json"));
        std::fs::write(&h, serde_json::to_string(&self.h_gt)?)?;
        written.push(h);

        if let Some(free) = &self.shadow_free {
            let p = shadow_free_path(dir, id);
            free.save(&p)?;
            written.push(p);
        }
        if let Some(mask) = &self.shadow_mask {
            let p = shadow_mask_path(dir, id);
            mask.save(&p)?;
            written.push(p);
        }
        if let Some(bbox) = &self.net_bbox {
            let p = net_bbox_path(dir, id);
            std::fs::write(&p, serde_json::to_string(bbox)?)?;
            written.push(p);
        }
        Ok(written)
    }
}

type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit(a: Vec3) -> Vec3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Pinhole camera over the court plane; `z` points up.
#[derive(Clone, Copy, Debug)]
struct Camera {
    center: Vec3,
    right: Vec3,
    down: Vec3,
    forward: Vec3,
    focal: f64,
    principal: (f64, f64),
}

impl Camera {
    fn look_at(center: Vec3, target: Vec3, roll: f64, focal: f64, principal: (f64, f64)) -> Self {
        let forward = unit([target[0] - center[0], target[1] - center[1], target[2] - center[2]]);
        let up = [0.0, 0.0, 1.0];
        // Model x increases to the right when looking from behind the near
        // baseline toward the net.
        let r0 = unit(cross(up, forward));
        let d0 = cross(forward, r0);
        let d0 = if d0[2] > 0.0 { [-d0[0], -d0[1], -d0[2]] } else { d0 };
        let (s, c) = roll.sin_cos();
        let right = [c * r0[0] + s * d0[0], c * r0[1] + s * d0[1], c * r0[2] + s * d0[2]];
        let down = [-s * r0[0] + c * d0[0], -s * r0[1] + c * d0[1], -s * r0[2] + c * d0[2]];
        Self {
            center,
            right,
            down,
            forward,
            focal,
            principal,
        }
    }

    fn project(&self, p: Vec3) -> Option<Point2<f64>> {
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        let z = dot(self.forward, d);
        if z <= 1e-9 {
            return None;
        }
        Some(Point2::new(
            self.focal * dot(self.right, d) / z + self.principal.0,
            self.focal * dot(self.down, d) / z + self.principal.1,
        ))
    }

    /// Ground-plane homography `K [r1 r2 -R c]`.
    fn homography(&self) -> Option<HomographyMatrix<f64>> {
        let rows = [self.right, self.down, self.forward];
        let mut m = [[0.0; 3]; 3];
        for (i, r) in rows.iter().enumerate() {
            m[i] = [r[0], r[1], -dot(*r, self.center)];
        }
        let (f, (cx, cy)) = (self.focal, self.principal);
        let k = [[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]];
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = (0..3).map(|k_| k[i][k_] * m[k_][j]).sum();
            }
        }
        HomographyMatrix::new(h)
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn chebyshev(a: [u8; 3], b: [u8; 3]) -> u8 {
    (0..3).map(|i| a[i].abs_diff(b[i])).max().unwrap_or(0)
}

const BACKGROUNDS: [[u8; 3]; 5] = [[150, 40, 40], [60, 60, 60], [20, 30, 90], [150, 120, 60], [70, 100, 60]];

fn line_tilt_ok(h: &HomographyMatrix<f64>, template: &CourtTemplate<f64>, max_tilt: f64) -> bool {
    template
        .segments
        .iter()
        .filter(|s| s.p0.y >= 0.0 || s.p1.y >= 0.0)
        .all(|s| {
            let p0 = Point2::new(s.p0.x, s.p0.y.max(0.0));
            let p1 = Point2::new(s.p1.x, s.p1.y.max(0.0));
            let (Some(a), Some(b)) = (h.project(&p0), h.project(&p1)) else {
                return false;
            };
            let angle = (b.y - a.y).atan2(b.x - a.x).abs();
            let from_horizontal = angle.min(std::f64::consts::PI - angle);
            match s.axis_class {
                AxisClass::Transverse => from_horizontal <= max_tilt,
                AxisClass::Longitudinal => std::f64::consts::FRAC_PI_2 - from_horizontal <= max_tilt,
            }
        })
}

fn draw_pose(
    rng: &mut ChaCha8Rng,
    gen: &GenConfig,
    template: &CourtTemplate<f64>,
) -> Result<(Camera, HomographyMatrix<f64>, usize), EvalError> {
    let (w, h) = (gen.width as f64, gen.height as f64);
    let p = &gen.pose;
    let half_len = gen.court.length / 2.0;
    let near: Vec<Point2<f64>> = template
        .keypoints
        .iter()
        .filter(|k| k.point.y >= 0.0)
        .map(|k| k.point)
        .collect();
    let plaus = PlausibilityConfig::default();
    for attempt in 1..=MAX_POSE_DRAWS {
        let center = [
            uniform(rng, p.lateral),
            half_len + uniform(rng, p.distance),
            uniform(rng, p.height),
        ];
        let target = [uniform(rng, p.target_x), uniform(rng, p.target_y), 0.0];
        let roll = uniform(rng, p.roll_deg).to_radians();
        let focal = uniform(rng, p.focal) * w;
        let cam = Camera::look_at(center, target, roll, focal, (w / 2.0, h / 2.0));
        let Some(hm) = cam.homography() else { continue };
        let m = gen.edge_margin;
        let visible = near.iter().all(|k| {
            hm.project(k)
                .is_some_and(|q| q.x >= m && q.x <= w - 1.0 - m && q.y >= m && q.y <= h - 1.0 - m)
        });
        if visible
            && is_plausible(&hm, (gen.width, gen.height), &gen.court, &plaus)
            && line_tilt_ok(&hm, template, gen.max_line_tilt_deg.to_radians())
        {
            return Ok((cam, hm, attempt));
        }
    }
    Err(EvalError::PoseRejectionExhausted(MAX_POSE_DRAWS))
}

/// Visits pixels whose center lies within `width / 2` of segment `a -> b`,
/// with square caps extending `width / 2` past each end.
fn paint_segment(a: Point2<f64>, b: Point2<f64>, width: f64, (w, h): (u32, u32), mut visit: impl FnMut(u32, u32)) {
    let half = width / 2.0;
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = (dx * dx + dy * dy).sqrt();
    if !(len > 0.0) || !len.is_finite() {
        return;
    }
    let (ux, uy) = (dx / len, dy / len);
    let x0 = (a.x.min(b.x) - half - 1.0).floor().max(0.0);
    let y0 = (a.y.min(b.y) - half - 1.0).floor().max(0.0);
    let x1 = (a.x.max(b.x) + half + 1.0).ceil().min(w as f64 - 1.0);
    let y1 = (a.y.max(b.y) + half + 1.0).ceil().min(h as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    for y in y0 as u32..=y1 as u32 {
        for x in x0 as u32..=x1 as u32 {
            let (px, py) = (x as f64 - a.x, y as f64 - a.y);
            let along = px * ux + py * uy;
            let across = (px * uy - py * ux).abs();
            if across <= half && along >= -half && along <= len + half {
                visit(x, y);
            }
        }
    }
}

fn point_in_polygon(poly: &[Point2<f64>], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn polygon_bounds(poly: &[Point2<f64>], width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
    let min_x = poly.iter().map(|p| p.x).fold(f64::INFINITY, f64::min).floor().max(0.0);
    let min_y = poly.iter().map(|p| p.y).fold(f64::INFINITY, f64::min).floor().max(0.0);
    let max_x = poly.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max).ceil();
    let max_y = poly.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max).ceil();
    let max_x = max_x.min(width as f64 - 1.0);
    let max_y = max_y.min(height as f64 - 1.0);
    (min_x <= max_x && min_y <= max_y).then_some((min_x as u32, min_y as u32, max_x as u32, max_y as u32))
}

/// Renders one scene. Deterministic in `seed`.
pub fn generate_scene(seed: u64, gen: &GenConfig) -> Result<SyntheticScene, EvalError> {
    let template = standard_template(gen.court)?;
    generate_scene_with(seed, gen, &template, format!("synth-{seed}"))
}

pub fn generate_scene_with(
    seed: u64,
    gen: &GenConfig,
    template: &CourtTemplate<f64>,
    frame_id: String,
) -> Result<SyntheticScene, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (width, height) = (gen.width, gen.height);
    let n_px = (width * height) as usize;

    let mut court_color = [0u8; 3];
    for c in 0..3 {
        let (lo, hi) = (
            gen.court_color_min[c],
            gen.court_color_max[c].max(gen.court_color_min[c]),
        );
        court_color[c] = rng.random_range(lo..=hi);
    }
    let background = BACKGROUNDS
        .iter()
        .copied()
        .filter(|b| chebyshev(*b, court_color) >= 60)
        .max_by_key(|b| chebyshev(*b, court_color))
        .unwrap_or([0, 0, 255]);

    let half_w = gen.court.doubles_width / 2.0 + gen.apron[0];
    let half_l = gen.court.length / 2.0 + gen.apron[1];

    let mut surface;
    let mut draws = 0;
    let (cam, h_gt, inv) = loop {
        let (cam, h_gt, n) = draw_pose(&mut rng, gen, template)?;
        draws += n;
        let inv = h_gt.inverse().ok_or(EvalError::PoseRejectionExhausted(draws))?;
        surface = vec![Surface::Background; n_px];
        surface.par_chunks_mut(width as usize).enumerate().for_each(|(y, row)| {
            for (x, s) in row.iter_mut().enumerate() {
                let px = Point2::new(x as f64, y as f64);
                if inv.w(&px) <= 0.0 {
                    continue;
                }
                if let Some(g) = inv.project(&px) {
                    if g.x.abs() <= half_w && g.y.abs() <= half_l {
                        *s = Surface::Court;
                    }
                }
            }
        });
        let court_px = surface.iter().filter(|s| **s == Surface::Court).count();
        if court_px as f64 >= gen.min_court_fraction * n_px as f64 {
            break (cam, h_gt, inv);
        }
        if draws >= MAX_POSE_DRAWS {
            return Err(EvalError::PoseRejectionExhausted(draws));
        }
    };

    let stripe = gen.stripe_color;
    let mut img = RgbImage::from_fn(width, height, |x, y| {
        let s = surface[(y * width + x) as usize];
        if s != Surface::Court {
            return Rgb(background);
        }
        if let Some(sc) = stripe {
            let g = inv
                .project(&Point2::new(x as f64, y as f64))
                .expect("court pixel projects");
            let band = ((g.y + half_l) / gen.stripe_period).floor() as i64;
            if band % 2 == 1 {
                return Rgb(sc);
            }
        }
        Rgb(court_color)
    });

    let mut line_template = template.clone();
    if !gen.far_side {
        line_template.segments.retain(|s| s.p0.y >= 0.0 || s.p1.y >= 0.0);
        for s in &mut line_template.segments {
            s.p0.y = s.p0.y.max(0.0);
            s.p1.y = s.p1.y.max(0.0);
        }
    }
    for seg in &line_template.segments {
        if let Some((a, b)) = project_segment(&h_gt, &seg.p0, &seg.p1) {
            paint_segment(a, b, gen.line_width as f64, (width, height), |x, y| {
                img.put_pixel(x, y, Rgb([255, 255, 255]));
                surface[(y * width + x) as usize] = Surface::Line;
            });
        }
    }

    let mut net_bbox = None;
    if gen.net_band {
        let hw = gen.court.doubles_width / 2.0 + NET_POST_OFFSET;
        let corners = [
            [-hw, 0.0, 0.0],
            [hw, 0.0, 0.0],
            [hw, 0.0, NET_HEIGHT],
            [-hw, 0.0, NET_HEIGHT],
        ];
        let poly: Option<Vec<Point2<f64>>> = corners.iter().map(|c| cam.project(*c)).collect();
        if let Some(poly) = poly {
            if let Some((x0, y0, x1, y1)) = polygon_bounds(&poly, width, height) {
                let mut hit = false;
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                        if !point_in_polygon(&poly, fx, fy) {
                            continue;
                        }
                        // The net only hides ground beyond it.
                        let px = Point2::new(x as f64, y as f64);
                        let behind = inv.w(&px) <= 0.0 || inv.project(&px).is_none_or(|g| g.y < 0.0);
                        if behind {
                            img.put_pixel(x, y, Rgb(gen.net_color));
                            surface[(y * width + x) as usize] = Surface::Net;
                            hit = true;
                        }
                    }
                }
                if hit {
                    net_bbox = Some(NetBBox {
                        x0,
                        y0,
                        x1: x1 + 1,
                        y1: y1 + 1,
                        conf: 0.9,
                    });
                }
            }
        }
    }

    if gen.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, gen.noise_sigma).map_err(|e| EvalError::InvalidGenConfig(e.to_string()))?;
        for px in img.pixels_mut() {
            for c in px.0.iter_mut() {
                let v = *c as f64 + normal.sample(&mut rng);
                *c = v.round().clamp(1.0, 255.0) as u8;
            }
        }
    }

    let mut shadows = Vec::new();
    let mut shadow_free = None;
    let mut shadow_mask = None;
    if gen.shadow_count > 0 {
        let free = img.clone();
        let mut mask = GrayImage::new(width, height);
        let (w, h) = (width as f64, height as f64);
        let keep = 1.0 - gen.shadow_darkness.clamp(0.0, 1.0);
        for _ in 0..gen.shadow_count {
            let cx = rng.random_range(0.0..w);
            let cy = rng.random_range(h * 0.3..h);
            let rx = rng.random_range(0.05..0.25) * w;
            let ry = rng.random_range(0.05..0.25) * h;
            let rot: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let poly: Vec<Point2<f64>> = (0..4)
                .map(|k| {
                    let a = rot + k as f64 * std::f64::consts::FRAC_PI_2;
                    Point2::new(cx + rx * a.cos(), cy + ry * a.sin())
                })
                .collect();
            if let Some((x0, y0, x1, y1)) = polygon_bounds(&poly, width, height) {
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        if point_in_polygon(&poly, x as f64 + 0.5, y as f64 + 0.5) {
                            mask.put_pixel(x, y, Luma([255]));
                        }
                    }
                }
            }
            shadows.push(poly);
        }
        for (x, y, m) in mask.enumerate_pixels() {
            if m.0[0] == 255 {
                let p = img.get_pixel_mut(x, y);
                for c in p.0.iter_mut() {
                    *c = (*c as f64 * keep).round() as u8;
                }
            }
        }
        shadow_free = Some(free);
        shadow_mask = Some(mask);
    }

    let frame = Frame::new(frame_id, img)?;
    Ok(SyntheticScene {
        frame,
        h_gt,
        params: SceneParams {
            seed,
            court_color,
            background,
            line_width: gen.line_width,
            noise_sigma: gen.noise_sigma,
            shadows,
            camera: cam.center,
            pose_draws: draws,
        },
        surface,
        shadow_free,
        shadow_mask,
        net_bbox,
    })
}
