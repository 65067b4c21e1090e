//! Straight line extraction from a binary line-candidate mask.
//!
//! Lines use the normal form `x cos(theta) + y sin(theta) = rho` with `theta`
//! in `[0, pi)` and signed `rho`, measured from the image origin (top-left
//! pixel center).

use rayon::prelude::*;
use serde::Serialize;

use crate::filtering::BinaryMask;
use crate::scalar::{Point2, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PolarLine<T = f64> {
    pub rho: T,
    pub theta: T,
    pub votes: u32,
}

impl<T: Scalar> PolarLine<T> {
    pub fn new(rho: T, theta: T, votes: u32) -> Self {
        Self { rho, theta, votes }
    }

    /// Line through two distinct points.
    pub fn through(a: &Point2<T>, b: &Point2<T>, votes: u32) -> Self {
        let theta = (b.y - a.y).atan2(b.x - a.x) + T::FRAC_PI_2();
        let rho = a.x * theta.cos() + a.y * theta.sin();
        Self::new(rho, theta, votes).normalized()
    }

    /// Same geometric line with `theta` folded into `[0, pi)`.
    pub fn normalized(self) -> Self {
        let pi = T::PI();
        let (mut rho, mut theta) = (self.rho, self.theta);
        while theta < T::zero() {
            theta = theta + pi;
            rho = -rho;
        }
        while theta >= pi {
            theta = theta - pi;
            rho = -rho;
        }
        Self { rho, theta, ..self }
    }

    /// Signed distance of `p` from the line.
    #[inline]
    pub fn residual(&self, p: &Point2<T>) -> T {
        p.x * self.theta.cos() + p.y * self.theta.sin() - self.rho
    }

    /// `y` where the line crosses the vertical `x`; `None` for vertical lines.
    pub fn y_at(&self, x: T) -> Option<T> {
        let s = self.theta.sin();
        (s.abs() > T::epsilon()).then(|| (self.rho - x * self.theta.cos()) / s)
    }

    /// `x` where the line crosses the horizontal `y`; `None` for horizontal lines.
    pub fn x_at(&self, y: T) -> Option<T> {
        let c = self.theta.cos();
        (c.abs() > T::epsilon()).then(|| (self.rho - y * self.theta.sin()) / c)
    }

    /// Whether the line reads as horizontal: its normal is within 45 degrees
    /// of vertical (strict).
    pub fn is_horizontal(&self) -> bool {
        (self.theta - T::FRAC_PI_2()).abs() < T::FRAC_PI_4()
    }

    pub fn cast<U: Scalar>(&self) -> PolarLine<U> {
        PolarLine::new(
            U::lit(self.rho.to_f64_lossy()),
            U::lit(self.theta.to_f64_lossy()),
            self.votes,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoughParams {
    pub rho_res: f64,
    pub theta_res: f64,
    /// `None` selects `max(40, 0.15 * min(width, height))`.
    pub vote_threshold: Option<u32>,
}

impl Default for HoughParams {
    fn default() -> Self {
        Self {
            rho_res: 1.0,
            theta_res: std::f64::consts::PI / 180.0,
            vote_threshold: None,
        }
    }
}

pub fn default_vote_threshold(width: u32, height: u32) -> u32 {
    let scaled = (0.15 * width.min(height) as f64).ceil() as u32;
    scaled.max(40)
}

/// Geometry of the `(theta, rho)` voting grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccumulatorLayout {
    pub n_theta: usize,
    pub n_rho: usize,
    /// Added to `round(rho / rho_res)` to get a nonnegative row index.
    pub rho_offset: i64,
    pub rho_res: f64,
    pub theta_res: f64,
}

impl AccumulatorLayout {
    pub fn new(width: u32, height: u32, rho_res: f64, theta_res: f64) -> Self {
        let diag = (width as f64).hypot(height as f64).ceil();
        let rho_offset = (diag / rho_res).ceil() as i64;
        let n_theta = ((std::f64::consts::PI / theta_res).round() as usize).max(1);
        Self {
            n_theta,
            n_rho: (2 * rho_offset + 1) as usize,
            rho_offset,
            rho_res,
            theta_res,
        }
    }

    #[inline]
    pub fn theta(&self, t: usize) -> f64 {
        t as f64 * self.theta_res
    }

    #[inline]
    pub fn rho(&self, r: usize) -> f64 {
        (r as i64 - self.rho_offset) as f64 * self.rho_res
    }
}

/// Vote counts indexed `[theta * n_rho + rho]`.
pub fn hough_accumulator(mask: &BinaryMask, layout: &AccumulatorLayout) -> Vec<u32> {
    let trig: Vec<(f64, f64)> = (0..layout.n_theta)
        .map(|t| {
            let th = layout.theta(t);
            (th.cos(), th.sin())
        })
        .collect();
    let points: Vec<(u32, u32)> = mask.set_pixels().collect();
    let cells = layout.n_theta * layout.n_rho;
    let vote = |acc: &mut Vec<u32>, &(x, y): &(u32, u32)| {
        let (xf, yf) = (x as f64, y as f64);
        for (t, &(c, s)) in trig.iter().enumerate() {
            let rho = xf * c + yf * s;
            let r = ((rho / layout.rho_res).round() as i64 + layout.rho_offset) as usize;
            acc[t * layout.n_rho + r] += 1;
        }
    };
    // integer partial sums: the reduction is exact regardless of split
    points
        .par_chunks(8192)
        .fold(
            || vec![0u32; cells],
            |mut acc, chunk| {
                chunk.iter().for_each(|p| vote(&mut acc, p));
                acc
            },
        )
        .reduce(
            || vec![0u32; cells],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// Hough transform with strict 8-neighbour peak extraction.
///
/// A cell is a peak when its vote count beats every neighbour; an equal
/// neighbour only blocks it if that neighbour has a lower `(theta, rho)`
/// index. Peaks below the vote threshold are dropped. Output is sorted by
/// votes, descending, then by `(theta, rho)` index.
pub fn hough_lines(mask: &BinaryMask, params: &HoughParams) -> Vec<PolarLine<f64>> {
    let layout = AccumulatorLayout::new(mask.width(), mask.height(), params.rho_res, params.theta_res);
    let threshold = params
        .vote_threshold
        .unwrap_or_else(|| default_vote_threshold(mask.width(), mask.height()));
    let acc = hough_accumulator(mask, &layout);
    let (nt, nr) = (layout.n_theta as i64, layout.n_rho as i64);

    let mut peaks: Vec<(u32, usize, usize)> = Vec::new();
    for t in 0..nt {
        for r in 0..nr {
            let v = acc[(t * nr + r) as usize];
            if v == 0 || v < threshold {
                continue;
            }
            let mut is_peak = true;
            'nb: for dt in -1..=1i64 {
                for dr in -1..=1i64 {
                    if dt == 0 && dr == 0 {
                        continue;
                    }
                    let (t2, r2) = (t + dt, r + dr);
                    if t2 < 0 || t2 >= nt || r2 < 0 || r2 >= nr {
                        continue;
                    }
                    let nv = acc[(t2 * nr + r2) as usize];
                    if nv > v || (nv == v && (t2, r2) < (t, r)) {
                        is_peak = false;
                        break 'nb;
                    }
                }
            }
            if is_peak {
                peaks.push((v, t as usize, r as usize));
            }
        }
    }
    peaks.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    peaks
        .into_iter()
        .map(|(v, t, r)| PolarLine::new(layout.rho(r), layout.theta(t), v))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeParams {
    pub d_rho: f64,
    pub d_theta: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self {
            d_rho: 12.0,
            d_theta: 5f64.to_radians(),
        }
    }
}

/// `line` expressed in the branch closest to `reference`, or `None` if it is
/// not within the merge window under either `(rho, theta)` or
/// `(-rho, theta -/+ pi)`.
fn align_within<T: Scalar>(reference: (T, T), line: &PolarLine<T>, d_rho: T, d_theta: T) -> Option<(T, T)> {
    let close = |rho: T, theta: T| (rho - reference.0).abs() <= d_rho && (theta - reference.1).abs() <= d_theta;
    let pi = T::PI();
    [
        (line.rho, line.theta),
        (-line.rho, line.theta - pi),
        (-line.rho, line.theta + pi),
    ]
    .into_iter()
    .find(|&(r, t)| close(r, t))
}

/// Greedy vote-weighted clustering of near-duplicate Hough peaks.
pub fn merge_lines<T: Scalar>(lines: &[PolarLine<T>], d_rho: T, d_theta: T) -> Vec<PolarLine<T>> {
    struct Cluster<T> {
        sum_rho: T,
        sum_theta: T,
        weight: T,
        votes: u32,
    }
    impl<T: Scalar> Cluster<T> {
        fn rep(&self) -> (T, T) {
            (self.sum_rho / self.weight, self.sum_theta / self.weight)
        }
    }

    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|&a, &b| lines[b].votes.cmp(&lines[a].votes).then(a.cmp(&b)));

    let mut clusters: Vec<Cluster<T>> = Vec::new();
    for i in order {
        let line = &lines[i];
        let w = T::lit(line.votes.max(1) as f64);
        let hit = clusters
            .iter_mut()
            .find_map(|c| align_within(c.rep(), line, d_rho, d_theta).map(|al| (c, al)));
        match hit {
            Some((c, (rho, theta))) => {
                c.sum_rho = c.sum_rho + w * rho;
                c.sum_theta = c.sum_theta + w * theta;
                c.weight = c.weight + w;
                c.votes += line.votes;
            }
            None => clusters.push(Cluster {
                sum_rho: w * line.rho,
                sum_theta: w * line.theta,
                weight: w,
                votes: line.votes,
            }),
        }
    }

    let mut out: Vec<PolarLine<T>> = clusters
        .iter()
        .map(|c| {
            let (rho, theta) = c.rep();
            PolarLine::new(rho, theta, c.votes).normalized()
        })
        .collect();
    // stable: equal totals keep creation order
    out.sort_by_key(|l| std::cmp::Reverse(l.votes));
    out
}

/// Detected lines split by orientation.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LineSet<T = f64> {
    /// Sorted top to bottom by `y` at the image's center column.
    pub horizontal: Vec<PolarLine<T>>,
    /// Sorted left to right by `x` at the image's center row.
    pub vertical: Vec<PolarLine<T>>,
    /// Lines dropped by the per-class caps.
    pub overflow: Vec<PolarLine<T>>,
}

pub fn classify_lines<T: Scalar>(
    lines: &[PolarLine<T>],
    width: u32,
    height: u32,
    max_horizontal: usize,
    max_vertical: usize,
) -> LineSet<T> {
    let cx = T::lit(width as f64 / 2.0);
    let cy = T::lit(height as f64 / 2.0);
    let mut by_votes: Vec<PolarLine<T>> = lines.to_vec();
    by_votes.sort_by_key(|l| std::cmp::Reverse(l.votes));

    let mut set = LineSet::default();
    for line in by_votes {
        if line.is_horizontal() {
            if set.horizontal.len() < max_horizontal {
                set.horizontal.push(line);
            } else {
                set.overflow.push(line);
            }
        } else if set.vertical.len() < max_vertical {
            set.vertical.push(line);
        } else {
            set.overflow.push(line);
        }
    }
    let key_h = |l: &PolarLine<T>| l.y_at(cx).unwrap_or(T::infinity());
    let key_v = |l: &PolarLine<T>| l.x_at(cy).unwrap_or(T::infinity());
    set.horizontal
        .sort_by(|a, b| key_h(a).partial_cmp(&key_h(b)).unwrap_or(std::cmp::Ordering::Equal));
    set.vertical
        .sort_by(|a, b| key_v(a).partial_cmp(&key_v(b)).unwrap_or(std::cmp::Ordering::Equal));
    set
}

/// Below this `|sin(theta1 - theta2)|` two lines are treated as parallel.
pub const PARALLEL_EPS: f64 = 1e-6;

/// Intersection of two lines by Cramer's rule.
pub fn intersect<T: Scalar>(l1: &PolarLine<T>, l2: &PolarLine<T>) -> Option<Point2<T>> {
    let (c1, s1) = (l1.theta.cos(), l1.theta.sin());
    let (c2, s2) = (l2.theta.cos(), l2.theta.sin());
    let det = c1 * s2 - s1 * c2;
    if det.abs() < T::lit(PARALLEL_EPS) {
        return None;
    }
    let x = (l1.rho * s2 - l2.rho * s1) / det;
    let y = (c1 * l2.rho - c2 * l1.rho) / det;
    Some(Point2::new(x, y))
}

/// Mask pixels within `band` of `line`, in row-major order.
///
/// Only the strip around the line is visited, stepping along its dominant
/// axis, so the cost is independent of how many mask pixels are set.
pub fn supporting_pixels(mask: &BinaryMask, line: &PolarLine<f64>, band: f64) -> std::vec::IntoIter<(u32, u32)> {
    let (w, h) = (mask.width(), mask.height());
    let (c, s, rho) = (line.theta.cos(), line.theta.sin(), line.rho);
    let inside = |x: u32, y: u32| (x as f64 * c + y as f64 * s - rho).abs() <= band;
    let mut out = Vec::new();
    if w == 0 || h == 0 || !(rho.is_finite() && band >= 0.0) {
        return out.into_iter();
    }
    // strip along one axis: for each `u`, the `v` range where the line is within band
    let walk = |len_u: u32, len_v: u32, a: f64, b: f64, emit: &mut dyn FnMut(u32, u32)| {
        let half = band / b.abs();
        for u in 0..len_u {
            let mid = (rho - u as f64 * a) / b;
            // one extra cell each side absorbs rounding; `inside` decides
            let lo = (mid - half).floor() - 1.0;
            let hi = (mid + half).ceil() + 1.0;
            if hi < 0.0 || lo > (len_v - 1) as f64 {
                continue;
            }
            let (lo, hi) = (lo.max(0.0) as u32, hi.min((len_v - 1) as f64) as u32);
            for v in lo..=hi {
                emit(u, v);
            }
        }
    };
    if s.abs() >= c.abs() {
        walk(w, h, c, s, &mut |x, y| {
            if mask.get(x, y) && inside(x, y) {
                out.push((x, y));
            }
        });
        out.sort_unstable_by_key(|&(x, y)| (y, x));
    } else {
        walk(h, w, s, c, &mut |y, x| {
            if mask.get(x, y) && inside(x, y) {
                out.push((x, y));
            }
        });
    }
    out.into_iter()
}

/// Fewest supporting pixels for which [`refine_line`] will refit.
pub const MIN_REFINE_SUPPORT: usize = 10;

/// Total-least-squares refit of `line` to the mask pixels within `band` of it.
pub fn refine_line(mask: &BinaryMask, line: &PolarLine<f64>, band: f64) -> PolarLine<f64> {
    let pts: Vec<(f64, f64)> = supporting_pixels(mask, line, band)
        .map(|(x, y)| (x as f64, y as f64))
        .collect();
    fit_principal_axis(&pts).map_or(*line, |(rho, theta)| {
        PolarLine::new(rho, theta, line.votes).normalized()
    })
}

/// Normal form `(rho, theta)` of the principal axis of `pts`.
fn fit_principal_axis(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < MIN_REFINE_SUPPORT {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let direction = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let theta = direction + std::f64::consts::FRAC_PI_2;
    // exact folding keeps axis-aligned fits exact
    let theta = if theta >= std::f64::consts::PI {
        theta - std::f64::consts::PI
    } else {
        theta
    };
    let rho = mx * theta.cos() + my * theta.sin();
    Some((rho, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn empty_mask_has_no_lines() {
        let m = BinaryMask::new(100, 100);
        assert!(hough_lines(&m, &HoughParams::default()).is_empty());
    }

    #[test]
    fn full_column_is_top_line() {
        let mut m = BinaryMask::new(200, 200);
        for y in 0..200 {
            m.set(50, y, true);
        }
        let lines = hough_lines(&m, &HoughParams::default());
        let top = lines[0];
        assert_eq!(top.votes, 200);
        assert!((top.rho - 50.0).abs() <= 1.0);
        assert!(top.theta.abs() <= PI / 180.0);
    }

    #[test]
    fn main_diagonal_normal_form() {
        let mut m = BinaryMask::new(120, 120);
        for i in 0..120 {
            m.set(i, i, true);
        }
        let top = hough_lines(&m, &HoughParams::default())[0];
        assert!((top.theta - 3.0 * PI / 4.0).abs() <= PI / 180.0 + 1e-12, "{top:?}");
        assert!(top.rho.abs() <= 1.0);
        // the analytic normal form has zero residual on every pixel
        let exact = PolarLine::new(0.0, 3.0 * PI / 4.0, 0);
        for i in 0..120 {
            assert!(exact.residual(&Point2::new(i as f64, i as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn merge_examples() {
        let single = [PolarLine::new(10.0, 1.0, 5)];
        assert_eq!(merge_lines(&single, 12.0, 0.087), single.to_vec());

        let pair = [PolarLine::new(50.0, 0.0, 200), PolarLine::new(52.0, 0.01, 150)];
        let merged = merge_lines(&pair, 12.0, 5f64.to_radians());
        assert_eq!(merged.len(), 1);
        let expected_rho = (50.0 * 200.0 + 52.0 * 150.0) / 350.0;
        assert!((merged[0].rho - expected_rho).abs() < 1e-12);
        assert!((merged[0].rho - 50.857142857).abs() < 1e-8);
        assert_eq!(merged[0].votes, 350);

        let wrap = [PolarLine::new(50.0, 0.01, 10), PolarLine::new(-50.0, PI - 0.01, 10)];
        let merged = merge_lines(&wrap, 12.0, 5f64.to_radians());
        assert_eq!(merged.len(), 1);
        assert!(merged[0].theta.abs() < 1e-12 || (merged[0].theta - PI).abs() < 1e-12);
        assert!((merged[0].rho.abs() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn merge_keeps_distant_lines_apart() {
        let lines = [
            PolarLine::new(50.0, 0.0, 100),
            PolarLine::new(80.0, 0.0, 90),
            PolarLine::new(50.0, 0.5, 80),
        ];
        assert_eq!(merge_lines(&lines, 12.0, 5f64.to_radians()).len(), 3);
    }

    #[test]
    fn classification_boundaries() {
        let h = PolarLine::new(10.0, PI / 2.0, 1);
        let v = PolarLine::new(10.0, 0.0, 1);
        let diag = PolarLine::new(10.0, PI / 4.0, 1);
        let set = classify_lines(&[h, v, diag], 100, 100, 8, 8);
        assert_eq!(set.horizontal, vec![h]);
        assert_eq!(set.vertical.len(), 2);
        assert!(set.vertical.contains(&diag));
    }

    #[test]
    fn classification_sorts_and_caps() {
        let lines: Vec<_> = [(300.0, 5), (100.0, 9), (200.0, 7)]
            .iter()
            .map(|&(y, v)| PolarLine::new(y, PI / 2.0, v))
            .collect();
        let set = classify_lines(&lines, 640, 480, 2, 8);
        let ys: Vec<f64> = set.horizontal.iter().map(|l| l.rho).collect();
        assert_eq!(ys, vec![100.0, 200.0]);
        assert_eq!(set.overflow.len(), 1);
        assert_eq!(set.overflow[0].votes, 5);
    }

    #[test]
    fn intersect_examples() {
        let p = intersect(&PolarLine::new(50.0, 0.0, 0), &PolarLine::new(30.0, PI / 2.0, 0)).unwrap();
        assert!((p.x - 50.0).abs() < 1e-12 && (p.y - 30.0).abs() < 1e-12);
        assert!(intersect(&PolarLine::new(50.0, 0.0, 0), &PolarLine::new(80.0, 0.0, 0)).is_none());

        let a = PolarLine::new(0.0, PI / 4.0, 0);
        let b = PolarLine::new(10.0, 3.0 * PI / 4.0, 0);
        let p = intersect(&a, &b).unwrap();
        // Cramer's rule by hand: det = sin(pi/2) = 1
        let half = 10.0 * (PI / 4.0).sin();
        assert!((p.x + half).abs() < 1e-9 && (p.y - half).abs() < 1e-9);
        assert!((p.x + 7.0710678).abs() < 1e-6);
        assert!(a.residual(&p).abs() < 1e-9 && b.residual(&p).abs() < 1e-9);
    }

    #[test]
    fn refine_exact_column() {
        let mut m = BinaryMask::new(120, 220);
        for y in 0..200 {
            m.set(50, y, true);
        }
        let r = refine_line(&m, &PolarLine::new(51.0, 0.01, 7), 3.0);
        assert_eq!((r.rho, r.theta, r.votes), (50.0, 0.0, 7));
    }

    #[test]
    fn refine_needs_ten_pixels() {
        let mut m = BinaryMask::new(100, 100);
        for y in 0..9 {
            m.set(50, y, true);
        }
        let input = PolarLine::new(50.5, 0.0, 3);
        assert_eq!(refine_line(&m, &input, 3.0), input);
    }

    #[test]
    fn through_two_points() {
        let l = PolarLine::through(&Point2::new(0.0, 10.0), &Point2::new(100.0, 10.0), 0);
        assert!((l.theta - PI / 2.0).abs() < 1e-12);
        assert!((l.rho - 10.0).abs() < 1e-12);
    }
}
