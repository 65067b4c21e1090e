//! Reference tennis court diagram in metric model coordinates.
//!
//! Frame: origin at the center of the net line, `x` across the court
//! (positive to the right as seen from the near baseline), `y` along the court
//! (positive toward the near, camera-side baseline). The near half is
//! therefore `y >= 0`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Point2, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum CourtModelError {
    #[error("invalid court dimensions: {0}")]
    InvalidDimensions(String),
}

/// Court measurements in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CourtDimensions<T = f64> {
    /// Baseline to baseline.
    pub length: T,
    pub doubles_width: T,
    pub singles_width: T,
    /// Net to service line.
    pub service_line_dist: T,
}

impl<T: Scalar> Default for CourtDimensions<T> {
    /// ITF standard court.
    fn default() -> Self {
        Self {
            length: T::lit(23.77),
            doubles_width: T::lit(10.97),
            singles_width: T::lit(8.23),
            service_line_dist: T::lit(6.40),
        }
    }
}

impl<T: Scalar> CourtDimensions<T> {
    pub fn validate(&self) -> Result<(), CourtModelError> {
        let all_finite = [
            self.length,
            self.doubles_width,
            self.singles_width,
            self.service_line_dist,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(CourtModelError::InvalidDimensions("non-finite value".into()));
        }
        let two = T::lit(2.0);
        if !(self.service_line_dist > T::zero() && self.length > two * self.service_line_dist) {
            return Err(CourtModelError::InvalidDimensions(
                "require length > 2 * service_line_dist > 0".into(),
            ));
        }
        if !(self.singles_width > T::zero() && self.doubles_width > self.singles_width) {
            return Err(CourtModelError::InvalidDimensions(
                "require doubles_width > singles_width > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> CourtDimensions<U> {
        CourtDimensions {
            length: U::lit(self.length.to_f64_lossy()),
            doubles_width: U::lit(self.doubles_width.to_f64_lossy()),
            singles_width: U::lit(self.singles_width.to_f64_lossy()),
            service_line_dist: U::lit(self.service_line_dist.to_f64_lossy()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentId {
    FarBaseline,
    FarService,
    Net,
    NearService,
    NearBaseline,
    DoublesLeft,
    SinglesLeft,
    CenterService,
    SinglesRight,
    DoublesRight,
}

impl SegmentId {
    /// Transverse lines ordered far to near.
    pub const TRANSVERSE: [SegmentId; 5] = [
        SegmentId::FarBaseline,
        SegmentId::FarService,
        SegmentId::Net,
        SegmentId::NearService,
        SegmentId::NearBaseline,
    ];

    /// Longitudinal lines ordered left to right.
    pub const LONGITUDINAL: [SegmentId; 5] = [
        SegmentId::DoublesLeft,
        SegmentId::SinglesLeft,
        SegmentId::CenterService,
        SegmentId::SinglesRight,
        SegmentId::DoublesRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SegmentId::FarBaseline => "far_baseline",
            SegmentId::FarService => "far_service",
            SegmentId::Net => "net",
            SegmentId::NearService => "near_service",
            SegmentId::NearBaseline => "near_baseline",
            SegmentId::DoublesLeft => "doubles_left",
            SegmentId::SinglesLeft => "singles_left",
            SegmentId::CenterService => "center_service",
            SegmentId::SinglesRight => "singles_right",
            SegmentId::DoublesRight => "doubles_right",
        }
    }

    pub fn axis(self) -> AxisClass {
        if Self::TRANSVERSE.contains(&self) {
            AxisClass::Transverse
        } else {
            AxisClass::Longitudinal
        }
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisClass {
    /// Constant `y`, runs across the court.
    Transverse,
    /// Constant `x`, runs along the court.
    Longitudinal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CourtSegment<T = f64> {
    pub id: SegmentId,
    pub p0: Point2<T>,
    pub p1: Point2<T>,
    pub axis_class: AxisClass,
}

impl<T: Scalar> CourtSegment<T> {
    /// The constant coordinate: `y` for transverse, `x` for longitudinal.
    pub fn offset(&self) -> T {
        match self.axis_class {
            AxisClass::Transverse => self.p0.y,
            AxisClass::Longitudinal => self.p0.x,
        }
    }

    /// Whether `p` lies on the segment within `tol`.
    pub fn contains(&self, p: &Point2<T>, tol: T) -> bool {
        let (lo_x, hi_x) = (self.p0.x.min(self.p1.x), self.p0.x.max(self.p1.x));
        let (lo_y, hi_y) = (self.p0.y.min(self.p1.y), self.p0.y.max(self.p1.y));
        p.x >= lo_x - tol && p.x <= hi_x + tol && p.y >= lo_y - tol && p.y <= hi_y + tol
    }
}

/// A named template point where two segments meet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint<T = f64> {
    pub name: String,
    pub transverse: SegmentId,
    pub longitudinal: SegmentId,
    pub point: Point2<T>,
}

pub fn keypoint_name(transverse: SegmentId, longitudinal: SegmentId) -> String {
    format!("{}_x_{}", transverse.name(), longitudinal.name())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CourtTemplate<T = f64> {
    pub dims: CourtDimensions<T>,
    pub segments: Vec<CourtSegment<T>>,
    pub keypoints: Vec<Keypoint<T>>,
}

impl<T: Scalar> CourtTemplate<T> {
    pub fn segment(&self, id: SegmentId) -> &CourtSegment<T> {
        self.segments
            .iter()
            .find(|s| s.id == id)
            .expect("template holds every segment id")
    }

    pub fn keypoint(&self, name: &str) -> Option<&Keypoint<T>> {
        self.keypoints.iter().find(|k| k.name == name)
    }
}

impl<T: Scalar + Serialize> CourtTemplate<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("template serializes")
    }
}

/// Builds the full 10-segment, 19-keypoint diagram.
pub fn standard_template<T: Scalar>(dims: CourtDimensions<T>) -> Result<CourtTemplate<T>, CourtModelError> {
    dims.validate()?;
    let half_len = dims.length / T::lit(2.0);
    let half_dbl = dims.doubles_width / T::lit(2.0);
    let half_sgl = dims.singles_width / T::lit(2.0);
    let svc = dims.service_line_dist;

    let transverse = |id, y: T, half: T| CourtSegment {
        id,
        p0: Point2::new(-half, y),
        p1: Point2::new(half, y),
        axis_class: AxisClass::Transverse,
    };
    let longitudinal = |id, x: T, half: T| CourtSegment {
        id,
        p0: Point2::new(x, -half),
        p1: Point2::new(x, half),
        axis_class: AxisClass::Longitudinal,
    };

    let segments = vec![
        transverse(SegmentId::FarBaseline, -half_len, half_dbl),
        transverse(SegmentId::FarService, -svc, half_sgl),
        transverse(SegmentId::Net, T::zero(), half_dbl),
        transverse(SegmentId::NearService, svc, half_sgl),
        transverse(SegmentId::NearBaseline, half_len, half_dbl),
        longitudinal(SegmentId::DoublesLeft, -half_dbl, half_len),
        longitudinal(SegmentId::SinglesLeft, -half_sgl, half_len),
        longitudinal(SegmentId::CenterService, T::zero(), svc),
        longitudinal(SegmentId::SinglesRight, half_sgl, half_len),
        longitudinal(SegmentId::DoublesRight, half_dbl, half_len),
    ];

    let tol = T::lit(1e-9);
    let mut keypoints = Vec::with_capacity(19);
    for t in segments.iter().filter(|s| s.axis_class == AxisClass::Transverse) {
        for l in segments.iter().filter(|s| s.axis_class == AxisClass::Longitudinal) {
            let p = Point2::new(l.offset(), t.offset());
            if t.contains(&p, tol) && l.contains(&p, tol) {
                keypoints.push(Keypoint {
                    name: keypoint_name(t.id, l.id),
                    transverse: t.id,
                    longitudinal: l.id,
                    point: p,
                });
            }
        }
    }

    Ok(CourtTemplate {
        dims,
        segments,
        keypoints,
    })
}

/// The camera-side half of the diagram used for correspondence search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NearHalf<T = f64> {
    /// Ordered far to near: net, near service line, near baseline.
    pub transverse: Vec<CourtSegment<T>>,
    /// Ordered left to right, clipped to `y in [0, length / 2]`.
    pub longitudinal: Vec<CourtSegment<T>>,
    pub keypoints: Vec<Keypoint<T>>,
}

pub fn near_half<T: Scalar>(template: &CourtTemplate<T>) -> NearHalf<T> {
    near_half_with(template, true)
}

/// Like [`near_half`], optionally dropping the net from the transverse set.
pub fn near_half_with<T: Scalar>(template: &CourtTemplate<T>, include_net: bool) -> NearHalf<T> {
    let transverse = [SegmentId::Net, SegmentId::NearService, SegmentId::NearBaseline]
        .into_iter()
        .filter(|id| include_net || *id != SegmentId::Net)
        .map(|id| *template.segment(id))
        .collect();
    let longitudinal = SegmentId::LONGITUDINAL
        .into_iter()
        .map(|id| {
            let mut s = *template.segment(id);
            let (lo, hi) = (s.p0.y.min(s.p1.y), s.p0.y.max(s.p1.y));
            s.p0.y = lo.max(T::zero());
            s.p1.y = hi;
            s
        })
        .collect();
    let keypoints = template
        .keypoints
        .iter()
        .filter(|k| k.point.y >= T::zero())
        .cloned()
        .collect();
    NearHalf {
        transverse,
        longitudinal,
        keypoints,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tpl() -> CourtTemplate<f64> {
        standard_template(CourtDimensions::default()).unwrap()
    }

    #[test]
    fn corner_and_service_keypoints() {
        let t = tpl();
        let corner = t.keypoint("near_baseline_x_doubles_left").unwrap();
        assert_eq!(corner.point, Point2::new(-5.485, 11.885));
        let t_point = t.keypoint("near_service_x_center_service").unwrap();
        assert_eq!(t_point.point, Point2::new(0.0, 6.40));
    }

    #[test]
    fn keypoint_count_matches_brute_force_pairs() {
        let t = tpl();
        // every pair of segments, intersect as infinite lines, keep in-extent hits
        let mut found: Vec<(f64, f64)> = Vec::new();
        for (i, a) in t.segments.iter().enumerate() {
            for b in &t.segments[i + 1..] {
                let (d1x, d1y) = (a.p1.x - a.p0.x, a.p1.y - a.p0.y);
                let (d2x, d2y) = (b.p1.x - b.p0.x, b.p1.y - b.p0.y);
                let det = d1x * (-d2y) - d1y * (-d2x);
                if det.abs() < 1e-12 {
                    continue;
                }
                let (rx, ry) = (b.p0.x - a.p0.x, b.p0.y - a.p0.y);
                let s = (rx * (-d2y) - ry * (-d2x)) / det;
                let u = (d1x * ry - d1y * rx) / det;
                let eps = 1e-9;
                if (-eps..=1.0 + eps).contains(&s) && (-eps..=1.0 + eps).contains(&u) {
                    let p = (a.p0.x + s * d1x, a.p0.y + s * d1y);
                    if !found
                        .iter()
                        .any(|q| (q.0 - p.0).abs() < 1e-9 && (q.1 - p.1).abs() < 1e-9)
                    {
                        found.push(p);
                    }
                }
            }
        }
        assert_eq!(found.len(), 19);
        assert_eq!(t.keypoints.len(), 19);
        for (x, y) in found {
            assert!(t
                .keypoints
                .iter()
                .any(|k| (k.point.x - x).abs() < 1e-9 && (k.point.y - y).abs() < 1e-9));
        }
    }

    #[test]
    fn each_keypoint_lies_on_exactly_two_segments() {
        let t = tpl();
        for k in &t.keypoints {
            let n = t.segments.iter().filter(|s| s.contains(&k.point, 1e-9)).count();
            assert_eq!(n, 2, "{}", k.name);
        }
    }

    #[test]
    fn template_is_mirror_symmetric() {
        let t = tpl();
        let has = |x: f64, y: f64| {
            t.keypoints
                .iter()
                .any(|k| (k.point.x - x).abs() < 1e-12 && (k.point.y - y).abs() < 1e-12)
        };
        for k in &t.keypoints {
            assert!(has(-k.point.x, k.point.y), "x mirror of {}", k.name);
            assert!(has(k.point.x, -k.point.y), "y mirror of {}", k.name);
        }
    }

    #[test]
    fn near_half_subset() {
        let t = tpl();
        let nh = near_half(&t);
        let ids: Vec<_> = nh.transverse.iter().map(|s| s.id).collect();
        assert_eq!(
            ids,
            vec![SegmentId::Net, SegmentId::NearService, SegmentId::NearBaseline]
        );
        assert_eq!(nh.longitudinal.len(), 5);
        assert_eq!(nh.keypoints.len(), 12);
        let dl = nh.longitudinal[0];
        assert_eq!(dl.id, SegmentId::DoublesLeft);
        assert_eq!(dl.p0, Point2::new(-5.485, 0.0));
        assert_eq!(dl.p1, Point2::new(-5.485, 11.885));
        let center = nh.longitudinal[2];
        assert_eq!((center.p0.y, center.p1.y), (0.0, 6.40));

        let no_net = near_half_with(&t, false);
        assert_eq!(no_net.transverse.len(), 2);
    }

    #[test]
    fn near_half_and_mirror_cover_all_keypoints() {
        let t = tpl();
        let nh = near_half(&t);
        for k in &t.keypoints {
            let covered = nh
                .keypoints
                .iter()
                .any(|n| n.point.x == k.point.x && (n.point.y == k.point.y || n.point.y == -k.point.y));
            assert!(covered, "{}", k.name);
        }
    }

    #[test]
    fn invalid_dimensions_rejected() {
        let base = CourtDimensions::<f64>::default();
        assert!(standard_template(CourtDimensions {
            singles_width: 12.0,
            ..base
        })
        .is_err());
        assert!(standard_template(CourtDimensions {
            service_line_dist: 12.0,
            ..base
        })
        .is_err());
        assert!(standard_template(CourtDimensions {
            length: f64::NAN,
            ..base
        })
        .is_err());
    }

    #[test]
    fn f32_template_builds() {
        let t = standard_template(CourtDimensions::<f32>::default()).unwrap();
        assert_eq!(t.keypoints.len(), 19);
    }

    #[test]
    fn template_json_has_segments_and_keypoints() {
        let v: serde_json::Value = serde_json::from_str(&tpl().to_json()).unwrap();
        assert_eq!(v["segments"].as_array().unwrap().len(), 10);
        assert_eq!(v["keypoints"].as_array().unwrap().len(), 19);
    }
}
