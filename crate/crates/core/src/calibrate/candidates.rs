use super::{CalibrateError, Correspondence, HomographyMatrix, Provenance};
use crate::config::PlausibilityConfig;
use crate::court_model::{CourtDimensions, CourtSegment, NearHalf};
use crate::line_detect::{intersect, LineSet};
use crate::scalar::{turn, Point2, Scalar};

fn ordered_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> + Clone {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Number of correspondences [`enumerate_candidates`] yields when no line
/// pair is parallel.
pub fn candidate_count(n_horizontal: usize, n_vertical: usize, n_transverse: usize, n_longitudinal: usize) -> usize {
    let c2 = |n: usize| n * n.saturating_sub(1) / 2;
    c2(n_horizontal) * c2(n_vertical) * c2(n_transverse) * c2(n_longitudinal)
}

/// Every order-preserving assignment of detected line pairs to near-half
/// model line pairs, as 4-point correspondences.
///
/// Detected horizontal pairs (top, bottom) map to model transverse pairs
/// (far, near); detected vertical pairs (left, right) map to model
/// longitudinal pairs (left, right). The loop order is detected horizontal
/// pair, detected vertical pair, model transverse pair, model longitudinal
/// pair, each in ascending index order. Assignments whose image lines do not
/// intersect are skipped.
pub fn enumerate_candidates<'a, T: Scalar>(
    lines: &'a LineSet<T>,
    near: &'a NearHalf<T>,
) -> Result<impl Iterator<Item = Correspondence<T>> + 'a, CalibrateError> {
    if lines.horizontal.len() < 2 || lines.vertical.len() < 2 {
        return Err(CalibrateError::InsufficientLines {
            horizontal: lines.horizontal.len(),
            vertical: lines.vertical.len(),
        });
    }
    let nt = near.transverse.len();
    let nl = near.longitudinal.len();
    let iter = ordered_pairs(lines.horizontal.len()).flat_map(move |(hi, hj)| {
        ordered_pairs(lines.vertical.len()).flat_map(move |(vk, vl)| {
            let (top, bottom) = (&lines.horizontal[hi], &lines.horizontal[hj]);
            let (left, right) = (&lines.vertical[vk], &lines.vertical[vl]);
            let image = [
                intersect(top, left),
                intersect(top, right),
                intersect(bottom, right),
                intersect(bottom, left),
            ];
            ordered_pairs(nt).flat_map(move |(ta, tb)| {
                ordered_pairs(nl).filter_map(move |(la, lb)| {
                    let image_pts: Vec<Point2<T>> = image.iter().copied().collect::<Option<_>>()?;
                    let (far, near_t) = (&near.transverse[ta], &near.transverse[tb]);
                    let (lft, rgt) = (&near.longitudinal[la], &near.longitudinal[lb]);
                    let model_pts = vec![
                        corner(far, lft),
                        corner(far, rgt),
                        corner(near_t, rgt),
                        corner(near_t, lft),
                    ];
                    Some(Correspondence {
                        model_pts,
                        image_pts,
                        provenance: Some(Provenance {
                            model_transverse: (far.id, near_t.id),
                            model_longitudinal: (lft.id, rgt.id),
                            detected_horizontal: (hi, hj),
                            detected_vertical: (vk, vl),
                        }),
                    })
                })
            })
        })
    });
    Ok(iter)
}

fn corner<T: Scalar>(transverse: &CourtSegment<T>, longitudinal: &CourtSegment<T>) -> Point2<T> {
    Point2::new(longitudinal.offset(), transverse.offset())
}

/// Geometric sanity checks on a model-to-frame homography:
///
/// - the four near-half corners project with a consistent `w` sign,
/// - their images lie in the frame scaled by `frame_expansion` about its
///   center,
/// - the quadrilateral net-left, net-right, baseline-right, baseline-left is
///   convex and simple,
/// - the baseline sits lower in the image than the net,
/// - the projected net width is at least `min_net_width_fraction` of the
///   frame width.
pub fn is_plausible<T: Scalar>(
    h: &HomographyMatrix<T>,
    (width, height): (u32, u32),
    dims: &CourtDimensions<T>,
    bounds: &PlausibilityConfig,
) -> bool {
    let two = T::lit(2.0);
    let (hw, hl) = (dims.doubles_width / two, dims.length / two);
    let corners = [
        Point2::new(-hw, T::zero()),
        Point2::new(hw, T::zero()),
        Point2::new(hw, hl),
        Point2::new(-hw, hl),
    ];

    let ws = corners.map(|c| h.w(&c));
    let eps = T::lit(super::homography::W_EPSILON);
    let all_pos = ws.iter().all(|&w| w > eps);
    let all_neg = ws.iter().all(|&w| w < -eps);
    if !(all_pos || all_neg) {
        return false;
    }

    let mut img = [Point2::new(T::zero(), T::zero()); 4];
    for (dst, c) in img.iter_mut().zip(&corners) {
        match h.project(c) {
            Some(p) if p.is_finite() => *dst = p,
            _ => return false,
        }
    }

    let (w, hgt) = (T::lit(width as f64), T::lit(height as f64));
    let e = T::lit(bounds.frame_expansion);
    let (cx, cy) = (w / two, hgt / two);
    let (ex, ey) = (e * w / two, e * hgt / two);
    if img.iter().any(|p| (p.x - cx).abs() > ex || (p.y - cy).abs() > ey) {
        return false;
    }

    let turns = [
        turn(&img[0], &img[1], &img[2]),
        turn(&img[1], &img[2], &img[3]),
        turn(&img[2], &img[3], &img[0]),
        turn(&img[3], &img[0], &img[1]),
    ];
    let convex = turns.iter().all(|&t| t > T::zero()) || turns.iter().all(|&t| t < T::zero());
    if !convex {
        return false;
    }

    let net_y = (img[0].y + img[1].y) / two;
    let base_y = (img[2].y + img[3].y) / two;
    if base_y <= net_y {
        return false;
    }

    img[0].distance(&img[1]) >= T::lit(bounds.min_net_width_fraction) * w
}
