use serde::{Deserialize, Serialize};

use super::CalibrateError;
use crate::court_model::SegmentId;
use crate::linalg::{self, Mat3};
use crate::scalar::{Point2, Scalar};

/// Points with `|w|` at or below this are treated as lying at infinity.
pub const W_EPSILON: f64 = 1e-9;

/// Projective map from model coordinates (meters) to image pixels.
///
/// Always stored with unit Frobenius norm and the sign fixed so that
/// `h[2][2] >= 0` (or, if `h[2][2] == 0`, the first nonzero entry of the last
/// row is positive). Two matrices that differ by a nonzero scale therefore
/// compare equal after construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomographyMatrix<T = f64> {
    h: Mat3<T>,
}

impl<T: Scalar> HomographyMatrix<T> {
    /// Normalizes `m`. Returns `None` for a zero or non-finite matrix.
    pub fn new(m: Mat3<T>) -> Option<Self> {
        let norm = m.iter().flatten().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
        if !norm.is_finite() || norm == T::zero() {
            return None;
        }
        let sign_ref = if m[2][2] != T::zero() {
            m[2][2]
        } else {
            m[2].iter().copied().find(|v| *v != T::zero()).unwrap_or(T::one())
        };
        let scale = if sign_ref < T::zero() { -norm } else { norm };
        let mut h = m;
        for row in h.iter_mut() {
            for v in row.iter_mut() {
                *v = *v / scale;
            }
        }
        Some(Self { h })
    }

    pub fn identity() -> Self {
        Self::new([
            [T::one(), T::zero(), T::zero()],
            [T::zero(), T::one(), T::zero()],
            [T::zero(), T::zero(), T::one()],
        ])
        .expect("identity is finite")
    }

    pub fn from_row_major(v: &[T; 9]) -> Option<Self> {
        Self::new([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn matrix(&self) -> &Mat3<T> {
        &self.h
    }

    pub fn to_row_major(&self) -> [T; 9] {
        let h = &self.h;
        [
            h[0][0], h[0][1], h[0][2], h[1][0], h[1][1], h[1][2], h[2][0], h[2][1], h[2][2],
        ]
    }

    /// `(u, v, w) = H (x, y, 1)`.
    #[inline]
    pub fn apply(&self, p: &Point2<T>) -> [T; 3] {
        let h = &self.h;
        [
            h[0][0] * p.x + h[0][1] * p.y + h[0][2],
            h[1][0] * p.x + h[1][1] * p.y + h[1][2],
            h[2][0] * p.x + h[2][1] * p.y + h[2][2],
        ]
    }

    /// Denominator of the projection of `p`.
    #[inline]
    pub fn w(&self, p: &Point2<T>) -> T {
        self.h[2][0] * p.x + self.h[2][1] * p.y + self.h[2][2]
    }

    /// Image of `p`, or `None` for a point at infinity.
    pub fn project(&self, p: &Point2<T>) -> Option<Point2<T>> {
        let [u, v, w] = self.apply(p);
        if w.abs() > T::lit(W_EPSILON) {
            Some(Point2::new(u / w, v / w))
        } else {
            None
        }
    }

    /// `self` followed by `other`, i.e. `other * self`.
    pub fn then(&self, other: &Self) -> Option<Self> {
        Self::new(linalg::mat3_mul(&other.h, &self.h))
    }

    /// `self` followed by an image-plane translation.
    pub fn translated(&self, dx: T, dy: T) -> Self {
        let t = [
            [T::one(), T::zero(), dx],
            [T::zero(), T::one(), dy],
            [T::zero(), T::zero(), T::one()],
        ];
        Self::new(linalg::mat3_mul(&t, &self.h)).expect("translation keeps matrix finite")
    }

    pub fn inverse(&self) -> Option<Self> {
        linalg::mat3_inverse(&self.h).and_then(Self::new)
    }

    /// Frobenius distance to `other`, which is sign-normalized the same way.
    pub fn frobenius_distance(&self, other: &Self) -> T {
        self.h
            .iter()
            .flatten()
            .zip(other.h.iter().flatten())
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().flatten().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> HomographyMatrix<U> {
        let mut m = [[U::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = U::lit(self.h[i][j].to_f64_lossy());
            }
        }
        HomographyMatrix::new(m).expect("cast of a valid homography")
    }
}

impl Serialize for HomographyMatrix<f64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for HomographyMatrix<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[f64; 9]>::deserialize(d)?;
        Self::from_row_major(&v).ok_or_else(|| serde::de::Error::custom("homography must be finite and nonzero"))
    }
}

/// Which line pairs produced a correspondence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Provenance {
    /// Model transverse pair, far then near.
    pub model_transverse: (SegmentId, SegmentId),
    /// Model longitudinal pair, left then right.
    pub model_longitudinal: (SegmentId, SegmentId),
    /// Indices into the sorted detected horizontal lines, top then bottom.
    pub detected_horizontal: (usize, usize),
    /// Indices into the sorted detected vertical lines, left then right.
    pub detected_vertical: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Correspondence<T = f64> {
    pub model_pts: Vec<Point2<T>>,
    pub image_pts: Vec<Point2<T>>,
    pub provenance: Option<Provenance>,
}

impl<T: Scalar> Correspondence<T> {
    pub fn new(model_pts: Vec<Point2<T>>, image_pts: Vec<Point2<T>>) -> Self {
        Self {
            model_pts,
            image_pts,
            provenance: None,
        }
    }
}

/// Similarity transform taking `pts` to centroid 0 and RMS radius sqrt(2).
fn normalizing_transform<T: Scalar>(pts: &[Point2<T>]) -> Option<Mat3<T>> {
    let n = T::lit(pts.len() as f64);
    let cx = pts.iter().fold(T::zero(), |a, p| a + p.x) / n;
    let cy = pts.iter().fold(T::zero(), |a, p| a + p.y) / n;
    let ms = pts
        .iter()
        .fold(T::zero(), |a, p| a + (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy))
        / n;
    let rms = ms.sqrt();
    if !(rms > T::zero()) || !rms.is_finite() {
        return None;
    }
    let s = T::SQRT_2() / rms;
    Some([
        [s, T::zero(), -s * cx],
        [T::zero(), s, -s * cy],
        [T::zero(), T::zero(), T::one()],
    ])
}

fn transform<T: Scalar>(m: &Mat3<T>, p: &Point2<T>) -> Point2<T> {
    // affine only
    Point2::new(
        m[0][0] * p.x + m[0][1] * p.y + m[0][2],
        m[1][0] * p.x + m[1][1] * p.y + m[1][2],
    )
}

/// Hartley-normalized direct linear transform.
///
/// With exactly four correspondences the result interpolates them; with more
/// it is the algebraic least-squares fit.
pub fn dlt_homography<T: Scalar>(corr: &Correspondence<T>) -> Result<HomographyMatrix<T>, CalibrateError> {
    let n = corr.model_pts.len();
    if corr.image_pts.len() != n {
        return Err(CalibrateError::MismatchedLengths {
            model: n,
            image: corr.image_pts.len(),
        });
    }
    if n < 4 {
        return Err(CalibrateError::NotEnoughPoints(n));
    }
    if corr.model_pts.iter().chain(&corr.image_pts).any(|p| !p.is_finite()) {
        return Err(CalibrateError::DegenerateConfiguration);
    }

    let t_model = normalizing_transform(&corr.model_pts).ok_or(CalibrateError::DegenerateConfiguration)?;
    let t_image = normalizing_transform(&corr.image_pts).ok_or(CalibrateError::DegenerateConfiguration)?;

    let mut a = Vec::with_capacity(2 * n * 9);
    for (m, i) in corr.model_pts.iter().zip(&corr.image_pts) {
        let p = transform(&t_model, m);
        let q = transform(&t_image, i);
        let (x, y, u, v) = (p.x, p.y, q.x, q.y);
        let (z, o) = (T::zero(), T::one());
        a.extend_from_slice(&[-x, -y, -o, z, z, z, u * x, u * y, u]);
        a.extend_from_slice(&[z, z, z, -x, -y, -o, v * x, v * y, v]);
    }

    let (sv, vecs) = linalg::right_singular_vectors(&a, 2 * n, 9);
    // One null direction is expected; a second (near-)zero singular value
    // means the points do not pin down a unique homography.
    let rank_tol = T::epsilon().sqrt() * T::lit(0.1);
    if !(sv[0] > T::zero()) || sv[7] <= rank_tol * sv[0] {
        return Err(CalibrateError::DegenerateConfiguration);
    }
    let h = &vecs[8];
    let hn = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], h[8]]];

    let t_image_inv = linalg::mat3_inverse(&t_image).ok_or(CalibrateError::DegenerateConfiguration)?;
    let full = linalg::mat3_mul(&t_image_inv, &linalg::mat3_mul(&hn, &t_model));
    let hm = HomographyMatrix::new(full).ok_or(CalibrateError::DegenerateConfiguration)?;
    if linalg::mat3_det(hm.matrix()).abs() <= T::epsilon() * T::epsilon() {
        return Err(CalibrateError::DegenerateConfiguration);
    }
    Ok(hm)
}

/// Applies `h` to a model point; `None` for points at infinity.
pub fn project<T: Scalar>(h: &HomographyMatrix<T>, p: &Point2<T>) -> Option<Point2<T>> {
    h.project(p)
}
