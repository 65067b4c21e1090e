//! Tennis court line detection and court-to-image homography calibration.
//!
//! Geometry is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix it to `f64`, which is what the pipeline uses.

// `!(x > 0)` is used on purpose to reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod calibrate;
pub mod config;
pub mod court_model;
pub mod eval;
pub mod filtering;
mod linalg;
pub mod line_detect;
pub mod preprocess;
mod scalar;
pub mod scoring;

pub use scalar::{Point2, Scalar};

pub type Point = Point2<f64>;
pub type Homography = calibrate::HomographyMatrix<f64>;
pub type Homography32 = calibrate::HomographyMatrix<f32>;
pub type Line = line_detect::PolarLine<f64>;
pub type Line32 = line_detect::PolarLine<f32>;
pub type Template = court_model::CourtTemplate<f64>;
pub type Dimensions = court_model::CourtDimensions<f64>;
pub type Scene = eval::SyntheticScene;
