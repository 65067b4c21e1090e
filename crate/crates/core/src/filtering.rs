//! Frame to line-candidate mask conversion.
//!
//! Two filters are provided: the court-color filter, which marks non-surface
//! pixels that sit next to enough surface pixels, and the older luminance
//! threshold used as a baseline.

use image::{GrayImage, Luma, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("every sampled pixel was crop-masked black after {attempts} attempts")]
    AllMasked { attempts: usize },
    #[error("invalid filter parameter: {0}")]
    InvalidParameter(String),
}

/// Crop masking writes this exact color; it never counts as court or line.
pub const MASKED: [u8; 3] = [0, 0, 0];

#[inline]
pub fn is_masked(px: [u8; 3]) -> bool {
    px == MASKED
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourtColor {
    pub rgb: [u8; 3],
    /// Chebyshev match radius.
    pub tolerance: u8,
}

/// Row-major boolean image; `true` marks a candidate line pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width as usize * height as usize);
        Self { width, height, bits }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Coordinates of every `true` pixel in row-major order.
    pub fn set_pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    /// 8-bit rendering, 255 for `true`.
    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }
}

/// Sampled-mode court color estimate.
///
/// Draws pixel positions from a `ChaCha8Rng` seeded with `seed`, `x` then `y`
/// per draw via `random_range(0..width)` / `random_range(0..height)`. Masked
/// black pixels are redrawn, up to `10 * n_samples` draws in total. Each
/// accepted sample votes for the bin `channel / bin_width` per channel; the
/// bin with the most votes wins (ties go to the lexicographically smallest
/// `(r, g, b)` bin) and the returned color is the rounded mean of its samples.
pub fn sample_dominant_color(
    image: &RgbImage,
    n_samples: usize,
    seed: u64,
    bin_width: u8,
    tolerance: u8,
) -> Result<CourtColor, FilterError> {
    if n_samples == 0 {
        return Err(FilterError::InvalidParameter("n_samples must be >= 1".into()));
    }
    if bin_width == 0 {
        return Err(FilterError::InvalidParameter("bin_width must be >= 1".into()));
    }
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(FilterError::InvalidParameter("empty image".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = 10 * n_samples;
    let mut samples: Vec<[u8; 3]> = Vec::with_capacity(n_samples);
    let mut attempts = 0;
    while samples.len() < n_samples && attempts < max_attempts {
        attempts += 1;
        let x = rng.random_range(0..w);
        let y = rng.random_range(0..h);
        let px = image.get_pixel(x, y).0;
        if !is_masked(px) {
            samples.push(px);
        }
    }
    if samples.is_empty() {
        return Err(FilterError::AllMasked { attempts });
    }

    let bin_of = |p: &[u8; 3]| [p[0] / bin_width, p[1] / bin_width, p[2] / bin_width];
    let mut counts: std::collections::BTreeMap<[u8; 3], usize> = Default::default();
    for s in &samples {
        *counts.entry(bin_of(s)).or_default() += 1;
    }
    // BTreeMap iterates in ascending bin order, so the first maximum wins ties
    let (winner, _) = counts
        .iter()
        .fold(None::<(&[u8; 3], usize)>, |best, (bin, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((bin, c)),
        })
        .expect("at least one sample");

    let members: Vec<&[u8; 3]> = samples.iter().filter(|s| bin_of(s) == *winner).collect();
    let n = members.len() as f64;
    let mean = |c: usize| (members.iter().map(|s| s[c] as f64).sum::<f64>() / n).round() as u8;
    Ok(CourtColor {
        rgb: [mean(0), mean(1), mean(2)],
        tolerance,
    })
}

/// Chebyshev-distance color match.
#[inline]
pub fn matches_court(pixel: [u8; 3], court: &CourtColor) -> bool {
    pixel
        .iter()
        .zip(court.rgb.iter())
        .all(|(&p, &c)| p.abs_diff(c) <= court.tolerance)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowRule {
    /// Odd side length of the square neighbourhood.
    pub size: u32,
    /// Minimum number of court-colored pixels in the neighbourhood.
    pub min_court: u32,
    pub include_center: bool,
}

impl Default for WindowRule {
    fn default() -> Self {
        Self {
            size: 7,
            min_court: 4,
            include_center: false,
        }
    }
}

/// Marks pixel `A` when at least `rule.min_court` pixels of the window around
/// it (clipped at the border) match the court color and `A` itself does not.
/// Crop-masked black pixels never match and are never marked.
pub fn court_color_filter(image: &RgbImage, court: &CourtColor, rule: &WindowRule) -> BinaryMask {
    let (w, h) = image.dimensions();
    let (wu, hu) = (w as usize, h as usize);
    let matches = |px: [u8; 3]| !is_masked(px) && matches_court(px, court);

    // summed-area table of matches, (w+1) x (h+1)
    let stride = wu + 1;
    let mut sat = vec![0u32; stride * (hu + 1)];
    for y in 0..hu {
        let mut row = 0u32;
        for x in 0..wu {
            row += matches(image.get_pixel(x as u32, y as u32).0) as u32;
            sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
        }
    }

    let r = (rule.size / 2) as usize;
    let mut bits = vec![false; wu * hu];
    bits.par_chunks_mut(wu.max(1)).enumerate().for_each(|(y, out)| {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(hu));
        for (x, bit) in out.iter_mut().enumerate() {
            let px = image.get_pixel(x as u32, y as u32).0;
            if is_masked(px) || matches_court(px, court) {
                continue;
            }
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(wu));
            // the center does not match, so including it adds nothing
            let count = sat[y1 * stride + x1] + sat[y0 * stride + x0] - sat[y0 * stride + x1] - sat[y1 * stride + x0];
            *bit = count >= rule.min_court;
        }
    });
    BinaryMask::from_bits(w, h, bits)
}

/// Rec. 601 luma, rounded.
#[inline]
pub fn luminance(px: [u8; 3]) -> u8 {
    (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64).round() as u8
}

/// Baseline filter: marks pixels whose luminance is strictly above `threshold`.
pub fn threshold_filter(image: &RgbImage, threshold: u8) -> BinaryMask {
    let (w, h) = image.dimensions();
    let bits = image.pixels().map(|p| luminance(p.0) > threshold).collect();
    BinaryMask::from_bits(w, h, bits)
}
