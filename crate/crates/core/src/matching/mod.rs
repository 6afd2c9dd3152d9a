//! Similarity scoring between fingerprint images: patch-wise MSSIM,
//! keypoint matching and their equal-weight fusion.

pub mod brute_force;
pub mod keypoints;
pub mod ssim;

pub use brute_force::brute_force_match;
pub use keypoints::{extract_keypoints, Keypoint, KeypointKind};
pub use ssim::{mssim, ssim_patch};

use crate::error::Result;
use crate::image::Image;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchScore {
    pub mssim: f64,
    pub keypoint_score: f64,
    pub fused: f64,
}

impl MatchScore {
    /// `fused = 0.5 * clamp(mssim, 0, 1) + 0.5 * keypoint_score`.
    pub fn from_parts(mssim: f64, keypoint_score: f64) -> Self {
        Self {
            mssim,
            keypoint_score,
            fused: 0.5 * mssim.clamp(0.0, 1.0) + 0.5 * keypoint_score,
        }
    }
}

/// An image with its keypoints extracted once, for repeated scoring.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub image: Image<T>,
    pub keypoints: Vec<Keypoint>,
}

impl<T: Scalar> Prepared<T> {
    pub fn new(image: Image<T>) -> Self {
        let keypoints = extract_keypoints(&image);
        Self { image, keypoints }
    }

    pub fn score(&self, other: &Self) -> Result<MatchScore> {
        let m = mssim(&self.image, &other.image)?.as_f64();
        Ok(MatchScore::from_parts(m, brute_force_match(&self.keypoints, &other.keypoints)))
    }
}

pub fn fused_score<T: Scalar>(x: &Image<T>, y: &Image<T>) -> Result<MatchScore> {
    let m = mssim(x, y)?.as_f64();
    let kp = brute_force_match(&extract_keypoints(x), &extract_keypoints(y));
    Ok(MatchScore::from_parts(m, kp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fusion_arithmetic() {
        let s = MatchScore::from_parts(0.6, 0.2);
        assert!((s.fused - 0.4).abs() < 1e-15);
        assert_eq!(MatchScore::from_parts(-0.3, 0.5).fused, 0.25);
        assert_eq!(MatchScore::from_parts(1.0, 1.0).fused, 1.0);
    }

    #[test]
    fn identical_images_fuse_to_one() {
        let img = Image::from_fn(60, 60, |r, c| {
            // broken stripes: every gap leaves two ridge endings
            if (r as f64 * 0.6).sin() > 0.0 && (c as f64 * 0.25).sin() > -0.7 { 0.1f32 } else { 0.9 }
        });
        let s = fused_score(&img, &img).unwrap();
        assert!(!extract_keypoints(&img).is_empty());
        assert!((s.fused - 1.0).abs() < 1e-6, "{s:?}");
    }
}
