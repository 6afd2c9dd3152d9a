//! Intra-subject variation: small rigid motion, smooth elastic displacement
//! and contrast jitter applied to the master print.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Perturbation {
    /// Per-axis translation bound in pixels.
    pub max_translation_px: f64,
    pub max_rotation_deg: f64,
    /// Peak displacement of the elastic field in pixels.
    pub elastic_px: f64,
    /// Relative contrast change bound.
    pub contrast_jitter: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            max_translation_px: 1.5,
            max_rotation_deg: 1.0,
            elastic_px: 0.5,
            contrast_jitter: 0.1,
        }
    }
}

/// Resamples `master` under one seeded draw of the perturbation model.
pub fn perturb(master: &Image<f32>, p: &Perturbation, seed: u64) -> Image<f32> {
    let mut rng = rng_from_seed(seed);
    let sym = |rng: &mut rand_chacha::ChaCha8Rng, bound: f64| {
        if bound > 0.0 {
            rng.random_range(-bound..=bound)
        } else {
            0.0
        }
    };
    let ty = sym(&mut rng, p.max_translation_px);
    let tx = sym(&mut rng, p.max_translation_px);
    let phi = sym(&mut rng, p.max_rotation_deg).to_radians();
    let contrast = 1.0 + sym(&mut rng, p.contrast_jitter);
    // two low-frequency sinusoidal modes per axis
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.5..1.5),
                rng.random_range(0.5..1.5),
                rng.random_range(0.0..2.0 * PI),
                sym(&mut rng, 1.0),
            )
        })
        .collect();
    let (h, w) = master.shape();
    let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
    let (s, c) = phi.sin_cos();
    Image::from_fn(h, w, |r, col| {
        let (y, x) = (r as f64 - cy - ty, col as f64 - cx - tx);
        let mut sy = c * y + s * x + cy;
        let mut sx = -s * y + c * x + cx;
        let (ny, nx) = (r as f64 / h as f64, col as f64 / w as f64);
        for (i, &(fy, fx, ph, amp)) in modes.iter().enumerate() {
            let d = 0.5 * p.elastic_px * amp * (2.0 * PI * (fy * ny + fx * nx) + ph).sin();
            if i % 2 == 0 {
                sy += d;
            } else {
                sx += d;
            }
        }
        let v = if sy < -0.5 || sx < -0.5 || sy > h as f64 - 0.5 || sx > w as f64 - 0.5 {
            1.0
        } else {
            master.sample_bilinear(sy, sx) as f64
        };
        (0.5 + (v - 0.5) * contrast).clamp(0.0, 1.0) as f32
    })
}
