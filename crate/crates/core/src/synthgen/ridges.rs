//! Ridge synthesis by repeated orientation-tuned Gabor filtering of seeded
//! noise, followed by a soft saturation that drives the pattern toward two
//! levels.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use super::orientation::OrientationField;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::rng_from_seed;

const ORIENTATION_BINS: usize = 32;
const MAX_ITERATIONS: usize = 12;
const SATURATION_GAIN: f64 = 2.0;
/// Stop once this fraction of pixels sits beyond +-0.8.
const BINARY_FRACTION: f64 = 0.85;

struct GaborBank {
    radius: usize,
    kernels: Vec<Vec<f64>>,
}

impl GaborBank {
    fn new(frequency: f64) -> Self {
        let sigma = 0.45 / frequency;
        let radius = (2.2 * sigma).ceil() as usize;
        let side = 2 * radius + 1;
        let kernels = (0..ORIENTATION_BINS)
            .map(|b| {
                let theta = PI * b as f64 / ORIENTATION_BINS as f64;
                let (s, c) = theta.sin_cos();
                let mut k = Vec::with_capacity(side * side);
                for dy in -(radius as isize)..=radius as isize {
                    for dx in -(radius as isize)..=radius as isize {
                        let (x, y) = (dx as f64, dy as f64);
                        // distance across the ridge direction
                        let u = -x * s + y * c;
                        let env = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
                        k.push(env * (2.0 * PI * frequency * u).cos());
                    }
                }
                let mean = k.iter().sum::<f64>() / k.len() as f64;
                k.iter_mut().for_each(|v| *v -= mean);
                let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
                k.iter_mut().for_each(|v| *v /= norm);
                k
            })
            .collect();
        Self { radius, kernels }
    }

    fn bin(theta: f64) -> usize {
        ((theta / PI * ORIENTATION_BINS as f64).round() as usize) % ORIENTATION_BINS
    }

    fn filter(&self, field: &OrientationField, input: &[f64]) -> Vec<f64> {
        let (h, w) = (field.height, field.width);
        let r = self.radius as isize;
        let side = 2 * self.radius + 1;
        (0..h)
            .into_par_iter()
            .flat_map_iter(|row| {
                (0..w).map(move |col| {
                    let kernel = &self.kernels[Self::bin(field.at(row, col))];
                    let mut acc = 0.0;
                    for dy in -r..=r {
                        let rr = (row as isize + dy).clamp(0, h as isize - 1) as usize;
                        let krow = &kernel[((dy + r) as usize) * side..][..side];
                        let line = &input[rr * w..(rr + 1) * w];
                        for (i, &kv) in krow.iter().enumerate() {
                            let cc = (col as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                            acc += kv * line[cc];
                        }
                    }
                    acc
                })
            })
            .collect()
    }
}

/// Soft elliptical foreground mask, 1 inside and 0 outside.
pub(crate) fn finger_mask(h: usize, w: usize, center: (f64, f64), radii: (f64, f64)) -> Vec<f64> {
    let edge = 4.0;
    let mut m = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let dy = (r as f64 + 0.5 - center.0) / radii.0;
            let dx = (c as f64 + 0.5 - center.1) / radii.1;
            let rho = (dx * dx + dy * dy).sqrt();
            // approximate distance to the boundary in pixels
            let dist = (1.0 - rho) * radii.0.min(radii.1);
            m.push((dist / edge + 0.5).clamp(0.0, 1.0));
        }
    }
    m
}

/// Ridge pattern in `[-1, 1]` (positive on ridges) following `field`.
pub fn ridge_pattern(field: &OrientationField, frequency: f64, seed: u64) -> Result<Vec<f64>> {
    if !(0.05..=0.25).contains(&frequency) {
        return Err(Error::Precondition(format!(
            "ridge frequency {frequency} outside [0.05, 0.25]"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut x: Vec<f64> = (0..field.height * field.width)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let bank = GaborBank::new(frequency);
    for _ in 0..MAX_ITERATIONS {
        let y = bank.filter(field, &x);
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
        x = y.iter().map(|v| (SATURATION_GAIN * (v - mean) / std).tanh()).collect();
        let saturated = x.iter().filter(|v| v.abs() > 0.8).count() as f64 / n;
        if saturated >= BINARY_FRACTION {
            break;
        }
    }
    Ok(x)
}

/// Renders a master print: dark ridges on a light background inside a soft
/// elliptical finger region. Output lies in `[0, 1]`.
pub fn synthesize_master_pixels(field: &OrientationField, frequency: f64, seed: u64) -> Result<Image<f32>> {
    let pattern = ridge_pattern(field, frequency, seed)?;
    let (h, w) = (field.height, field.width);
    let mut rng = rng_from_seed(seed ^ 0xA5A5_5A5A);
    let center = (
        h as f64 * 0.5 + rng.random_range(-4.0..4.0),
        w as f64 * 0.5 + rng.random_range(-4.0..4.0),
    );
    let radii = (
        h as f64 * rng.random_range(0.374..0.408),
        w as f64 * rng.random_range(0.357..0.391),
    );
    let mask = finger_mask(h, w, center, radii);
    let data = pattern
        .iter()
        .zip(&mask)
        .map(|(&p, &m)| {
            let ink = 0.5 - 0.5 * p;
            (m * ink + (1.0 - m)).clamp(0.0, 1.0) as f32
        })
        .collect();
    Image::new(h, w, data)
}
