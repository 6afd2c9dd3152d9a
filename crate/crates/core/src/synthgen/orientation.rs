//! Class-conditioned orientation fields from the zero-pole model: each core
//! contributes `-arg(p - c) / 2` and each delta `+arg(p - d) / 2` to the ridge
//! angle. Arches have no singularities and use a smooth bowed field instead.

use std::f64::consts::PI;

use rand::Rng;

use super::class::FingerprintClass;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularityKind {
    Core,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity {
    pub row: f64,
    pub col: f64,
    pub kind: SingularityKind,
}

/// Ridge angle per pixel, radians in `[0, pi)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationField {
    pub height: usize,
    pub width: usize,
    pub theta: Vec<f64>,
    pub singularities: Vec<Singularity>,
}

impl OrientationField {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.theta[row * self.width + col]
    }

    pub fn count(&self, kind: SingularityKind) -> usize {
        self.singularities.iter().filter(|s| s.kind == kind).count()
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Singularity positions sampled inside class-specific regions, given as
/// fractions of the image extent.
fn place_singularities(class: FingerprintClass, rng: &mut impl Rng, h: f64, w: f64) -> Vec<Singularity> {
    use SingularityKind::{Core, Delta};
    let s = |row: f64, col: f64, kind| Singularity {
        row: row * h,
        col: col * w,
        kind,
    };
    match class {
        FingerprintClass::Arch => Vec::new(),
        FingerprintClass::TentedArch => {
            let col = uniform(rng, 0.42, 0.58);
            let core_row = uniform(rng, 0.35, 0.45);
            let delta_row = core_row + uniform(rng, 0.18, 0.26);
            vec![
                s(core_row, col, Core),
                s(delta_row, col + uniform(rng, -0.03, 0.03), Delta),
            ]
        }
        FingerprintClass::LeftLoop => vec![
            s(uniform(rng, 0.35, 0.48), uniform(rng, 0.30, 0.45), Core),
            s(uniform(rng, 0.62, 0.75), uniform(rng, 0.62, 0.78), Delta),
        ],
        FingerprintClass::RightLoop => vec![
            s(uniform(rng, 0.35, 0.48), uniform(rng, 0.55, 0.70), Core),
            s(uniform(rng, 0.62, 0.75), uniform(rng, 0.22, 0.38), Delta),
        ],
        FingerprintClass::Whorl => {
            let row = uniform(rng, 0.38, 0.48);
            let mid = uniform(rng, 0.46, 0.54);
            let gap = uniform(rng, 0.04, 0.08);
            vec![
                s(row - uniform(rng, 0.0, 0.04), mid - gap, Core),
                s(row + uniform(rng, 0.0, 0.04), mid + gap, Core),
                s(uniform(rng, 0.66, 0.76), uniform(rng, 0.15, 0.28), Delta),
                s(uniform(rng, 0.66, 0.76), uniform(rng, 0.72, 0.85), Delta),
            ]
        }
    }
}

pub fn generate_orientation_field(
    class: FingerprintClass,
    seed: u64,
    height: usize,
    width: usize,
) -> Result<OrientationField> {
    if height < 32 || width < 32 {
        return Err(Error::Precondition(format!(
            "orientation field {height}x{width} below 32x32"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let (h, w) = (height as f64, width as f64);
    let singularities = place_singularities(class, &mut rng, h, w);
    let background = uniform(&mut rng, -0.08, 0.08);
    let mut theta = Vec::with_capacity(height * width);
    if class == FingerprintClass::Arch {
        let amplitude = uniform(&mut rng, 0.7, 1.1);
        let center = uniform(&mut rng, 0.45, 0.55) * w;
        for r in 0..height {
            let k = amplitude * (1.0 - r as f64 / h).max(0.05);
            for c in 0..width {
                let phase = PI * (c as f64 - center) / w;
                // ridges follow row = r0 - A cos(phase): peaked in the middle
                let slope = k * phase.sin();
                theta.push((slope.atan() + background).rem_euclid(PI));
            }
        }
    } else {
        for r in 0..height {
            for c in 0..width {
                let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
                let mut angle = background;
                for s in &singularities {
                    // image rows grow downward; flip to a y-up frame for arg()
                    let arg = (-(y - s.row)).atan2(x - s.col);
                    match s.kind {
                        SingularityKind::Core => angle += 0.5 * arg,
                        SingularityKind::Delta => angle -= 0.5 * arg,
                    }
                }
                // back to row-down convention
                theta.push((-angle).rem_euclid(PI));
            }
        }
    }
    Ok(OrientationField {
        height,
        width,
        theta,
        singularities,
    })
}
