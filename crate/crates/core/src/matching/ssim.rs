//! Patch-wise structural similarity.
//!
//! SSIM uses `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2` with dynamic range `L = 1`
//! and population (1/N) moments. MSSIM averages SSIM over the non-overlapping
//! `PATCH x PATCH` tiling anchored at the top-left corner; right and bottom
//! remainders are ignored.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

pub const PATCH: usize = 10;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy)]
struct Moments<T> {
    mu_x: T,
    mu_y: T,
    var_x: T,
    var_y: T,
    cov: T,
}

fn moments<T: Scalar>(x: impl Iterator<Item = T> + Clone, y: impl Iterator<Item = T> + Clone) -> Moments<T> {
    let mut n = T::zero();
    let (mut sx, mut sy) = (T::zero(), T::zero());
    for (a, b) in x.clone().zip(y.clone()) {
        sx += a;
        sy += b;
        n += T::one();
    }
    let mu_x = sx / n;
    let mu_y = sy / n;
    let (mut vx, mut vy, mut cxy) = (T::zero(), T::zero(), T::zero());
    for (a, b) in x.zip(y) {
        let dx = a - mu_x;
        let dy = b - mu_y;
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
    }
    Moments {
        mu_x,
        mu_y,
        var_x: vx / n,
        var_y: vy / n,
        cov: cxy / n,
    }
}

fn ssim_from<T: Scalar>(m: &Moments<T>) -> T {
    let c1 = T::lit(C1);
    let c2 = T::lit(C2);
    let two = T::lit(2.0);
    ((two * m.mu_x * m.mu_y + c1) * (two * m.cov + c2))
        / ((m.mu_x * m.mu_x + m.mu_y * m.mu_y + c1) * (m.var_x + m.var_y + c2))
}

/// SSIM of two equally sized patches given as flat slices.
pub fn ssim_patch<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Dimension(format!(
            "patch sizes {} and {} differ or are empty",
            x.len(),
            y.len()
        )));
    }
    Ok(ssim_from(&moments(x.iter().copied(), y.iter().copied())))
}

fn tiling<T: Scalar>(x: &Image<T>, y: &Image<T>) -> Result<(usize, usize)> {
    if x.shape() != y.shape() {
        return Err(Error::Dimension(format!(
            "images {:?} and {:?} differ in shape",
            x.shape(),
            y.shape()
        )));
    }
    let tiles = (x.height() / PATCH, x.width() / PATCH);
    if tiles.0 == 0 || tiles.1 == 0 {
        return Err(Error::Dimension(format!(
            "image {:?} smaller than one {PATCH}x{PATCH} patch",
            x.shape()
        )));
    }
    Ok(tiles)
}

fn patch_iter<T: Scalar>(img: &Image<T>, tr: usize, tc: usize) -> impl Iterator<Item = T> + Clone + '_ {
    let w = img.width();
    let data = img.data();
    (0..PATCH).flat_map(move |r| {
        let start = (tr * PATCH + r) * w + tc * PATCH;
        data[start..start + PATCH].iter().copied()
    })
}

/// Mean SSIM over the patch tiling.
pub fn mssim<T: Scalar>(x: &Image<T>, y: &Image<T>) -> Result<T> {
    let (th, tw) = tiling(x, y)?;
    let mut total = T::zero();
    for tr in 0..th {
        for tc in 0..tw {
            total += ssim_from(&moments(patch_iter(x, tr, tc), patch_iter(y, tr, tc)));
        }
    }
    Ok(total / T::count(th * tw))
}

/// MSSIM together with its exact gradient with respect to every pixel of `y`.
/// Pixels outside the tiling get zero gradient.
pub fn mssim_with_grad<T: Scalar>(x: &Image<T>, y: &Image<T>) -> Result<(T, Vec<T>)> {
    let (th, tw) = tiling(x, y)?;
    let w = x.width();
    let mut grad = vec![T::zero(); x.data().len()];
    let c1 = T::lit(C1);
    let c2 = T::lit(C2);
    let two = T::lit(2.0);
    let n = T::count(PATCH * PATCH);
    let count = T::count(th * tw);
    let mut total = T::zero();
    for tr in 0..th {
        for tc in 0..tw {
            let m = moments(patch_iter(x, tr, tc), patch_iter(y, tr, tc));
            let a1 = two * m.mu_x * m.mu_y + c1;
            let a2 = two * m.cov + c2;
            let b1 = m.mu_x * m.mu_x + m.mu_y * m.mu_y + c1;
            let b2 = m.var_x + m.var_y + c2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            // dS/dy_k = [dA1 A2 + A1 dA2] / (B1 B2) - S (dB1 / B1 + dB2 / B2), where
            // dA1 = 2 mu_x / N, dA2 = 2 (x_k - mu_x) / N, dB1 = 2 mu_y / N, dB2 = 2 (y_k - mu_y) / N
            let denom = b1 * b2;
            let k_const = two / n * (m.mu_x * a2 / denom - s * m.mu_y / b1);
            let k_x = two / n * a1 / denom;
            let k_y = two / n * s / b2;
            for r in 0..PATCH {
                let row = (tr * PATCH + r) * w + tc * PATCH;
                for c in 0..PATCH {
                    let i = row + c;
                    let dx = x.data()[i] - m.mu_x;
                    let dy = y.data()[i] - m.mu_y;
                    grad[i] = (k_const + k_x * dx - k_y * dy) / count;
                }
            }
        }
    }
    Ok((total / count, grad))
}
