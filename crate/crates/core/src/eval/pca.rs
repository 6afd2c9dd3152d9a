//! Two-component PCA of latent vectors and a silhouette score for the
//! resulting 2-D embedding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PCA_TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaPoint {
    pub x: f64,
    pub y: f64,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    pub points: Vec<PcaPoint>,
    /// Unit principal directions in the input space.
    pub components: [Vec<f64>; 2],
    /// Variance captured by each component.
    pub variances: [f64; 2],
}

/// Projects `latents` onto their top two principal directions.
///
/// Runs power iteration with deflation on the `n x n` Gram matrix of the
/// centered data rather than the `d x d` covariance, since `n << d` here.
pub fn pca_visualize(latents: &[Vec<f64>], labels: &[usize]) -> Result<PcaResult> {
    let n = latents.len();
    if n < 3 {
        return Err(Error::Precondition(format!("PCA needs at least 3 vectors, got {n}")));
    }
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} vectors", labels.len())));
    }
    let d = latents[0].len();
    if d == 0 || latents.iter().any(|v| v.len() != d) {
        return Err(Error::Dimension("latent vectors must share a nonzero length".into()));
    }

    let mut mean = vec![0.0; d];
    for v in latents {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = latents
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let g: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            gram[i * n + j] = g;
            gram[j * n + i] = g;
        }
    }
    let trace: f64 = (0..n).map(|i| gram[i * n + i]).sum();
    if trace <= f64::MIN_POSITIVE {
        return Err(Error::Degenerate("latent vectors have zero variance".into()));
    }

    let (l1, u1) = dominant_eigen(&gram, n);
    for i in 0..n {
        for j in 0..n {
            gram[i * n + j] -= l1 * u1[i] * u1[j];
        }
    }
    let (mut l2, mut u2) = dominant_eigen(&gram, n);
    if l2 <= 1e-12 * trace {
        l2 = 0.0;
        u2 = vec![0.0; n];
    }

    // principal direction v = X^T u / sqrt(lambda); coordinate X v = sqrt(lambda) u
    let direction = |l: f64, u: &[f64]| -> Vec<f64> {
        if l == 0.0 {
            return vec![0.0; d];
        }
        let s = l.sqrt();
        let mut v = vec![0.0; d];
        for (ui, row) in u.iter().zip(&centered) {
            for (vk, x) in v.iter_mut().zip(row) {
                *vk += ui * x / s;
            }
        }
        v
    };
    let (s1, s2) = (l1.sqrt(), l2.sqrt());
    let points = (0..n)
        .map(|i| PcaPoint { x: s1 * u1[i], y: s2 * u2[i], label: labels[i] })
        .collect();
    Ok(PcaResult {
        points,
        components: [direction(l1, &u1), direction(l2, &u2)],
        variances: [l1 / n as f64, l2 / n as f64],
    })
}

/// Largest eigenpair of a symmetric positive semidefinite `n x n` matrix.
fn dominant_eigen(a: &[f64], n: usize) -> (f64, Vec<f64>) {
    let mut u: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0).sqrt().fract()).collect();
    normalize(&mut u);
    let mut lambda = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let mut next = vec![0.0; n];
        for (i, out) in next.iter_mut().enumerate() {
            *out = a[i * n..(i + 1) * n].iter().zip(&u).map(|(x, y)| x * y).sum();
        }
        lambda = next.iter().zip(&u).map(|(x, y)| x * y).sum();
        if normalize(&mut next) == 0.0 {
            return (0.0, u);
        }
        let delta = next.iter().zip(&u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        u = next;
        if delta < PCA_TOLERANCE {
            break;
        }
    }
    (lambda.max(0.0), u)
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Mean silhouette of labelled 2-D points under Euclidean distance.
/// Points alone in their cluster contribute 0.
pub fn silhouette(points: &[PcaPoint]) -> Result<f64> {
    let mut labels: Vec<usize> = points.iter().map(|p| p.label).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 {
        return Err(Error::Precondition("silhouette needs at least two clusters".into()));
    }
    let dist = |a: &PcaPoint, b: &PcaPoint| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    let mut total = 0.0;
    for p in points {
        let mut sums = vec![(0.0, 0usize); labels.len()];
        for q in points {
            let k = labels.binary_search(&q.label).expect("label present");
            sums[k].0 += dist(p, q);
            sums[k].1 += 1;
        }
        let own = labels.binary_search(&p.label).expect("label present");
        if sums[own].1 <= 1 {
            continue;
        }
        let a = sums[own].0 / (sums[own].1 - 1) as f64;
        let b = sums
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != own)
            .map(|(_, (s, c))| s / *c as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / points.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_axis_aligned_components() {
        // spread 3 along axis 0, 1 along axis 2
        let pts = [(-3.0, 0.0), (3.0, 0.0), (0.0, -1.0), (0.0, 1.0)];
        let latents: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, 0.0, b, 0.0]).collect();
        let r = pca_visualize(&latents, &[0, 0, 1, 1]).unwrap();
        let [c1, c2] = &r.components;
        assert!((c1[0].abs() - 1.0).abs() < 1e-6 && c1[1].abs() < 1e-6 && c1[2].abs() < 1e-6);
        assert!((c2[2].abs() - 1.0).abs() < 1e-6 && c2[0].abs() < 1e-6);
        assert!(r.variances[0] >= r.variances[1]);
        assert!((r.variances[0] - 4.5).abs() < 1e-9 && (r.variances[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rank_one_data_has_zero_second_coordinate() {
        let latents = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]];
        let r = pca_visualize(&latents, &[0, 1, 2]).unwrap();
        assert!(r.points.iter().all(|p| p.y == 0.0));
        let xs: Vec<f64> = r.points.iter().map(|p| p.x.abs()).collect();
        assert!((xs[0] - 1.0).abs() < 1e-9 && xs[1].abs() < 1e-9 && (xs[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_and_small_inputs() {
        let same = vec![vec![1.0, 2.0]; 4];
        assert!(matches!(pca_visualize(&same, &[0; 4]), Err(Error::Degenerate(_))));
        assert!(pca_visualize(&same[..2], &[0; 2]).is_err());
    }

    #[test]
    fn silhouette_of_separated_clusters() {
        let p = |x, y, label| PcaPoint { x, y, label };
        let pts = vec![p(0.0, 0.0, 0), p(0.0, 1.0, 0), p(10.0, 0.0, 1), p(10.0, 1.0, 1)];
        let s = silhouette(&pts).unwrap();
        // a = 1, b = mean(10, sqrt(101)) for every point
        let b = (10.0 + 101f64.sqrt()) / 2.0;
        assert!((s - (b - 1.0) / b).abs() < 1e-12);
        let mixed = vec![p(0.0, 0.0, 0), p(10.0, 0.0, 0), p(0.0, 1.0, 1), p(10.0, 1.0, 1)];
        assert!(silhouette(&mixed).unwrap() < 0.0);
        assert!(silhouette(&pts[..2]).is_err());
    }
}
