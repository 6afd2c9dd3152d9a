//! Random orthonormal matrices by modified Gram-Schmidt, and the
//! reshape-multiply-flatten projection of latents.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, PipelineRng};
use crate::scalar::Scalar;

/// `c x c` matrix with orthonormal columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix<T> {
    pub class_index: usize,
    pub dim: usize,
    pub data: Vec<T>,
    pub seed: u64,
    /// Columns re-drawn because they collapsed during orthogonalization.
    pub retries: usize,
}

impl<T: Scalar> ProjectionMatrix<T> {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.dim + col]
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![T::zero(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = T::one();
        }
        Self {
            class_index: 0,
            dim,
            data,
            seed: 0,
            retries: 0,
        }
    }

    pub fn from_rows(class_index: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Dimension(format!("{} entries for a {dim}x{dim} matrix", data.len())));
        }
        Ok(Self {
            class_index,
            dim,
            data,
            seed: 0,
            retries: 0,
        })
    }

    /// `max |M^T M - I|`.
    pub fn orthonormality_error(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for i in 0..n {
            for j in i..n {
                let mut dot = T::zero();
                for k in 0..n {
                    dot += self.get(k, i) * self.get(k, j);
                }
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Determinant by partial-pivot LU on a copy.
    pub fn determinant(&self) -> T {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut det = T::one();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| {
                    a[x * n + col]
                        .abs()
                        .partial_cmp(&a[y * n + col].abs())
                        .expect("finite")
                })
                .expect("nonempty");
            if a[pivot * n + col] == T::zero() {
                return T::zero();
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                for k in col..n {
                    let v = a[col * n + k];
                    a[r * n + k] -= f * v;
                }
            }
        }
        det
    }
}

fn gaussian_column<T: Scalar>(rng: &mut PipelineRng, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            T::lit(v)
        })
        .collect()
}

const COLLAPSE_TOLERANCE: f64 = 1e-8;
const MAX_RETRIES: usize = 64;

/// Seeded standard Gaussian `c x c` matrix orthonormalized column by column
/// with modified Gram-Schmidt. A column whose residual norm collapses below
/// `1e-8` of its original norm is re-drawn from the same stream.
pub fn gram_schmidt_matrix<T: Scalar>(seed: u64, dim: usize) -> Result<ProjectionMatrix<T>> {
    if dim == 0 {
        return Err(Error::Precondition("matrix dimension must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut columns: Vec<Vec<T>> = (0..dim).map(|_| gaussian_column(&mut rng, dim)).collect();
    let mut retries = 0usize;
    let mut j = 0;
    while j < dim {
        let original = columns[j].iter().map(|&v| v * v).sum::<T>().sqrt();
        // subtract projections one basis vector at a time
        for i in 0..j {
            let (done, rest) = columns.split_at_mut(j);
            let q = &done[i];
            let v = &mut rest[0];
            let dot: T = q.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(x, &qv)| *x -= dot * qv);
        }
        let norm = columns[j].iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(norm > T::lit(COLLAPSE_TOLERANCE) * original) || norm == T::zero() {
            retries += 1;
            if retries > MAX_RETRIES {
                return Err(Error::Degenerate(format!(
                    "Gram-Schmidt failed to find column {j} after {MAX_RETRIES} redraws"
                )));
            }
            columns[j] = gaussian_column(&mut rng, dim);
            continue;
        }
        columns[j].iter_mut().for_each(|v| *v /= norm);
        j += 1;
    }
    // second pass restores orthogonality lost to rounding
    for j in 0..dim {
        for i in 0..j {
            let (done, rest) = columns.split_at_mut(j);
            let dot: T = done[i].iter().zip(rest[0].iter()).map(|(&a, &b)| a * b).sum();
            rest[0].iter_mut().zip(&done[i]).for_each(|(x, &qv)| *x -= dot * qv);
        }
        let norm = columns[j].iter().map(|&v| v * v).sum::<T>().sqrt();
        columns[j].iter_mut().for_each(|v| *v /= norm);
    }
    let mut data = vec![T::zero(); dim * dim];
    for (c, col) in columns.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            data[r * dim + c] = v;
        }
    }
    Ok(ProjectionMatrix {
        class_index: 0,
        dim,
        data,
        seed,
        retries,
    })
}

/// Per-class seed rule: `seed_i = master XOR i`.
pub fn class_matrix_seed(master: u64, class_index: usize) -> u64 {
    master ^ class_index as u64
}

/// One matrix per class `1..=5`.
pub fn class_matrices<T: Scalar>(master: u64, dim: usize) -> Result<Vec<ProjectionMatrix<T>>> {
    (1..=5)
        .map(|i| {
            let mut m = gram_schmidt_matrix(class_matrix_seed(master, i), dim)?;
            m.class_index = i;
            Ok(m)
        })
        .collect()
}

/// Reshapes `values` row-major to `rows x dim`, right-multiplies by the
/// matrix and flattens row-major.
pub fn project_latent<T: Scalar>(values: &[T], matrix: &ProjectionMatrix<T>, rows: usize) -> Result<Vec<T>> {
    let c = matrix.dim;
    if values.len() != rows * c {
        return Err(Error::Dimension(format!(
            "latent of length {} cannot be reshaped to {rows}x{c}",
            values.len()
        )));
    }
    let mut out = vec![T::zero(); rows * c];
    for r in 0..rows {
        let src = &values[r * c..(r + 1) * c];
        let dst = &mut out[r * c..(r + 1) * c];
        for (k, &v) in src.iter().enumerate() {
            let mrow = &matrix.data[k * c..(k + 1) * c];
            for (d, &m) in dst.iter_mut().zip(mrow) {
                *d += v * m;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_matrix_is_orthonormal() {
        let m = gram_schmidt_matrix::<f64>(42, 136).unwrap();
        assert!(m.orthonormality_error() < 1e-10);
        assert!((m.determinant().abs() - 1.0).abs() < 1e-8);
        assert_eq!(m, gram_schmidt_matrix::<f64>(42, 136).unwrap());
    }

    #[test]
    fn scalar_matrix_is_plus_or_minus_one() {
        let m = gram_schmidt_matrix::<f64>(3, 1).unwrap();
        assert_eq!(m.data[0].abs(), 1.0);
    }

    #[test]
    fn two_by_two_columns() {
        let m = gram_schmidt_matrix::<f64>(8, 2).unwrap();
        let (a, b) = ((m.get(0, 0), m.get(1, 0)), (m.get(0, 1), m.get(1, 1)));
        assert!((a.0 * b.0 + a.1 * b.1).abs() < 1e-15);
        assert!((a.0.hypot(a.1) - 1.0).abs() < 1e-15);
        assert!((b.0.hypot(b.1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_projection_and_rotation() {
        let v = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(project_latent(&v, &ProjectionMatrix::identity(3), 2).unwrap(), v);
        // [[0, 1], [-1, 0]]: [1, 0] -> [0, 1], [0, 1] -> [-1, 0]
        let rot = ProjectionMatrix::from_rows(1, 2, vec![0.0, 1.0, -1.0, 0.0]).unwrap();
        assert_eq!(project_latent(&[1.0, 0.0, 0.0, 1.0], &rot, 2).unwrap(), vec![0.0, 1.0, -1.0, 0.0]);
        assert!(project_latent(&v, &rot, 2).is_err());
    }

    #[test]
    fn class_seeds_follow_xor_rule() {
        let ms = class_matrices::<f64>(0b1000, 4).unwrap();
        for (i, m) in ms.iter().enumerate() {
            assert_eq!(m.class_index, i + 1);
            assert_eq!(m.seed, 0b1000 ^ (i as u64 + 1));
        }
    }

    #[test]
    fn f32_instantiation_is_nearly_orthonormal() {
        let m = gram_schmidt_matrix::<f32>(1, 32).unwrap();
        assert!(m.orthonormality_error() < 1e-5);
    }
}
