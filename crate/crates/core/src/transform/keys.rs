//! User keys drawn from N(0, 0.5), split into two shares with
//! `K = 0.5 k1 + 0.5 k2`, and additive salting of latents.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const KEY_STD: f64 = 0.5;
/// Standard deviation of the token share `k1`. `k2 = 2K - k1` then has
/// correlation `1 / sqrt(1 + 4^2)` with `K`, and redrawing `k1` alone moves the
/// proxy about as far as a fresh key does.
pub const SHARE_STD: f64 = 4.0 * KEY_STD;

#[derive(Debug, Clone, PartialEq)]
pub struct UserKey {
    pub values: Vec<f64>,
    pub key_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyShares {
    /// Held by the user in a token.
    pub k1: Vec<f64>,
    /// Held by the system operator.
    pub k2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaltedLatent {
    pub values: Vec<f64>,
}

fn gaussian(seed: u64, length: usize, std: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, std).expect("valid normal");
    let mut rng = rng_from_seed(seed);
    (0..length).map(|_| normal.sample(&mut rng)).collect()
}

pub fn generate_key(seed: u64, length: usize) -> Result<UserKey> {
    if length == 0 {
        return Err(Error::Precondition("key length must be >= 1".into()));
    }
    Ok(UserKey {
        values: gaussian(seed, length, KEY_STD),
        key_id: format!("k{seed:016x}"),
    })
}

/// Draws `k1` from the seed and sets `k2 = 2K - k1`.
pub fn split_key(key: &UserKey, seed: u64) -> KeyShares {
    let k1 = gaussian(seed, key.values.len(), SHARE_STD);
    let k2 = key.values.iter().zip(&k1).map(|(&k, &a)| 2.0 * k - a).collect();
    KeyShares { k1, k2 }
}

pub fn recombine_shares(k1: &[f64], k2: &[f64]) -> Result<Vec<f64>> {
    if k1.len() != k2.len() {
        return Err(Error::Dimension(format!(
            "key shares of length {} and {}",
            k1.len(),
            k2.len()
        )));
    }
    Ok(k1.iter().zip(k2).map(|(&a, &b)| 0.5 * a + 0.5 * b).collect())
}

pub fn salt(latent: &[f64], key: &[f64]) -> Result<SaltedLatent> {
    if latent.len() != key.len() {
        return Err(Error::Dimension(format!(
            "latent of length {} salted with key of length {}",
            latent.len(),
            key.len()
        )));
    }
    Ok(SaltedLatent {
        values: latent.iter().zip(key).map(|(&z, &k)| z + k).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_statistics() {
        let k = generate_key(11, 13600).unwrap();
        let n = k.values.len() as f64;
        let mean = k.values.iter().sum::<f64>() / n;
        let std = (k.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() <= 0.02, "mean {mean}");
        assert!((0.48..=0.52).contains(&std), "std {std}");
        assert_eq!(k, generate_key(11, 13600).unwrap());
        let one = generate_key(3, 1).unwrap();
        assert_eq!(one.values.len(), 1);
        assert!(one.values[0].is_finite());
        assert!(generate_key(3, 0).is_err());
    }

    #[test]
    fn share_algebra() {
        let k = generate_key(5, 64).unwrap();
        let s = split_key(&k, 6);
        let back = recombine_shares(&s.k1, &s.k2).unwrap();
        for (a, b) in back.iter().zip(&k.values) {
            assert!((a - b).abs() <= 1e-12);
        }
        for ((&k2, &k1), &kv) in s.k2.iter().zip(&s.k1).zip(&k.values) {
            assert_eq!(k2, 2.0 * kv - k1);
        }
        let zero = UserKey {
            values: vec![0.0; 16],
            key_id: "zero".into(),
        };
        let s = split_key(&zero, 9);
        assert!(s.k1.iter().zip(&s.k2).all(|(a, b)| *b == -*a));
    }

    #[test]
    fn recombine_cases() {
        let k = vec![0.25, -1.0, 3.0];
        assert_eq!(recombine_shares(&k, &k).unwrap(), k);
        let doubled: Vec<f64> = k.iter().map(|v| 2.0 * v).collect();
        assert_eq!(recombine_shares(&doubled, &[0.0; 3]).unwrap(), k);
        assert!(recombine_shares(&k, &k[..2]).is_err());
    }

    #[test]
    fn salting_is_additive() {
        let z = vec![0.5, 1.5, -2.0];
        let k = vec![0.1, -0.2, 0.3];
        assert_eq!(salt(&z, &[0.0; 3]).unwrap().values, z);
        let s = salt(&z, &k).unwrap();
        let neg: Vec<f64> = k.iter().map(|v| -v).collect();
        let back = salt(&s.values, &neg).unwrap();
        for (a, b) in back.values.iter().zip(&z) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(salt(&z, &k[..1]).is_err());
    }
}
