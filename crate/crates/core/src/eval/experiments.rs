//! Revocability, stolen-token and latent-space experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::mean_std;
use super::pca::{pca_visualize, silhouette, PcaResult};
use super::proxy_db::{evaluation_key, proxy_identity, BiometricDb, KeyMode};
use crate::error::{Error, Result};
use crate::matching::{mssim, Prepared};
use crate::pipeline::ProxyGenerator;
use crate::rng::{derive_seed, tags};
use crate::synthgen::Corpus;
use crate::transform::{generate_key, split_key};

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevocationMode {
    BothKeys,
    OneShare,
    MatrixOnly,
    /// Same key and matrix on both sides.
    Identical,
}

impl RevocationMode {
    pub const ALL: [RevocationMode; 4] = [
        RevocationMode::BothKeys,
        RevocationMode::OneShare,
        RevocationMode::MatrixOnly,
        RevocationMode::Identical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RevocationMode::BothKeys => "both_keys",
            RevocationMode::OneShare => "one_share",
            RevocationMode::MatrixOnly => "matrix_only",
            RevocationMode::Identical => "identical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevocationStats {
    pub mode: RevocationMode,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Counts over `HISTOGRAM_BINS` equal bins of `[0, 1]`; values outside
    /// are clamped into the end bins.
    pub histogram: Vec<usize>,
}

impl RevocationStats {
    pub fn from_values(mode: RevocationMode, values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        let mut histogram = vec![0; HISTOGRAM_BINS];
        for v in values {
            let bin = (v.clamp(0.0, 1.0) * HISTOGRAM_BINS as f64) as usize;
            histogram[bin.min(HISTOGRAM_BINS - 1)] += 1;
        }
        Self {
            mode,
            count: values.len(),
            mean,
            std,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            histogram,
        }
    }
}

/// Cross-MSSIM between the best-case proxies in `db` (built from
/// `latents` with distinct evaluation keys) and a second proxy set that
/// differs only in what `mode` changes. Key and share changes are measured
/// under every class matrix; the matrix change compares every pair of
/// distinct classes for one salted latent.
pub fn revocability_experiment(
    corpus: &Corpus,
    generator: &ProxyGenerator,
    latents: &[Vec<f64>],
    db: &BiometricDb,
    mode: RevocationMode,
    seed: u64,
) -> Result<RevocationStats> {
    let len = generator.latent_len();
    let n_imp = corpus.impressions_per_subject;
    if latents.len() != corpus.images.len() || db.identity_count() != 5 * corpus.subject_count() {
        return Err(Error::Precondition("latents and database do not match the corpus".into()));
    }
    let jobs: Vec<(usize, usize)> =
        (0..latents.len()).flat_map(|i| (1..=5).map(move |j| (i, j))).collect();
    let values = jobs
        .par_iter()
        .map(|&(i, j)| -> Result<Vec<f64>> {
            let sid = i / n_imp + 1;
            let base = |class: usize| &db.samples[proxy_identity(sid, class)][i % n_imp].image;
            let z = &latents[i];
            let other = match mode {
                RevocationMode::Identical => {
                    let key = evaluation_key(seed, KeyMode::Distinct, sid, len)?;
                    generator.proxy(z, &key.values, j)?
                }
                RevocationMode::BothKeys => {
                    let key = generate_key(derive_seed(seed, &[tags::REVOKE_KEYS, sid as u64]), len)?;
                    generator.proxy(z, &key.values, j)?
                }
                RevocationMode::OneShare => {
                    let key = evaluation_key(seed, KeyMode::Distinct, sid, len)?;
                    let a = split_key(&key, derive_seed(seed, &[tags::SHARE_SPLIT, sid as u64, 0]));
                    let b = split_key(&key, derive_seed(seed, &[tags::SHARE_SPLIT, sid as u64, 1]));
                    // k1 from the second split, k2 kept from the first
                    generator.proxy_from_shares(z, &b.k1, &a.k2, j)?
                }
                RevocationMode::MatrixOnly => {
                    return (j + 1..=5)
                        .map(|k| Ok(mssim(base(j), base(k))? as f64))
                        .collect();
                }
            };
            Ok(vec![mssim(base(j), &other)? as f64])
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = values.into_iter().flatten().collect();
    Ok(RevocationStats::from_values(mode, &values))
}

/// Outcome of presenting someone else's biometric with a victim's token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StolenTokenTrials {
    /// Fused scores of the victim's own later impressions against the
    /// victim's enrolled template.
    pub genuine: Vec<f64>,
    /// Fused scores of attackers' impressions made with the victim's key.
    pub attack: Vec<f64>,
}

impl StolenTokenTrials {
    pub fn genuine_mean(&self) -> f64 {
        mean_std(&self.genuine).0
    }

    /// Fraction of attack scores strictly below the genuine mean.
    pub fn fraction_below_genuine_mean(&self) -> f64 {
        let m = self.genuine_mean();
        self.attack.iter().filter(|&&s| s < m).count() as f64 / self.attack.len().max(1) as f64
    }
}

/// Each subject enrolls impression 1 under its own class matrix and
/// evaluation key. The subject's remaining impressions are genuine probes;
/// every impression of the `attackers_per_victim` following subjects (in
/// cyclic id order), salted with the victim's key, is an attack.
pub fn stolen_token_trials(
    corpus: &Corpus,
    generator: &ProxyGenerator,
    latents: &[Vec<f64>],
    seed: u64,
    attackers_per_victim: usize,
) -> Result<StolenTokenTrials> {
    let n = corpus.subject_count();
    let len = generator.latent_len();
    let zs = latents;
    let n_imp = corpus.impressions_per_subject;
    let z = |sid: usize, imp: usize| &zs[(sid - 1) * n_imp + imp - 1];
    let per_victim = (1..=n)
        .into_par_iter()
        .map(|v| -> Result<(Vec<f64>, Vec<f64>)> {
            let class = corpus.class_of_subject(v)?.index();
            let key = evaluation_key(seed, KeyMode::Distinct, v, len)?;
            let template = Prepared::new(generator.proxy(z(v, 1), &key.values, class)?);
            let mut genuine = Vec::new();
            for imp in 2..=n_imp {
                let probe = Prepared::new(generator.proxy(z(v, imp), &key.values, class)?);
                genuine.push(template.score(&probe)?.fused);
            }
            let mut attack = Vec::new();
            for step in 1..=attackers_per_victim.min(n - 1) {
                let u = (v - 1 + step) % n + 1;
                for imp in 1..=n_imp {
                    let probe = Prepared::new(generator.proxy(z(u, imp), &key.values, class)?);
                    attack.push(template.score(&probe)?.fused);
                }
            }
            Ok((genuine, attack))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trials = StolenTokenTrials { genuine: Vec::new(), attack: Vec::new() };
    for (g, a) in per_victim {
        trials.genuine.extend(g);
        trials.attack.extend(a);
    }
    Ok(trials)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSpaces {
    pub original: PcaResult,
    pub projected: PcaResult,
    pub original_silhouette: f64,
    pub projected_silhouette: f64,
}

/// PCA of raw latents and of salted latents projected on their own class
/// matrix, both labelled by class.
pub fn latent_spaces(
    corpus: &Corpus,
    generator: &ProxyGenerator,
    latents: &[Vec<f64>],
    seed: u64,
) -> Result<LatentSpaces> {
    let len = generator.latent_len();
    let zs = latents;
    let labels: Vec<usize> = corpus.images.iter().map(|img| img.class.index()).collect();
    let projected = corpus
        .images
        .par_iter()
        .zip(zs)
        .map(|(img, z)| {
            let key = evaluation_key(seed, KeyMode::Distinct, img.subject_id, len)?;
            let salted: Vec<f64> = z.iter().zip(&key.values).map(|(a, b)| a + b).collect();
            generator.project(&salted, img.class.index())
        })
        .collect::<Result<Vec<_>>>()?;
    let original = pca_visualize(zs, &labels)?;
    let projected = pca_visualize(&projected, &labels)?;
    Ok(LatentSpaces {
        original_silhouette: silhouette(&original.points)?,
        projected_silhouette: silhouette(&projected.points)?,
        original,
        projected,
    })
}
