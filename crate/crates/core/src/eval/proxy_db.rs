//! Proxy databases (one proxy identity per subject and class matrix) and
//! exhaustive genuine / subsampled impostor scoring.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::ScoreSet;
use crate::error::{Error, Result};
use crate::matching::{MatchScore, Prepared};
use crate::pipeline::ProxyGenerator;
use crate::rng::{derive_seed, rng_from_seed, tags};
use crate::synthgen::Corpus;
use crate::transform::{generate_key, UserKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    /// Every subject has its own key.
    Distinct,
    /// One key for everybody, as if every token had been stolen.
    Shared,
}

/// Where a database identity came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityLabel {
    pub source_subject: usize,
    /// Class of the prints: the projection class for proxies, the
    /// fingerprint class for originals.
    pub class_index: usize,
}

/// Samples grouped by identity; `samples[i]` all belong to `labels[i]`.
#[derive(Debug, Clone)]
pub struct BiometricDb {
    pub labels: Vec<IdentityLabel>,
    pub samples: Vec<Vec<Prepared<f32>>>,
}

impl BiometricDb {
    pub fn identity_count(&self) -> usize {
        self.labels.len()
    }

    pub fn sample_count(&self) -> usize {
        self.samples.iter().map(Vec::len).sum()
    }

    /// The corpus itself as a database, one identity per subject.
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        let labels = (1..=corpus.subject_count())
            .map(|sid| {
                Ok(IdentityLabel {
                    source_subject: sid,
                    class_index: corpus.class_of_subject(sid)?.index(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let samples = (1..=corpus.subject_count())
            .into_par_iter()
            .map(|sid| {
                corpus
                    .subject_images(sid)
                    .iter()
                    .map(|img| Prepared::new(img.pixels.clone()))
                    .collect()
            })
            .collect();
        Ok(Self { labels, samples })
    }
}

/// Evaluation key of `subject_id` under `mode`.
pub fn evaluation_key(seed: u64, mode: KeyMode, subject_id: usize, len: usize) -> Result<UserKey> {
    let tag = match mode {
        KeyMode::Distinct => subject_id as u64,
        KeyMode::Shared => 0,
    };
    generate_key(derive_seed(seed, &[tags::EVAL_KEYS, tag]), len)
}

/// Latent code of every corpus image, in corpus order.
pub fn corpus_latents(corpus: &Corpus, generator: &ProxyGenerator) -> Result<Vec<Vec<f64>>> {
    corpus
        .images
        .par_iter()
        .map(|img| generator.latent(&img.pixels))
        .collect()
}

/// Position of subject `sid` under class matrix `class_index` in a proxy
/// database.
pub fn proxy_identity(sid: usize, class_index: usize) -> usize {
    5 * (sid - 1) + class_index - 1
}

/// Five proxy identities per subject, one per class matrix, each holding a
/// proxy of every impression. Identity `5 (s - 1) + j` is subject `s` under
/// `M_j`.
pub fn build_proxy_db(
    corpus: &Corpus,
    generator: &ProxyGenerator,
    mode: KeyMode,
    seed: u64,
) -> Result<BiometricDb> {
    let latents = corpus_latents(corpus, generator)?;
    build_proxy_db_from_latents(corpus, generator, &latents, mode, seed)
}

/// As [`build_proxy_db`], with the latents of `corpus` already computed.
pub fn build_proxy_db_from_latents(
    corpus: &Corpus,
    generator: &ProxyGenerator,
    latents: &[Vec<f64>],
    mode: KeyMode,
    seed: u64,
) -> Result<BiometricDb> {
    let n = corpus.subject_count();
    let n_imp = corpus.impressions_per_subject;
    if latents.len() != n * n_imp {
        return Err(Error::Precondition(format!(
            "{} latents for a corpus of {} images",
            latents.len(),
            n * n_imp
        )));
    }
    let len = generator.latent_len();
    let jobs: Vec<(usize, usize)> = (1..=n).flat_map(|s| (1..=5).map(move |j| (s, j))).collect();
    let keys = (1..=n)
        .map(|sid| evaluation_key(seed, mode, sid, len))
        .collect::<Result<Vec<_>>>()?;
    let samples = jobs
        .par_iter()
        .map(|&(sid, j)| {
            latents[(sid - 1) * n_imp..sid * n_imp]
                .iter()
                .map(|z| Ok(Prepared::new(generator.proxy(z, &keys[sid - 1].values, j)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = jobs
        .iter()
        .map(|&(sid, j)| IdentityLabel { source_subject: sid, class_index: j })
        .collect();
    Ok(BiometricDb { labels, samples })
}

/// A scored comparison between `(identity, sample)` positions (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub score: MatchScore,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairScores {
    pub genuine: Vec<PairScore>,
    pub impostor: Vec<PairScore>,
}

impl PairScores {
    pub fn score_set(&self, component: impl Fn(&MatchScore) -> f64) -> ScoreSet {
        ScoreSet::new(
            self.genuine.iter().map(|p| component(&p.score)).collect(),
            self.impostor.iter().map(|p| component(&p.score)).collect(),
        )
    }

    pub fn fused(&self) -> ScoreSet {
        self.score_set(|s| s.fused)
    }

    pub fn keypoint(&self) -> ScoreSet {
        self.score_set(|s| s.keypoint_score)
    }
}

/// All same-identity pairs of distinct samples, plus cross-identity pairs
/// (every one when there are at most `impostor_cap`, otherwise a seeded
/// uniform subset of that size).
pub fn score_all_pairs(db: &BiometricDb, impostor_cap: usize, seed: u64) -> Result<PairScores> {
    if db.sample_count() == 0 {
        return Err(Error::Precondition("cannot score an empty database".into()));
    }
    let positions: Vec<(usize, usize)> = db
        .samples
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.len()).map(move |k| (i, k)))
        .collect();

    let mut genuine_pairs = Vec::new();
    for (i, s) in db.samples.iter().enumerate() {
        for x in 0..s.len() {
            for y in x + 1..s.len() {
                genuine_pairs.push(((i, x), (i, y)));
            }
        }
    }
    let mut impostor_pairs = Vec::new();
    for (p, &a) in positions.iter().enumerate() {
        for &b in &positions[p + 1..] {
            if a.0 != b.0 {
                impostor_pairs.push((a, b));
            }
        }
    }
    if impostor_pairs.len() > impostor_cap {
        let mut rng = rng_from_seed(derive_seed(seed, &[tags::IMPOSTOR_SAMPLE]));
        let mut picked = index::sample(&mut rng, impostor_pairs.len(), impostor_cap).into_vec();
        picked.sort_unstable();
        impostor_pairs = picked.into_iter().map(|k| impostor_pairs[k]).collect();
    }

    let score = |pairs: &[((usize, usize), (usize, usize))]| -> Result<Vec<PairScore>> {
        pairs
            .par_iter()
            .map(|&(a, b)| {
                Ok(PairScore {
                    a,
                    b,
                    score: db.samples[a.0][a.1].score(&db.samples[b.0][b.1])?,
                })
            })
            .collect()
    };
    Ok(PairScores {
        genuine: score(&genuine_pairs)?,
        impostor: score(&impostor_pairs)?,
    })
}
