//! Deterministic synthetic fingerprint corpus with five pattern classes and
//! several impressions per subject.

pub mod class;
pub mod impressions;
pub mod orientation;
pub mod ridges;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use class::FingerprintClass;
pub use impressions::Perturbation;
pub use orientation::{generate_orientation_field, OrientationField, Singularity, SingularityKind};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::{derive_seed, rng_from_seed, tags};

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintImage {
    pub pixels: Image<f32>,
    pub class: FingerprintClass,
    pub subject_id: usize,
    pub impression_id: usize,
}

/// Renders a master print for `field`. Subject and impression ids are
/// filled in by the caller; the master is impression 1 of subject 1 here.
pub fn synthesize_master(
    field: &OrientationField,
    class: FingerprintClass,
    ridge_frequency: f64,
    seed: u64,
) -> Result<FingerprintImage> {
    Ok(FingerprintImage {
        pixels: ridges::synthesize_master_pixels(field, ridge_frequency, seed)?,
        class,
        subject_id: 1,
        impression_id: 1,
    })
}

/// The master followed by `n - 1` perturbed copies, impression ids `1..=n`.
pub fn derive_impressions(
    master: &FingerprintImage,
    n: usize,
    perturbation: &Perturbation,
    seed: u64,
) -> Result<Vec<FingerprintImage>> {
    if n == 0 {
        return Err(Error::Precondition("at least one impression".into()));
    }
    let mut out = Vec::with_capacity(n);
    out.push(FingerprintImage {
        impression_id: 1,
        ..master.clone()
    });
    for k in 2..=n {
        out.push(FingerprintImage {
            pixels: impressions::perturb(&master.pixels, perturbation, derive_seed(seed, &[k as u64])),
            impression_id: k,
            ..master.clone()
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub subjects_per_class: usize,
    pub impressions_per_subject: usize,
    pub ridge_frequency: f64,
    /// Relative spread of the per-subject ridge frequency.
    pub ridge_frequency_jitter: f64,
    pub perturbation: Perturbation,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            height: 200,
            width: 136,
            subjects_per_class: 25,
            impressions_per_subject: 4,
            ridge_frequency: 0.1,
            ridge_frequency_jitter: 0.05,
            perturbation: Perturbation::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// Ordered by subject id, then impression id.
    pub images: Vec<FingerprintImage>,
    pub subjects_per_class: usize,
    pub impressions_per_subject: usize,
    /// Singularities of each subject's generating field, indexed by `subject_id - 1`.
    /// Empty for corpora loaded from disk.
    pub singularities: Vec<Vec<Singularity>>,
}

impl Corpus {
    pub fn subject_count(&self) -> usize {
        5 * self.subjects_per_class
    }

    pub fn class_of_subject(&self, subject_id: usize) -> Result<FingerprintClass> {
        if subject_id == 0 || subject_id > self.subject_count() {
            return Err(Error::Domain(format!("subject {subject_id} not in corpus")));
        }
        FingerprintClass::from_index((subject_id - 1) / self.subjects_per_class + 1)
    }

    /// Impressions of one subject in impression order.
    pub fn subject_images(&self, subject_id: usize) -> &[FingerprintImage] {
        let n = self.impressions_per_subject;
        let start = (subject_id - 1) * n;
        &self.images[start..start + n]
    }

    pub fn image(&self, subject_id: usize, impression_id: usize) -> &FingerprintImage {
        &self.subject_images(subject_id)[impression_id - 1]
    }
}

/// Generates one subject: field, master and impressions.
pub fn synthesize_subject(
    config: &SynthConfig,
    class: FingerprintClass,
    subject_id: usize,
) -> Result<(Vec<FingerprintImage>, Vec<Singularity>)> {
    let sid = subject_id as u64;
    let field = generate_orientation_field(
        class,
        derive_seed(config.seed, &[tags::ORIENTATION, sid]),
        config.height,
        config.width,
    )?;
    let mut rng = rng_from_seed(derive_seed(config.seed, &[tags::FREQUENCY, sid]));
    let jitter = config.ridge_frequency_jitter;
    let frequency = config.ridge_frequency
        * if jitter > 0.0 {
            1.0 + rng.random_range(-jitter..=jitter)
        } else {
            1.0
        };
    let mut master = synthesize_master(
        &field,
        class,
        frequency.clamp(0.05, 0.25),
        derive_seed(config.seed, &[tags::RIDGES, sid]),
    )?;
    master.subject_id = subject_id;
    let images = derive_impressions(
        &master,
        config.impressions_per_subject,
        &config.perturbation,
        derive_seed(config.seed, &[tags::IMPRESSIONS, sid]),
    )?;
    Ok((images, field.singularities))
}

/// Subject ids run in contiguous per-class blocks: class 1 owns
/// `1..=subjects_per_class`, class 5 the highest block.
pub fn build_corpus(config: &SynthConfig) -> Result<Corpus> {
    if config.impressions_per_subject == 0 && config.subjects_per_class > 0 {
        return Err(Error::Precondition("impressions_per_subject must be >= 1".into()));
    }
    let n = 5 * config.subjects_per_class;
    let subjects = (1..=n)
        .into_par_iter()
        .map(|sid| {
            let class = FingerprintClass::from_index((sid - 1) / config.subjects_per_class + 1)?;
            synthesize_subject(config, class, sid)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut images = Vec::with_capacity(n * config.impressions_per_subject);
    let mut singularities = Vec::with_capacity(n);
    for (imgs, sing) in subjects {
        images.extend(imgs);
        singularities.push(sing);
    }
    Ok(Corpus {
        images,
        subjects_per_class: config.subjects_per_class,
        impressions_per_subject: config.impressions_per_subject,
        singularities,
    })
}

pub fn image_relative_path(img: &FingerprintImage) -> PathBuf {
    PathBuf::from(format!(
        "class_{}/subject_{}/imp_{}.pgm",
        img.class.index(),
        img.subject_id,
        img.impression_id
    ))
}

/// Writes `class_<i>/subject_<id>/imp_<k>.pgm` under `root` plus `manifest.csv`.
pub fn write_corpus(corpus: &Corpus, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut manifest = String::from("path,class,subject,impression\n");
    for img in &corpus.images {
        let rel = image_relative_path(img);
        img.pixels.write_pgm(root.join(&rel))?;
        writeln!(
            manifest,
            "{},{},{},{}",
            rel.display(),
            img.class.index(),
            img.subject_id,
            img.impression_id
        )
        .expect("string write");
    }
    let path = root.join("manifest.csv");
    fs::write(&path, manifest).map_err(|e| Error::io(path, e))
}

/// Loads a corpus written by [`write_corpus`].
pub fn read_corpus(root: impl AsRef<Path>) -> Result<Corpus> {
    let root = root.as_ref();
    let path = root.join("manifest.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("path,class,subject,impression") {
        return Err(Error::format("manifest", "unexpected header"));
    }
    let mut images = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::format("manifest", format!("bad row {line:?}")));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::format("manifest", format!("bad number {s:?}")))
        };
        images.push(FingerprintImage {
            pixels: Image::read_pgm(root.join(cols[0]))?,
            class: FingerprintClass::from_index(num(cols[1])?)?,
            subject_id: num(cols[2])?,
            impression_id: num(cols[3])?,
        });
    }
    images.sort_by_key(|i| (i.subject_id, i.impression_id));
    let subjects = images.iter().map(|i| i.subject_id).max().unwrap_or(0);
    if subjects % 5 != 0 {
        return Err(Error::format("manifest", "subject count not a multiple of 5"));
    }
    let per_subject = if subjects == 0 { 0 } else { images.len() / subjects };
    if per_subject * subjects != images.len() {
        return Err(Error::format("manifest", "uneven impressions per subject"));
    }
    Ok(Corpus {
        images,
        subjects_per_class: subjects / 5,
        impressions_per_subject: per_subject,
        singularities: Vec::new(),
    })
}
