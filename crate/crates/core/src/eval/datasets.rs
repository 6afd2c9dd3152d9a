//! Decoder training data: subjects are dealt round-robin into five mixed
//! subsets; subset `j` is projected on `M_j` and trained toward class-`j`
//! prints.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::pipeline::ProxyGenerator;
use crate::rng::{derive_seed, tags};
use crate::synthgen::Corpus;
use crate::transform::generate_key;

/// Subset of a subject with within-class rank `rank` (1-based):
/// `1 + ((rank - 1) mod 5)`.
pub fn subset_of_rank(rank: usize) -> usize {
    1 + (rank - 1) % 5
}

#[derive(Debug, Clone)]
pub struct DecoderSample {
    pub subset: usize,
    pub subject_id: usize,
    pub impression_id: usize,
    pub partner_id: usize,
    pub input: Vec<f32>,
    pub target: Image<f32>,
}

/// Key used for subject `subject_id` during decoder training.
pub fn training_key(key_seed: u64, subject_id: usize, len: usize) -> Result<Vec<f64>> {
    Ok(generate_key(derive_seed(key_seed, &[tags::TRAIN_KEYS, subject_id as u64]), len)?.values)
}

/// `(subject_id, partner_id, subset)` for every subject. The partner is the
/// class-`subset` member of the same subset holding the same within-class
/// rank among that subset's members, wrapping when the subset has fewer
/// class-`subset` members.
pub fn partner_table(corpus: &Corpus) -> Result<Vec<(usize, usize, usize)>> {
    let spc = corpus.subjects_per_class;
    let n = corpus.subject_count();
    // members[subset][class] = subject ids in ascending order
    let mut members = vec![vec![Vec::new(); 5]; 5];
    for sid in 1..=n {
        let class = (sid - 1) / spc;
        let rank = (sid - 1) % spc + 1;
        members[subset_of_rank(rank) - 1][class].push(sid);
    }
    for (j, by_class) in members.iter().enumerate() {
        if by_class[j].is_empty() {
            return Err(Error::Precondition(format!(
                "corpus too small: subset {} has no class-{} subjects",
                j + 1,
                j + 1
            )));
        }
    }
    let mut table = Vec::with_capacity(n);
    for (j, by_class) in members.iter().enumerate() {
        let targets = &by_class[j];
        for list in by_class {
            for (pos, &sid) in list.iter().enumerate() {
                table.push((sid, targets[pos % targets.len()], j + 1));
            }
        }
    }
    table.sort_unstable();
    Ok(table)
}

pub fn build_decoder_training_sets(
    corpus: &Corpus,
    generator: &ProxyGenerator,
    key_seed: u64,
) -> Result<Vec<DecoderSample>> {
    let table = partner_table(corpus)?;
    let len = generator.latent_len();
    let per_subject = table
        .par_iter()
        .map(|&(sid, partner, subset)| {
            let key = training_key(key_seed, sid, len)?;
            corpus
                .subject_images(sid)
                .iter()
                .map(|img| {
                    let z = generator.latent(&img.pixels)?;
                    let salted: Vec<f64> = z.iter().zip(&key).map(|(a, b)| a + b).collect();
                    let projected = generator.project(&salted, subset)?;
                    let target = corpus.image(partner, img.impression_id).pixels.clone();
                    Ok(DecoderSample {
                        subset,
                        subject_id: sid,
                        impression_id: img.impression_id,
                        partner_id: partner,
                        input: projected.iter().map(|&v| v as f32).collect(),
                        target,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_subject.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shell(subjects_per_class: usize) -> Corpus {
        Corpus { images: Vec::new(), subjects_per_class, impressions_per_subject: 4, singularities: Vec::new() }
    }

    #[test]
    fn round_robin_subsets() {
        assert_eq!(subset_of_rank(1), 1);
        assert_eq!(subset_of_rank(5), 5);
        assert_eq!(subset_of_rank(6), 1);
        assert_eq!(subset_of_rank(12), 2);
    }

    #[test]
    fn every_subset_mixes_all_classes() {
        let c = shell(25);
        let table = partner_table(&c).unwrap();
        assert_eq!(table.len(), 125);
        for j in 1..=5 {
            let mut classes: Vec<usize> = table
                .iter()
                .filter(|t| t.2 == j)
                .map(|t| c.class_of_subject(t.0).unwrap().index())
                .collect();
            classes.sort_unstable();
            classes.dedup();
            assert_eq!(classes, vec![1, 2, 3, 4, 5], "subset {j}");
        }
        for &(sid, partner, subset) in &table {
            assert_eq!(c.class_of_subject(partner).unwrap().index(), subset);
            let partner_rank = (partner - 1) % 25 + 1;
            assert_eq!(subset_of_rank(partner_rank), subset, "subject {sid}");
        }
    }

    #[test]
    fn too_few_subjects_rejected() {
        assert!(matches!(partner_table(&shell(4)), Err(Error::Precondition(_))));
        assert!(partner_table(&shell(5)).is_ok());
    }
}
