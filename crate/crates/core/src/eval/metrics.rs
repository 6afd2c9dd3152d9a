//! Genuine/impostor score sets, ROC sweep and equal error rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
    pub roc: Vec<RocPoint>,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, impostor: Vec<f64>) -> Self {
        Self { genuine, impostor }
    }

    fn check(&self) -> Result<()> {
        if self.genuine.is_empty() || self.impostor.is_empty() {
            return Err(Error::Precondition(format!(
                "EER needs genuine and impostor scores (have {} and {})",
                self.genuine.len(),
                self.impostor.len()
            )));
        }
        if self.genuine.iter().chain(&self.impostor).any(|s| !s.is_finite()) {
            return Err(Error::Domain("scores must be finite".into()));
        }
        Ok(())
    }

    /// Mean and population standard deviation of each side:
    /// `((genuine_mean, genuine_std), (impostor_mean, impostor_std))`.
    pub fn moments(&self) -> ((f64, f64), (f64, f64)) {
        (mean_std(&self.genuine), mean_std(&self.impostor))
    }

    /// Distance between the two means in units of the pooled standard deviation.
    pub fn separation(&self) -> f64 {
        let ((mg, sg), (mi, si)) = self.moments();
        let pooled = ((sg * sg + si * si) / 2.0).sqrt();
        (mg - mi) / pooled
    }
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Sweeps every observed score plus a `+inf` sentinel as acceptance
/// threshold (accept iff score >= t). FAR and FRR cross somewhere along the
/// sweep; the EER is read off there, interpolating linearly between the two
/// bracketing thresholds.
pub fn compute_eer(scores: &ScoreSet) -> Result<EerResult> {
    scores.check()?;
    let mut gen = scores.genuine.clone();
    let mut imp = scores.impostor.clone();
    gen.sort_by(f64::total_cmp);
    imp.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = gen.iter().chain(&imp).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);

    let (ng, ni) = (gen.len() as f64, imp.len() as f64);
    let roc: Vec<RocPoint> = thresholds
        .iter()
        .map(|&t| RocPoint {
            threshold: t,
            far: (imp.len() - imp.partition_point(|&s| s < t)) as f64 / ni,
            frr: gen.partition_point(|&s| s < t) as f64 / ng,
        })
        .collect();

    let d = |p: &RocPoint| p.far - p.frr;
    // d is 1 at the lowest threshold and -1 at the sentinel
    let k = roc
        .windows(2)
        .position(|w| d(&w[0]) >= 0.0 && d(&w[1]) <= 0.0)
        .expect("FAR - FRR changes sign along the sweep");
    let (a, b) = (roc[k], roc[k + 1]);
    let (eer, threshold) = if d(&a) == 0.0 {
        (a.far, a.threshold)
    } else if d(&b) == 0.0 {
        (b.far, b.threshold)
    } else {
        let alpha = d(&a) / (d(&a) - d(&b));
        let t = if b.threshold.is_finite() {
            a.threshold + alpha * (b.threshold - a.threshold)
        } else {
            a.threshold
        };
        (a.far + alpha * (b.far - a.far), t)
    };
    Ok(EerResult { eer, threshold, roc })
}
