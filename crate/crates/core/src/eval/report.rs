//! Full evaluation run and its report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::info;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::experiments::{
    latent_spaces, revocability_experiment, stolen_token_trials, LatentSpaces, RevocationMode,
    RevocationStats, StolenTokenTrials,
};
use super::metrics::{compute_eer, EerResult};
use super::pca::PcaResult;
use super::proxy_db::{build_proxy_db_from_latents, corpus_latents, score_all_pairs, BiometricDb, KeyMode, PairScores};
use crate::error::{Error, Result};
use crate::transform::io::write;
use crate::workflow::{StageSeeds, Workspace};

/// Number of following subjects whose prints attack each victim's token.
pub const ATTACKERS_PER_VICTIM: usize = 4;

pub const SCENARIOS: [&str; 3] = ["original", "best_case", "worst_case"];

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: String,
    pub scores: PairScores,
    pub keypoint: EerResult,
    pub fused: EerResult,
    pub genuine_mean: f64,
    pub impostor_mean: f64,
    /// Separation of the fused score distributions in pooled deviations.
    pub separation: f64,
}

impl ScenarioResult {
    pub fn evaluate(name: &str, db: &BiometricDb, impostor_cap: usize, seed: u64) -> Result<Self> {
        let scores = score_all_pairs(db, impostor_cap, seed)?;
        let fused_set = scores.fused();
        let ((genuine_mean, _), (impostor_mean, _)) = fused_set.moments();
        Ok(Self {
            name: name.to_string(),
            keypoint: compute_eer(&scores.keypoint())?,
            fused: compute_eer(&fused_set)?,
            separation: fused_set.separation(),
            genuine_mean,
            impostor_mean,
            scores,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub seeds: StageSeeds,
    pub scenarios: Vec<ScenarioResult>,
    pub revocability: Vec<RevocationStats>,
    pub stolen: StolenTokenTrials,
    pub latent: LatentSpaces,
}

impl EvaluationReport {
    pub fn scenario(&self, name: &str) -> Option<&ScenarioResult> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    pub fn revocation(&self, mode: RevocationMode) -> Option<&RevocationStats> {
        self.revocability.iter().find(|s| s.mode == mode)
    }

    /// Fused-score threshold at the best-case equal error rate.
    pub fn calibrated_threshold(&self) -> Option<f64> {
        self.scenario("best_case").map(|s| s.fused.threshold)
    }

    pub fn eer_table(&self) -> String {
        let mut out = String::from(
            "scenario,keypoint_eer,fused_eer,fused_threshold,genuine_mean,impostor_mean,separation,genuine_pairs,impostor_pairs\n",
        );
        for s in &self.scenarios {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.name,
                s.keypoint.eer,
                s.fused.eer,
                s.fused.threshold,
                s.genuine_mean,
                s.impostor_mean,
                s.separation,
                s.scores.genuine.len(),
                s.scores.impostor.len()
            );
        }
        out
    }
}

/// Trains whatever is missing, runs every experiment and writes the report
/// files into the workspace's report directory.
pub fn run_full_evaluation(ws: &Workspace) -> Result<EvaluationReport> {
    let corpus = ws.corpus()?;
    let generator = ws.generator()?;
    let seeds = ws.seeds();
    let seed = seeds.evaluation;
    let cap = ws.config.eval.impostor_cap;

    info!("encoding {} corpus images", corpus.images.len());
    let latents = corpus_latents(&corpus, &generator)?;

    let mut scenarios = Vec::new();
    info!("scoring original prints");
    scenarios.push(ScenarioResult::evaluate("original", &BiometricDb::from_corpus(&corpus)?, cap, seed)?);
    info!("building best-case proxy database");
    let best = build_proxy_db_from_latents(&corpus, &generator, &latents, KeyMode::Distinct, seed)?;
    scenarios.push(ScenarioResult::evaluate("best_case", &best, cap, seed)?);
    info!("building worst-case proxy database");
    let worst = build_proxy_db_from_latents(&corpus, &generator, &latents, KeyMode::Shared, seed)?;
    scenarios.push(ScenarioResult::evaluate("worst_case", &worst, cap, seed)?);
    drop(worst);

    info!("revocability experiments");
    let revocability = RevocationMode::ALL
        .iter()
        .map(|&mode| revocability_experiment(&corpus, &generator, &latents, &best, mode, seed))
        .collect::<Result<Vec<_>>>()?;
    info!("stolen-token trials");
    let stolen = stolen_token_trials(&corpus, &generator, &latents, seed, ATTACKERS_PER_VICTIM)?;
    info!("latent-space PCA");
    let latent = latent_spaces(&corpus, &generator, &latents, seed)?;

    let report = EvaluationReport { seeds, scenarios, revocability, stolen, latent };
    write_reports(ws, &report)?;
    Ok(report)
}

/// Latent-space PCA on its own, writing only the `pca_<space>.csv` files.
pub fn run_pca(ws: &Workspace) -> Result<LatentSpaces> {
    let corpus = ws.corpus()?;
    let generator = ws.trained_generator()?;
    let latents = corpus_latents(&corpus, &generator)?;
    let spaces = latent_spaces(&corpus, &generator, &latents, ws.seeds().evaluation)?;
    write_latent_spaces(ws, &spaces)?;
    Ok(spaces)
}

pub fn write_latent_spaces(ws: &Workspace, spaces: &LatentSpaces) -> Result<()> {
    let dir = ws.reports_dir();
    write(&dir.join("pca_original.csv"), pca_csv(&spaces.original).as_bytes())?;
    write(&dir.join("pca_projected.csv"), pca_csv(&spaces.projected).as_bytes())
}

fn roc_csv(s: &ScenarioResult) -> String {
    let mut out = String::from("scorer,threshold,far,frr\n");
    for (scorer, eer) in [("keypoint", &s.keypoint), ("fused", &s.fused)] {
        for p in &eer.roc {
            let _ = writeln!(out, "{scorer},{},{},{}", p.threshold, p.far, p.frr);
        }
    }
    out
}

fn scores_csv(s: &ScenarioResult) -> String {
    let mut out = String::from("probe_id,gallery_id,mssim,keypoint,fused,genuine_flag\n");
    for (flag, pairs) in [(1, &s.scores.genuine), (0, &s.scores.impostor)] {
        for p in pairs {
            let _ = writeln!(
                out,
                "{}:{},{}:{},{},{},{},{flag}",
                p.b.0, p.b.1, p.a.0, p.a.1, p.score.mssim, p.score.keypoint_score, p.score.fused
            );
        }
    }
    out
}

fn pca_csv(p: &PcaResult) -> String {
    let mut out = String::from("x,y,label\n");
    for pt in &p.points {
        let _ = writeln!(out, "{},{},{}", pt.x, pt.y, pt.label);
    }
    out
}

fn revocability_csv(stats: &[RevocationStats]) -> String {
    let mut out = String::from("mode,count,mean,std,min,max,histogram\n");
    for s in stats {
        let hist: Vec<String> = s.histogram.iter().map(usize::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.mode.name(),
            s.count,
            s.mean,
            s.std,
            s.min,
            s.max,
            hist.join(";")
        );
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Serialize)]
struct Manifest {
    seeds: StageSeeds,
    config_sha256: String,
    artifacts: BTreeMap<String, String>,
    summary: Summary,
}

#[derive(Serialize)]
struct Summary {
    calibrated_threshold: Option<f64>,
    original_silhouette: f64,
    projected_silhouette: f64,
    stolen_genuine_mean: f64,
    stolen_fraction_below_genuine_mean: f64,
    stolen_trials: usize,
}

fn relative(ws: &Workspace, path: &Path) -> String {
    path.strip_prefix(&ws.root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

/// Writes `eer_table.csv`, `roc_<scenario>.csv`, `scores_<scenario>.csv`,
/// `pca_<space>.csv`, `revocability.csv` and `run_manifest.json`.
pub fn write_reports(ws: &Workspace, report: &EvaluationReport) -> Result<()> {
    let dir = ws.reports_dir();
    write(&dir.join("eer_table.csv"), report.eer_table().as_bytes())?;
    for s in &report.scenarios {
        write(&dir.join(format!("roc_{}.csv", s.name)), roc_csv(s).as_bytes())?;
        write(&dir.join(format!("scores_{}.csv", s.name)), scores_csv(s).as_bytes())?;
    }
    write_latent_spaces(ws, &report.latent)?;
    write(&dir.join("revocability.csv"), revocability_csv(&report.revocability).as_bytes())?;

    let mut artifacts = BTreeMap::new();
    let mut paths = vec![ws.encoder_path(), ws.proxy_decoder_path()];
    paths.extend((1..=5).map(|i| ws.matrix_path(i)));
    paths.push(ws.corpus_dir().join("manifest.csv"));
    for p in paths {
        artifacts.insert(relative(ws, &p), file_hash(&p)?);
    }
    let manifest = Manifest {
        seeds: report.seeds,
        config_sha256: sha256_hex(ws.config.to_toml().as_bytes()),
        artifacts,
        summary: Summary {
            calibrated_threshold: report.calibrated_threshold(),
            original_silhouette: report.latent.original_silhouette,
            projected_silhouette: report.latent.projected_silhouette,
            stolen_genuine_mean: report.stolen.genuine_mean(),
            stolen_fraction_below_genuine_mean: report.stolen.fraction_below_genuine_mean(),
            stolen_trials: report.stolen.attack.len(),
        },
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest is always serializable");
    write(&dir.join("run_manifest.json"), format!("{json}\n").as_bytes())
}
