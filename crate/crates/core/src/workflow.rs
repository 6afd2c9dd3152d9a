//! File-backed pipeline stages under one output root. Each stage loads its
//! artifact when present and otherwise produces and saves it, so later
//! stages can be run on their own.

use std::path::{Path, PathBuf};

use log::info;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::datasets::build_decoder_training_sets;
use crate::image::Image;
use crate::neural::io::{load_network, save_network, write_training_log};
use crate::neural::{
    train_autoencoder, train_proxy_decoder, AdamConfig, Autoencoder, Network, TrainConfig,
    PROXY_FROZEN_LAYERS,
};
use crate::pipeline::ProxyGenerator;
use crate::rng::{derive_seed, rng_from_seed, tags};
use crate::synthgen::{build_corpus, read_corpus, write_corpus, Corpus};
use crate::transform::io::{load_matrix, save_matrix};
use crate::transform::{class_matrices, ProjectionMatrix};

/// Seeds of every stage, all derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct StageSeeds {
    pub master: u64,
    pub corpus: u64,
    pub autoencoder: u64,
    pub matrices: u64,
    pub decoder: u64,
    pub evaluation: u64,
}

impl StageSeeds {
    pub fn new(master: u64) -> Self {
        Self {
            master,
            corpus: master,
            autoencoder: derive_seed(master, &[tags::STAGE_AE]),
            matrices: derive_seed(master, &[tags::STAGE_MATRICES]),
            decoder: derive_seed(master, &[tags::STAGE_DECODER]),
            evaluation: derive_seed(master, &[tags::STAGE_EVAL]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub config: PipelineConfig,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { root: root.into(), config })
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds::new(self.config.seed)
    }

    fn under(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.under(&self.config.paths.corpus)
    }

    pub fn models_dir(&self) -> PathBuf {
        self.under(&self.config.paths.models)
    }

    pub fn encoder_path(&self) -> PathBuf {
        self.models_dir().join("encoder.pxnn")
    }

    pub fn ae_decoder_path(&self) -> PathBuf {
        self.models_dir().join("ae_decoder.pxnn")
    }

    pub fn proxy_decoder_path(&self) -> PathBuf {
        self.models_dir().join("proxy_decoder.pxnn")
    }

    pub fn matrix_path(&self, class_index: usize) -> PathBuf {
        self.under(&self.config.paths.matrices).join(format!("class_{class_index}.pxmt"))
    }

    pub fn store_dir(&self) -> PathBuf {
        self.under(&self.config.paths.store)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.under(&self.config.paths.reports)
    }

    /// Synthesizes the corpus, writes it, and returns it as read back from
    /// disk so that every later stage sees the same quantized pixels.
    pub fn synthesize(&self) -> Result<Corpus> {
        let dir = self.corpus_dir();
        info!("synthesizing corpus into {}", dir.display());
        let corpus = build_corpus(&self.config.synth_config())?;
        write_corpus(&corpus, &dir)?;
        read_corpus(&dir)
    }

    pub fn corpus(&self) -> Result<Corpus> {
        let dir = self.corpus_dir();
        if dir.join("manifest.csv").exists() {
            read_corpus(&dir)
        } else {
            self.synthesize()
        }
    }

    fn train_config(&self, epochs: usize, seed: u64, heldout_fraction: f64) -> TrainConfig {
        let t = &self.config.training;
        TrainConfig {
            epochs,
            batch_size: t.batch_size,
            adam: AdamConfig { lr: t.learning_rate, ..AdamConfig::default() },
            seed,
            heldout_fraction,
            frozen_layers: 0,
        }
    }

    /// Trains the autoencoder, fixes its latent scale and saves both halves
    /// plus the loss log.
    pub fn train_autoencoder(&self, corpus: &Corpus) -> Result<Autoencoder<f32>> {
        let seed = self.seeds().autoencoder;
        let (h, w) = (self.config.image.height, self.config.image.width);
        let images: Vec<Image<f32>> = corpus.images.iter().map(|i| i.pixels.clone()).collect();
        if images.is_empty() {
            return Err(Error::Precondition("cannot train on an empty corpus".into()));
        }
        let cfg = self.train_config(self.config.training.ae_epochs, seed, self.config.training.heldout_fraction);
        let (mut ae, log) = train_autoencoder(&images, Autoencoder::new(h, w, seed)?, &cfg)?;
        let scale = ae.normalize_latent(&images, self.config.training.latent_rms)?;
        info!("latent rescaled by {scale:.4}");
        save_network(&ae.encoder, self.encoder_path())?;
        save_network(&ae.decoder, self.ae_decoder_path())?;
        write_training_log(&log, self.models_dir().join("ae_training.csv"))?;
        Ok(ae)
    }

    pub fn encoder(&self) -> Result<Network<f32>> {
        let path = self.encoder_path();
        if path.exists() {
            load_network(path)
        } else {
            Ok(self.train_autoencoder(&self.corpus()?)?.encoder)
        }
    }

    pub fn generate_matrices(&self) -> Result<Vec<ProjectionMatrix<f64>>> {
        let matrices = class_matrices::<f64>(self.seeds().matrices, self.config.latent.cols)?;
        for m in &matrices {
            save_matrix(m, self.matrix_path(m.class_index))?;
        }
        Ok(matrices)
    }

    pub fn matrices(&self) -> Result<Vec<ProjectionMatrix<f64>>> {
        if (1..=5).all(|i| self.matrix_path(i).exists()) {
            (1..=5).map(|i| load_matrix(self.matrix_path(i))).collect()
        } else {
            self.generate_matrices()
        }
    }

    pub fn untrained_proxy_decoder(&self) -> Result<Network<f32>> {
        let mut dec = Network::proxy_decoder(
            self.config.image.height,
            self.config.image.width,
            self.config.training.decoder_features,
        )?;
        dec.init_glorot(&mut rng_from_seed(derive_seed(self.seeds().decoder, &[tags::DEC_INIT])));
        Ok(dec)
    }

    pub fn train_decoder(
        &self,
        corpus: &Corpus,
        encoder: Network<f32>,
        matrices: Vec<ProjectionMatrix<f64>>,
    ) -> Result<Network<f32>> {
        let seed = self.seeds().decoder;
        let init = self.untrained_proxy_decoder()?;
        let generator = self.assemble(encoder, init.clone(), matrices)?;
        let samples = build_decoder_training_sets(corpus, &generator, seed)?;
        let pairs: Vec<(Vec<f32>, Image<f32>)> =
            samples.into_iter().map(|s| (s.input, s.target)).collect();
        let mut cfg = self.train_config(self.config.training.decoder_epochs, seed, 0.0);
        cfg.frozen_layers = PROXY_FROZEN_LAYERS;
        let (decoder, log) = train_proxy_decoder(&pairs, init, &cfg)?;
        save_network(&decoder, self.proxy_decoder_path())?;
        write_training_log(&log, self.models_dir().join("decoder_training.csv"))?;
        Ok(decoder)
    }

    pub fn proxy_decoder(&self) -> Result<Network<f32>> {
        let path = self.proxy_decoder_path();
        if path.exists() {
            load_network(path)
        } else {
            let corpus = self.corpus()?;
            self.train_decoder(&corpus, self.encoder()?, self.matrices()?)
        }
    }

    fn assemble(
        &self,
        encoder: Network<f32>,
        decoder: Network<f32>,
        matrices: Vec<ProjectionMatrix<f64>>,
    ) -> Result<ProxyGenerator> {
        ProxyGenerator::new(
            encoder,
            decoder,
            matrices,
            self.config.latent.rows,
            self.config.image.height,
            self.config.image.width,
        )
    }

    /// The trained pipeline, producing whatever stage is missing.
    pub fn generator(&self) -> Result<ProxyGenerator> {
        let encoder = self.encoder()?;
        let matrices = self.matrices()?;
        let decoder = self.proxy_decoder()?;
        self.assemble(encoder, decoder, matrices)
    }

    /// The trained pipeline, refusing to train anything.
    pub fn trained_generator(&self) -> Result<ProxyGenerator> {
        for path in [self.encoder_path(), self.proxy_decoder_path()] {
            if !path.exists() {
                return Err(Error::Config(format!("model {} has not been trained", path.display())));
            }
        }
        if !(1..=5).all(|i| self.matrix_path(i).exists()) {
            return Err(Error::Config("class matrices have not been generated".into()));
        }
        self.generator()
    }
}
