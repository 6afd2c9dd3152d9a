//! Minibatch training loops for the autoencoder and the proxy decoder.

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::layer::Activation;
use super::loss::{mssim_loss, reconstruction_loss};
use super::network::{Gradients, Network};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::{derive_seed, rng_from_seed, tags};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Fraction of samples withheld for the per-epoch held-out loss.
    pub heldout_fraction: f64,
    /// Number of leading layers kept at their initial parameters.
    pub frozen_layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            adam: AdamConfig::default(),
            seed: 0,
            heldout_fraction: 0.2,
            frozen_layers: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub heldout_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T> {
    pub encoder: Network<T>,
    pub decoder: Network<T>,
}

impl<T: Scalar> Autoencoder<T> {
    pub fn new(h: usize, w: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(derive_seed(seed, &[tags::AE_INIT]));
        let mut encoder = Network::encoder(h, w)?;
        let mut decoder = Network::decoder(h, w)?;
        encoder.init_glorot(&mut rng);
        decoder.init_glorot(&mut rng);
        if encoder.output_len() != decoder.input_len() {
            return Err(Error::Dimension("encoder output does not feed decoder".into()));
        }
        Ok(Self { encoder, decoder })
    }

    /// Root mean square of the latent codes of `images`.
    pub fn latent_rms(&self, images: &[Image<T>]) -> Result<f64> {
        let sums = images
            .par_iter()
            .map(|img| {
                let z = encode(img, &self.encoder)?;
                Ok(z.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>() / z.len().max(1) as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((sums.iter().sum::<f64>() / sums.len().max(1) as f64).sqrt())
    }

    /// Rescales the latent code to RMS `target` over `images` without
    /// changing reconstructions: relu layers are positively homogeneous, so
    /// the encoder's last layer is multiplied by `s` and the weights of the
    /// decoder's first layer divided by `s`. Requires both ends to be relu
    /// or linear.
    pub fn normalize_latent(&mut self, images: &[Image<T>], target: f64) -> Result<f64> {
        if !(target > 0.0) {
            return Err(Error::Precondition(format!("latent RMS target {target} must be positive")));
        }
        let rms = self.latent_rms(images)?;
        if !(rms > 0.0) || !rms.is_finite() {
            return Err(Error::Degenerate(format!("latent RMS is {rms}")));
        }
        let s = T::lit(target / rms);
        let last = self.encoder.layers_mut().last_mut().expect("encoder has layers");
        if last.activation == Activation::Sigmoid {
            return Err(Error::Precondition("sigmoid latents cannot be rescaled".into()));
        }
        last.weight.iter_mut().for_each(|v| *v *= s);
        last.bias.iter_mut().for_each(|v| *v *= s);
        let first = &mut self.decoder.layers_mut()[0];
        first.weight.iter_mut().for_each(|v| *v /= s);
        Ok(target / rms)
    }

    pub fn reconstruct(&self, image: &Image<T>) -> Result<Image<T>> {
        decode(&encode(image, &self.encoder)?, &self.decoder, image.height(), image.width())
    }
}

/// Flat latent vector of a grayscale image.
pub fn encode<T: Scalar>(image: &Image<T>, encoder: &Network<T>) -> Result<Vec<T>> {
    if image.data().len() != encoder.input_len() {
        return Err(Error::Dimension(format!(
            "{}x{} image does not fit an encoder taking {} pixels",
            image.height(),
            image.width(),
            encoder.input_len()
        )));
    }
    encoder.forward_slice(image.data())
}

/// Decodes a flat latent into an `h x w` image with values in (0, 1).
pub fn decode<T: Scalar>(latent: &[T], decoder: &Network<T>, h: usize, w: usize) -> Result<Image<T>> {
    if latent.len() != decoder.input_len() {
        return Err(Error::Dimension(format!(
            "latent of length {} for a decoder taking {}",
            latent.len(),
            decoder.input_len()
        )));
    }
    if decoder.output_len() != h * w {
        return Err(Error::Dimension(format!(
            "decoder emits {} values, not {h}x{w}",
            decoder.output_len()
        )));
    }
    Image::new(h, w, decoder.forward_slice(latent)?)
}

fn split_indices(n: usize, config: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(derive_seed(config.seed, &[tags::SPLIT])));
    let held = ((n as f64) * config.heldout_fraction.clamp(0.0, 1.0)).round() as usize;
    let held = held.min(n.saturating_sub(1));
    let heldout = idx[..held].to_vec();
    let mut train = idx[held..].to_vec();
    train.sort_unstable();
    (train, heldout)
}

/// Averages per-sample `(loss, grads)` in sample order so the sum does not
/// depend on thread scheduling.
fn reduce<T: Scalar>(parts: Vec<(f64, Vec<Gradients<T>>)>) -> (f64, Vec<Gradients<T>>) {
    let n = parts.len();
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().expect("nonempty batch");
    for (l, g) in iter {
        loss += l;
        for (acc, gi) in grads.iter_mut().zip(&g) {
            acc.add_assign(gi);
        }
    }
    let inv = T::lit(1.0 / n as f64);
    grads.iter_mut().for_each(|g| g.scale(inv));
    (loss / n as f64, grads)
}

fn check_loss(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Training {
            layer: None,
            message: format!("loss became {loss} in epoch {epoch}"),
        })
    }
}

fn batches(order: &[usize], batch_size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(batch_size.max(1))
}

/// Trains encoder and decoder jointly on mean squared reconstruction error.
pub fn train_autoencoder<T: Scalar>(
    images: &[Image<T>],
    init: Autoencoder<T>,
    config: &TrainConfig,
) -> Result<(Autoencoder<T>, Vec<EpochLog>)> {
    if images.is_empty() {
        return Err(Error::Precondition("autoencoder training needs images".into()));
    }
    let (train, heldout) = split_indices(images.len(), config);
    let mut model = init;
    let mut enc_state = AdamState::new(&model.encoder, config.adam);
    let mut dec_state = AdamState::new(&model.decoder, config.adam);
    let mut log = Vec::with_capacity(config.epochs);

    let sample = |model: &Autoencoder<T>, i: usize| -> Result<(f64, Vec<Gradients<T>>)> {
        let x = images[i].data();
        let (z, enc_cache) = model.encoder.forward_cached(x)?;
        let (x_hat, dec_cache) = model.decoder.forward_cached(&z)?;
        let (loss, d_out) = reconstruction_loss(x, &x_hat)?;
        let (dec_grads, d_z) = model.decoder.backward(&dec_cache, &d_out, true);
        let (enc_grads, _) = model.encoder.backward(&enc_cache, &d_z, false);
        Ok((loss.as_f64(), vec![enc_grads, dec_grads]))
    };

    for epoch in 0..config.epochs {
        let mut order = train.clone();
        order.shuffle(&mut rng_from_seed(derive_seed(
            config.seed,
            &[tags::AE_SHUFFLE, epoch as u64],
        )));
        let mut loss_sum = 0.0;
        let mut nb = 0usize;
        for batch in batches(&order, config.batch_size) {
            let parts = batch
                .par_iter()
                .map(|&i| sample(&model, i))
                .collect::<Result<Vec<_>>>()?;
            let (loss, grads) = reduce(parts);
            check_loss(loss, epoch)?;
            let (enc, es) = adam_step(&model.encoder, &grads[0], &enc_state)?;
            let (dec, ds) = adam_step(&model.decoder, &grads[1], &dec_state)?;
            model = Autoencoder {
                encoder: enc,
                decoder: dec,
            };
            enc_state = es;
            dec_state = ds;
            loss_sum += loss;
            nb += 1;
        }
        let heldout_loss = if heldout.is_empty() {
            None
        } else {
            let losses = heldout
                .par_iter()
                .map(|&i| {
                    let x_hat = model.reconstruct(&images[i])?;
                    Ok(reconstruction_loss(images[i].data(), x_hat.data())?.0.as_f64())
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(losses.iter().sum::<f64>() / losses.len() as f64)
        };
        let entry = EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / nb.max(1) as f64,
            heldout_loss,
        };
        info!(
            "autoencoder epoch {}/{}: train {:.5} heldout {:?}",
            entry.epoch, config.epochs, entry.train_loss, entry.heldout_loss
        );
        log.push(entry);
    }
    Ok((model, log))
}

/// Trains a decoder from projected latents to target images under
/// `1 - MSSIM(target, prediction)`.
pub fn train_proxy_decoder<T: Scalar>(
    pairs: &[(Vec<T>, Image<T>)],
    init: Network<T>,
    config: &TrainConfig,
) -> Result<(Network<T>, Vec<EpochLog>)> {
    if pairs.is_empty() {
        return Err(Error::Precondition("decoder training needs samples".into()));
    }
    let (h, w) = pairs[0].1.shape();
    for (latent, target) in pairs {
        if latent.len() != init.input_len() || target.shape() != (h, w) || h * w != init.output_len() {
            return Err(Error::Dimension(format!(
                "training pair ({} latent, {:?} target) does not fit the decoder",
                latent.len(),
                target.shape()
            )));
        }
    }
    let (train, heldout) = split_indices(pairs.len(), config);
    let mut model = init;
    let mut state = AdamState::new(&model, config.adam);
    let mut log = Vec::with_capacity(config.epochs);

    let sample = |model: &Network<T>, i: usize| -> Result<(f64, Vec<Gradients<T>>)> {
        let (latent, target) = &pairs[i];
        let (out, cache) = model.forward_cached(latent)?;
        let pred = Image::new(h, w, out)?;
        let (loss, d_out) = mssim_loss(target, &pred)?;
        let (grads, _) = model.backward(&cache, &d_out, false);
        Ok((loss.as_f64(), vec![grads]))
    };

    for epoch in 0..config.epochs {
        let mut order = train.clone();
        order.shuffle(&mut rng_from_seed(derive_seed(
            config.seed,
            &[tags::DEC_SHUFFLE, epoch as u64],
        )));
        let mut loss_sum = 0.0;
        let mut nb = 0usize;
        for batch in batches(&order, config.batch_size) {
            let parts = batch
                .par_iter()
                .map(|&i| sample(&model, i))
                .collect::<Result<Vec<_>>>()?;
            let (loss, mut grads) = reduce(parts);
            check_loss(loss, epoch)?;
            let mut g = grads.remove(0);
            for (d_w, d_b) in g.layers.iter_mut().take(config.frozen_layers) {
                d_w.fill(T::zero());
                d_b.fill(T::zero());
            }
            let (next, st) = adam_step(&model, &g, &state)?;
            model = next;
            state = st;
            loss_sum += loss;
            nb += 1;
        }
        let heldout_loss = if heldout.is_empty() {
            None
        } else {
            let losses = heldout
                .par_iter()
                .map(|&i| {
                    let pred = decode(&pairs[i].0, &model, h, w)?;
                    Ok(mssim_loss(&pairs[i].1, &pred)?.0.as_f64())
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(losses.iter().sum::<f64>() / losses.len() as f64)
        };
        let entry = EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / nb.max(1) as f64,
            heldout_loss,
        };
        info!(
            "proxy decoder epoch {}/{}: train {:.5} heldout {:?}",
            entry.epoch, config.epochs, entry.train_loss, entry.heldout_loss
        );
        log.push(entry);
    }
    Ok((model, log))
}
