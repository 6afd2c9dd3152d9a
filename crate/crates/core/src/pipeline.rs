//! The proxy generator: encoder, per-class projection matrices and the
//! proxy decoder bundled with the latent reshape geometry.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::neural::{decode, encode, Network};
use crate::transform::{project_latent, recombine_shares, salt, ProjectionMatrix};

#[derive(Debug, Clone)]
pub struct ProxyGenerator {
    pub encoder: Network<f32>,
    pub decoder: Network<f32>,
    /// Indexed by `class_index - 1`.
    pub matrices: Vec<ProjectionMatrix<f64>>,
    /// Latent reshape rows; columns are the matrix dimension.
    pub rows: usize,
    pub height: usize,
    pub width: usize,
}

impl ProxyGenerator {
    pub fn new(
        encoder: Network<f32>,
        decoder: Network<f32>,
        matrices: Vec<ProjectionMatrix<f64>>,
        rows: usize,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        if matrices.len() != 5 {
            return Err(Error::Config(format!("expected 5 class matrices, got {}", matrices.len())));
        }
        let cols = matrices[0].dim;
        if matrices.iter().any(|m| m.dim != cols) {
            return Err(Error::Config("class matrices differ in dimension".into()));
        }
        let latent = rows * cols;
        if encoder.output_len() != latent || decoder.input_len() != latent {
            return Err(Error::Config(format!(
                "encoder emits {}, decoder takes {}, reshape needs {rows}x{cols}",
                encoder.output_len(),
                decoder.input_len()
            )));
        }
        if encoder.input_len() != height * width || decoder.output_len() != height * width {
            return Err(Error::Config(format!("models do not match {height}x{width} images")));
        }
        Ok(Self {
            encoder,
            decoder,
            matrices,
            rows,
            height,
            width,
        })
    }

    pub fn latent_len(&self) -> usize {
        self.rows * self.matrices[0].dim
    }

    pub fn matrix(&self, class_index: usize) -> Result<&ProjectionMatrix<f64>> {
        class_index
            .checked_sub(1)
            .and_then(|i| self.matrices.get(i))
            .ok_or_else(|| Error::Domain(format!("class index {class_index} outside 1..=5")))
    }

    pub fn latent(&self, image: &Image<f32>) -> Result<Vec<f64>> {
        Ok(encode(image, &self.encoder)?.into_iter().map(f64::from).collect())
    }

    /// Projects an already salted latent on the class matrix.
    pub fn project(&self, salted: &[f64], class_index: usize) -> Result<Vec<f64>> {
        project_latent(salted, self.matrix(class_index)?, self.rows)
    }

    pub fn decode_projected(&self, projected: &[f64]) -> Result<Image<f32>> {
        let input: Vec<f32> = projected.iter().map(|&v| v as f32).collect();
        decode(&input, &self.decoder, self.height, self.width)
    }

    /// `decode((z + key) M_class)`.
    pub fn proxy(&self, latent: &[f64], key: &[f64], class_index: usize) -> Result<Image<f32>> {
        let salted = salt(latent, key)?;
        self.decode_projected(&self.project(&salted.values, class_index)?)
    }

    /// Probe path: the key is rebuilt from its two shares.
    pub fn proxy_from_shares(
        &self,
        latent: &[f64],
        k1: &[f64],
        k2: &[f64],
        class_index: usize,
    ) -> Result<Image<f32>> {
        self.proxy(latent, &recombine_shares(k1, k2)?, class_index)
    }
}
