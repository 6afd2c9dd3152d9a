//! Cancelable fingerprint templates from key-salted, class-projected
//! autoencoder latents.
//!
//! A print is encoded to a latent vector, salted with a user key held as two
//! additive shares, rotated by one of five orthonormal class matrices and
//! decoded into a synthetic "proxy" print. Proxies are matched with a fused
//! MSSIM and minutiae score, and can be revoked by issuing a new key.
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`). The
//! trained pipeline runs in `f32` for images and networks and in `f64` for
//! keys and projections; the aliases below name those choices.

pub mod config;
pub mod error;
pub mod eval;
pub mod image;
pub mod matching;
pub mod neural;
pub mod pipeline;
pub mod protocol;
pub mod rng;
pub mod scalar;
pub mod synthgen;
pub mod transform;
pub mod workflow;

pub use error::{Error, Result};

/// Grayscale image with pixels in `[0, 1]`.
pub type GrayImage = image::Image<f32>;
pub type Network = neural::Network<f32>;
pub type Autoencoder = neural::Autoencoder<f32>;
pub type ProjectionMatrix = transform::ProjectionMatrix<f64>;
pub type Prepared = matching::Prepared<f32>;
