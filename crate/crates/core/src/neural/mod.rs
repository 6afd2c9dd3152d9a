//! Fixed-architecture convolutional encoder/decoder with exact gradients,
//! losses, Adam, training loops and the binary parameter file format.

pub mod adam;
pub mod io;
pub mod layer;
pub mod loss;
pub mod network;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layer::{Activation, Geometry, Layer, LayerKind, PostOp};
pub use loss::{mssim_loss, reconstruction_loss};
pub use network::{Gradients, Network, PROXY_FROZEN_LAYERS};
pub use tensor::Tensor;
pub use train::{
    decode, encode, train_autoencoder, train_proxy_decoder, Autoencoder, EpochLog, TrainConfig,
};
