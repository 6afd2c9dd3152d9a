use rand::Rng;

use super::layer::{Activation, Layer, LayerCache, PostOp};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Leading layers of [`Network::proxy_decoder`] that keep their initial weights.
pub const PROXY_FROZEN_LAYERS: usize = 1;

/// An ordered stack of layers; consecutive layers must agree on element count.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
}

/// Per-layer `(d_weight, d_bias)`, congruent with the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![T::zero(); l.weight.len()], vec![T::zero(); l.bias.len()]))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(a, &o)| *a += o);
            b.iter_mut().zip(ob).for_each(|(a, &o)| *a += o);
        }
    }

    pub fn scale(&mut self, s: T) {
        for (w, b) in &mut self.layers {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v *= s);
        }
    }
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("network without layers".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            layer.validate()?;
            if i > 0 && layers[i - 1].geometry.output_len() != layer.geometry.input_len() {
                return Err(Error::Dimension(format!(
                    "layer {} emits {} values but layer {} expects {}",
                    i - 1,
                    layers[i - 1].geometry.output_len(),
                    i,
                    layer.geometry.input_len()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Encoder for an `h x w` grayscale input:
    /// conv 3x3 1->8 relu, 2x2 average pool, conv 3x3 8->2 relu.
    pub fn encoder(h: usize, w: usize) -> Result<Self> {
        Self::new(vec![
            Layer::conv(h, w, 1, 8, 3, Activation::Relu, PostOp::AvgPool2)?,
            Layer::conv(h / 2, w / 2, 8, 2, 3, Activation::Relu, PostOp::None)?,
        ])
    }

    /// Decoder mapping a `(h/2) x (w/2) x 2` latent back to `h x w x 1`:
    /// conv 2->8 relu + 2x nearest upsample, conv 8->8 relu, conv 8->1 sigmoid.
    pub fn decoder(h: usize, w: usize) -> Result<Self> {
        if !h.is_multiple_of(2) || !w.is_multiple_of(2) {
            return Err(Error::Dimension(format!("{h}x{w} is not divisible by 2")));
        }
        Self::new(vec![
            Layer::conv(h / 2, w / 2, 2, 8, 3, Activation::Relu, PostOp::Upsample2)?,
            Layer::conv(h, w, 8, 8, 3, Activation::Relu, PostOp::None)?,
            Layer::conv(h, w, 8, 1, 3, Activation::Sigmoid, PostOp::None)?,
        ])
    }

    /// Proxy decoder: a fixed random feature layer (dense latent->features,
    /// relu), a trained dense layer back to the latent grid (relu), then the
    /// convolutional stack of [`Network::decoder`]. Only the layers after the
    /// first [`PROXY_FROZEN_LAYERS`] are trained.
    pub fn proxy_decoder(h: usize, w: usize, features: usize) -> Result<Self> {
        let conv = Self::decoder(h, w)?;
        let latent = conv.input_len();
        let mut layers = vec![
            Layer::dense(latent, features, Activation::Relu),
            Layer::dense(features, latent, Activation::Relu),
        ];
        layers.extend(conv.layers);
        Self::new(layers)
    }

    pub fn init_glorot(&mut self, rng: &mut impl Rng) {
        for layer in &mut self.layers {
            layer.init_glorot(rng);
        }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].geometry.input_len()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map(|l| l.geometry.output_len()).unwrap_or(0)
    }

    pub fn output_shape(&self) -> Vec<usize> {
        let (h, w, c) = self.layers.last().expect("nonempty").geometry.output_dims();
        vec![h, w, c]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    kind: l.kind,
                    activation: l.activation,
                    geometry: l.geometry,
                    weight: l.weight.iter().map(|&v| U::lit(v.as_f64())).collect(),
                    bias: l.bias.iter().map(|&v| U::lit(v.as_f64())).collect(),
                })
                .collect(),
        }
    }

    pub fn forward_slice(&self, input: &[T]) -> Result<Vec<T>> {
        let mut x = input.to_vec();
        for layer in &self.layers {
            x = layer.forward(&x)?.0;
        }
        Ok(x)
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.forward_slice(input.data())?;
        Tensor::new(self.output_shape(), out)
    }

    pub fn forward_cached(&self, input: &[T]) -> Result<(Vec<T>, Vec<LayerCache<T>>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for layer in &self.layers {
            let (out, cache) = layer.forward(&x)?;
            caches.push(cache);
            x = out;
        }
        Ok((x, caches))
    }

    /// Backpropagates `d_output`; returns parameter gradients and the input gradient.
    pub fn backward(
        &self,
        caches: &[LayerCache<T>],
        d_output: &[T],
        want_input_grad: bool,
    ) -> (Gradients<T>, Vec<T>) {
        let mut grads = vec![(Vec::new(), Vec::new()); self.layers.len()];
        let mut d = d_output.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let need_input = i > 0 || want_input_grad;
            let (d_in, d_w, d_b) = layer.backward(&caches[i], &d, need_input);
            grads[i] = (d_w, d_b);
            d = d_in;
        }
        (Gradients { layers: grads }, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn default_architectures_compose() {
        let enc = Network::<f32>::encoder(200, 136).unwrap();
        let dec = Network::<f32>::decoder(200, 136).unwrap();
        assert_eq!(enc.output_len(), 13600);
        assert_eq!(enc.output_shape(), vec![100, 68, 2]);
        assert_eq!(dec.input_len(), 13600);
        assert_eq!(dec.output_shape(), vec![200, 136, 1]);
    }

    #[test]
    fn mismatched_layers_rejected() {
        let a = Layer::<f32>::conv(8, 8, 1, 2, 3, Activation::Relu, PostOp::None).unwrap();
        let b = Layer::<f32>::conv(8, 8, 3, 1, 3, Activation::Relu, PostOp::None).unwrap();
        assert!(matches!(Network::new(vec![a, b]), Err(Error::Dimension(_))));
    }

    #[test]
    fn dense_after_conv_composes_by_flattening() {
        let a = Layer::<f64>::conv(4, 4, 1, 2, 3, Activation::Relu, PostOp::AvgPool2).unwrap();
        let b = Layer::<f64>::dense(8, 3, Activation::Sigmoid);
        let mut net = Network::new(vec![a, b]).unwrap();
        net.init_glorot(&mut rng_from_seed(1));
        let out = net.forward_slice(&[0.5; 16]).unwrap();
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn wrong_input_is_an_error() {
        let enc = Network::<f32>::encoder(16, 16).unwrap();
        let t = Tensor::zeros(vec![16, 15, 1]);
        assert!(enc.forward(&t).is_err());
    }
}
