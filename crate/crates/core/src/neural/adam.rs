use super::network::{Gradients, Network};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, congruent with the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Gradients<T>,
    pub v: Gradients<T>,
    pub config: AdamConfig,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(net: &Network<T>, config: AdamConfig) -> Self {
        Self {
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            config,
        }
    }
}

/// One bias-corrected Adam update. Returns fresh parameter and state
/// snapshots; the inputs are left untouched.
pub fn adam_step<T: Scalar>(
    params: &Network<T>,
    grads: &Gradients<T>,
    state: &AdamState<T>,
) -> Result<(Network<T>, AdamState<T>)> {
    if grads.layers.len() != params.layers().len() {
        return Err(Error::Dimension("gradient layer count differs from parameters".into()));
    }
    for (i, ((gw, gb), layer)) in grads.layers.iter().zip(params.layers()).enumerate() {
        if gw.len() != layer.weight.len() || gb.len() != layer.bias.len() {
            return Err(Error::Dimension(format!("gradient for layer {i} has wrong length")));
        }
        if gw.iter().chain(gb).any(|g| !g.is_finite()) {
            return Err(Error::Training {
                layer: Some(i),
                message: "non-finite gradient".into(),
            });
        }
    }
    let c = state.config;
    let step = state.step + 1;
    let b1 = T::lit(c.beta1);
    let b2 = T::lit(c.beta2);
    let one = T::one();
    let corr1 = T::lit(1.0 - c.beta1.powi(step as i32));
    let corr2 = T::lit(1.0 - c.beta2.powi(step as i32));
    let lr = T::lit(c.lr);
    let eps = T::lit(c.eps);

    let mut next = params.clone();
    let mut m = state.m.clone();
    let mut v = state.v.clone();
    let update = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let m_hat = m[i] / corr1;
            let v_hat = v[i] / corr2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    for (i, layer) in next.layers_mut().iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[i];
        let (mw, mb) = &mut m.layers[i];
        let (vw, vb) = &mut v.layers[i];
        update(&mut layer.weight, gw, mw, vw);
        update(&mut layer.bias, gb, mb, vb);
    }
    Ok((
        next,
        AdamState {
            step,
            m,
            v,
            config: c,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::layer::Layer;
    use crate::neural::Activation;

    fn scalar_net(w: f64) -> Network<f64> {
        let mut layer = Layer::dense(1, 1, Activation::None);
        layer.weight[0] = w;
        Network::new(vec![layer]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let net = scalar_net(0.3);
        let state = AdamState::new(&net, AdamConfig::default());
        let grads = Gradients::zeros_like(&net);
        let (next, st) = adam_step(&net, &grads, &state).unwrap();
        assert_eq!(next, net);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let net = scalar_net(0.0);
        let state = AdamState::new(&net, AdamConfig::default());
        let grads = Gradients {
            layers: vec![(vec![2.0], vec![0.0])],
        };
        let (next, _) = adam_step(&net, &grads, &state).unwrap();
        let expected = -1e-3 * (2.0 / (2.0 + 1e-8));
        assert!((next.layers()[0].weight[0] - expected).abs() < 1e-15);
        assert_eq!(next.layers()[0].bias[0], 0.0);
    }

    #[test]
    fn nan_gradient_reports_layer() {
        let net = scalar_net(0.0);
        let state = AdamState::new(&net, AdamConfig::default());
        let grads = Gradients {
            layers: vec![(vec![f64::NAN], vec![0.0])],
        };
        match adam_step(&net, &grads, &state) {
            Err(Error::Training { layer: Some(0), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
