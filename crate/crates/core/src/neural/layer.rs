//! Convolution and dense layers with hand-derived backward passes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
    Sigmoid,
}

/// Resampling applied after the activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostOp {
    None,
    AvgPool2,
    Upsample2,
}

/// Shape descriptor. Dense layers read `in_c` as input length and `out_c` as
/// output length with `in_h = in_w = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub post: PostOp,
}

impl Geometry {
    pub fn input_len(&self) -> usize {
        self.in_h * self.in_w * self.in_c
    }

    /// (height, width, channels) after the post op.
    pub fn output_dims(&self) -> (usize, usize, usize) {
        match self.post {
            PostOp::None => (self.in_h, self.in_w, self.out_c),
            PostOp::AvgPool2 => (self.in_h / 2, self.in_w / 2, self.out_c),
            PostOp::Upsample2 => (self.in_h * 2, self.in_w * 2, self.out_c),
        }
    }

    pub fn output_len(&self) -> usize {
        let (h, w, c) = self.output_dims();
        h * w * c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub kind: LayerKind,
    pub activation: Activation,
    pub geometry: Geometry,
    /// Conv: `[ky][kx][in_c][out_c]`. Dense: `[in][out]`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Values kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    pub input: Vec<T>,
    pub activated: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn conv(
        in_h: usize,
        in_w: usize,
        in_c: usize,
        out_c: usize,
        kernel: usize,
        activation: Activation,
        post: PostOp,
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::Dimension(format!("kernel {kernel} must be odd")));
        }
        if post == PostOp::AvgPool2 && (!in_h.is_multiple_of(2) || !in_w.is_multiple_of(2)) {
            return Err(Error::Dimension(format!("{in_h}x{in_w} not poolable by 2")));
        }
        let geometry = Geometry {
            in_h,
            in_w,
            in_c,
            out_c,
            kernel,
            post,
        };
        Ok(Self {
            kind: LayerKind::Conv,
            activation,
            geometry,
            weight: vec![T::zero(); kernel * kernel * in_c * out_c],
            bias: vec![T::zero(); out_c],
        })
    }

    pub fn dense(in_len: usize, out_len: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Dense,
            activation,
            geometry: Geometry {
                in_h: 1,
                in_w: 1,
                in_c: in_len,
                out_c: out_len,
                kernel: 1,
                post: PostOp::None,
            },
            weight: vec![T::zero(); in_len * out_len],
            bias: vec![T::zero(); out_len],
        }
    }

    /// Glorot-uniform weights in `[-a, a]`, `a = sqrt(6 / (fan_in + fan_out))`; zero bias.
    pub fn init_glorot(&mut self, rng: &mut impl Rng) {
        let g = &self.geometry;
        let k2 = g.kernel * g.kernel;
        let (fan_in, fan_out) = match self.kind {
            LayerKind::Conv => (k2 * g.in_c, k2 * g.out_c),
            LayerKind::Dense => (g.in_c, g.out_c),
        };
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in &mut self.weight {
            *w = T::lit(rng.random_range(-a..=a));
        }
        self.bias.iter_mut().for_each(|b| *b = T::zero());
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn expected_weight_len(&self) -> usize {
        let g = &self.geometry;
        match self.kind {
            LayerKind::Conv => g.kernel * g.kernel * g.in_c * g.out_c,
            LayerKind::Dense => g.in_c * g.out_c,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if self.weight.len() != self.expected_weight_len() || self.bias.len() != g.out_c {
            return Err(Error::Dimension(format!(
                "layer parameters ({} weights, {} biases) do not fit geometry {:?}",
                self.weight.len(),
                self.bias.len(),
                g
            )));
        }
        if self.kind == LayerKind::Dense && (g.in_h != 1 || g.in_w != 1 || g.post != PostOp::None) {
            return Err(Error::Dimension("dense layer with spatial geometry".into()));
        }
        if g.kernel.is_multiple_of(2) {
            return Err(Error::Dimension(format!("even kernel {}", g.kernel)));
        }
        if g.post == PostOp::AvgPool2 && (!g.in_h.is_multiple_of(2) || !g.in_w.is_multiple_of(2)) {
            return Err(Error::Dimension("odd extent before 2x pooling".into()));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[T]) -> Result<(Vec<T>, LayerCache<T>)> {
        let g = &self.geometry;
        if input.len() != g.input_len() {
            return Err(Error::Dimension(format!(
                "layer expects {} inputs, got {}",
                g.input_len(),
                input.len()
            )));
        }
        let mut pre = match self.kind {
            LayerKind::Conv => conv_forward(input, g, &self.weight, &self.bias),
            LayerKind::Dense => dense_forward(input, g, &self.weight, &self.bias),
        };
        apply_activation(self.activation, &mut pre);
        let out = match g.post {
            PostOp::None => pre.clone(),
            PostOp::AvgPool2 => avg_pool2(&pre, g.in_h, g.in_w, g.out_c),
            PostOp::Upsample2 => upsample2(&pre, g.in_h, g.in_w, g.out_c),
        };
        Ok((
            out,
            LayerCache {
                input: input.to_vec(),
                activated: pre,
            },
        ))
    }

    /// Returns `(d_input, d_weight, d_bias)`; `d_input` is empty unless requested.
    pub fn backward(
        &self,
        cache: &LayerCache<T>,
        d_out: &[T],
        want_input_grad: bool,
    ) -> (Vec<T>, Vec<T>, Vec<T>) {
        let g = &self.geometry;
        let mut d_pre = match g.post {
            PostOp::None => d_out.to_vec(),
            PostOp::AvgPool2 => avg_pool2_backward(d_out, g.in_h, g.in_w, g.out_c),
            PostOp::Upsample2 => upsample2_backward(d_out, g.in_h, g.in_w, g.out_c),
        };
        activation_backward(self.activation, &cache.activated, &mut d_pre);
        match self.kind {
            LayerKind::Conv => conv_backward(&cache.input, g, &self.weight, &d_pre, want_input_grad),
            LayerKind::Dense => dense_backward(&cache.input, g, &self.weight, &d_pre, want_input_grad),
        }
    }
}

fn apply_activation<T: Scalar>(act: Activation, values: &mut [T]) {
    match act {
        Activation::None => {}
        Activation::Relu => values.iter_mut().for_each(|v| *v = v.max(T::zero())),
        Activation::Sigmoid => values
            .iter_mut()
            .for_each(|v| *v = T::one() / (T::one() + (-*v).exp())),
    }
}

fn activation_backward<T: Scalar>(act: Activation, activated: &[T], grad: &mut [T]) {
    match act {
        Activation::None => {}
        Activation::Relu => grad.iter_mut().zip(activated).for_each(|(g, &a)| {
            if a <= T::zero() {
                *g = T::zero();
            }
        }),
        Activation::Sigmoid => grad
            .iter_mut()
            .zip(activated)
            .for_each(|(g, &s)| *g *= s * (T::one() - s)),
    }
}

/// Valid output-column range for horizontal kernel offset `dx`.
#[inline]
fn col_range(w: usize, dx: isize) -> (usize, usize) {
    let lo = (-dx).max(0) as usize;
    let hi = (w as isize - dx).min(w as isize).max(0) as usize;
    (lo, hi)
}

fn conv_forward<T: Scalar>(input: &[T], g: &Geometry, weight: &[T], bias: &[T]) -> Vec<T> {
    macro_rules! fixed {
        ($($ci:literal x $co:literal),*) => {
            match (g.in_c, g.out_c) {
                $(($ci, $co) => conv_forward_fixed::<T, $ci, $co>(input, g, weight, bias),)*
                _ => conv_forward_any(input, g, weight, bias),
            }
        };
    }
    fixed!(1 x 8, 8 x 2, 2 x 8, 8 x 8, 8 x 1)
}

fn conv_backward<T: Scalar>(
    input: &[T],
    g: &Geometry,
    weight: &[T],
    d_pre: &[T],
    want_input_grad: bool,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    macro_rules! fixed {
        ($($ci:literal x $co:literal),*) => {
            match (g.in_c, g.out_c) {
                $(($ci, $co) => conv_backward_fixed::<T, $ci, $co>(input, g, weight, d_pre, want_input_grad),)*
                _ => conv_backward_any(input, g, weight, d_pre, want_input_grad),
            }
        };
    }
    fixed!(1 x 8, 8 x 2, 2 x 8, 8 x 8, 8 x 1)
}

// Channel counts of the fixed architectures get monomorphized kernels so the
// per-pixel channel loops unroll; `*_any` handles everything else.

fn conv_forward_fixed<T: Scalar, const CI: usize, const CO: usize>(
    input: &[T],
    g: &Geometry,
    weight: &[T],
    bias: &[T],
) -> Vec<T> {
    let (h, w, k) = (g.in_h, g.in_w, g.kernel);
    let pad = (k / 2) as isize;
    let mut out = vec![T::zero(); h * w * CO];
    let bias: [T; CO] = bias.try_into().expect("bias length");
    let taps: Vec<[[T; CO]; CI]> = weight
        .chunks_exact(CI * CO)
        .map(|blk| std::array::from_fn(|ci| blk[ci * CO..(ci + 1) * CO].try_into().expect("row")))
        .collect();
    for y in 0..h {
        let row_out = &mut out[y * w * CO..(y + 1) * w * CO];
        let mut acc = vec![bias; w];
        for ky in 0..k {
            let yy = y as isize + ky as isize - pad;
            if yy < 0 || yy >= h as isize {
                continue;
            }
            let row_in = &input[yy as usize * w * CI..(yy as usize + 1) * w * CI];
            for kx in 0..k {
                let dx = kx as isize - pad;
                let (lo, hi) = col_range(w, dx);
                let tap = &taps[ky * k + kx];
                for x in lo..hi {
                    let xx = (x as isize + dx) as usize;
                    let ip: &[T; CI] = row_in[xx * CI..(xx + 1) * CI].try_into().expect("pixel");
                    let a = &mut acc[x];
                    for ci in 0..CI {
                        let v = ip[ci];
                        for co in 0..CO {
                            a[co] += v * tap[ci][co];
                        }
                    }
                }
            }
        }
        for (dst, src) in row_out.chunks_exact_mut(CO).zip(&acc) {
            dst.copy_from_slice(src);
        }
    }
    out
}

fn conv_backward_fixed<T: Scalar, const CI: usize, const CO: usize>(
    input: &[T],
    g: &Geometry,
    weight: &[T],
    d_pre: &[T],
    want_input_grad: bool,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (h, w, k) = (g.in_h, g.in_w, g.kernel);
    let pad = (k / 2) as isize;
    let taps: Vec<[[T; CO]; CI]> = weight
        .chunks_exact(CI * CO)
        .map(|blk| std::array::from_fn(|ci| blk[ci * CO..(ci + 1) * CO].try_into().expect("row")))
        .collect();
    let mut d_taps = vec![[[T::zero(); CO]; CI]; k * k];
    let mut d_b = [T::zero(); CO];
    let mut d_in = if want_input_grad {
        vec![T::zero(); input.len()]
    } else {
        Vec::new()
    };
    for dp in d_pre.chunks_exact(CO) {
        for co in 0..CO {
            d_b[co] += dp[co];
        }
    }
    for y in 0..h {
        let row_d = &d_pre[y * w * CO..(y + 1) * w * CO];
        for ky in 0..k {
            let yy = y as isize + ky as isize - pad;
            if yy < 0 || yy >= h as isize {
                continue;
            }
            let yy = yy as usize;
            let row_in = &input[yy * w * CI..(yy + 1) * w * CI];
            for kx in 0..k {
                let dx = kx as isize - pad;
                let (lo, hi) = col_range(w, dx);
                let t = ky * k + kx;
                let tap = &taps[t];
                let mut dt = d_taps[t];
                for x in lo..hi {
                    let xx = (x as isize + dx) as usize;
                    let dp: &[T; CO] = row_d[x * CO..(x + 1) * CO].try_into().expect("pixel");
                    let ip: &[T; CI] = row_in[xx * CI..(xx + 1) * CI].try_into().expect("pixel");
                    for ci in 0..CI {
                        for co in 0..CO {
                            dt[ci][co] += ip[ci] * dp[co];
                        }
                    }
                    if want_input_grad {
                        let di = &mut d_in[(yy * w + xx) * CI..(yy * w + xx + 1) * CI];
                        for ci in 0..CI {
                            let mut acc = T::zero();
                            for co in 0..CO {
                                acc += tap[ci][co] * dp[co];
                            }
                            di[ci] += acc;
                        }
                    }
                }
                d_taps[t] = dt;
            }
        }
    }
    let d_w = d_taps.iter().flat_map(|t| t.iter().flatten().copied()).collect();
    (d_in, d_w, d_b.to_vec())
}

fn conv_forward_any<T: Scalar>(input: &[T], g: &Geometry, weight: &[T], bias: &[T]) -> Vec<T> {
    let (h, w, cin, cout, k) = (g.in_h, g.in_w, g.in_c, g.out_c, g.kernel);
    let pad = (k / 2) as isize;
    let mut out = vec![T::zero(); h * w * cout];
    for px in out.chunks_exact_mut(cout) {
        px.copy_from_slice(bias);
    }
    for y in 0..h {
        for ky in 0..k {
            let yy = y as isize + ky as isize - pad;
            if yy < 0 || yy >= h as isize {
                continue;
            }
            let yy = yy as usize;
            for kx in 0..k {
                let dx = kx as isize - pad;
                let (lo, hi) = col_range(w, dx);
                let wk = &weight[(ky * k + kx) * cin * cout..][..cin * cout];
                for x in lo..hi {
                    let xx = (x as isize + dx) as usize;
                    let ip = &input[(yy * w + xx) * cin..][..cin];
                    let op = &mut out[(y * w + x) * cout..][..cout];
                    for (ci, &v) in ip.iter().enumerate() {
                        let wr = &wk[ci * cout..][..cout];
                        for (o, &wv) in op.iter_mut().zip(wr) {
                            *o += v * wv;
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_backward_any<T: Scalar>(
    input: &[T],
    g: &Geometry,
    weight: &[T],
    d_pre: &[T],
    want_input_grad: bool,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (h, w, cin, cout, k) = (g.in_h, g.in_w, g.in_c, g.out_c, g.kernel);
    let pad = (k / 2) as isize;
    let mut d_w = vec![T::zero(); weight.len()];
    let mut d_b = vec![T::zero(); cout];
    let mut d_in = if want_input_grad {
        vec![T::zero(); input.len()]
    } else {
        Vec::new()
    };
    for dp in d_pre.chunks_exact(cout) {
        for (b, &d) in d_b.iter_mut().zip(dp) {
            *b += d;
        }
    }
    for y in 0..h {
        for ky in 0..k {
            let yy = y as isize + ky as isize - pad;
            if yy < 0 || yy >= h as isize {
                continue;
            }
            let yy = yy as usize;
            for kx in 0..k {
                let dx = kx as isize - pad;
                let (lo, hi) = col_range(w, dx);
                let base = (ky * k + kx) * cin * cout;
                for x in lo..hi {
                    let xx = (x as isize + dx) as usize;
                    let dp = &d_pre[(y * w + x) * cout..][..cout];
                    let ip_off = (yy * w + xx) * cin;
                    for ci in 0..cin {
                        let v = input[ip_off + ci];
                        let dwr = &mut d_w[base + ci * cout..][..cout];
                        for (dw, &d) in dwr.iter_mut().zip(dp) {
                            *dw += v * d;
                        }
                    }
                    if want_input_grad {
                        for ci in 0..cin {
                            let wr = &weight[base + ci * cout..][..cout];
                            let mut acc = T::zero();
                            for (&wv, &d) in wr.iter().zip(dp) {
                                acc += wv * d;
                            }
                            d_in[ip_off + ci] += acc;
                        }
                    }
                }
            }
        }
    }
    (d_in, d_w, d_b)
}

fn dense_forward<T: Scalar>(input: &[T], g: &Geometry, weight: &[T], bias: &[T]) -> Vec<T> {
    let mut out = bias.to_vec();
    for (i, &v) in input.iter().enumerate() {
        let wr = &weight[i * g.out_c..][..g.out_c];
        for (o, &wv) in out.iter_mut().zip(wr) {
            *o += v * wv;
        }
    }
    out
}

fn dense_backward<T: Scalar>(
    input: &[T],
    g: &Geometry,
    weight: &[T],
    d_pre: &[T],
    want_input_grad: bool,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut d_w = vec![T::zero(); weight.len()];
    let mut d_in = if want_input_grad {
        vec![T::zero(); input.len()]
    } else {
        Vec::new()
    };
    for (i, &v) in input.iter().enumerate() {
        let wr = &weight[i * g.out_c..][..g.out_c];
        let dwr = &mut d_w[i * g.out_c..][..g.out_c];
        let mut acc = T::zero();
        for ((dw, &wv), &d) in dwr.iter_mut().zip(wr).zip(d_pre) {
            *dw += v * d;
            acc += wv * d;
        }
        if want_input_grad {
            d_in[i] = acc;
        }
    }
    (d_in, d_w, d_pre.to_vec())
}

fn avg_pool2<T: Scalar>(x: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::lit(0.25);
    let mut out = vec![T::zero(); oh * ow * c];
    for y in 0..oh {
        for xo in 0..ow {
            let o = &mut out[(y * ow + xo) * c..][..c];
            for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let i = &x[((2 * y + dy) * w + 2 * xo + dx) * c..][..c];
                for (ov, &iv) in o.iter_mut().zip(i) {
                    *ov += iv;
                }
            }
            o.iter_mut().for_each(|v| *v *= quarter);
        }
    }
    out
}

fn avg_pool2_backward<T: Scalar>(d_out: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let ow = w / 2;
    let quarter = T::lit(0.25);
    let mut d = vec![T::zero(); h * w * c];
    for y in 0..h {
        for x in 0..w {
            let src = &d_out[((y / 2) * ow + x / 2) * c..][..c];
            let dst = &mut d[(y * w + x) * c..][..c];
            for (dv, &s) in dst.iter_mut().zip(src) {
                *dv = s * quarter;
            }
        }
    }
    d
}

fn upsample2<T: Scalar>(x: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let ow = 2 * w;
    let mut out = vec![T::zero(); 4 * h * w * c];
    for y in 0..2 * h {
        for xo in 0..ow {
            let src = &x[((y / 2) * w + xo / 2) * c..][..c];
            out[(y * ow + xo) * c..][..c].copy_from_slice(src);
        }
    }
    out
}

fn upsample2_backward<T: Scalar>(d_out: &[T], h: usize, w: usize, c: usize) -> Vec<T> {
    let ow = 2 * w;
    let mut d = vec![T::zero(); h * w * c];
    for y in 0..2 * h {
        for xo in 0..ow {
            let src = &d_out[(y * ow + xo) * c..][..c];
            let dst = &mut d[((y / 2) * w + xo / 2) * c..][..c];
            for (dv, &s) in dst.iter_mut().zip(src) {
                *dv += s;
            }
        }
    }
    d
}
