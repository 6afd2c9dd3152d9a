//! `PXNN` parameter files.
//!
//! Layout (little-endian): magic `PXNN`, version `u32`, layer count `u32`;
//! per layer: kind `u8`, activation `u8`, six `u32` geometry fields
//! (`in_h, in_w, in_c, out_c, kernel, post`), weight length `u64`,
//! bias length `u64`, then the weights and biases as `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::layer::{Activation, Geometry, Layer, LayerKind, PostOp};
use super::network::Network;
use super::train::EpochLog;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"PXNN";
pub const VERSION: u32 = 1;

fn kind_code(kind: LayerKind) -> u8 {
    match kind {
        LayerKind::Conv => 0,
        LayerKind::Dense => 1,
    }
}

fn activation_code(act: Activation) -> u8 {
    match act {
        Activation::None => 0,
        Activation::Relu => 1,
        Activation::Sigmoid => 2,
    }
}

fn post_code(post: PostOp) -> u32 {
    match post {
        PostOp::None => 0,
        PostOp::AvgPool2 => 1,
        PostOp::Upsample2 => 2,
    }
}

pub fn encode_network<T: Scalar>(net: &Network<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        let g = &layer.geometry;
        out.push(kind_code(layer.kind));
        out.push(activation_code(layer.activation));
        for v in [g.in_h, g.in_w, g.in_c, g.out_c, g.kernel] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&post_code(g.post).to_le_bytes());
        out.extend_from_slice(&(layer.weight.len() as u64).to_le_bytes());
        out.extend_from_slice(&(layer.bias.len() as u64).to_le_bytes());
        for v in layer.weight.iter().chain(&layer.bias) {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format("PXNN", "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::format("PXNN", "length overflow"))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn decode_network<T: Scalar>(bytes: &[u8]) -> Result<Network<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::format("PXNN", "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format("PXNN", format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let kind = match r.u8()? {
            0 => LayerKind::Conv,
            1 => LayerKind::Dense,
            k => return Err(Error::format("PXNN", format!("unknown layer kind {k}"))),
        };
        let activation = match r.u8()? {
            0 => Activation::None,
            1 => Activation::Relu,
            2 => Activation::Sigmoid,
            a => return Err(Error::format("PXNN", format!("unknown activation {a}"))),
        };
        let mut geo = [0usize; 6];
        for g in &mut geo {
            *g = r.u32()? as usize;
        }
        let post = match geo[5] {
            0 => PostOp::None,
            1 => PostOp::AvgPool2,
            2 => PostOp::Upsample2,
            p => return Err(Error::format("PXNN", format!("unknown post op {p}"))),
        };
        let wlen = r.u64()? as usize;
        let blen = r.u64()? as usize;
        let to_t = |v: Vec<f32>| v.into_iter().map(|x| T::lit(f64::from(x))).collect();
        let weight = to_t(r.f32s(wlen)?);
        let bias = to_t(r.f32s(blen)?);
        layers.push(Layer {
            kind,
            activation,
            geometry: Geometry {
                in_h: geo[0],
                in_w: geo[1],
                in_c: geo[2],
                out_c: geo[3],
                kernel: geo[4],
                post,
            },
            weight,
            bias,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::format("PXNN", "trailing bytes"));
    }
    Network::new(layers)
}

pub fn save_network<T: Scalar>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode_network(net)).map_err(|e| Error::io(path, e))
}

pub fn load_network<T: Scalar>(path: impl AsRef<Path>) -> Result<Network<T>> {
    let path = path.as_ref();
    decode_network(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Training log as CSV `epoch,train_loss,heldout_loss`; the last column is
/// empty when no held-out split was used.
pub fn write_training_log(log: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "epoch,train_loss,heldout_loss").expect("vec write");
    for e in log {
        match e.heldout_loss {
            Some(h) => writeln!(out, "{},{:.8},{:.8}", e.epoch, e.train_loss, h),
            None => writeln!(out, "{},{:.8},", e.epoch, e.train_loss),
        }
        .expect("vec write");
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn header_layout() {
        let net = Network::<f32>::encoder(8, 8).unwrap();
        let bytes = encode_network(&net);
        assert_eq!(&bytes[..4], b"PXNN");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        // kind conv, relu
        assert_eq!(bytes[12], 0);
        assert_eq!(bytes[13], 1);
        let per_layer_header = 2 + 6 * 4 + 16;
        let expected: usize =
            12 + net.layers().iter().map(|l| per_layer_header + 4 * l.param_count()).sum::<usize>();
        assert_eq!(bytes.len(), expected);
    }

    #[test]
    fn f32_parameters_survive() {
        let mut net = Network::<f32>::decoder(8, 6).unwrap();
        net.init_glorot(&mut rng_from_seed(3));
        let back: Network<f32> = decode_network(&encode_network(&net)).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn corrupt_files_rejected() {
        let net = Network::<f32>::encoder(8, 8).unwrap();
        let mut bytes = encode_network(&net);
        assert!(decode_network::<f32>(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'Q';
        assert!(decode_network::<f32>(&bytes).is_err());
    }
}
