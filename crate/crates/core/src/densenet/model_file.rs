//! Model container:
//!
//! ```text
//! "SERFIQNT"            8 bytes magic
//! u32 LE                format version (1)
//! u32 LE                header length H
//! H bytes UTF-8         `key=value` lines: layer_dims, dropout, output, init_seed
//! per layer             out*in f64 LE weights (row-major), out f64 LE biases
//! ```

use std::path::Path;

use super::{DenseNet, Layer, NetSpec, OutputActivation};
use crate::error::{Error, Result};
use crate::Scalar;

const MAGIC: &[u8; 8] = b"SERFIQNT";
const VERSION: u32 = 1;

pub fn encode_model<S: Scalar>(net: &DenseNet<S>) -> Vec<u8> {
    let spec = net.spec();
    let dims: Vec<String> = spec.layer_dims.iter().map(usize::to_string).collect();
    let header = format!(
        "layer_dims={}\ndropout={}\noutput={}\ninit_seed={}\n",
        dims.join(","),
        spec.dropout,
        spec.output.name(),
        spec.init_seed
    );
    let mut out = Vec::with_capacity(16 + header.len() + 8 * net.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for layer in net.layers() {
        for v in layer.weights.iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_f64_lossless().to_le_bytes());
        }
    }
    out
}

fn parse_header(text: &str) -> Result<NetSpec> {
    let (mut dims, mut dropout, mut output, mut init_seed) = (None, None, None, None);
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format("model header", format!("line `{line}` is not key=value")))?;
        let bad = || Error::format("model header", format!("bad value for `{key}`: `{value}`"));
        match key {
            "layer_dims" => {
                dims = Some(
                    value
                        .split(',')
                        .map(|d| d.parse::<usize>().map_err(|_| bad()))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "dropout" => dropout = Some(value.parse::<f64>().map_err(|_| bad())?),
            "output" => output = Some(OutputActivation::parse(value).ok_or_else(bad)?),
            "init_seed" => init_seed = Some(value.parse::<u64>().map_err(|_| bad())?),
            other => return Err(Error::format("model header", format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| Error::format("model header", format!("missing `{k}`"));
    NetSpec::new(
        dims.ok_or_else(|| missing("layer_dims"))?,
        dropout.ok_or_else(|| missing("dropout"))?,
        output.ok_or_else(|| missing("output"))?,
        init_seed.ok_or_else(|| missing("init_seed"))?,
    )
}

pub fn decode_model<S: Scalar>(bytes: &[u8]) -> Result<DenseNet<S>> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::format("offset 0", "not a model file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::format("offset 8", format!("unsupported model version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let header = bytes
        .get(16..16 + hlen)
        .ok_or_else(|| Error::format("offset 16", "truncated header"))?;
    let header = std::str::from_utf8(header).map_err(|_| Error::format("offset 16", "header is not UTF-8"))?;
    let spec = parse_header(header)?;

    let mut pos = 16 + hlen;
    let mut read_block = |n: usize| -> Result<Vec<S>> {
        let raw = bytes
            .get(pos..pos + 8 * n)
            .ok_or_else(|| Error::format(format!("offset {pos}"), "truncated parameter block"))?;
        pos += 8 * n;
        let vals: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        vals.into_iter()
            .map(|v| S::from_f64(v).filter(|s| s.is_finite()).ok_or_else(|| Error::NonFinite("model parameter".into())))
            .collect()
    };
    let mut layers = Vec::with_capacity(spec.depth());
    for w in spec.layer_dims.windows(2) {
        let weights = read_block(w[0] * w[1])?;
        let bias = read_block(w[1])?;
        let mut layer = Layer::zeros(w[0], w[1]);
        layer.weights = weights;
        layer.bias = bias;
        layers.push(layer);
    }
    if pos != bytes.len() {
        return Err(Error::format(format!("offset {pos}"), "trailing bytes after parameters"));
    }
    DenseNet::from_layers(spec, layers)
}

pub fn save_model<S: Scalar>(net: &DenseNet<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(net)).map_err(|e| Error::io(path, e))
}

pub fn load_model<S: Scalar>(path: impl AsRef<Path>) -> Result<DenseNet<S>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
