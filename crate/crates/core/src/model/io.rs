//! Binary model container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic       8 bytes  "CONFUSE\0"
//! version     u32
//! header_len  u64
//! header      header_len bytes of UTF-8 JSON
//! payload     f64 values of every matrix listed in the header, row-major,
//!             in listed order
//! ```
//!
//! The header carries the dimensions, activation tag and slope, the
//! flattening convention, normalization parameters, the training config and a
//! directory of `(name, rows, cols)` for the payload.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConFuseModel, Dims, TrainConfig};
use crate::activations::Activation;
use crate::ctl::{CtlHyper, FilterBank};
use crate::data::NormParams;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MAGIC: &[u8; 8] = b"CONFUSE\0";
pub const FORMAT_VERSION: u32 = 1;
/// Stacked feature order: channel, then time, then filter.
pub const FLATTEN_CONVENTION: &str = "channel-time-filter/v1";

/// A model plus what is needed to apply it to raw data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: ConFuseModel,
    pub symbol: Option<String>,
    pub norm: Option<NormParams>,
    pub train_config: Option<TrainConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    flatten: String,
    symbol: Option<String>,
    dims: Dims,
    activation: Activation,
    mu: f64,
    lambda: f64,
    norm: Option<NormParams>,
    train_config: Option<TrainConfig>,
    matrices: Vec<MatrixEntry>,
}

fn bad(path: &Path, msg: impl Into<String>) -> Error {
    Error::File {
        path: path.to_path_buf(),
        message: msg.into(),
    }
}

pub fn to_bytes(file: &ModelFile) -> Result<Vec<u8>> {
    let m = &file.model;
    let mut named: Vec<(String, &Matrix)> = m
        .banks
        .iter()
        .enumerate()
        .map(|(c, b)| (format!("bank.{c}"), &b.taps))
        .collect();
    named.push(("fusion".into(), &m.fusion));
    named.push(("z_train".into(), &m.z_train));

    let header = Header {
        format: "confuse-model".into(),
        flatten: FLATTEN_CONVENTION.into(),
        symbol: file.symbol.clone(),
        dims: m.dims,
        activation: m.activation,
        mu: m.hyper.mu,
        lambda: m.hyper.lambda,
        norm: file.norm,
        train_config: file.train_config,
        matrices: named
            .iter()
            .map(|(name, mat)| MatrixEntry {
                name: name.clone(),
                rows: mat.rows(),
                cols: mat.cols(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Data(e.to_string()))?;

    let mut out = Vec::with_capacity(20 + json.len() + 8 * named.iter().map(|(_, x)| x.as_slice().len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, mat) in &named {
        for v in mat.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<ModelFile> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad(path, "not a model file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(bad(path, format!("unsupported model format version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let header_end = 20usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad(path, "truncated header"))?;
    let header: Header =
        serde_json::from_slice(&bytes[20..header_end]).map_err(|e| bad(path, format!("bad header: {e}")))?;
    if header.flatten != FLATTEN_CONVENTION {
        return Err(bad(path, format!("unknown flattening convention '{}'", header.flatten)));
    }

    let mut payload = &bytes[header_end..];
    let mut take = |entry: &MatrixEntry| -> Result<Matrix> {
        let n = entry.rows * entry.cols;
        if payload.len() < 8 * n {
            return Err(bad(path, format!("truncated payload at matrix '{}'", entry.name)));
        }
        let data = payload[..8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        payload = &payload[8 * n..];
        Matrix::from_vec(entry.rows, entry.cols, data)
    };

    let dims = header.dims;
    let mut banks = Vec::with_capacity(dims.channels);
    let mut fusion = None;
    let mut z_train = None;
    for entry in &header.matrices {
        let mat = take(entry)?;
        match entry.name.as_str() {
            "fusion" => fusion = Some(mat),
            "z_train" => z_train = Some(mat),
            name if name.starts_with("bank.") => banks.push(FilterBank::new(mat)),
            other => return Err(bad(path, format!("unknown matrix '{other}'"))),
        }
    }
    if !payload.is_empty() {
        return Err(bad(path, "trailing bytes after payload"));
    }
    let fusion = fusion.ok_or_else(|| bad(path, "missing fusion matrix"))?;
    let z_train = z_train.ok_or_else(|| bad(path, "missing z_train matrix"))?;
    if banks.len() != dims.channels
        || banks.iter().any(|b| b.taps.shape() != (dims.filter_len, dims.filters))
        || fusion.shape() != (dims.fused, dims.stacked_len())
        || z_train.cols() != dims.fused
    {
        return Err(bad(path, "matrix shapes disagree with the stored dimensions"));
    }

    Ok(ModelFile {
        model: ConFuseModel {
            dims,
            activation: header.activation,
            hyper: CtlHyper {
                mu: header.mu,
                lambda: header.lambda,
                activation: header.activation,
            },
            banks,
            fusion,
            z_train,
        },
        symbol: header.symbol,
        norm: header.norm,
        train_config: header.train_config,
    })
}

pub fn write_model(path: impl AsRef<Path>, file: &ModelFile) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(file)?;
    let mut f = std::fs::File::create(path).map_err(|e| bad(path, e.to_string()))?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| bad(path, e.to_string()))?
        .read_to_end(&mut bytes)?;
    from_bytes(&bytes, path)
}
