//! Flat little-endian `f64` files with a `<path>.json` shape sidecar.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::params::sidecar_path;
use crate::numerics::Tensor;
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct TensorSidecar {
    shape: Vec<usize>,
    dtype: String,
    byte_order: String,
}

pub fn encode_f64_le(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f64_le(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::format(
            (bytes.len() - bytes.len() % 8) as u64,
            format!("{} bytes is not a whole number of f64 values", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    fs::write(path, encode_f64_le(tensor.data()))?;
    let sidecar = TensorSidecar {
        shape: tensor.shape().to_vec(),
        dtype: "f64".into(),
        byte_order: "little".into(),
    };
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let sidecar: TensorSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    if sidecar.dtype != "f64" || sidecar.byte_order != "little" {
        return Err(Error::format(
            0,
            format!(
                "unsupported element type {} ({} endian)",
                sidecar.dtype, sidecar.byte_order
            ),
        ));
    }
    let bytes = fs::read(path)?;
    let values = decode_f64_le(&bytes)?;
    let expected: usize = sidecar.shape.iter().product();
    if values.len() != expected {
        return Err(Error::format(
            bytes.len() as u64,
            format!("file holds {} values, shape {:?} needs {expected}", values.len(), sidecar.shape),
        ));
    }
    Tensor::new(sidecar.shape, values)
}
