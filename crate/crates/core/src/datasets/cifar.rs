use std::fs;
use std::path::Path;

use super::LabeledImageSet;
use crate::numerics::Tensor;
use crate::{Error, Result};

pub const CIFAR10_SIDE: usize = 32;
pub const CIFAR10_CLASSES: usize = 10;
/// One label byte followed by 1024 red, 1024 green and 1024 blue bytes.
pub const CIFAR10_RECORD_BYTES: usize = 1 + 3 * CIFAR10_SIDE * CIFAR10_SIDE;

/// Reads one CIFAR-10 binary batch file.
pub fn load_cifar10(path: &Path) -> Result<LabeledImageSet> {
    let bytes = fs::read(path)?;
    let mut set = parse_cifar10(&bytes)?;
    set.name = format!("cifar10:{}", path.display());
    Ok(set)
}

/// Decodes CIFAR-10 binary records into `32 × 32 × 3` images in [0, 1].
pub fn parse_cifar10(bytes: &[u8]) -> Result<LabeledImageSet> {
    if bytes.is_empty() {
        return Err(Error::format(0, "empty CIFAR-10 file"));
    }
    let whole = bytes.len() / CIFAR10_RECORD_BYTES;
    if bytes.len() % CIFAR10_RECORD_BYTES != 0 {
        return Err(Error::format(
            (whole * CIFAR10_RECORD_BYTES) as u64,
            format!(
                "{} bytes is not a whole number of {CIFAR10_RECORD_BYTES}-byte records; the last record is truncated",
                bytes.len()
            ),
        ));
    }
    let plane = CIFAR10_SIDE * CIFAR10_SIDE;
    let mut images = Vec::with_capacity(whole);
    let mut labels = Vec::with_capacity(whole);
    for (r, rec) in bytes.chunks_exact(CIFAR10_RECORD_BYTES).enumerate() {
        let label = usize::from(rec[0]);
        if label >= CIFAR10_CLASSES {
            return Err(Error::format(
                (r * CIFAR10_RECORD_BYTES) as u64,
                format!("label byte {label} in record {r} exceeds 9"),
            ));
        }
        let px = &rec[1..];
        let mut data = Vec::with_capacity(3 * plane);
        for p in 0..plane {
            for ch in 0..3 {
                data.push(f64::from(px[ch * plane + p]) / 255.0);
            }
        }
        images.push(Tensor::new(vec![CIFAR10_SIDE, CIFAR10_SIDE, 3], data)?);
        labels.push(label);
    }
    LabeledImageSet::new("cifar10", images, labels, CIFAR10_CLASSES)
}
