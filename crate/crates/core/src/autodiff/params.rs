use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Location of one named tensor inside a flat vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlots {
    pub layer: usize,
    pub kind: String,
    pub params: Vec<Slot>,
    pub buffers: Vec<Slot>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub layers: Vec<LayerSlots>,
    pub param_count: usize,
    pub buffer_count: usize,
}

impl ParamLayout {
    pub fn layer(&self, index: usize) -> Option<&LayerSlots> {
        self.layers.iter().find(|l| l.layer == index)
    }
}

/// Trainable parameters plus non-trainable buffers of one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub values: Vec<f64>,
    pub buffers: Vec<f64>,
    pub layout: ParamLayout,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    layout: ParamLayout,
    buffers: Vec<f64>,
}

impl ParamState {
    pub fn zeros(layout: ParamLayout) -> Self {
        Self {
            values: vec![0.0; layout.param_count],
            buffers: vec![0.0; layout.buffer_count],
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The flat trainable vector.
    pub fn flatten(&self) -> &[f64] {
        &self.values
    }

    /// Rebuilds a state from a flat vector, keeping layout and buffers.
    pub fn unflatten(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.layout.param_count {
            return Err(Error::invalid(format!(
                "flat vector has {} values, layout needs {}",
                flat.len(),
                self.layout.param_count
            )));
        }
        Ok(Self {
            values: flat.to_vec(),
            buffers: self.buffers.clone(),
            layout: self.layout.clone(),
        })
    }

    pub fn slice(&self, slot: &Slot) -> &[f64] {
        &self.values[slot.range()]
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// Writes the flat values to `path` and the layout to `path.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_le_bytes())?;
        let sidecar = Sidecar {
            layout: self.layout.clone(),
            buffers: self.buffers.clone(),
        };
        fs::write(sidecar_path(path), serde_json::to_vec_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
        let bytes = fs::read(path)?;
        let values = crate::io::decode_f64_le(&bytes)?;
        if values.len() != sidecar.layout.param_count {
            return Err(Error::format(
                bytes.len() as u64,
                format!(
                    "parameter file holds {} values, layout needs {}",
                    values.len(),
                    sidecar.layout.param_count
                ),
            ));
        }
        if sidecar.buffers.len() != sidecar.layout.buffer_count {
            return Err(Error::format(
                0,
                "sidecar buffer count does not match its layout",
            ));
        }
        Ok(Self {
            values,
            buffers: sidecar.buffers,
            layout: sidecar.layout,
        })
    }
}

pub(crate) fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}
