//! Exhaustive enumeration of ±1 weight assignments for tiny networks and
//! the resulting sorted loss landscapes.
//!
//! Bit order: weight `k` of an `N`-bit assignment is bit `N − 1 − k` of the
//! index, set bit = +1. Weights are listed layer by layer, each weight
//! matrix row-major as `[unit][input]`, followed by any enumerated biases
//! and batchnorm shifts.

mod convnet;
mod scalar;
mod symmetry;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use convnet::{
    canonical_filter_banks, convnet2x2_forward, orbit_average_forward, ConvNetLayout, DropoutMasks,
};
pub use scalar::{scalar_net_forward, ScalarNetLayout, SCALAR_HIDDEN};
pub use symmetry::{flip_hidden_sign, permute_hidden_units};

use crate::datasets::LabeledImageSet;
use crate::group::TransformGroup;
use crate::numerics::level_runs;
use crate::{Error, Result};

/// Hard limit on enumerated bits.
pub const MAX_BITS: usize = 26;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_GRID: usize = 64;
pub const DEFAULT_CONSTANT: f64 = 0.5;

/// An index in `[0, 2^N)` and its ±1 weight vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SignAssignment {
    pub index: u64,
    pub bits: usize,
}

impl SignAssignment {
    pub fn new(index: u64, bits: usize) -> Result<Self> {
        if bits > 63 || index >> bits != 0 {
            return Err(Error::invalid(format!(
                "index {index} does not fit in {bits} bits"
            )));
        }
        Ok(Self { index, bits })
    }

    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let bits = weights.len();
        let mut index = 0u64;
        for &w in weights {
            index <<= 1;
            match w {
                w if w == 1.0 => index |= 1,
                w if w == -1.0 => {}
                _ => return Err(Error::invalid(format!("weights must be ±1, got {w}"))),
            }
        }
        Self::new(index, bits)
    }

    pub fn weight(&self, k: usize) -> f64 {
        if self.index >> (self.bits - 1 - k) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.bits).map(|k| self.weight(k)).collect()
    }
}

/// Writes the ±1 decoding of the low `n` bits of `sub` into `out`.
pub(crate) fn decode_block(sub: u64, out: &mut [f64]) {
    let n = out.len();
    for (k, w) in out.iter_mut().enumerate() {
        *w = if sub >> (n - 1 - k) & 1 == 1 { 1.0 } else { -1.0 };
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    #[default]
    None,
    /// First-layer biases in {−1, +1}, appended to the bit string.
    EnumeratedFirstLayer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarVariant {
    Raw,
    /// Input `[x, c]` with a constant second channel.
    Expanded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvVariant {
    Baseline,
    Dropout,
    Batchnorm,
    Equivariant,
    WrongEquivariant,
}

impl ConvVariant {
    pub const ALL: [ConvVariant; 5] = [
        ConvVariant::Baseline,
        ConvVariant::Dropout,
        ConvVariant::Batchnorm,
        ConvVariant::Equivariant,
        ConvVariant::WrongEquivariant,
    ];

    /// Orbit-averaging group, for the equivariant variants.
    pub fn group(self) -> Option<TransformGroup> {
        match self {
            ConvVariant::Equivariant => Some(TransformGroup::flips()),
            ConvVariant::WrongEquivariant => Some(TransformGroup::rotations()),
            _ => None,
        }
    }
}

/// Shift applied after batch normalization (scale fixed at 1).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnShift {
    /// β = 0. Normalization alone is odd in each channel, so it cannot
    /// split the sign-symmetric plateau.
    Zero,
    /// β ∈ {−1, +1} per channel, enumerated like a bias.
    #[default]
    Enumerated,
}

fn default_constant() -> f64 {
    DEFAULT_CONSTANT
}
fn default_two() -> usize {
    2
}
fn default_masks() -> usize {
    8
}
fn default_rate() -> f64 {
    0.3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TinyNetSpec {
    /// 1→3→3→2→1 (expanded: 2→3→3→2→1), tanh hidden, linear output.
    ScalarNet {
        variant: ScalarVariant,
        #[serde(default)]
        bias: BiasMode,
        /// Value of the extra input channel in the expanded variant.
        #[serde(default = "default_constant")]
        constant: f64,
    },
    /// F 2×2 filters → (variant stage) → dense F→H, tanh → dense H→2.
    Convnet2x2 {
        variant: ConvVariant,
        #[serde(default)]
        bias: BiasMode,
        #[serde(default = "default_two")]
        filters: usize,
        #[serde(default = "default_two")]
        hidden: usize,
        #[serde(default = "default_masks")]
        dropout_masks: usize,
        #[serde(default = "default_rate")]
        dropout_rate: f64,
        #[serde(default)]
        bn_shift: BnShift,
    },
}

impl TinyNetSpec {
    pub fn scalar(variant: ScalarVariant, bias: BiasMode) -> Self {
        TinyNetSpec::ScalarNet {
            variant,
            bias,
            constant: DEFAULT_CONSTANT,
        }
    }

    pub fn convnet(variant: ConvVariant) -> Self {
        TinyNetSpec::Convnet2x2 {
            variant,
            bias: BiasMode::None,
            filters: 2,
            hidden: 2,
            dropout_masks: default_masks(),
            dropout_rate: default_rate(),
            bn_shift: BnShift::default(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TinyNetSpec::ScalarNet { variant, bias, .. } => {
                format!("scalar_net/{variant:?}/{bias:?}").to_lowercase()
            }
            TinyNetSpec::Convnet2x2 { variant, bias, .. } => {
                format!("convnet2x2/{variant:?}/{bias:?}").to_lowercase()
            }
        }
    }

    /// Bits of the enumerated assignment.
    pub fn bit_count(&self) -> usize {
        match self {
            TinyNetSpec::ScalarNet { variant, bias, .. } => {
                ScalarNetLayout::new(*variant, *bias).bits()
            }
            TinyNetSpec::Convnet2x2 { .. } => ConvNetLayout::from_spec(self)
                .map(|l| l.bits())
                .unwrap_or(usize::MAX),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TinyNetSpec::ScalarNet { constant, .. } = self {
            if !constant.is_finite() {
                return Err(Error::invalid("expansion constant must be finite"));
            }
        }
        if let TinyNetSpec::Convnet2x2 { .. } = self {
            ConvNetLayout::from_spec(self)?;
        }
        let bits = self.bit_count();
        if bits > MAX_BITS {
            return Err(Error::invalid(format!(
                "{} needs {bits} bits, the enumeration cap is {MAX_BITS}",
                self.name()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandscapeLoss {
    Mse,
    CrossEntropy,
}

/// Evaluation data for a tiny network.
#[derive(Clone, Debug)]
pub enum TinyData {
    /// `(x, label)` pairs; the label is the regression target.
    Scalar { id: String, samples: Vec<(f64, usize)> },
    Images(LabeledImageSet),
}

impl TinyData {
    pub fn scalar_grid(m: usize) -> Result<Self> {
        Ok(TinyData::Scalar {
            id: format!("scalar_grid_{m}"),
            samples: crate::datasets::gen_scalar_dataset(m)?,
        })
    }

    pub fn two_by_two() -> Self {
        TinyData::Images(crate::datasets::gen_2x2_dataset())
    }

    pub fn id(&self) -> String {
        match self {
            TinyData::Scalar { id, .. } => id.clone(),
            TinyData::Images(set) => {
                if set.notes.is_empty() {
                    set.name.clone()
                } else {
                    format!("{}:{}", set.name, set.notes.split(':').next().unwrap_or(""))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeMeta {
    pub spec: TinyNetSpec,
    pub dataset_id: String,
    pub seed: u64,
    pub loss: LandscapeLoss,
    pub tol: f64,
    pub bits: usize,
}

/// Enumerated losses sorted descending (ties by configuration index).
#[derive(Clone, Debug, PartialEq)]
pub struct LossLandscape {
    pub losses: Vec<f64>,
    pub config_ids: Vec<u32>,
    /// Sizes of the tolerance groups, in sorted order.
    pub multiplicities: Vec<usize>,
    pub meta: LandscapeMeta,
}

impl LossLandscape {
    pub(crate) fn build(mut pairs: Vec<(u32, f64)>, meta: LandscapeMeta) -> Self {
        pairs.par_sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let (config_ids, losses): (Vec<u32>, Vec<f64>) = pairs.into_iter().unzip();
        let multiplicities = level_runs(&losses, meta.tol).iter().map(|r| r.len()).collect();
        Self {
            losses,
            config_ids,
            multiplicities,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn min_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }

    /// Group id (position in sorted order) of every rank.
    pub fn group_ids(&self) -> Vec<u32> {
        let mut ids = Vec::with_capacity(self.len());
        for (g, &m) in self.multiplicities.iter().enumerate() {
            ids.extend(std::iter::repeat_n(g as u32, m));
        }
        ids
    }

    /// Group id for each configuration index in `[0, 2^bits)`; indices that
    /// were not enumerated map to `u32::MAX`.
    pub fn group_of_config(&self) -> Vec<u32> {
        let mut out = vec![u32::MAX; 1usize << self.meta.bits];
        for (&cfg, g) in self.config_ids.iter().zip(self.group_ids()) {
            out[cfg as usize] = g;
        }
        out
    }

    /// Columns `rank, loss, multiplicity_group_id`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "loss", "multiplicity_group_id"])?;
        for (rank, (loss, g)) in self.losses.iter().zip(self.group_ids()).enumerate() {
            w.write_record([rank.to_string(), format!("{loss:.17e}"), g.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn profile_json(&self) -> serde_json::Value {
        let p = degeneracy_profile(self);
        serde_json::json!({
            "distinct_levels": p.distinct_levels,
            "max_multiplicity": p.max_multiplicity,
            "plateau_fraction": p.plateau_fraction,
            "config_count": p.config_count,
            "min_loss": self.min_loss(),
            "spec": self.meta.spec,
            "dataset_id": self.meta.dataset_id,
            "seed": self.meta.seed,
            "tol": self.meta.tol,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyProfile {
    pub distinct_levels: usize,
    pub max_multiplicity: usize,
    pub plateau_fraction: f64,
    pub config_count: usize,
}

pub fn degeneracy_profile(landscape: &LossLandscape) -> DegeneracyProfile {
    let max = landscape.multiplicities.iter().copied().max().unwrap_or(0);
    DegeneracyProfile {
        distinct_levels: landscape.multiplicities.len(),
        max_multiplicity: max,
        plateau_fraction: max as f64 / landscape.len().max(1) as f64,
        config_count: landscape.len(),
    }
}

/// Re-groups a landscape at another tolerance.
pub fn degeneracy_profile_at(landscape: &LossLandscape, tol: f64) -> DegeneracyProfile {
    let runs = level_runs(&landscape.losses, tol);
    let max = runs.iter().map(|r| r.len()).max().unwrap_or(0);
    DegeneracyProfile {
        distinct_levels: runs.len(),
        max_multiplicity: max,
        plateau_fraction: max as f64 / landscape.len().max(1) as f64,
        config_count: landscape.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeComparison {
    pub min_loss_a: f64,
    pub min_loss_b: f64,
    pub distinct_a: usize,
    pub distinct_b: usize,
    pub plateau_a: f64,
    pub plateau_b: f64,
    pub count_a: usize,
    pub count_b: usize,
}

pub fn compare_landscapes(a: &LossLandscape, b: &LossLandscape) -> Result<LandscapeComparison> {
    if a.meta.dataset_id != b.meta.dataset_id {
        return Err(Error::invalid(format!(
            "landscapes use different datasets: {} vs {}",
            a.meta.dataset_id, b.meta.dataset_id
        )));
    }
    let (pa, pb) = (degeneracy_profile(a), degeneracy_profile(b));
    Ok(LandscapeComparison {
        min_loss_a: a.min_loss(),
        min_loss_b: b.min_loss(),
        distinct_a: pa.distinct_levels,
        distinct_b: pb.distinct_levels,
        plateau_a: pa.plateau_fraction,
        plateau_b: pb.plateau_fraction,
        count_a: pa.config_count,
        count_b: pb.config_count,
    })
}

/// Options shared by every enumeration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnumerateOptions {
    pub loss: LandscapeLoss,
    pub tol: f64,
    /// Seeds the dropout masks.
    pub seed: u64,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub workers: usize,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        Self {
            loss: LandscapeLoss::Mse,
            tol: DEFAULT_TOL,
            seed: 0,
            workers: 0,
        }
    }
}

/// Evaluates every assignment (canonical filter banks only for the
/// equivariant variants) and sorts the losses.
pub fn enumerate(spec: &TinyNetSpec, data: &TinyData, opts: &EnumerateOptions) -> Result<LossLandscape> {
    spec.validate()?;
    if !(opts.tol >= 0.0) {
        return Err(Error::invalid("tolerance must be >= 0"));
    }
    let run = || -> Result<Vec<(u32, f64)>> {
        match (spec, data) {
            (TinyNetSpec::ScalarNet { variant, bias, constant }, TinyData::Scalar { samples, .. }) => {
                if opts.loss != LandscapeLoss::Mse {
                    return Err(Error::invalid("the scalar net has one output; use mse"));
                }
                scalar::enumerate(ScalarNetLayout::new(*variant, *bias), *constant, samples)
            }
            (TinyNetSpec::Convnet2x2 { .. }, TinyData::Images(set)) => {
                convnet::enumerate(&ConvNetLayout::from_spec(spec)?, spec, set, opts)
            }
            _ => Err(Error::invalid(format!(
                "{} cannot be evaluated on dataset {}",
                spec.name(),
                data.id()
            ))),
        }
    };
    let pairs = if opts.workers == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start {} workers: {e}", opts.workers)))?
            .install(run)?
    };
    Ok(LossLandscape::build(
        pairs,
        LandscapeMeta {
            spec: spec.clone(),
            dataset_id: data.id(),
            seed: opts.seed,
            loss: opts.loss,
            tol: opts.tol,
            bits: spec.bit_count(),
        },
    ))
}

#[cfg(test)]
mod tests;
