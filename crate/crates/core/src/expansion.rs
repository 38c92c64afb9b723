//! Input-dimension expansion: spread the original values over a larger
//! input and fill the new positions with constants (or noise).

use serde::{Deserialize, Serialize};

use crate::numerics::{Prng, Tensor};
use crate::{Error, Result};

pub const DEFAULT_FILL: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Fill {
    Constant { value: f64 },
    /// One draw from N(mean, std) per filled element, optionally clamped.
    RandomNormal {
        #[serde(default = "half")]
        mean: f64,
        #[serde(default = "quarter")]
        std: f64,
        #[serde(default = "unit_interval")]
        clamp: Option<(f64, f64)>,
    },
}

fn half() -> f64 {
    0.5
}

fn quarter() -> f64 {
    0.25
}

fn unit_interval() -> Option<(f64, f64)> {
    Some((0.0, 1.0))
}

impl Fill {
    pub fn constant(value: f64) -> Self {
        Fill::Constant { value }
    }

    /// N(0.5, 0.25) clamped to [0, 1].
    pub fn random() -> Self {
        Fill::RandomNormal {
            mean: half(),
            std: quarter(),
            clamp: unit_interval(),
        }
    }

    fn draw(&self, prng: &mut Prng) -> f64 {
        match *self {
            Fill::Constant { value } => value,
            Fill::RandomNormal { mean, std, clamp } => {
                let v = prng.normal(mean, std);
                clamp.map_or(v, |(lo, hi)| v.clamp(lo, hi))
            }
        }
    }
}

impl Default for Fill {
    fn default() -> Self {
        Fill::constant(DEFAULT_FILL)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionConfig {
    pub factor: usize,
    #[serde(default)]
    pub fill: Fill,
    #[serde(default)]
    pub first_kernel_size: Option<usize>,
}

impl ExpansionConfig {
    pub fn new(factor: usize, fill: Fill) -> Self {
        Self {
            factor,
            fill,
            first_kernel_size: None,
        }
    }

    pub fn with_kernel(mut self, kernel: usize) -> Self {
        self.first_kernel_size = Some(kernel);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.factor == 0 {
            return Err(Error::invalid("expansion factor must be >= 1"));
        }
        match self.fill {
            Fill::Constant { value } if !value.is_finite() => {
                Err(Error::invalid(format!("constant fill must be finite, got {value}")))
            }
            Fill::RandomNormal { mean, std, clamp } => {
                if !mean.is_finite() || !std.is_finite() || std < 0.0 {
                    return Err(Error::invalid(format!(
                        "random fill needs finite mean and std >= 0, got N({mean}, {std})"
                    )));
                }
                if let Some((lo, hi)) = clamp {
                    if !(lo <= hi) {
                        return Err(Error::invalid(format!("clamp range [{lo}, {hi}] is empty")));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Places `img[i][j]` at `[i·K][j·K]` of an `HK × WK` canvas; every other
/// element gets the fill. Accepts `H × W` or `H × W × C`.
pub fn expand_image(img: &Tensor, cfg: &ExpansionConfig, prng: &mut Prng) -> Result<Tensor> {
    cfg.validate()?;
    let (h, w, c) = crate::group::image_dims(img)?;
    let k = cfg.factor;
    let (oh, ow) = (h * k, w * k);
    let mut out = Vec::with_capacity(oh * ow * c);
    for y in 0..oh {
        for x in 0..ow {
            if y % k == 0 && x % k == 0 {
                let src = ((y / k) * w + x / k) * c;
                out.extend_from_slice(&img.data()[src..src + c]);
            } else {
                for _ in 0..c {
                    out.push(cfg.fill.draw(prng));
                }
            }
        }
    }
    let mut shape = vec![oh, ow];
    if img.rank() == 3 {
        shape.push(c);
    }
    Tensor::new(shape, out)
}

/// Stride-`K` gather; inverts [`expand_image`].
pub fn collapse_image(expanded: &Tensor, factor: usize) -> Result<Tensor> {
    let (h, w, c) = crate::group::image_dims(expanded)?;
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::invalid(format!(
            "{h}×{w} image is not an expansion by factor {factor}"
        )));
    }
    let (oh, ow) = (h / factor, w / factor);
    let mut out = Vec::with_capacity(oh * ow * c);
    for i in 0..oh {
        for j in 0..ow {
            let src = (i * factor * w + j * factor) * c;
            out.extend_from_slice(&expanded.data()[src..src + c]);
        }
    }
    let mut shape = vec![oh, ow];
    if expanded.rank() == 3 {
        shape.push(c);
    }
    Tensor::new(shape, out)
}

/// Expands every image of an `N × H × W (× C)` batch.
pub fn expand_batch(batch: &Tensor, cfg: &ExpansionConfig, prng: &mut Prng) -> Result<Tensor> {
    let items = (0..batch.batch_len())
        .map(|k| expand_image(&batch.item_tensor(k), cfg, prng))
        .collect::<Result<Vec<_>>>()?;
    Tensor::stack(&items)
}

/// Where one output element of [`expand_vector`] comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Input(usize),
    Constant(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "sources", rename_all = "snake_case")]
pub enum VectorPattern {
    /// `v` unchanged; takes no constants.
    Identity,
    /// `v` followed by the constants.
    Append,
    /// Per input `i`: `[v_i, c_i, v_i, c_i, v_i]`; needs one constant per input.
    Pinn,
    Explicit(Vec<Source>),
}

impl VectorPattern {
    /// Resolves the pattern to explicit sources for the given lengths.
    pub fn sources(&self, inputs: usize, constants: usize) -> Result<Vec<Source>> {
        let sources = match self {
            VectorPattern::Identity => {
                if constants != 0 {
                    return Err(Error::invalid("identity pattern takes no constants"));
                }
                (0..inputs).map(Source::Input).collect()
            }
            VectorPattern::Append => (0..inputs)
                .map(Source::Input)
                .chain((0..constants).map(Source::Constant))
                .collect(),
            VectorPattern::Pinn => {
                if constants != inputs {
                    return Err(Error::invalid(format!(
                        "pinn pattern needs one constant per input ({inputs}), got {constants}"
                    )));
                }
                (0..inputs)
                    .flat_map(|i| {
                        [
                            Source::Input(i),
                            Source::Constant(i),
                            Source::Input(i),
                            Source::Constant(i),
                            Source::Input(i),
                        ]
                    })
                    .collect()
            }
            VectorPattern::Explicit(s) => s.clone(),
        };
        for s in &sources {
            let ok = match *s {
                Source::Input(i) => i < inputs,
                Source::Constant(j) => j < constants,
            };
            if !ok {
                return Err(Error::invalid(format!(
                    "pattern entry {s:?} is out of range for {inputs} inputs and {constants} constants"
                )));
            }
        }
        Ok(sources)
    }

    pub fn output_len(&self, inputs: usize, constants: usize) -> Result<usize> {
        Ok(self.sources(inputs, constants)?.len())
    }
}

pub fn expand_vector(v: &[f64], constants: &[f64], pattern: &VectorPattern) -> Result<Vec<f64>> {
    Ok(pattern
        .sources(v.len(), constants.len())?
        .into_iter()
        .map(|s| match s {
            Source::Input(i) => v[i],
            Source::Constant(j) => constants[j],
        })
        .collect())
}

/// `[a, b, …] → [a, 0, b, 0, …]`.
pub fn interleave_zeros(v: &[f64]) -> Vec<f64> {
    v.iter().flat_map(|&x| [x, 0.0]).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "message", rename_all = "snake_case")]
pub enum FactorCheck {
    Ok,
    Warning(String),
}

/// Warns when the factor exceeds the first convolution's kernel size, the
/// regime where expanded images lose accuracy. Without a kernel size there
/// is nothing to compare against and the check passes.
pub fn validate_factor(cfg: &ExpansionConfig) -> FactorCheck {
    match cfg.first_kernel_size {
        Some(kernel) if cfg.factor > kernel => FactorCheck::Warning(format!(
            "expansion factor {} exceeds the first kernel size {kernel}; original pixels no longer share a receptive field",
            cfg.factor
        )),
        _ => FactorCheck::Ok,
    }
}
