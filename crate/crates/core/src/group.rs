//! Square-image symmetries (a subset of the dihedral group D4) acting on
//! `H × W × C` channel-last images.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::Tensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// Quarter turn counter-clockwise.
    Rot90,
    Rot180,
    Rot270,
    HFlip,
    VFlip,
}

impl Transform {
    pub const ALL: [Transform; 6] = [
        Transform::Identity,
        Transform::Rot90,
        Transform::Rot180,
        Transform::Rot270,
        Transform::HFlip,
        Transform::VFlip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Rot90 => "rot90",
            Transform::Rot180 => "rot180",
            Transform::Rot270 => "rot270",
            Transform::HFlip => "hflip",
            Transform::VFlip => "vflip",
        }
    }

    /// Quarter turns need square images.
    pub fn needs_square(self) -> bool {
        matches!(self, Transform::Rot90 | Transform::Rot270)
    }

    /// Source pixel `(row, col)` for output pixel `(i, j)` of an
    /// `h × w` image.
    fn source(self, i: usize, j: usize, h: usize, w: usize) -> (usize, usize) {
        match self {
            Transform::Identity => (i, j),
            Transform::Rot90 => (j, w - 1 - i),
            Transform::Rot180 => (h - 1 - i, w - 1 - j),
            Transform::Rot270 => (h - 1 - j, i),
            Transform::HFlip => (i, w - 1 - j),
            Transform::VFlip => (h - 1 - i, j),
        }
    }

    pub fn inverse(self) -> Transform {
        match self {
            Transform::Rot90 => Transform::Rot270,
            Transform::Rot270 => Transform::Rot90,
            t => t,
        }
    }

    /// Applies the transform to a row-major `h × w × c` buffer.
    pub fn apply_raw(self, data: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
        debug_assert_eq!(data.len(), h * w * c);
        debug_assert!(!self.needs_square() || h == w);
        let mut out = vec![0.0; data.len()];
        for i in 0..h {
            for j in 0..w {
                let (si, sj) = self.source(i, j, h, w);
                let dst = (i * w + j) * c;
                let src = (si * w + sj) * c;
                out[dst..dst + c].copy_from_slice(&data[src..src + c]);
            }
        }
        out
    }

    /// Applies the transform to an `H × W` or `H × W × C` tensor.
    pub fn apply(self, image: &Tensor) -> Result<Tensor> {
        let (h, w, c) = image_dims(image)?;
        if self.needs_square() && h != w {
            return Err(Error::invalid(format!(
                "{} needs a square image, got {h}×{w}",
                self.name()
            )));
        }
        Tensor::new(image.shape().to_vec(), self.apply_raw(image.data(), h, w, c))
    }

    /// `self ∘ other` (apply `other` first). Returns `None` when the
    /// product is a diagonal reflection, which is not represented here.
    pub fn compose(self, other: Transform) -> Option<Transform> {
        let probe: Vec<f64> = (0..9).map(f64::from).collect();
        let target = self.apply_raw(&other.apply_raw(&probe, 3, 3, 1), 3, 3, 1);
        Transform::ALL
            .into_iter()
            .find(|t| t.apply_raw(&probe, 3, 3, 1) == target)
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transform::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown transform {s:?}")))
    }
}

pub(crate) fn image_dims(image: &Tensor) -> Result<(usize, usize, usize)> {
    match *image.shape() {
        [h, w] => Ok((h, w, 1)),
        [h, w, c] => Ok((h, w, c)),
        ref s => Err(Error::invalid(format!("expected an H×W(×C) image, got {s:?}"))),
    }
}

/// A finite set of transforms that contains the identity and is closed
/// under composition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Transform>", into = "Vec<Transform>")]
pub struct TransformGroup {
    elements: Vec<Transform>,
}

impl TransformGroup {
    pub fn new(elements: impl IntoIterator<Item = Transform>) -> Result<Self> {
        let mut elements: Vec<Transform> = elements.into_iter().collect();
        elements.sort();
        elements.dedup();
        if !elements.contains(&Transform::Identity) {
            return Err(Error::invalid("transform group must contain the identity"));
        }
        for &a in &elements {
            for &b in &elements {
                match a.compose(b) {
                    Some(c) if elements.contains(&c) => {}
                    _ => {
                        return Err(Error::invalid(format!(
                            "transform set is not closed: {a} ∘ {b} is missing"
                        )))
                    }
                }
            }
        }
        Ok(Self { elements })
    }

    pub fn trivial() -> Self {
        Self {
            elements: vec![Transform::Identity],
        }
    }

    /// `{identity, rot180, hflip, vflip}`.
    pub fn flips() -> Self {
        Self::new([
            Transform::Identity,
            Transform::Rot180,
            Transform::HFlip,
            Transform::VFlip,
        ])
        .expect("Klein four-group")
    }

    /// `{identity, rot90, rot180, rot270}`.
    pub fn rotations() -> Self {
        Self::new([
            Transform::Identity,
            Transform::Rot90,
            Transform::Rot180,
            Transform::Rot270,
        ])
        .expect("cyclic group of order 4")
    }

    pub fn elements(&self) -> &[Transform] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn needs_square(&self) -> bool {
        self.elements.iter().any(|t| t.needs_square())
    }
}

impl TryFrom<Vec<Transform>> for TransformGroup {
    type Error = Error;

    fn try_from(v: Vec<Transform>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TransformGroup> for Vec<Transform> {
    fn from(g: TransformGroup) -> Self {
        g.elements
    }
}
