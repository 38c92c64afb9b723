//! Synthetic datasets, group-invariance certificates and CIFAR-10 binary
//! ingestion.

mod cifar;
mod synthetic;

use serde::{Deserialize, Serialize};

pub use cifar::{load_cifar10, parse_cifar10, CIFAR10_CLASSES, CIFAR10_RECORD_BYTES, CIFAR10_SIDE};
pub use synthetic::{
    bars_label, gen_2x2_dataset, gen_bars_dataset, gen_bars_dataset_sized, gen_scalar_dataset,
    BARS_SIDE, TWO_BY_TWO_VERSION,
};

use crate::autodiff::Targets;
use crate::group::{Transform, TransformGroup};
use crate::numerics::{stream, Prng, Tensor};
use crate::{Error, Result};

/// Images (each `H × W × C`) with integer class labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledImageSet {
    pub name: String,
    pub images: Vec<Tensor>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Free-form provenance, e.g. a version stamp or the label rule.
    #[serde(default)]
    pub notes: String,
}

impl LabeledImageSet {
    pub fn new(
        name: impl Into<String>,
        images: Vec<Tensor>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        if let Some(first) = images.first() {
            if first.rank() != 3 || images.iter().any(|i| i.shape() != first.shape()) {
                return Err(Error::invalid("images must share one H×W×C shape"));
            }
        }
        Ok(Self {
            name: name.into(),
            images,
            labels,
            num_classes,
            notes: String::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image_shape(&self) -> Option<&[usize]> {
        self.images.first().map(Tensor::shape)
    }

    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// `N × H × W × C` batch of all images.
    pub fn batch(&self) -> Result<Tensor> {
        Tensor::stack(&self.images)
    }

    pub fn targets(&self) -> Targets {
        Targets::Classes(self.labels.clone())
    }

    /// Deterministic choice of `count` distinct images, kept in their
    /// original order.
    pub fn subset_indices(&self, seed: u64, count: usize) -> Result<Vec<usize>> {
        if count > self.len() {
            return Err(Error::invalid(format!(
                "subset of {count} from a set of {}",
                self.len()
            )));
        }
        let mut idx = Prng::derive(seed, &[stream::SUBSET]).permutation(self.len());
        idx.truncate(count);
        idx.sort_unstable();
        Ok(idx)
    }

    pub fn subset(&self, seed: u64, count: usize) -> Result<Self> {
        let idx = self.subset_indices(seed, count)?;
        Ok(Self {
            name: format!("{}[subset seed={seed} count={count}]", self.name),
            images: idx.iter().map(|&i| self.images[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            notes: self.notes.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// The transformed image is not in the set.
    Missing,
    /// The transformed image is in the set under another label.
    LabelChanged { found_index: usize, found_label: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub image: usize,
    pub transform: Transform,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub invariant: bool,
    pub violations: Vec<Violation>,
}

/// Exhaustive check that every group element maps every image onto a
/// pixel-identical member of the set carrying the same label.
pub fn verify_group_invariance(
    set: &LabeledImageSet,
    group: &TransformGroup,
) -> Result<InvarianceReport> {
    if let Some(shape) = set.image_shape() {
        if group.needs_square() && shape[0] != shape[1] {
            return Err(Error::invalid(format!(
                "rotations need square images, set has {}×{}",
                shape[0], shape[1]
            )));
        }
    }
    let mut violations = Vec::new();
    for (i, img) in set.images.iter().enumerate() {
        for &t in group.elements() {
            let moved = t.apply(img)?;
            let matches: Vec<usize> = set
                .images
                .iter()
                .enumerate()
                .filter(|(_, other)| other.data() == moved.data())
                .map(|(j, _)| j)
                .collect();
            let kind = if matches.is_empty() {
                Some(ViolationKind::Missing)
            } else if matches.iter().any(|&j| set.labels[j] == set.labels[i]) {
                None
            } else {
                Some(ViolationKind::LabelChanged {
                    found_index: matches[0],
                    found_label: set.labels[matches[0]],
                })
            };
            if let Some(kind) = kind {
                violations.push(Violation {
                    image: i,
                    transform: t,
                    kind,
                });
            }
        }
    }
    Ok(InvarianceReport {
        invariant: violations.is_empty(),
        violations,
    })
}
