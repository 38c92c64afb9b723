use rayon::prelude::*;

use super::{
    decode_block, BiasMode, BnShift, ConvVariant, EnumerateOptions, LandscapeLoss, SignAssignment,
    TinyNetSpec,
};
use crate::autodiff::BATCHNORM_EPS;
use crate::datasets::LabeledImageSet;
use crate::group::{Transform, TransformGroup};
use crate::numerics::{stream, Prng, Tensor};
use crate::{Error, Result};

const MAX_WIDTH: usize = 8;
const PIXELS: usize = 4;
const CLASSES: usize = 2;

/// Bit layout `filters | W1 | W2 | conv bias | batchnorm shift`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvNetLayout {
    pub variant: ConvVariant,
    pub filters: usize,
    pub hidden: usize,
    pub conv_bias: bool,
    pub bn_shift: bool,
    pub dropout_masks: usize,
    pub dropout_rate: f64,
}

impl ConvNetLayout {
    pub fn from_spec(spec: &TinyNetSpec) -> Result<Self> {
        let TinyNetSpec::Convnet2x2 {
            variant,
            bias,
            filters,
            hidden,
            dropout_masks,
            dropout_rate,
            bn_shift,
        } = *spec
        else {
            return Err(Error::invalid("not a 2×2 convnet spec"));
        };
        if !(1..=MAX_WIDTH).contains(&filters) || !(1..=MAX_WIDTH).contains(&hidden) {
            return Err(Error::invalid(format!(
                "filters and hidden must be in 1..={MAX_WIDTH}, got {filters} and {hidden}"
            )));
        }
        if variant == ConvVariant::Dropout
            && (dropout_masks == 0 || !(0.0..1.0).contains(&dropout_rate))
        {
            return Err(Error::invalid(format!(
                "dropout needs >= 1 mask and a rate in [0, 1), got {dropout_masks} and {dropout_rate}"
            )));
        }
        Ok(Self {
            variant,
            filters,
            hidden,
            conv_bias: bias == BiasMode::EnumeratedFirstLayer,
            bn_shift: variant == ConvVariant::Batchnorm && bn_shift == BnShift::Enumerated,
            dropout_masks,
            dropout_rate,
        })
    }

    pub fn filter_bits(&self) -> usize {
        PIXELS * self.filters
    }

    pub fn bits(&self) -> usize {
        self.filter_bits()
            + self.hidden * self.filters
            + CLASSES * self.hidden
            + if self.conv_bias { self.filters } else { 0 }
            + if self.bn_shift { self.filters } else { 0 }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Weights {
    filt: [[f64; PIXELS]; MAX_WIDTH],
    w1: [[f64; MAX_WIDTH]; MAX_WIDTH],
    w2: [[f64; MAX_WIDTH]; CLASSES],
    bias: [f64; MAX_WIDTH],
    shift: [f64; MAX_WIDTH],
}

fn decode(layout: &ConvNetLayout, index: u64) -> Weights {
    let mut flat = [0.0; 64];
    let n = layout.bits();
    decode_block(index, &mut flat[..n]);
    let (f, h) = (layout.filters, layout.hidden);
    let mut w = Weights::default();
    let mut k = 0;
    for filt in w.filt.iter_mut().take(f) {
        filt.copy_from_slice(&flat[k..k + PIXELS]);
        k += PIXELS;
    }
    for row in w.w1.iter_mut().take(h) {
        row[..f].copy_from_slice(&flat[k..k + f]);
        k += f;
    }
    for row in w.w2.iter_mut() {
        row[..h].copy_from_slice(&flat[k..k + h]);
        k += h;
    }
    if layout.conv_bias {
        w.bias[..f].copy_from_slice(&flat[k..k + f]);
        k += f;
    }
    if layout.bn_shift {
        w.shift[..f].copy_from_slice(&flat[k..k + f]);
    }
    w
}

fn features(layout: &ConvNetLayout, w: &Weights, x: &[f64; PIXELS]) -> [f64; MAX_WIDTH] {
    let mut z = [0.0; MAX_WIDTH];
    for (k, zk) in z.iter_mut().enumerate().take(layout.filters) {
        let mut acc = w.bias[k];
        for e in 0..PIXELS {
            acc += w.filt[k][e] * x[e];
        }
        *zk = acc;
    }
    z
}

fn head(layout: &ConvNetLayout, w: &Weights, z: &[f64; MAX_WIDTH]) -> [f64; CLASSES] {
    let mut h = [0.0; MAX_WIDTH];
    for (j, hj) in h.iter_mut().enumerate().take(layout.hidden) {
        let mut acc = 0.0;
        for k in 0..layout.filters {
            acc += w.w1[j][k] * z[k];
        }
        *hj = acc.tanh();
    }
    let mut out = [0.0; CLASSES];
    for (c, oc) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..layout.hidden {
            acc += w.w2[c][j] * h[j];
        }
        *oc = acc;
    }
    out
}

/// Orbit mean of logits; summed in sorted order so that any permutation
/// of the orbit gives a bitwise-identical result.
fn orbit_mean(mut logits: Vec<[f64; CLASSES]>) -> [f64; CLASSES] {
    logits.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut sum = [0.0; CLASSES];
    for l in &logits {
        sum[0] += l[0];
        sum[1] += l[1];
    }
    let n = logits.len() as f64;
    [sum[0] / n, sum[1] / n]
}

/// Fixed dropout masks shared by every assignment: `[mask][image][filter]`,
/// each entry 0 or `1/(1 − rate)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    pub count: usize,
    pub images: usize,
    pub filters: usize,
    pub values: Vec<f64>,
}

impl DropoutMasks {
    pub fn draw(count: usize, images: usize, filters: usize, rate: f64, seed: u64) -> Self {
        let mut rng = Prng::derive(seed, &[stream::DROPOUT_MASKS]);
        let keep = 1.0 / (1.0 - rate);
        let values = (0..count * images * filters)
            .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
            .collect();
        Self {
            count,
            images,
            filters,
            values,
        }
    }

    pub fn mask(&self, m: usize, image: usize) -> &[f64] {
        let start = (m * self.images + image) * self.filters;
        &self.values[start..start + self.filters]
    }
}

/// Images as flat `[a, b, c, d]` plus the per-image orbits under a group.
struct Prepared {
    images: Vec<[f64; PIXELS]>,
    labels: Vec<usize>,
    orbits: Vec<Vec<[f64; PIXELS]>>,
}

fn flat_image(t: &Tensor) -> Result<[f64; PIXELS]> {
    match t.shape() {
        [2, 2] | [2, 2, 1] => Ok(t.data().try_into().expect("four pixels")),
        s => Err(Error::invalid(format!("expected a 2×2 single-channel image, got {s:?}"))),
    }
}

fn transform(g: Transform, x: &[f64; PIXELS]) -> [f64; PIXELS] {
    g.apply_raw(x, 2, 2, 1).try_into().expect("four pixels")
}

fn prepare(images: &[Tensor], labels: &[usize], group: Option<&TransformGroup>) -> Result<Prepared> {
    let images = images.iter().map(flat_image).collect::<Result<Vec<_>>>()?;
    let orbits = match group {
        Some(g) => images
            .iter()
            .map(|x| g.elements().iter().map(|&t| transform(t, x)).collect())
            .collect(),
        None => Vec::new(),
    };
    Ok(Prepared {
        images,
        labels: labels.to_vec(),
        orbits,
    })
}

fn all_logits(
    layout: &ConvNetLayout,
    w: &Weights,
    data: &Prepared,
    mask: Option<(&DropoutMasks, usize)>,
) -> Vec<[f64; CLASSES]> {
    let f = layout.filters;
    match layout.variant {
        ConvVariant::Equivariant | ConvVariant::WrongEquivariant => data
            .orbits
            .iter()
            .map(|orbit| {
                orbit_mean(
                    orbit
                        .iter()
                        .map(|x| head(layout, w, &features(layout, w, x)))
                        .collect(),
                )
            })
            .collect(),
        ConvVariant::Batchnorm => {
            let zs: Vec<_> = data.images.iter().map(|x| features(layout, w, x)).collect();
            let n = zs.len() as f64;
            let mut mean = [0.0; MAX_WIDTH];
            let mut var = [0.0; MAX_WIDTH];
            for z in &zs {
                for k in 0..f {
                    mean[k] += z[k];
                }
            }
            for m in mean.iter_mut().take(f) {
                *m /= n;
            }
            for z in &zs {
                for k in 0..f {
                    var[k] += (z[k] - mean[k]) * (z[k] - mean[k]);
                }
            }
            let inv: Vec<f64> = (0..f).map(|k| 1.0 / (var[k] / n + BATCHNORM_EPS).sqrt()).collect();
            zs.iter()
                .map(|z| {
                    let mut zn = [0.0; MAX_WIDTH];
                    for k in 0..f {
                        zn[k] = (z[k] - mean[k]) * inv[k] + w.shift[k];
                    }
                    head(layout, w, &zn)
                })
                .collect()
        }
        ConvVariant::Baseline | ConvVariant::Dropout => data
            .images
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let mut z = features(layout, w, x);
                if let Some((masks, m)) = mask {
                    for (zk, mk) in z.iter_mut().zip(masks.mask(m, i)) {
                        *zk *= mk;
                    }
                }
                head(layout, w, &z)
            })
            .collect(),
    }
}

fn mean_loss(logits: &[[f64; CLASSES]], labels: &[usize], loss: LandscapeLoss) -> f64 {
    let mut total = 0.0;
    for (z, &y) in logits.iter().zip(labels) {
        total += match loss {
            LandscapeLoss::CrossEntropy => {
                let max = z[0].max(z[1]);
                max + ((z[0] - max).exp() + (z[1] - max).exp()).ln() - z[y]
            }
            LandscapeLoss::Mse => {
                let t = |c: usize| if c == y { 1.0 } else { 0.0 };
                ((z[0] - t(0)).powi(2) + (z[1] - t(1)).powi(2)) / CLASSES as f64
            }
        };
    }
    total / logits.len() as f64
}

fn set_loss(
    layout: &ConvNetLayout,
    w: &Weights,
    data: &Prepared,
    masks: Option<&DropoutMasks>,
    loss: LandscapeLoss,
) -> f64 {
    match (layout.variant, masks) {
        (ConvVariant::Dropout, Some(masks)) => {
            let mut total = 0.0;
            for m in 0..masks.count {
                total += mean_loss(&all_logits(layout, w, data, Some((masks, m))), &data.labels, loss);
            }
            total / masks.count as f64
        }
        _ => mean_loss(&all_logits(layout, w, data, None), &data.labels, loss),
    }
}

fn check_assignment(layout: &ConvNetLayout, a: &SignAssignment) -> Result<()> {
    if a.bits != layout.bits() {
        return Err(Error::invalid(format!(
            "assignment has {} bits, this network needs {}",
            a.bits,
            layout.bits()
        )));
    }
    Ok(())
}

/// Logits for a batch of 2×2 images. Batchnorm uses the statistics of
/// `images`; the equivariant variants average over their group's orbit;
/// `dropout` selects one fixed mask.
pub fn convnet2x2_forward(
    layout: &ConvNetLayout,
    assignment: &SignAssignment,
    images: &[Tensor],
    dropout: Option<(&DropoutMasks, usize)>,
) -> Result<Vec<[f64; CLASSES]>> {
    check_assignment(layout, assignment)?;
    let w = decode(layout, assignment.index);
    let data = prepare(images, &vec![0; images.len()], layout.variant.group().as_ref())?;
    Ok(all_logits(layout, &w, &data, dropout))
}

/// Mean of the plain (baseline-stage) logits over `{g·x : g ∈ group}`.
pub fn orbit_average_forward(
    layout: &ConvNetLayout,
    assignment: &SignAssignment,
    image: &Tensor,
    group: &TransformGroup,
) -> Result<[f64; CLASSES]> {
    check_assignment(layout, assignment)?;
    let w = decode(layout, assignment.index);
    let x = flat_image(image)?;
    Ok(orbit_mean(
        group
            .elements()
            .iter()
            .map(|&g| head(layout, &w, &features(layout, &w, &transform(g, &x))))
            .collect(),
    ))
}

/// Filter-bank sub-indices (the top `4F` bits) that are lexicographically
/// smallest among their images under the group acting on all filters at
/// once, ordering −1 before +1.
pub fn canonical_filter_banks(filters: usize, group: &TransformGroup) -> Vec<u64> {
    let n = PIXELS * filters;
    let mut bank = vec![0.0; n];
    (0..1u64 << n)
        .filter(|&sub| {
            decode_block(sub, &mut bank);
            group.elements().iter().all(|&g| {
                let moved: Vec<f64> = bank
                    .chunks_exact(PIXELS)
                    .flat_map(|f| g.apply_raw(f, 2, 2, 1))
                    .collect();
                bank.iter()
                    .zip(&moved)
                    .find(|(a, b)| a != b)
                    .is_none_or(|(a, b)| a < b)
            })
        })
        .collect()
}

pub(crate) fn enumerate(
    layout: &ConvNetLayout,
    spec: &TinyNetSpec,
    set: &LabeledImageSet,
    opts: &EnumerateOptions,
) -> Result<Vec<(u32, f64)>> {
    if set.is_empty() {
        return Err(Error::invalid("image set is empty"));
    }
    if set.num_classes != CLASSES {
        return Err(Error::invalid(format!(
            "{} needs a 2-class set, got {} classes",
            spec.name(),
            set.num_classes
        )));
    }
    let group = layout.variant.group();
    let data = prepare(&set.images, &set.labels, group.as_ref())?;
    let masks = (layout.variant == ConvVariant::Dropout).then(|| {
        DropoutMasks::draw(
            layout.dropout_masks,
            set.len(),
            layout.filters,
            layout.dropout_rate,
            opts.seed,
        )
    });
    let filter_subs: Vec<u64> = match &group {
        Some(g) => canonical_filter_banks(layout.filters, g),
        None => (0..1u64 << layout.filter_bits()).collect(),
    };
    let rest = layout.bits() - layout.filter_bits();
    let chunks: Vec<Vec<(u32, f64)>> = filter_subs
        .par_iter()
        .map(|&fs| {
            (0..1u64 << rest)
                .map(|r| {
                    let index = fs << rest | r;
                    let w = decode(layout, index);
                    (index as u32, set_loss(layout, &w, &data, masks.as_ref(), opts.loss))
                })
                .collect()
        })
        .collect();
    Ok(chunks.concat())
}
