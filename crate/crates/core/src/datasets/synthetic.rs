use super::LabeledImageSet;
use crate::numerics::{Prng, Tensor};
use crate::{Error, Result};

/// Version stamp of the shipped 2×2 set.
pub const TWO_BY_TWO_VERSION: &str = "2x2-row-pairs-v1";

/// Side of the default bars images; the smallest even side that survives
/// conv3 → pool2 → conv3 → pool2.
pub const BARS_SIDE: usize = 10;

/// `(x, label)` on the grid `x = (k + 0.5)/M`, label 1 iff `x ≥ 0.5`.
pub fn gen_scalar_dataset(grid_size: usize) -> Result<Vec<(f64, usize)>> {
    if grid_size < 2 {
        return Err(Error::invalid(format!("grid size must be >= 2, got {grid_size}")));
    }
    Ok((0..grid_size)
        .map(|k| {
            let x = (k as f64 + 0.5) / grid_size as f64;
            (x, usize::from(x >= 0.5))
        })
        .collect())
}

// [a b; c d] as (a, b, c, d), label 1 iff a row holds two equal non-zero
// pixels. Class 0 is the quarter-turn image of class 1.
#[rustfmt::skip]
const TWO_BY_TWO: [([i8; 4], usize); 12] = [
    ([-1,  0,  1,  1], 1),
    ([-1,  1,  0,  1], 0),
    ([ 0, -1,  1,  1], 1),
    ([ 0,  0,  1,  1], 1),
    ([ 0,  1, -1,  1], 0),
    ([ 0,  1,  0,  1], 0),
    ([ 1, -1,  1,  0], 0),
    ([ 1,  0,  1, -1], 0),
    ([ 1,  0,  1,  0], 0),
    ([ 1,  1, -1,  0], 1),
    ([ 1,  1,  0, -1], 1),
    ([ 1,  1,  0,  0], 1),
];

/// The fixed 12-image 2×2 set with pixels in {−1, 0, 1}: closed under
/// rot180 and both flips with labels kept, but not under quarter turns.
pub fn gen_2x2_dataset() -> LabeledImageSet {
    let images = TWO_BY_TWO
        .iter()
        .map(|(px, _)| {
            Tensor::new(vec![2, 2, 1], px.iter().map(|&p| f64::from(p)).collect())
                .expect("2x2x1 image")
        })
        .collect();
    let labels = TWO_BY_TWO.iter().map(|&(_, l)| l).collect();
    let mut set = LabeledImageSet::new("two_by_two", images, labels, 2).expect("fixed set");
    set.notes = format!(
        "{TWO_BY_TWO_VERSION}: label 1 iff a row holds two equal non-zero pixels"
    );
    set
}

pub fn gen_bars_dataset(n: usize, prng: &mut Prng) -> Result<LabeledImageSet> {
    gen_bars_dataset_sized(n, BARS_SIDE, prng)
}

/// Class 0 has a horizontal bar in the top half, class 1 in the bottom
/// half. Bars have random row, length (at least half the width) and
/// offset; every pixel gets N(0, 0.1) noise. Labels alternate, so classes
/// are balanced.
pub fn gen_bars_dataset_sized(n: usize, side: usize, prng: &mut Prng) -> Result<LabeledImageSet> {
    if n < 2 {
        return Err(Error::invalid(format!("bars dataset needs n >= 2, got {n}")));
    }
    if side < 2 || side % 2 != 0 {
        return Err(Error::invalid(format!("bars side must be even and >= 2, got {side}")));
    }
    let half = side / 2;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let label = k % 2;
        let row = label * half + prng.below(half);
        let len = side.div_ceil(2) + prng.below(side - side.div_ceil(2) + 1);
        let start = prng.below(side - len + 1);
        let mut px = vec![0.0; side * side];
        px[row * side + start..row * side + start + len].fill(1.0);
        for v in &mut px {
            *v += prng.normal(0.0, 0.1);
        }
        images.push(Tensor::new(vec![side, side, 1], px)?);
        labels.push(label);
    }
    let mut set = LabeledImageSet::new("bars", images, labels, 2)?;
    set.notes = format!("{side}x{side} bars: label 0 top half, 1 bottom half");
    Ok(set)
}

/// Recovers a bars label from the brightest row.
pub fn bars_label(img: &Tensor) -> usize {
    let (h, w) = (img.shape()[0], img.shape()[1]);
    let c = img.len() / (h * w);
    let row_sum = |r: usize| -> f64 { img.data()[r * w * c..(r + 1) * w * c].iter().sum() };
    let best = (0..h)
        .max_by(|&a, &b| row_sum(a).total_cmp(&row_sum(b)))
        .expect("non-empty image");
    usize::from(best >= h / 2)
}
