use rayon::prelude::*;

use super::{decode_block, BiasMode, ScalarVariant, SignAssignment};
use crate::expansion::{expand_vector, VectorPattern};
use crate::{Error, Result};

/// Hidden widths of the scalar network.
pub const SCALAR_HIDDEN: [usize; 3] = [3, 3, 2];

/// Bit layout `W1 | W2 | W3 | W4 | b1` of the scalar network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScalarNetLayout {
    pub inputs: usize,
    pub bias: bool,
}

impl ScalarNetLayout {
    pub fn new(variant: ScalarVariant, bias: BiasMode) -> Self {
        Self {
            inputs: match variant {
                ScalarVariant::Raw => 1,
                ScalarVariant::Expanded => 2,
            },
            bias: bias == BiasMode::EnumeratedFirstLayer,
        }
    }

    /// Bit counts of `[W1, W2, W3, W4, b1]`.
    pub fn blocks(&self) -> [usize; 5] {
        let [h1, h2, h3] = SCALAR_HIDDEN;
        [
            h1 * self.inputs,
            h2 * h1,
            h3 * h2,
            h3,
            if self.bias { h1 } else { 0 },
        ]
    }

    pub fn bits(&self) -> usize {
        self.blocks().iter().sum()
    }

    /// Offset of each block in the weight vector.
    pub fn offsets(&self) -> [usize; 5] {
        let b = self.blocks();
        let mut off = [0; 5];
        for i in 1..5 {
            off[i] = off[i - 1] + b[i - 1];
        }
        off
    }

    /// Network input for sample `x`: `[x]`, or `[x, c]` when expanded.
    pub fn input(&self, x: f64, constant: f64) -> Vec<f64> {
        if self.inputs == 1 {
            vec![x]
        } else {
            expand_vector(&[x], &[constant], &VectorPattern::Append).expect("append pattern")
        }
    }
}

fn dense_tanh(w: &[f64], bias: Option<&[f64]>, input: &[f64], units: usize) -> Vec<f64> {
    let d = input.len();
    (0..units)
        .map(|j| {
            let mut acc = bias.map_or(0.0, |b| b[j]);
            for i in 0..d {
                acc += w[j * d + i] * input[i];
            }
            acc.tanh()
        })
        .collect()
}

pub(crate) fn forward_weights(layout: &ScalarNetLayout, w: &[f64], input: &[f64]) -> f64 {
    let [h1, h2, h3] = SCALAR_HIDDEN;
    let off = layout.offsets();
    let bias = layout.bias.then(|| &w[off[4]..off[4] + h1]);
    let a1 = dense_tanh(&w[off[0]..off[1]], bias, input, h1);
    let a2 = dense_tanh(&w[off[1]..off[2]], None, &a1, h2);
    let a3 = dense_tanh(&w[off[2]..off[3]], None, &a2, h3);
    let mut out = 0.0;
    for i in 0..h3 {
        out += w[off[3] + i] * a3[i];
    }
    out
}

/// Output of the scalar network for one input.
pub fn scalar_net_forward(
    assignment: &SignAssignment,
    x: f64,
    variant: ScalarVariant,
    bias: BiasMode,
    constant: f64,
) -> Result<f64> {
    let layout = ScalarNetLayout::new(variant, bias);
    if assignment.bits != layout.bits() {
        return Err(Error::invalid(format!(
            "assignment has {} bits, this network needs {}",
            assignment.bits,
            layout.bits()
        )));
    }
    Ok(forward_weights(&layout, &assignment.weights(), &layout.input(x, constant)))
}

/// `tanh(row · h)` for every ±1 row pattern of width `h.len()`, per sample.
/// `h` is sample-major `[m][width]`; the result is `[pattern][m]`.
fn row_table(h: &[f64], width: usize, m: usize) -> Vec<f64> {
    let patterns = 1usize << width;
    let mut row = vec![0.0; width];
    let mut out = Vec::with_capacity(patterns * m);
    for p in 0..patterns {
        decode_block(p as u64, &mut row);
        for s in 0..m {
            let mut acc = 0.0;
            for i in 0..width {
                acc += row[i] * h[s * width + i];
            }
            out.push(acc.tanh());
        }
    }
    out
}

/// Row `j` pattern of a `rows × cols` block encoded in `sub`.
fn row_pattern(sub: usize, j: usize, rows: usize, cols: usize) -> usize {
    (sub >> ((rows - 1 - j) * cols)) & ((1 << cols) - 1)
}

/// Mean squared error of every assignment. Layer outputs depend only on
/// each unit's own ±1 row, so hidden activations come from small lookup
/// tables; the arithmetic matches [`scalar_net_forward`] operation for
/// operation.
pub(crate) fn enumerate(
    layout: ScalarNetLayout,
    constant: f64,
    samples: &[(f64, usize)],
) -> Result<Vec<(u32, f64)>> {
    if samples.is_empty() {
        return Err(Error::invalid("scalar dataset is empty"));
    }
    let [h1, h2, h3] = SCALAR_HIDDEN;
    let [n1, n2, n3, n4, nb] = layout.blocks();
    let m = samples.len();
    let inputs: Vec<Vec<f64>> = samples.iter().map(|&(x, _)| layout.input(x, constant)).collect();
    let targets: Vec<f64> = samples.iter().map(|&(_, y)| y as f64).collect();
    let outer = 1usize << (n1 + nb);
    let chunks: Vec<Vec<(u32, f64)>> = (0..outer)
        .into_par_iter()
        .map(|o| {
            let (s1, sb) = (o >> nb, o & ((1 << nb) - 1));
            let mut w1 = vec![0.0; n1];
            let mut b1 = vec![0.0; nb];
            decode_block(s1 as u64, &mut w1);
            decode_block(sb as u64, &mut b1);
            let bias = (nb > 0).then_some(&b1[..]);
            let a1: Vec<f64> = inputs
                .iter()
                .flat_map(|x| dense_tanh(&w1, bias, x, h1))
                .collect();
            let t2 = row_table(&a1, h1, m);
            let mut out = Vec::with_capacity(1 << (n2 + n3 + n4));
            let mut a2 = vec![0.0; m * h2];
            for s2 in 0..1usize << n2 {
                for j in 0..h2 {
                    let p = row_pattern(s2, j, h2, h1);
                    for s in 0..m {
                        a2[s * h2 + j] = t2[p * m + s];
                    }
                }
                let t3 = row_table(&a2, h2, m);
                for s3 in 0..1usize << n3 {
                    let rows: Vec<&[f64]> = (0..h3)
                        .map(|j| {
                            let p = row_pattern(s3, j, h3, h2);
                            &t3[p * m..(p + 1) * m]
                        })
                        .collect();
                    for s4 in 0..1usize << n4 {
                        let mut w4 = [0.0; 8];
                        decode_block(s4 as u64, &mut w4[..n4]);
                        let mut sq = 0.0;
                        for s in 0..m {
                            let mut y = 0.0;
                            for (i, r) in rows.iter().enumerate() {
                                y += w4[i] * r[s];
                            }
                            let d = y - targets[s];
                            sq += d * d;
                        }
                        let index = (s1 << (n2 + n3 + n4 + nb))
                            | (s2 << (n3 + n4 + nb))
                            | (s3 << (n4 + nb))
                            | (s4 << nb)
                            | sb;
                        out.push((index as u32, sq / m as f64));
                    }
                }
            }
            out
        })
        .collect();
    Ok(chunks.concat())
}

/// Loss of one assignment, computed directly.
#[cfg(test)]
pub(crate) fn loss_of(
    layout: &ScalarNetLayout,
    weights: &[f64],
    constant: f64,
    samples: &[(f64, usize)],
) -> f64 {
    let mut sq = 0.0;
    for &(x, y) in samples {
        let d = forward_weights(layout, weights, &layout.input(x, constant)) - y as f64;
        sq += d * d;
    }
    sq / samples.len() as f64
}
