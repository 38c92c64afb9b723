//! Exact symmetries of the scalar network used to cross-check degeneracy
//! groups: hidden-unit swaps and per-unit sign flips.

use super::scalar::{ScalarNetLayout, SCALAR_HIDDEN};
use crate::{Error, Result};

/// `(incoming offset, fan-in, outgoing offset, fan-out, width)` of hidden
/// layer `layer` (1-based).
fn geometry(layout: &ScalarNetLayout, layer: usize) -> Result<(usize, usize, usize, usize, usize)> {
    if !(1..=SCALAR_HIDDEN.len()).contains(&layer) {
        return Err(Error::invalid(format!(
            "hidden layer must be in 1..={}, got {layer}",
            SCALAR_HIDDEN.len()
        )));
    }
    let off = layout.offsets();
    let width = SCALAR_HIDDEN[layer - 1];
    let fan_in = if layer == 1 { layout.inputs } else { SCALAR_HIDDEN[layer - 2] };
    let fan_out = SCALAR_HIDDEN.get(layer).copied().unwrap_or(1);
    Ok((off[layer - 1], fan_in, off[layer], fan_out, width))
}

fn check(layout: &ScalarNetLayout, weights: &[f64], units: &[usize], width: usize) -> Result<()> {
    if weights.len() != layout.bits() {
        return Err(Error::invalid(format!(
            "{} weights for a {}-weight network",
            weights.len(),
            layout.bits()
        )));
    }
    if let Some(u) = units.iter().find(|&&u| u >= width) {
        return Err(Error::invalid(format!("unit {u} out of range for width {width}")));
    }
    Ok(())
}

/// Swaps hidden units `a` and `b` of `layer` with their incoming weights,
/// outgoing weights and (first layer) biases.
pub fn permute_hidden_units(
    layout: &ScalarNetLayout,
    weights: &[f64],
    layer: usize,
    a: usize,
    b: usize,
) -> Result<Vec<f64>> {
    let (inc, fan_in, out, fan_out, width) = geometry(layout, layer)?;
    check(layout, weights, &[a, b], width)?;
    let mut w = weights.to_vec();
    for i in 0..fan_in {
        w.swap(inc + a * fan_in + i, inc + b * fan_in + i);
    }
    for r in 0..fan_out {
        w.swap(out + r * width + a, out + r * width + b);
    }
    if layer == 1 && layout.bias {
        let bias = layout.offsets()[4];
        w.swap(bias + a, bias + b);
    }
    Ok(w)
}

/// Negates every incoming and outgoing weight (and bias) of one hidden
/// unit; `tanh` is odd, so the output is unchanged.
pub fn flip_hidden_sign(
    layout: &ScalarNetLayout,
    weights: &[f64],
    layer: usize,
    unit: usize,
) -> Result<Vec<f64>> {
    let (inc, fan_in, out, fan_out, width) = geometry(layout, layer)?;
    check(layout, weights, &[unit], width)?;
    let mut w = weights.to_vec();
    for i in 0..fan_in {
        w[inc + unit * fan_in + i] *= -1.0;
    }
    for r in 0..fan_out {
        w[out + r * width + unit] *= -1.0;
    }
    if layer == 1 && layout.bias {
        w[layout.offsets()[4] + unit] *= -1.0;
    }
    Ok(w)
}
