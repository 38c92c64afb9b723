//! Principal component reduction through the eigendecomposition of the
//! `R × R` Gram matrix of the centered rows, which stays cheap when the rows
//! are long flattened weight vectors and `R` is a replica count.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::numerics::Tensor;
use crate::{Error, Result};

/// A dimensionality-reduction stage for the replica pipeline.
pub trait Reducer: Send + Sync {
    fn name(&self) -> &'static str;

    /// Maps an `R × D` matrix to `R × k` coordinates, `k <= dim`.
    fn reduce(&self, rows: &Tensor, dim: usize) -> Result<Tensor>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PcaReducer;

impl Reducer for PcaReducer {
    fn name(&self) -> &'static str {
        "pca"
    }

    fn reduce(&self, rows: &Tensor, dim: usize) -> Result<Tensor> {
        pca_reduce(rows, dim)
    }
}

#[derive(Clone, Debug)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit loading vectors, one per retained component (zero vectors for
    /// components without variance).
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    /// `R × k` projections of the centered rows.
    pub scores: Tensor,
}

impl Pca {
    /// Centered rows rebuilt from scores and loadings.
    pub fn reconstruct_centered(&self) -> Tensor {
        let r = self.scores.shape()[0];
        let k = self.scores.shape()[1];
        let d = self.mean.len();
        let mut out = vec![0.0; r * d];
        for i in 0..r {
            for c in 0..k {
                let s = self.scores.data()[i * k + c];
                for (o, &v) in out[i * d..(i + 1) * d].iter_mut().zip(&self.components[c]) {
                    *o += s * v;
                }
            }
        }
        Tensor::new(vec![r, d], out).expect("shape is consistent")
    }
}

fn check_matrix(rows: &Tensor) -> Result<(usize, usize)> {
    if rows.rank() != 2 {
        return Err(Error::invalid(format!(
            "pca expects a matrix, got shape {:?}",
            rows.shape()
        )));
    }
    let (r, d) = (rows.shape()[0], rows.shape()[1]);
    if r < 2 {
        return Err(Error::invalid(format!("pca needs at least 2 rows, got {r}")));
    }
    Ok((r, d))
}

/// Fits principal components of the mean-centered rows, keeping
/// `min(dim, R, D)` of them in descending variance order.
///
/// Each component's sign is fixed so that its largest-magnitude loading
/// (first one on ties) is positive.
pub fn pca_fit(rows: &Tensor, dim: usize) -> Result<Pca> {
    let (r, d) = check_matrix(rows)?;
    if dim == 0 {
        return Err(Error::invalid("pca target dimension must be >= 1"));
    }
    let k = dim.min(r).min(d);

    // Offsets from the first row are averaged, so identical rows center to
    // exact zeros.
    let base = rows.item(0);
    let mut shift = vec![0.0; d];
    for i in 0..r {
        for ((m, &v), &b) in shift.iter_mut().zip(rows.item(i)).zip(base) {
            *m += v - b;
        }
    }
    for m in &mut shift {
        *m /= r as f64;
    }
    let centered = DMatrix::from_fn(r, d, |i, j| rows.data()[i * d + j] - base[j] - shift[j]);
    let mean: Vec<f64> = base.iter().zip(&shift).map(|(b, s)| b + s).collect();
    let gram = &centered * centered.transpose();
    let eig = SymmetricEigen::new(gram);

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]].max(0.0);
    let cutoff = top * 1e-12;

    let mut scores = vec![0.0; r * k];
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if !(lambda > cutoff) || top == 0.0 {
            components.push(vec![0.0; d]);
            explained_variance.push(0.0);
            continue;
        }
        let sigma = lambda.sqrt();
        let u = eig.eigenvectors.column(idx);
        let mut loading: Vec<f64> = (0..d)
            .map(|j| (0..r).map(|i| centered[(i, j)] * u[i]).sum::<f64>() / sigma)
            .collect();
        let pivot = loading
            .iter()
            .enumerate()
            .fold(0, |best, (j, v)| if v.abs() > loading[best].abs() { j } else { best });
        let sign = if loading[pivot] < 0.0 { -1.0 } else { 1.0 };
        for v in &mut loading {
            *v *= sign;
        }
        for i in 0..r {
            scores[i * k + c] = sign * u[i] * sigma;
        }
        components.push(loading);
        explained_variance.push(lambda / (r as f64 - 1.0));
    }
    Ok(Pca {
        mean,
        components,
        explained_variance,
        scores: Tensor::new(vec![r, k], scores)?,
    })
}

/// `R × min(dim, R, D)` principal-component scores.
pub fn pca_reduce(rows: &Tensor, dim: usize) -> Result<Tensor> {
    Ok(pca_fit(rows, dim)?.scores)
}
