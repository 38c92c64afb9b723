//! Shared math kernel.

mod histogram;
mod levels;
mod pca;
mod prng;
mod quadrature;
mod tensor;
mod wasserstein;

pub use histogram::{density_summary, smoothed_histogram, DensityCurve, DensitySummary};
pub use levels::{count_levels, level_runs};
pub use pca::{pca_fit, pca_reduce, Pca, PcaReducer, Reducer};
pub use prng::{stream, Prng};
pub use quadrature::{gauss_legendre, integrate_semi_infinite, QuadratureRule, MAX_NODES};
pub use tensor::Tensor;
pub use wasserstein::wasserstein_1d;
