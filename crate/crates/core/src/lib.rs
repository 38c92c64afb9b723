//! Numerical laboratory for symmetry breaking in physical systems and
//! neural networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: tensors, seeded random streams, Gauss–Legendre quadrature,
//!   1-D Wasserstein distance, PCA and smoothed histograms.
//! - [`autodiff`]: a small reverse-mode engine (layer-wise backprop) with SGD
//!   and Adam, enough to train the replica CNNs and the QCD mass models.
//! - [`ising`]: periodic 2-D Ising energies and sampled energy landscapes.
//! - [`expansion`]: input-dimension expansion transforms.
//! - [`datasets`]: synthetic sets, group-invariance checks, CIFAR-10 binary
//!   ingestion.
//! - [`landscape`]: exhaustive ±1 weight enumeration of tiny networks.
//! - [`replica`]: the replica-distance symmetry metric.
//! - [`qcd`]: quasi-particle equation of state and mass-model fitting.

pub mod autodiff;
pub mod datasets;
pub mod error;
pub mod expansion;
pub mod group;
pub mod io;
pub mod ising;
pub mod landscape;
pub mod numerics;
pub mod qcd;
pub mod replica;

pub use error::{Error, Result};
pub use numerics::{Prng, Tensor};
