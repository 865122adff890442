//! Incomplete infinite-order U-statistics with random kernels.
//!
//! The crate estimates mean functionals `θ = E[h(X₁,…,X_r)]` from an i.i.d.
//! sample by averaging a (possibly randomized) kernel over a Bernoulli
//! sample of `r`-subsets, and quantifies uncertainty with a pair of Gaussian
//! multiplier bootstraps that yield simultaneous confidence intervals over
//! all `d` output coordinates.
//!
//! The crate is `no_std` and only needs `alloc`. The `parallel` feature
//! (which implies `std`) evaluates kernels and bootstrap replicates on the
//! ambient rayon pool; results are bitwise identical with or without it,
//! since every random draw comes from a keyed stream and every reduction
//! runs in a fixed order.
//!
//! Module map:
//!
//! * [`data`] and [`rng`]: sample matrix, canonical tuples, keyed streams.
//! * [`combinatorics`]: `ln C(n, r)`, the Bernoulli design, enumeration.
//! * [`kernels`]: mean, coordinate max, log-mean, KDE and randomized trees.
//! * [`estimators`]: complete/incomplete U-statistics, divide-and-conquer
//!   Hájek estimates, exact moments on discrete laws.
//! * [`bootstrap`]: multiplier draws, variance diagonals, quantile, SCI.
//! * [`diagnostics`]: Monte Carlo and exact oracles, coverage studies.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bootstrap;
pub mod combinatorics;
pub mod data;
pub mod diagnostics;
mod error;
pub mod estimators;
pub mod kernels;
pub mod math;
mod par;
pub mod rng;

pub use crate::bootstrap::{BootstrapConfig, SciResult, VarianceDiagonals};
pub use crate::combinatorics::TupleDesign;
pub use crate::data::{DataMatrix, Dimensions, TupleIndex};
pub use crate::error::{Error, Result};
pub use crate::estimators::{EstimateBundle, HajekEstimates};
pub use crate::kernels::{KernelSpec, KernelVariant};
pub use crate::rng::{RngKey, Stream, StreamKind};
