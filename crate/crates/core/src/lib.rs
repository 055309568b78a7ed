//! Sliced mutual information (SMI) between high-dimensional samples.
//!
//! SMI averages the scalar mutual information `I(θᵀX; φᵀY)` over directions
//! `θ`, `φ` drawn uniformly from the unit spheres. This crate provides
//!
//! * a Monte-Carlo SMI estimator built on Kozachenko–Leonenko kNN entropies
//!   ([`smi`], [`knn`]),
//! * closed-form Gaussian references and canonical correlation ([`gaussian`]),
//! * seeded synthetic scenarios and an AUC-ROC independence-testing harness
//!   ([`synthetic`], [`independence`]),
//! * a variational (Donsker–Varadhan) neural lower bound with linear feature
//!   extraction ([`smine`]),
//! * convergence-rate sweeps ([`rates`]).
//!
//! All quantities are in nats. All randomness flows from [`SeededRng`].

pub mod error;
pub mod gaussian;
pub mod independence;
pub mod knn;
pub mod rates;
pub mod sampling;
pub mod smi;
pub mod smine;
pub mod synthetic;

pub use error::{Result, SmiError};
pub use gaussian::GaussianSpec;
pub use knn::{DegeneracyPolicy, EntropyEstimate, KnnConfig};
pub use sampling::{project, sample_unit_sphere, SampleMatrix, SeededRng, UnitDirection};
pub use smi::{estimate_sliced_entropy, estimate_smi, SmiConfig, SmiEstimate};

/// Converts nats to bits.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/estimating.md")]
    mod estimating {}
    #[doc = include_str!("../../../book/src/gaussian.md")]
    mod gaussian {}
    #[doc = include_str!("../../../book/src/entropy.md")]
    mod entropy {}
    #[doc = include_str!("../../../book/src/independence.md")]
    mod independence {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/variational.md")]
    mod variational {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
