//! Newsvendor models under moment ambiguity and model misspecification.
//!
//! The crate covers the nominal critical-fractile order, Scarf's
//! mean–variance minimax order, an optimal-transport penalty on the distance
//! between the true demand law and the moment set, a multi-product version
//! with a shared variance budget, Wasserstein-ball and total-variation
//! variants, finite-sample calibration of the penalty weight, and an
//! evaluation harness. Every closed form is paired with a brute-force
//! reference solver in [`oracle`].

pub mod distance;
pub mod distribution;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod multi_product;
pub mod oracle;
pub mod single_product;
pub mod statistics;

pub use distribution::DiscreteDistribution;
pub use error::{Error, Result};
pub use model::{CostStructure, MisspecIndex, MomentSpec};
