//! Node regression on Erdős–Rényi contaminated random dot-product graphs.
//!
//! The crate simulates graphs whose geometric edges join nodes with aligned
//! latent covariates and whose ER edges are pure noise, and compares three ways
//! of learning the response coefficients from noisy covariates:
//!
//! * naive least squares on the observed covariates (attenuated),
//! * least squares on discretized-attention proxies ([`proxy`]),
//! * a mean-aggregation network without attention ([`baseline`]).

pub mod baseline;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod matfile;
pub mod model;
pub mod predict;
pub mod proxy;
pub mod regress;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
