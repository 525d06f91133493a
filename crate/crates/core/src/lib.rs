//! Flattening norms, chaos parameters and norm-bound profiles for matrix
//! chaoses of (nearly) combinatorial type, with graph-matrix specializations
//! and a Monte Carlo sampler.

pub mod bounds;
pub mod error;
pub mod flattening;
pub mod generate;
pub mod graph;
pub mod linalg;
pub mod monomial;
pub mod sampler;
pub mod schema;
