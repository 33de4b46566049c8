//! Binary spiking neural networks as binary causal models.
//!
//! The crate simulates binary/ternary-weight integrate-and-fire networks,
//! compiles a run into a binary causal model, decides entailment over that
//! model with a CNF/SAT or an SMT-LIB (linear integer arithmetic) backend,
//! computes subset-minimal abductive explanations of the network's output,
//! and audits sampled Shapley attributions against the network's wiring.

pub mod axp;
pub mod causal;
pub mod error;
pub mod mnist;
pub mod render;
pub mod snn;
pub mod shap;
pub mod solver;
pub mod train;

pub use error::{Error, Result, SolverError};
