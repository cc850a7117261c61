//! Labeled probabilistic transition systems (LPTSes) with exact rational
//! probabilities: strong simulation checking with tree counterexamples,
//! learning of consistent models from tree samples, active learning, and
//! assume-guarantee reasoning over the `ASym` rule.
//!
//! All probability arithmetic is exact; there is no floating point anywhere
//! in this crate.

pub mod active;
pub mod agr;
mod flow;
pub mod generate;
pub mod learning;
pub mod model;
pub mod rational;
pub mod samples;
pub mod simulation;
pub mod smt;
pub mod text;

pub use model::{classify, compose, ComposedLpts, Distribution, Lpts, ModelError, StateId};
pub use rational::Rational;
pub use simulation::{
    coarsest_simulation, dist_leq, equivalent, simulates, verify_execution_mapping, CexTree,
    ExecutionMapping, Relation,
};
