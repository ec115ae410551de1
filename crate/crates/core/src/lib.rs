//! Counterfactual explanations for top-k item recommendations.
//!
//! Given a user's interaction vector and a recommended item, find the
//! smallest decrease-only change to the vector after which the item is no
//! longer recommended, optionally keeping the changed vector likely under a
//! sum-product network fitted to category-aggregated training data. The
//! search is a mixed-integer linear program solved by an embedded
//! branch-and-bound.

pub mod dataset;
pub mod ease;
pub mod error;
pub mod harness;
pub mod milp;
pub mod mio;
pub mod solver;
pub mod spn;
pub mod synth;

pub use error::{Error, Result};
