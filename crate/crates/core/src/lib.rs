//! Bottom-up unitary synthesis over CNOT+U3 template trees, with seeded
//! search, learned seed recommendation and partitioned circuit optimization.

pub mod bench;
pub mod canonical;
pub mod cli;
pub mod circuit;
pub mod error;
pub mod harness;
pub mod instantiate;
pub mod linalg;
pub mod partition;
pub mod recommend;
pub mod synth;
pub mod templates;

pub use error::{Error, Result};
