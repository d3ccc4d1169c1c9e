//! Self-adaptive UI test automation over a deterministic simulated
//! application.

pub mod dsl;
pub mod engine;
pub mod hash;
pub mod maintainer;
pub mod matcher;
pub mod model;
pub mod recovery;
pub mod repo;
pub mod testgen;
