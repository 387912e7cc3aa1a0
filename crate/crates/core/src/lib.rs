//! Bilevel carbon-tax and subsidy design for packaging end-of-life routes.
//!
//! A regulator (leader) picks a tax on emissions and per-unit subsidies; the
//! industry (follower) allocates its demand to the cheapest routes. `lower`
//! solves the follower exactly and `engine` searches policies with a
//! particle swarm. `oracle` holds brute-force cross-checks; `analysis` has
//! the closed forms and the budget sweeps.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod lower;
pub mod model;
pub mod oracle;

pub use error::{Error, Result};
