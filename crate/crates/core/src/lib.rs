//! Counterfactual reasoning and policy search on structural causal models.

pub mod envs;
pub mod error;
pub mod harness;
pub mod kv;
pub mod ope;
pub mod pomdp;
pub mod rng;
pub mod scm;
pub mod search;

pub use error::{Error, Result};
