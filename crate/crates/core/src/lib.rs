//! Simulator and library for Byzantine-robust, privacy-preserving experience
//! sharing among decentralized tabular Q-learners on a grid world.
//!
//! Layout:
//! - [`env`]: the grid Markov game.
//! - [`agent`]: Q-tables, ledgers and the Q-learning update.
//! - [`protocol`]: advice seeking, giving, aggregation and LDP.
//! - [`adversary`]: Byzantine advisors and inference attackers.
//! - [`harness`]: scenarios, the episode loop, metrics and CSV output.

pub mod adversary;
pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod protocol;
pub mod rng;

pub use error::{BrnesError, Result};
