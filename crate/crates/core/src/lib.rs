//! EV-charging multi-agent reinforcement learning workbench.
//!
//! The crate simulates a residential charging network under a quadratic,
//! load-dependent tariff and trains two DDPG variants on it: independent
//! learners with per-agent critics (I-DDPG) and centralized-critic learners
//! with decentralized actors (CTDE-DDPG). It also carries the centralized
//! convex scheduling baseline and the numerical checks on the relation
//! between the two actor gradients.
//!
//! Module map:
//! - [`nn`]: dense networks with exact backpropagation, Adam, soft updates
//! - [`env`]: pricing, billing, battery dynamics and the episodic simulator
//! - [`marl`]: replay buffer, DDPG agents and the two trainers
//! - [`baseline`]: projected-gradient scheduler and brute-force grid oracle
//! - [`analysis`]: metrics, gradient-identity checks, comparison reports
//! - [`verify`]: randomized property suites used by the CLI

pub mod analysis;
pub mod baseline;
pub mod config;
pub mod env;
pub mod error;
pub mod marl;
pub mod nn;
pub mod par;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
