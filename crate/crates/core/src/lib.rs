//! Contextual bandits with strategic agents.
//!
//! Agents offer one arm per round and may inflate the features they report.
//! The learner runs a ridge-regression bandit (UCB or Thompson sampling) and
//! checks every agent with a leave-one-out test: the reward the *other*
//! agents' data predicts for the agent's reported features, pessimistically,
//! is compared with an optimistic bound on the rewards the agent actually
//! produced. Agents that fail the test are removed for good.
//!
//! Layout:
//! - [`lin_core`]: ridge sufficient statistics, confidence radii, UCB/LCB, TS draws.
//! - [`loom`]: per-agent ledgers, leave-one-out designs and the misreport test.
//! - [`policies`]: COBRA (UCB/TS) and the truthful Lin-UCB / Lin-TS baselines.
//! - [`env`]: synthetic instances, strategic reporting, rewards, polynomial lift.
//! - [`harness`]: seeded episodes, aggregation, CSV/JSON output, deviation probe.

pub mod env;
pub mod error;
pub mod harness;
pub mod lin_core;
pub mod loom;
pub mod policies;
pub mod seeds;

pub use error::{CobraError, Result};
