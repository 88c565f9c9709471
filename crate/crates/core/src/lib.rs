//! Width-based online planning over pixel-derived boolean features.
//!
//! The crate implements the IW family of novelty-pruned planners (IW(1),
//! IW(k), goal-partitioned IW_G(1), score-partitioned IW_S(1)) and the
//! anytime Rollout IW variant, all running on top of a deterministic
//! simulator contract. Screens are mapped to sparse boolean feature sets
//! (Basic / B-PROS / B-PROT families) with dynamic background-pixel
//! removal, so the planners never look at raw pixels directly.
//!
//! Modules:
//! - [`features`]: feature ids, sparse sets, novelty and depth tables
//! - [`bprost`]: screen → feature-set extraction and the index layout
//! - [`env`]: simulator contract, call-caching wrapper, toy environments
//! - [`planners`]: breadth-first IW searches and the brute-force oracle
//! - [`rollout`]: Rollout IW lookahead trees
//! - [`control`]: the online episode loop (shaping, backup, selection)
//! - [`cli`]: the benchmark command-line harness

pub mod bprost;
pub mod cli;
pub mod control;
pub mod env;
pub mod features;
pub mod planners;
pub mod rollout;

#[cfg(test)]
pub(crate) mod testutil;
