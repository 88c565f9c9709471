//! The deterministic-simulator contract and the planner-facing
//! node-filling abstraction built on top of it.

use crate::bprost::{Screen, ScreenError};
use crate::features::FeatureSet;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Environment action id in `[0, action_count)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action(pub u32);

/// Result of applying one action for a block of frames. `reward` is the
/// raw, unshaped per-frame sum. `death` may be true with `terminal`
/// false: losing a life does not necessarily end the game, and in some
/// games generates no negative reward either, so the two are independent
/// channels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminal: bool,
    pub death: bool,
    pub frames_consumed: u32,
}

impl StepOutcome {
    pub fn zero() -> Self {
        Self {
            reward: 0.0,
            terminal: false,
            death: false,
            frames_consumed: 0,
        }
    }
}

/// Opaque saved simulator state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateHandle(pub Vec<u8>);

#[derive(Debug, Error)]
pub enum SimError {
    #[error("apply called on a terminal state")]
    TerminalStep,
    #[error("action {action} out of range ({count} actions)")]
    BadAction { action: u32, count: u32 },
    #[error("frames per application must be at least 1")]
    ZeroFrames,
    #[error("state handle does not match this simulator")]
    BadHandle,
    #[error("simulator budget exhausted")]
    BudgetExhausted,
    #[error(transparent)]
    Screen(#[from] ScreenError),
}

/// Deterministic environment abstraction: identical (state, action
/// sequence) yields identical outcomes and screens, and save/restore
/// round-trips exactly. One instance is owned by one search at a time.
pub trait Simulator {
    /// Puts the environment back into its initial state and returns the
    /// initial observation.
    fn reset(&mut self) -> Screen;

    /// Advances `frames` emulation steps applying `action` each step.
    /// Counts as one lookahead call regardless of `frames`.
    fn apply(&mut self, action: Action, frames: u32) -> Result<StepOutcome, SimError>;

    /// Current screen.
    fn screen(&self) -> Screen;

    fn save(&self) -> StateHandle;

    fn restore(&mut self, handle: &StateHandle) -> Result<(), SimError>;

    fn action_count(&self) -> u32;

    /// Number of `apply` calls made so far.
    fn calls(&self) -> u64;
}

/// Planning budget for one decision. Call budgets are deterministic and
/// are the mode used in CI; wall-clock budgets match the original
/// benchmark setting but exclude determinism guarantees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Calls(u64),
    Seconds(f64),
    Unlimited,
}

/// Tracks one decision's budget from a starting call count / instant.
#[derive(Clone, Debug)]
pub struct BudgetMeter {
    budget: Budget,
    start_calls: u64,
    deadline: Option<Instant>,
}

impl BudgetMeter {
    pub fn start(budget: Budget, current_calls: u64) -> Self {
        let deadline = match budget {
            Budget::Seconds(s) => Some(Instant::now() + Duration::from_secs_f64(s)),
            _ => None,
        };
        Self {
            budget,
            start_calls: current_calls,
            deadline,
        }
    }

    /// True once no further simulator call may start. An in-flight call
    /// always completes; this is checked before issuing the next one.
    pub fn exhausted(&self, current_calls: u64) -> bool {
        match self.budget {
            Budget::Calls(limit) => current_calls - self.start_calls >= limit,
            Budget::Seconds(_) => Instant::now() >= self.deadline.expect("deadline set"),
            Budget::Unlimited => false,
        }
    }

    pub fn calls_used(&self, current_calls: u64) -> u64 {
        current_calls - self.start_calls
    }
}

/// A materialized lookahead node: the feature state of the screen pair,
/// the aggregated step outcome of the edge leading here, and the reward
/// as shaped for action selection.
#[derive(Clone, Debug)]
pub struct FilledNode {
    pub features: FeatureSet,
    pub screen: Screen,
    pub raw_reward: f64,
    pub shaped_reward: f64,
    pub terminal: bool,
    pub death: bool,
    pub frames_consumed: u32,
    /// The node came out of the cache; no inner simulator call was made.
    pub replayed: bool,
}

/// Fills lookahead nodes for the planners: turns (path, action) into
/// feature states while hiding caching, frameskip aggregation, reward
/// shaping and budget accounting. Fill requests that would need an inner
/// simulator call past the budget fail with [`SimError::BudgetExhausted`],
/// which planners treat as a truncation signal.
pub trait NodeFiller {
    fn fill_root(&mut self) -> Result<FilledNode, SimError>;

    fn fill_child(
        &mut self,
        parent_path: &[Action],
        action: Action,
        parent: &FilledNode,
    ) -> Result<FilledNode, SimError>;

    fn action_count(&self) -> u32;

    /// Inner simulator calls issued so far (cache hits excluded).
    fn inner_calls(&self) -> u64;

    fn budget_exhausted(&self) -> bool;
}
