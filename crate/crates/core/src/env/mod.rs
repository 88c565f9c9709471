//! Deterministic-simulator contract, budget accounting, the lookahead
//! state cache, and the bundled toy pixel environments.

mod cache;
mod contract;
mod toy;

pub use cache::CachingSimulator;
pub use contract::{
    Action, Budget, BudgetMeter, FilledNode, NodeFiller, SimError, Simulator, StateHandle,
    StepOutcome,
};
pub use toy::{
    Dynamics, GoalCell, HazardCell, ItemCell, ToyEnv, ToyEnvConfig, ToyEnvError,
};
