//! Breadth-first width-based planners and their ground-truth oracle.
//!
//! [`iw_search`] is IW(k): breadth-first search that prunes every
//! generated state failing the novelty-1 test over the (k-lifted)
//! feature set. [`iwg_search`] and [`iws_search`] partition the novelty
//! table by achieved-goal count and by the [`logscore`] of the path
//! reward respectively. [`plain_bfs_oracle`] runs exhaustive
//! breadth-first search on toy instances and backs the width-1
//! certification used by the test suites.

mod iw;
mod oracle;
#[cfg(test)]
mod tests;

pub use iw::{
    dump_tree, iw_search, iwg_search, iws_search, BfsNode, GoalSet, IwOptions, SearchError,
    SearchStats, SearchTree,
};
pub use oracle::{certify_width1, plain_bfs_oracle, Oracle, OracleOptions, OracleState};

/// Integer bucket approximating log2 of an accrued score: non-positive
/// rewards map to 0, rewards in (0,1) to negative buckets, rewards in
/// [1,∞) to positive ones (so bucket 0 is used by non-positive scores
/// only).
pub fn logscore(reward: f64) -> i64 {
    if reward <= 0.0 {
        0
    } else if reward < 1.0 {
        reward.log2().floor() as i64
    } else {
        1 + reward.log2().floor() as i64
    }
}
