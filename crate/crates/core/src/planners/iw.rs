//! The IW(k) breadth-first engine and its partitioned variants.

use super::logscore;
use crate::env::{Action, NodeFiller, SimError};
use crate::features::{lift_conjunctions, FeatureError, FeatureId, FeatureSet, PartitionedTable};
use std::collections::{BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("goal set must be non-empty")]
    EmptyGoalSet,
    #[error("action order must be a permutation of 0..{count}")]
    BadActionOrder { count: u32 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Atomic goals for subgoaling searches: a non-empty set of features.
#[derive(Clone, Debug)]
pub struct GoalSet {
    goals: Vec<FeatureId>,
}

impl GoalSet {
    pub fn new(goals: impl IntoIterator<Item = FeatureId>) -> Result<Self, SearchError> {
        let mut goals: Vec<FeatureId> = goals.into_iter().collect();
        goals.sort_unstable();
        goals.dedup();
        if goals.is_empty() {
            return Err(SearchError::EmptyGoalSet);
        }
        Ok(Self { goals })
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn goals(&self) -> &[FeatureId] {
        &self.goals
    }

    /// Number of goals true in a state.
    pub fn count_achieved(&self, s: &FeatureSet) -> usize {
        self.goals.iter().filter(|&&g| s.contains(g)).count()
    }
}

/// One generated state of a breadth-first lookahead.
#[derive(Clone, Debug)]
pub struct BfsNode {
    pub path: Vec<Action>,
    pub action: Option<Action>,
    pub parent: Option<usize>,
    pub depth: u32,
    pub features: FeatureSet,
    pub edge_raw_reward: f64,
    pub edge_shaped_reward: f64,
    pub raw_path_reward: f64,
    /// Accumulated shaped reward along the unique path to this node;
    /// action selection works on shaped values, reported scores on raw.
    pub shaped_path_reward: f64,
    pub terminal: bool,
    pub death: bool,
    pub pruned: bool,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct SearchStats {
    pub expanded: usize,
    pub generated: usize,
    pub pruned: usize,
    pub max_depth: u32,
    pub sim_calls: u64,
    /// Partition keys evaluated during the search (always `{0}` for the
    /// unpartitioned variant).
    pub partition_keys: Vec<i64>,
}

/// Lookahead tree produced by the IW family. Node 0 is the root; pruned
/// nodes are kept (flagged) but never expanded.
#[derive(Clone, Debug)]
pub struct SearchTree {
    pub nodes: Vec<BfsNode>,
    pub truncated: bool,
    pub stats: SearchStats,
}

impl SearchTree {
    pub fn root(&self) -> &BfsNode {
        &self.nodes[0]
    }

    /// Minimum depth of a kept (unpruned) node whose features contain
    /// `f`, if any.
    pub fn min_depth_with_feature(&self, f: FeatureId) -> Option<u32> {
        self.nodes
            .iter()
            .filter(|n| !n.pruned && n.features.contains(f))
            .map(|n| n.depth)
            .min()
    }

    pub fn max_generated_depth(&self) -> u32 {
        self.stats.max_depth
    }
}

#[derive(Clone, Debug)]
pub struct IwOptions {
    /// Conjunction width k; 1 runs plain novelty over the raw features.
    pub width: u32,
    /// Child-generation order. `None` means ascending action id. The
    /// planner's result for width-1 goals is order-independent, which
    /// the tests exercise by permuting this.
    pub action_order: Option<Vec<Action>>,
}

impl Default for IwOptions {
    fn default() -> Self {
        Self {
            width: 1,
            action_order: None,
        }
    }
}

enum Partition<'a> {
    Single,
    Goals(&'a GoalSet),
    Logscore,
}

/// IW(k): breadth-first search pruning every generated state whose
/// k-lifted feature set marks nothing new in the novelty table. Budget
/// exhaustion (signalled by the filler) returns the partial tree
/// flagged `truncated`.
pub fn iw_search(
    filler: &mut impl NodeFiller,
    opts: &IwOptions,
) -> Result<SearchTree, SearchError> {
    bfs_engine(filler, opts, Partition::Single)
}

/// IW_G(1)/IW_G(k): one novelty table per achieved-goal count. States
/// achieving every goal are kept as leaves and not expanded, so the
/// search expands at most |F|·|G| nodes.
pub fn iwg_search(
    filler: &mut impl NodeFiller,
    goals: &GoalSet,
    opts: &IwOptions,
) -> Result<SearchTree, SearchError> {
    bfs_engine(filler, opts, Partition::Goals(goals))
}

/// IW_S(1)/IW_S(k): one novelty table per [`logscore`] bucket of the raw
/// path reward, granting reward-reaching paths fresh novelty.
pub fn iws_search(
    filler: &mut impl NodeFiller,
    opts: &IwOptions,
) -> Result<SearchTree, SearchError> {
    bfs_engine(filler, opts, Partition::Logscore)
}

fn resolve_action_order(
    order: &Option<Vec<Action>>,
    count: u32,
) -> Result<Vec<Action>, SearchError> {
    match order {
        None => Ok((0..count).map(Action).collect()),
        Some(order) => {
            let distinct: BTreeSet<u32> = order.iter().map(|a| a.0).collect();
            if order.len() != count as usize
                || distinct.len() != count as usize
                || distinct.iter().any(|&a| a >= count)
            {
                return Err(SearchError::BadActionOrder { count });
            }
            Ok(order.clone())
        }
    }
}

fn bfs_engine(
    filler: &mut impl NodeFiller,
    opts: &IwOptions,
    partition: Partition<'_>,
) -> Result<SearchTree, SearchError> {
    let action_order = resolve_action_order(&opts.action_order, filler.action_count())?;
    let calls_at_start = filler.inner_calls();
    let root_filled = filler.fill_root()?;

    let key_of = |features: &FeatureSet, raw_path_reward: f64| -> i64 {
        match &partition {
            Partition::Single => 0,
            Partition::Goals(g) => g.count_achieved(features) as i64,
            Partition::Logscore => logscore(raw_path_reward),
        }
    };
    // all-goals states are kept but never expanded
    let expandable_key = |key: i64| match &partition {
        Partition::Goals(g) => key < g.len() as i64,
        _ => true,
    };

    let lifted_capacity = lift_conjunctions(&root_filled.features, opts.width)?.capacity();
    let mut tables = PartitionedTable::new(lifted_capacity);
    let mut keys_seen = BTreeSet::new();

    let root_key = key_of(&root_filled.features, 0.0);
    let root_lifted = lift_conjunctions(&root_filled.features, opts.width)?;
    tables.mark_and_test(root_key, &root_lifted)?;
    keys_seen.insert(root_key);

    let mut nodes = vec![BfsNode {
        path: Vec::new(),
        action: None,
        parent: None,
        depth: 0,
        features: root_filled.features.clone(),
        edge_raw_reward: 0.0,
        edge_shaped_reward: 0.0,
        raw_path_reward: 0.0,
        shaped_path_reward: 0.0,
        terminal: root_filled.terminal,
        death: root_filled.death,
        pruned: false,
        children: Vec::new(),
    }];
    let mut filled = vec![Some(root_filled)];
    let mut stats = SearchStats::default();
    let mut truncated = false;

    let mut queue = VecDeque::new();
    if !nodes[0].terminal && expandable_key(root_key) {
        queue.push_back(0usize);
    }

    'search: while let Some(idx) = queue.pop_front() {
        if filler.budget_exhausted() {
            truncated = true;
            break;
        }
        let parent_filled = filled[idx].take().expect("queued nodes keep their fill");
        let parent_path = nodes[idx].path.clone();
        stats.expanded += 1;
        for &action in &action_order {
            let child = match filler.fill_child(&parent_path, action, &parent_filled) {
                Ok(c) => c,
                Err(SimError::BudgetExhausted) => {
                    truncated = true;
                    break 'search;
                }
                Err(e) => return Err(e.into()),
            };
            stats.generated += 1;
            let depth = nodes[idx].depth + 1;
            let raw_path = nodes[idx].raw_path_reward + child.raw_reward;
            let shaped_path = nodes[idx].shaped_path_reward + child.shaped_reward;
            let key = key_of(&child.features, raw_path);
            keys_seen.insert(key);
            let lifted = lift_conjunctions(&child.features, opts.width)?;
            let (novel, _) = tables.mark_and_test(key, &lifted)?;

            let mut path = parent_path.clone();
            path.push(action);
            let child_idx = nodes.len();
            nodes.push(BfsNode {
                path,
                action: Some(action),
                parent: Some(idx),
                depth,
                features: child.features.clone(),
                edge_raw_reward: child.raw_reward,
                edge_shaped_reward: child.shaped_reward,
                raw_path_reward: raw_path,
                shaped_path_reward: shaped_path,
                terminal: child.terminal,
                death: child.death,
                pruned: !novel,
                children: Vec::new(),
            });
            nodes[idx].children.push(child_idx);
            stats.max_depth = stats.max_depth.max(depth);
            if !novel {
                stats.pruned += 1;
            } else if !child.terminal && expandable_key(key) {
                filled.push(Some(child));
                queue.push_back(child_idx);
                continue;
            }
            filled.push(None);
        }
    }

    stats.sim_calls = filler.inner_calls() - calls_at_start;
    stats.partition_keys = keys_seen.into_iter().collect();
    Ok(SearchTree {
        nodes,
        truncated,
        stats,
    })
}

/// Debug dump, one node per line:
/// `path=<dot-joined action ids or "-"> depth=<d> reward=<shaped path reward> pruned=<bool>`.
pub fn dump_tree(tree: &SearchTree) -> String {
    let mut out = String::new();
    for node in &tree.nodes {
        let path = if node.path.is_empty() {
            "-".to_string()
        } else {
            node.path
                .iter()
                .map(|a| a.0.to_string())
                .collect::<Vec<_>>()
                .join(".")
        };
        out.push_str(&format!(
            "path={} depth={} reward={} pruned={}\n",
            path, node.depth, node.shaped_path_reward, node.pruned
        ));
    }
    out
}
