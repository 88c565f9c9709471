//! Rollout IW: anytime width-based lookahead built from rollouts instead
//! of breadth-first layers.
//!
//! A depth table `d[f]` tracks the best depth at which each feature has
//! been reached across all rollouts of one decision (0 for root-true
//! features, ∞ otherwise). Each rollout walks from the root picking
//! random unsolved children, materializing one node per step, and the
//! newly reached node is classified:
//!
//! - case 1: some feature improves its table depth. Mark visited,
//!   update the table, continue the rollout.
//! - case 2: the node is new but improves nothing. Mark visited, label
//!   SOLVED, stop.
//! - case 3: the node was already in the tree and no feature ties its
//!   table depth. Label SOLVED, stop.
//! - case 4: already in the tree with some feature tying its table
//!   depth. Continue.
//!
//! Terminal nodes are solved leaves. SOLVED labels propagate upward to
//! every ancestor whose children are all generated and all solved; the
//! search ends when the root is solved or the budget runs out. Width k
//! lifts feature sets into conjunction space; the subscoring variant
//! partitions the depth table by the logscore of the raw path reward.

use crate::env::{Action, FilledNode, NodeFiller, SimError};
use crate::features::{lift_conjunctions, EFeature, Novelty, PartitionedDepthTable};
use crate::planners::{logscore, SearchError};
use rand::Rng;

pub type NodeId = usize;

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub action: Option<Action>,
    pub parent: Option<NodeId>,
    pub path: Vec<Action>,
    pub depth: u32,
    pub fill: FilledNode,
    pub raw_path_reward: f64,
    pub shaped_path_reward: f64,
    pub visited: bool,
    pub solved: bool,
    pub terminal: bool,
    /// Child slot per action id; `None` until and unless a rollout
    /// materializes that child. Slots are created without simulator
    /// calls when the node is first expanded.
    pub children: Option<Vec<Option<NodeId>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RolloutCase {
    Terminal,
    Case1,
    Case2,
    Case3,
    Case4,
}

/// One classified step of a traced rollout.
#[derive(Clone, Copy, Debug)]
pub struct RolloutStep {
    pub node: NodeId,
    pub depth: u32,
    pub case: RolloutCase,
    /// The feature returned by the novelty classification, paired with
    /// the node depth; absent for terminal steps and empty feature sets.
    pub feature: Option<EFeature>,
}

#[derive(Clone, Debug, Default)]
pub struct RolloutTrace {
    pub steps: Vec<RolloutStep>,
}

#[derive(Clone, Debug, Default)]
pub struct RolloutStats {
    pub rollouts: u64,
    pub node_count: usize,
    pub sim_calls: u64,
    pub max_depth: u32,
    pub truncated: bool,
    pub solved_root: bool,
    /// Rollouts that neither improved a table entry nor newly solved a
    /// node. Always zero: every completed rollout makes progress.
    pub progress_violations: u64,
}

#[derive(Clone, Debug)]
pub struct RolloutTree {
    pub nodes: Vec<TreeNode>,
    pub stats: RolloutStats,
    /// Per-rollout case traces, recorded when tracing is enabled.
    pub traces: Vec<RolloutTrace>,
}

impl RolloutTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Minimum depth among nodes whose features contain `f`.
    pub fn min_depth_with_feature(&self, f: crate::features::FeatureId) -> Option<u32> {
        self.nodes
            .iter()
            .filter(|n| n.fill.features.contains(f))
            .map(|n| n.depth)
            .min()
    }

    pub fn max_depth(&self) -> u32 {
        self.stats.max_depth
    }
}

#[derive(Clone, Debug)]
pub struct RolloutOptions {
    /// Conjunction width k.
    pub width: u32,
    /// Partition the depth table by logscore of the raw path reward.
    pub subscoring: bool,
    /// Record per-rollout case traces.
    pub trace: bool,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self {
            width: 1,
            subscoring: false,
            trace: false,
        }
    }
}

enum RolloutEnd {
    Completed,
    Truncated,
}

/// Runs rollouts from the current root until the root is SOLVED or the
/// filler's budget is exhausted. `reused` continues a tree re-rooted by
/// [`reuse_subtree`]; retained nodes keep their cached fills (so
/// re-materializing them costs no simulator calls) but are re-evaluated
/// against the fresh depth table.
pub fn generate_lookahead_tree(
    filler: &mut impl NodeFiller,
    opts: &RolloutOptions,
    rng: &mut impl Rng,
    reused: Option<RolloutTree>,
) -> Result<RolloutTree, SearchError> {
    let calls_at_start = filler.inner_calls();
    let mut tree = match reused {
        Some(mut t) => {
            t.stats = RolloutStats::default();
            t.traces.clear();
            if t.nodes[0].terminal {
                t.nodes[0].solved = true;
            }
            t
        }
        None => {
            let fill = filler.fill_root()?;
            let terminal = fill.terminal;
            RolloutTree {
                nodes: vec![TreeNode {
                    action: None,
                    parent: None,
                    path: Vec::new(),
                    depth: 0,
                    fill,
                    raw_path_reward: 0.0,
                    shaped_path_reward: 0.0,
                    visited: true,
                    solved: terminal,
                    terminal,
                    children: None,
                }],
                stats: RolloutStats::default(),
                traces: Vec::new(),
            }
        }
    };

    let root_lifted = lift_conjunctions(&tree.nodes[0].fill.features, opts.width)?;
    let mut tables = PartitionedDepthTable::new(root_lifted.capacity());
    let root_key = if opts.subscoring { logscore(0.0) } else { 0 };
    tables.table_mut(root_key).update_depths(&root_lifted, 0)?;

    while !tree.nodes[0].solved {
        if filler.budget_exhausted() {
            tree.stats.truncated = true;
            break;
        }
        let mut trace = opts.trace.then(RolloutTrace::default);
        let mut progress = false;
        let end = rollout(
            filler,
            &mut tree,
            &mut tables,
            opts,
            rng,
            &mut progress,
            trace.as_mut(),
        )?;
        if let Some(t) = trace {
            tree.traces.push(t);
        }
        match end {
            RolloutEnd::Completed => {
                tree.stats.rollouts += 1;
                if !progress {
                    tree.stats.progress_violations += 1;
                }
            }
            RolloutEnd::Truncated => {
                tree.stats.truncated = true;
                break;
            }
        }
    }

    tree.stats.node_count = tree.nodes.len();
    tree.stats.sim_calls = filler.inner_calls() - calls_at_start;
    tree.stats.max_depth = tree.nodes.iter().map(|n| n.depth).max().unwrap_or(0);
    tree.stats.solved_root = tree.nodes[0].solved;
    Ok(tree)
}

/// One rollout: extends a root-to-tip branch, mutating the tree and the
/// depth table. `progress` is set when the rollout improved some `d[f]`
/// or newly solved a node.
#[allow(clippy::too_many_arguments)]
fn rollout(
    filler: &mut impl NodeFiller,
    tree: &mut RolloutTree,
    tables: &mut PartitionedDepthTable,
    opts: &RolloutOptions,
    rng: &mut impl Rng,
    progress: &mut bool,
    mut trace: Option<&mut RolloutTrace>,
) -> Result<RolloutEnd, SearchError> {
    let action_count = filler.action_count() as usize;
    let mut current: NodeId = 0;

    loop {
        if tree.nodes[current].children.is_none() {
            // Expand: create child slots; no simulator calls yet.
            tree.nodes[current].children = Some(vec![None; action_count]);
        }

        let candidates: Vec<usize> = tree.nodes[current]
            .children
            .as_ref()
            .expect("just expanded")
            .iter()
            .enumerate()
            .filter(|(_, slot)| match slot {
                None => true,
                Some(id) => !tree.nodes[*id].solved,
            })
            .map(|(a, _)| a)
            .collect();
        assert!(
            !candidates.is_empty(),
            "an expanded unsolved node must have an unsolved child"
        );
        let action = Action(candidates[rng.random_range(0..candidates.len())] as u32);

        let slot = tree.nodes[current].children.as_ref().expect("expanded")
            [action.0 as usize];
        let child = match slot {
            Some(id) => id, // Fill-Node is free: the state is cached in the tree
            None => {
                let parent_fill = tree.nodes[current].fill.clone();
                let fill = match filler.fill_child(&tree.nodes[current].path, action, &parent_fill)
                {
                    Ok(f) => f,
                    Err(SimError::BudgetExhausted) => return Ok(RolloutEnd::Truncated),
                    Err(e) => return Err(e.into()),
                };
                let mut path = tree.nodes[current].path.clone();
                path.push(action);
                let id = tree.nodes.len();
                let parent = &tree.nodes[current];
                let node = TreeNode {
                    action: Some(action),
                    parent: Some(current),
                    path,
                    depth: parent.depth + 1,
                    raw_path_reward: parent.raw_path_reward + fill.raw_reward,
                    shaped_path_reward: parent.shaped_path_reward + fill.shaped_reward,
                    visited: false,
                    solved: false,
                    terminal: fill.terminal,
                    children: None,
                    fill,
                };
                tree.nodes.push(node);
                tree.nodes[current].children.as_mut().expect("expanded")[action.0 as usize] =
                    Some(id);
                id
            }
        };

        current = child;
        let depth = tree.nodes[current].depth;

        if tree.nodes[current].terminal {
            tree.nodes[current].visited = true;
            *progress |= solve_and_propagate(tree, current) > 0;
            record(&mut trace, current, depth, RolloutCase::Terminal, None);
            return Ok(RolloutEnd::Completed);
        }

        let key = if opts.subscoring {
            logscore(tree.nodes[current].raw_path_reward)
        } else {
            0
        };
        let lifted = lift_conjunctions(&tree.nodes[current].fill.features, opts.width)?;
        // A state with no active features can never be novel.
        let class = if lifted.is_empty() {
            if tree.nodes[current].visited {
                Err(RolloutCase::Case3)
            } else {
                Err(RolloutCase::Case2)
            }
        } else {
            Ok(tables.table_mut(key).classify_novelty(&lifted, depth)?)
        };

        match class {
            Ok(Novelty::Novel(f)) => {
                // case 1
                tree.nodes[current].visited = true;
                let improved = tables.table_mut(key).update_depths(&lifted, depth)?;
                *progress |= !improved.is_empty();
                record(
                    &mut trace,
                    current,
                    depth,
                    RolloutCase::Case1,
                    Some(EFeature { feature: f, depth }),
                );
            }
            Ok(Novelty::Known(f)) if tree.nodes[current].visited => {
                // case 4: keep extending
                record(
                    &mut trace,
                    current,
                    depth,
                    RolloutCase::Case4,
                    Some(EFeature { feature: f, depth }),
                );
            }
            Ok(Novelty::Known(f)) | Ok(Novelty::Stale(f)) if !tree.nodes[current].visited => {
                // case 2: new node, nothing improves
                tree.nodes[current].visited = true;
                *progress |= solve_and_propagate(tree, current) > 0;
                record(
                    &mut trace,
                    current,
                    depth,
                    RolloutCase::Case2,
                    Some(EFeature { feature: f, depth }),
                );
                return Ok(RolloutEnd::Completed);
            }
            Ok(Novelty::Stale(f)) => {
                // case 3: revisited, no feature ties its table depth
                *progress |= solve_and_propagate(tree, current) > 0;
                record(
                    &mut trace,
                    current,
                    depth,
                    RolloutCase::Case3,
                    Some(EFeature { feature: f, depth }),
                );
                return Ok(RolloutEnd::Completed);
            }
            Ok(_) => unreachable!("visited/unvisited cases are exhaustive"),
            Err(case @ RolloutCase::Case2) => {
                tree.nodes[current].visited = true;
                *progress |= solve_and_propagate(tree, current) > 0;
                record(&mut trace, current, depth, case, None);
                return Ok(RolloutEnd::Completed);
            }
            Err(case) => {
                *progress |= solve_and_propagate(tree, current) > 0;
                record(&mut trace, current, depth, case, None);
                return Ok(RolloutEnd::Completed);
            }
        }
    }
}

fn record(
    trace: &mut Option<&mut RolloutTrace>,
    node: NodeId,
    depth: u32,
    case: RolloutCase,
    feature: Option<EFeature>,
) {
    if let Some(t) = trace {
        t.steps.push(RolloutStep {
            node,
            depth,
            case,
            feature,
        });
    }
}

/// Labels `node` SOLVED and propagates upward: each ancestor whose
/// children are all generated and all solved becomes solved too,
/// stopping at the first ancestor failing the condition. Returns how
/// many nodes were newly solved.
pub fn solve_and_propagate(tree: &mut RolloutTree, node: NodeId) -> usize {
    let mut newly = 0;
    if !tree.nodes[node].solved {
        tree.nodes[node].solved = true;
        newly += 1;
    }
    let mut cursor = node;
    while let Some(parent) = tree.nodes[cursor].parent {
        if tree.nodes[parent].solved {
            break;
        }
        let all_solved = match &tree.nodes[parent].children {
            None => false,
            Some(slots) => slots.iter().all(|slot| match slot {
                None => false,
                Some(id) => tree.nodes[*id].solved,
            }),
        };
        if !all_solved {
            break;
        }
        tree.nodes[parent].solved = true;
        newly += 1;
        cursor = parent;
    }
    newly
}

/// Debug dump in the shared one-node-per-line format:
/// `path=<dot-joined action ids or "-"> depth=<d> reward=<shaped path reward> pruned=<bool>`
/// (rollout trees never hold pruned nodes, so the flag is always false).
pub fn dump_tree(tree: &RolloutTree) -> String {
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
            "path={} depth={} reward={} pruned=false\n",
            path, node.depth, node.shaped_path_reward
        ));
    }
    out
}

/// Re-roots the tree at the executed child for the next decision:
/// depths rebase to zero, path rewards restart, and all visited/solved
/// flags clear so retained nodes are re-evaluated under the fresh depth
/// table, while cached fills are kept so re-materializing them is free.
/// Returns `None` when the executed child was never generated.
pub fn reuse_subtree(tree: &RolloutTree, executed: Action) -> Option<RolloutTree> {
    let old_root = &tree.nodes[0];
    let new_root_old_id = (*old_root.children.as_ref()?).get(executed.0 as usize)?.as_ref()?;

    // map old ids to new ids with a breadth-first copy
    let mut mapping = vec![usize::MAX; tree.nodes.len()];
    let mut order = vec![*new_root_old_id];
    mapping[*new_root_old_id] = 0;
    let mut cursor = 0;
    while cursor < order.len() {
        let old_id = order[cursor];
        cursor += 1;
        if let Some(slots) = &tree.nodes[old_id].children {
            for slot in slots.iter().flatten() {
                mapping[*slot] = order.len();
                order.push(*slot);
            }
        }
    }

    let mut nodes = Vec::with_capacity(order.len());
    for &old_id in &order {
        let old = &tree.nodes[old_id];
        let is_root = old_id == *new_root_old_id;
        let parent = if is_root {
            None
        } else {
            Some(mapping[old.parent.expect("non-root has a parent")])
        };
        let children = old.children.as_ref().map(|slots| {
            slots
                .iter()
                .map(|slot| slot.map(|id| mapping[id]))
                .collect::<Vec<_>>()
        });
        nodes.push(TreeNode {
            action: if is_root { None } else { old.action },
            parent,
            path: old.path[1..].to_vec(),
            depth: old.depth - 1,
            fill: old.fill.clone(),
            raw_path_reward: 0.0,    // recomputed below
            shaped_path_reward: 0.0, // recomputed below
            visited: is_root,
            solved: false,
            terminal: old.terminal,
            children,
        });
    }
    // path rewards relative to the new root, in topological (copy) order
    for i in 1..nodes.len() {
        let parent = nodes[i].parent.expect("non-root");
        nodes[i].raw_path_reward = nodes[parent].raw_path_reward + nodes[i].fill.raw_reward;
        nodes[i].shaped_path_reward =
            nodes[parent].shaped_path_reward + nodes[i].fill.shaped_reward;
    }

    Some(RolloutTree {
        nodes,
        stats: RolloutStats::default(),
        traces: Vec::new(),
    })
}
