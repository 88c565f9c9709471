//! The online episode loop: per-decision planning, reward shaping,
//! discounted backup, action selection, frameskip with the no-change
//! extension rule, background calibration, budget enforcement, and
//! score logging.
//!
//! Reported scores are always raw: shaping (risk aversion) affects
//! action selection only.

use crate::bprost::{
    calibrate_background, extract_bprost, BackgroundMap, FeatureLayout, Screen, TilingConfig,
};
use crate::env::{
    Action, Budget, BudgetMeter, CachingSimulator, FilledNode, NodeFiller, SimError, Simulator,
};
use crate::planners::{iw_search, iwg_search, iws_search, GoalSet, IwOptions, SearchError};
use crate::rollout::{generate_lookahead_tree, reuse_subtree, RolloutOptions, RolloutTree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Planner variant selection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlannerKind {
    /// IW(k) breadth-first novelty search; `width` 1 is plain IW(1).
    Iw { width: u32 },
    /// IW_G(1): novelty partitioned by achieved-goal count.
    IwG,
    /// IW_S(1): novelty partitioned by the logscore of the path reward.
    IwS,
    /// Rollout IW(k), optionally risk-averse and/or subscoring.
    RolloutIw {
        width: u32,
        risk_averse: bool,
        subscoring: bool,
    },
}

impl PlannerKind {
    /// Parses a planner name: `iw1`, `iw2`, …, `iwg`, `iws`,
    /// `rollout-iw`, `ra-rollout-iw`, `ras-rollout-iw` (a trailing
    /// number selects the width, e.g. `rollout-iw2`).
    pub fn parse(name: &str) -> Option<Self> {
        let name = name.trim().to_ascii_lowercase();
        match name.as_str() {
            "iwg" => return Some(Self::IwG),
            "iws" => return Some(Self::IwS),
            _ => {}
        }
        let width_of = |rest: &str| -> Option<u32> {
            if rest.is_empty() {
                Some(1)
            } else {
                rest.parse().ok().filter(|&k| k >= 1)
            }
        };
        if let Some(rest) = name.strip_prefix("ras-rollout-iw") {
            return Some(Self::RolloutIw {
                width: width_of(rest)?,
                risk_averse: true,
                subscoring: true,
            });
        }
        if let Some(rest) = name.strip_prefix("ra-rollout-iw") {
            return Some(Self::RolloutIw {
                width: width_of(rest)?,
                risk_averse: true,
                subscoring: false,
            });
        }
        if let Some(rest) = name.strip_prefix("rollout-iw") {
            return Some(Self::RolloutIw {
                width: width_of(rest)?,
                risk_averse: false,
                subscoring: false,
            });
        }
        if let Some(rest) = name.strip_prefix("iw") {
            return Some(Self::Iw {
                width: width_of(rest)?,
            });
        }
        None
    }

    pub fn name(&self) -> String {
        match self {
            Self::Iw { width } => format!("iw{width}"),
            Self::IwG => "iwg".to_string(),
            Self::IwS => "iws".to_string(),
            Self::RolloutIw {
                width,
                risk_averse,
                subscoring,
            } => {
                let prefix = match (risk_averse, subscoring) {
                    (true, true) => "ras-",
                    (true, false) => "ra-",
                    _ => "",
                };
                let suffix = if *width == 1 {
                    String::new()
                } else {
                    width.to_string()
                };
                format!("{prefix}rollout-iw{suffix}")
            }
        }
    }

    pub fn risk_averse(&self) -> bool {
        matches!(
            self,
            Self::RolloutIw {
                risk_averse: true,
                ..
            }
        )
    }
}

/// Per-episode configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub planner: PlannerKind,
    /// Emulation frames per decision; the selected action repeats over
    /// all of them.
    pub frameskip: u32,
    pub budget: Budget,
    /// Discount for backed-up values, slightly below 1 so earlier
    /// rewards win ties.
    pub gamma: f64,
    /// Risk-aversion multiplier for negative rewards.
    pub alpha: f64,
    /// Shaped reward added on death; defaults to −10·alpha.
    pub death_penalty: f64,
    pub max_frames: u64,
    /// Keep lookahead state across decisions (subtree reuse plus the
    /// state cache).
    pub caching: bool,
    pub seed: u64,
    /// Random actions used to identify the initial background; they run
    /// on a scratch rollback of the environment, not in the episode.
    pub calibration_actions: u32,
    /// Apply an action for another frameskip block when the first block
    /// changed no feature (the no-change extension rule).
    pub extension: bool,
    /// Capture a lookahead-tree dump per decision (one node per line) in
    /// the decision records; costly, meant for trace runs.
    #[serde(default)]
    pub dump_trees: bool,
    /// Count a nonzero reward (or terminal) as a change for the
    /// extension rule, not only feature-set inequality.
    pub extension_counts_reward: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        let alpha = 50_000.0;
        Self {
            planner: PlannerKind::RolloutIw {
                width: 1,
                risk_averse: false,
                subscoring: false,
            },
            frameskip: 15,
            budget: Budget::Calls(300),
            gamma: 0.99,
            alpha,
            death_penalty: -10.0 * alpha,
            max_frames: 18_000,
            caching: true,
            seed: 0,
            calibration_actions: 100,
            extension: true,
            dump_trees: false,
            extension_counts_reward: true,
        }
    }
}

/// Shaped reward for action selection: under a risk-averse planner,
/// negative rewards multiply by alpha and deaths add the death penalty;
/// identity otherwise.
pub fn shape_reward(raw: f64, death: bool, cfg: &EpisodeConfig) -> f64 {
    if !cfg.planner.risk_averse() {
        return raw;
    }
    let scaled = if raw < 0.0 { raw * cfg.alpha } else { raw };
    scaled + if death { cfg.death_penalty } else { 0.0 }
}

/// Fills lookahead nodes from screens: cached path replay, frameskip
/// application with the no-change extension, B-PROST extraction against
/// the episode's background snapshot, reward shaping, and per-decision
/// budget gating.
pub struct ScreenFiller<S: Simulator> {
    sim: CachingSimulator<S>,
    layout: FeatureLayout,
    bg: BackgroundMap,
    prev_screen: Option<Screen>,
    cfg: EpisodeConfig,
    meter: BudgetMeter,
}

impl<S: Simulator> ScreenFiller<S> {
    /// Wraps a simulator positioned at the decision root. `prev_screen`
    /// is the executed screen of the previous decision point (None at
    /// episode start).
    pub fn new(
        sim: S,
        layout: FeatureLayout,
        bg: BackgroundMap,
        prev_screen: Option<Screen>,
        cfg: EpisodeConfig,
    ) -> Self {
        let sim = CachingSimulator::new(sim);
        let meter = BudgetMeter::start(Budget::Unlimited, sim.inner_calls());
        Self {
            sim,
            layout,
            bg,
            prev_screen,
            cfg,
            meter,
        }
    }

    pub fn begin_decision(&mut self, budget: Budget) {
        self.meter = BudgetMeter::start(budget, self.sim.inner_calls());
    }

    pub fn decision_calls(&self) -> u64 {
        self.meter.calls_used(self.sim.inner_calls())
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn background(&self) -> &BackgroundMap {
        &self.bg
    }

    pub fn cache_hits(&self) -> u64 {
        self.sim.hits()
    }

    fn extract(&self, prev: Option<&Screen>, cur: &Screen) -> Result<crate::features::FeatureSet, SimError> {
        Ok(extract_bprost(prev, cur, &self.bg, &self.layout)?.features)
    }

    /// Executes the selected action on the real environment: the edge
    /// record (filled during planning when cached) becomes the new
    /// decision root, the previous-screen reference advances, and the
    /// background map absorbs the executed screen. Execution ignores the
    /// planning budget.
    pub fn execute(&mut self, action: Action) -> Result<FilledNode, SearchError> {
        self.meter = BudgetMeter::start(Budget::Unlimited, self.sim.inner_calls());
        let root = self.fill_root()?;
        let executed = self.fill_child(&[], action, &root)?;
        self.sim.advance_root(action);
        if !self.cfg.caching {
            self.sim.clear_subtree();
        }
        self.prev_screen = Some(root.screen);
        self.bg.update(&executed.screen).map_err(SimError::from)?;
        Ok(executed)
    }
}

impl<S: Simulator> NodeFiller for ScreenFiller<S> {
    fn fill_root(&mut self) -> Result<FilledNode, SimError> {
        let screen = self.sim.root_screen().clone();
        let features = self.extract(self.prev_screen.as_ref(), &screen)?;
        Ok(FilledNode {
            features,
            screen,
            raw_reward: 0.0,
            shaped_reward: 0.0,
            terminal: false,
            death: false,
            frames_consumed: 0,
            replayed: true,
        })
    }

    fn fill_child(
        &mut self,
        parent_path: &[Action],
        action: Action,
        parent: &FilledNode,
    ) -> Result<FilledNode, SimError> {
        let mut path = parent_path.to_vec();
        path.push(action);
        if !self.sim.is_cached(&path) && self.budget_exhausted() {
            return Err(SimError::BudgetExhausted);
        }
        let (mut outcome, mut screen, replayed) = self.sim.apply_path(&path, self.cfg.frameskip)?;
        let mut features = self.extract(Some(&parent.screen), &screen)?;
        // Replayed records were already extended (or not) when first
        // generated; the merged outcome is definitive.
        if !replayed && self.cfg.extension && !outcome.terminal {
            let unchanged = features == parent.features
                && (!self.cfg.extension_counts_reward || outcome.reward == 0.0);
            if unchanged && !self.budget_exhausted() {
                let (merged, extended_screen) = self.sim.extend_tip(&path, self.cfg.frameskip)?;
                outcome = merged;
                screen = extended_screen;
                features = self.extract(Some(&parent.screen), &screen)?;
            }
        }
        Ok(FilledNode {
            features,
            screen,
            raw_reward: outcome.reward,
            shaped_reward: shape_reward(outcome.reward, outcome.death, &self.cfg),
            terminal: outcome.terminal,
            death: outcome.death,
            frames_consumed: outcome.frames_consumed,
            replayed,
        })
    }

    fn action_count(&self) -> u32 {
        self.sim.action_count()
    }

    fn inner_calls(&self) -> u64 {
        self.sim.inner_calls()
    }

    fn budget_exhausted(&self) -> bool {
        self.meter.exhausted(self.sim.inner_calls())
    }
}

/// Uniform read view over both lookahead tree kinds for value backup.
pub trait LookaheadTree {
    /// Generated root children as (edge action, node id).
    fn root_children(&self) -> Vec<(Action, usize)>;
    fn children_of(&self, node: usize) -> Vec<usize>;
    /// Shaped reward of the edge leading into the node.
    fn edge_shaped_reward(&self, node: usize) -> f64;
}

impl LookaheadTree for crate::planners::SearchTree {
    fn root_children(&self) -> Vec<(Action, usize)> {
        self.nodes[0]
            .children
            .iter()
            .map(|&i| (self.nodes[i].action.expect("non-root"), i))
            .collect()
    }

    fn children_of(&self, node: usize) -> Vec<usize> {
        self.nodes[node].children.clone()
    }

    fn edge_shaped_reward(&self, node: usize) -> f64 {
        self.nodes[node].edge_shaped_reward
    }
}

impl LookaheadTree for RolloutTree {
    fn root_children(&self) -> Vec<(Action, usize)> {
        match &self.nodes[0].children {
            None => Vec::new(),
            Some(slots) => slots
                .iter()
                .enumerate()
                .filter_map(|(a, slot)| slot.map(|id| (Action(a as u32), id)))
                .collect(),
        }
    }

    fn children_of(&self, node: usize) -> Vec<usize> {
        match &self.nodes[node].children {
            None => Vec::new(),
            Some(slots) => slots.iter().flatten().copied().collect(),
        }
    }

    fn edge_shaped_reward(&self, node: usize) -> f64 {
        self.nodes[node].fill.shaped_reward
    }
}

fn node_value(tree: &impl LookaheadTree, node: usize, gamma: f64) -> f64 {
    let edge = tree.edge_shaped_reward(node);
    let children = tree.children_of(node);
    if children.is_empty() {
        edge
    } else {
        let best = children
            .into_iter()
            .map(|c| node_value(tree, c, gamma))
            .fold(f64::NEG_INFINITY, f64::max);
        edge + gamma * best
    }
}

/// Discounted backup over shaped rewards: a leaf is worth its edge
/// reward, an inner node its edge reward plus gamma times the best
/// generated child. Returns the per-child values at the root.
pub fn backup_values(tree: &impl LookaheadTree, gamma: f64) -> Vec<(Action, f64)> {
    tree.root_children()
        .into_iter()
        .map(|(a, id)| (a, node_value(tree, id, gamma)))
        .collect()
}

/// Argmax over child values with uniform random tie-breaking. `None`
/// when the tree generated no root children.
pub fn select_action(child_values: &[(Action, f64)], rng: &mut impl Rng) -> Option<Action> {
    let best = child_values
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<Action> = child_values
        .iter()
        .filter(|&&(_, v)| v == best)
        .map(|&(a, _)| a)
        .collect();
    if tied.is_empty() {
        return None;
    }
    Some(tied[rng.random_range(0..tied.len())])
}

/// One record per decision point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub index: u64,
    pub selected: u32,
    pub raw_reward: f64,
    pub lookahead_nodes: usize,
    pub rollouts: u64,
    pub simulator_calls: u64,
    pub elapsed_seconds: f64,
    pub tree_depth_max: u32,
    /// The tree had no generated root children and a uniformly random
    /// action was executed instead.
    pub random_fallback: bool,
    /// Lookahead-tree dump (one node per line), present when the episode
    /// was configured to capture them.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tree_dump: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeEnd {
    GameOver,
    FrameCap,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeResult {
    /// Sum of raw rewards observed during execution (never shaped).
    pub total_raw_score: f64,
    pub frames: u64,
    pub decisions: Vec<DecisionRecord>,
    pub terminated_by: EpisodeEnd,
}

fn derive_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03),
    )
}

struct PlanOutcome {
    values: Vec<(Action, f64)>,
    nodes: usize,
    rollouts: u64,
    max_depth: u32,
    dump: Option<String>,
    reusable: Option<RolloutTree>,
}

fn plan_one_decision<S: Simulator>(
    filler: &mut ScreenFiller<S>,
    cfg: &EpisodeConfig,
    goals: Option<&GoalSet>,
    reuse: Option<RolloutTree>,
    decision: u64,
) -> Result<PlanOutcome, SearchError> {
    match &cfg.planner {
        PlannerKind::Iw { width } => {
            let tree = iw_search(
                filler,
                &IwOptions {
                    width: *width,
                    action_order: None,
                },
            )?;
            Ok(PlanOutcome {
                values: backup_values(&tree, cfg.gamma),
                nodes: tree.nodes.len(),
                rollouts: 0,
                max_depth: tree.stats.max_depth,
                dump: cfg.dump_trees.then(|| crate::planners::dump_tree(&tree)),
                reusable: None,
            })
        }
        PlannerKind::IwG => {
            let goals = goals.ok_or(SearchError::EmptyGoalSet)?;
            let tree = iwg_search(filler, goals, &IwOptions::default())?;
            Ok(PlanOutcome {
                values: backup_values(&tree, cfg.gamma),
                nodes: tree.nodes.len(),
                rollouts: 0,
                max_depth: tree.stats.max_depth,
                dump: cfg.dump_trees.then(|| crate::planners::dump_tree(&tree)),
                reusable: None,
            })
        }
        PlannerKind::IwS => {
            let tree = iws_search(filler, &IwOptions::default())?;
            Ok(PlanOutcome {
                values: backup_values(&tree, cfg.gamma),
                nodes: tree.nodes.len(),
                rollouts: 0,
                max_depth: tree.stats.max_depth,
                dump: cfg.dump_trees.then(|| crate::planners::dump_tree(&tree)),
                reusable: None,
            })
        }
        PlannerKind::RolloutIw {
            width, subscoring, ..
        } => {
            let mut rng = derive_rng(cfg.seed, 1, decision);
            let tree = generate_lookahead_tree(
                filler,
                &RolloutOptions {
                    width: *width,
                    subscoring: *subscoring,
                    trace: false,
                },
                &mut rng,
                reuse,
            )?;
            Ok(PlanOutcome {
                values: backup_values(&tree, cfg.gamma),
                nodes: tree.nodes.len(),
                rollouts: tree.stats.rollouts,
                max_depth: tree.stats.max_depth,
                dump: cfg.dump_trees.then(|| crate::rollout::dump_tree(&tree)),
                reusable: Some(tree),
            })
        }
    }
}

/// Runs one online episode: calibrate the background on a scratch
/// rollback, then loop plan → backup → select → execute → advance
/// caches, until the game ends or the frame cap is hit.
pub fn run_episode<S: Simulator>(
    mut env: S,
    cfg: &EpisodeConfig,
    goals: Option<&GoalSet>,
) -> Result<EpisodeResult, SearchError> {
    let first = env.reset();
    let mut calib_rng = derive_rng(cfg.seed, 0, 0);
    let bg = calibrate_background(
        &mut env,
        cfg.calibration_actions,
        cfg.frameskip,
        &mut calib_rng,
    )?;
    let tiling = TilingConfig::for_screen(first.width(), first.height());
    let layout = FeatureLayout::new(tiling, first.palette_size());
    let mut filler = ScreenFiller::new(env, layout, bg, None, cfg.clone());

    let mut result = EpisodeResult {
        total_raw_score: 0.0,
        frames: 0,
        decisions: Vec::new(),
        terminated_by: EpisodeEnd::FrameCap,
    };
    let mut reuse: Option<RolloutTree> = None;

    for decision in 0u64.. {
        if result.frames >= cfg.max_frames {
            result.terminated_by = EpisodeEnd::FrameCap;
            break;
        }
        filler.begin_decision(cfg.budget);
        let started = Instant::now();
        let plan = plan_one_decision(&mut filler, cfg, goals, reuse.take(), decision)?;
        let elapsed = started.elapsed().as_secs_f64();
        let sim_calls = filler.decision_calls();

        let mut select_rng = derive_rng(cfg.seed, 2, decision);
        let (action, random_fallback) = match select_action(&plan.values, &mut select_rng) {
            Some(a) => (a, false),
            None => (
                Action(select_rng.random_range(0..filler.action_count())),
                true,
            ),
        };

        let executed = filler.execute(action)?;
        reuse = if cfg.caching {
            plan.reusable
                .as_ref()
                .and_then(|tree| reuse_subtree(tree, action))
        } else {
            None
        };

        result.total_raw_score += executed.raw_reward;
        result.frames += executed.frames_consumed as u64;
        result.decisions.push(DecisionRecord {
            index: decision,
            selected: action.0,
            raw_reward: executed.raw_reward,
            lookahead_nodes: plan.nodes,
            rollouts: plan.rollouts,
            simulator_calls: sim_calls,
            elapsed_seconds: elapsed,
            tree_depth_max: plan.max_depth,
            random_fallback,
            tree_dump: plan.dump,
        });

        if executed.terminal {
            result.terminated_by = EpisodeEnd::GameOver;
            break;
        }
    }
    Ok(result)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchResult {
    pub runs: Vec<EpisodeResult>,
    pub scores: Vec<f64>,
    pub mean_score: f64,
}

/// Independent episodes with seeds derived from the base seed (run 0
/// keeps the base seed); reports per-run raw scores and their mean.
pub fn run_batch<S: Simulator>(
    make_env: impl Fn() -> S,
    cfg: &EpisodeConfig,
    goals: Option<&GoalSet>,
    n_runs: u32,
) -> Result<BatchResult, SearchError> {
    let mut runs = Vec::with_capacity(n_runs as usize);
    let mut scores = Vec::with_capacity(n_runs as usize);
    for i in 0..n_runs {
        let mut run_cfg = cfg.clone();
        run_cfg.seed = cfg
            .seed
            .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let episode = run_episode(make_env(), &run_cfg, goals)?;
        scores.push(episode.total_raw_score);
        runs.push(episode);
    }
    let mean_score = if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    };
    Ok(BatchResult {
        runs,
        scores,
        mean_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{NodeFiller, ToyEnv, ToyEnvConfig};
    use crate::planners::{BfsNode, SearchStats, SearchTree};
    use crate::testutil::{rollout_planner, test_episode, toy_filler, toy_filler_with_self_prev};

    fn ra_planner() -> PlannerKind {
        PlannerKind::RolloutIw {
            width: 1,
            risk_averse: true,
            subscoring: false,
        }
    }

    #[test]
    fn planner_names_round_trip() {
        for name in [
            "iw1",
            "iw2",
            "iwg",
            "iws",
            "rollout-iw",
            "ra-rollout-iw",
            "ras-rollout-iw",
            "rollout-iw2",
        ] {
            let kind = PlannerKind::parse(name).unwrap();
            assert_eq!(kind.name(), name);
        }
        assert!(PlannerKind::parse("uct").is_none());
        assert!(PlannerKind::parse("iw0").is_none());
    }

    #[test]
    fn shape_reward_multiplies_negatives_by_alpha() {
        let cfg = test_episode(ra_planner());
        assert_eq!(shape_reward(-1.0, false, &cfg), -50_000.0);
    }

    #[test]
    fn shape_reward_penalizes_death() {
        let cfg = test_episode(ra_planner());
        assert_eq!(shape_reward(0.0, true, &cfg), -500_000.0);
    }

    #[test]
    fn shape_reward_keeps_positives_and_non_ra_identity() {
        let ra = test_episode(ra_planner());
        assert_eq!(shape_reward(5.0, false, &ra), 5.0);
        let plain = test_episode(rollout_planner());
        assert_eq!(shape_reward(-1.0, true, &plain), -1.0);
    }

    /// Hand-built linear search tree with the given edge rewards.
    fn chain_tree(edge_rewards: &[f64]) -> SearchTree {
        let mut nodes = vec![BfsNode {
            path: vec![],
            action: None,
            parent: None,
            depth: 0,
            features: crate::features::FeatureSet::empty(4),
            edge_raw_reward: 0.0,
            edge_shaped_reward: 0.0,
            raw_path_reward: 0.0,
            shaped_path_reward: 0.0,
            terminal: false,
            death: false,
            pruned: false,
            children: vec![],
        }];
        for (i, &r) in edge_rewards.iter().enumerate() {
            let parent = i;
            nodes[parent].children.push(i + 1);
            nodes.push(BfsNode {
                path: vec![Action(0); i + 1],
                action: Some(Action(0)),
                parent: Some(parent),
                depth: (i + 1) as u32,
                features: crate::features::FeatureSet::empty(4),
                edge_raw_reward: r,
                edge_shaped_reward: r,
                raw_path_reward: 0.0,
                shaped_path_reward: 0.0,
                terminal: false,
                death: false,
                pruned: false,
                children: vec![],
            });
        }
        SearchTree {
            nodes,
            truncated: false,
            stats: SearchStats::default(),
        }
    }

    #[test]
    fn backup_discounts_a_single_branch() {
        let tree = chain_tree(&[0.0, 0.0, 1.0]);
        let values = backup_values(&tree, 0.99);
        assert_eq!(values.len(), 1);
        assert!((values[0].1 - 0.9801).abs() < 1e-12);
    }

    #[test]
    fn backup_favors_the_closer_reward() {
        // two root children: leaf reward 1 at depth 1 vs at depth 3
        let mut tree = chain_tree(&[0.0, 0.0, 1.0]);
        let id = tree.nodes.len();
        tree.nodes[0].children.push(id);
        tree.nodes.push(BfsNode {
            path: vec![Action(1)],
            action: Some(Action(1)),
            parent: Some(0),
            depth: 1,
            features: crate::features::FeatureSet::empty(4),
            edge_raw_reward: 1.0,
            edge_shaped_reward: 1.0,
            raw_path_reward: 1.0,
            shaped_path_reward: 1.0,
            terminal: true,
            death: false,
            pruned: false,
            children: vec![],
        });
        let values = backup_values(&tree, 0.99);
        let deep = values.iter().find(|(a, _)| a.0 == 0).unwrap().1;
        let shallow = values.iter().find(|(a, _)| a.0 == 1).unwrap().1;
        assert!(shallow > deep);
    }

    #[test]
    fn backup_of_zero_rewards_is_zero() {
        let tree = chain_tree(&[0.0, 0.0, 0.0]);
        let values = backup_values(&tree, 0.99);
        assert_eq!(values[0].1, 0.0);
    }

    #[test]
    fn select_takes_the_argmax() {
        let values = vec![
            (Action(0), 0.0),
            (Action(1), 3.2),
            (Action(2), 1.0),
        ];
        let mut rng = derive_rng(0, 9, 0);
        assert_eq!(select_action(&values, &mut rng), Some(Action(1)));
    }

    #[test]
    fn select_breaks_ties_uniformly() {
        let values = vec![(Action(0), 2.0), (Action(1), 2.0)];
        let mut rng = derive_rng(42, 9, 0);
        let mut counts = [0u32; 2];
        for _ in 0..10_000 {
            let a = select_action(&values, &mut rng).unwrap();
            counts[a.0 as usize] += 1;
        }
        // binomial(10_000, 0.5): sigma = 50; allow 3 sigma around 5_000
        for c in counts {
            assert!((4_850..=5_150).contains(&c), "tie-break counts {counts:?}");
        }
    }

    #[test]
    fn select_over_all_zeros_uses_every_action() {
        let values: Vec<(Action, f64)> = (0..3).map(|a| (Action(a), 0.0)).collect();
        let mut rng = derive_rng(7, 9, 0);
        let mut seen = [false; 3];
        for _ in 0..200 {
            seen[select_action(&values, &mut rng).unwrap().0 as usize] = true;
        }
        assert_eq!(seen, [true, true, true]);
    }

    #[test]
    fn argmax_invariant_under_positive_scaling() {
        let base = vec![(Action(0), 1.0), (Action(1), 3.0), (Action(2), 3.0)];
        let scaled: Vec<(Action, f64)> =
            base.iter().map(|&(a, v)| (a, v * 7.25)).collect();
        for seed in 0..50 {
            let mut r1 = derive_rng(seed, 9, 0);
            let mut r2 = derive_rng(seed, 9, 0);
            assert_eq!(
                select_action(&base, &mut r1),
                select_action(&scaled, &mut r2)
            );
        }
    }

    #[test]
    fn fill_is_single_application_when_the_screen_changes() {
        let env = ToyEnvConfig::pixel_chain(5);
        let mut filler = toy_filler(&env, test_episode(rollout_planner()));
        let root = filler.fill_root().unwrap();
        let child = filler.fill_child(&[], Action(1), &root).unwrap();
        assert_eq!(child.frames_consumed, 1, "frameskip 1, one application");
        assert_ne!(child.features, root.features);
    }

    #[test]
    fn latched_fill_extends_to_double_frameskip() {
        let frameskip = 3;
        let env = ToyEnvConfig::latched_chain(5, 2 * frameskip);
        let mut ep = test_episode(rollout_planner());
        ep.frameskip = frameskip;
        // static history: the previous decision screen equals the root
        // screen, so the across-screens features are self-offsets and an
        // unmoved sprite really does leave every feature unchanged
        let mut filler = toy_filler_with_self_prev(&env, ep);
        let root = filler.fill_root().unwrap();
        let child = filler.fill_child(&[], Action(1), &root).unwrap();
        assert_eq!(child.frames_consumed, 2 * frameskip);
        assert_ne!(child.features, root.features, "the second block moved the sprite");
        // replay returns the merged record without further calls
        let calls = filler.inner_calls();
        let again = filler.fill_child(&[], Action(1), &root).unwrap();
        assert!(again.replayed);
        assert_eq!(again.frames_consumed, 2 * frameskip);
        assert_eq!(filler.inner_calls(), calls);
    }

    #[test]
    fn nonzero_reward_counts_as_change_when_configured() {
        let mut env = ToyEnvConfig::frozen();
        env.frame_reward = 0.25;
        let mut ep = test_episode(rollout_planner());
        ep.frameskip = 2;
        ep.extension_counts_reward = true;
        let mut filler = toy_filler_with_self_prev(&env, ep.clone());
        let root = filler.fill_root().unwrap();
        let child = filler.fill_child(&[], Action(0), &root).unwrap();
        assert_eq!(child.frames_consumed, 2, "reward blocks the extension");
        assert_eq!(child.raw_reward, 0.5);

        ep.extension_counts_reward = false;
        let mut filler = toy_filler_with_self_prev(&env, ep);
        let root = filler.fill_root().unwrap();
        let child = filler.fill_child(&[], Action(0), &root).unwrap();
        assert_eq!(child.frames_consumed, 4, "feature-only rule extends");
        assert_eq!(child.raw_reward, 1.0);
    }

    fn quick_cfg(planner: PlannerKind, budget: Budget, max_frames: u64) -> EpisodeConfig {
        EpisodeConfig {
            planner,
            frameskip: 1,
            budget,
            max_frames,
            caching: true,
            calibration_actions: 20,
            seed: 5,
            ..EpisodeConfig::default()
        }
    }

    fn fresh_env(cfg: &ToyEnvConfig) -> ToyEnv {
        let mut env = ToyEnv::new(cfg.clone()).unwrap();
        env.reset();
        env
    }

    #[test]
    fn chain_episode_scores_one_within_a_few_decisions() {
        let env_cfg = ToyEnvConfig::pixel_chain(5);
        let cfg = quick_cfg(rollout_planner(), Budget::Calls(200), 100);
        let result = run_episode(fresh_env(&env_cfg), &cfg, None).unwrap();
        assert_eq!(result.total_raw_score, 1.0);
        assert_eq!(result.terminated_by, EpisodeEnd::GameOver);
        assert!(result.decisions.len() <= 10, "took {} decisions", result.decisions.len());
    }

    #[test]
    fn max_frames_zero_gives_an_empty_result() {
        let env_cfg = ToyEnvConfig::pixel_chain(3);
        let cfg = quick_cfg(rollout_planner(), Budget::Calls(50), 0);
        let result = run_episode(fresh_env(&env_cfg), &cfg, None).unwrap();
        assert!(result.decisions.is_empty());
        assert_eq!(result.terminated_by, EpisodeEnd::FrameCap);
        assert_eq!(result.total_raw_score, 0.0);
    }

    #[test]
    fn call_budget_is_enforced_per_decision() {
        let env_cfg = ToyEnvConfig::collector_grid(4, 3, &[((3, 2), 1.0)]);
        let cfg = quick_cfg(rollout_planner(), Budget::Calls(12), 40);
        let result = run_episode(fresh_env(&env_cfg), &cfg, None).unwrap();
        assert!(!result.decisions.is_empty());
        for d in &result.decisions {
            assert!(
                d.simulator_calls <= 12,
                "decision {} used {} calls",
                d.index,
                d.simulator_calls
            );
        }
    }

    #[test]
    fn risk_aversion_avoids_the_lethal_loot() {
        let env_cfg = ToyEnvConfig::hazard_corridor(4);
        let plain = quick_cfg(rollout_planner(), Budget::Calls(400), 60);
        let plain_result = run_episode(fresh_env(&env_cfg), &plain, None).unwrap();
        // the loot pays 2.0 on death: the reward-greedy planner walks in
        assert_eq!(plain_result.terminated_by, EpisodeEnd::GameOver);
        assert_eq!(plain_result.total_raw_score, 2.5);

        let ra = quick_cfg(ra_planner(), Budget::Calls(400), 60);
        let ra_result = run_episode(fresh_env(&env_cfg), &ra, None).unwrap();
        assert_eq!(ra_result.terminated_by, EpisodeEnd::FrameCap);
        assert!(
            ra_result.decisions.iter().all(|d| d.raw_reward < 2.0),
            "the risk-averse run must never take the loot"
        );
    }

    #[test]
    fn reported_score_is_independent_of_alpha() {
        // positive rewards only: shaping never changes selection, so the
        // executed action sequence is identical across alphas
        let env_cfg = ToyEnvConfig::pixel_chain(4);
        let mut a = quick_cfg(ra_planner(), Budget::Calls(150), 80);
        a.alpha = 50_000.0;
        a.death_penalty = -500_000.0;
        let mut b = a.clone();
        b.alpha = 90_000.0;
        b.death_penalty = -900_000.0;
        let ra = run_episode(fresh_env(&env_cfg), &a, None).unwrap();
        let rb = run_episode(fresh_env(&env_cfg), &b, None).unwrap();
        let actions_a: Vec<u32> = ra.decisions.iter().map(|d| d.selected).collect();
        let actions_b: Vec<u32> = rb.decisions.iter().map(|d| d.selected).collect();
        assert_eq!(actions_a, actions_b);
        assert_eq!(ra.total_raw_score, rb.total_raw_score);
    }

    #[test]
    fn batch_mean_matches_hand_average() {
        let env_cfg = ToyEnvConfig::pixel_chain(3);
        let cfg = quick_cfg(rollout_planner(), Budget::Calls(100), 60);
        let batch = run_batch(|| fresh_env(&env_cfg), &cfg, None, 5).unwrap();
        assert_eq!(batch.scores.len(), 5);
        let mean: f64 = batch.scores.iter().sum::<f64>() / 5.0;
        assert_eq!(batch.mean_score, mean);
        for s in &batch.scores {
            assert_eq!(*s, 1.0, "every seed solves the tiny chain");
        }
    }

    #[test]
    fn single_run_batch_mean_is_the_score() {
        let env_cfg = ToyEnvConfig::pixel_chain(3);
        let cfg = quick_cfg(rollout_planner(), Budget::Calls(100), 60);
        let batch = run_batch(|| fresh_env(&env_cfg), &cfg, None, 1).unwrap();
        assert_eq!(batch.mean_score, batch.scores[0]);
    }

    #[test]
    fn same_seed_reproduces_the_episode_exactly() {
        let env_cfg = ToyEnvConfig::collector_grid(3, 2, &[((2, 1), 1.0)]);
        let cfg = quick_cfg(rollout_planner(), Budget::Calls(60), 50);
        let a = run_episode(fresh_env(&env_cfg), &cfg, None).unwrap();
        let b = run_episode(fresh_env(&env_cfg), &cfg, None).unwrap();
        assert_eq!(a.total_raw_score, b.total_raw_score);
        assert_eq!(
            a.decisions.iter().map(|d| d.selected).collect::<Vec<_>>(),
            b.decisions.iter().map(|d| d.selected).collect::<Vec<_>>()
        );
    }

    #[test]
    fn iw_planners_drive_episodes_too() {
        let env_cfg = ToyEnvConfig::pixel_chain(4);
        for planner in [
            PlannerKind::Iw { width: 1 },
            PlannerKind::IwS,
            PlannerKind::RolloutIw {
                width: 1,
                risk_averse: true,
                subscoring: true,
            },
        ] {
            let cfg = quick_cfg(planner.clone(), Budget::Calls(300), 100);
            let result = run_episode(fresh_env(&env_cfg), &cfg, None).unwrap();
            assert_eq!(
                result.total_raw_score,
                1.0,
                "{} failed the chain",
                planner.name()
            );
        }
    }
}
