//! Exhaustive breadth-first ground truth for toy instances.
//!
//! The oracle enumerates exact-depth reachability layers (states keyed
//! by simulator handle plus previous screen, since across-screens
//! features make the feature state a function of the pair), records the
//! optimal depth of every feature, and certifies width-1 goals per the
//! chain definition: a goal has width 1 when some feature chain
//! `f_0, …, f_n` exists with `f_i` optimally reached at depth `i`, every
//! optimal trajectory to `f_i` extendable by one action into an optimal
//! trajectory to `f_{i+1}`, and `f_n` the goal itself. The certifier is
//! conservative (restricting chains to single features and the goal as
//! the last link), so a certified goal is guaranteed width 1.

use crate::bprost::Screen;
use crate::env::{Action, SimError, Simulator, StateHandle};
use crate::features::{FeatureId, FeatureSet};
use std::collections::{BTreeMap, HashMap};

#[derive(Clone, Debug)]
pub struct OracleOptions {
    /// Maximum trajectory depth to enumerate.
    pub depth_cap: u32,
    /// State-explosion guard: total states across layers.
    pub state_cap: usize,
    /// Emulation frames per decision step.
    pub frames_per_step: u32,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            depth_cap: 32,
            state_cap: 200_000,
            frames_per_step: 1,
        }
    }
}

/// One deduplicated state of an exact-depth layer.
#[derive(Clone, Debug)]
pub struct OracleState {
    pub features: FeatureSet,
    pub screen: Screen,
    pub terminal: bool,
    pub handle: StateHandle,
    /// Successor index in the next layer per action id; empty for
    /// terminal states and for the deepest layer.
    pub successors: Vec<usize>,
}

/// Full reachability data: exact-depth layers plus per-feature optimal
/// depths.
#[derive(Clone, Debug)]
pub struct Oracle {
    pub layers: Vec<Vec<OracleState>>,
    pub action_count: u32,
    pub truncated: bool,
    feature_depths: BTreeMap<u64, u32>,
}

impl Oracle {
    /// Minimum depth at which the feature becomes true, or `None` when
    /// it was never reached within the caps (optimal depth ∞).
    pub fn optimal_depth(&self, f: FeatureId) -> Option<u32> {
        self.feature_depths.get(&f.0).copied()
    }

    /// First depth at which each distinct feature set occurs.
    pub fn first_reach_by_feature_set(&self) -> BTreeMap<Vec<u64>, u32> {
        let mut map = BTreeMap::new();
        for (d, layer) in self.layers.iter().enumerate() {
            for state in layer {
                let key: Vec<u64> = state.features.iter().map(|f| f.0).collect();
                map.entry(key).or_insert(d as u32);
            }
        }
        map
    }
}

/// Exhaustive breadth-first search from the simulator's current state.
/// `extract` maps a (previous screen, current screen) pair to a feature
/// set; `root_prev` is the screen before the root (None at episode
/// start). The simulator is restored to the root state on return.
pub fn plain_bfs_oracle<S: Simulator>(
    sim: &mut S,
    root_prev: Option<&Screen>,
    extract: &mut dyn FnMut(Option<&Screen>, &Screen) -> FeatureSet,
    opts: &OracleOptions,
) -> Result<Oracle, SimError> {
    let action_count = sim.action_count();
    let root_handle = sim.save();
    let root_screen = sim.screen();
    let root = OracleState {
        features: extract(root_prev, &root_screen),
        screen: root_screen,
        terminal: false,
        handle: root_handle.clone(),
        successors: Vec::new(),
    };

    let mut layers = vec![vec![root]];
    let mut total_states = 1usize;
    let mut truncated = false;

    for depth in 0..opts.depth_cap {
        let mut next: Vec<OracleState> = Vec::new();
        // key: (child handle bytes, parent screen bytes), the pair that
        // determines the feature state
        let mut index: HashMap<(Vec<u8>, Vec<u8>), usize> = HashMap::new();
        let current_len = layers[depth as usize].len();
        #[allow(clippy::needless_range_loop)] // the body re-borrows layers mutably
        for i in 0..current_len {
            if layers[depth as usize][i].terminal {
                continue;
            }
            let parent_handle = layers[depth as usize][i].handle.clone();
            let parent_screen = layers[depth as usize][i].screen.clone();
            let mut successors = Vec::with_capacity(action_count as usize);
            for a in 0..action_count {
                sim.restore(&parent_handle)?;
                let outcome = sim.apply(Action(a), opts.frames_per_step)?;
                let handle = sim.save();
                let screen = sim.screen();
                let key = (handle.0.clone(), parent_screen.pixels().to_vec());
                let idx = match index.get(&key) {
                    Some(&idx) => idx,
                    None => {
                        let idx = next.len();
                        next.push(OracleState {
                            features: extract(Some(&parent_screen), &screen),
                            screen,
                            terminal: outcome.terminal,
                            handle,
                            successors: Vec::new(),
                        });
                        index.insert(key, idx);
                        idx
                    }
                };
                successors.push(idx);
            }
            layers[depth as usize][i].successors = successors;
        }
        if next.is_empty() {
            break;
        }
        total_states += next.len();
        layers.push(next);
        if total_states > opts.state_cap {
            truncated = true;
            break;
        }
    }

    sim.restore(&root_handle)?;

    let mut feature_depths = BTreeMap::new();
    for (d, layer) in layers.iter().enumerate() {
        for state in layer {
            for f in state.features.iter() {
                feature_depths.entry(f.0).or_insert(d as u32);
            }
        }
    }

    Ok(Oracle {
        layers,
        action_count,
        truncated,
        feature_depths,
    })
}

/// True when the oracle certifies `goal` as a width-1 goal reachable at
/// its optimal depth through a single-feature chain. Root-true goals are
/// not certified (the definition requires at least one action).
pub fn certify_width1(oracle: &Oracle, goal: FeatureId) -> bool {
    let Some(goal_depth) = oracle.optimal_depth(goal) else {
        return false;
    };
    if goal_depth == 0 || oracle.layers.len() <= goal_depth as usize {
        return false;
    }

    // features grouped by optimal depth
    let mut by_depth: BTreeMap<u32, Vec<FeatureId>> = BTreeMap::new();
    for (&f, &d) in &oracle.feature_depths {
        if d <= goal_depth {
            by_depth.entry(d).or_default().push(FeatureId(f));
        }
    }

    // states at layer d containing feature f (the endpoints of optimal
    // trajectories for f when d is f's optimal depth)
    let opt_end = |f: FeatureId, d: u32| -> Vec<usize> {
        oracle.layers[d as usize]
            .iter()
            .enumerate()
            .filter(|(_, s)| s.features.contains(f))
            .map(|(i, _)| i)
            .collect()
    };

    let mut reachable: Vec<FeatureId> = by_depth.get(&0).cloned().unwrap_or_default();
    for d in 0..goal_depth {
        let candidates = match by_depth.get(&(d + 1)) {
            Some(c) => c,
            None => return false,
        };
        let next_layer = &oracle.layers[(d + 1) as usize];
        let mut next_reachable = Vec::new();
        for &f_next in candidates {
            if d + 1 == goal_depth && f_next != goal {
                continue; // only the goal itself may close the chain
            }
            let chain_edge = reachable.iter().any(|&f| {
                let ends = opt_end(f, d);
                !ends.is_empty()
                    && ends.iter().all(|&si| {
                        let s = &oracle.layers[d as usize][si];
                        s.successors
                            .iter()
                            .any(|&ti| next_layer[ti].features.contains(f_next))
                    })
            });
            if chain_edge {
                next_reachable.push(f_next);
            }
        }
        if next_reachable.is_empty() {
            return false;
        }
        reachable = next_reachable;
    }
    reachable.contains(&goal)
}
