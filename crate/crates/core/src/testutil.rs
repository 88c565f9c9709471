//! Shared helpers for the in-crate test suites.

use crate::bprost::{extract_basic, extract_bprost, BackgroundMap, FeatureLayout, Screen};
use crate::control::{EpisodeConfig, PlannerKind, ScreenFiller};
use crate::env::{
    Action, Budget, FilledNode, NodeFiller, SimError, Simulator, StateHandle, ToyEnv, ToyEnvConfig,
};
use crate::features::{FeatureId, FeatureSet};
use crate::planners::{plain_bfs_oracle, Oracle, OracleOptions};
use std::collections::HashMap;

/// Episode config tuned for desk-scale tests: frameskip 1, no
/// calibration (tests pass explicit background maps), unlimited budget.
pub fn test_episode(planner: PlannerKind) -> EpisodeConfig {
    EpisodeConfig {
        planner,
        frameskip: 1,
        budget: Budget::Unlimited,
        max_frames: 1_000,
        caching: false,
        calibration_actions: 0,
        ..EpisodeConfig::default()
    }
}

pub fn rollout_planner() -> PlannerKind {
    PlannerKind::RolloutIw {
        width: 1,
        risk_averse: false,
        subscoring: false,
    }
}

/// Filler over a fresh toy env with no background removal and no
/// previous screen.
pub fn toy_filler(env_cfg: &ToyEnvConfig, episode: EpisodeConfig) -> ScreenFiller<ToyEnv> {
    let mut env = ToyEnv::new(env_cfg.clone()).expect("valid toy config");
    env.reset();
    let layout = env.layout();
    let bg = BackgroundMap::none(env_cfg.width, env_cfg.height);
    ScreenFiller::new(env, layout, bg, None, episode)
}

/// Filler whose previous screen equals the root screen, as at a decision
/// point where the last step changed nothing.
pub fn toy_filler_with_self_prev(
    env_cfg: &ToyEnvConfig,
    episode: EpisodeConfig,
) -> ScreenFiller<ToyEnv> {
    let mut env = ToyEnv::new(env_cfg.clone()).expect("valid toy config");
    let screen = env.reset();
    let layout = env.layout();
    let bg = BackgroundMap::none(env_cfg.width, env_cfg.height);
    ScreenFiller::new(env, layout, bg, Some(screen), episode)
}

/// Exhaustive oracle over a toy env with the full B-PROST extractor (no
/// background removal), matching what [`toy_filler`] feeds the planners.
pub fn toy_oracle(env_cfg: &ToyEnvConfig, depth_cap: u32) -> (Oracle, FeatureLayout) {
    let mut env = ToyEnv::new(env_cfg.clone()).expect("valid toy config");
    env.reset();
    let layout = env.layout();
    let bg = BackgroundMap::none(env_cfg.width, env_cfg.height);
    let extract_layout = env.layout();
    let mut extract = move |prev: Option<&Screen>, cur: &Screen| {
        extract_bprost(prev, cur, &bg, &extract_layout)
            .expect("toy screens match the layout")
            .features
    };
    let oracle = plain_bfs_oracle(
        &mut env,
        None,
        &mut extract,
        &OracleOptions {
            depth_cap,
            state_cap: 500_000,
            frames_per_step: 1,
        },
    )
    .expect("oracle enumeration succeeds");
    (oracle, layout)
}

/// Markovian filler over a toy env: basic-family features only, one
/// frame per step, no shaping, no extension. Used where state and
/// feature set must be in bijection.
pub struct MarkovFiller {
    env: ToyEnv,
    layout: FeatureLayout,
    bg: BackgroundMap,
    handles: HashMap<Vec<u32>, StateHandle>,
}

impl MarkovFiller {
    pub fn new(env_cfg: &ToyEnvConfig) -> Self {
        let mut env = ToyEnv::new(env_cfg.clone()).expect("valid toy config");
        env.reset();
        let layout = env.layout();
        let bg = BackgroundMap::none(env_cfg.width, env_cfg.height);
        let mut handles = HashMap::new();
        handles.insert(Vec::new(), env.save());
        Self {
            env,
            layout,
            bg,
            handles,
        }
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    fn basic_features(&self, screen: &Screen) -> FeatureSet {
        extract_basic(screen, &self.bg, &self.layout.tiling()).expect("dims match")
    }
}

impl NodeFiller for MarkovFiller {
    fn fill_root(&mut self) -> Result<FilledNode, SimError> {
        let root = self.handles[&Vec::new()].clone();
        self.env.restore(&root)?;
        let screen = self.env.screen();
        Ok(FilledNode {
            features: self.basic_features(&screen),
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
        _parent: &FilledNode,
    ) -> Result<FilledNode, SimError> {
        let parent_key: Vec<u32> = parent_path.iter().map(|a| a.0).collect();
        let handle = self.handles[&parent_key].clone();
        self.env.restore(&handle)?;
        let outcome = self.env.apply(action, 1)?;
        let mut key = parent_key;
        key.push(action.0);
        self.handles.insert(key, self.env.save());
        let screen = self.env.screen();
        Ok(FilledNode {
            features: self.basic_features(&screen),
            screen,
            raw_reward: outcome.reward,
            shaped_reward: outcome.reward,
            terminal: outcome.terminal,
            death: outcome.death,
            frames_consumed: outcome.frames_consumed,
            replayed: false,
        })
    }

    fn action_count(&self) -> u32 {
        self.env.action_count()
    }

    fn inner_calls(&self) -> u64 {
        self.env.calls()
    }

    fn budget_exhausted(&self) -> bool {
        false
    }
}

type PathFeatures = Box<dyn Fn(&[u32]) -> Vec<u64>>;

/// Filler over an explicit path → feature-set map, for tests that pin
/// exact rollout case sequences. Paths not in the map take the value of
/// their longest mapped prefix.
pub struct ScriptedFiller {
    pub capacity: u64,
    pub actions: u32,
    features_of: PathFeatures,
    calls: u64,
}

impl ScriptedFiller {
    pub fn new(
        capacity: u64,
        actions: u32,
        features_of: impl Fn(&[u32]) -> Vec<u64> + 'static,
    ) -> Self {
        Self {
            capacity,
            actions,
            features_of: Box::new(features_of),
            calls: 0,
        }
    }

    fn node(&self, path: &[u32]) -> FilledNode {
        let ids = (self.features_of)(path);
        FilledNode {
            features: FeatureSet::new(self.capacity, ids.into_iter().map(FeatureId))
                .expect("scripted ids in range"),
            screen: Screen::filled(1, 1, 2, 0),
            raw_reward: 0.0,
            shaped_reward: 0.0,
            terminal: false,
            death: false,
            frames_consumed: 1,
            replayed: false,
        }
    }
}

impl NodeFiller for ScriptedFiller {
    fn fill_root(&mut self) -> Result<FilledNode, SimError> {
        Ok(self.node(&[]))
    }

    fn fill_child(
        &mut self,
        parent_path: &[Action],
        action: Action,
        _parent: &FilledNode,
    ) -> Result<FilledNode, SimError> {
        self.calls += 1;
        let mut path: Vec<u32> = parent_path.iter().map(|a| a.0).collect();
        path.push(action.0);
        Ok(self.node(&path))
    }

    fn action_count(&self) -> u32 {
        self.actions
    }

    fn inner_calls(&self) -> u64 {
        self.calls
    }

    fn budget_exhausted(&self) -> bool {
        false
    }
}
