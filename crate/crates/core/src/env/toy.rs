//! Bundled toy pixel environments.
//!
//! One deterministic grid-world engine driven by a small declarative
//! config, so tests can construct variants without code changes. Screens
//! are tiny (a few dozen pixels, at most a handful of colors) and tiled
//! per pixel, which keeps feature spaces small enough for brute-force
//! oracles.

use super::contract::{Action, SimError, Simulator, StateHandle, StepOutcome};
use crate::bprost::{FeatureLayout, Screen, TilingConfig};
use crate::features::FeatureId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ToyEnvError {
    #[error("cell {0:?} outside the {1}x{2} grid")]
    CellOutOfBounds((u32, u32), u32, u32),
    #[error("start cell {0:?} must be empty")]
    StartNotEmpty((u32, u32)),
    #[error("palette of {palette} too small for color {color}")]
    PaletteTooSmall { palette: u16, color: u8 },
    #[error("latch must be at least 1")]
    ZeroLatch,
    #[error("grid must be at least 1x1")]
    EmptyGrid,
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Movement rule selecting the action set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// Two actions: 0 moves left, 1 moves right.
    Chain,
    /// Four actions: 0 up, 1 down, 2 left, 3 right.
    Grid,
    /// Two actions, neither moves; the screen never changes.
    Frozen,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ItemCell {
    pub pos: (u32, u32),
    pub reward: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GoalCell {
    pub pos: (u32, u32),
    pub reward: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HazardCell {
    pub pos: (u32, u32),
    /// Reward granted on entering the lethal cell (loot).
    #[serde(default)]
    pub reward: f64,
}

fn default_palette() -> u16 {
    4
}
fn one() -> u32 {
    1
}
fn three() -> u8 {
    3
}
fn yes() -> bool {
    true
}
fn color_agent() -> u8 {
    1
}
fn color_item() -> u8 {
    2
}
fn color_marker() -> u8 {
    3
}
fn color_hazard() -> u8 {
    3
}
fn color_goal() -> u8 {
    2
}

/// Declarative toy-environment definition, loadable from TOML.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyEnvConfig {
    pub name: String,
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_palette")]
    pub palette_size: u16,
    pub dynamics: Dynamics,
    #[serde(default)]
    pub start: (u32, u32),
    /// Movement applies only on every latch-th frame; 1 means every
    /// frame. Larger values make actions take effect with a delay.
    #[serde(default = "one")]
    pub latch: u32,
    #[serde(default)]
    pub items: Vec<ItemCell>,
    #[serde(default)]
    pub goals: Vec<GoalCell>,
    #[serde(default)]
    pub hazards: Vec<HazardCell>,
    /// Whether entering a hazard ends the episode; when false the agent
    /// respawns at the start cell with `death` reported for the step.
    #[serde(default = "yes")]
    pub death_ends_episode: bool,
    /// Whether collecting the last item ends the episode.
    #[serde(default = "yes")]
    pub terminal_when_items_cleared: bool,
    /// Reward granted on every emulation frame regardless of movement;
    /// lets tests emit rewards without any screen change.
    #[serde(default)]
    pub frame_reward: f64,
    /// Decorative sprites drawn below the first row at positions and
    /// colors hashed from the action history. They make every screen
    /// along a trajectory distinct, which gives breadth-first searches
    /// a realistically large novelty frontier. Requires height >= 2.
    #[serde(default)]
    pub noise_pixels: u32,
    /// Number of palette colors (taken from the top of the palette)
    /// the noise sprites may use.
    #[serde(default = "three")]
    pub noise_colors: u8,
    #[serde(default = "color_agent")]
    pub agent_color: u8,
    #[serde(default = "color_item")]
    pub item_color: u8,
    /// Collected item cells are repainted with this color, so "item i
    /// was collected" is visible as a persistent screen feature.
    #[serde(default = "color_marker")]
    pub marker_color: u8,
    #[serde(default = "color_hazard")]
    pub hazard_color: u8,
    #[serde(default = "color_goal")]
    pub goal_color: u8,
}

impl ToyEnvConfig {
    pub fn from_toml(text: &str) -> Result<Self, ToyEnvError> {
        Ok(toml::from_str(text)?)
    }

    /// A 1×(len+1) corridor; the agent starts at cell 0 and a terminal
    /// reward of 1 sits at the far end, `len` moves away. The canonical
    /// width-1 goal.
    pub fn pixel_chain(len: u32) -> Self {
        Self {
            name: format!("chain:{len}"),
            width: len + 1,
            height: 1,
            palette_size: 3,
            dynamics: Dynamics::Chain,
            start: (0, 0),
            latch: 1,
            items: vec![],
            goals: vec![GoalCell {
                pos: (len, 0),
                reward: 1.0,
            }],
            hazards: vec![],
            death_ends_episode: true,
            terminal_when_items_cleared: true,
            frame_reward: 0.0,
            noise_pixels: 0,
            noise_colors: 3,
            agent_color: 1,
            item_color: 2,
            marker_color: 2,
            hazard_color: 2,
            goal_color: 2,
        }
    }

    /// A chain whose sprite only moves on every latch-th frame, so short
    /// action applications may change nothing on screen.
    pub fn latched_chain(len: u32, latch: u32) -> Self {
        let mut cfg = Self::pixel_chain(len);
        cfg.name = format!("latched-chain:{len}:{latch}");
        cfg.latch = latch;
        cfg
    }

    /// A corridor over a noise backdrop: the top row is the plain
    /// chain, the bottom row shows hash-driven decorative sprites that
    /// change with every frame of every trajectory.
    pub fn noisy_chain(len: u32, noise_pixels: u32) -> Self {
        let mut cfg = Self::pixel_chain(len);
        cfg.name = format!("noisy-chain:{len}:{noise_pixels}");
        cfg.height = 2;
        cfg.palette_size = 6;
        cfg.noise_pixels = noise_pixels;
        cfg.noise_colors = 3;
        cfg
    }

    /// A w×h grid with consumable reward items. Collected cells are
    /// repainted with the marker color; the episode ends when all items
    /// are gone.
    pub fn collector_grid(width: u32, height: u32, items: &[((u32, u32), f64)]) -> Self {
        Self {
            name: format!("collector:{width}x{height}"),
            width,
            height,
            palette_size: 4,
            dynamics: Dynamics::Grid,
            start: (0, 0),
            latch: 1,
            items: items
                .iter()
                .map(|&(pos, reward)| ItemCell { pos, reward })
                .collect(),
            goals: vec![],
            hazards: vec![],
            death_ends_episode: true,
            terminal_when_items_cleared: true,
            frame_reward: 0.0,
            noise_pixels: 0,
            noise_colors: 3,
            agent_color: 1,
            item_color: 2,
            marker_color: 3,
            hazard_color: 3,
            goal_color: 2,
        }
    }

    /// A corridor with a small consumable reward one cell before a
    /// lethal loot cell at the far end: stepping onto the loot pays but
    /// kills. Exercises risk aversion.
    pub fn hazard_corridor(len: u32) -> Self {
        Self {
            name: format!("hazard:{len}"),
            width: len + 1,
            height: 1,
            palette_size: 4,
            dynamics: Dynamics::Chain,
            start: (0, 0),
            latch: 1,
            items: vec![ItemCell {
                pos: (len - 1, 0),
                reward: 0.5,
            }],
            goals: vec![],
            hazards: vec![HazardCell {
                pos: (len, 0),
                reward: 2.0,
            }],
            death_ends_episode: true,
            terminal_when_items_cleared: false,
            frame_reward: 0.0,
            noise_pixels: 0,
            noise_colors: 3,
            agent_color: 1,
            item_color: 2,
            marker_color: 2,
            hazard_color: 3,
            goal_color: 2,
        }
    }

    /// A screen that never changes: two actions, neither moves anything.
    pub fn frozen() -> Self {
        Self {
            name: "frozen".to_string(),
            width: 2,
            height: 1,
            palette_size: 2,
            dynamics: Dynamics::Frozen,
            start: (0, 0),
            latch: 1,
            items: vec![],
            goals: vec![],
            hazards: vec![],
            death_ends_episode: true,
            terminal_when_items_cleared: true,
            frame_reward: 0.0,
            noise_pixels: 0,
            noise_colors: 3,
            agent_color: 1,
            item_color: 1,
            marker_color: 1,
            hazard_color: 1,
            goal_color: 1,
        }
    }
}

const NOISE_SEED: u64 = 0x243F_6A88_85A3_08D3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic toy grid-world simulator.
#[derive(Clone, Debug)]
pub struct ToyEnv {
    cfg: ToyEnvConfig,
    agent: (u32, u32),
    collected: Vec<bool>,
    frame_mod: u32,
    noise_mix: u64,
    terminal: bool,
    calls: u64,
}

impl ToyEnv {
    pub fn new(cfg: ToyEnvConfig) -> Result<Self, ToyEnvError> {
        if cfg.width == 0 || cfg.height == 0 {
            return Err(ToyEnvError::EmptyGrid);
        }
        if cfg.latch == 0 {
            return Err(ToyEnvError::ZeroLatch);
        }
        let in_bounds = |pos: (u32, u32)| pos.0 < cfg.width && pos.1 < cfg.height;
        for pos in cfg
            .items
            .iter()
            .map(|i| i.pos)
            .chain(cfg.goals.iter().map(|g| g.pos))
            .chain(cfg.hazards.iter().map(|h| h.pos))
            .chain([cfg.start])
        {
            if !in_bounds(pos) {
                return Err(ToyEnvError::CellOutOfBounds(pos, cfg.width, cfg.height));
            }
        }
        let occupied = cfg
            .items
            .iter()
            .map(|i| i.pos)
            .chain(cfg.goals.iter().map(|g| g.pos))
            .chain(cfg.hazards.iter().map(|h| h.pos));
        for pos in occupied {
            if pos == cfg.start {
                return Err(ToyEnvError::StartNotEmpty(pos));
            }
        }
        for color in [
            cfg.agent_color,
            cfg.item_color,
            cfg.marker_color,
            cfg.hazard_color,
            cfg.goal_color,
        ] {
            if color as u16 >= cfg.palette_size {
                return Err(ToyEnvError::PaletteTooSmall {
                    palette: cfg.palette_size,
                    color,
                });
            }
        }
        if cfg.noise_pixels > 0 && (cfg.height < 2 || cfg.noise_colors == 0) {
            return Err(ToyEnvError::EmptyGrid);
        }
        if cfg.noise_pixels > 0 {
            let base = cfg.palette_size as i32 - cfg.noise_colors as i32;
            if base < 1 {
                return Err(ToyEnvError::PaletteTooSmall {
                    palette: cfg.palette_size,
                    color: cfg.noise_colors,
                });
            }
        }
        let collected = vec![false; cfg.items.len()];
        Ok(Self {
            agent: cfg.start,
            collected,
            frame_mod: 0,
            noise_mix: NOISE_SEED,
            terminal: false,
            calls: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &ToyEnvConfig {
        &self.cfg
    }

    /// Per-pixel tiling for the toy screen.
    pub fn tiling(&self) -> TilingConfig {
        TilingConfig::per_pixel(self.cfg.width, self.cfg.height)
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::new(self.tiling(), self.cfg.palette_size)
    }

    /// Atomic goal features for subgoaling planners: one persistent
    /// marker feature per item (the repainted cell) plus the agent
    /// sitting on each goal cell.
    pub fn goal_features(&self, layout: &FeatureLayout) -> Vec<FeatureId> {
        let mut out: Vec<FeatureId> = self
            .cfg
            .items
            .iter()
            .map(|i| layout.encode_basic(i.pos.0, i.pos.1, self.cfg.marker_color))
            .collect();
        out.extend(
            self.cfg
                .goals
                .iter()
                .map(|g| layout.encode_basic(g.pos.0, g.pos.1, self.cfg.agent_color)),
        );
        out
    }

    fn render(&self) -> Screen {
        let cfg = &self.cfg;
        let mut pixels = vec![0u8; (cfg.width * cfg.height) as usize];
        let mut paint = |pos: (u32, u32), color: u8| {
            pixels[(pos.1 * cfg.width + pos.0) as usize] = color;
        };
        if cfg.noise_pixels > 0 {
            let area = (cfg.width * (cfg.height - 1)) as u64;
            let base = (cfg.palette_size - cfg.noise_colors as u16) as u8;
            for i in 0..cfg.noise_pixels as u64 {
                let h = splitmix64(self.noise_mix ^ i.wrapping_mul(0xD1B5_4A32_D192_ED03));
                let cell = h % area;
                let x = (cell % cfg.width as u64) as u32;
                let y = 1 + (cell / cfg.width as u64) as u32;
                let color = base + ((h >> 32) % cfg.noise_colors as u64) as u8;
                paint((x, y), color);
            }
        }
        for goal in &cfg.goals {
            paint(goal.pos, cfg.goal_color);
        }
        for hazard in &cfg.hazards {
            paint(hazard.pos, cfg.hazard_color);
        }
        for (item, &done) in cfg.items.iter().zip(&self.collected) {
            paint(item.pos, if done { cfg.marker_color } else { cfg.item_color });
        }
        paint(self.agent, cfg.agent_color);
        Screen::new(cfg.width, cfg.height, cfg.palette_size, pixels)
            .expect("toy screens are valid by construction")
    }

    fn move_target(&self, action: Action) -> Option<(u32, u32)> {
        let (x, y) = (self.agent.0 as i64, self.agent.1 as i64);
        let (dx, dy): (i64, i64) = match self.cfg.dynamics {
            Dynamics::Frozen => return None,
            Dynamics::Chain => match action.0 {
                0 => (-1, 0),
                _ => (1, 0),
            },
            Dynamics::Grid => match action.0 {
                0 => (0, -1),
                1 => (0, 1),
                2 => (-1, 0),
                _ => (1, 0),
            },
        };
        let (nx, ny) = (x + dx, y + dy);
        if nx < 0 || ny < 0 || nx >= self.cfg.width as i64 || ny >= self.cfg.height as i64 {
            return None; // blocked at the wall
        }
        Some((nx as u32, ny as u32))
    }

    /// Effects of the agent entering a cell; returns the frame reward.
    fn enter_cell(&mut self, pos: (u32, u32), death: &mut bool) -> f64 {
        let mut reward = 0.0;
        self.agent = pos;
        for i in 0..self.cfg.items.len() {
            if self.cfg.items[i].pos == pos && !self.collected[i] {
                self.collected[i] = true;
                reward += self.cfg.items[i].reward;
                let cleared = self.collected.iter().all(|&c| c);
                if cleared && self.cfg.terminal_when_items_cleared && !self.cfg.items.is_empty() {
                    self.terminal = true;
                }
            }
        }
        for g in &self.cfg.goals {
            if g.pos == pos {
                reward += g.reward;
                self.terminal = true;
            }
        }
        let hazard_hit = self.cfg.hazards.iter().find(|h| h.pos == pos).cloned();
        if let Some(h) = hazard_hit {
            reward += h.reward;
            *death = true;
            if self.cfg.death_ends_episode {
                self.terminal = true;
            } else {
                self.agent = self.cfg.start;
            }
        }
        reward
    }
}

impl Simulator for ToyEnv {
    fn reset(&mut self) -> Screen {
        self.agent = self.cfg.start;
        self.collected = vec![false; self.cfg.items.len()];
        self.frame_mod = 0;
        self.noise_mix = NOISE_SEED;
        self.terminal = false;
        self.render()
    }

    fn apply(&mut self, action: Action, frames: u32) -> Result<StepOutcome, SimError> {
        if self.terminal {
            return Err(SimError::TerminalStep);
        }
        if frames == 0 {
            return Err(SimError::ZeroFrames);
        }
        if action.0 >= self.action_count() {
            return Err(SimError::BadAction {
                action: action.0,
                count: self.action_count(),
            });
        }
        self.calls += 1;
        let mut reward = 0.0;
        let mut death = false;
        let mut consumed = 0;
        for _ in 0..frames {
            self.frame_mod = (self.frame_mod + 1) % self.cfg.latch;
            consumed += 1;
            reward += self.cfg.frame_reward;
            if self.cfg.noise_pixels > 0 {
                self.noise_mix = splitmix64(self.noise_mix ^ (action.0 as u64 + 1));
            }
            if self.frame_mod == 0 {
                if let Some(target) = self.move_target(action) {
                    if target != self.agent {
                        reward += self.enter_cell(target, &mut death);
                    }
                }
            }
            if self.terminal {
                break;
            }
        }
        Ok(StepOutcome {
            reward,
            terminal: self.terminal,
            death,
            frames_consumed: consumed,
        })
    }

    fn screen(&self) -> Screen {
        self.render()
    }

    fn save(&self) -> StateHandle {
        let mut bytes = Vec::with_capacity(24 + self.collected.len());
        bytes.extend_from_slice(&self.agent.0.to_le_bytes());
        bytes.extend_from_slice(&self.agent.1.to_le_bytes());
        bytes.extend_from_slice(&self.frame_mod.to_le_bytes());
        bytes.extend_from_slice(&self.noise_mix.to_le_bytes());
        bytes.push(self.terminal as u8);
        bytes.extend(self.collected.iter().map(|&c| c as u8));
        StateHandle(bytes)
    }

    fn restore(&mut self, handle: &StateHandle) -> Result<(), SimError> {
        let bytes = &handle.0;
        if bytes.len() != 21 + self.collected.len() {
            return Err(SimError::BadHandle);
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        self.agent = (word(0), word(4));
        self.frame_mod = word(8);
        self.noise_mix = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        self.terminal = bytes[20] != 0;
        for (i, c) in self.collected.iter_mut().enumerate() {
            *c = bytes[21 + i] != 0;
        }
        Ok(())
    }

    fn action_count(&self) -> u32 {
        match self.cfg.dynamics {
            Dynamics::Chain | Dynamics::Frozen => 2,
            Dynamics::Grid => 4,
        }
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}
