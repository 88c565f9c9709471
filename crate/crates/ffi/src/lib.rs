//! C ABI for the width-based planning toolkit: opaque environment
//! handles, plain-struct configs and results, and status codes. The
//! header `include/pixelplan.h` is generated from this file.
//!
//! Conventions: every fallible call returns a [`PpStatus`]; on failure a
//! thread-local message is readable via [`pp_last_error`] until the next
//! failing call on the same thread. Pointers returned through out
//! parameters are owned by the caller and released with the matching
//! `_free` function.

use libc::c_char;
use pixelplan::bprost::{FeatureLayout, TilingConfig};
use pixelplan::control::{run_batch, EpisodeConfig, PlannerKind};
use pixelplan::env::{Budget, Simulator, ToyEnv, ToyEnvConfig};
use pixelplan::planners::{logscore, GoalSet};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Call outcome.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    RuntimeError = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: impl AsRef<str>) {
    let text = message.as_ref().replace('\0', "?");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
}

fn fail(status: PpStatus, message: impl AsRef<str>) -> PpStatus {
    set_error(message);
    status
}

/// Message describing the most recent failure on this thread. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque toy-environment handle.
pub struct PpEnv {
    env: ToyEnv,
    cfg: ToyEnvConfig,
}

/// Per-family feature counts of a tiling/palette combination.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct PpLayoutSizes {
    pub basic: u64,
    pub bpros: u64,
    pub bprot: u64,
    pub total: u64,
}

/// Episode/batch configuration. `planner` is a name such as `iw1`,
/// `iwg`, `iws`, `rollout-iw`, `ra-rollout-iw` or `ras-rollout-iw`.
/// Exactly one of `budget_calls` / `budget_seconds` must be nonzero.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct PpRunConfig {
    pub planner: *const c_char,
    pub budget_calls: u64,
    pub budget_seconds: f64,
    pub frameskip: u32,
    pub gamma: f64,
    pub alpha: f64,
    pub seed: u64,
    pub max_frames: u64,
    pub caching: bool,
    pub runs: u32,
}

/// Aggregate result of a batch of episodes.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct PpEpisodeResult {
    pub mean_score: f64,
    pub first_score: f64,
    pub runs: u32,
    pub total_frames: u64,
    pub total_decisions: u64,
    pub total_sim_calls: u64,
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, PpStatus> {
    if ptr.is_null() {
        return Err(fail(PpStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(PpStatus::InvalidArgument, "string argument is not UTF-8"))
}

fn guard(body: impl FnOnce() -> PpStatus) -> PpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(PpStatus::RuntimeError, "internal panic"),
    }
}

/// Creates a toy environment from a spec string: `chain:L`,
/// `latched-chain:L:LATCH`, `collector:WxH`, `hazard:L`, `frozen`, or a
/// full TOML environment definition prefixed with `toml:`.
///
/// # Safety
/// `spec` must be a valid NUL-terminated string and `out` a valid
/// pointer; the returned handle must be released with [`pp_env_free`].
#[no_mangle]
pub unsafe extern "C" fn pp_env_new(spec: *const c_char, out: *mut *mut PpEnv) -> PpStatus {
    guard(|| {
        if out.is_null() {
            return fail(PpStatus::NullPointer, "null out pointer");
        }
        let spec = match cstr_arg(spec) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let parsed = if let Some(toml_text) = spec.strip_prefix("toml:") {
            ToyEnvConfig::from_toml(toml_text).map_err(|e| e.to_string())
        } else {
            pixelplan::cli::parse_env_spec(spec).map_err(|e| format!("{e:#}"))
        };
        let cfg = match parsed {
            Ok(cfg) => cfg,
            Err(e) => return fail(PpStatus::InvalidArgument, e),
        };
        let mut env = match ToyEnv::new(cfg.clone()) {
            Ok(env) => env,
            Err(e) => return fail(PpStatus::InvalidArgument, e.to_string()),
        };
        env.reset();
        *out = Box::into_raw(Box::new(PpEnv { env, cfg }));
        PpStatus::Ok
    })
}

/// Releases an environment handle. A null handle is a no-op.
///
/// # Safety
/// `env` must have come from [`pp_env_new`] and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn pp_env_free(env: *mut PpEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of actions the environment accepts.
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_env_action_count(env: *const PpEnv, out: *mut u32) -> PpStatus {
    guard(|| {
        if env.is_null() || out.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        *out = (*env).env.action_count();
        PpStatus::Ok
    })
}

/// Screen dimensions and palette size of the environment.
///
/// # Safety
/// `env` must be a live handle; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pp_env_screen_dims(
    env: *const PpEnv,
    width: *mut u32,
    height: *mut u32,
    palette: *mut u16,
) -> PpStatus {
    guard(|| {
        if env.is_null() || width.is_null() || height.is_null() || palette.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        let cfg = &(*env).cfg;
        *width = cfg.width;
        *height = cfg.height;
        *palette = cfg.palette_size;
        PpStatus::Ok
    })
}

/// Feature counts for a tile grid and palette (Basic / B-PROS / B-PROT
/// family sizes and their total).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_layout_sizes(
    tile_cols: u32,
    tile_rows: u32,
    palette: u16,
    out: *mut PpLayoutSizes,
) -> PpStatus {
    guard(|| {
        if out.is_null() {
            return fail(PpStatus::NullPointer, "null out pointer");
        }
        if tile_cols == 0 || tile_rows == 0 || palette == 0 {
            return fail(
                PpStatus::InvalidArgument,
                "tile grid and palette must be nonzero",
            );
        }
        let layout = FeatureLayout::new(TilingConfig::new(tile_cols, tile_rows, 1, 1), palette);
        let sizes = layout.sizes();
        *out = PpLayoutSizes {
            basic: sizes.basic,
            bpros: sizes.bpros,
            bprot: sizes.bprot,
            total: sizes.total,
        };
        PpStatus::Ok
    })
}

/// Integer log2 bucket of an accrued score (0 for non-positive scores).
#[no_mangle]
pub extern "C" fn pp_logscore(reward: f64) -> i64 {
    logscore(reward)
}

fn episode_config(cfg: &PpRunConfig, planner: PlannerKind) -> Result<EpisodeConfig, String> {
    let budget = match (cfg.budget_calls, cfg.budget_seconds) {
        (0, s) if s > 0.0 => Budget::Seconds(s),
        (n, s) if n > 0 && s == 0.0 => Budget::Calls(n),
        _ => return Err("exactly one of budget_calls/budget_seconds must be set".to_string()),
    };
    if cfg.frameskip == 0 {
        return Err("frameskip must be at least 1".to_string());
    }
    if !(0.0 < cfg.gamma && cfg.gamma < 1.0) {
        return Err("gamma must lie in (0, 1)".to_string());
    }
    Ok(EpisodeConfig {
        planner,
        frameskip: cfg.frameskip,
        budget,
        gamma: cfg.gamma,
        alpha: cfg.alpha,
        death_penalty: -10.0 * cfg.alpha,
        max_frames: cfg.max_frames,
        caching: cfg.caching,
        seed: cfg.seed,
        ..EpisodeConfig::default()
    })
}

/// Runs a batch of episodes on the environment and fills the aggregate
/// result. The handle itself is not consumed; each run starts from a
/// fresh reset copy.
///
/// # Safety
/// `env` must be a live handle; `cfg` and `out` must be valid pointers
/// and `cfg->planner` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pp_run_batch(
    env: *mut PpEnv,
    cfg: *const PpRunConfig,
    out: *mut PpEpisodeResult,
) -> PpStatus {
    guard(|| {
        if env.is_null() || cfg.is_null() || out.is_null() {
            return fail(PpStatus::NullPointer, "null argument");
        }
        let cfg = &*cfg;
        let planner_name = match cstr_arg(cfg.planner) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let Some(planner) = PlannerKind::parse(planner_name) else {
            return fail(
                PpStatus::InvalidArgument,
                format!("unknown planner {planner_name:?}"),
            );
        };
        let runs = cfg.runs.max(1);
        let episode = match episode_config(cfg, planner) {
            Ok(e) => e,
            Err(msg) => return fail(PpStatus::InvalidArgument, msg),
        };

        let handle = &mut *env;
        let probe = ToyEnv::new(handle.cfg.clone()).expect("config validated at creation");
        let layout = probe.layout();
        let goal_features = probe.goal_features(&layout);
        let goals = if goal_features.is_empty() {
            None
        } else {
            GoalSet::new(goal_features).ok()
        };
        if matches!(episode.planner, PlannerKind::IwG) && goals.is_none() {
            return fail(
                PpStatus::InvalidArgument,
                "planner iwg needs an environment with goal cells",
            );
        }

        let batch = match run_batch(
            || {
                let mut env = ToyEnv::new(handle.cfg.clone()).expect("validated config");
                env.reset();
                env
            },
            &episode,
            goals.as_ref(),
            runs,
        ) {
            Ok(b) => b,
            Err(e) => return fail(PpStatus::RuntimeError, e.to_string()),
        };
        *out = PpEpisodeResult {
            mean_score: batch.mean_score,
            first_score: batch.scores.first().copied().unwrap_or(0.0),
            runs,
            total_frames: batch.runs.iter().map(|r| r.frames).sum(),
            total_decisions: batch.runs.iter().map(|r| r.decisions.len() as u64).sum(),
            total_sim_calls: batch
                .runs
                .iter()
                .flat_map(|r| r.decisions.iter())
                .map(|d| d.simulator_calls)
                .sum(),
        };
        PpStatus::Ok
    })
}
