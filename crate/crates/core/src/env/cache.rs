//! Lookahead-tree state caching over an inner simulator.
//!
//! Screen states can only be produced by running the simulator from the
//! decision root, so replaying a path of length n may cost up to n
//! calls. The caching wrapper records (action path → state handle,
//! screen, outcome) within one lookahead tree and replays cached paths
//! with zero inner calls, while staying observationally transparent:
//! identical queries return identical outcomes whether cached or not.

use super::contract::{Action, SimError, Simulator, StateHandle, StepOutcome};
use crate::bprost::Screen;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
struct CacheNode {
    handle: StateHandle,
    screen: Screen,
    /// Outcome of the edge leading into this node; zeroed at the root.
    outcome: StepOutcome,
    children: BTreeMap<u32, CacheNode>,
}

pub struct CachingSimulator<S: Simulator> {
    inner: S,
    root: CacheNode,
    hits: u64,
    misses: u64,
}

impl<S: Simulator> CachingSimulator<S> {
    /// Wraps a simulator positioned at the decision root.
    pub fn new(inner: S) -> Self {
        let root = CacheNode {
            handle: inner.save(),
            screen: inner.screen(),
            outcome: StepOutcome::zero(),
            children: BTreeMap::new(),
        };
        Self {
            inner,
            root,
            hits: 0,
            misses: 0,
        }
    }

    pub fn root_screen(&self) -> &Screen {
        &self.root.screen
    }

    pub fn action_count(&self) -> u32 {
        self.inner.action_count()
    }

    pub fn inner_calls(&self) -> u64 {
        self.inner.calls()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    /// Whether `path` is fully cached (replaying it costs no inner
    /// calls).
    pub fn is_cached(&self, path: &[Action]) -> bool {
        let mut node = &self.root;
        for action in path {
            match node.children.get(&action.0) {
                Some(child) => node = child,
                None => return false,
            }
        }
        true
    }

    /// Materializes the state at `path` (relative to the decision root).
    /// A fully cached path replays with zero inner calls; otherwise the
    /// longest cached prefix is restored and only the suffix is applied,
    /// recording every state generated along the way. Returns the final
    /// edge's outcome, the final screen, and whether the query was a
    /// pure replay.
    pub fn apply_path(
        &mut self,
        path: &[Action],
        frames: u32,
    ) -> Result<(StepOutcome, Screen, bool), SimError> {
        let mut cached_len = 0;
        let mut node = &self.root;
        for action in path {
            match node.children.get(&action.0) {
                Some(child) => {
                    node = child;
                    cached_len += 1;
                }
                None => break,
            }
        }
        if cached_len == path.len() {
            self.hits += 1;
            return Ok((node.outcome, node.screen.clone(), true));
        }
        self.misses += 1;
        self.inner.restore(&node.handle)?;
        // re-walk mutably to the insertion point
        let mut node = &mut self.root;
        for action in &path[..cached_len] {
            node = node.children.get_mut(&action.0).expect("prefix cached");
        }
        for action in &path[cached_len..] {
            let outcome = self.inner.apply(*action, frames)?;
            let fresh = CacheNode {
                handle: self.inner.save(),
                screen: self.inner.screen(),
                outcome,
                children: BTreeMap::new(),
            };
            node = node.children.entry(action.0).or_insert(fresh);
        }
        Ok((node.outcome, node.screen.clone(), false))
    }

    /// Applies the last action of `path` once more from the tip state
    /// and merges the result into the tip's record (rewards summed,
    /// frames summed, terminal/death OR-ed). Used by the no-change
    /// extension rule; later replays of the path return the merged
    /// record.
    pub fn extend_tip(
        &mut self,
        path: &[Action],
        frames: u32,
    ) -> Result<(StepOutcome, Screen), SimError> {
        let action = *path.last().expect("extend_tip needs a non-empty path");
        let mut node = &mut self.root;
        for a in path {
            node = node
                .children
                .get_mut(&a.0)
                .expect("extend_tip path must be cached");
        }
        self.inner.restore(&node.handle)?;
        let more = self.inner.apply(action, frames)?;
        node.outcome = StepOutcome {
            reward: node.outcome.reward + more.reward,
            terminal: node.outcome.terminal || more.terminal,
            death: node.outcome.death || more.death,
            frames_consumed: node.outcome.frames_consumed + more.frames_consumed,
        };
        node.handle = self.inner.save();
        node.screen = self.inner.screen();
        node.children.clear();
        Ok((node.outcome, node.screen.clone()))
    }

    /// Re-roots the cache at the executed child: its record becomes the
    /// root, path prefixes shorten by one, sibling subtrees are dropped
    /// and the hit/miss counters reset. If the child was never
    /// generated, the cache restarts from the inner simulator's current
    /// state (which the caller must have advanced).
    pub fn advance_root(&mut self, executed: Action) {
        self.hits = 0;
        self.misses = 0;
        match self.root.children.remove(&executed.0) {
            Some(mut child) => {
                child.outcome = StepOutcome::zero();
                self.root = child;
            }
            None => {
                self.root = CacheNode {
                    handle: self.inner.save(),
                    screen: self.inner.screen(),
                    outcome: StepOutcome::zero(),
                    children: BTreeMap::new(),
                };
            }
        }
    }

    /// Drops every record below the root. Used between decisions when
    /// cross-decision caching is disabled.
    pub fn clear_subtree(&mut self) {
        self.root.children.clear();
    }

    /// Restores the inner simulator to the decision-root state.
    pub fn restore_root(&mut self) -> Result<(), SimError> {
        self.inner.restore(&self.root.handle)
    }
}
