//! Dynamic background-pixel identification.
//!
//! A pixel is background while it has kept the color first observed for
//! it; once seen to vary it never becomes background again. Background
//! pixels are skipped during extraction.

use super::screen::{Screen, ScreenError};
use crate::env::{Action, SimError, Simulator};
use rand::Rng;

#[derive(Clone, Debug)]
pub struct BackgroundMap {
    width: u32,
    height: u32,
    stored: Vec<u8>,
    background: Vec<bool>,
}

impl BackgroundMap {
    /// Every pixel starts as background, with the screen's colors as the
    /// stored reference values.
    pub fn from_screen(screen: &Screen) -> Self {
        Self {
            width: screen.width(),
            height: screen.height(),
            stored: screen.pixels().to_vec(),
            background: vec![true; screen.pixels().len()],
        }
    }

    /// A map that treats no pixel as background (every pixel takes part
    /// in feature extraction).
    pub fn none(width: u32, height: u32) -> Self {
        let n = (width * height) as usize;
        Self {
            width,
            height,
            stored: vec![0; n],
            background: vec![false; n],
        }
    }

    pub fn is_background(&self, pixel_index: usize) -> bool {
        self.background[pixel_index]
    }

    pub fn background_count(&self) -> usize {
        self.background.iter().filter(|&&b| b).count()
    }

    pub fn check_screen(&self, screen: &Screen) -> Result<(), ScreenError> {
        if screen.width() != self.width || screen.height() != self.height {
            return Err(ScreenError::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                actual_w: screen.width(),
                actual_h: screen.height(),
            });
        }
        Ok(())
    }

    /// Compares the screen against the stored colors: any pixel that
    /// differs stops being background, permanently. The stored color is
    /// never overwritten. Returns how many pixels changed status.
    pub fn update(&mut self, screen: &Screen) -> Result<usize, ScreenError> {
        self.check_screen(screen)?;
        let mut changed = 0;
        for (i, &c) in screen.pixels().iter().enumerate() {
            if self.background[i] && c != self.stored[i] {
                self.background[i] = false;
                changed += 1;
            }
        }
        Ok(changed)
    }
}

/// Identifies a first background set by performing `n_actions` random
/// actions (each applied for `frames_per_action` frames) and keeping the
/// pixels that never changed color. The simulator is restored to its
/// starting state afterwards; if an action terminates the episode the
/// simulator is restored mid-calibration and sampling continues.
pub fn calibrate_background<S: Simulator>(
    sim: &mut S,
    n_actions: u32,
    frames_per_action: u32,
    rng: &mut impl Rng,
) -> Result<BackgroundMap, SimError> {
    let start = sim.save();
    let mut map = BackgroundMap::from_screen(&sim.screen());
    for _ in 0..n_actions {
        let action = Action(rng.random_range(0..sim.action_count()));
        let outcome = match sim.apply(action, frames_per_action) {
            Ok(out) => out,
            Err(e) => {
                let _ = sim.restore(&start);
                return Err(e);
            }
        };
        map.update(&sim.screen())
            .expect("simulator screens keep their dimensions");
        if outcome.terminal {
            sim.restore(&start)?;
        }
    }
    sim.restore(&start)?;
    Ok(map)
}
