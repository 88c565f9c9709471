//! Screen → feature-set extraction for the three B-PROST families.
//!
//! Extraction is pure given the screens and a background snapshot.
//! `extract_basic`, `extract_bpros` and `extract_bprot` work in
//! family-local index spaces; `extract_bprost` composes them into the
//! global layout.

use super::background::BackgroundMap;
use super::layout::{Feature, FeatureLayout};
use super::screen::{Screen, ScreenError, TilingConfig};
use crate::features::{FeatureId, FeatureSet};
use std::collections::BTreeSet;

/// Feature-set view of one decision point. B-PROT members depend on the
/// previous decision point's screen too, so the state is a function of
/// the screen pair, not of the current screen alone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScreenState {
    pub features: FeatureSet,
}

/// Basic features of a screen in the family-local index space: color `c`
/// present in tile `(row, col)` on some non-background pixel.
pub fn extract_basic(
    screen: &Screen,
    bg: &BackgroundMap,
    tiling: &TilingConfig,
) -> Result<FeatureSet, ScreenError> {
    tiling.check_screen(screen)?;
    bg.check_screen(screen)?;
    let palette = screen.palette_size() as u64;
    let cols = tiling.tile_cols as u64;
    let capacity = cols * tiling.tile_rows as u64 * palette;
    let mut present = BTreeSet::new();
    let pixels = screen.pixels();
    for y in 0..screen.height() {
        for x in 0..screen.width() {
            let idx = (y * screen.width() + x) as usize;
            if bg.is_background(idx) {
                continue;
            }
            let (tc, tr) = tiling.tile_of(x, y);
            present.insert((tr as u64 * cols + tc as u64) * palette + pixels[idx] as u64);
        }
    }
    Ok(FeatureSet::new(capacity, present.into_iter().map(FeatureId))
        .expect("basic indices are in range by construction"))
}

/// Tile/color pairs of a family-local basic feature set, grouped by
/// color for pairwise extraction.
fn basic_tiles_by_color(basic: &FeatureSet, layout: &FeatureLayout) -> Vec<(u8, Vec<(i32, i32)>)> {
    let mut groups: Vec<(u8, Vec<(i32, i32)>)> = Vec::new();
    for f in basic.iter() {
        // family-local basic ids share the global basic encoding
        match layout.decode(f) {
            Feature::Basic { col, row, color } => {
                match groups.last_mut() {
                    Some((c, tiles)) if *c == color => tiles.push((row as i32, col as i32)),
                    _ => groups.push((color, vec![(row as i32, col as i32)])),
                }
            }
            _ => unreachable!("basic-family id within the basic range"),
        }
    }
    // ids sort by (tile, color); regroup strictly by color
    let mut merged: Vec<(u8, Vec<(i32, i32)>)> = Vec::new();
    groups.sort_by_key(|(c, _)| *c);
    for (c, tiles) in groups {
        match merged.last_mut() {
            Some((mc, mt)) if *mc == c => mt.extend(tiles),
            _ => merged.push((c, tiles)),
        }
    }
    merged
}

/// Same-screen pairwise offset features of a basic set, family-local
/// (indices relative to the start of the B-PROS range).
pub fn extract_bpros(basic: &FeatureSet, layout: &FeatureLayout) -> FeatureSet {
    let sizes = layout.sizes();
    let groups = basic_tiles_by_color(basic, layout);
    let mut out = BTreeSet::new();
    for (i, (c, tiles)) in groups.iter().enumerate() {
        for (c2, tiles2) in &groups[i..] {
            for &(r, k) in tiles {
                for &(r2, k2) in tiles2 {
                    let f = layout.encode_bpros(r2 - r, k2 - k, *c, *c2);
                    out.insert(f.0 - sizes.basic);
                }
            }
        }
    }
    FeatureSet::new(sizes.bpros, out.into_iter().map(FeatureId))
        .expect("bpros indices are in range by construction")
}

/// Across-screens pairwise offset features, family-local. `prev_basic`
/// holds the basic features of the previous decision point's screen,
/// `cur_basic` those of the current screen; offsets run from the
/// previous tile to the current one and the pair is ordered in time, so
/// no canonicalization applies.
pub fn extract_bprot(
    prev_basic: &FeatureSet,
    cur_basic: &FeatureSet,
    layout: &FeatureLayout,
) -> FeatureSet {
    let sizes = layout.sizes();
    let prev = basic_tiles_by_color(prev_basic, layout);
    let cur = basic_tiles_by_color(cur_basic, layout);
    let mut out = BTreeSet::new();
    for (c, tiles) in &prev {
        for (c2, tiles2) in &cur {
            for &(r, k) in tiles {
                for &(r2, k2) in tiles2 {
                    let f = layout.encode_bprot(r2 - r, k2 - k, *c, *c2);
                    out.insert(f.0 - sizes.basic - sizes.bpros);
                }
            }
        }
    }
    FeatureSet::new(sizes.bprot, out.into_iter().map(FeatureId))
        .expect("bprot indices are in range by construction")
}

/// Full B-PROST state of a decision point: the three families mapped
/// into their disjoint global ranges. At episode start (`prev = None`)
/// the previous screen is treated as all-background, so the B-PROT
/// family is empty.
pub fn extract_bprost(
    prev: Option<&Screen>,
    cur: &Screen,
    bg: &BackgroundMap,
    layout: &FeatureLayout,
) -> Result<ScreenState, ScreenError> {
    let sizes = layout.sizes();
    let tiling = layout.tiling();
    let cur_basic = extract_basic(cur, bg, &tiling)?;
    let prev_basic = match prev {
        Some(p) => extract_basic(p, bg, &tiling)?,
        None => FeatureSet::empty(sizes.basic),
    };
    let bpros = extract_bpros(&cur_basic, layout);
    let bprot = extract_bprot(&prev_basic, &cur_basic, layout);
    let members = cur_basic
        .iter()
        .chain(bpros.iter().map(|f| FeatureId(f.0 + sizes.basic)))
        .chain(bprot.iter().map(|f| FeatureId(f.0 + sizes.basic + sizes.bpros)));
    let features = FeatureSet::new(sizes.total, members)
        .expect("family shifts stay within the layout total");
    Ok(ScreenState { features })
}
