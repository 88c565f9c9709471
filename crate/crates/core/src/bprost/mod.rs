//! Conversion of raw pixel screens into B-PROST feature sets.
//!
//! The feature space is the union of three families laid out in disjoint
//! contiguous index ranges:
//!
//! - Basic `[0, basic)`: color `c` occurs somewhere in tile `(row, col)`.
//! - B-PROS `[basic, basic + bpros)`: spatial offsets between two basic
//!   features of the same screen, canonicalized so that the symmetric
//!   pair `(Δ, c, c')` / `(−Δ, c', c)` maps to one index.
//! - B-PROT `[basic + bpros, total)`: offsets between a basic feature of
//!   the previous decision point's screen and one of the current screen;
//!   time order breaks the symmetry, so there is no canonicalization.
//!
//! Offsets are `(drow, dcol) = t' − t` in tile coordinates. The row axis
//! admits `2·tile_rows − 1` values and the column axis `2·tile_cols − 1`
//! (27 and 31 respectively for the Atari 14×16 grid; the 160×210-pixel
//! screen with a 128-color palette yields 28,672 basic, 6,856,768 B-PROS
//! and 13,713,408 B-PROT features, 20,598,848 in total).
//!
//! Background pixels (pixels that never change color) are masked out of
//! extraction, which is observationally equivalent to repainting them
//! with a common background color.

mod background;
mod extract;
mod layout;
mod screen;

pub use background::{calibrate_background, BackgroundMap};
pub use extract::{
    extract_basic, extract_bpros, extract_bprost, extract_bprot, ScreenState,
};
pub use layout::{Feature, FeatureLayout, LayoutSizes};
pub use screen::{read_fixture, write_fixture, Screen, ScreenError, TilingConfig};
