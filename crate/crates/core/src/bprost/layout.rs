//! The bit-exact B-PROST feature index layout.
//!
//! Global indices are family-contiguous: Basic occupies `[0, basic)`,
//! B-PROS `[basic, basic + bpros)` and B-PROT `[basic + bpros, total)`.
//! Encoding and decoding are exact inverses over the whole space.

use super::screen::TilingConfig;
use crate::features::FeatureId;

/// Per-family feature counts for a tiling/palette combination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayoutSizes {
    pub basic: u64,
    pub bpros: u64,
    pub bprot: u64,
    pub total: u64,
}

/// Decoded form of a global feature index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    /// Color `color` occurs in tile `(col, row)`.
    Basic { col: u32, row: u32, color: u8 },
    /// Canonical same-screen offset pair: a tile holding `color_a` and a
    /// tile holding `color_b` at tile offset `(drow, dcol)` between them.
    Bpros {
        drow: i32,
        dcol: i32,
        color_a: u8,
        color_b: u8,
    },
    /// Across-screens offset pair: `color_prev` in a tile of the previous
    /// decision point's screen, `color_cur` in a tile of the current one.
    Bprot {
        drow: i32,
        dcol: i32,
        color_prev: u8,
        color_cur: u8,
    },
}

pub struct FeatureLayout {
    tiling: TilingConfig,
    palette: u16,
    sizes: LayoutSizes,
    /// Offset values on the column axis (2·cols − 1); the row axis has
    /// 2·rows − 1 values.
    h_offsets: u64,
    /// Base index of each B-PROS color-pair block, ordered by the
    /// lexicographic rank of `(c, c')` with `c ≤ c'`.
    bpros_pair_base: Vec<u64>,
    /// Inverse of the pair rank: rank → (c, c').
    bpros_pairs: Vec<(u8, u8)>,
}

impl FeatureLayout {
    pub fn new(tiling: TilingConfig, palette: u16) -> Self {
        let cols = tiling.tile_cols as u64;
        let rows = tiling.tile_rows as u64;
        let p = palette as u64;
        let v_offsets = 2 * rows - 1;
        let h_offsets = 2 * cols - 1;
        let basic = cols * rows * p;
        let offsets = v_offsets * h_offsets;
        let bpros = (offsets * p * p - p) / 2 + p;
        let bprot = offsets * p * p;
        let sizes = LayoutSizes {
            basic,
            bpros,
            bprot,
            total: basic + bpros + bprot,
        };

        // Same-color blocks keep only one representative of each ±Δ
        // offset class, so their size is (V·H + 1)/2.
        let diag_block = offsets.div_ceil(2);
        let pair_count = (p * (p + 1) / 2) as usize;
        let mut bpros_pair_base = Vec::with_capacity(pair_count);
        let mut bpros_pairs = Vec::with_capacity(pair_count);
        let mut base = 0u64;
        for c in 0..palette {
            for c2 in c..palette {
                bpros_pair_base.push(base);
                bpros_pairs.push((c as u8, c2 as u8));
                base += if c == c2 { diag_block } else { offsets };
            }
        }
        debug_assert_eq!(base, bpros);

        Self {
            tiling,
            palette,
            sizes,
            h_offsets,
            bpros_pair_base,
            bpros_pairs,
        }
    }

    pub fn sizes(&self) -> LayoutSizes {
        self.sizes
    }

    pub fn tiling(&self) -> TilingConfig {
        self.tiling
    }

    pub fn palette(&self) -> u16 {
        self.palette
    }

    pub fn total(&self) -> u64 {
        self.sizes.total
    }

    fn rows(&self) -> i32 {
        self.tiling.tile_rows as i32
    }

    fn cols(&self) -> i32 {
        self.tiling.tile_cols as i32
    }

    /// Dense rank of an offset in row-major `(drow, dcol)` order.
    fn offset_index(&self, drow: i32, dcol: i32) -> u64 {
        debug_assert!(drow.abs() < self.rows() && dcol.abs() < self.cols());
        ((drow + self.rows() - 1) as u64) * self.h_offsets + (dcol + self.cols() - 1) as u64
    }

    fn offset_from_index(&self, idx: u64) -> (i32, i32) {
        let drow = (idx / self.h_offsets) as i32 - (self.rows() - 1);
        let dcol = (idx % self.h_offsets) as i32 - (self.cols() - 1);
        (drow, dcol)
    }

    pub fn encode_basic(&self, col: u32, row: u32, color: u8) -> FeatureId {
        debug_assert!(col < self.tiling.tile_cols && row < self.tiling.tile_rows);
        debug_assert!((color as u16) < self.palette);
        let p = self.palette as u64;
        FeatureId((row as u64 * self.tiling.tile_cols as u64 + col as u64) * p + color as u64)
    }

    /// Canonical form of a B-PROS parameter tuple. Pairs are ordered by
    /// `(c, c')`, flipping the offset sign when `c > c'`; for equal
    /// colors the representative keeps a nonnegative leading component.
    pub fn canonical_bpros(
        &self,
        drow: i32,
        dcol: i32,
        c: u8,
        c2: u8,
    ) -> (i32, i32, u8, u8) {
        if c > c2 || (c == c2 && (drow < 0 || (drow == 0 && dcol < 0))) {
            (-drow, -dcol, c2, c)
        } else {
            (drow, dcol, c, c2)
        }
    }

    fn pair_rank(&self, c: u8, c2: u8) -> usize {
        debug_assert!(c <= c2);
        let p = self.palette as u64;
        let c = c as u64;
        // pairs (a, b) with a ≤ b preceding color c as first component
        let preceding = c * (2 * p - c + 1) / 2;
        (preceding + (c2 as u64 - c)) as usize
    }

    /// Rank of a canonical same-color offset among the representatives
    /// `(drow > 0) ∨ (drow = 0 ∧ dcol ≥ 0)`, counted in row-major order.
    fn diag_offset_index(&self, drow: i32, dcol: i32) -> u64 {
        debug_assert!(drow > 0 || (drow == 0 && dcol >= 0));
        if drow == 0 {
            dcol as u64
        } else {
            self.cols() as u64 + ((drow - 1) as u64) * self.h_offsets + (dcol + self.cols() - 1) as u64
        }
    }

    fn diag_offset_from_index(&self, idx: u64) -> (i32, i32) {
        let cols = self.cols() as u64;
        if idx < cols {
            (0, idx as i32)
        } else {
            let rest = idx - cols;
            let drow = (rest / self.h_offsets) as i32 + 1;
            let dcol = (rest % self.h_offsets) as i32 - (self.cols() - 1);
            (drow, dcol)
        }
    }

    /// Global index of a B-PROS feature; the tuple is canonicalized
    /// first, so both symmetric forms encode identically.
    pub fn encode_bpros(&self, drow: i32, dcol: i32, c: u8, c2: u8) -> FeatureId {
        let (drow, dcol, c, c2) = self.canonical_bpros(drow, dcol, c, c2);
        let base = self.bpros_pair_base[self.pair_rank(c, c2)];
        let local = if c == c2 {
            base + self.diag_offset_index(drow, dcol)
        } else {
            base + self.offset_index(drow, dcol)
        };
        FeatureId(self.sizes.basic + local)
    }

    /// Global index of a B-PROT feature. `c_prev` belongs to the earlier
    /// screen, `c_cur` to the current one; no canonicalization.
    pub fn encode_bprot(&self, drow: i32, dcol: i32, c_prev: u8, c_cur: u8) -> FeatureId {
        let p = self.palette as u64;
        let local = self.offset_index(drow, dcol) * p * p + c_prev as u64 * p + c_cur as u64;
        FeatureId(self.sizes.basic + self.sizes.bpros + local)
    }

    /// Decodes a global index back into its family parameters.
    pub fn decode(&self, f: FeatureId) -> Feature {
        let p = self.palette as u64;
        assert!(f.0 < self.sizes.total, "feature index out of layout range");
        if f.0 < self.sizes.basic {
            let color = (f.0 % p) as u8;
            let tile = f.0 / p;
            let col = (tile % self.tiling.tile_cols as u64) as u32;
            let row = (tile / self.tiling.tile_cols as u64) as u32;
            return Feature::Basic { col, row, color };
        }
        if f.0 < self.sizes.basic + self.sizes.bpros {
            let local = f.0 - self.sizes.basic;
            let rank = self
                .bpros_pair_base
                .partition_point(|&b| b <= local)
                .saturating_sub(1);
            let (c, c2) = self.bpros_pairs[rank];
            let within = local - self.bpros_pair_base[rank];
            let (drow, dcol) = if c == c2 {
                self.diag_offset_from_index(within)
            } else {
                self.offset_from_index(within)
            };
            return Feature::Bpros {
                drow,
                dcol,
                color_a: c,
                color_b: c2,
            };
        }
        let local = f.0 - self.sizes.basic - self.sizes.bpros;
        let colors = local % (p * p);
        let (drow, dcol) = self.offset_from_index(local / (p * p));
        Feature::Bprot {
            drow,
            dcol,
            color_prev: (colors / p) as u8,
            color_cur: (colors % p) as u8,
        }
    }
}
