//! Feature identifiers, sparse feature sets, and the novelty bookkeeping
//! used by every planner in the crate: boolean mark tables for the IW
//! family, per-feature depth tables for Rollout IW, partitioned tables
//! for IW_G / IW_S, and the k-conjunction lifting that turns IW(1)
//! machinery into IW(k).
//!
//! Tables are single-writer: one search owns one table. [`FeatureSet`]s
//! are immutable after construction.

use std::collections::{BTreeMap, HashMap, HashSet};
use thiserror::Error;

/// Depth sentinel meaning "never reached". Strictly greater than any
/// legal depth (depths are bounded by the feature-space size).
pub const INFINITE_DEPTH: u32 = u32::MAX;

/// Largest capacity for which tables use dense storage. Covers the full
/// 20,598,848-feature Atari B-PROST space; lifted conjunction spaces fall
/// back to sparse maps.
const DENSE_LIMIT: u64 = 1 << 25;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("feature index {index} out of range for capacity {capacity}")]
    IndexOutOfRange { index: u64, capacity: u64 },
    #[error("operation requires a non-empty feature set")]
    EmptyFeatureSet,
    #[error("conjunction width must be at least 1")]
    ZeroWidth,
    #[error("lifted feature space C({capacity}, {width}) overflows u64")]
    CapacityOverflow { capacity: u64, width: u32 },
}

/// Index into a fixed feature space. Stable across a run and bijective
/// with the (family, parameters) tuple defined by the feature layout in
/// use (see [`crate::bprost::FeatureLayout`]) or by a toy atom set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(pub u64);

impl FeatureId {
    pub fn index(self) -> u64 {
        self.0
    }
}

/// An extended feature: a feature paired with the trajectory depth at
/// which it was observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EFeature {
    pub feature: FeatureId,
    pub depth: u32,
}

/// Sparse set of feature indices describing one state. Members are kept
/// sorted and deduplicated, so iteration order is deterministic given
/// identical construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSet {
    members: Vec<FeatureId>,
    capacity: u64,
}

impl FeatureSet {
    pub fn new(
        capacity: u64,
        members: impl IntoIterator<Item = FeatureId>,
    ) -> Result<Self, FeatureError> {
        let mut members: Vec<FeatureId> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&f) = members.iter().find(|f| f.0 >= capacity) {
            return Err(FeatureError::IndexOutOfRange {
                index: f.0,
                capacity,
            });
        }
        Ok(Self { members, capacity })
    }

    pub fn empty(capacity: u64) -> Self {
        Self {
            members: Vec::new(),
            capacity,
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, f: FeatureId) -> bool {
        self.members.binary_search(&f).is_ok()
    }

    /// Members in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.members.iter().copied()
    }

    pub fn members(&self) -> &[FeatureId] {
        &self.members
    }
}

/// Result of checking a state's extended features against a depth table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Novelty {
    /// Some feature was reached at a strictly smaller depth than any
    /// earlier trajectory reached it.
    Novel(FeatureId),
    /// No improvement, but some feature ties its recorded best depth.
    Known(FeatureId),
    /// Every feature's recorded best depth is strictly smaller.
    Stale(FeatureId),
}

enum MarkRepr {
    Dense(Vec<u64>),
    Sparse(HashSet<u64>),
}

/// Boolean "reached" table over a feature space. Marks are monotone:
/// never cleared within one search.
pub struct NoveltyMarkTable {
    capacity: u64,
    repr: MarkRepr,
}

impl NoveltyMarkTable {
    pub fn new(capacity: u64) -> Self {
        let repr = if capacity <= DENSE_LIMIT {
            MarkRepr::Dense(vec![0u64; capacity.div_ceil(64) as usize])
        } else {
            MarkRepr::Sparse(HashSet::new())
        };
        Self { capacity, repr }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn is_marked(&self, f: FeatureId) -> bool {
        match &self.repr {
            MarkRepr::Dense(bits) => bits[(f.0 / 64) as usize] & (1 << (f.0 % 64)) != 0,
            MarkRepr::Sparse(set) => set.contains(&f.0),
        }
    }

    /// Marks every member of `s`; returns whether at least one member was
    /// unmarked before the call (the state has novelty 1) and how many
    /// marks were new.
    pub fn mark_and_test(&mut self, s: &FeatureSet) -> Result<(bool, usize), FeatureError> {
        let mut newly_marked = 0usize;
        for f in s.iter() {
            if f.0 >= self.capacity {
                return Err(FeatureError::IndexOutOfRange {
                    index: f.0,
                    capacity: self.capacity,
                });
            }
            let fresh = match &mut self.repr {
                MarkRepr::Dense(bits) => {
                    let (word, bit) = ((f.0 / 64) as usize, 1u64 << (f.0 % 64));
                    let fresh = bits[word] & bit == 0;
                    bits[word] |= bit;
                    fresh
                }
                MarkRepr::Sparse(set) => set.insert(f.0),
            };
            if fresh {
                newly_marked += 1;
            }
        }
        Ok((newly_marked > 0, newly_marked))
    }
}

enum DepthRepr {
    Dense(Vec<u32>),
    Sparse(HashMap<u64, u32>),
}

/// Per-feature minimum trajectory depth, the core state of Rollout IW.
/// Values only decrease over the lifetime of one decision's search.
pub struct DepthTable {
    capacity: u64,
    repr: DepthRepr,
}

impl DepthTable {
    /// All entries start at [`INFINITE_DEPTH`].
    pub fn new(capacity: u64) -> Self {
        let repr = if capacity <= DENSE_LIMIT {
            DepthRepr::Dense(vec![INFINITE_DEPTH; capacity as usize])
        } else {
            DepthRepr::Sparse(HashMap::new())
        };
        Self { capacity, repr }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn depth(&self, f: FeatureId) -> u32 {
        match &self.repr {
            DepthRepr::Dense(d) => d[f.0 as usize],
            DepthRepr::Sparse(d) => d.get(&f.0).copied().unwrap_or(INFINITE_DEPTH),
        }
    }

    fn set_depth(&mut self, f: FeatureId, depth: u32) {
        match &mut self.repr {
            DepthRepr::Dense(d) => d[f.0 as usize] = depth,
            DepthRepr::Sparse(d) => {
                d.insert(f.0, depth);
            }
        }
    }

    /// Classifies a state with feature set `s` reached at `depth`.
    ///
    /// Returns `Novel(f)` for the lowest-id feature with `depth < d[f]`
    /// if one exists, else `Known(f)` for the lowest-id feature with
    /// `depth == d[f]`, else `Stale` carrying the lowest member. The
    /// lowest-id tie-break makes the result deterministic.
    pub fn classify_novelty(&self, s: &FeatureSet, depth: u32) -> Result<Novelty, FeatureError> {
        if s.is_empty() {
            return Err(FeatureError::EmptyFeatureSet);
        }
        self.check_range(s)?;
        let mut known: Option<FeatureId> = None;
        for f in s.iter() {
            let best = self.depth(f);
            if depth < best {
                return Ok(Novelty::Novel(f));
            }
            if depth == best && known.is_none() {
                known = Some(f);
            }
        }
        match known {
            Some(f) => Ok(Novelty::Known(f)),
            None => Ok(Novelty::Stale(s.members()[0])),
        }
    }

    /// Lowers `d[f]` to `min(d[f], depth)` for every `f` in `s`; returns
    /// exactly the features whose value strictly decreased.
    pub fn update_depths(&mut self, s: &FeatureSet, depth: u32) -> Result<Vec<FeatureId>, FeatureError> {
        self.check_range(s)?;
        let mut improved = Vec::new();
        for f in s.iter() {
            if depth < self.depth(f) {
                self.set_depth(f, depth);
                improved.push(f);
            }
        }
        Ok(improved)
    }

    fn check_range(&self, s: &FeatureSet) -> Result<(), FeatureError> {
        match s.members().last() {
            Some(&f) if f.0 >= self.capacity => Err(FeatureError::IndexOutOfRange {
                index: f.0,
                capacity: self.capacity,
            }),
            _ => Ok(()),
        }
    }
}

/// Lazily created mark tables keyed by an integer partition value.
/// Keys may be negative (logscore of rewards in `(0,1)`).
pub struct PartitionedTable {
    capacity: u64,
    tables: BTreeMap<i64, NoveltyMarkTable>,
}

impl PartitionedTable {
    pub fn new(capacity: u64) -> Self {
        Self {
            capacity,
            tables: BTreeMap::new(),
        }
    }

    /// Same contract as [`NoveltyMarkTable::mark_and_test`] applied to
    /// the table for `key`, creating it on first use.
    pub fn mark_and_test(
        &mut self,
        key: i64,
        s: &FeatureSet,
    ) -> Result<(bool, usize), FeatureError> {
        self.tables
            .entry(key)
            .or_insert_with(|| NoveltyMarkTable::new(self.capacity))
            .mark_and_test(s)
    }

    /// Partition keys that have been evaluated so far, ascending.
    pub fn keys(&self) -> impl Iterator<Item = i64> + '_ {
        self.tables.keys().copied()
    }

    pub fn table(&self, key: i64) -> Option<&NoveltyMarkTable> {
        self.tables.get(&key)
    }
}

/// Lazily created depth tables keyed by an integer partition value; the
/// Rollout IW counterpart of [`PartitionedTable`], used by the
/// subscoring variant.
pub struct PartitionedDepthTable {
    capacity: u64,
    tables: BTreeMap<i64, DepthTable>,
}

impl PartitionedDepthTable {
    pub fn new(capacity: u64) -> Self {
        Self {
            capacity,
            tables: BTreeMap::new(),
        }
    }

    pub fn table_mut(&mut self, key: i64) -> &mut DepthTable {
        self.tables
            .entry(key)
            .or_insert_with(|| DepthTable::new(self.capacity))
    }

    pub fn keys(&self) -> impl Iterator<Item = i64> + '_ {
        self.tables.keys().copied()
    }
}

/// Binomial coefficient in u64, or `None` on overflow.
pub(crate) fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Canonical index of a k-combination in the colex ranking: for sorted
/// component ids `c_1 < … < c_k`, the rank is `Σ C(c_i, i)`. Bijective
/// onto `[0, C(capacity, k))`.
fn combination_rank(combo: &[FeatureId]) -> u64 {
    combo
        .iter()
        .enumerate()
        .map(|(i, f)| binomial(f.0, i as u64 + 1).expect("component rank fits u64"))
        .sum()
}

/// Lifts a feature set into the size-k conjunction space `F^k`: every
/// size-k combination of members maps to its canonical tuple index.
/// `k = 1` is the identity; `k > |s|` yields the empty set.
pub fn lift_conjunctions(s: &FeatureSet, k: u32) -> Result<FeatureSet, FeatureError> {
    if k == 0 {
        return Err(FeatureError::ZeroWidth);
    }
    if k == 1 {
        return Ok(s.clone());
    }
    let lifted_capacity =
        binomial(s.capacity(), k as u64).ok_or(FeatureError::CapacityOverflow {
            capacity: s.capacity(),
            width: k,
        })?;
    let members = s.members();
    let k = k as usize;
    if k > members.len() {
        return Ok(FeatureSet::empty(lifted_capacity));
    }
    let mut tuples = Vec::with_capacity(binomial(members.len() as u64, k as u64).unwrap_or(0) as usize);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let combo: Vec<FeatureId> = idx.iter().map(|&i| members[i]).collect();
        tuples.push(FeatureId(combination_rank(&combo)));
        // advance the combination index vector
        let mut pos = k;
        loop {
            if pos == 0 {
                return FeatureSet::new(lifted_capacity, tuples);
            }
            pos -= 1;
            if idx[pos] != pos + members.len() - k {
                break;
            }
        }
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fs(capacity: u64, ids: &[u64]) -> FeatureSet {
        FeatureSet::new(capacity, ids.iter().map(|&i| FeatureId(i))).unwrap()
    }

    #[test]
    fn mark_and_test_fresh_table() {
        let mut t = NoveltyMarkTable::new(16);
        assert_eq!(t.mark_and_test(&fs(16, &[3, 7])).unwrap(), (true, 2));
    }

    #[test]
    fn mark_and_test_repeat_state_not_novel() {
        let mut t = NoveltyMarkTable::new(16);
        t.mark_and_test(&fs(16, &[3, 7])).unwrap();
        assert_eq!(t.mark_and_test(&fs(16, &[3, 7])).unwrap(), (false, 0));
    }

    #[test]
    fn mark_and_test_one_new_atom_suffices() {
        let mut t = NoveltyMarkTable::new(16);
        t.mark_and_test(&fs(16, &[3])).unwrap();
        assert_eq!(t.mark_and_test(&fs(16, &[3, 9])).unwrap(), (true, 1));
    }

    #[test]
    fn mark_and_test_out_of_range() {
        let mut t = NoveltyMarkTable::new(4);
        let s = FeatureSet::new(16, [FeatureId(9)]).unwrap();
        assert_eq!(
            t.mark_and_test(&s),
            Err(FeatureError::IndexOutOfRange {
                index: 9,
                capacity: 4
            })
        );
    }

    #[test]
    fn classify_fresh_table_is_novel() {
        let d = DepthTable::new(16);
        assert_eq!(
            d.classify_novelty(&fs(16, &[3, 7]), 2).unwrap(),
            Novelty::Novel(FeatureId(3))
        );
    }

    #[test]
    fn classify_equal_depths_is_known() {
        let mut d = DepthTable::new(16);
        d.update_depths(&fs(16, &[3, 7]), 2).unwrap();
        assert_eq!(
            d.classify_novelty(&fs(16, &[3, 7]), 2).unwrap(),
            Novelty::Known(FeatureId(3))
        );
    }

    #[test]
    fn classify_all_depths_exceeded_is_stale() {
        let mut d = DepthTable::new(16);
        d.update_depths(&fs(16, &[3, 7]), 1).unwrap();
        assert_eq!(
            d.classify_novelty(&fs(16, &[3, 7]), 4).unwrap(),
            Novelty::Stale(FeatureId(3))
        );
    }

    #[test]
    fn classify_empty_set_is_an_error() {
        let d = DepthTable::new(16);
        assert_eq!(
            d.classify_novelty(&FeatureSet::empty(16), 0),
            Err(FeatureError::EmptyFeatureSet)
        );
    }

    #[test]
    fn update_depths_from_infinity() {
        let mut d = DepthTable::new(16);
        let improved = d.update_depths(&fs(16, &[3, 7]), 0).unwrap();
        assert_eq!(improved, vec![FeatureId(3), FeatureId(7)]);
        assert_eq!(d.depth(FeatureId(3)), 0);
        assert_eq!(d.depth(FeatureId(7)), 0);
    }

    #[test]
    fn update_depths_min_is_idempotent_upward() {
        let mut d = DepthTable::new(16);
        d.update_depths(&fs(16, &[3]), 1).unwrap();
        assert!(d.update_depths(&fs(16, &[3]), 2).unwrap().is_empty());
        assert_eq!(d.depth(FeatureId(3)), 1);
    }

    #[test]
    fn update_depths_improvement() {
        let mut d = DepthTable::new(16);
        d.update_depths(&fs(16, &[3]), 5).unwrap();
        assert_eq!(d.update_depths(&fs(16, &[3]), 2).unwrap(), vec![FeatureId(3)]);
        assert_eq!(d.depth(FeatureId(3)), 2);
    }

    #[test]
    fn lift_identity_at_width_one() {
        let s = fs(8, &[1, 2, 3]);
        assert_eq!(lift_conjunctions(&s, 1).unwrap(), s);
    }

    #[test]
    fn lift_pairs() {
        let s = fs(8, &[1, 2, 3]);
        let lifted = lift_conjunctions(&s, 2).unwrap();
        assert_eq!(lifted.len(), 3);
        assert_eq!(lifted.capacity(), binomial(8, 2).unwrap());
        // (1,2), (1,3), (2,3) in colex rank
        let expect: Vec<u64> = vec![
            binomial(1, 1).unwrap() + binomial(2, 2).unwrap(),
            binomial(1, 1).unwrap() + binomial(3, 2).unwrap(),
            binomial(2, 1).unwrap() + binomial(3, 2).unwrap(),
        ];
        let mut expect: Vec<FeatureId> = expect.into_iter().map(FeatureId).collect();
        expect.sort_unstable();
        assert_eq!(lifted.members(), expect.as_slice());
    }

    #[test]
    fn lift_width_above_cardinality_is_empty() {
        let s = fs(8, &[5]);
        assert!(lift_conjunctions(&s, 2).unwrap().is_empty());
    }

    #[test]
    fn partitioned_tables_are_independent() {
        let mut pt = PartitionedTable::new(8);
        assert_eq!(pt.mark_and_test(0, &fs(8, &[1])).unwrap(), (true, 1));
        assert_eq!(pt.mark_and_test(1, &fs(8, &[1])).unwrap(), (true, 1));
        assert_eq!(pt.mark_and_test(0, &fs(8, &[1])).unwrap(), (false, 0));
        assert_eq!(pt.keys().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn partitioned_table_accepts_negative_keys() {
        let mut pt = PartitionedTable::new(8);
        assert_eq!(pt.mark_and_test(-3, &fs(8, &[2])).unwrap(), (true, 1));
        assert!(pt.table(-3).unwrap().is_marked(FeatureId(2)));
    }

    proptest! {
        /// d[f] after any update sequence equals the min depth over calls
        /// whose set contained f.
        #[test]
        fn depth_table_folds_min(
            calls in prop::collection::vec(
                (prop::collection::btree_set(0u64..32, 1..6), 0u32..20),
                1..20,
            )
        ) {
            let mut d = DepthTable::new(32);
            for (ids, depth) in &calls {
                let s = FeatureSet::new(32, ids.iter().map(|&i| FeatureId(i))).unwrap();
                d.update_depths(&s, *depth).unwrap();
            }
            for f in 0u64..32 {
                let expect = calls
                    .iter()
                    .filter(|(ids, _)| ids.contains(&f))
                    .map(|&(_, depth)| depth)
                    .min()
                    .unwrap_or(INFINITE_DEPTH);
                prop_assert_eq!(d.depth(FeatureId(f)), expect);
            }
        }

        /// classify returns Novel iff an update with the same arguments
        /// would strictly improve something.
        #[test]
        fn classify_matches_update(
            seed_calls in prop::collection::vec(
                (prop::collection::btree_set(0u64..16, 1..5), 0u32..10),
                0..10,
            ),
            probe in (prop::collection::btree_set(0u64..16, 1..5), 0u32..10),
        ) {
            let mut d = DepthTable::new(16);
            for (ids, depth) in &seed_calls {
                let s = FeatureSet::new(16, ids.iter().map(|&i| FeatureId(i))).unwrap();
                d.update_depths(&s, *depth).unwrap();
            }
            let (ids, depth) = probe;
            let s = FeatureSet::new(16, ids.iter().map(|&i| FeatureId(i))).unwrap();
            let novel = matches!(d.classify_novelty(&s, depth).unwrap(), Novelty::Novel(_));
            let improved = d.update_depths(&s, depth).unwrap();
            prop_assert_eq!(novel, !improved.is_empty());
        }

        /// Every mark table reports non-novel on the second of two
        /// identical consecutive calls.
        #[test]
        fn second_identical_call_is_never_novel(
            ids in prop::collection::btree_set(0u64..64, 1..10)
        ) {
            let mut t = NoveltyMarkTable::new(64);
            let s = FeatureSet::new(64, ids.iter().map(|&i| FeatureId(i))).unwrap();
            t.mark_and_test(&s).unwrap();
            prop_assert_eq!(t.mark_and_test(&s).unwrap(), (false, 0));
        }

        /// |lift(s, k)| = C(|s|, k) and all lifted ids are in range.
        #[test]
        fn lift_cardinality_is_binomial(
            ids in prop::collection::btree_set(0u64..24, 0..10),
            k in 1u32..4,
        ) {
            let s = FeatureSet::new(24, ids.iter().map(|&i| FeatureId(i))).unwrap();
            let lifted = lift_conjunctions(&s, k).unwrap();
            prop_assert_eq!(
                lifted.len() as u64,
                binomial(s.len() as u64, k as u64).unwrap()
            );
            for f in lifted.iter() {
                prop_assert!(f.0 < lifted.capacity());
            }
        }
    }
}
