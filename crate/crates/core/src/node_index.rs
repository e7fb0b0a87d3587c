//! The slot index: fingerprints to dense node numbers.
//!
//! Static mode is a minimal perfect hash, bijective onto `0..n` for the
//! build-time fingerprint set and arbitrary-but-in-range elsewhere; false
//! positives are caught downstream by forest ascent. Dynamic mode is an
//! associative map with a free-slot pool whose capacity never exceeds three
//! times the live count, with amortized rebuilds on growth and shrinkage.

use std::collections::BTreeSet;
use std::collections::HashMap;

use crate::error::BuildError;
use crate::fingerprint::Fingerprint;
use crate::mphf::Mphf;

const MPHF_ATTEMPTS: u32 = 32;

/// Slot bitmap used to certify bijectivity during static construction.
#[derive(Clone, Debug)]
pub struct MembershipBitvector {
    bits: Vec<u64>,
    set_count: usize,
}

impl MembershipBitvector {
    pub fn new(n: usize) -> Self {
        Self {
            bits: vec![0; n.div_ceil(64)],
            set_count: 0,
        }
    }

    /// Set the bit; false if it was already set.
    pub fn set(&mut self, i: usize) -> bool {
        let (w, b) = (i / 64, i % 64);
        if self.bits[w] >> b & 1 == 1 {
            return false;
        }
        self.bits[w] |= 1 << b;
        self.set_count += 1;
        true
    }

    pub fn all_set(&self, n: usize) -> bool {
        self.set_count == n
    }
}

/// Bijective index over a fixed fingerprint set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StaticIndex {
    mphf: Mphf,
    /// Optional per-slot stored fingerprints; detects non-member lookups
    /// without forest ascent at the cost of extra space. Off by default.
    fingerprint_check: Option<Vec<u64>>,
}

impl StaticIndex {
    /// Las Vegas construction: succeeds iff the fingerprints are distinct;
    /// a duplicate means two k-mers collided under the current base, and the
    /// caller must redraw it and re-stream.
    pub fn build(
        fps: &[Fingerprint],
        seed: u64,
        fingerprint_check: bool,
    ) -> Result<StaticIndex, BuildError> {
        let keys: Vec<u64> = fps.iter().map(|f| f.0).collect();
        {
            let mut sorted = keys.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(BuildError::RestartNeeded);
            }
        }
        let mut mphf = None;
        for attempt in 0..MPHF_ATTEMPTS {
            if let Some(built) = Mphf::build(&keys, seed.wrapping_add(attempt as u64)) {
                mphf = Some(built);
                break;
            }
        }
        let mphf = mphf.ok_or(BuildError::TooManyRestarts(MPHF_ATTEMPTS))?;
        // Certify bijectivity: every input fingerprint claims a distinct slot.
        let mut occupancy = MembershipBitvector::new(keys.len());
        for &key in &keys {
            if !occupancy.set(mphf.lookup(key) as usize) {
                return Err(BuildError::RestartNeeded);
            }
        }
        debug_assert!(occupancy.all_set(keys.len()));
        let fingerprint_check = fingerprint_check.then(|| {
            let mut stored = vec![0u64; keys.len()];
            for &key in &keys {
                stored[mphf.lookup(key) as usize] = key;
            }
            stored
        });
        Ok(StaticIndex {
            mphf,
            fingerprint_check,
        })
    }

    pub fn len(&self) -> usize {
        self.mphf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mphf.is_empty()
    }

    /// Total lookup: members get their unique slot, non-members an
    /// arbitrary value in range; never an error.
    #[inline]
    pub fn slot(&self, f: Fingerprint) -> u32 {
        self.mphf.lookup(f.0) as u32
    }

    /// With the fingerprint-check array enabled, rejects non-member
    /// fingerprints directly; None means "unknown, ask the forest".
    pub fn known_member(&self, f: Fingerprint) -> Option<bool> {
        self.fingerprint_check
            .as_ref()
            .map(|stored| !self.mphf.is_empty() && stored[self.slot(f) as usize] == f.0)
    }

    pub fn has_fingerprint_check(&self) -> bool {
        self.fingerprint_check.is_some()
    }

    pub fn fingerprint_check_table(&self) -> Option<&[u64]> {
        self.fingerprint_check.as_deref()
    }

    pub fn mphf(&self) -> &Mphf {
        &self.mphf
    }

    pub fn from_parts(mphf: Mphf, fingerprint_check: Option<Vec<u64>>) -> StaticIndex {
        StaticIndex {
            mphf,
            fingerprint_check,
        }
    }
}

/// Slot relayout emitted by dynamic rebuilds; owners of slot-indexed state
/// (adjacency rows, parent specs, root samples) apply it atomically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotRemap {
    pub new_capacity: u32,
    /// (old slot, new slot), sorted by old slot.
    pub moves: Vec<(u32, u32)>,
}

/// Outcome of a dynamic insertion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DynInsert {
    Inserted { slot: u32, remap: Option<SlotRemap> },
    AlreadyPresent { slot: u32 },
}

/// Injective index over a changing fingerprint set, range `0..capacity`
/// with `capacity <= 3 * live count` whenever the index is non-empty.
#[derive(Clone, Debug)]
pub struct DynamicIndex {
    table: HashMap<u64, u32>,
    free_slots: BTreeSet<u32>,
    capacity: u32,
    /// Cumulative entries moved by rebuilds, for amortization accounting.
    rebuild_touched: u64,
}

const INITIAL_CAPACITY: u32 = 2;

impl Default for DynamicIndex {
    fn default() -> Self {
        Self::new()
    }
}

impl DynamicIndex {
    pub fn new() -> Self {
        Self {
            table: HashMap::new(),
            free_slots: (0..INITIAL_CAPACITY).collect(),
            capacity: INITIAL_CAPACITY,
            rebuild_touched: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn rebuild_touched(&self) -> u64 {
        self.rebuild_touched
    }

    pub fn lookup(&self, f: Fingerprint) -> Option<u32> {
        self.table.get(&f.0).copied()
    }

    pub fn max_assigned_slot(&self) -> Option<u32> {
        self.table.values().copied().max()
    }

    /// Slots in ascending order with their fingerprints, for serialization
    /// and invariant scans.
    pub fn entries_by_slot(&self) -> Vec<(u32, u64)> {
        let mut entries: Vec<(u32, u64)> = self.table.iter().map(|(&f, &s)| (s, f)).collect();
        entries.sort_unstable();
        entries
    }

    /// Insert, growing (capacity 2*(count+1)) when full. The lowest free
    /// slot wins, so assignments are deterministic.
    pub fn insert(&mut self, f: Fingerprint) -> DynInsert {
        if let Some(&slot) = self.table.get(&f.0) {
            return DynInsert::AlreadyPresent { slot };
        }
        let mut remap = None;
        if self.table.len() as u32 + 1 > self.capacity {
            remap = Some(self.rebuild(2 * (self.table.len() as u32 + 1)));
        }
        let slot = *self
            .free_slots
            .iter()
            .next()
            .expect("free slot after growth");
        self.free_slots.remove(&slot);
        self.table.insert(f.0, slot);
        DynInsert::Inserted { slot, remap }
    }

    /// Remove, shrinking (capacity max(2, 2*count)) when occupancy drops
    /// below a third so the range invariant is restored.
    pub fn remove(&mut self, f: Fingerprint) -> Option<Option<SlotRemap>> {
        let slot = self.table.remove(&f.0)?;
        self.free_slots.insert(slot);
        let count = self.table.len() as u32;
        if 3 * count < self.capacity {
            let target = (2 * count).max(INITIAL_CAPACITY);
            if target != self.capacity {
                return Some(Some(self.rebuild(target)));
            }
        }
        Some(None)
    }

    /// Reassign all live fingerprints to `0..count` in old-slot order and
    /// reset capacity.
    fn rebuild(&mut self, new_capacity: u32) -> SlotRemap {
        let entries = self.entries_by_slot();
        debug_assert!(entries.len() as u32 <= new_capacity);
        let mut moves = Vec::with_capacity(entries.len());
        self.table.clear();
        for (new_slot, &(old_slot, fp)) in entries.iter().enumerate() {
            let new_slot = new_slot as u32;
            self.table.insert(fp, new_slot);
            moves.push((old_slot, new_slot));
        }
        self.rebuild_touched += moves.len() as u64;
        self.capacity = new_capacity;
        self.free_slots = (entries.len() as u32..new_capacity).collect();
        SlotRemap {
            new_capacity,
            moves,
        }
    }

    pub fn from_parts(capacity: u32, entries: &[(u32, u64)]) -> Self {
        let mut table = HashMap::with_capacity(entries.len());
        let mut free_slots: BTreeSet<u32> = (0..capacity).collect();
        for &(slot, fp) in entries {
            table.insert(fp, slot);
            free_slots.remove(&slot);
        }
        Self {
            table,
            free_slots,
            capacity,
            rebuild_touched: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn fp(v: u64) -> Fingerprint {
        Fingerprint(v)
    }

    #[test]
    fn static_build_single_and_pair() {
        let idx = StaticIndex::build(&[fp(12)], 0, false).unwrap();
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.slot(fp(12)), 0);
        assert_eq!(idx.slot(fp(999)), 0);

        let idx = StaticIndex::build(&[fp(12), fp(26)], 0, false).unwrap();
        let mut slots = vec![idx.slot(fp(12)), idx.slot(fp(26))];
        slots.sort_unstable();
        assert_eq!(slots, vec![0, 1]);
    }

    #[test]
    fn static_build_rejects_duplicates() {
        let err = StaticIndex::build(&[fp(12), fp(12)], 0, false).unwrap_err();
        assert_eq!(err, BuildError::RestartNeeded);
    }

    #[test]
    fn static_build_large_is_bijective() {
        let mut rng = SplitMix64::new(99);
        let mut keys = std::collections::HashSet::new();
        while keys.len() < 100_000 {
            keys.insert(rng.next_u64());
        }
        let fps: Vec<Fingerprint> = keys.iter().map(|&k| fp(k)).collect();
        let idx = StaticIndex::build(&fps, 5, false).unwrap();
        let mut slots: Vec<u32> = fps.iter().map(|&f| idx.slot(f)).collect();
        slots.sort_unstable();
        assert!(slots.iter().enumerate().all(|(i, &s)| i as u32 == s));
    }

    #[test]
    fn fingerprint_check_filters_non_members() {
        let fps = [fp(10), fp(20), fp(30)];
        let idx = StaticIndex::build(&fps, 1, true).unwrap();
        assert_eq!(idx.known_member(fp(10)), Some(true));
        assert_eq!(idx.known_member(fp(11)), Some(false));
        let plain = StaticIndex::build(&fps, 1, false).unwrap();
        assert_eq!(plain.known_member(fp(10)), None);
    }

    #[test]
    fn dyn_insert_assigns_lowest_free_slot() {
        let mut idx = DynamicIndex::new();
        assert_eq!(
            idx.insert(fp(12)),
            DynInsert::Inserted {
                slot: 0,
                remap: None
            }
        );
        assert_eq!(idx.insert(fp(12)), DynInsert::AlreadyPresent { slot: 0 });
        assert_eq!(idx.lookup(fp(12)), Some(0));
    }

    #[test]
    fn dyn_growth_rebuilds_at_double() {
        let mut idx = DynamicIndex::new();
        idx.insert(fp(12));
        idx.insert(fp(26));
        assert_eq!(idx.capacity(), 2);
        match idx.insert(fp(99)) {
            DynInsert::Inserted { slot, remap } => {
                let remap = remap.expect("rebuild expected");
                assert_eq!(remap.new_capacity, 6);
                assert_eq!(remap.moves, vec![(0, 0), (1, 1)]);
                assert_eq!(slot, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dyn_remove_shrinks_below_third() {
        let mut idx = DynamicIndex::from_parts(12, &[(0, 100), (3, 101), (7, 102), (11, 103)]);
        let remap = idx.remove(fp(101)).unwrap().expect("shrink expected");
        assert_eq!(remap.new_capacity, 6);
        assert_eq!(remap.moves, vec![(0, 0), (7, 1), (11, 2)]);
        assert_eq!(idx.lookup(fp(102)), Some(1));
        assert_eq!(idx.remove(fp(999)), None);
    }

    #[test]
    fn dyn_remove_last_leaves_empty() {
        let mut idx = DynamicIndex::new();
        idx.insert(fp(12));
        idx.remove(fp(12)).unwrap();
        assert!(idx.is_empty());
        assert_eq!(idx.lookup(fp(12)), None);
    }

    #[test]
    fn range_invariant_and_amortized_rebuilds() {
        // 10^5 random inserts/deletes: capacity <= 3 * count whenever
        // non-empty, and total rebuild work bounded by 4 * ops.
        let mut idx = DynamicIndex::new();
        let mut rng = SplitMix64::new(31);
        let mut live: Vec<u64> = Vec::new();
        let ops = 100_000u64;
        for op in 0..ops {
            if live.is_empty() || rng.chance(55) {
                let key = rng.next_u64();
                if let DynInsert::Inserted { .. } = idx.insert(fp(key)) {
                    live.push(key);
                }
            } else {
                let pick = rng.next_below(live.len() as u64) as usize;
                let key = live.swap_remove(pick);
                idx.remove(fp(key)).unwrap();
            }
            let count = idx.len() as u32;
            if count > 0 {
                assert!(idx.capacity() <= 3 * count, "range invariant violated");
            }
            if op % 1000 == 0 && count > 0 {
                assert!(idx.max_assigned_slot().unwrap() < idx.capacity());
                let slots: std::collections::HashSet<u32> =
                    idx.entries_by_slot().iter().map(|&(s, _)| s).collect();
                assert_eq!(slots.len(), idx.len());
            }
        }
        let c = idx.rebuild_touched() as f64 / ops as f64;
        println!("amortized rebuild constant: {c:.3} entries/op");
        assert!(
            idx.rebuild_touched() <= 4 * ops,
            "rebuild work {} exceeds 4x ops",
            idx.rebuild_touched()
        );
    }
}
