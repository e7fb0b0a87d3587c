//! Covering forest: per-slot parent specs, sampled roots, membership
//! verification by ascent, and the tree surgeries used by dynamic updates.
//!
//! Each tree must either have at least `k*lambda` nodes and height at most
//! `3*k*lambda`, or cover its entire connected component. Verifying a key
//! means walking its parent specs to a root and comparing against the
//! root's sampled key; every hop is re-keyed in O(1) and checked against
//! the host structure, so a verified walk certifies membership.

use std::collections::{BTreeMap, HashSet};

use crate::error::ForestError;
use crate::fingerprint::Fingerprint;
use crate::node_index::SlotRemap;

/// How a node reaches its parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParentSpec {
    /// Slot not in use.
    Unassigned,
    /// Tree root; its key is sampled.
    Root,
    /// Parent = roll(child, append-right, symbol): an outgoing edge.
    ViaOut { symbol: u8 },
    /// Parent = roll(child, prepend-left, symbol): an incoming edge.
    ViaIn { symbol: u8 },
    /// Parent histogram = child - removed + added (jumbled mode).
    ViaSwap { removed: u8, added: u8 },
}

/// Size/height thresholds derived from k and lambda.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForestParams {
    /// Minimum size of a non-covering tree: k * lambda.
    pub min_tree_size: usize,
    /// Maximum tree height: 3 * k * lambda.
    pub max_height: usize,
    /// Depth bound below which a small tree attaches directly: 2 * k * lambda.
    pub attach_depth: usize,
}

impl ForestParams {
    pub fn new(k: usize, lambda: u32) -> Self {
        let s = k * lambda as usize;
        Self {
            min_tree_size: s,
            max_height: 3 * s,
            attach_depth: 2 * s,
        }
    }
}

/// A verified (key, fingerprint, slot) triple carried through traversals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handle<K> {
    pub key: K,
    pub fp: Fingerprint,
    pub slot: u32,
}

/// An undirected graph neighbor together with both parent-spec encodings
/// of the connecting edge.
#[derive(Clone, Debug)]
pub struct NeighborEdge<K> {
    /// Spec the scanned node would use if `neighbor` became its parent.
    pub to_parent: ParentSpec,
    /// Spec `neighbor` would use if the scanned node became its parent.
    pub to_child: ParentSpec,
    pub neighbor: Handle<K>,
}

/// Host structure the forest walks over: slot lookup, spec application
/// (re-keying a hop in O(1)), and verified neighbor enumeration.
pub trait ForestCtx {
    type Key: Clone + Eq + std::fmt::Debug;

    fn slot_of(&self, fp: Fingerprint) -> Option<u32>;

    /// Parent key and fingerprint reached by following `spec`; None when the
    /// spec is not a parent pointer or cannot apply to this key.
    fn apply_spec(
        &self,
        key: &Self::Key,
        fp: Fingerprint,
        spec: ParentSpec,
    ) -> Option<(Self::Key, Fingerprint)>;

    /// The spec the former parent uses once the edge is reversed toward
    /// `child_key`.
    fn reverse_spec(&self, child_key: &Self::Key, spec: ParentSpec) -> ParentSpec;

    /// Whether the hop child --spec--> parent is backed by the host
    /// structure (confirmed edge bits in graph mode; swap realizability is
    /// already checked by `apply_spec`).
    fn hop_confirmed(
        &self,
        child: &Handle<Self::Key>,
        spec: ParentSpec,
        parent: &Handle<Self::Key>,
    ) -> bool;

    /// Undirected neighbors of `h`, verified against the host structure.
    /// Self-loops are never reported.
    fn neighbors(&self, h: &Handle<Self::Key>) -> Vec<NeighborEdge<Self::Key>>;
}

/// Why an ascent failed to verify.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefuteReason {
    UnassignedSlot,
    UnrealizableHop,
    MissingParentSlot,
    HopNotConfirmed,
    TooDeep,
    SampleMissing,
    SampleMismatch,
}

/// Result of an ascent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ascent<K> {
    Verified { root: Handle<K>, depth: usize },
    Refuted(RefuteReason),
}

impl<K> Ascent<K> {
    pub fn is_verified(&self) -> bool {
        matches!(self, Ascent::Verified { .. })
    }
}

/// Breadth-first scan of one tree.
#[derive(Clone, Debug)]
pub struct TreeScan<K> {
    /// Nodes with their depths, in discovery order (root first).
    pub nodes: Vec<(Handle<K>, u32)>,
    pub height: u32,
    pub truncated: bool,
}

impl<K> TreeScan<K> {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// A node of maximum depth (BFS order makes it the last one).
    pub fn deepest(&self) -> &(Handle<K>, u32) {
        self.nodes.last().expect("scan holds at least the root")
    }
}

/// The forest proper: one spec per slot plus the root-sample map.
#[derive(Clone, Debug)]
pub struct Forest<K> {
    specs: Vec<ParentSpec>,
    samples: BTreeMap<u32, K>,
    params: ForestParams,
}

impl<K: Clone + Eq + std::fmt::Debug> Forest<K> {
    pub fn new(capacity: u32, params: ForestParams) -> Self {
        Self {
            specs: vec![ParentSpec::Unassigned; capacity as usize],
            samples: BTreeMap::new(),
            params,
        }
    }

    pub(crate) fn from_parts(
        specs: Vec<ParentSpec>,
        samples: BTreeMap<u32, K>,
        params: ForestParams,
    ) -> Self {
        Self {
            specs,
            samples,
            params,
        }
    }

    pub fn params(&self) -> ForestParams {
        self.params
    }

    pub fn capacity(&self) -> u32 {
        self.specs.len() as u32
    }

    pub fn spec(&self, slot: u32) -> ParentSpec {
        self.specs[slot as usize]
    }

    pub fn set_spec(&mut self, slot: u32, spec: ParentSpec) {
        self.specs[slot as usize] = spec;
    }

    pub fn sample(&self, slot: u32) -> Option<&K> {
        self.samples.get(&slot)
    }

    pub fn samples(&self) -> impl Iterator<Item = (u32, &K)> {
        self.samples.iter().map(|(&s, k)| (s, k))
    }

    pub fn root_count(&self) -> usize {
        self.samples.len()
    }

    pub fn specs(&self) -> &[ParentSpec] {
        &self.specs
    }

    /// Register a fresh slot as a singleton covering tree.
    pub fn add_singleton(&mut self, h: &Handle<K>) {
        debug_assert_eq!(self.specs[h.slot as usize], ParentSpec::Unassigned);
        self.specs[h.slot as usize] = ParentSpec::Root;
        self.samples.insert(h.slot, h.key.clone());
    }

    /// Drop a slot entirely (node removal).
    pub fn remove_slot(&mut self, slot: u32) {
        self.specs[slot as usize] = ParentSpec::Unassigned;
        self.samples.remove(&slot);
    }

    /// Apply a slot relayout emitted by the dynamic index.
    pub fn remapped(&self, remap: &SlotRemap) -> Forest<K> {
        let mut specs = vec![ParentSpec::Unassigned; remap.new_capacity as usize];
        let mut samples = BTreeMap::new();
        for &(old, new) in &remap.moves {
            specs[new as usize] = self.specs[old as usize];
            if let Some(key) = self.samples.get(&old) {
                samples.insert(new, key.clone());
            }
        }
        Forest {
            specs,
            samples,
            params: self.params,
        }
    }

    fn step<C: ForestCtx<Key = K>>(
        &self,
        ctx: &C,
        cur: &Handle<K>,
        spec: ParentSpec,
    ) -> Result<Handle<K>, RefuteReason> {
        let (key, fp) = ctx
            .apply_spec(&cur.key, cur.fp, spec)
            .ok_or(RefuteReason::UnrealizableHop)?;
        let slot = ctx.slot_of(fp).ok_or(RefuteReason::MissingParentSlot)?;
        let parent = Handle { key, fp, slot };
        if !ctx.hop_confirmed(cur, spec, &parent) {
            return Err(RefuteReason::HopNotConfirmed);
        }
        Ok(parent)
    }

    /// Lean membership ascent: no path is recorded. A verified result
    /// certifies that the starting key is stored; any failure refutes it.
    /// A walk that runs past the height bound is a refutation, not an
    /// error: an absent key may legitimately revisit slots while its rolled
    /// variants hash around the table.
    pub fn verify<C: ForestCtx<Key = K>>(&self, ctx: &C, start: &Handle<K>) -> Ascent<K> {
        let mut cur = start.clone();
        let mut depth = 0usize;
        loop {
            match self.specs[cur.slot as usize] {
                ParentSpec::Unassigned => return Ascent::Refuted(RefuteReason::UnassignedSlot),
                ParentSpec::Root => {
                    return match self.samples.get(&cur.slot) {
                        None => Ascent::Refuted(RefuteReason::SampleMissing),
                        Some(sample) if *sample == cur.key => Ascent::Verified { root: cur, depth },
                        Some(_) => Ascent::Refuted(RefuteReason::SampleMismatch),
                    }
                }
                spec => {
                    if depth == self.params.max_height {
                        return Ascent::Refuted(RefuteReason::TooDeep);
                    }
                    match self.step(ctx, &cur, spec) {
                        Ok(parent) => {
                            cur = parent;
                            depth += 1;
                        }
                        Err(reason) => return Ascent::Refuted(reason),
                    }
                }
            }
        }
    }

    /// Ascent that records the full parent chain: `(node, its spec)` from
    /// the start to the root inclusive. Used by update procedures on keys
    /// already known to be members; for those a repeated (slot, key) pair
    /// can only mean a genuine parent-pointer cycle, reported as corruption.
    #[allow(clippy::type_complexity)]
    pub fn ascend_path<C: ForestCtx<Key = K>>(
        &self,
        ctx: &C,
        start: &Handle<K>,
    ) -> Result<(Ascent<K>, Vec<(Handle<K>, ParentSpec)>), ForestError> {
        let mut path: Vec<(Handle<K>, ParentSpec)> = Vec::new();
        let mut cur = start.clone();
        let mut depth = 0usize;
        loop {
            let spec = self.specs[cur.slot as usize];
            if path
                .iter()
                .any(|(h, _)| h.slot == cur.slot && h.key == cur.key)
            {
                return Err(ForestError::CorruptForest(format!(
                    "parent cycle through slot {}",
                    cur.slot
                )));
            }
            path.push((cur.clone(), spec));
            match spec {
                ParentSpec::Unassigned => {
                    return Ok((Ascent::Refuted(RefuteReason::UnassignedSlot), path))
                }
                ParentSpec::Root => {
                    let ascent = match self.samples.get(&cur.slot) {
                        None => Ascent::Refuted(RefuteReason::SampleMissing),
                        Some(sample) if *sample == cur.key => Ascent::Verified { root: cur, depth },
                        Some(_) => Ascent::Refuted(RefuteReason::SampleMismatch),
                    };
                    return Ok((ascent, path));
                }
                spec => {
                    if depth == self.params.max_height {
                        return Ok((Ascent::Refuted(RefuteReason::TooDeep), path));
                    }
                    match self.step(ctx, &cur, spec) {
                        Ok(parent) => {
                            cur = parent;
                            depth += 1;
                        }
                        Err(reason) => return Ok((Ascent::Refuted(reason), path)),
                    }
                }
            }
        }
    }

    /// Re-root a tree at the head of `path` (a genuine parent chain ending
    /// at the current root) by reversing every edge along it. The new root
    /// is left unsampled; callers either attach it or sample it.
    pub fn evert<C: ForestCtx<Key = K>>(&mut self, ctx: &C, path: &[(Handle<K>, ParentSpec)]) {
        if path.len() < 2 {
            return;
        }
        for window in path.windows(2) {
            let (child, child_spec) = &window[0];
            let (parent, _) = &window[1];
            self.specs[parent.slot as usize] = ctx.reverse_spec(&child.key, *child_spec);
        }
        let old_root = path.last().expect("non-empty path");
        self.samples.remove(&old_root.0.slot);
        self.specs[path[0].0.slot as usize] = ParentSpec::Root;
    }

    /// Point the root `child` at `parent` through `spec`; the connecting
    /// edge must be confirmed by the host structure.
    pub fn attach<C: ForestCtx<Key = K>>(
        &mut self,
        ctx: &C,
        child: &Handle<K>,
        spec: ParentSpec,
        parent: &Handle<K>,
    ) -> Result<(), ForestError> {
        if self.specs[child.slot as usize] != ParentSpec::Root {
            return Err(ForestError::NotARoot(child.slot));
        }
        let applies = ctx
            .apply_spec(&child.key, child.fp, spec)
            .is_some_and(|(key, fp)| key == parent.key && fp == parent.fp);
        if !applies || !ctx.hop_confirmed(child, spec, parent) {
            return Err(ForestError::EdgeNotConfirmed);
        }
        self.specs[child.slot as usize] = spec;
        self.samples.remove(&child.slot);
        Ok(())
    }

    /// Sever `h` from its parent, making it a sampled root.
    pub fn cut(&mut self, h: &Handle<K>) -> Result<(), ForestError> {
        match self.specs[h.slot as usize] {
            ParentSpec::Root => Err(ForestError::AlreadyRoot(h.slot)),
            ParentSpec::Unassigned => Err(ForestError::CorruptForest(format!(
                "cut of unassigned slot {}",
                h.slot
            ))),
            _ => {
                self.specs[h.slot as usize] = ParentSpec::Root;
                self.samples.insert(h.slot, h.key.clone());
                Ok(())
            }
        }
    }

    /// Breadth-first discovery of the tree rooted at `root`: children of x
    /// are the graph neighbors whose own spec designates x. Collects at most
    /// `limit + 1` nodes; `truncated` means the tree has more than `limit`.
    pub fn collect_tree<C: ForestCtx<Key = K>>(
        &self,
        ctx: &C,
        root: &Handle<K>,
        limit: usize,
    ) -> Result<TreeScan<K>, ForestError> {
        if self.specs[root.slot as usize] != ParentSpec::Root {
            return Err(ForestError::NotARoot(root.slot));
        }
        let cap = limit.saturating_add(1);
        let mut nodes: Vec<(Handle<K>, u32)> = vec![(root.clone(), 0)];
        let mut visited: HashSet<u32> = HashSet::from([root.slot]);
        let mut truncated = false;
        let mut qi = 0;
        'outer: while qi < nodes.len() {
            let (x, depth) = nodes[qi].clone();
            qi += 1;
            for edge in ctx.neighbors(&x) {
                let slot = edge.neighbor.slot;
                if visited.contains(&slot) || self.specs[slot as usize] != edge.to_child {
                    continue;
                }
                if nodes.len() == cap {
                    truncated = true;
                    break 'outer;
                }
                visited.insert(slot);
                nodes.push((edge.neighbor, depth + 1));
            }
        }
        if nodes.len() >= cap {
            truncated = true;
        }
        let height = nodes.last().map(|&(_, d)| d).unwrap_or(0);
        Ok(TreeScan {
            nodes,
            height,
            truncated,
        })
    }

    /// Whether the tree containing fewer than `min_tree_size` nodes, probed
    /// with a bounded scan.
    pub fn tree_is_small<C: ForestCtx<Key = K>>(
        &self,
        ctx: &C,
        root: &Handle<K>,
    ) -> Result<bool, ForestError> {
        let scan = self.collect_tree(ctx, root, self.params.min_tree_size - 1)?;
        Ok(!scan.truncated)
    }

    /// Build the forest over a static structure: BFS spanning tree per
    /// component, then a bottom-up pass that cuts a subtree whenever its
    /// residual height reaches `min_tree_size`. A cut subtree has height
    /// exactly `min_tree_size` (so at least `min_tree_size + 1` nodes); if
    /// the final remainder is too small and a cut occurred, the last cut is
    /// undone (combined height at most `2*min_tree_size + 1 <= max_height`).
    /// A remainder that is the whole component stays as a covering tree.
    pub fn build<C: ForestCtx<Key = K>>(&mut self, ctx: &C, nodes_by_slot: &[Handle<K>]) {
        self.specs = vec![ParentSpec::Unassigned; self.specs.len()];
        self.samples.clear();
        for start in nodes_by_slot {
            if self.specs[start.slot as usize] != ParentSpec::Unassigned {
                continue;
            }
            self.build_component(ctx, start);
        }
    }

    fn build_component<C: ForestCtx<Key = K>>(&mut self, ctx: &C, start: &Handle<K>) {
        // BFS spanning tree; spec assignment doubles as the visited mark.
        self.specs[start.slot as usize] = ParentSpec::Root;
        let mut handles: Vec<Handle<K>> = vec![start.clone()];
        let mut parent: Vec<usize> = vec![0];
        let mut qi = 0;
        while qi < handles.len() {
            let x = handles[qi].clone();
            for edge in ctx.neighbors(&x) {
                let slot = edge.neighbor.slot;
                if self.specs[slot as usize] == ParentSpec::Unassigned {
                    // The discovered node's parent is x.
                    self.specs[slot as usize] = edge.to_child;
                    handles.push(edge.neighbor);
                    parent.push(qi);
                }
            }
            qi += 1;
        }

        // Bottom-up (reverse BFS order) height pass with cuts.
        let len = handles.len();
        let min_size = self.params.min_tree_size;
        let mut resid_height = vec![0usize; len];
        let mut last_cut: Option<(usize, ParentSpec)> = None;
        let mut cut_count = 0usize;
        for i in (1..len).rev() {
            if resid_height[i] == min_size {
                let slot = handles[i].slot;
                last_cut = Some((i, self.specs[slot as usize]));
                self.specs[slot as usize] = ParentSpec::Root;
                self.samples.insert(slot, handles[i].key.clone());
                cut_count += 1;
                continue;
            }
            let p = parent[i];
            resid_height[p] = resid_height[p].max(resid_height[i] + 1);
        }
        self.samples.insert(start.slot, start.key.clone());

        if cut_count > 0 {
            // Remainder = nodes still attached to the component root.
            let mut attached = vec![false; len];
            attached[0] = true;
            let mut remainder = 1usize;
            for i in 1..len {
                if self.specs[handles[i].slot as usize] != ParentSpec::Root && attached[parent[i]] {
                    attached[i] = true;
                    remainder += 1;
                }
            }
            if remainder < min_size {
                let (i, old_spec) = last_cut.expect("cut recorded");
                let slot = handles[i].slot;
                self.specs[slot as usize] = old_spec;
                self.samples.remove(&slot);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    /// Toy host: keys are integers; an edge with symbol s connects x to
    /// x + s + 1. ViaOut adds, ViaIn subtracts.
    struct ToyCtx {
        slots: HashMap<u64, u32>,
        /// adjacency: key -> (symbol, neighbor key)
        adj: HashMap<i64, Vec<(u8, i64)>>,
    }

    fn fp_of(key: i64) -> Fingerprint {
        Fingerprint(key as u64)
    }

    impl ToyCtx {
        fn new(keys: &[i64], edges: &[(i64, i64)]) -> Self {
            let slots = keys
                .iter()
                .enumerate()
                .map(|(i, &k)| (k as u64, i as u32))
                .collect();
            let mut adj: HashMap<i64, Vec<(u8, i64)>> = HashMap::new();
            for &(x, y) in edges {
                let delta = y - x;
                assert!((1..=16).contains(&delta), "edge must step by 1..=16");
                let s = (delta - 1) as u8;
                adj.entry(x).or_default().push((s, y));
                adj.entry(y).or_default().push((s, x));
            }
            Self { slots, adj }
        }

        fn handle(&self, key: i64) -> Handle<i64> {
            Handle {
                key,
                fp: fp_of(key),
                slot: self.slots[&(key as u64)],
            }
        }
    }

    impl ForestCtx for ToyCtx {
        type Key = i64;

        fn slot_of(&self, fp: Fingerprint) -> Option<u32> {
            self.slots.get(&fp.0).copied()
        }

        fn apply_spec(
            &self,
            key: &i64,
            _fp: Fingerprint,
            spec: ParentSpec,
        ) -> Option<(i64, Fingerprint)> {
            let parent = match spec {
                ParentSpec::ViaOut { symbol } => key + symbol as i64 + 1,
                ParentSpec::ViaIn { symbol } => key - symbol as i64 - 1,
                _ => return None,
            };
            Some((parent, fp_of(parent)))
        }

        fn reverse_spec(&self, _child_key: &i64, spec: ParentSpec) -> ParentSpec {
            match spec {
                ParentSpec::ViaOut { symbol } => ParentSpec::ViaIn { symbol },
                ParentSpec::ViaIn { symbol } => ParentSpec::ViaOut { symbol },
                other => other,
            }
        }

        fn hop_confirmed(
            &self,
            child: &Handle<i64>,
            _spec: ParentSpec,
            parent: &Handle<i64>,
        ) -> bool {
            self.adj
                .get(&child.key)
                .is_some_and(|list| list.iter().any(|&(_, n)| n == parent.key))
        }

        fn neighbors(&self, h: &Handle<i64>) -> Vec<NeighborEdge<i64>> {
            let Some(list) = self.adj.get(&h.key) else {
                return Vec::new();
            };
            list.iter()
                .map(|&(s, n)| {
                    let (to_parent, to_child) = if n > h.key {
                        (
                            ParentSpec::ViaOut { symbol: s },
                            ParentSpec::ViaIn { symbol: s },
                        )
                    } else {
                        (
                            ParentSpec::ViaIn { symbol: s },
                            ParentSpec::ViaOut { symbol: s },
                        )
                    };
                    NeighborEdge {
                        to_parent,
                        to_child,
                        neighbor: self.handle(n),
                    }
                })
                .collect()
        }
    }

    fn path_ctx(len: i64) -> (ToyCtx, Vec<i64>) {
        let keys: Vec<i64> = (0..len).collect();
        let edges: Vec<(i64, i64)> = (0..len - 1).map(|i| (i, i + 1)).collect();
        (ToyCtx::new(&keys, &edges), keys)
    }

    fn params(min: usize) -> ForestParams {
        ForestParams {
            min_tree_size: min,
            max_height: 3 * min,
            attach_depth: 2 * min,
        }
    }

    fn build_forest(ctx: &ToyCtx, keys: &[i64], min: usize) -> Forest<i64> {
        let mut forest = Forest::new(keys.len() as u32, params(min));
        let handles: Vec<Handle<i64>> = keys.iter().map(|&k| ctx.handle(k)).collect();
        forest.build(ctx, &handles);
        forest
    }

    #[test]
    fn singleton_component_is_covering() {
        let ctx = ToyCtx::new(&[7], &[]);
        let forest = build_forest(&ctx, &[7], 6);
        assert_eq!(forest.spec(0), ParentSpec::Root);
        assert_eq!(forest.sample(0), Some(&7));
        let scan = forest.collect_tree(&ctx, &ctx.handle(7), 10).unwrap();
        assert_eq!(scan.size(), 1);
        assert_eq!(scan.height, 0);
        assert!(!scan.truncated);
    }

    #[test]
    fn small_component_gets_one_covering_tree() {
        let (ctx, keys) = path_ctx(2);
        let forest = build_forest(&ctx, &keys, 6);
        assert_eq!(forest.root_count(), 1);
        for &k in &keys {
            let ascent = forest.verify(&ctx, &ctx.handle(k));
            assert!(ascent.is_verified(), "key {k} failed to verify");
        }
    }

    #[test]
    fn long_path_is_decomposed_within_bounds() {
        let min = 4;
        let (ctx, keys) = path_ctx(3 * min as i64);
        let forest = build_forest(&ctx, &keys, min);
        // All trees within bounds, every node verifies.
        let mut seen = 0;
        for (slot, _) in forest.samples() {
            let key = *forest.sample(slot).unwrap();
            let scan = forest
                .collect_tree(&ctx, &ctx.handle(key), usize::MAX - 1)
                .unwrap();
            assert!(scan.size() >= min || scan.size() == keys.len());
            assert!((scan.height as usize) <= forest.params().max_height);
            seen += scan.size();
        }
        assert_eq!(seen, keys.len());
        for &k in &keys {
            assert!(forest.verify(&ctx, &ctx.handle(k)).is_verified());
        }
        assert!(forest.root_count() >= 1 && forest.root_count() <= 3);
    }

    #[test]
    fn verify_refutes_unknown_keys() {
        let (ctx, keys) = path_ctx(5);
        let forest = build_forest(&ctx, &keys, 4);
        // A handle whose key disagrees with what the forest stores: fake key
        // mapped to slot 0.
        let fake = Handle {
            key: 99,
            fp: fp_of(99),
            slot: 0,
        };
        let ascent = forest.verify(&ctx, &fake);
        assert!(!ascent.is_verified());
    }

    #[test]
    fn evert_reverses_the_root_path() {
        let (ctx, keys) = path_ctx(5);
        let mut forest = build_forest(&ctx, &keys, 6);
        let before = forest.specs().to_vec();
        let (ascent, path) = forest.ascend_path(&ctx, &ctx.handle(4)).unwrap();
        assert!(ascent.is_verified());
        forest.evert(&ctx, &path);
        assert_eq!(forest.spec(ctx.handle(4).slot), ParentSpec::Root);
        // Exactly the specs on the root path are rewritten.
        let changed = forest
            .specs()
            .iter()
            .zip(&before)
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, path.len());
        // Everyone still reaches the new root once it is sampled.
        forest.samples.insert(ctx.handle(4).slot, 4);
        for &k in &keys {
            let ascent = forest.verify(&ctx, &ctx.handle(k));
            assert!(ascent.is_verified(), "key {k} lost after evert");
        }
        assert_eq!(forest.root_count(), 1);
    }

    #[test]
    fn evert_at_root_is_a_no_op() {
        let (ctx, keys) = path_ctx(3);
        let mut forest = build_forest(&ctx, &keys, 6);
        let root_slot = forest.samples().next().unwrap().0;
        let root_key = *forest.sample(root_slot).unwrap();
        let before = forest.specs().to_vec();
        let (_, path) = forest.ascend_path(&ctx, &ctx.handle(root_key)).unwrap();
        forest.evert(&ctx, &path);
        assert_eq!(forest.specs(), &before[..]);
        assert_eq!(forest.sample(root_slot), Some(&root_key));
    }

    #[test]
    fn cut_and_attach_round_trip() {
        let (ctx, keys) = path_ctx(4);
        let mut forest = build_forest(&ctx, &keys, 6);
        // Make key 0 the root so key 3 is deepest.
        let (_, path) = forest.ascend_path(&ctx, &ctx.handle(0)).unwrap();
        forest.evert(&ctx, &path);
        forest.samples.insert(ctx.handle(0).slot, 0);

        let h3 = ctx.handle(3);
        forest.cut(&h3).unwrap();
        assert_eq!(forest.spec(h3.slot), ParentSpec::Root);
        assert_eq!(forest.sample(h3.slot), Some(&3));
        assert_eq!(
            forest.cut(&h3).unwrap_err(),
            ForestError::AlreadyRoot(h3.slot)
        );

        // Re-attach 3 under 2 via the edge (2,3): spec ViaIn{0} applied to 3
        // yields 2.
        let h2 = ctx.handle(2);
        forest
            .attach(&ctx, &h3, ParentSpec::ViaIn { symbol: 0 }, &h2)
            .unwrap();
        assert!(forest.verify(&ctx, &h3).is_verified());
        assert_eq!(forest.root_count(), 1);
    }

    #[test]
    fn attach_requires_a_confirmed_edge() {
        let ctx = ToyCtx::new(&[0, 1, 5], &[(0, 1)]);
        let mut forest = build_forest(&ctx, &[0, 1, 5], 6);
        let h5 = ctx.handle(5);
        let h1 = ctx.handle(1);
        // No edge 5 -> 1 exists (and the arithmetic cannot even produce it).
        let err = forest
            .attach(&ctx, &h5, ParentSpec::ViaIn { symbol: 3 }, &h1)
            .unwrap_err();
        assert_eq!(err, ForestError::EdgeNotConfirmed);
        // Non-roots cannot attach.
        let child = if forest.spec(ctx.handle(0).slot) == ParentSpec::Root {
            ctx.handle(1)
        } else {
            ctx.handle(0)
        };
        let err = forest
            .attach(&ctx, &child, ParentSpec::ViaOut { symbol: 0 }, &h1)
            .unwrap_err();
        assert!(matches!(err, ForestError::NotARoot(_)));
    }

    #[test]
    fn collect_tree_respects_limits() {
        let (ctx, keys) = path_ctx(2);
        let forest = build_forest(&ctx, &keys, 6);
        let root_slot = forest.samples().next().unwrap().0;
        let root = ctx.handle(*forest.sample(root_slot).unwrap());
        let scan = forest.collect_tree(&ctx, &root, 1).unwrap();
        assert_eq!(scan.size(), 2);
        assert!(scan.truncated);
        let scan = forest.collect_tree(&ctx, &root, 10).unwrap();
        assert_eq!(scan.size(), 2);
        assert!(!scan.truncated);
    }

    #[test]
    fn collect_tree_reports_depths_on_a_path() {
        let (ctx, keys) = path_ctx(5);
        let mut forest = build_forest(&ctx, &keys, 6);
        let (_, path) = forest.ascend_path(&ctx, &ctx.handle(0)).unwrap();
        forest.evert(&ctx, &path);
        forest.samples.insert(ctx.handle(0).slot, 0);
        let scan = forest.collect_tree(&ctx, &ctx.handle(0), 100).unwrap();
        assert_eq!(scan.size(), 5);
        assert_eq!(scan.height, 4);
        assert_eq!(scan.deepest().0.key, 4);
    }

    #[test]
    fn evert_attach_height_stays_bounded() {
        // Two path trees bridged by one extra edge: evert the first at a
        // random node, attach it across the bridge, and measure. The
        // combined height never exceeds depth(v) + 1 + (size_u - 1).
        let mut rng = crate::rng::SplitMix64::new(4242);
        let mut exercised = 0;
        for _ in 0..200 {
            let n1 = 2 + rng.next_below(7) as i64;
            let n2 = 2 + rng.next_below(7) as i64;
            let u_key = rng.next_below(n1 as u64) as i64;
            let v_key = n1 + rng.next_below(n2 as u64) as i64;
            let keys: Vec<i64> = (0..n1 + n2).collect();
            let mut edges: Vec<(i64, i64)> = (0..n1 - 1).map(|i| (i, i + 1)).collect();
            edges.extend((n1..n1 + n2 - 1).map(|i| (i, i + 1)));
            let ctx = ToyCtx::new(&keys, &edges);
            let mut forest = build_forest(&ctx, &keys, 100); // two covering trees

            let (ascent_u, path_u) = forest.ascend_path(&ctx, &ctx.handle(u_key)).unwrap();
            let (ascent_v, path_v) = forest.ascend_path(&ctx, &ctx.handle(v_key)).unwrap();
            let (Ascent::Verified { root: ru, .. }, Ascent::Verified { root: rv, .. }) =
                (&ascent_u, &ascent_v)
            else {
                panic!("members must verify")
            };
            assert_ne!(ru.slot, rv.slot, "paths are disjoint components");
            let depth_v = path_v.len() - 1;
            let height_v_before = forest
                .collect_tree(&ctx, &ctx.handle(*forest.sample(rv.slot).unwrap()), 1000)
                .unwrap()
                .height as usize;
            // The new edge u -- v (delta is at most n1+n2-1 <= 15, so the
            // toy encoding always admits it).
            let delta = v_key - u_key;
            let mut ctx2_edges = edges.clone();
            ctx2_edges.push((u_key, v_key));
            let ctx2 = ToyCtx::new(&keys, &ctx2_edges);
            forest.evert(&ctx2, &path_u);
            forest
                .attach(
                    &ctx2,
                    &ctx2.handle(u_key),
                    ParentSpec::ViaOut {
                        symbol: (delta - 1) as u8,
                    },
                    &ctx2.handle(v_key),
                )
                .unwrap();
            let scan = forest
                .collect_tree(&ctx2, &ctx2.handle(*forest.sample(rv.slot).unwrap()), 1000)
                .unwrap();
            assert_eq!(scan.size(), (n1 + n2) as usize, "merge lost nodes");
            // New nodes enter below v; the rest of v's tree is unchanged.
            let bound = height_v_before.max(depth_v + 1 + (n1 as usize - 1));
            assert!(
                (scan.height as usize) <= bound,
                "height {} exceeds max(h_v={height_v_before}, depth(v)={depth_v} + 1 + size_u-1={})",
                scan.height,
                n1 - 1
            );
            exercised += 1;
        }
        assert_eq!(exercised, 200);
    }

    #[test]
    fn cycle_is_reported_as_corrupt() {
        let (ctx, keys) = path_ctx(3);
        let mut forest = build_forest(&ctx, &keys, 1);
        // Forge a 2-cycle between keys 0 and 1.
        forest.set_spec(ctx.handle(0).slot, ParentSpec::ViaOut { symbol: 0 });
        forest.set_spec(ctx.handle(1).slot, ParentSpec::ViaIn { symbol: 0 });
        // The lean query walk refutes; the member walk diagnoses the cycle.
        let ascent = forest.verify(&ctx, &ctx.handle(0));
        assert_eq!(ascent, Ascent::Refuted(RefuteReason::TooDeep));
        let err = forest.ascend_path(&ctx, &ctx.handle(0)).unwrap_err();
        assert!(matches!(err, ForestError::CorruptForest(_)));
    }

    #[test]
    fn undo_of_last_cut_keeps_remainder_legal() {
        // Path of 3*min+1 nodes: the bottom-up pass would leave a remainder
        // smaller than min, forcing the undo; all trees stay in bounds.
        let min = 5;
        let (ctx, keys) = path_ctx(3 * min as i64 + 1);
        let forest = build_forest(&ctx, &keys, min);
        for (slot, _) in forest.samples() {
            let key = *forest.sample(slot).unwrap();
            let scan = forest
                .collect_tree(&ctx, &ctx.handle(key), usize::MAX - 1)
                .unwrap();
            assert!(
                scan.size() >= min || scan.size() == keys.len(),
                "tree of {} nodes under min {}",
                scan.size(),
                min
            );
            assert!((scan.height as usize) <= 3 * min);
        }
    }
}
