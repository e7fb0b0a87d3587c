//! The de Bruijn graph: static construction, queries, dynamic updates and
//! the full invariant scan.
//!
//! Node identity flows fingerprint -> slot -> bit rows / parent spec. All
//! updates reduce to maintaining the covering forest next to the bit
//! matrices; queries verify membership exactly by forest ascent.

use std::collections::{HashMap, HashSet};

use crate::adjacency::{AdjacencyMatrices, Side};
use crate::alphabet::Alphabet;
use crate::error::{BuildError, GraphError};
use crate::fingerprint::{Fingerprint, KrParams};
use crate::forest::{Ascent, Forest, ForestCtx, ForestParams, Handle, NeighborEdge, ParentSpec};
use crate::kmer::{Kmer, RollDirection, MAX_K};
use crate::node_index::{DynInsert, DynamicIndex, SlotRemap, StaticIndex};
use crate::rng::SplitMix64;

/// Whether the graph supports updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphMode {
    Static,
    Dynamic,
}

/// Static-build options.
#[derive(Clone, Debug)]
pub struct BuildConfig {
    pub seed: u64,
    /// Las Vegas restart budget; exceeding it means the parameters are
    /// unsuitable (e.g. toy moduli at scale).
    pub max_restarts: u32,
    /// Store per-slot fingerprints for non-member rejection without ascent.
    pub fingerprint_check: bool,
    /// Error out on sequences shorter than k instead of skipping them.
    pub strict_short_sequences: bool,
}

impl BuildConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            max_restarts: 20,
            fingerprint_check: false,
            strict_short_sequences: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GraphStats {
    pub restarts: u32,
    pub skipped_sequences: usize,
}

/// Outcome of `add_node`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AddNodeOutcome {
    Inserted,
    AlreadyPresent,
}

pub(crate) enum IndexKind {
    Static(StaticIndex),
    Dynamic(DynamicIndex),
}

/// Full-scan report; `violations` is empty on a healthy graph.
#[derive(Clone, Debug, Default)]
pub struct InvariantReport {
    pub violations: Vec<String>,
    pub nodes: usize,
    pub trees: usize,
    pub components: usize,
    pub max_tree_height: usize,
}

impl InvariantReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Counters for the forest-repair paths taken by dynamic updates; useful
/// for telemetry and for tests asserting structural coverage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RepairStats {
    pub add_same_tree: u64,
    pub add_both_big: u64,
    pub add_both_small: u64,
    pub add_one_small_shallow: u64,
    pub add_one_small_deep: u64,
    pub remove_nontree: u64,
    pub remove_reencoded: u64,
    pub split_covering: u64,
    pub split_merged: u64,
    pub split_merged_cut: u64,
}

/// A de Bruijn graph of order k over a coded alphabet.
pub struct DeBruijnGraph {
    alphabet: Alphabet,
    k: usize,
    kr: KrParams,
    index: IndexKind,
    adj: AdjacencyMatrices,
    forest: Forest<Kmer>,
    edge_count: u64,
    stats: GraphStats,
    repairs: RepairStats,
}

impl std::fmt::Debug for DeBruijnGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeBruijnGraph")
            .field("mode", &self.mode())
            .field("k", &self.k)
            .field("nodes", &self.node_count())
            .field("edges", &self.edge_count)
            .finish()
    }
}

/// Read-only view the forest walks over.
pub(crate) struct DbgCtx<'a> {
    kr: &'a KrParams,
    index: &'a IndexKind,
    adj: &'a AdjacencyMatrices,
}

impl DbgCtx<'_> {
    fn lookup(&self, fp: Fingerprint) -> Option<u32> {
        match self.index {
            IndexKind::Static(idx) => (!idx.is_empty()).then(|| idx.slot(fp)),
            IndexKind::Dynamic(idx) => idx.lookup(fp),
        }
    }
}

impl ForestCtx for DbgCtx<'_> {
    type Key = Kmer;

    fn slot_of(&self, fp: Fingerprint) -> Option<u32> {
        self.lookup(fp)
    }

    fn apply_spec(
        &self,
        key: &Kmer,
        fp: Fingerprint,
        spec: ParentSpec,
    ) -> Option<(Kmer, Fingerprint)> {
        match spec {
            ParentSpec::ViaOut { symbol } => {
                let dropped = key.first_symbol();
                Some((
                    key.rolled(RollDirection::AppendRight, symbol),
                    self.kr
                        .fp_roll(fp, RollDirection::AppendRight, dropped, symbol),
                ))
            }
            ParentSpec::ViaIn { symbol } => {
                let dropped = key.last_symbol();
                Some((
                    key.rolled(RollDirection::PrependLeft, symbol),
                    self.kr
                        .fp_roll(fp, RollDirection::PrependLeft, dropped, symbol),
                ))
            }
            _ => None,
        }
    }

    fn reverse_spec(&self, child_key: &Kmer, spec: ParentSpec) -> ParentSpec {
        match spec {
            ParentSpec::ViaOut { .. } => ParentSpec::ViaIn {
                symbol: child_key.first_symbol(),
            },
            ParentSpec::ViaIn { .. } => ParentSpec::ViaOut {
                symbol: child_key.last_symbol(),
            },
            other => other,
        }
    }

    fn hop_confirmed(&self, child: &Handle<Kmer>, spec: ParentSpec, parent: &Handle<Kmer>) -> bool {
        match spec {
            // child --symbol--> parent is an outgoing edge of child.
            ParentSpec::ViaOut { symbol } => {
                self.adj
                    .confirmed(child.slot, symbol, parent.slot, child.key.first_symbol())
            }
            // parent --last(child)--> child is an outgoing edge of parent.
            ParentSpec::ViaIn { symbol } => {
                self.adj
                    .confirmed(parent.slot, child.key.last_symbol(), child.slot, symbol)
            }
            _ => false,
        }
    }

    fn neighbors(&self, h: &Handle<Kmer>) -> Vec<NeighborEdge<Kmer>> {
        let mut out = Vec::new();
        let first = h.key.first_symbol();
        let last = h.key.last_symbol();
        for a in self.adj.row_symbols(Side::Out, h.slot) {
            let key = h.key.rolled(RollDirection::AppendRight, a);
            let fp = self.kr.fp_roll(h.fp, RollDirection::AppendRight, first, a);
            let Some(slot) = self.lookup(fp) else {
                continue;
            };
            if slot == h.slot || !self.adj.confirmed(h.slot, a, slot, first) {
                continue;
            }
            out.push(NeighborEdge {
                to_parent: ParentSpec::ViaOut { symbol: a },
                to_child: ParentSpec::ViaIn { symbol: first },
                neighbor: Handle { key, fp, slot },
            });
        }
        for b in self.adj.row_symbols(Side::In, h.slot) {
            let key = h.key.rolled(RollDirection::PrependLeft, b);
            let fp = self.kr.fp_roll(h.fp, RollDirection::PrependLeft, last, b);
            let Some(slot) = self.lookup(fp) else {
                continue;
            };
            if slot == h.slot || !self.adj.confirmed(slot, last, h.slot, b) {
                continue;
            }
            out.push(NeighborEdge {
                to_parent: ParentSpec::ViaIn { symbol: b },
                to_child: ParentSpec::ViaOut { symbol: last },
                neighbor: Handle { key, fp, slot },
            });
        }
        out
    }
}

impl DeBruijnGraph {
    // ---------------------------------------------------------------- build

    /// Static construction from texts. Fingerprints are rolled within each
    /// sequence; a collision between distinct k-mers restarts with a fresh
    /// base (Las Vegas), then the bit rows and the covering forest are built.
    pub fn build_static<S: AsRef<str>>(
        sequences: &[S],
        k: usize,
        alphabet: &Alphabet,
        config: &BuildConfig,
    ) -> Result<DeBruijnGraph, BuildError> {
        if !(1..=MAX_K).contains(&k) {
            return Err(BuildError::KOutOfRange(k, MAX_K));
        }
        let mut coded: Vec<Vec<u8>> = Vec::with_capacity(sequences.len());
        let mut skipped = 0usize;
        for (index, seq) in sequences.iter().enumerate() {
            let codes = alphabet.encode_str(seq.as_ref())?;
            if codes.len() < k {
                if config.strict_short_sequences {
                    return Err(BuildError::SequenceTooShort {
                        index,
                        len: codes.len(),
                        k,
                    });
                }
                skipped += 1;
                continue;
            }
            coded.push(codes);
        }
        Self::build_static_from_codes(&coded, k, alphabet, config, skipped)
    }

    fn build_static_from_codes(
        coded: &[Vec<u8>],
        k: usize,
        alphabet: &Alphabet,
        config: &BuildConfig,
        skipped: usize,
    ) -> Result<DeBruijnGraph, BuildError> {
        let sigma = alphabet.sigma();
        let mut stream = SplitMix64::new(config.seed);
        for restarts in 0..=config.max_restarts {
            let kr = KrParams::draw(k, sigma, config.seed, &mut stream);
            // Distinct k-mers in first-occurrence order; collision between
            // distinct k-mers under this base forces a restart.
            let mut by_fp: HashMap<u64, Kmer> = HashMap::new();
            let mut ordered: Vec<Fingerprint> = Vec::new();
            let mut collided = false;
            'seqs: for codes in coded {
                let mut v = Kmer::from_codes(&codes[..k], alphabet)?;
                let mut f = kr.fp(&v).expect("window has length k");
                for j in k..=codes.len() {
                    match by_fp.entry(f.0) {
                        std::collections::hash_map::Entry::Occupied(e) => {
                            if *e.get() != v {
                                collided = true;
                                break 'seqs;
                            }
                        }
                        std::collections::hash_map::Entry::Vacant(e) => {
                            e.insert(v.clone());
                            ordered.push(f);
                        }
                    }
                    if j == codes.len() {
                        break;
                    }
                    let dropped = v.first_symbol();
                    v.roll_in_place(RollDirection::AppendRight, codes[j]);
                    f = kr.fp_roll(f, RollDirection::AppendRight, dropped, codes[j]);
                }
            }
            if collided {
                continue;
            }
            let index =
                match StaticIndex::build(&ordered, stream.next_u64(), config.fingerprint_check) {
                    Ok(index) => index,
                    Err(BuildError::RestartNeeded) => continue,
                    Err(other) => return Err(other),
                };
            let n = ordered.len();

            // Slot-indexed k-mers (transient), adjacency bits, edge count.
            let mut kmers_by_slot: Vec<Option<Kmer>> = vec![None; n];
            for f in &ordered {
                let kmer = by_fp.get(&f.0).expect("collected above").clone();
                kmers_by_slot[index.slot(*f) as usize] = Some(kmer);
            }
            let mut adj = AdjacencyMatrices::new(n as u32, sigma);
            let mut edge_count = 0u64;
            for codes in coded {
                let mut v = Kmer::from_codes(&codes[..k], alphabet)?;
                let mut f = kr.fp(&v).expect("window has length k");
                let mut slot = index.slot(f);
                for &added in &codes[k..] {
                    let dropped = v.first_symbol();
                    v.roll_in_place(RollDirection::AppendRight, added);
                    f = kr.fp_roll(f, RollDirection::AppendRight, dropped, added);
                    let next_slot = index.slot(f);
                    if !adj.get(Side::Out, slot, added) {
                        edge_count += 1;
                    }
                    adj.set_edge_bits(slot, added, next_slot, dropped);
                    slot = next_slot;
                }
            }

            let mut graph = DeBruijnGraph {
                alphabet: alphabet.clone(),
                k,
                kr,
                index: IndexKind::Static(index),
                adj,
                forest: Forest::new(n as u32, ForestParams::new(k, alphabet.lambda())),
                edge_count,
                stats: GraphStats {
                    restarts,
                    skipped_sequences: skipped,
                },
                repairs: RepairStats::default(),
            };
            let handles: Vec<Handle<Kmer>> = kmers_by_slot
                .iter()
                .enumerate()
                .map(|(slot, kmer)| {
                    let key = kmer.clone().expect("every slot holds a k-mer");
                    let fp = graph.kr.fp(&key).expect("stored k-mer");
                    Handle {
                        key,
                        fp,
                        slot: slot as u32,
                    }
                })
                .collect();
            let (ctx, forest) = graph.split();
            forest.build(&ctx, &handles);
            return Ok(graph);
        }
        Err(BuildError::TooManyRestarts(config.max_restarts))
    }

    /// Fresh empty dynamic graph.
    pub fn new_dynamic(k: usize, alphabet: &Alphabet, seed: u64) -> Result<Self, BuildError> {
        if !(1..=MAX_K).contains(&k) {
            return Err(BuildError::KOutOfRange(k, MAX_K));
        }
        let mut stream = SplitMix64::new(seed);
        let kr = KrParams::draw(k, alphabet.sigma(), seed, &mut stream);
        Ok(Self::empty_dynamic(alphabet.clone(), k, kr))
    }

    fn empty_dynamic(alphabet: Alphabet, k: usize, kr: KrParams) -> Self {
        let index = DynamicIndex::new();
        let capacity = index.capacity();
        let lambda = alphabet.lambda();
        let sigma = alphabet.sigma();
        DeBruijnGraph {
            alphabet,
            k,
            kr,
            index: IndexKind::Dynamic(index),
            adj: AdjacencyMatrices::new(capacity, sigma),
            forest: Forest::new(capacity, ForestParams::new(k, lambda)),
            edge_count: 0,
            stats: GraphStats::default(),
            repairs: RepairStats::default(),
        }
    }

    /// Static to dynamic conversion: rebuild by reinserting every k-mer and
    /// edge under the same fingerprint parameters.
    pub fn thaw(&self) -> Result<DeBruijnGraph, GraphError> {
        let nodes = self.reconstruct_nodes()?;
        let mut out = Self::empty_dynamic(self.alphabet.clone(), self.k, self.kr.clone());
        let mut ordered: Vec<(u32, &Kmer)> = nodes.iter().map(|(s, k)| (*s, k)).collect();
        ordered.sort_by_key(|&(s, _)| s);
        for (_, kmer) in &ordered {
            out.add_node(kmer)?;
        }
        for &(slot, kmer) in &ordered {
            for a in self.adj.row_symbols(Side::Out, slot) {
                let w = kmer.rolled(RollDirection::AppendRight, a);
                out.add_edge(kmer, &w)?;
            }
        }
        Ok(out)
    }

    // ------------------------------------------------------------ accessors

    pub fn mode(&self) -> GraphMode {
        match self.index {
            IndexKind::Static(_) => GraphMode::Static,
            IndexKind::Dynamic(_) => GraphMode::Dynamic,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn kr_params(&self) -> &KrParams {
        &self.kr
    }

    pub fn node_count(&self) -> usize {
        match &self.index {
            IndexKind::Static(idx) => idx.len(),
            IndexKind::Dynamic(idx) => idx.len(),
        }
    }

    pub fn edge_count(&self) -> u64 {
        self.edge_count
    }

    pub fn tree_count(&self) -> usize {
        self.forest.root_count()
    }

    pub fn stats(&self) -> GraphStats {
        self.stats
    }

    pub fn repair_stats(&self) -> RepairStats {
        self.repairs
    }

    pub fn capacity(&self) -> u32 {
        self.adj.capacity()
    }

    /// Dynamic-index rebuild accounting (0 for static graphs).
    pub fn rebuild_touched(&self) -> u64 {
        match &self.index {
            IndexKind::Static(_) => 0,
            IndexKind::Dynamic(idx) => idx.rebuild_touched(),
        }
    }

    pub fn max_assigned_slot(&self) -> Option<u32> {
        match &self.index {
            IndexKind::Static(idx) => idx.len().checked_sub(1).map(|s| s as u32),
            IndexKind::Dynamic(idx) => idx.max_assigned_slot(),
        }
    }

    pub fn encode_kmer(&self, text: &str) -> Result<Kmer, GraphError> {
        Ok(Kmer::encode(text, &self.alphabet, self.k)?)
    }

    /// Meaningful adjacency payload: 2 * capacity * sigma bits.
    pub fn adjacency_payload_bits(&self) -> u64 {
        self.adj.payload_bits()
    }

    /// Up to `count` stored k-mers, deterministically sampled by walking
    /// the forest (used by benchmarks and scaling tests).
    pub fn sample_node_kmers(&self, count: usize, seed: u64) -> Vec<Kmer> {
        let nodes = self
            .reconstruct_nodes()
            .expect("sampling requires a healthy graph");
        if nodes.is_empty() {
            return Vec::new();
        }
        let mut rng = SplitMix64::new(seed);
        (0..count)
            .map(|_| nodes[rng.next_below(nodes.len() as u64) as usize].1.clone())
            .collect()
    }

    pub(crate) fn ctx(&self) -> DbgCtx<'_> {
        DbgCtx {
            kr: &self.kr,
            index: &self.index,
            adj: &self.adj,
        }
    }

    fn split(&mut self) -> (DbgCtx<'_>, &mut Forest<Kmer>) {
        (
            DbgCtx {
                kr: &self.kr,
                index: &self.index,
                adj: &self.adj,
            },
            &mut self.forest,
        )
    }

    fn handle_of(&self, v: &Kmer) -> Option<Handle<Kmer>> {
        let fp = self.kr.fp(v).ok()?;
        let slot = self.ctx().lookup(fp)?;
        Some(Handle {
            key: v.clone(),
            fp,
            slot,
        })
    }

    /// Handle for a k-mer verified to be stored; NodeAbsent otherwise.
    fn member_handle(&self, v: &Kmer) -> Result<Handle<Kmer>, GraphError> {
        let absent = || GraphError::NodeAbsent(v.decode(&self.alphabet));
        let h = self.handle_of(v).ok_or_else(absent)?;
        if self.forest.verify(&self.ctx(), &h).is_verified() {
            Ok(h)
        } else {
            Err(absent())
        }
    }

    // -------------------------------------------------------------- queries

    /// Exact membership: slot lookup plus forest ascent.
    pub fn is_node(&self, v: &Kmer) -> bool {
        assert_eq!(v.k(), self.k, "k-mer length must match the graph order");
        let Some(h) = self.handle_of(v) else {
            return false;
        };
        if let IndexKind::Static(idx) = &self.index {
            if idx.known_member(h.fp) == Some(false) {
                return false;
            }
        }
        self.forest.verify(&self.ctx(), &h).is_verified()
    }

    /// Edge test from the bit rows. Exact under the contract that at least
    /// one endpoint is stored; `NotChainable` when the k-mers do not
    /// overlap by k-1 symbols.
    pub fn has_edge(&self, u: &Kmer, v: &Kmer) -> Result<bool, GraphError> {
        if !u.chainable_to(v) {
            return Err(GraphError::NotChainable);
        }
        let (Some(hu), Some(hv)) = (self.handle_of(u), self.handle_of(v)) else {
            return Ok(false);
        };
        Ok(self
            .adj
            .confirmed(hu.slot, v.last_symbol(), hv.slot, u.first_symbol()))
    }

    /// Outgoing edges of a stored k-mer as (symbol, target). Callers verify
    /// membership first; on unverified inputs the row is arbitrary.
    pub fn successors(&self, v: &Kmer) -> Vec<(u8, Kmer)> {
        let Some(h) = self.handle_of(v) else {
            return Vec::new();
        };
        self.adj
            .row_symbols(Side::Out, h.slot)
            .into_iter()
            .map(|a| (a, v.rolled(RollDirection::AppendRight, a)))
            .collect()
    }

    /// Incoming edges of a stored k-mer as (symbol, source).
    pub fn predecessors(&self, v: &Kmer) -> Vec<(u8, Kmer)> {
        let Some(h) = self.handle_of(v) else {
            return Vec::new();
        };
        self.adj
            .row_symbols(Side::In, h.slot)
            .into_iter()
            .map(|b| (b, v.rolled(RollDirection::PrependLeft, b)))
            .collect()
    }

    pub fn successors_checked(&self, v: &Kmer) -> Option<Vec<(u8, Kmer)>> {
        self.is_node(v).then(|| self.successors(v))
    }

    pub fn predecessors_checked(&self, v: &Kmer) -> Option<Vec<(u8, Kmer)>> {
        self.is_node(v).then(|| self.predecessors(v))
    }

    // -------------------------------------------------------------- updates

    fn require_dynamic(&mut self) -> Result<&mut DynamicIndex, GraphError> {
        match &mut self.index {
            IndexKind::Dynamic(idx) => Ok(idx),
            IndexKind::Static(_) => Err(GraphError::NotDynamic),
        }
    }

    fn apply_remap(&mut self, remap: &SlotRemap) {
        self.adj = self.adj.remapped(remap);
        self.forest = self.forest.remapped(remap);
    }

    /// Insert an isolated node: slot allocation plus a singleton covering
    /// tree. Idempotent for already-present k-mers. A fingerprint match
    /// against a *different* stored k-mer is detected by ascent and
    /// reported as `DistinctKmerCollision`.
    pub fn add_node(&mut self, v: &Kmer) -> Result<AddNodeOutcome, GraphError> {
        assert_eq!(v.k(), self.k, "k-mer length must match the graph order");
        let fp = self.kr.fp(v)?;
        self.require_dynamic()?;
        // Peek first: a present fingerprint is either this k-mer (no-op) or
        // a genuine collision, and must not disturb the index.
        if let IndexKind::Dynamic(idx) = &self.index {
            if let Some(slot) = idx.lookup(fp) {
                let h = Handle {
                    key: v.clone(),
                    fp,
                    slot,
                };
                return if self.forest.verify(&self.ctx(), &h).is_verified() {
                    Ok(AddNodeOutcome::AlreadyPresent)
                } else {
                    Err(GraphError::DistinctKmerCollision(v.decode(&self.alphabet)))
                };
            }
        }
        let idx = self.require_dynamic()?;
        let slot = match idx.insert(fp) {
            DynInsert::Inserted { slot, remap } => {
                if let Some(remap) = remap {
                    self.apply_remap(&remap);
                }
                slot
            }
            DynInsert::AlreadyPresent { .. } => unreachable!("checked above"),
        };
        debug_assert!(self.adj.row_is_empty(slot));
        self.forest.add_singleton(&Handle {
            key: v.clone(),
            fp,
            slot,
        });
        Ok(AddNodeOutcome::Inserted)
    }

    /// Insert the edge u -> v (both endpoints present, chainable), then
    /// repair the forest:
    /// - same tree: nothing to do;
    /// - both trees big: nothing to do;
    /// - both small: re-root u's tree at u and hang it under v;
    /// - one small: hang it under the big tree's endpoint if that endpoint
    ///   is shallow enough, otherwise also cut the big tree a fixed number
    ///   of steps above the endpoint so heights stay bounded.
    pub fn add_edge(&mut self, u: &Kmer, v: &Kmer) -> Result<(), GraphError> {
        if !u.chainable_to(v) {
            return Err(GraphError::NotChainable);
        }
        self.require_dynamic()?;
        let hu = self.member_handle(u)?;
        let hv = self.member_handle(v)?;
        let a = v.last_symbol();
        let b = u.first_symbol();
        if !self.adj.get(Side::Out, hu.slot, a) {
            self.edge_count += 1;
        }
        self.adj.set_edge_bits(hu.slot, a, hv.slot, b);
        if hu.slot == hv.slot {
            self.repairs.add_same_tree += 1;
            return Ok(()); // self-loop, never a tree edge
        }

        let params = self.forest.params();
        let (ctx, forest) = self.split();
        let (ascent_u, path_u) = forest.ascend_path(&ctx, &hu).map_err(GraphError::Forest)?;
        let (ascent_v, path_v) = forest.ascend_path(&ctx, &hv).map_err(GraphError::Forest)?;
        let (root_u, root_v) = match (&ascent_u, &ascent_v) {
            (Ascent::Verified { root: ru, .. }, Ascent::Verified { root: rv, .. }) => {
                (ru.clone(), rv.clone())
            }
            _ => unreachable!("endpoints verified above"),
        };
        if root_u.slot == root_v.slot {
            self.repairs.add_same_tree += 1;
            return Ok(());
        }
        let small_u = forest
            .tree_is_small(&ctx, &root_u)
            .map_err(GraphError::Forest)?;
        let small_v = forest
            .tree_is_small(&ctx, &root_v)
            .map_err(GraphError::Forest)?;
        match (small_u, small_v) {
            (false, false) => {
                self.repairs.add_both_big += 1;
                Ok(())
            }
            (true, true) => {
                forest.evert(&ctx, &path_u);
                forest
                    .attach(&ctx, &hu, ParentSpec::ViaOut { symbol: a }, &hv)
                    .map_err(GraphError::Forest)?;
                self.repairs.add_both_small += 1;
                Ok(())
            }
            (small_is_u, _) => {
                let (small, small_path, big, big_path, spec) = if small_is_u {
                    (&hu, &path_u, &hv, &path_v, ParentSpec::ViaOut { symbol: a })
                } else {
                    (&hv, &path_v, &hu, &path_u, ParentSpec::ViaIn { symbol: b })
                };
                let big_depth = big_path.len() - 1;
                forest.evert(&ctx, small_path);
                forest
                    .attach(&ctx, small, spec, big)
                    .map_err(GraphError::Forest)?;
                if big_depth >= params.attach_depth {
                    let w = &big_path[params.min_tree_size].0;
                    forest.cut(w).map_err(GraphError::Forest)?;
                    self.repairs.add_one_small_deep += 1;
                } else {
                    self.repairs.add_one_small_shallow += 1;
                }
                Ok(())
            }
        }
    }

    /// Remove the edge u -> v. If it was a tree edge, either re-encode the
    /// parent pointer through the surviving antiparallel direction, or split
    /// the tree and restore the size invariant on both sides.
    pub fn remove_edge(&mut self, u: &Kmer, v: &Kmer) -> Result<(), GraphError> {
        if !u.chainable_to(v) {
            return Err(GraphError::NotChainable);
        }
        self.require_dynamic()?;
        let hu = self.member_handle(u)?;
        let hv = self.member_handle(v)?;
        let a = v.last_symbol();
        let b = u.first_symbol();
        if !self.adj.confirmed(hu.slot, a, hv.slot, b) {
            return Err(GraphError::EdgeAbsent(
                u.decode(&self.alphabet),
                v.decode(&self.alphabet),
            ));
        }
        self.adj.clear_edge_bits(hu.slot, a, hv.slot, b);
        self.edge_count -= 1;
        if hu.slot == hv.slot {
            return Ok(());
        }

        // Was e the parent edge of either endpoint? (Chainability pins the
        // rolled parent, so comparing the spec value suffices.)
        let u_points = self.forest.spec(hu.slot) == (ParentSpec::ViaOut { symbol: a });
        let v_points = self.forest.spec(hv.slot) == (ParentSpec::ViaIn { symbol: b });
        debug_assert!(!(u_points && v_points), "parent cycle");
        let child_is_u = if u_points {
            true
        } else if v_points {
            false
        } else {
            self.repairs.remove_nontree += 1;
            return Ok(()); // not a tree edge
        };

        // The antiparallel direction v -> u may survive; re-encode and keep
        // the tree intact.
        if v.chainable_to(u)
            && self
                .adj
                .confirmed(hv.slot, u.last_symbol(), hu.slot, v.first_symbol())
        {
            let (slot, spec) = if child_is_u {
                (
                    hu.slot,
                    ParentSpec::ViaIn {
                        symbol: v.first_symbol(),
                    },
                )
            } else {
                (
                    hv.slot,
                    ParentSpec::ViaOut {
                        symbol: u.last_symbol(),
                    },
                )
            };
            self.forest.set_spec(slot, spec);
            self.repairs.remove_reencoded += 1;
            return Ok(());
        }

        let (child, parent) = if child_is_u { (hu, hv) } else { (hv, hu) };
        self.forest.cut(&child).map_err(GraphError::Forest)?;
        self.repair_split_side(child)?;
        self.repair_split_side(parent)?;
        Ok(())
    }

    /// After a tree split: if `rep`'s tree is small, either certify it as a
    /// covering component or merge it into a neighboring tree, cutting the
    /// merged tree back into bounds when it grew too tall.
    fn repair_split_side(&mut self, rep: Handle<Kmer>) -> Result<(), GraphError> {
        let params = self.forest.params();
        let (ctx, forest) = self.split();
        let (ascent, _) = forest.ascend_path(&ctx, &rep).map_err(GraphError::Forest)?;
        let Ascent::Verified { root, .. } = ascent else {
            unreachable!("split sides hold verified members");
        };
        if !forest
            .tree_is_small(&ctx, &root)
            .map_err(GraphError::Forest)?
        {
            return Ok(());
        }
        let scan = forest
            .collect_tree(&ctx, &root, params.min_tree_size)
            .map_err(GraphError::Forest)?;
        debug_assert!(!scan.truncated);
        let tree_slots: HashSet<u32> = scan.nodes.iter().map(|(h, _)| h.slot).collect();
        let mut escape: Option<(Handle<Kmer>, NeighborEdge<Kmer>)> = None;
        'search: for (x, _) in &scan.nodes {
            for edge in ctx.neighbors(x) {
                if !tree_slots.contains(&edge.neighbor.slot) {
                    escape = Some((x.clone(), edge));
                    break 'search;
                }
            }
        }
        let Some((x, edge)) = escape else {
            // Small covering component; its root is already sampled.
            self.repairs.split_covering += 1;
            return Ok(());
        };
        let (x_ascent, x_path) = forest.ascend_path(&ctx, &x).map_err(GraphError::Forest)?;
        debug_assert!(x_ascent.is_verified());
        forest.evert(&ctx, &x_path);
        let x_scan = forest
            .collect_tree(&ctx, &x, params.min_tree_size)
            .map_err(GraphError::Forest)?;
        let (deepest, deepest_depth) = x_scan.deepest().clone();
        let (y_ascent, y_path) = forest
            .ascend_path(&ctx, &edge.neighbor)
            .map_err(GraphError::Forest)?;
        debug_assert!(y_ascent.is_verified());
        let y_depth = y_path.len() - 1;
        forest
            .attach(&ctx, &x, edge.to_parent, &edge.neighbor)
            .map_err(GraphError::Forest)?;
        if y_depth + 1 + deepest_depth as usize > params.max_height {
            // The deepest merged node sits in the former small tree; walk a
            // fixed number of steps up from it and cut there.
            let (_, d_path) = forest
                .ascend_path(&ctx, &deepest)
                .map_err(GraphError::Forest)?;
            debug_assert!(d_path.len() > params.attach_depth);
            let w = d_path[params.attach_depth].0.clone();
            forest.cut(&w).map_err(GraphError::Forest)?;
            self.repairs.split_merged_cut += 1;
        } else {
            self.repairs.split_merged += 1;
        }
        Ok(())
    }

    /// Remove a node: strip its incident edges one by one, then free the
    /// slot and its singleton tree.
    pub fn remove_node(&mut self, v: &Kmer) -> Result<(), GraphError> {
        self.require_dynamic()?;
        let h = self.member_handle(v)?;
        for a in self.adj.row_symbols(Side::Out, h.slot) {
            let w = v.rolled(RollDirection::AppendRight, a);
            self.remove_edge(v, &w)?;
        }
        for b in self.adj.row_symbols(Side::In, h.slot) {
            let u = v.rolled(RollDirection::PrependLeft, b);
            self.remove_edge(&u, v)?;
        }
        debug_assert!(self.adj.row_is_empty(h.slot));
        debug_assert_eq!(self.forest.spec(h.slot), ParentSpec::Root);
        self.forest.remove_slot(h.slot);
        let idx = self.require_dynamic()?;
        let remap = idx.remove(h.fp).expect("verified member");
        if let Some(remap) = remap {
            self.apply_remap(&remap);
        }
        Ok(())
    }

    // ------------------------------------------------------------ integrity

    /// Reconstruct every stored k-mer by walking the trees down from their
    /// sampled roots. Fails if the forest does not cover the slot set.
    pub(crate) fn reconstruct_nodes(&self) -> Result<Vec<(u32, Kmer)>, GraphError> {
        let report = self.scan();
        if !report.0.violations.is_empty() {
            return Err(GraphError::Forest(
                crate::error::ForestError::CorruptForest(report.0.violations.join("; ")),
            ));
        }
        Ok(report.1)
    }

    /// Full structural scan; report-only.
    pub fn check_invariants(&self) -> InvariantReport {
        self.scan().0
    }

    fn assigned_slots(&self) -> Vec<(u32, u64)> {
        match &self.index {
            IndexKind::Static(idx) => {
                // Static mode has no reverse map; slots are 0..n and the
                // fingerprint column is filled in from the scan.
                (0..idx.len() as u32).map(|s| (s, 0)).collect()
            }
            IndexKind::Dynamic(idx) => idx.entries_by_slot(),
        }
    }

    fn scan(&self) -> (InvariantReport, Vec<(u32, Kmer)>) {
        let mut report = InvariantReport::default();
        let params = self.forest.params();
        let ctx = self.ctx();
        let assigned = self.assigned_slots();
        let assigned_set: HashSet<u32> = assigned.iter().map(|&(s, _)| s).collect();
        report.nodes = assigned.len();
        report.trees = self.forest.root_count();

        // Samples sit exactly on root slots.
        for (slot, _) in self.forest.samples() {
            if self.forest.spec(slot) != ParentSpec::Root {
                report
                    .violations
                    .push(format!("sample on non-root slot {slot}"));
            }
        }
        for slot in 0..self.forest.capacity() {
            let spec = self.forest.spec(slot);
            let is_assigned = assigned_set.contains(&slot);
            if is_assigned && spec == ParentSpec::Unassigned {
                report
                    .violations
                    .push(format!("assigned slot {slot} has no parent spec"));
            }
            if !is_assigned {
                if spec != ParentSpec::Unassigned {
                    report
                        .violations
                        .push(format!("unassigned slot {slot} has spec {spec:?}"));
                }
                if !self.adj.row_is_empty(slot) {
                    report
                        .violations
                        .push(format!("unassigned slot {slot} has adjacency bits"));
                }
            }
            if spec == ParentSpec::Root && self.forest.sample(slot).is_none() {
                report
                    .violations
                    .push(format!("root slot {slot} unsampled"));
            }
        }

        // Walk every tree top-down, reconstructing plain k-mers.
        let mut kmer_of: HashMap<u32, Kmer> = HashMap::new();
        let mut tree_of: HashMap<u32, u32> = HashMap::new();
        let mut tree_meta: Vec<(u32, usize, usize)> = Vec::new(); // root, size, height
        for (slot, sample) in self.forest.samples() {
            let Ok(fp) = self.kr.fp(sample) else {
                report
                    .violations
                    .push(format!("root sample at slot {slot} has wrong length"));
                continue;
            };
            if ctx.lookup(fp) != Some(slot) {
                report.violations.push(format!(
                    "root sample at slot {slot} does not map back to its slot"
                ));
                continue;
            }
            let root = Handle {
                key: sample.clone(),
                fp,
                slot,
            };
            let scan = match self.forest.collect_tree(&ctx, &root, usize::MAX - 1) {
                Ok(scan) => scan,
                Err(e) => {
                    report.violations.push(format!("tree at slot {slot}: {e}"));
                    continue;
                }
            };
            report.max_tree_height = report.max_tree_height.max(scan.height as usize);
            if scan.height as usize > params.max_height {
                report.violations.push(format!(
                    "tree at slot {slot} has height {} > {}",
                    scan.height, params.max_height
                ));
            }
            for (h, _) in &scan.nodes {
                if kmer_of.insert(h.slot, h.key.clone()).is_some() {
                    report
                        .violations
                        .push(format!("slot {} visited by two trees", h.slot));
                }
                tree_of.insert(h.slot, slot);
            }
            tree_meta.push((slot, scan.size(), scan.height as usize));
        }
        for &(slot, _) in &assigned {
            if !kmer_of.contains_key(&slot) {
                report
                    .violations
                    .push(format!("assigned slot {slot} unreachable from any root"));
            }
        }

        // Edge bits: every set bit pairs with its mirror and lands on a
        // reconstructed node of the expected identity.
        let mut undirected: Vec<(u32, u32)> = Vec::new();
        for (&slot, kmer) in &kmer_of {
            for a in self.adj.row_symbols(Side::Out, slot) {
                let w = kmer.rolled(RollDirection::AppendRight, a);
                let Ok(wfp) = self.kr.fp(&w) else { continue };
                match ctx.lookup(wfp) {
                    Some(wslot) => {
                        if !self.adj.confirmed(slot, a, wslot, kmer.first_symbol()) {
                            report
                                .violations
                                .push(format!("half edge: OUT[{slot}][{a}] without IN mirror"));
                        } else {
                            undirected.push((slot.min(wslot), slot.max(wslot)));
                            if let Some(stored) = kmer_of.get(&wslot) {
                                if *stored != w {
                                    report.violations.push(format!(
                                        "edge from slot {slot} lands on mismatched slot {wslot}"
                                    ));
                                }
                            }
                        }
                    }
                    None => report
                        .violations
                        .push(format!("OUT[{slot}][{a}] points outside the index")),
                }
            }
        }
        let bit_edges = self.adj.count_out_bits();
        if bit_edges != self.edge_count {
            report.violations.push(format!(
                "edge count {} disagrees with OUT bits {}",
                self.edge_count, bit_edges
            ));
        }

        // Components via union-find over tree roots.
        let mut uf: HashMap<u32, u32> = tree_meta.iter().map(|&(r, _, _)| (r, r)).collect();
        fn find(uf: &mut HashMap<u32, u32>, mut x: u32) -> u32 {
            while uf[&x] != x {
                let up = uf[&uf[&x]];
                uf.insert(x, up);
                x = up;
            }
            x
        }
        for &(x, y) in &undirected {
            let (Some(&rx), Some(&ry)) = (tree_of.get(&x), tree_of.get(&y)) else {
                continue;
            };
            let (fx, fy) = (find(&mut uf, rx), find(&mut uf, ry));
            if fx != fy {
                uf.insert(fx, fy);
            }
        }
        let components: HashSet<u32> = tree_meta
            .iter()
            .map(|&(r, _, _)| find(&mut uf, r))
            .collect();
        report.components = components.len();

        // Tree size invariant: small trees must cover their component.
        for &(root, size, _) in &tree_meta {
            if size < params.min_tree_size {
                let class = find(&mut uf, root);
                let component_size: usize = tree_meta
                    .iter()
                    .filter(|&&(r, _, _)| find(&mut uf, r) == class)
                    .map(|&(_, s, _)| s)
                    .sum();
                if component_size != size {
                    report.violations.push(format!(
                        "tree at slot {root} has size {size} < {} without covering its component",
                        params.min_tree_size
                    ));
                }
            }
        }

        // Root budget: at most n / min_size + one per component.
        if let Some(quota) = report.nodes.checked_div(params.min_tree_size) {
            let budget = quota + report.components;
            if report.trees > budget {
                report
                    .violations
                    .push(format!("{} roots exceed budget {budget}", report.trees));
            }
        }

        // Index range (dynamic).
        if let IndexKind::Dynamic(idx) = &self.index {
            let count = idx.len() as u32;
            if count > 0 && idx.capacity() > 3 * count {
                report.violations.push(format!(
                    "capacity {} exceeds 3x count {count}",
                    idx.capacity()
                ));
            }
        }

        let mut nodes: Vec<(u32, Kmer)> = kmer_of.into_iter().collect();
        nodes.sort_by_key(|&(s, _)| s);
        (report, nodes)
    }

    // ------------------------------------------------------- batch queries

    /// Membership for a batch of k-mers; sequential reference path.
    pub fn contains_batch_serial(&self, kmers: &[Kmer]) -> Vec<bool> {
        kmers.iter().map(|v| self.is_node(v)).collect()
    }

    /// Membership for a batch of k-mers; data-parallel when the `parallel`
    /// feature is enabled, otherwise identical to the serial path.
    #[cfg(feature = "parallel")]
    pub fn contains_batch(&self, kmers: &[Kmer]) -> Vec<bool> {
        use rayon::prelude::*;
        kmers.par_iter().map(|v| self.is_node(v)).collect()
    }

    #[cfg(not(feature = "parallel"))]
    pub fn contains_batch(&self, kmers: &[Kmer]) -> Vec<bool> {
        self.contains_batch_serial(kmers)
    }

    // ------------------------------------------------- snapshot plumbing

    pub(crate) fn index_kind(&self) -> &IndexKind {
        &self.index
    }

    pub(crate) fn adjacency(&self) -> &AdjacencyMatrices {
        &self.adj
    }

    pub(crate) fn forest_ref(&self) -> &Forest<Kmer> {
        &self.forest
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        alphabet: Alphabet,
        k: usize,
        kr: KrParams,
        index: IndexKind,
        adj: AdjacencyMatrices,
        forest: Forest<Kmer>,
        edge_count: u64,
    ) -> Self {
        DeBruijnGraph {
            alphabet,
            k,
            kr,
            index,
            adj,
            forest,
            edge_count,
            stats: GraphStats::default(),
            repairs: RepairStats::default(),
        }
    }
}
