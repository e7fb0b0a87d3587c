//! Fixed-length jumbled pattern matching: the graph machinery keyed on
//! character histograms instead of k-mers.
//!
//! Nodes are the distinct histograms of the text's length-k windows; two
//! nodes are adjacent when they differ by replacing one symbol. No bit
//! matrices are stored: the parent specs (one symbol pair each) carry the
//! connectivity, and membership verification walks swap specs applying
//! O(1) fingerprint replacements. The index keeps the fingerprint of each
//! slot's histogram; without edge bits that column is what anchors every
//! hop of a verification walk to a stored node, which keeps absent
//! patterns from riding a true chain to a root sample.

use std::collections::HashMap;

use crate::alphabet::Alphabet;
use crate::error::{BuildError, GraphError, KmerError};
use crate::fingerprint::{Fingerprint, KrParams};
use crate::forest::{Forest, ForestCtx, ForestParams, Handle, NeighborEdge, ParentSpec};
use crate::graph::GraphStats;
use crate::kmer::{Histogram, MAX_K};
use crate::node_index::StaticIndex;
use crate::rng::SplitMix64;

/// Static jumbled-match index over one text.
#[derive(Debug)]
pub struct JumbledIndex {
    alphabet: Alphabet,
    k: usize,
    kr: KrParams,
    index: StaticIndex,
    forest: Forest<Histogram>,
    stats: GraphStats,
}

pub(crate) struct JumbledCtx<'a> {
    kr: &'a KrParams,
    index: &'a StaticIndex,
    /// Slot-indexed histograms, present only during construction; with the
    /// table the neighbor enumeration is exact, without it candidates are
    /// filtered by the spec match alone.
    table: Option<&'a [Histogram]>,
}

impl ForestCtx for JumbledCtx<'_> {
    type Key = Histogram;

    fn slot_of(&self, fp: Fingerprint) -> Option<u32> {
        if self.index.is_empty() {
            return None;
        }
        // Reject fingerprints that disagree with the slot's stored one:
        // without edge bits this is what keeps a swap walk on true nodes
        // instead of wandering from an absent histogram onto a stored one.
        match self.index.known_member(fp) {
            Some(false) => None,
            _ => Some(self.index.slot(fp)),
        }
    }

    fn apply_spec(
        &self,
        key: &Histogram,
        fp: Fingerprint,
        spec: ParentSpec,
    ) -> Option<(Histogram, Fingerprint)> {
        match spec {
            ParentSpec::ViaSwap { removed, added } => {
                let parent = key.replaced(removed, added)?;
                Some((parent, self.kr.hfp_replace(fp, removed, added)))
            }
            _ => None,
        }
    }

    fn reverse_spec(&self, _child_key: &Histogram, spec: ParentSpec) -> ParentSpec {
        match spec {
            ParentSpec::ViaSwap { removed, added } => ParentSpec::ViaSwap {
                removed: added,
                added: removed,
            },
            other => other,
        }
    }

    fn hop_confirmed(
        &self,
        _child: &Handle<Histogram>,
        _spec: ParentSpec,
        _parent: &Handle<Histogram>,
    ) -> bool {
        // Realizability was checked by apply_spec; there are no edge bits.
        true
    }

    fn neighbors(&self, h: &Handle<Histogram>) -> Vec<NeighborEdge<Histogram>> {
        let sigma = h.key.sigma();
        let mut out = Vec::new();
        for removed in 0..sigma as u8 {
            if h.key.count(removed) == 0 {
                continue;
            }
            for added in 0..sigma as u8 {
                if added == removed {
                    continue;
                }
                let neighbor = h.key.replaced(removed, added).expect("count checked");
                let fp = self.kr.hfp_replace(h.fp, removed, added);
                let Some(slot) = self.slot_of(fp) else {
                    continue;
                };
                if let Some(table) = self.table {
                    if table[slot as usize] != neighbor {
                        continue;
                    }
                }
                out.push(NeighborEdge {
                    to_parent: ParentSpec::ViaSwap { removed, added },
                    to_child: ParentSpec::ViaSwap {
                        removed: added,
                        added: removed,
                    },
                    neighbor: Handle {
                        key: neighbor,
                        fp,
                        slot,
                    },
                });
            }
        }
        out
    }
}

impl JumbledIndex {
    /// Build over the length-k windows of `text`, sliding the histogram and
    /// its fingerprint by one replacement per step; Las Vegas restarts on a
    /// fingerprint collision between distinct histograms.
    pub fn build(
        text: &str,
        k: usize,
        alphabet: &Alphabet,
        seed: u64,
    ) -> Result<JumbledIndex, BuildError> {
        Self::build_with_restarts(text, k, alphabet, seed, 20)
    }

    pub fn build_with_restarts(
        text: &str,
        k: usize,
        alphabet: &Alphabet,
        seed: u64,
        max_restarts: u32,
    ) -> Result<JumbledIndex, BuildError> {
        if !(1..=MAX_K).contains(&k) {
            return Err(BuildError::KOutOfRange(k, MAX_K));
        }
        let codes = alphabet.encode_str(text)?;
        if codes.len() < k {
            return Err(BuildError::PatternLongerThanText {
                k,
                len: codes.len(),
            });
        }
        let sigma = alphabet.sigma();
        let mut stream = SplitMix64::new(seed);
        for restarts in 0..=max_restarts {
            let kr = KrParams::draw(k, sigma, seed, &mut stream);
            let mut by_fp: HashMap<u64, Histogram> = HashMap::new();
            let mut ordered: Vec<Fingerprint> = Vec::new();
            let mut collided = false;

            let mut counts = vec![0u16; sigma as usize];
            for &c in &codes[..k] {
                counts[c as usize] += 1;
            }
            let mut hist = Histogram::new(counts);
            let mut fp = kr.hfp(&hist);
            for i in 0..=codes.len() - k {
                match by_fp.entry(fp.0) {
                    std::collections::hash_map::Entry::Occupied(e) => {
                        if *e.get() != hist {
                            collided = true;
                            break;
                        }
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(hist.clone());
                        ordered.push(fp);
                    }
                }
                if i + k == codes.len() {
                    break;
                }
                let removed = codes[i];
                let added = codes[i + k];
                hist = hist.replaced(removed, added).expect("window symbol");
                fp = kr.hfp_replace(fp, removed, added);
            }
            if collided {
                continue;
            }
            let index = match StaticIndex::build(&ordered, stream.next_u64(), true) {
                Ok(index) => index,
                Err(BuildError::RestartNeeded) => continue,
                Err(other) => return Err(other),
            };
            let n = ordered.len();
            let mut table: Vec<Histogram> = vec![Histogram::new(vec![0; sigma as usize]); n];
            for f in &ordered {
                table[index.slot(*f) as usize] = by_fp.get(&f.0).expect("collected").clone();
            }
            let mut forest = Forest::new(n as u32, ForestParams::new(k, alphabet.lambda()));
            let handles: Vec<Handle<Histogram>> = table
                .iter()
                .enumerate()
                .map(|(slot, hist)| Handle {
                    key: hist.clone(),
                    fp: kr.hfp(hist),
                    slot: slot as u32,
                })
                .collect();
            {
                let ctx = JumbledCtx {
                    kr: &kr,
                    index: &index,
                    table: Some(&table),
                };
                forest.build(&ctx, &handles);
            }
            return Ok(JumbledIndex {
                alphabet: alphabet.clone(),
                k,
                kr,
                index,
                forest,
                stats: GraphStats {
                    restarts,
                    skipped_sequences: 0,
                },
            });
        }
        Err(BuildError::TooManyRestarts(max_restarts))
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
        self.index.len()
    }

    pub fn tree_count(&self) -> usize {
        self.forest.root_count()
    }

    pub fn stats(&self) -> GraphStats {
        self.stats
    }

    pub(crate) fn ctx(&self) -> JumbledCtx<'_> {
        JumbledCtx {
            kr: &self.kr,
            index: &self.index,
            table: None,
        }
    }

    /// Exact existence query: does any window of the text have the same
    /// symbol multiset as `pattern`?
    pub fn has_match(&self, pattern: &str) -> Result<bool, GraphError> {
        let codes = self
            .alphabet
            .encode_str(pattern)
            .map_err(GraphError::Kmer)?;
        if codes.len() != self.k {
            return Err(GraphError::Kmer(KmerError::LengthMismatch {
                expected: self.k,
                got: codes.len(),
            }));
        }
        let mut counts = vec![0u16; self.alphabet.sigma() as usize];
        for &c in &codes {
            counts[c as usize] += 1;
        }
        Ok(self.has_match_histogram(&Histogram::new(counts)))
    }

    pub fn has_match_histogram(&self, hist: &Histogram) -> bool {
        let ctx = self.ctx();
        let fp = self.kr.hfp(hist);
        // The entry lookup goes through the checked path: a pattern whose
        // fingerprint disagrees with the slot's stored one is absent.
        let Some(slot) = ctx.slot_of(fp) else {
            return false;
        };
        let handle = Handle {
            key: hist.clone(),
            fp,
            slot,
        };
        self.forest.verify(&ctx, &handle).is_verified()
    }

    /// Batch existence; sequential reference path.
    pub fn match_batch_serial(&self, patterns: &[Histogram]) -> Vec<bool> {
        patterns
            .iter()
            .map(|h| self.has_match_histogram(h))
            .collect()
    }

    /// Batch existence; data-parallel when the `parallel` feature is on.
    #[cfg(feature = "parallel")]
    pub fn match_batch(&self, patterns: &[Histogram]) -> Vec<bool> {
        use rayon::prelude::*;
        patterns
            .par_iter()
            .map(|h| self.has_match_histogram(h))
            .collect()
    }

    #[cfg(not(feature = "parallel"))]
    pub fn match_batch(&self, patterns: &[Histogram]) -> Vec<bool> {
        self.match_batch_serial(patterns)
    }

    /// Structural self-check: specs well formed, samples on roots, every
    /// root sample verifies, and the swap chains reconstruct the stored
    /// histograms (walked top-down from the samples).
    pub fn check_invariants(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let ctx = self.ctx();
        let params = self.forest.params();
        let mut seen = std::collections::HashSet::new();
        for (slot, sample) in self.forest.samples() {
            if self.forest.spec(slot) != ParentSpec::Root {
                violations.push(format!("sample on non-root slot {slot}"));
                continue;
            }
            let fp = self.kr.hfp(sample);
            if ctx.slot_of(fp) != Some(slot) {
                violations.push(format!("sample at slot {slot} does not map to its slot"));
                continue;
            }
            let root = Handle {
                key: sample.clone(),
                fp,
                slot,
            };
            match self.forest.collect_tree(&ctx, &root, usize::MAX - 1) {
                Ok(scan) => {
                    if scan.height as usize > params.max_height {
                        violations.push(format!(
                            "tree at slot {slot} has height {} > {}",
                            scan.height, params.max_height
                        ));
                    }
                    for (h, _) in &scan.nodes {
                        if !seen.insert(h.slot) {
                            violations.push(format!("slot {} visited twice", h.slot));
                        }
                        if !self.forest.verify(&ctx, h).is_verified() {
                            violations.push(format!("slot {} fails to verify", h.slot));
                        }
                    }
                }
                Err(e) => violations.push(format!("tree at slot {slot}: {e}")),
            }
        }
        for slot in 0..self.index.len() as u32 {
            if !seen.contains(&slot) {
                violations.push(format!("slot {slot} unreachable from any root"));
            }
        }
        violations
    }

    // ------------------------------------------------- snapshot plumbing

    pub(crate) fn index_ref(&self) -> &StaticIndex {
        &self.index
    }

    pub(crate) fn forest_ref(&self) -> &Forest<Histogram> {
        &self.forest
    }

    pub(crate) fn from_parts(
        alphabet: Alphabet,
        k: usize,
        kr: KrParams,
        index: StaticIndex,
        forest: Forest<Histogram>,
    ) -> Self {
        JumbledIndex {
            alphabet,
            k,
            kr,
            index,
            forest,
            stats: GraphStats::default(),
        }
    }
}
