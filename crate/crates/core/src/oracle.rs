//! Brute-force reference graph and the differential fuzz harness.
//!
//! The oracle stores plain k-mer sets and never consults fingerprints,
//! slots or the forest, so agreement with the hashed implementation is
//! meaningful evidence. The fuzzer generates reproducible op streams,
//! applies them to both sides, and minimizes any divergence into a textual
//! script the CLI `batch` command can replay.

use std::collections::HashSet;

use crate::alphabet::Alphabet;
use crate::error::GraphError;
use crate::graph::{AddNodeOutcome, DeBruijnGraph};
use crate::kmer::{Kmer, RollDirection};
use crate::ops::Op;
use crate::rng::SplitMix64;

/// Set-semantics de Bruijn graph: the ground truth for differential tests.
#[derive(Clone, Debug, Default)]
pub struct NaiveGraph {
    k: usize,
    nodes: HashSet<Kmer>,
    edges: HashSet<(Kmer, Kmer)>,
}

impl NaiveGraph {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            nodes: HashSet::new(),
            edges: HashSet::new(),
        }
    }

    pub fn build_from_sequences<S: AsRef<str>>(
        sequences: &[S],
        k: usize,
        alphabet: &Alphabet,
    ) -> Self {
        let mut g = Self::new(k);
        for seq in sequences {
            let Ok(codes) = alphabet.encode_str(seq.as_ref()) else {
                continue;
            };
            if codes.len() < k {
                continue;
            }
            for window in codes.windows(k) {
                g.nodes
                    .insert(Kmer::from_codes(window, alphabet).expect("valid codes"));
            }
            for window in codes.windows(k + 1) {
                let u = Kmer::from_codes(&window[..k], alphabet).expect("valid codes");
                let v = Kmer::from_codes(&window[1..], alphabet).expect("valid codes");
                g.edges.insert((u, v));
            }
        }
        g
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_node(&self, v: &Kmer) -> bool {
        self.nodes.contains(v)
    }

    pub fn has_edge(&self, u: &Kmer, v: &Kmer) -> Result<bool, GraphError> {
        if !u.chainable_to(v) {
            return Err(GraphError::NotChainable);
        }
        Ok(self.edges.contains(&(u.clone(), v.clone())))
    }

    pub fn successors(&self, v: &Kmer) -> Vec<(u8, Kmer)> {
        let mut out: Vec<(u8, Kmer)> = self
            .edges
            .iter()
            .filter(|(u, _)| u == v)
            .map(|(_, w)| (w.last_symbol(), w.clone()))
            .collect();
        out.sort_by_key(|&(a, _)| a);
        out
    }

    pub fn predecessors(&self, v: &Kmer) -> Vec<(u8, Kmer)> {
        let mut out: Vec<(u8, Kmer)> = self
            .edges
            .iter()
            .filter(|(_, w)| w == v)
            .map(|(u, _)| (u.first_symbol(), u.clone()))
            .collect();
        out.sort_by_key(|&(b, _)| b);
        out
    }

    pub fn add_node(&mut self, v: &Kmer) -> Result<AddNodeOutcome, GraphError> {
        if self.nodes.insert(v.clone()) {
            Ok(AddNodeOutcome::Inserted)
        } else {
            Ok(AddNodeOutcome::AlreadyPresent)
        }
    }

    pub fn add_edge(&mut self, u: &Kmer, v: &Kmer, alphabet: &Alphabet) -> Result<(), GraphError> {
        if !u.chainable_to(v) {
            return Err(GraphError::NotChainable);
        }
        for x in [u, v] {
            if !self.nodes.contains(x) {
                return Err(GraphError::NodeAbsent(x.decode(alphabet)));
            }
        }
        self.edges.insert((u.clone(), v.clone()));
        Ok(())
    }

    pub fn remove_edge(
        &mut self,
        u: &Kmer,
        v: &Kmer,
        alphabet: &Alphabet,
    ) -> Result<(), GraphError> {
        if !u.chainable_to(v) {
            return Err(GraphError::NotChainable);
        }
        for x in [u, v] {
            if !self.nodes.contains(x) {
                return Err(GraphError::NodeAbsent(x.decode(alphabet)));
            }
        }
        if !self.edges.remove(&(u.clone(), v.clone())) {
            return Err(GraphError::EdgeAbsent(
                u.decode(alphabet),
                v.decode(alphabet),
            ));
        }
        Ok(())
    }

    pub fn remove_node(&mut self, v: &Kmer, alphabet: &Alphabet) -> Result<(), GraphError> {
        if !self.nodes.remove(v) {
            return Err(GraphError::NodeAbsent(v.decode(alphabet)));
        }
        self.edges.retain(|(a, b)| a != v && b != v);
        Ok(())
    }
}

/// Sliding-window jumbled matcher: compares sorted symbols.
pub fn naive_jumbled_match(
    text: &str,
    k: usize,
    pattern: &str,
    alphabet: &Alphabet,
) -> Result<bool, GraphError> {
    let codes = alphabet.encode_str(text).map_err(GraphError::Kmer)?;
    let mut target = alphabet.encode_str(pattern).map_err(GraphError::Kmer)?;
    if target.len() != k {
        return Err(GraphError::Kmer(crate::error::KmerError::LengthMismatch {
            expected: k,
            got: target.len(),
        }));
    }
    target.sort_unstable();
    Ok(codes.windows(k).any(|window| {
        let mut sorted = window.to_vec();
        sorted.sort_unstable();
        sorted == target
    }))
}

// ----------------------------------------------------------------- fuzzing

/// Normalized result of one op, comparable across implementations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpOutcome {
    Done,
    AlreadyPresent,
    Bool(bool),
    /// Sorted (symbol, text k-mer) pairs; `None` when the node is absent.
    Edges(Option<Vec<(u8, String)>>),
    Error(&'static str),
}

fn error_name(e: &GraphError) -> &'static str {
    match e {
        GraphError::NodeAbsent(_) => "NodeAbsent",
        GraphError::EdgeAbsent(..) => "EdgeAbsent",
        GraphError::NotChainable => "NotChainable",
        GraphError::DistinctKmerCollision(_) => "DistinctKmerCollision",
        GraphError::NotDynamic => "NotDynamic",
        GraphError::Kmer(_) => "Kmer",
        GraphError::Forest(_) => "Forest",
    }
}

/// Anything the fuzz harness can drive: the production graph, or wrappers
/// around it in fault-injection tests.
pub trait FuzzSubject {
    fn apply_op(&mut self, op: &Op) -> OpOutcome;
    fn invariant_violations(&self) -> Vec<String>;
    /// (max assigned slot, live count, rebuild-touched entries).
    fn index_stats(&self) -> Option<(Option<u32>, usize, u64)>;
}

fn encode(text: &str, alphabet: &Alphabet, k: usize) -> Result<Kmer, ()> {
    Kmer::encode(text, alphabet, k).map_err(|_| ())
}

impl FuzzSubject for DeBruijnGraph {
    fn apply_op(&mut self, op: &Op) -> OpOutcome {
        let alphabet = self.alphabet().clone();
        let k = self.k();
        let km = |t: &str| encode(t, &alphabet, k);
        let as_outcome = |r: Result<(), GraphError>| match r {
            Ok(()) => OpOutcome::Done,
            Err(e) => OpOutcome::Error(error_name(&e)),
        };
        match op {
            Op::AddNode(v) => match km(v) {
                Ok(v) => match self.add_node(&v) {
                    Ok(AddNodeOutcome::Inserted) => OpOutcome::Done,
                    Ok(AddNodeOutcome::AlreadyPresent) => OpOutcome::AlreadyPresent,
                    Err(e) => OpOutcome::Error(error_name(&e)),
                },
                Err(()) => OpOutcome::Error("Kmer"),
            },
            Op::DelNode(v) => match km(v) {
                Ok(v) => as_outcome(self.remove_node(&v)),
                Err(()) => OpOutcome::Error("Kmer"),
            },
            Op::AddEdge(u, v) => match (km(u), km(v)) {
                (Ok(u), Ok(v)) => as_outcome(self.add_edge(&u, &v)),
                _ => OpOutcome::Error("Kmer"),
            },
            Op::DelEdge(u, v) => match (km(u), km(v)) {
                (Ok(u), Ok(v)) => as_outcome(self.remove_edge(&u, &v)),
                _ => OpOutcome::Error("Kmer"),
            },
            Op::Query(v) => match km(v) {
                Ok(v) => OpOutcome::Bool(self.is_node(&v)),
                Err(()) => OpOutcome::Error("Kmer"),
            },
            Op::HasEdge(u, v) => match (km(u), km(v)) {
                (Ok(u), Ok(v)) => match self.has_edge(&u, &v) {
                    Ok(b) => OpOutcome::Bool(b),
                    Err(e) => OpOutcome::Error(error_name(&e)),
                },
                _ => OpOutcome::Error("Kmer"),
            },
            Op::Succ(v) => match km(v) {
                Ok(v) => OpOutcome::Edges(self.successors_checked(&v).map(|list| {
                    list.into_iter()
                        .map(|(a, w)| (a, w.decode(&alphabet)))
                        .collect()
                })),
                Err(()) => OpOutcome::Error("Kmer"),
            },
            Op::Pred(v) => match km(v) {
                Ok(v) => OpOutcome::Edges(self.predecessors_checked(&v).map(|list| {
                    list.into_iter()
                        .map(|(b, w)| (b, w.decode(&alphabet)))
                        .collect()
                })),
                Err(()) => OpOutcome::Error("Kmer"),
            },
        }
    }

    fn invariant_violations(&self) -> Vec<String> {
        self.check_invariants().violations
    }

    fn index_stats(&self) -> Option<(Option<u32>, usize, u64)> {
        Some((
            self.max_assigned_slot(),
            self.node_count(),
            self.rebuild_touched(),
        ))
    }
}

struct OracleSide {
    graph: NaiveGraph,
    alphabet: Alphabet,
    k: usize,
}

impl OracleSide {
    fn apply_op(&mut self, op: &Op) -> OpOutcome {
        let km = |t: &str| encode(t, &self.alphabet, self.k);
        let as_outcome = |r: Result<(), GraphError>| match r {
            Ok(()) => OpOutcome::Done,
            Err(e) => OpOutcome::Error(error_name(&e)),
        };
        match op {
            Op::AddNode(v) => match km(v) {
                Ok(v) => match self.graph.add_node(&v) {
                    Ok(AddNodeOutcome::Inserted) => OpOutcome::Done,
                    Ok(AddNodeOutcome::AlreadyPresent) => OpOutcome::AlreadyPresent,
                    Err(e) => OpOutcome::Error(error_name(&e)),
                },
                Err(()) => OpOutcome::Error("Kmer"),
            },
            Op::DelNode(v) => match km(v) {
                Ok(v) => as_outcome(self.graph.remove_node(&v, &self.alphabet)),
                Err(()) => OpOutcome::Error("Kmer"),
            },
            Op::AddEdge(u, v) => match (km(u), km(v)) {
                (Ok(u), Ok(v)) => as_outcome(self.graph.add_edge(&u, &v, &self.alphabet)),
                _ => OpOutcome::Error("Kmer"),
            },
            Op::DelEdge(u, v) => match (km(u), km(v)) {
                (Ok(u), Ok(v)) => as_outcome(self.graph.remove_edge(&u, &v, &self.alphabet)),
                _ => OpOutcome::Error("Kmer"),
            },
            Op::Query(v) => match km(v) {
                Ok(v) => OpOutcome::Bool(self.graph.is_node(&v)),
                Err(()) => OpOutcome::Error("Kmer"),
            },
            Op::HasEdge(u, v) => match (km(u), km(v)) {
                (Ok(u), Ok(v)) => match self.graph.has_edge(&u, &v) {
                    Ok(b) => OpOutcome::Bool(b),
                    Err(e) => OpOutcome::Error(error_name(&e)),
                },
                _ => OpOutcome::Error("Kmer"),
            },
            Op::Succ(v) => match km(v) {
                Ok(v) => OpOutcome::Edges(self.graph.is_node(&v).then(|| {
                    self.graph
                        .successors(&v)
                        .into_iter()
                        .map(|(a, w)| (a, w.decode(&self.alphabet)))
                        .collect()
                })),
                Err(()) => OpOutcome::Error("Kmer"),
            },
            Op::Pred(v) => match km(v) {
                Ok(v) => OpOutcome::Edges(self.graph.is_node(&v).then(|| {
                    self.graph
                        .predecessors(&v)
                        .into_iter()
                        .map(|(b, w)| (b, w.decode(&self.alphabet)))
                        .collect()
                })),
                Err(()) => OpOutcome::Error("Kmer"),
            },
        }
    }
}

/// Fuzz run parameters.
#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub seed: u64,
    pub ops: usize,
    pub k: usize,
    pub sigma: u16,
    /// Run the full invariant scan after every Nth mutation.
    pub invariant_cadence: Option<usize>,
    /// Assert max live slot < 3 * count after every op.
    pub check_slot_range: bool,
    /// Minimize the failing prefix on divergence.
    pub shrink: bool,
}

impl FuzzConfig {
    pub fn new(seed: u64, ops: usize) -> Self {
        Self {
            seed,
            ops,
            k: 8,
            sigma: 4,
            invariant_cadence: None,
            check_slot_range: true,
            shrink: true,
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        match self.sigma {
            2 => Alphabet::binary(),
            4 => Alphabet::dna(),
            sigma => Alphabet::generic(sigma),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Divergence {
    pub op_index: usize,
    pub op: Op,
    pub expected: String,
    pub got: String,
    /// Minimized script that still reproduces the failure.
    pub repro: String,
}

#[derive(Clone, Debug, Default)]
pub struct FuzzStats {
    pub mutations: usize,
    pub edges_added: usize,
    pub edges_removed: usize,
    pub nodes_removed: usize,
    pub final_nodes: usize,
    pub final_edges: usize,
    pub rebuild_touched: u64,
    pub max_slot_seen: u32,
}

#[derive(Debug)]
pub struct FuzzVerdict {
    pub passed: bool,
    pub ops_run: usize,
    pub script: Vec<Op>,
    pub divergence: Option<Divergence>,
    pub stats: FuzzStats,
}

/// Weighted op generator: 35% addedge, 15% deledge, 15% addnode, 5%
/// delnode, 20% query, 10% hasedge/succ/pred; k-mers drawn 70% from a
/// recent-history pool, 30% fresh. Bias toward live nodes and edges comes
/// from mirrors maintained out of op outcomes, never from the subject.
struct OpGen {
    rng: SplitMix64,
    k: usize,
    sigma: u16,
    alphabet: Alphabet,
    history: Vec<Kmer>,
    live_nodes: Vec<Kmer>,
    live_edges: Vec<(Kmer, Kmer)>,
}

impl OpGen {
    fn new(seed: u64, k: usize, sigma: u16, alphabet: Alphabet) -> Self {
        Self {
            rng: SplitMix64::new(seed ^ 0x6f70_6765_6e00_0001),
            k,
            sigma,
            alphabet,
            history: Vec::new(),
            live_nodes: Vec::new(),
            live_edges: Vec::new(),
        }
    }

    fn fresh_kmer(&mut self) -> Kmer {
        let codes: Vec<u8> = (0..self.k)
            .map(|_| self.rng.next_below(self.sigma as u64) as u8)
            .collect();
        Kmer::from_codes(&codes, &self.alphabet).expect("codes in range")
    }

    fn remember(&mut self, v: &Kmer) {
        if self.history.len() == 128 {
            self.history.remove(0);
        }
        self.history.push(v.clone());
    }

    fn pick_kmer(&mut self) -> Kmer {
        let v = if !self.history.is_empty() && self.rng.chance(70) {
            let i = self.rng.next_below(self.history.len() as u64) as usize;
            self.history[i].clone()
        } else {
            self.fresh_kmer()
        };
        self.remember(&v);
        v
    }

    /// A k-mer one roll away from a live node: adding it creates a
    /// chainable pair.
    fn chain_kmer(&mut self) -> Option<Kmer> {
        let base = self.pick_live_node()?;
        let c = self.rng.next_below(self.sigma as u64) as u8;
        Some(base.rolled(RollDirection::AppendRight, c))
    }

    fn pick_live_node(&mut self) -> Option<Kmer> {
        if self.live_nodes.is_empty() {
            return None;
        }
        let i = self.rng.next_below(self.live_nodes.len() as u64) as usize;
        Some(self.live_nodes[i].clone())
    }

    fn text(&self, v: &Kmer) -> String {
        v.decode(&self.alphabet)
    }

    fn next(&mut self) -> Op {
        let roll = self.rng.next_below(100);
        match roll {
            0..=34 => {
                // addedge: source prefers live nodes, target prefers a roll
                // that lands on another live node.
                let u = if self.rng.chance(70) {
                    self.pick_live_node().unwrap_or_else(|| self.pick_kmer())
                } else {
                    self.pick_kmer()
                };
                let mut symbol = self.rng.next_below(self.sigma as u64) as u8;
                if self.rng.chance(70) {
                    let live: Vec<u8> = (0..self.sigma as u8)
                        .filter(|&c| {
                            let w = u.rolled(RollDirection::AppendRight, c);
                            self.live_nodes.contains(&w)
                        })
                        .collect();
                    if !live.is_empty() {
                        symbol = live[self.rng.next_below(live.len() as u64) as usize];
                    }
                }
                let v = u.rolled(RollDirection::AppendRight, symbol);
                self.remember(&u);
                self.remember(&v);
                Op::AddEdge(self.text(&u), self.text(&v))
            }
            35..=49 => {
                if !self.live_edges.is_empty() && self.rng.chance(40) {
                    let i = self.rng.next_below(self.live_edges.len() as u64) as usize;
                    let (u, v) = self.live_edges[i].clone();
                    Op::DelEdge(self.text(&u), self.text(&v))
                } else {
                    let u = self.pick_kmer();
                    let v = if self.rng.chance(80) {
                        let c = self.rng.next_below(self.sigma as u64) as u8;
                        u.rolled(RollDirection::AppendRight, c)
                    } else {
                        self.pick_kmer() // often not chainable
                    };
                    Op::DelEdge(self.text(&u), self.text(&v))
                }
            }
            50..=64 => {
                let v = if self.rng.chance(40) {
                    match self.chain_kmer() {
                        Some(v) => {
                            self.remember(&v);
                            v
                        }
                        None => self.pick_kmer(),
                    }
                } else {
                    self.pick_kmer()
                };
                Op::AddNode(self.text(&v))
            }
            65..=69 => {
                let v = if self.rng.chance(70) {
                    self.pick_live_node().unwrap_or_else(|| self.pick_kmer())
                } else {
                    self.pick_kmer()
                };
                Op::DelNode(self.text(&v))
            }
            70..=89 => {
                let v = if self.rng.chance(50) {
                    self.pick_live_node().unwrap_or_else(|| self.pick_kmer())
                } else {
                    self.pick_kmer()
                };
                Op::Query(self.text(&v))
            }
            90..=93 => {
                let (u, v) = if !self.live_edges.is_empty() && self.rng.chance(50) {
                    let i = self.rng.next_below(self.live_edges.len() as u64) as usize;
                    self.live_edges[i].clone()
                } else {
                    let u = self.pick_kmer();
                    let c = self.rng.next_below(self.sigma as u64) as u8;
                    (u.clone(), u.rolled(RollDirection::AppendRight, c))
                };
                Op::HasEdge(self.text(&u), self.text(&v))
            }
            94..=96 => {
                let v = self.pick_live_node().unwrap_or_else(|| self.pick_kmer());
                Op::Succ(self.text(&v))
            }
            _ => {
                let v = self.pick_live_node().unwrap_or_else(|| self.pick_kmer());
                Op::Pred(self.text(&v))
            }
        }
    }

    /// Refresh the live mirrors from an applied (op, outcome) pair.
    fn observe(&mut self, op: &Op, outcome: &OpOutcome) {
        let km = |t: &str| Kmer::encode(t, &self.alphabet, self.k).expect("generated text");
        match (op, outcome) {
            (Op::AddNode(v), OpOutcome::Done) => {
                let v = km(v);
                if !self.live_nodes.contains(&v) {
                    self.live_nodes.push(v);
                }
            }
            (Op::DelNode(v), OpOutcome::Done) => {
                let v = km(v);
                self.live_nodes.retain(|x| *x != v);
                self.live_edges.retain(|(a, b)| *a != v && *b != v);
            }
            (Op::AddEdge(u, v), OpOutcome::Done) => {
                let pair = (km(u), km(v));
                if !self.live_edges.contains(&pair) {
                    self.live_edges.push(pair);
                }
            }
            (Op::DelEdge(u, v), OpOutcome::Done) => {
                let pair = (km(u), km(v));
                self.live_edges.retain(|p| *p != pair);
            }
            _ => {}
        }
    }
}

fn is_mutation(op: &Op) -> bool {
    matches!(
        op,
        Op::AddNode(_) | Op::DelNode(_) | Op::AddEdge(..) | Op::DelEdge(..)
    )
}

/// (index, op, expected, got) of the first divergence.
type StreamFailure = (usize, Op, String, String);

/// Run one generated op stream against a subject and the oracle; stop at
/// the first divergence.
fn run_stream<S: FuzzSubject>(
    cfg: &FuzzConfig,
    subject: &mut S,
    script: Option<&[Op]>,
) -> (Vec<Op>, Option<StreamFailure>, FuzzStats) {
    let alphabet = cfg.alphabet();
    let mut oracle = OracleSide {
        graph: NaiveGraph::new(cfg.k),
        alphabet: alphabet.clone(),
        k: cfg.k,
    };
    let mut gen = OpGen::new(cfg.seed, cfg.k, cfg.sigma, alphabet);
    let mut ran: Vec<Op> = Vec::new();
    let mut stats = FuzzStats::default();
    let total = script.map(|s| s.len()).unwrap_or(cfg.ops);
    for i in 0..total {
        let op = match script {
            Some(s) => s[i].clone(),
            None => gen.next(),
        };
        let got = subject.apply_op(&op);
        let expected = oracle.apply_op(&op);
        gen.observe(&op, &expected);
        ran.push(op.clone());
        if got != expected {
            return (
                ran,
                Some((i, op, format!("{expected:?}"), format!("{got:?}"))),
                stats,
            );
        }
        if is_mutation(&op) {
            stats.mutations += 1;
            if expected == OpOutcome::Done {
                match op {
                    Op::AddEdge(..) => stats.edges_added += 1,
                    Op::DelEdge(..) => stats.edges_removed += 1,
                    Op::DelNode(..) => stats.nodes_removed += 1,
                    _ => {}
                }
            }
            if let Some(cadence) = cfg.invariant_cadence {
                if cadence > 0 && stats.mutations % cadence == 0 {
                    let violations = subject.invariant_violations();
                    if !violations.is_empty() {
                        return (
                            ran,
                            Some((
                                i,
                                op,
                                "clean invariant scan".into(),
                                format!("violations: {}", violations.join("; ")),
                            )),
                            stats,
                        );
                    }
                }
            }
        }
        if let Some((max_slot, live, touched)) = subject.index_stats() {
            stats.rebuild_touched = touched;
            if let Some(max_slot) = max_slot {
                stats.max_slot_seen = stats.max_slot_seen.max(max_slot);
                if cfg.check_slot_range && live > 0 && max_slot as u64 >= 3 * live as u64 {
                    return (
                        ran,
                        Some((
                            i,
                            op,
                            format!("max slot < 3 * {live}"),
                            format!("max slot {max_slot}"),
                        )),
                        stats,
                    );
                }
            }
        }
    }
    stats.final_nodes = oracle.graph.node_count();
    stats.final_edges = oracle.graph.edge_count();
    (ran, None, stats)
}

/// Differential fuzz of the production graph against the oracle.
pub fn fuzz_run(cfg: &FuzzConfig) -> FuzzVerdict {
    let alphabet = cfg.alphabet();
    fuzz_run_with(cfg, || {
        DeBruijnGraph::new_dynamic(cfg.k, &alphabet, cfg.seed).expect("valid fuzz parameters")
    })
}

/// Differential fuzz with a caller-supplied subject factory (used for
/// fault-injection tests of the harness itself).
pub fn fuzz_run_with<S: FuzzSubject>(
    cfg: &FuzzConfig,
    make_subject: impl Fn() -> S,
) -> FuzzVerdict {
    let mut subject = make_subject();
    let (script, failure, stats) = run_stream(cfg, &mut subject, None);
    let Some((op_index, op, expected, got)) = failure else {
        return FuzzVerdict {
            passed: true,
            ops_run: script.len(),
            script,
            divergence: None,
            stats,
        };
    };
    let mut repro_ops = script.clone();
    if cfg.shrink && repro_ops.len() <= 2048 {
        repro_ops = shrink(cfg, &make_subject, repro_ops);
    }
    let mut repro = String::new();
    repro.push_str(&format!(
        "# seed {} k {} sigma {}\n",
        cfg.seed, cfg.k, cfg.sigma
    ));
    repro.push_str(&format!("# expected {expected}\n# got {got}\n"));
    repro.push_str(&Op::format_script(&repro_ops));
    FuzzVerdict {
        passed: false,
        ops_run: op_index + 1,
        script,
        divergence: Some(Divergence {
            op_index,
            op,
            expected,
            got,
            repro,
        }),
        stats,
    }
}

fn replay_fails<S: FuzzSubject>(
    cfg: &FuzzConfig,
    make_subject: &impl Fn() -> S,
    ops: &[Op],
) -> bool {
    let mut subject = make_subject();
    run_stream(cfg, &mut subject, Some(ops)).1.is_some()
}

/// Greedy op-deletion shrinking: repeatedly drop ops that are not needed to
/// reproduce the failure.
fn shrink<S: FuzzSubject>(
    cfg: &FuzzConfig,
    make_subject: &impl Fn() -> S,
    mut ops: Vec<Op>,
) -> Vec<Op> {
    for _round in 0..3 {
        let mut changed = false;
        let mut i = 0;
        while i < ops.len() {
            let mut candidate = ops.clone();
            candidate.remove(i);
            if !candidate.is_empty() && replay_fails(cfg, make_subject, &candidate) {
                ops = candidate;
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            break;
        }
    }
    ops
}

/// Replay a textual script (e.g. a shrunk repro) against a fresh subject;
/// returns whether a divergence still occurs.
pub fn replay_script(cfg: &FuzzConfig, ops: &[Op]) -> bool {
    let alphabet = cfg.alphabet();
    replay_fails(
        cfg,
        &|| DeBruijnGraph::new_dynamic(cfg.k, &alphabet, cfg.seed).expect("valid fuzz parameters"),
        ops,
    )
}
