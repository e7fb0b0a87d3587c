//! hashdbg: build, query, mutate, verify and benchmark hashed de Bruijn
//! graphs and jumbled-match indexes.
//!
//! Exit codes: 0 success (and "present" for single queries), 1 data errors
//! and negative single queries, 2 usage errors.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hashdbg::oracle::{fuzz_run, FuzzConfig, FuzzSubject, OpOutcome};
use hashdbg::snapshot::{self, Snapshot};
use hashdbg::{Alphabet, BuildConfig, DeBruijnGraph, GraphMode, JumbledIndex, Kmer, Op};

#[derive(Parser)]
#[command(
    name = "hashdbg",
    version,
    about = "Dynamic de Bruijn graphs over hashed k-mers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlphabetArg {
    Dna,
    Binary,
    Byte,
}

impl AlphabetArg {
    fn alphabet(self) -> Alphabet {
        match self {
            AlphabetArg::Dna => Alphabet::dna(),
            AlphabetArg::Binary => Alphabet::binary(),
            AlphabetArg::Byte => Alphabet::byte(),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Dbg,
    Jumbled,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirArg {
    In,
    Out,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BenchMode {
    Membership,
    Update,
}

#[derive(Args)]
struct SeedArg {
    /// RNG seed; omitted = OS entropy, echoed to stderr.
    #[arg(long)]
    seed: Option<u64>,
}

impl SeedArg {
    fn resolve(&self) -> u64 {
        self.seed.unwrap_or_else(|| {
            let nanos = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .expect("clock after epoch")
                .as_nanos() as u64;
            let seed = nanos ^ ((std::process::id() as u64) << 32);
            eprintln!("seed: {seed}");
            seed
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a static structure from FASTA or plain-line text.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = AlphabetArg::Dna)]
        alphabet: AlphabetArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Dbg)]
        mode: ModeArg,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Membership (dbg) or jumbled existence (jumbled) queries.
    Query {
        #[arg(long)]
        snapshot: PathBuf,
        /// Single k-mer against a graph snapshot; exit code reports the answer.
        #[arg(long, conflicts_with_all = ["pattern", "stdin"])]
        kmer: Option<String>,
        /// Single pattern against a jumbled snapshot; exit code reports the answer.
        #[arg(long, conflicts_with = "stdin")]
        pattern: Option<String>,
        /// Stream queries from stdin, one per line; tabular output.
        #[arg(long)]
        stdin: bool,
    },
    /// List the in- or out-neighbors of a stored k-mer.
    Neighbors {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        kmer: String,
        #[arg(long, value_enum, default_value_t = DirArg::Out)]
        dir: DirArg,
    },
    /// Apply an op script (one op per line) in dynamic mode.
    Batch {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Convert a static snapshot to dynamic first.
        #[arg(long)]
        thaw: bool,
        /// Insert missing endpoints before addedge ops.
        #[arg(long)]
        auto_add: bool,
    },
    /// Run the full invariant scan; nonzero exit on violations.
    Verify {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Differential fuzz against the brute-force oracle.
    Fuzz {
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value_t = 1000)]
        ops: usize,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        sigma: u16,
    },
    /// Emit a CSV timing table (columns: mode,n,k,sigma,op,ns_per_op).
    Bench {
        #[arg(long, value_enum)]
        mode: BenchMode,
        /// Comma-separated target node counts.
        #[arg(long, default_value = "10000,100000")]
        sizes: String,
        #[arg(long, default_value_t = 15)]
        k: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Build {
            input,
            k,
            alphabet,
            mode,
            seed,
            out,
        } => build(&input, k, alphabet, mode, seed.resolve(), &out),
        Command::Query {
            snapshot,
            kmer,
            pattern,
            stdin,
        } => query(&snapshot, kmer, pattern, stdin),
        Command::Neighbors {
            snapshot,
            kmer,
            dir,
        } => neighbors(&snapshot, &kmer, dir),
        Command::Batch {
            snapshot,
            script,
            out,
            thaw,
            auto_add,
        } => batch(&snapshot, &script, &out, thaw, auto_add),
        Command::Verify { snapshot } => verify(&snapshot),
        Command::Fuzz {
            seed,
            ops,
            k,
            sigma,
        } => fuzz(seed.resolve(), ops, k, sigma),
        Command::Bench {
            mode,
            sizes,
            k,
            seed,
        } => bench(mode, &sizes, k, seed.resolve()),
    }
}

/// FASTA (">" headers start new sequences) or plain lines.
fn read_sequences(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_fasta = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.starts_with('>'));
    let mut sequences = Vec::new();
    if is_fasta {
        let mut current = String::new();
        for line in text.lines() {
            if let Some(_header) = line.strip_prefix('>') {
                if !current.is_empty() {
                    sequences.push(std::mem::take(&mut current));
                }
            } else {
                current.push_str(line.trim());
            }
        }
        if !current.is_empty() {
            sequences.push(current);
        }
    } else {
        sequences.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_owned),
        );
    }
    if sequences.is_empty() {
        bail!("{}: no sequences found", path.display());
    }
    Ok(sequences)
}

fn load_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    snapshot::from_bytes(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn load_graph(path: &Path) -> Result<DeBruijnGraph> {
    match load_snapshot(path)? {
        Snapshot::Graph(g) => Ok(g),
        Snapshot::Jumbled(_) => bail!(
            "{}: holds a jumbled index; this command needs a graph snapshot",
            path.display()
        ),
    }
}

fn build(
    input: &Path,
    k: usize,
    alphabet: AlphabetArg,
    mode: ModeArg,
    seed: u64,
    out: &Path,
) -> Result<i32> {
    let sequences = read_sequences(input)?;
    let alphabet = alphabet.alphabet();
    let bytes = match mode {
        ModeArg::Dbg => {
            let g = DeBruijnGraph::build_static(&sequences, k, &alphabet, &BuildConfig::new(seed))?;
            let bytes = snapshot::graph_to_bytes(&g);
            println!("nodes {}", g.node_count());
            println!("edges {}", g.edge_count());
            println!("trees {}", g.tree_count());
            println!("restarts {}", g.stats().restarts);
            if g.stats().skipped_sequences > 0 {
                eprintln!(
                    "warning: skipped {} sequence(s) shorter than k",
                    g.stats().skipped_sequences
                );
            }
            print_bits_per_node(&bytes, g.node_count());
            bytes
        }
        ModeArg::Jumbled => {
            if sequences.len() != 1 {
                bail!(
                    "jumbled mode indexes a single text; input has {} sequences",
                    sequences.len()
                );
            }
            let j = JumbledIndex::build(&sequences[0], k, &alphabet, seed)?;
            let bytes = snapshot::jumbled_to_bytes(&j);
            println!("nodes {}", j.node_count());
            println!("edges 0");
            println!("trees {}", j.tree_count());
            println!("restarts {}", j.stats().restarts);
            print_bits_per_node(&bytes, j.node_count());
            bytes
        }
    };
    fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))?;
    Ok(0)
}

fn print_bits_per_node(bytes: &[u8], nodes: usize) {
    if nodes > 0 {
        println!(
            "bits_per_node {:.1}",
            bytes.len() as f64 * 8.0 / nodes as f64
        );
    } else {
        println!("bits_per_node 0.0");
    }
}

fn query(
    path: &Path,
    kmer: Option<String>,
    pattern: Option<String>,
    use_stdin: bool,
) -> Result<i32> {
    let snap = load_snapshot(path)?;
    match (&snap, kmer, pattern, use_stdin) {
        (Snapshot::Graph(g), Some(text), None, false) => {
            let v = g.encode_kmer(&text)?;
            Ok(if g.is_node(&v) { 0 } else { 1 })
        }
        (Snapshot::Jumbled(j), None, Some(text), false) => {
            Ok(if j.has_match(&text)? { 0 } else { 1 })
        }
        (_, None, None, true) => {
            let stdin = std::io::stdin();
            let lines: Vec<String> = stdin
                .lock()
                .lines()
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .map(|l| l.trim().to_owned())
                .filter(|l| !l.is_empty())
                .collect();
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            match &snap {
                Snapshot::Graph(g) => {
                    let kmers: Vec<Kmer> = lines
                        .iter()
                        .map(|l| g.encode_kmer(l))
                        .collect::<Result<_, _>>()?;
                    for (line, present) in lines.iter().zip(g.contains_batch(&kmers)) {
                        writeln!(out, "{line}\t{present}")?;
                    }
                }
                Snapshot::Jumbled(j) => {
                    let hists = lines
                        .iter()
                        .map(|l| {
                            let codes = j.alphabet().encode_str(l)?;
                            if codes.len() != j.k() {
                                return Err(hashdbg::KmerError::LengthMismatch {
                                    expected: j.k(),
                                    got: codes.len(),
                                });
                            }
                            let mut counts = vec![0u16; j.alphabet().sigma() as usize];
                            for &c in &codes {
                                counts[c as usize] += 1;
                            }
                            Ok(hashdbg::Histogram::new(counts))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    for (line, matched) in lines.iter().zip(j.match_batch(&hists)) {
                        writeln!(out, "{line}\t{matched}")?;
                    }
                }
            }
            Ok(0)
        }
        (Snapshot::Graph(_), _, Some(_), _) => {
            bail!("graph snapshots answer --kmer queries, not --pattern")
        }
        (Snapshot::Jumbled(_), Some(_), _, _) => {
            bail!("jumbled snapshots answer --pattern queries, not --kmer")
        }
        _ => bail!("pass exactly one of --kmer, --pattern or --stdin"),
    }
}

fn neighbors(path: &Path, kmer: &str, dir: DirArg) -> Result<i32> {
    let g = load_graph(path)?;
    let v = g.encode_kmer(kmer)?;
    let list = match dir {
        DirArg::Out => g.successors_checked(&v),
        DirArg::In => g.predecessors_checked(&v),
    }
    .ok_or_else(|| anyhow!("node {kmer} is not in the graph"))?;
    let alphabet = g.alphabet();
    for (symbol, w) in list {
        println!(
            "{}\t{}",
            alphabet.char_for(symbol) as char,
            w.decode(alphabet)
        );
    }
    Ok(0)
}

fn batch(path: &Path, script: &Path, out: &Path, thaw: bool, auto_add: bool) -> Result<i32> {
    let text =
        fs::read_to_string(script).with_context(|| format!("reading {}", script.display()))?;
    let ops = Op::parse_script(&text).map_err(|e| anyhow!("{}: {e}", script.display()))?;
    let mut g = load_graph(path)?;
    if g.mode() == GraphMode::Static {
        if !thaw {
            bail!("snapshot is static; pass --thaw to convert before applying ops");
        }
        g = g.thaw()?;
    }
    for op in &ops {
        if auto_add {
            if let Op::AddEdge(u, v) = op {
                for text in [u, v] {
                    let kmer = g.encode_kmer(text)?;
                    g.add_node(&kmer)?;
                }
            }
        }
        let outcome = g.apply_op(op);
        println!("{op} -> {}", format_outcome(&outcome));
    }
    let report = g.check_invariants();
    if !report.is_clean() {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        bail!(
            "{} invariant violation(s) after batch",
            report.violations.len()
        );
    }
    fs::write(out, snapshot::graph_to_bytes(&g))
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(0)
}

fn format_outcome(outcome: &OpOutcome) -> String {
    match outcome {
        OpOutcome::Done => "ok".into(),
        OpOutcome::AlreadyPresent => "already-present".into(),
        OpOutcome::Bool(b) => b.to_string(),
        OpOutcome::Edges(None) => "absent".into(),
        OpOutcome::Edges(Some(list)) => {
            if list.is_empty() {
                "-".into()
            } else {
                list.iter()
                    .map(|(_, w)| w.clone())
                    .collect::<Vec<_>>()
                    .join(",")
            }
        }
        OpOutcome::Error(name) => format!("error:{name}"),
    }
}

fn verify(path: &Path) -> Result<i32> {
    match load_snapshot(path)? {
        Snapshot::Graph(g) => {
            let report = g.check_invariants();
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            if report.is_clean() {
                println!(
                    "ok: nodes {} trees {} components {} max_height {}",
                    report.nodes, report.trees, report.components, report.max_tree_height
                );
                Ok(0)
            } else {
                eprintln!("{} violation(s)", report.violations.len());
                Ok(1)
            }
        }
        Snapshot::Jumbled(j) => {
            let violations = j.check_invariants();
            for v in &violations {
                eprintln!("violation: {v}");
            }
            if violations.is_empty() {
                println!("ok: nodes {} trees {}", j.node_count(), j.tree_count());
                Ok(0)
            } else {
                eprintln!("{} violation(s)", violations.len());
                Ok(1)
            }
        }
    }
}

fn fuzz(seed: u64, ops: usize, k: usize, sigma: u16) -> Result<i32> {
    if !(2..=94).contains(&sigma) {
        bail!("--sigma must be in 2..=94 (the fuzzer uses a printable alphabet)");
    }
    let mut cfg = FuzzConfig::new(seed, ops);
    cfg.k = k;
    cfg.sigma = sigma;
    cfg.invariant_cadence = Some(100);
    let verdict = fuzz_run(&cfg);
    if verdict.passed {
        println!(
            "pass: {} ops, {} mutations, {} final nodes, {} final edges",
            verdict.ops_run,
            verdict.stats.mutations,
            verdict.stats.final_nodes,
            verdict.stats.final_edges
        );
        Ok(0)
    } else {
        let d = verdict
            .divergence
            .expect("failed verdict carries divergence");
        eprintln!(
            "divergence at op {} ({}): expected {}, got {}",
            d.op_index, d.op, d.expected, d.got
        );
        println!("{}", d.repro);
        Ok(1)
    }
}

fn bench(mode: BenchMode, sizes: &str, k: usize, seed: u64) -> Result<i32> {
    let sizes: Vec<usize> = sizes
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| anyhow!("bad size {s:?}: {e}"))
        })
        .collect::<Result<_>>()?;
    let alphabet = Alphabet::dna();
    let mut rng = hashdbg::rng::SplitMix64::new(seed);
    println!("mode,n,k,sigma,op,ns_per_op");
    for &target in &sizes {
        match mode {
            BenchMode::Membership => {
                let text: String = (0..target + k - 1)
                    .map(|_| b"ACGT"[rng.next_below(4) as usize] as char)
                    .collect();
                let g = DeBruijnGraph::build_static(
                    &[text.as_str()],
                    k,
                    &alphabet,
                    &BuildConfig::new(seed),
                )?;
                let n = g.node_count();
                let present = g.sample_node_kmers(2_000, seed ^ 1);
                let absent: Vec<Kmer> = (0..2_000)
                    .map(|_| {
                        let codes: Vec<u8> = (0..k).map(|_| rng.next_below(4) as u8).collect();
                        Kmer::from_codes(&codes, &alphabet).expect("codes in range")
                    })
                    .collect();
                for (name, queries) in [("present_query", &present), ("absent_query", &absent)] {
                    let t = Instant::now();
                    let mut hits = 0usize;
                    for q in queries {
                        hits += g.is_node(q) as usize;
                    }
                    std::hint::black_box(hits);
                    let ns = t.elapsed().as_nanos() as f64 / queries.len() as f64;
                    println!("membership,{n},{k},4,{name},{ns:.0}");
                }
            }
            BenchMode::Update => {
                let mut g = DeBruijnGraph::new_dynamic(k, &alphabet, seed)?;
                let mut kmers = Vec::with_capacity(target);
                let t = Instant::now();
                while kmers.len() < target {
                    let codes: Vec<u8> = (0..k).map(|_| rng.next_below(4) as u8).collect();
                    let v = Kmer::from_codes(&codes, &alphabet).expect("codes in range");
                    if matches!(g.add_node(&v), Ok(hashdbg::AddNodeOutcome::Inserted)) {
                        kmers.push(v);
                    }
                }
                let add_node_ns = t.elapsed().as_nanos() as f64 / target as f64;
                println!("update,{target},{k},4,add_node,{add_node_ns:.0}");

                let edge_ops = target.min(5_000);
                let t = Instant::now();
                for (i, u) in kmers.iter().enumerate().take(edge_ops) {
                    let w = u.rolled(hashdbg::RollDirection::AppendRight, (i % 4) as u8);
                    if g.is_node(&w) {
                        g.add_edge(u, &w)?;
                    }
                }
                let ns = t.elapsed().as_nanos() as f64 / edge_ops as f64;
                println!("update,{target},{k},4,add_edge,{ns:.0}");

                let t = Instant::now();
                for (i, u) in kmers.iter().enumerate().take(edge_ops) {
                    let w = u.rolled(hashdbg::RollDirection::AppendRight, (i % 4) as u8);
                    if g.has_edge(u, &w).unwrap_or(false) {
                        g.remove_edge(u, &w)?;
                    }
                }
                let ns = t.elapsed().as_nanos() as f64 / edge_ops as f64;
                println!("update,{target},{k},4,remove_edge,{ns:.0}");

                let t = Instant::now();
                for v in kmers.iter().take(edge_ops) {
                    g.remove_node(v)?;
                }
                let ns = t.elapsed().as_nanos() as f64 / edge_ops as f64;
                println!("update,{target},{k},4,remove_node,{ns:.0}");
            }
        }
    }
    Ok(0)
}
