//! Snapshot persistence: one little-endian binary format for both graph
//! modes and the jumbled index.
//!
//! Layout: magic "DBGF", version u16, mode u8, flags u8; a 64-byte header
//! of u64 fields (k, sigma, n, e, m, p, r, seed); an optional custom
//! alphabet table; the index section (mode-tagged); the IN/OUT bit
//! payloads (row-major, rows padded to whole 8-byte words; absent in
//! jumbled mode); the parent-spec array; the root-sample table; and a
//! trailing CRC-64 of all preceding bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crc::{Crc, CRC_64_XZ};

use crate::adjacency::{AdjacencyMatrices, Side};
use crate::alphabet::Alphabet;
use crate::error::SnapshotError;
use crate::fingerprint::KrParams;
use crate::forest::{Forest, ForestParams, ParentSpec};
use crate::graph::{DeBruijnGraph, GraphMode, IndexKind};
use crate::jumbled::JumbledIndex;
use crate::kmer::{Histogram, Kmer, MAX_K};
use crate::mphf::Mphf;
use crate::node_index::{DynamicIndex, StaticIndex};

const MAGIC: &[u8; 4] = b"DBGF";
const VERSION: u16 = 1;

const MODE_STATIC: u8 = 0;
const MODE_DYNAMIC: u8 = 1;
const MODE_JUMBLED: u8 = 2;

const PRESET_DNA: u8 = 0;
const PRESET_BINARY: u8 = 1;
const PRESET_BYTE: u8 = 2;
const PRESET_CUSTOM: u8 = 3;
const FLAG_FP_CHECK: u8 = 1 << 2;

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

/// Either stored structure.
pub enum Snapshot {
    Graph(DeBruijnGraph),
    Jumbled(JumbledIndex),
}

/// Byte extents of each section, for space accounting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SectionSizes {
    pub preamble: usize,
    pub header: usize,
    pub alphabet_table: usize,
    pub index: usize,
    pub matrices: usize,
    pub parent_specs: usize,
    pub root_samples: usize,
    pub crc: usize,
    pub total: usize,
}

// ------------------------------------------------------------------ writing

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    fn finish(mut self) -> Vec<u8> {
        let crc = CRC64.checksum(&self.buf);
        self.u64(crc);
        self.buf
    }
}

fn alphabet_preset(alphabet: &Alphabet) -> u8 {
    if alphabet == &Alphabet::dna() {
        PRESET_DNA
    } else if alphabet == &Alphabet::binary() {
        PRESET_BINARY
    } else if alphabet == &Alphabet::byte() {
        PRESET_BYTE
    } else {
        PRESET_CUSTOM
    }
}

fn write_static_index(w: &mut Writer, index: &StaticIndex) {
    let mphf = index.mphf();
    w.u64(mphf.seed());
    w.u64(mphf.displacements().len() as u64);
    for &d in mphf.displacements() {
        w.u64(d);
    }
    if let Some(table) = index.fingerprint_check_table() {
        for &fp in table {
            w.u64(fp);
        }
    }
}

fn spec_tag_dbg(spec: ParentSpec) -> (u8, u8) {
    match spec {
        ParentSpec::Unassigned => (0, 0),
        ParentSpec::Root => (1, 0),
        ParentSpec::ViaOut { symbol } => (2, symbol),
        ParentSpec::ViaIn { symbol } => (3, symbol),
        ParentSpec::ViaSwap { .. } => unreachable!("swap spec in graph mode"),
    }
}

fn write_specs_dbg(w: &mut Writer, specs: &[ParentSpec], sigma: u16) {
    for &spec in specs {
        let (tag, symbol) = spec_tag_dbg(spec);
        if sigma <= 64 {
            w.u8((tag << 6) | symbol);
        } else {
            w.u8(tag);
            w.u8(symbol);
        }
    }
}

fn write_specs_jumbled(w: &mut Writer, specs: &[ParentSpec], sigma: u16) {
    for &spec in specs {
        let (tag, removed, added) = match spec {
            ParentSpec::Unassigned => (0, 0, 0),
            ParentSpec::Root => (1, 0, 0),
            ParentSpec::ViaSwap { removed, added } => (2, removed, added),
            other => unreachable!("{other:?} in jumbled mode"),
        };
        if sigma <= 64 {
            w.u8((tag << 6) | removed);
            w.u8(added);
        } else {
            w.u8(tag);
            w.u8(removed);
            w.u8(added);
        }
    }
}

fn write_matrix(w: &mut Writer, adj: &AdjacencyMatrices, side: Side) {
    for word in adj.raw_words(side) {
        w.u64(*word);
    }
}

/// Serialize a graph (either mode).
pub fn graph_to_bytes(g: &DeBruijnGraph) -> Vec<u8> {
    let mut w = Writer::new();
    let alphabet = g.alphabet();
    let kr = g.kr_params();
    let mode = match g.mode() {
        GraphMode::Static => MODE_STATIC,
        GraphMode::Dynamic => MODE_DYNAMIC,
    };
    let preset = alphabet_preset(alphabet);
    let fp_check = match g.index_kind() {
        IndexKind::Static(idx) => idx.has_fingerprint_check(),
        IndexKind::Dynamic(_) => false,
    };
    w.bytes(MAGIC);
    w.u16(VERSION);
    w.u8(mode);
    w.u8(preset | if fp_check { FLAG_FP_CHECK } else { 0 });
    let m = g.capacity() as u64;
    for v in [
        g.k() as u64,
        alphabet.sigma() as u64,
        g.node_count() as u64,
        g.edge_count(),
        m,
        kr.p(),
        kr.r(),
        kr.seed(),
    ] {
        w.u64(v);
    }
    if preset == PRESET_CUSTOM {
        w.bytes(alphabet.table());
    }
    match g.index_kind() {
        IndexKind::Static(idx) => write_static_index(&mut w, idx),
        IndexKind::Dynamic(idx) => {
            let entries = idx.entries_by_slot();
            w.u64(entries.len() as u64);
            for (slot, fp) in entries {
                w.u64(slot as u64);
                w.u64(fp);
            }
        }
    }
    write_matrix(&mut w, g.adjacency(), Side::In);
    write_matrix(&mut w, g.adjacency(), Side::Out);
    write_specs_dbg(&mut w, g.forest_ref().specs(), alphabet.sigma());
    let samples: Vec<(u32, &Kmer)> = g.forest_ref().samples().collect();
    w.u64(samples.len() as u64);
    for (slot, kmer) in samples {
        w.u64(slot as u64);
        w.bytes(&kmer.packed_bytes());
    }
    w.finish()
}

/// Serialize a jumbled index.
pub fn jumbled_to_bytes(j: &JumbledIndex) -> Vec<u8> {
    let mut w = Writer::new();
    let alphabet = j.alphabet();
    let kr = j.kr_params();
    let preset = alphabet_preset(alphabet);
    w.bytes(MAGIC);
    w.u16(VERSION);
    w.u8(MODE_JUMBLED);
    w.u8(preset
        | if j.index_ref().has_fingerprint_check() {
            FLAG_FP_CHECK
        } else {
            0
        });
    let n = j.node_count() as u64;
    for v in [
        j.k() as u64,
        alphabet.sigma() as u64,
        n,
        0, // no edge bits are stored
        n, // capacity equals n in a static index
        kr.p(),
        kr.r(),
        kr.seed(),
    ] {
        w.u64(v);
    }
    if preset == PRESET_CUSTOM {
        w.bytes(alphabet.table());
    }
    write_static_index(&mut w, j.index_ref());
    write_specs_jumbled(&mut w, j.forest_ref().specs(), alphabet.sigma());
    let samples: Vec<(u32, &Histogram)> = j.forest_ref().samples().collect();
    w.u64(samples.len() as u64);
    for (slot, hist) in samples {
        w.u64(slot as u64);
        for &count in hist.counts() {
            w.u16(count);
        }
    }
    w.finish()
}

pub fn write_graph<W: Write>(g: &DeBruijnGraph, mut sink: W) -> Result<(), SnapshotError> {
    sink.write_all(&graph_to_bytes(g))?;
    Ok(())
}

pub fn write_jumbled<W: Write>(j: &JumbledIndex, mut sink: W) -> Result<(), SnapshotError> {
    sink.write_all(&jumbled_to_bytes(j))?;
    Ok(())
}

// ------------------------------------------------------------------ reading

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        if self.remaining() < n {
            return Err(SnapshotError::Truncated);
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, SnapshotError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, SnapshotError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A count followed by `record` bytes each must fit in the buffer.
    fn count(&mut self, record: usize) -> Result<usize, SnapshotError> {
        let count = self.u64()?;
        let bytes = (count as u128) * (record as u128);
        if bytes > self.remaining() as u128 {
            return Err(SnapshotError::Truncated);
        }
        Ok(count as usize)
    }
}

struct Header {
    mode: u8,
    preset: u8,
    fp_check: bool,
    k: usize,
    sigma: u16,
    n: usize,
    e: u64,
    m: u32,
    p: u64,
    r: u64,
    seed: u64,
}

fn malformed(msg: impl Into<String>) -> SnapshotError {
    SnapshotError::Malformed(msg.into())
}

fn read_header(r: &mut Reader) -> Result<Header, SnapshotError> {
    if r.remaining() < 4 {
        return Err(SnapshotError::Truncated);
    }
    if r.take(4)? != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(SnapshotError::VersionMismatch(version));
    }
    let mode = r.u8()?;
    let flags = r.u8()?;
    let k = r.u64()? as usize;
    let sigma = r.u64()?;
    let n = r.u64()? as usize;
    let e = r.u64()?;
    let m = r.u64()?;
    let p = r.u64()?;
    let rr = r.u64()?;
    let seed = r.u64()?;
    if !(1..=MAX_K).contains(&k) {
        return Err(malformed(format!("k {k} out of range")));
    }
    if !(2..=256).contains(&sigma) {
        return Err(malformed(format!("sigma {sigma} out of range")));
    }
    if m > u32::MAX as u64 || (n as u64) > m {
        return Err(malformed("node count exceeds capacity"));
    }
    if p < 3 || rr == 0 || rr >= p {
        return Err(malformed("bad fingerprint parameters"));
    }
    // p must be prime for rolling to be invertible; verify via r * r^-1.
    let r_inv = crate::fingerprint::pow_mod(rr, p - 2, p);
    if crate::fingerprint::mul_mod(rr, r_inv, p) != 1 {
        return Err(malformed("modulus is not prime"));
    }
    Ok(Header {
        mode,
        preset: flags & 0b11,
        fp_check: flags & FLAG_FP_CHECK != 0,
        k,
        sigma: sigma as u16,
        n,
        e,
        m: m as u32,
        p,
        r: rr,
        seed,
    })
}

fn read_alphabet(r: &mut Reader, h: &Header) -> Result<Alphabet, SnapshotError> {
    let alphabet = match h.preset {
        PRESET_DNA => Alphabet::dna(),
        PRESET_BINARY => Alphabet::binary(),
        PRESET_BYTE => Alphabet::byte(),
        PRESET_CUSTOM => {
            let table = r.take(h.sigma as usize)?;
            Alphabet::new(table).map_err(|e| malformed(format!("bad alphabet table: {e}")))?
        }
        _ => unreachable!("two-bit preset"),
    };
    if alphabet.sigma() != h.sigma {
        return Err(malformed("alphabet size disagrees with header"));
    }
    Ok(alphabet)
}

fn read_static_index(r: &mut Reader, h: &Header) -> Result<StaticIndex, SnapshotError> {
    let seed = r.u64()?;
    let g = r.count(8)?;
    let mut displacements = Vec::with_capacity(g);
    for _ in 0..g {
        displacements.push(r.u64()?);
    }
    let mphf = Mphf::from_parts(h.n as u64, seed, displacements);
    let fp_check = if h.fp_check {
        let mut table = Vec::with_capacity(h.n);
        for _ in 0..h.n {
            table.push(r.u64()?);
        }
        Some(table)
    } else {
        None
    };
    Ok(StaticIndex::from_parts(mphf, fp_check))
}

fn read_specs_dbg(r: &mut Reader, h: &Header) -> Result<Vec<ParentSpec>, SnapshotError> {
    let mut specs = Vec::with_capacity(h.m as usize);
    for _ in 0..h.m {
        let (tag, symbol) = if h.sigma <= 64 {
            let byte = r.u8()?;
            (byte >> 6, byte & 0b0011_1111)
        } else {
            (r.u8()?, r.u8()?)
        };
        let spec = match tag {
            0 => ParentSpec::Unassigned,
            1 => ParentSpec::Root,
            2 => ParentSpec::ViaOut { symbol },
            3 => ParentSpec::ViaIn { symbol },
            _ => return Err(malformed("bad parent spec tag")),
        };
        if matches!(spec, ParentSpec::ViaOut { .. } | ParentSpec::ViaIn { .. })
            && symbol as u16 >= h.sigma
        {
            return Err(malformed("parent spec symbol out of range"));
        }
        specs.push(spec);
    }
    Ok(specs)
}

fn read_specs_jumbled(r: &mut Reader, h: &Header) -> Result<Vec<ParentSpec>, SnapshotError> {
    let mut specs = Vec::with_capacity(h.m as usize);
    for _ in 0..h.m {
        let (tag, removed, added) = if h.sigma <= 64 {
            let first = r.u8()?;
            (first >> 6, first & 0b0011_1111, r.u8()?)
        } else {
            (r.u8()?, r.u8()?, r.u8()?)
        };
        let spec = match tag {
            0 => ParentSpec::Unassigned,
            1 => ParentSpec::Root,
            2 => {
                if removed as u16 >= h.sigma || added as u16 >= h.sigma {
                    return Err(malformed("swap spec symbol out of range"));
                }
                ParentSpec::ViaSwap { removed, added }
            }
            _ => return Err(malformed("bad parent spec tag")),
        };
        specs.push(spec);
    }
    Ok(specs)
}

fn check_crc(bytes: &[u8]) -> Result<&[u8], SnapshotError> {
    if bytes.len() < 8 {
        return Err(SnapshotError::Truncated);
    }
    let (payload, crc_bytes) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(crc_bytes.try_into().unwrap());
    if CRC64.checksum(payload) != stored {
        return Err(SnapshotError::ChecksumMismatch);
    }
    Ok(payload)
}

/// Deserialize either structure.
pub fn from_bytes(bytes: &[u8]) -> Result<Snapshot, SnapshotError> {
    // Magic and version are diagnosed before the checksum so foreign files
    // report BadMagic rather than ChecksumMismatch.
    {
        let mut peek = Reader::new(bytes);
        if peek.remaining() < 4 {
            return Err(SnapshotError::Truncated);
        }
        if peek.take(4)? != MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = peek.u16()?;
        if version != VERSION {
            return Err(SnapshotError::VersionMismatch(version));
        }
    }
    let mut r = Reader::new(bytes);
    let h = read_header(&mut r)?;
    let alphabet = read_alphabet(&mut r, &h)?;
    let kr = KrParams::with_base(h.p, h.r, h.k, h.sigma, h.seed);
    let params = ForestParams::new(h.k, alphabet.lambda());
    let snapshot = match h.mode {
        MODE_STATIC | MODE_DYNAMIC => {
            let index = match h.mode {
                MODE_STATIC => {
                    if h.m as usize != h.n {
                        return Err(malformed("static capacity must equal node count"));
                    }
                    IndexKind::Static(read_static_index(&mut r, &h)?)
                }
                _ => {
                    let count = r.count(16)?;
                    if count != h.n {
                        return Err(malformed("index entry count disagrees with header"));
                    }
                    let mut entries = Vec::with_capacity(count);
                    for _ in 0..count {
                        let slot = r.u64()?;
                        let fp = r.u64()?;
                        if slot >= h.m as u64 {
                            return Err(malformed("slot out of range"));
                        }
                        entries.push((slot as u32, fp));
                    }
                    let index = DynamicIndex::from_parts(h.m, &entries);
                    if index.len() != count {
                        return Err(malformed("duplicate fingerprints in index"));
                    }
                    IndexKind::Dynamic(index)
                }
            };
            let row_words = (h.sigma as usize).div_ceil(64);
            let words = h.m as usize * row_words;
            let read_matrix = |r: &mut Reader| -> Result<Vec<u64>, SnapshotError> {
                let mut out = Vec::with_capacity(words);
                for _ in 0..words {
                    out.push(r.u64()?);
                }
                Ok(out)
            };
            let in_bits = read_matrix(&mut r)?;
            let out_bits = read_matrix(&mut r)?;
            let adj = AdjacencyMatrices::from_raw_words(h.m, h.sigma, in_bits, out_bits);
            let specs = read_specs_dbg(&mut r, &h)?;
            let sample_count = r.count(8)?;
            let key_bytes = (h.k * alphabet.lambda() as usize).div_ceil(8);
            let mut samples = BTreeMap::new();
            for _ in 0..sample_count {
                let slot = r.u64()?;
                if slot >= h.m as u64 {
                    return Err(malformed("sample slot out of range"));
                }
                let kmer = Kmer::from_packed_bytes(r.take(key_bytes)?, h.k, alphabet.lambda())
                    .map_err(|e| malformed(format!("bad sample: {e}")))?;
                samples.insert(slot as u32, kmer);
            }
            let forest = Forest::from_parts(specs, samples, params);
            Snapshot::Graph(DeBruijnGraph::from_parts(
                alphabet, h.k, kr, index, adj, forest, h.e,
            ))
        }
        MODE_JUMBLED => {
            if h.m as usize != h.n {
                return Err(malformed("jumbled capacity must equal node count"));
            }
            let index = read_static_index(&mut r, &h)?;
            let specs = read_specs_jumbled(&mut r, &h)?;
            let sample_count = r.count(8)?;
            let mut samples = BTreeMap::new();
            for _ in 0..sample_count {
                let slot = r.u64()?;
                if slot >= h.m as u64 {
                    return Err(malformed("sample slot out of range"));
                }
                let mut counts = Vec::with_capacity(h.sigma as usize);
                for _ in 0..h.sigma {
                    counts.push(r.u16()?);
                }
                let hist = Histogram::new(counts);
                if hist.total() != h.k {
                    return Err(malformed("sample histogram does not sum to k"));
                }
                samples.insert(slot as u32, hist);
            }
            let forest = Forest::from_parts(specs, samples, params);
            Snapshot::Jumbled(JumbledIndex::from_parts(alphabet, h.k, kr, index, forest))
        }
        other => return Err(malformed(format!("unknown mode {other}"))),
    };
    // Everything must be consumed but the trailing checksum, which covers
    // the whole payload.
    if r.remaining() != 8 {
        return Err(if r.remaining() < 8 {
            SnapshotError::Truncated
        } else {
            malformed("trailing bytes after snapshot")
        });
    }
    check_crc(bytes)?;
    Ok(snapshot)
}

pub fn graph_from_bytes(bytes: &[u8]) -> Result<DeBruijnGraph, SnapshotError> {
    match from_bytes(bytes)? {
        Snapshot::Graph(g) => Ok(g),
        Snapshot::Jumbled(_) => Err(malformed("snapshot holds a jumbled index, not a graph")),
    }
}

pub fn jumbled_from_bytes(bytes: &[u8]) -> Result<JumbledIndex, SnapshotError> {
    match from_bytes(bytes)? {
        Snapshot::Jumbled(j) => Ok(j),
        Snapshot::Graph(_) => Err(malformed("snapshot holds a graph, not a jumbled index")),
    }
}

pub fn read_snapshot<R: Read>(mut source: R) -> Result<Snapshot, SnapshotError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

/// Parse section extents without materializing the structures.
pub fn describe(bytes: &[u8]) -> Result<SectionSizes, SnapshotError> {
    let mut r = Reader::new(bytes);
    let h = read_header(&mut r)?;
    let mut sizes = SectionSizes {
        preamble: 8,
        header: 64,
        crc: 8,
        total: bytes.len(),
        ..Default::default()
    };
    let mark = r.pos;
    if h.preset == PRESET_CUSTOM {
        r.take(h.sigma as usize)?;
    }
    sizes.alphabet_table = r.pos - mark;

    let mark = r.pos;
    match h.mode {
        MODE_STATIC | MODE_JUMBLED => {
            r.u64()?;
            let g = r.count(8)?;
            r.take(g * 8)?;
            if h.fp_check {
                r.take(h.n * 8)?;
            }
        }
        MODE_DYNAMIC => {
            let count = r.count(16)?;
            r.take(count * 16)?;
        }
        other => return Err(malformed(format!("unknown mode {other}"))),
    }
    sizes.index = r.pos - mark;

    let mark = r.pos;
    if h.mode != MODE_JUMBLED {
        let row_words = (h.sigma as usize).div_ceil(64);
        r.take(2 * h.m as usize * row_words * 8)?;
    }
    sizes.matrices = r.pos - mark;

    let mark = r.pos;
    let spec_bytes = match (h.mode == MODE_JUMBLED, h.sigma <= 64) {
        (false, true) => 1,
        (false, false) => 2,
        (true, true) => 2,
        (true, false) => 3,
    };
    r.take(h.m as usize * spec_bytes)?;
    sizes.parent_specs = r.pos - mark;

    let mark = r.pos;
    let key_bytes = if h.mode == MODE_JUMBLED {
        2 * h.sigma as usize
    } else {
        (h.k * crate::alphabet::lambda_for(h.sigma) as usize).div_ceil(8)
    };
    let count = r.count(1)?;
    r.take(count * (8 + key_bytes))?;
    sizes.root_samples = r.pos - mark;

    if r.remaining() != 8 {
        return Err(if r.remaining() < 8 {
            SnapshotError::Truncated
        } else {
            malformed("trailing bytes after snapshot")
        });
    }
    Ok(sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BuildConfig;

    fn sample_graph() -> DeBruijnGraph {
        DeBruijnGraph::build_static(
            &["ACGTACGTTTACGCATG"],
            4,
            &Alphabet::dna(),
            &BuildConfig::new(11),
        )
        .unwrap()
    }

    #[test]
    fn graph_round_trip_answers_identically() {
        let g = sample_graph();
        let bytes = graph_to_bytes(&g);
        let loaded = graph_from_bytes(&bytes).unwrap();
        assert_eq!(loaded.node_count(), g.node_count());
        assert_eq!(loaded.edge_count(), g.edge_count());
        assert_eq!(loaded.tree_count(), g.tree_count());
        // Exhaustive 4-mer sweep.
        for i in 0..4u32.pow(4) {
            let codes: Vec<u8> = (0..4).map(|j| ((i >> (2 * j)) & 3) as u8).collect();
            let v = Kmer::from_codes(&codes, g.alphabet()).unwrap();
            assert_eq!(g.is_node(&v), loaded.is_node(&v));
        }
        assert!(loaded.check_invariants().is_clean());
    }

    #[test]
    fn dynamic_round_trip() {
        let mut g = sample_graph().thaw().unwrap();
        let extra = g.encode_kmer("GGGG").unwrap();
        g.add_node(&extra).unwrap();
        let bytes = graph_to_bytes(&g);
        let loaded = graph_from_bytes(&bytes).unwrap();
        assert_eq!(loaded.node_count(), g.node_count());
        assert!(loaded.is_node(&extra));
        assert!(loaded.check_invariants().is_clean());
        // And the loaded graph accepts further updates.
        let mut loaded = loaded;
        loaded.remove_node(&extra).unwrap();
        assert!(!loaded.is_node(&extra));
    }

    #[test]
    fn jumbled_round_trip() {
        let j = JumbledIndex::build("ACGTTGCAACGGACGT", 5, &Alphabet::dna(), 3).unwrap();
        let bytes = jumbled_to_bytes(&j);
        let loaded = jumbled_from_bytes(&bytes).unwrap();
        for pattern in ["ACGTT", "TTTTT", "GCAAC", "AAAAA", "CGTAC"] {
            assert_eq!(
                j.has_match(pattern).unwrap(),
                loaded.has_match(pattern).unwrap(),
                "pattern {pattern}"
            );
        }
        assert!(loaded.check_invariants().is_empty());
    }

    #[test]
    fn wide_alphabet_round_trips() {
        // sigma = 256 (byte preset): four words per row, two-byte specs.
        let text = String::from_utf8((33..120u8).collect()).unwrap();
        let g = DeBruijnGraph::build_static(
            &[text.as_str()],
            5,
            &Alphabet::byte(),
            &BuildConfig::new(2),
        )
        .unwrap();
        let bytes = graph_to_bytes(&g);
        let sizes = describe(&bytes).unwrap();
        assert_eq!(sizes.matrices, 2 * g.capacity() as usize * 4 * 8);
        assert_eq!(sizes.parent_specs, 2 * g.capacity() as usize);
        let loaded = graph_from_bytes(&bytes).unwrap();
        assert_eq!(loaded.node_count(), g.node_count());
        let probe = g.encode_kmer(&text[10..15]).unwrap();
        assert!(loaded.is_node(&probe));
        assert!(loaded.check_invariants().is_clean());

        // Custom table (not a preset): serialized inline.
        let custom = Alphabet::generic(20);
        let text: String = (0..200)
            .map(|i| (b'!' + (i * 7 % 20) as u8) as char)
            .collect();
        let g = DeBruijnGraph::build_static(&[text.as_str()], 4, &custom, &BuildConfig::new(3))
            .unwrap();
        let bytes = graph_to_bytes(&g);
        let sizes = describe(&bytes).unwrap();
        assert_eq!(sizes.alphabet_table, 20);
        let loaded = graph_from_bytes(&bytes).unwrap();
        assert_eq!(loaded.alphabet(), &custom);
        let probe = g.encode_kmer(&text[3..7]).unwrap();
        assert!(loaded.is_node(&probe));
    }

    #[test]
    fn wide_alphabet_jumbled_round_trips() {
        // sigma = 70 > 64: three-byte swap specs.
        let a = Alphabet::generic(70);
        let text: String = (0..300)
            .map(|i| (b'!' + (i * 11 % 70) as u8) as char)
            .collect();
        let j = JumbledIndex::build(&text, 6, &a, 4).unwrap();
        let bytes = jumbled_to_bytes(&j);
        let sizes = describe(&bytes).unwrap();
        assert_eq!(sizes.parent_specs, 3 * j.node_count());
        let loaded = jumbled_from_bytes(&bytes).unwrap();
        for start in [0usize, 40, 111] {
            let window = &text[start..start + 6];
            assert!(loaded.has_match(window).unwrap());
            assert_eq!(
                j.has_match(window).unwrap(),
                loaded.has_match(window).unwrap()
            );
        }
        assert!(loaded.check_invariants().is_empty());
    }

    #[test]
    fn corruption_is_diagnosed() {
        let g = sample_graph();
        let bytes = graph_to_bytes(&g);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            graph_from_bytes(&bad).unwrap_err(),
            SnapshotError::BadMagic
        ));

        let mut bad = bytes.clone();
        bad[4] = 99;
        assert!(matches!(
            graph_from_bytes(&bad).unwrap_err(),
            SnapshotError::VersionMismatch(_)
        ));

        let truncated = &bytes[..bytes.len() - 12];
        assert!(matches!(
            graph_from_bytes(truncated).unwrap_err(),
            SnapshotError::Truncated
        ));

        // Flip one matrix payload byte: structure still parses, CRC trips.
        let sizes = describe(&bytes).unwrap();
        let offset =
            sizes.preamble + sizes.header + sizes.alphabet_table + sizes.index + sizes.matrices / 2;
        let mut bad = bytes.clone();
        bad[offset] ^= 0xff;
        assert!(matches!(
            graph_from_bytes(&bad).unwrap_err(),
            SnapshotError::ChecksumMismatch
        ));
    }

    #[test]
    fn sections_account_for_every_byte() {
        let g = sample_graph();
        let bytes = graph_to_bytes(&g);
        let s = describe(&bytes).unwrap();
        assert_eq!(
            s.preamble
                + s.header
                + s.alphabet_table
                + s.index
                + s.matrices
                + s.parent_specs
                + s.root_samples
                + s.crc,
            s.total
        );
        // Matrices: 2 matrices, m rows, rows padded to whole words.
        let m = g.capacity() as usize;
        assert_eq!(s.matrices, 2 * m * 8);
        // Specs: one byte per slot at sigma = 4.
        assert_eq!(s.parent_specs, m);
    }

    #[test]
    fn deterministic_build_same_bytes() {
        let a = graph_to_bytes(&sample_graph());
        let b = graph_to_bytes(&sample_graph());
        assert_eq!(a, b);
    }
}
