//! Bit-packed k-mers, rolling edits and character histograms.

use crate::alphabet::Alphabet;
use crate::error::KmerError;

/// Upper bound on k; keeps packed k-mers to a handful of words.
pub const MAX_K: usize = 256;

/// Direction of a rolling edit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RollDirection {
    /// Drop the leftmost symbol, append on the right: follow an outgoing edge.
    AppendRight,
    /// Drop the rightmost symbol, prepend on the left: follow an incoming edge.
    PrependLeft,
}

/// A length-k symbol sequence packed `lambda` bits per code, position 0
/// (the text-leftmost symbol) in the low bits of word 0.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Kmer {
    words: Vec<u64>,
    k: u32,
    lambda: u32,
}

impl Kmer {
    pub fn from_codes(codes: &[u8], alphabet: &Alphabet) -> Result<Self, KmerError> {
        let k = codes.len();
        assert!((1..=MAX_K).contains(&k), "k must be in 1..={MAX_K}");
        let lambda = alphabet.lambda();
        let sigma = alphabet.sigma();
        let nwords = words_for(k as u32, lambda);
        let mut kmer = Kmer {
            words: vec![0; nwords],
            k: k as u32,
            lambda,
        };
        for (i, &c) in codes.iter().enumerate() {
            if (c as u16) >= sigma {
                return Err(KmerError::SymbolOutOfRange { code: c, sigma });
            }
            kmer.set_code(i, c);
        }
        Ok(kmer)
    }

    /// Encode a text of exactly k characters.
    pub fn encode(text: &str, alphabet: &Alphabet, k: usize) -> Result<Self, KmerError> {
        let got = text.chars().count();
        if got != k {
            return Err(KmerError::LengthMismatch { expected: k, got });
        }
        let codes = alphabet.encode_str(text)?;
        Self::from_codes(&codes, alphabet)
    }

    pub fn k(&self) -> usize {
        self.k as usize
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn code_at(&self, i: usize) -> u8 {
        debug_assert!(i < self.k as usize);
        let offset = i as u32 * self.lambda;
        let (w, b) = ((offset / 64) as usize, offset % 64);
        let mask = code_mask(self.lambda);
        let mut v = self.words[w] >> b;
        if b + self.lambda > 64 {
            v |= self.words[w + 1] << (64 - b);
        }
        (v & mask) as u8
    }

    pub fn first_symbol(&self) -> u8 {
        self.code_at(0)
    }

    pub fn last_symbol(&self) -> u8 {
        self.code_at(self.k as usize - 1)
    }

    pub fn to_codes(&self) -> Vec<u8> {
        (0..self.k as usize).map(|i| self.code_at(i)).collect()
    }

    pub fn decode(&self, alphabet: &Alphabet) -> String {
        alphabet.decode(&self.to_codes())
    }

    /// Rolling edit; `c` must be a valid code for the graph's alphabet
    /// (checked against the packing width here, exactly at encode time).
    pub fn rolled(&self, direction: RollDirection, c: u8) -> Kmer {
        let mut out = self.clone();
        out.roll_in_place(direction, c);
        out
    }

    pub fn roll_in_place(&mut self, direction: RollDirection, c: u8) {
        match direction {
            RollDirection::AppendRight => {
                self.shift_down();
                self.set_code(self.k as usize - 1, c);
            }
            RollDirection::PrependLeft => {
                self.shift_up();
                self.set_code(0, c);
            }
        }
    }

    /// True when `self`'s length-(k-1) suffix equals `other`'s prefix,
    /// i.e. a de Bruijn edge self -> other is well formed.
    pub fn chainable_to(&self, other: &Kmer) -> bool {
        debug_assert_eq!(self.k, other.k);
        self.rolled(RollDirection::AppendRight, other.last_symbol()) == *other
    }

    /// Character histogram (Parikh vector) over `sigma` symbols.
    pub fn histogram(&self, sigma: u16) -> Histogram {
        let mut counts = vec![0u16; sigma as usize];
        for i in 0..self.k as usize {
            counts[self.code_at(i) as usize] += 1;
        }
        Histogram { counts }
    }

    /// Packed little-endian bytes, `ceil(k*lambda/8)` of them.
    pub fn packed_bytes(&self) -> Vec<u8> {
        let nbytes = (self.k as usize * self.lambda as usize).div_ceil(8);
        let mut out = Vec::with_capacity(nbytes);
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(nbytes);
        out
    }

    pub fn from_packed_bytes(bytes: &[u8], k: usize, lambda: u32) -> Result<Self, KmerError> {
        let nbytes = (k * lambda as usize).div_ceil(8);
        if bytes.len() != nbytes || !(1..=MAX_K).contains(&k) {
            return Err(KmerError::LengthMismatch {
                expected: nbytes,
                got: bytes.len(),
            });
        }
        let nwords = words_for(k as u32, lambda);
        let mut words = vec![0u64; nwords];
        for (i, &b) in bytes.iter().enumerate() {
            words[i / 8] |= (b as u64) << ((i % 8) * 8);
        }
        let mut kmer = Kmer {
            words,
            k: k as u32,
            lambda,
        };
        kmer.mask_tail();
        Ok(kmer)
    }

    fn set_code(&mut self, i: usize, c: u8) {
        let offset = i as u32 * self.lambda;
        let (w, b) = ((offset / 64) as usize, offset % 64);
        let mask = code_mask(self.lambda);
        self.words[w] &= !(mask << b);
        self.words[w] |= ((c as u64) & mask) << b;
        if b + self.lambda > 64 {
            let high_bits = b + self.lambda - 64;
            let high_mask = (1u64 << high_bits) - 1;
            self.words[w + 1] &= !high_mask;
            self.words[w + 1] |= (c as u64) >> (64 - b);
        }
    }

    /// Shift the whole bitstream down by lambda (drops position 0).
    fn shift_down(&mut self) {
        let n = self.words.len();
        let sh = self.lambda;
        for j in 0..n {
            let mut w = self.words[j] >> sh;
            if j + 1 < n {
                w |= self.words[j + 1] << (64 - sh);
            }
            self.words[j] = w;
        }
    }

    /// Shift the whole bitstream up by lambda (makes room at position 0).
    fn shift_up(&mut self) {
        let n = self.words.len();
        let sh = self.lambda;
        for j in (0..n).rev() {
            let mut w = self.words[j] << sh;
            if j > 0 {
                w |= self.words[j - 1] >> (64 - sh);
            }
            self.words[j] = w;
        }
        self.mask_tail();
    }

    fn mask_tail(&mut self) {
        let total = self.k * self.lambda;
        let used = total - 64 * (self.words.len() as u32 - 1);
        if used < 64 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << used) - 1;
        }
    }
}

impl std::fmt::Debug for Kmer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Kmer{:?}", self.to_codes())
    }
}

fn words_for(k: u32, lambda: u32) -> usize {
    ((k * lambda) as usize).div_ceil(64)
}

fn code_mask(lambda: u32) -> u64 {
    (1u64 << lambda) - 1
}

/// Symbol multiplicity vector of a k-mer; two strings are jumbled matches
/// iff their histograms coincide.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Histogram {
    counts: Vec<u16>,
}

impl Histogram {
    pub fn new(counts: Vec<u16>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u16] {
        &self.counts
    }

    pub fn sigma(&self) -> u16 {
        self.counts.len() as u16
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn count(&self, code: u8) -> u16 {
        self.counts[code as usize]
    }

    /// Replace one occurrence of `removed` by `added`; None if `removed`
    /// has no occurrence to give up.
    pub fn replaced(&self, removed: u8, added: u8) -> Option<Histogram> {
        if self.counts[removed as usize] == 0 {
            return None;
        }
        let mut out = self.clone();
        out.counts[removed as usize] -= 1;
        out.counts[added as usize] += 1;
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn dna(text: &str) -> Kmer {
        Kmer::encode(text, &Alphabet::dna(), text.len()).unwrap()
    }

    #[test]
    fn encode_matches_table_lookup() {
        assert_eq!(dna("ACG").to_codes(), vec![0, 1, 2]);
    }

    #[test]
    fn encode_length_mismatch() {
        let err = Kmer::encode("A", &Alphabet::dna(), 3).unwrap_err();
        assert_eq!(
            err,
            KmerError::LengthMismatch {
                expected: 3,
                got: 1
            }
        );
    }

    #[test]
    fn encode_unknown_symbol() {
        let err = Kmer::encode("ACN", &Alphabet::dna(), 3).unwrap_err();
        assert_eq!(err, KmerError::UnknownSymbol('N'));
    }

    #[test]
    fn roll_follows_edges() {
        let acg = dna("ACG");
        assert_eq!(acg.rolled(RollDirection::AppendRight, 3), dna("CGT"));
        assert_eq!(dna("CGT").rolled(RollDirection::PrependLeft, 0), dna("ACG"));
        assert_eq!(dna("AAA").rolled(RollDirection::AppendRight, 0), dna("AAA"));
    }

    #[test]
    fn histogram_counts_symbols() {
        assert_eq!(dna("ACG").histogram(4).counts(), &[1, 1, 1, 0]);
        assert_eq!(dna("AAA").histogram(4).counts(), &[3, 0, 0, 0]);
        let rolled = dna("ACG").rolled(RollDirection::AppendRight, 3);
        assert_eq!(rolled.histogram(4).counts(), &[0, 1, 1, 1]);
    }

    #[test]
    fn chainable_detects_overlap() {
        assert!(dna("ACG").chainable_to(&dna("CGT")));
        assert!(!dna("ACG").chainable_to(&dna("TTT")));
        assert!(dna("AAA").chainable_to(&dna("AAA")));
    }

    #[test]
    fn packed_round_trip_across_sigmas_and_k() {
        // 10^4 random k-mers over sigma in {2, 4, 20}, k in 1..=64.
        let mut rng = SplitMix64::new(0xfeed);
        let alphabets = [Alphabet::binary(), Alphabet::dna(), Alphabet::generic(20)];
        for trial in 0..10_000 {
            let alphabet = &alphabets[trial % 3];
            let k = 1 + rng.next_below(64) as usize;
            let codes: Vec<u8> = (0..k)
                .map(|_| rng.next_below(alphabet.sigma() as u64) as u8)
                .collect();
            let kmer = Kmer::from_codes(&codes, alphabet).unwrap();
            let text = kmer.decode(alphabet);
            let back = Kmer::encode(&text, alphabet, k).unwrap();
            assert_eq!(back, kmer);
            let packed = kmer.packed_bytes();
            let unpacked = Kmer::from_packed_bytes(&packed, k, alphabet.lambda()).unwrap();
            assert_eq!(unpacked, kmer);
        }
    }

    proptest! {
        #[test]
        fn roll_then_unroll_is_identity(codes in prop::collection::vec(0u8..4, 1..40), c in 0u8..4) {
            let alphabet = Alphabet::dna();
            let v = Kmer::from_codes(&codes, &alphabet).unwrap();
            let first = v.first_symbol();
            let back = v
                .rolled(RollDirection::AppendRight, c)
                .rolled(RollDirection::PrependLeft, first);
            prop_assert_eq!(back, v);
        }

        #[test]
        fn histogram_respects_rolling(codes in prop::collection::vec(0u8..4, 1..40), c in 0u8..4) {
            let alphabet = Alphabet::dna();
            let v = Kmer::from_codes(&codes, &alphabet).unwrap();
            let rolled = v.rolled(RollDirection::AppendRight, c);
            let expected = v
                .histogram(4)
                .replaced(v.first_symbol(), c)
                .unwrap();
            prop_assert_eq!(rolled.histogram(4), expected);
        }
    }
}
