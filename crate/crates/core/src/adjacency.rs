//! Per-slot incoming/outgoing edge-symbol bit matrices and the
//! confirmed-edge test.

use crate::node_index::SlotRemap;

/// Two capacity x sigma bit matrices. Row i of the outgoing matrix marks
/// the symbols a for which slot i has an edge to `roll(kmer_i, right, a)`;
/// the incoming matrix is symmetric. An edge is only trusted when both of
/// its bits are set ("confirmed"). Assemblers keep adjacency in the same
/// plain per-node bit rows; no compression is attempted here.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyMatrices {
    in_bits: Vec<u64>,
    out_bits: Vec<u64>,
    capacity: u32,
    sigma: u16,
    row_words: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    In,
    Out,
}

impl AdjacencyMatrices {
    pub fn new(capacity: u32, sigma: u16) -> Self {
        let row_words = (sigma as u32).div_ceil(64);
        let words = capacity as usize * row_words as usize;
        Self {
            in_bits: vec![0; words],
            out_bits: vec![0; words],
            capacity,
            sigma,
            row_words,
        }
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn sigma(&self) -> u16 {
        self.sigma
    }

    pub fn row_words(&self) -> u32 {
        self.row_words
    }

    /// Meaningful payload: 2 * capacity * sigma bits.
    pub fn payload_bits(&self) -> u64 {
        2 * self.capacity as u64 * self.sigma as u64
    }

    #[inline]
    fn word_index(&self, slot: u32, symbol: u8) -> (usize, u32) {
        debug_assert!(slot < self.capacity);
        debug_assert!((symbol as u16) < self.sigma);
        let w = slot as usize * self.row_words as usize + (symbol / 64) as usize;
        (w, symbol as u32 % 64)
    }

    fn bits(&self, side: Side) -> &[u64] {
        match side {
            Side::In => &self.in_bits,
            Side::Out => &self.out_bits,
        }
    }

    fn bits_mut(&mut self, side: Side) -> &mut [u64] {
        match side {
            Side::In => &mut self.in_bits,
            Side::Out => &mut self.out_bits,
        }
    }

    pub fn set(&mut self, side: Side, slot: u32, symbol: u8) {
        let (w, b) = self.word_index(slot, symbol);
        self.bits_mut(side)[w] |= 1 << b;
    }

    pub fn clear(&mut self, side: Side, slot: u32, symbol: u8) {
        let (w, b) = self.word_index(slot, symbol);
        self.bits_mut(side)[w] &= !(1 << b);
    }

    #[inline]
    pub fn get(&self, side: Side, slot: u32, symbol: u8) -> bool {
        let (w, b) = self.word_index(slot, symbol);
        self.bits(side)[w] >> b & 1 == 1
    }

    /// Set both bits of the edge `bX -> Xa`: OUT[i][a] at the source and
    /// IN[j][b] at the target. Idempotent.
    pub fn set_edge_bits(&mut self, i: u32, a: u8, j: u32, b: u8) {
        self.set(Side::Out, i, a);
        self.set(Side::In, j, b);
    }

    pub fn clear_edge_bits(&mut self, i: u32, a: u8, j: u32, b: u8) {
        self.clear(Side::Out, i, a);
        self.clear(Side::In, j, b);
    }

    /// True iff both bits of the edge are set.
    #[inline]
    pub fn confirmed(&self, i: u32, a: u8, j: u32, b: u8) -> bool {
        self.get(Side::Out, i, a) && self.get(Side::In, j, b)
    }

    /// Symbols with a set bit in the row, ascending; O(sigma).
    pub fn row_symbols(&self, side: Side, slot: u32) -> Vec<u8> {
        let mut out = Vec::new();
        let base = slot as usize * self.row_words as usize;
        let bits = self.bits(side);
        for w in 0..self.row_words as usize {
            let mut word = bits[base + w];
            while word != 0 {
                let b = word.trailing_zeros();
                out.push((w * 64) as u8 + b as u8);
                word &= word - 1;
            }
        }
        out
    }

    pub fn row_is_empty(&self, slot: u32) -> bool {
        let base = slot as usize * self.row_words as usize;
        let range = base..base + self.row_words as usize;
        self.in_bits[range.clone()].iter().all(|&w| w == 0)
            && self.out_bits[range].iter().all(|&w| w == 0)
    }

    /// Count of set outgoing bits over all rows (the graph's edge count).
    pub fn count_out_bits(&self) -> u64 {
        self.out_bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Rebuild after a slot relayout: moved rows keep their bits, everything
    /// else is zero.
    pub fn remapped(&self, remap: &SlotRemap) -> AdjacencyMatrices {
        let mut out = AdjacencyMatrices::new(remap.new_capacity, self.sigma);
        let rw = self.row_words as usize;
        for &(old, new) in &remap.moves {
            let (src, dst) = (old as usize * rw, new as usize * rw);
            out.in_bits[dst..dst + rw].copy_from_slice(&self.in_bits[src..src + rw]);
            out.out_bits[dst..dst + rw].copy_from_slice(&self.out_bits[src..src + rw]);
        }
        out
    }

    /// Row-major words of one matrix, for serialization.
    pub fn raw_words(&self, side: Side) -> &[u64] {
        self.bits(side)
    }

    pub fn from_raw_words(
        capacity: u32,
        sigma: u16,
        in_bits: Vec<u64>,
        out_bits: Vec<u64>,
    ) -> Self {
        let row_words = (sigma as u32).div_ceil(64);
        debug_assert_eq!(in_bits.len(), capacity as usize * row_words as usize);
        debug_assert_eq!(out_bits.len(), capacity as usize * row_words as usize);
        Self {
            in_bits,
            out_bits,
            capacity,
            sigma,
            row_words,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn set_and_confirm_an_edge() {
        // Edge ACG -> CGT with slots 0 and 1: OUT[0][T], IN[1][A].
        let mut adj = AdjacencyMatrices::new(2, 4);
        adj.set_edge_bits(0, 3, 1, 0);
        assert!(adj.confirmed(0, 3, 1, 0));
        assert!(!adj.confirmed(1, 0, 0, 3));
        assert_eq!(adj.row_symbols(Side::Out, 0), vec![3]);
        assert_eq!(adj.row_symbols(Side::In, 0), Vec::<u8>::new());
    }

    #[test]
    fn half_set_edges_are_not_confirmed() {
        let mut adj = AdjacencyMatrices::new(2, 4);
        adj.set(Side::Out, 0, 3);
        assert!(!adj.confirmed(0, 3, 1, 0));
    }

    #[test]
    fn set_is_idempotent_and_clear_wins() {
        let mut adj = AdjacencyMatrices::new(2, 4);
        adj.set_edge_bits(0, 3, 1, 0);
        adj.set_edge_bits(0, 3, 1, 0);
        adj.clear_edge_bits(0, 3, 1, 0);
        assert!(!adj.confirmed(0, 3, 1, 0));
        assert!(adj.row_is_empty(0));
        adj.clear_edge_bits(0, 3, 1, 0);
        assert!(adj.row_is_empty(0));
    }

    #[test]
    fn full_row_lists_all_symbols() {
        let mut adj = AdjacencyMatrices::new(1, 70);
        for c in 0..70u8 {
            adj.set(Side::Out, 0, c);
        }
        assert_eq!(adj.row_symbols(Side::Out, 0), (0..70u8).collect::<Vec<_>>());
    }

    #[test]
    fn payload_size_matches_definition() {
        let adj = AdjacencyMatrices::new(10, 4);
        assert_eq!(adj.payload_bits(), 2 * 10 * 4);
        assert_eq!(adj.raw_words(Side::In).len(), 10);
    }

    #[test]
    fn confirmed_is_monotone_over_random_triples() {
        let mut adj = AdjacencyMatrices::new(64, 16);
        let mut rng = SplitMix64::new(8);
        for _ in 0..10_000 {
            let i = rng.next_below(64) as u32;
            let j = rng.next_below(64) as u32;
            let a = rng.next_below(16) as u8;
            let b = rng.next_below(16) as u8;
            adj.set_edge_bits(i, a, j, b);
            assert!(adj.confirmed(i, a, j, b));
            adj.clear_edge_bits(i, a, j, b);
            assert!(!adj.confirmed(i, a, j, b));
        }
    }

    #[test]
    fn remap_moves_rows() {
        let mut adj = AdjacencyMatrices::new(4, 4);
        adj.set_edge_bits(1, 2, 3, 0);
        let remap = SlotRemap {
            new_capacity: 8,
            moves: vec![(1, 0), (3, 5)],
        };
        let adj = adj.remapped(&remap);
        assert!(adj.confirmed(0, 2, 5, 0));
        assert!(adj.row_is_empty(1));
        assert!(adj.row_is_empty(3));
    }
}
