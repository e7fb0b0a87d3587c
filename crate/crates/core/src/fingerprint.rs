//! Karp-Rabin polynomial fingerprints of k-mers with O(1) rolling, plus the
//! permutation-invariant histogram variant used for jumbled matching.

use crate::error::KmerError;
use crate::kmer::{Histogram, Kmer, RollDirection};
use crate::rng::SplitMix64;

/// Production modulus: the Mersenne prime 2^61 - 1.
pub const MERSENNE_P61: u64 = (1u64 << 61) - 1;

/// A fingerprint value in `0..p`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub u64);

impl std::fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "fp({})", self.0)
    }
}

/// Fingerprint parameters: prime modulus `p`, random base `r`, and the
/// precomputed powers needed for O(1) rolling and histogram replacement.
///
/// Only `r` is redrawn on Las Vegas restarts; `p` stays fixed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KrParams {
    p: u64,
    r: u64,
    k: usize,
    /// r^(k-1) mod p: weight of the leftmost symbol.
    r_pow_k1: u64,
    /// r^-1 mod p.
    r_inv: u64,
    /// r^c mod p for c < sigma, for histogram fingerprints.
    r_powers: Vec<u64>,
    seed: u64,
}

impl KrParams {
    /// Production parameters: p = 2^61 - 1, r drawn from the seeded stream.
    pub fn production(k: usize, sigma: u16, seed: u64) -> Self {
        let mut stream = SplitMix64::new(seed);
        Self::draw(k, sigma, seed, &mut stream)
    }

    /// Draw production parameters from an ongoing stream; consecutive draws
    /// implement Las Vegas restarts.
    pub(crate) fn draw(k: usize, sigma: u16, seed: u64, stream: &mut SplitMix64) -> Self {
        Self::with_base(
            MERSENNE_P61,
            draw_base(stream, MERSENNE_P61),
            k,
            sigma,
            seed,
        )
    }

    /// Small-modulus parameters for tests and documentation.
    pub fn toy(p: u64, r: u64, k: usize, sigma: u16) -> Self {
        Self::with_base(p, r, k, sigma, 0)
    }

    pub(crate) fn with_base(p: u64, r: u64, k: usize, sigma: u16, seed: u64) -> Self {
        assert!(p >= 3 && r >= 1 && r < p, "base must be in 1..p");
        let r_pow_k1 = pow_mod(r, (k as u64).saturating_sub(1), p);
        let r_inv = pow_mod(r, p - 2, p);
        debug_assert_eq!(mul_mod(r, r_inv, p), 1, "p must be prime");
        let mut r_powers = Vec::with_capacity(sigma as usize);
        let mut acc = 1u64;
        for _ in 0..sigma {
            r_powers.push(acc);
            acc = mul_mod(acc, r, p);
        }
        Self {
            p,
            r,
            k,
            r_pow_k1,
            r_inv,
            r_powers,
            seed,
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sigma(&self) -> u16 {
        self.r_powers.len() as u16
    }

    /// Full O(k) fingerprint: sum of code_i * r^(k-1-i), leftmost symbol
    /// weighted highest.
    pub fn fp(&self, v: &Kmer) -> Result<Fingerprint, KmerError> {
        if v.k() != self.k {
            return Err(KmerError::LengthMismatch {
                expected: self.k,
                got: v.k(),
            });
        }
        let mut acc = 0u64;
        for i in 0..v.k() {
            acc = add_mod(mul_mod(acc, self.r, self.p), v.code_at(i) as u64, self.p);
        }
        Ok(Fingerprint(acc))
    }

    /// O(1) rolling update; `dropped` is the symbol leaving on the shrinking
    /// side, `added` the one entering. Matches `fp(roll(u, direction, added))`.
    pub fn fp_roll(
        &self,
        f: Fingerprint,
        direction: RollDirection,
        dropped: u8,
        added: u8,
    ) -> Fingerprint {
        let p = self.p;
        match direction {
            RollDirection::AppendRight => {
                let without = sub_mod(f.0, mul_mod(dropped as u64, self.r_pow_k1, p), p);
                Fingerprint(add_mod(mul_mod(without, self.r, p), added as u64, p))
            }
            RollDirection::PrependLeft => {
                let without = mul_mod(sub_mod(f.0, dropped as u64, p), self.r_inv, p);
                Fingerprint(add_mod(without, mul_mod(added as u64, self.r_pow_k1, p), p))
            }
        }
    }

    /// Histogram fingerprint: sum of counts[c] * r^c; invariant under
    /// permutation of the underlying k-mer.
    pub fn hfp(&self, h: &Histogram) -> Fingerprint {
        debug_assert_eq!(h.sigma(), self.sigma());
        let mut acc = 0u64;
        for (c, &count) in h.counts().iter().enumerate() {
            acc = add_mod(acc, mul_mod(count as u64, self.r_powers[c], self.p), self.p);
        }
        Fingerprint(acc)
    }

    /// O(1) histogram update: one occurrence of `removed` swapped for `added`.
    pub fn hfp_replace(&self, f: Fingerprint, removed: u8, added: u8) -> Fingerprint {
        let p = self.p;
        let without = sub_mod(f.0, self.r_powers[removed as usize], p);
        Fingerprint(add_mod(without, self.r_powers[added as usize], p))
    }
}

fn draw_base(stream: &mut SplitMix64, p: u64) -> u64 {
    1 + stream.next_below(p - 1)
}

#[inline]
pub(crate) fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    let s = a + b;
    if s >= p {
        s - p
    } else {
        s
    }
}

#[inline]
pub(crate) fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + p - b
    }
}

/// Modular product; Mersenne shift-and-add reduction for the production
/// modulus, 128-bit division otherwise (toy moduli only).
#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    let wide = a as u128 * b as u128;
    if p == MERSENNE_P61 {
        // wide < 2^122, so lo, hi < 2^61 and the fold needs at most two
        // conditional subtractions.
        let lo = (wide & MERSENNE_P61 as u128) as u64;
        let hi = (wide >> 61) as u64;
        let mut s = lo + hi;
        if s >= MERSENNE_P61 {
            s -= MERSENNE_P61;
        }
        if s >= MERSENNE_P61 {
            s -= MERSENNE_P61;
        }
        s
    } else {
        (wide % p as u128) as u64
    }
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;

    fn toy() -> KrParams {
        KrParams::toy(97, 10, 3, 4)
    }

    fn dna(text: &str) -> Kmer {
        Kmer::encode(text, &Alphabet::dna(), text.len()).unwrap()
    }

    #[test]
    fn toy_vectors_from_hand_evaluation() {
        let params = toy();
        assert_eq!(params.fp(&dna("ACG")).unwrap(), Fingerprint(12));
        assert_eq!(params.fp(&dna("CGT")).unwrap(), Fingerprint(26));
        assert_eq!(params.fp(&dna("AAA")).unwrap(), Fingerprint(0));
    }

    #[test]
    fn toy_rolls_match_direct() {
        let params = toy();
        let f = params.fp_roll(Fingerprint(12), RollDirection::AppendRight, 0, 3);
        assert_eq!(f, Fingerprint(26));
        let b = params.fp_roll(Fingerprint(26), RollDirection::PrependLeft, 3, 0);
        assert_eq!(b, Fingerprint(12));
        let s = params.fp_roll(Fingerprint(0), RollDirection::AppendRight, 0, 0);
        assert_eq!(s, Fingerprint(0));
    }

    #[test]
    fn toy_histogram_vectors() {
        let params = toy();
        let acg = dna("ACG").histogram(4);
        let cgt = dna("CGT").histogram(4);
        assert_eq!(params.hfp(&acg), Fingerprint(14));
        assert_eq!(params.hfp(&cgt), Fingerprint(43));
        let gca = dna("GCA").histogram(4);
        assert_eq!(params.hfp(&gca), Fingerprint(14));
    }

    #[test]
    fn toy_histogram_replacement() {
        let params = toy();
        assert_eq!(params.hfp_replace(Fingerprint(14), 0, 3), Fingerprint(43));
        assert_eq!(params.hfp_replace(Fingerprint(43), 3, 0), Fingerprint(14));
        assert_eq!(params.hfp_replace(Fingerprint(14), 1, 1), Fingerprint(14));
    }

    #[test]
    fn rolling_agrees_with_direct_at_production_modulus() {
        // 10^5 random (k-mer, edit) pairs, both directions.
        let params = KrParams::production(11, 4, 99);
        let mut rng = SplitMix64::new(1234);
        let mut v = dna("ACGTACGTACG");
        let mut f = params.fp(&v).unwrap();
        for step in 0..100_000 {
            let c = rng.next_below(4) as u8;
            let dir = if step % 2 == 0 {
                RollDirection::AppendRight
            } else {
                RollDirection::PrependLeft
            };
            let dropped = match dir {
                RollDirection::AppendRight => v.first_symbol(),
                RollDirection::PrependLeft => v.last_symbol(),
            };
            v.roll_in_place(dir, c);
            f = params.fp_roll(f, dir, dropped, c);
            assert_eq!(f, params.fp(&v).unwrap(), "diverged at step {step}");
        }
    }

    #[test]
    fn histogram_replace_agrees_with_direct() {
        let params = KrParams::production(9, 4, 7);
        let mut rng = SplitMix64::new(555);
        let mut h = dna("ACGTACGTA").histogram(4);
        let mut f = params.hfp(&h);
        for _ in 0..100_000 {
            let removed = loop {
                let c = rng.next_below(4) as u8;
                if h.count(c) > 0 {
                    break c;
                }
            };
            let added = rng.next_below(4) as u8;
            h = h.replaced(removed, added).unwrap();
            f = params.hfp_replace(f, removed, added);
            assert_eq!(f, params.hfp(&h));
        }
    }

    #[test]
    fn production_fingerprints_are_collision_free_at_desk_scale() {
        // 10^6 distinct random 20-mers: expect zero collisions; any collision
        // fails and reports the seed for reproduction.
        let seed = 2024;
        let alphabet = Alphabet::dna();
        let params = KrParams::production(20, 4, seed);
        let mut rng = SplitMix64::new(seed);
        let mut seen_kmers = std::collections::HashSet::new();
        let mut seen_fps = std::collections::HashMap::new();
        while seen_kmers.len() < 1_000_000 {
            let codes: Vec<u8> = (0..20).map(|_| rng.next_below(4) as u8).collect();
            let kmer = Kmer::from_codes(&codes, &alphabet).unwrap();
            if !seen_kmers.insert(kmer.clone()) {
                continue;
            }
            let f = params.fp(&kmer).unwrap();
            if let Some(other) = seen_fps.insert(f, kmer.clone()) {
                panic!("fingerprint collision under seed {seed}: {other:?} vs {kmer:?}");
            }
        }
    }

    #[test]
    fn same_seed_same_base() {
        let a = KrParams::production(15, 4, 42);
        let b = KrParams::production(15, 4, 42);
        assert_eq!(a.r(), b.r());
        let c = KrParams::production(15, 4, 43);
        assert_ne!(a.r(), c.r());
    }
}
