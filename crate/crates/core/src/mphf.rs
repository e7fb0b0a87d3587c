//! Minimal perfect hashing over 64-bit keys by hash-and-displace.
//!
//! Keys are grouped into buckets; each bucket searches for a displacement
//! value under which all of its keys land on distinct free positions of the
//! table. Lookup is two hashes and one array read, and is total: unknown
//! keys map to an arbitrary position in `0..n`.

use crate::rng::mix64;

const KEYS_PER_BUCKET: usize = 4;
const MAX_DISPLACEMENT: u64 = 1 << 22;

/// A minimal perfect hash function: bijective from the build-time key set
/// onto `0..n`, arbitrary (but in-range) elsewhere.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mphf {
    n: u64,
    seed: u64,
    displacements: Vec<u64>,
}

impl Mphf {
    /// Build over distinct keys; deterministic given `seed`. Returns None if
    /// no displacement assignment was found under this seed (retry with
    /// another); duplicate keys always fail.
    pub fn build(keys: &[u64], seed: u64) -> Option<Mphf> {
        let n = keys.len() as u64;
        if n == 0 {
            return Some(Mphf {
                n: 0,
                seed,
                displacements: Vec::new(),
            });
        }
        let nbuckets = (keys.len()).div_ceil(KEYS_PER_BUCKET).max(1);
        let mut buckets: Vec<Vec<u64>> = vec![Vec::new(); nbuckets];
        for &key in keys {
            buckets[bucket_of(key, seed, nbuckets as u64) as usize].push(key);
        }
        let mut order: Vec<usize> = (0..nbuckets).collect();
        order.sort_by_key(|&b| (std::cmp::Reverse(buckets[b].len()), b));

        let mut displacements = vec![0u64; nbuckets];
        let mut occupied = vec![false; keys.len()];
        let mut positions = Vec::with_capacity(KEYS_PER_BUCKET * 2);
        for &b in &order {
            let bucket = &buckets[b];
            if bucket.is_empty() {
                break;
            }
            let mut placed = false;
            'search: for d in 0..MAX_DISPLACEMENT {
                positions.clear();
                for &key in bucket {
                    let pos = position_of(key, seed, d, n) as usize;
                    if occupied[pos] || positions.contains(&pos) {
                        continue 'search;
                    }
                    positions.push(pos);
                }
                for &pos in &positions {
                    occupied[pos] = true;
                }
                displacements[b] = d;
                placed = true;
                break;
            }
            if !placed {
                return None;
            }
        }
        Some(Mphf {
            n,
            seed,
            displacements,
        })
    }

    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn displacements(&self) -> &[u64] {
        &self.displacements
    }

    pub fn from_parts(n: u64, seed: u64, displacements: Vec<u64>) -> Mphf {
        Mphf {
            n,
            seed,
            displacements,
        }
    }

    /// Total lookup; build-time keys get their unique slot.
    #[inline]
    pub fn lookup(&self, key: u64) -> u64 {
        if self.n == 0 {
            return 0;
        }
        let b = bucket_of(key, self.seed, self.displacements.len() as u64);
        position_of(key, self.seed, self.displacements[b as usize], self.n)
    }
}

#[inline]
fn bucket_of(key: u64, seed: u64, nbuckets: u64) -> u64 {
    mix64(key ^ mix64(seed)) % nbuckets
}

#[inline]
fn position_of(key: u64, seed: u64, displacement: u64, n: u64) -> u64 {
    mix64(key.wrapping_add(mix64(
        seed ^ displacement.wrapping_mul(0xa24b_aed4_963e_e407),
    ))) % n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn distinct_keys(count: usize, seed: u64) -> Vec<u64> {
        let mut rng = SplitMix64::new(seed);
        let mut set = std::collections::HashSet::new();
        while set.len() < count {
            set.insert(rng.next_u64());
        }
        set.into_iter().collect()
    }

    #[test]
    fn bijective_on_build_keys() {
        for &count in &[1usize, 2, 7, 100, 10_000] {
            let keys = distinct_keys(count, count as u64);
            let mphf = Mphf::build(&keys, 9).expect("build");
            let mut slots: Vec<u64> = keys.iter().map(|&k| mphf.lookup(k)).collect();
            slots.sort_unstable();
            let expected: Vec<u64> = (0..count as u64).collect();
            assert_eq!(slots, expected);
        }
    }

    #[test]
    fn unknown_keys_stay_in_range() {
        let keys = distinct_keys(1000, 3);
        let mphf = Mphf::build(&keys, 4).unwrap();
        let mut rng = SplitMix64::new(77);
        for _ in 0..10_000 {
            assert!(mphf.lookup(rng.next_u64()) < 1000);
        }
    }

    #[test]
    fn duplicate_keys_fail_to_build() {
        let keys = vec![5, 5];
        assert!(Mphf::build(&keys, 0).is_none());
    }

    #[test]
    fn empty_and_singleton() {
        let empty = Mphf::build(&[], 0).unwrap();
        assert_eq!(empty.len(), 0);
        let one = Mphf::build(&[42], 0).unwrap();
        assert_eq!(one.lookup(42), 0);
        assert_eq!(one.lookup(7), 0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let keys = distinct_keys(5000, 11);
        let a = Mphf::build(&keys, 21).unwrap();
        let b = Mphf::build(&keys, 21).unwrap();
        assert_eq!(a, b);
    }
}
