//! Alphabet coding: text bytes to dense symbol codes and back.

use crate::error::KmerError;

/// Maximum supported alphabet size.
pub const MAX_SIGMA: usize = 256;

/// Bidirectional map between text bytes and codes in `0..sigma`.
///
/// `lambda` is the per-symbol bit width used for packing, an integer
/// `max(1, ceil(log2 sigma))` so thresholds stay well defined at sigma = 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    chars: Vec<u8>,
    codes: [u16; 256],
    sigma: u16,
    lambda: u32,
}

const NO_CODE: u16 = u16::MAX;

impl Alphabet {
    /// Build from an explicit byte table; codes follow table order.
    pub fn new(table: &[u8]) -> Result<Self, KmerError> {
        let sigma = table.len();
        assert!(
            (2..=MAX_SIGMA).contains(&sigma),
            "alphabet size must be in 2..={MAX_SIGMA}"
        );
        let mut codes = [NO_CODE; 256];
        for (i, &ch) in table.iter().enumerate() {
            if codes[ch as usize] != NO_CODE {
                return Err(KmerError::UnknownSymbol(ch as char));
            }
            codes[ch as usize] = i as u16;
        }
        let sigma = sigma as u16;
        Ok(Self {
            chars: table.to_vec(),
            codes,
            sigma,
            lambda: lambda_for(sigma),
        })
    }

    /// ACGT, sigma = 4.
    pub fn dna() -> Self {
        Self::new(b"ACGT").unwrap()
    }

    /// 0/1, sigma = 2.
    pub fn binary() -> Self {
        Self::new(b"01").unwrap()
    }

    /// Identity map over all byte values, sigma = 256.
    pub fn byte() -> Self {
        let table: Vec<u8> = (0..=255).collect();
        Self::new(&table).unwrap()
    }

    /// Printable table of the given size (codes map onto a fixed sequence
    /// starting at '!'); used by the fuzzer and for ad-hoc sigma values.
    pub fn generic(sigma: u16) -> Self {
        assert!(
            (2..=94).contains(&sigma),
            "generic alphabet supports sigma in 2..=94"
        );
        let table: Vec<u8> = (0..sigma).map(|c| b'!' + c as u8).collect();
        Self::new(&table).unwrap()
    }

    pub fn sigma(&self) -> u16 {
        self.sigma
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn code(&self, ch: u8) -> Result<u8, KmerError> {
        match self.codes[ch as usize] {
            NO_CODE => Err(KmerError::UnknownSymbol(ch as char)),
            code => Ok(code as u8),
        }
    }

    pub fn char_for(&self, code: u8) -> u8 {
        self.chars[code as usize]
    }

    pub fn encode_bytes(&self, text: &[u8]) -> Result<Vec<u8>, KmerError> {
        text.iter().map(|&ch| self.code(ch)).collect()
    }

    pub fn encode_str(&self, text: &str) -> Result<Vec<u8>, KmerError> {
        self.encode_bytes(text.as_bytes())
    }

    pub fn decode_bytes(&self, codes: &[u8]) -> Vec<u8> {
        codes.iter().map(|&c| self.char_for(c)).collect()
    }

    pub fn decode(&self, codes: &[u8]) -> String {
        String::from_utf8_lossy(&self.decode_bytes(codes)).into_owned()
    }

    /// Table in code order, for serialization.
    pub fn table(&self) -> &[u8] {
        &self.chars
    }
}

pub(crate) fn lambda_for(sigma: u16) -> u32 {
    debug_assert!(sigma >= 2);
    let bits = 16 - (sigma - 1).leading_zeros();
    bits.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dna_codes_round_trip() {
        let a = Alphabet::dna();
        assert_eq!(a.sigma(), 4);
        assert_eq!(a.lambda(), 2);
        assert_eq!(a.encode_str("ACGT").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(a.decode(&[3, 2, 1, 0]), "TGCA");
    }

    #[test]
    fn unknown_symbol_is_rejected() {
        let a = Alphabet::dna();
        assert_eq!(a.code(b'N'), Err(KmerError::UnknownSymbol('N')));
    }

    #[test]
    fn byte_alphabet_is_identity() {
        let a = Alphabet::byte();
        assert_eq!(a.sigma(), 256);
        assert_eq!(a.lambda(), 8);
        assert_eq!(a.code(0xfe).unwrap(), 0xfe);
        assert_eq!(a.char_for(0x41), b'A');
    }

    #[test]
    fn lambda_is_at_least_one() {
        assert_eq!(lambda_for(2), 1);
        assert_eq!(lambda_for(3), 2);
        assert_eq!(lambda_for(4), 2);
        assert_eq!(lambda_for(5), 3);
        assert_eq!(lambda_for(20), 5);
        assert_eq!(lambda_for(64), 6);
        assert_eq!(lambda_for(256), 8);
    }
}
