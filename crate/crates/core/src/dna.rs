//! 2-bit nucleotide codes and helpers shared by the index, seeding and DP.
//!
//! Bases are coded `A=0, C=1, G=2, T=3`. Reads may additionally carry
//! [`AMBIGUOUS`] (any IUPAC code other than ACGT), which never matches.

/// Code used for an ambiguous read base.
pub const AMBIGUOUS: u8 = 4;

const ENCODE: [u8; 256] = {
    let mut table = [AMBIGUOUS; 256];
    table[b'A' as usize] = 0;
    table[b'a' as usize] = 0;
    table[b'C' as usize] = 1;
    table[b'c' as usize] = 1;
    table[b'G' as usize] = 2;
    table[b'g' as usize] = 2;
    table[b'T' as usize] = 3;
    table[b't' as usize] = 3;
    table
};

const DECODE: [u8; 5] = *b"ACGTN";

#[inline]
pub fn encode_base(ascii: u8) -> u8 {
    ENCODE[ascii as usize]
}

#[inline]
pub fn decode_base(code: u8) -> u8 {
    DECODE[code.min(AMBIGUOUS) as usize]
}

/// True for letters accepted in sequence lines: ACGT plus the IUPAC ambiguity codes.
pub fn is_nucleotide_letter(ascii: u8) -> bool {
    matches!(
        ascii.to_ascii_uppercase(),
        b'A' | b'C' | b'G' | b'T' | b'U' | b'N' | b'R' | b'Y' | b'S' | b'W' | b'K' | b'M' | b'B'
            | b'D' | b'H' | b'V'
    )
}

pub fn encode(seq: &[u8]) -> Vec<u8> {
    seq.iter().map(|&b| encode_base(b)).collect()
}

pub fn decode(codes: &[u8]) -> Vec<u8> {
    codes.iter().map(|&c| decode_base(c)).collect()
}

#[inline]
pub fn complement_code(code: u8) -> u8 {
    if code < AMBIGUOUS {
        3 - code
    } else {
        AMBIGUOUS
    }
}

/// Reverse complement over 2-bit codes (ambiguous stays ambiguous).
pub fn revcomp_codes(codes: &[u8]) -> Vec<u8> {
    codes.iter().rev().map(|&c| complement_code(c)).collect()
}

/// Reverse complement over ASCII, preserving case-insensitivity by upper-casing.
pub fn revcomp_ascii(seq: &[u8]) -> Vec<u8> {
    seq.iter()
        .rev()
        .map(|&b| match b.to_ascii_uppercase() {
            b'A' => b'T',
            b'C' => b'G',
            b'G' => b'C',
            b'T' => b'A',
            _ => b'N',
        })
        .collect()
}

/// Bases packed four to a byte, least significant bits first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PackedBases {
    len: usize,
    bytes: Vec<u8>,
}

impl PackedBases {
    pub fn from_codes(codes: &[u8]) -> Self {
        let mut bytes = vec![0u8; codes.len().div_ceil(4)];
        for (i, &c) in codes.iter().enumerate() {
            debug_assert!(c < AMBIGUOUS);
            bytes[i / 4] |= (c & 3) << ((i % 4) * 2);
        }
        PackedBases {
            len: codes.len(),
            bytes,
        }
    }

    pub(crate) fn from_raw(len: usize, bytes: Vec<u8>) -> Option<Self> {
        (bytes.len() == len.div_ceil(4)).then_some(PackedBases { len, bytes })
    }

    pub(crate) fn raw_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        (self.bytes[i / 4] >> ((i % 4) * 2)) & 3
    }

    pub fn slice_codes(&self, start: usize, end: usize) -> Vec<u8> {
        (start..end).map(|i| self.get(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_roundtrip() {
        assert_eq!(decode(&encode(b"ACGTacgt")), b"ACGTACGT");
        assert_eq!(encode(b"NRY"), vec![AMBIGUOUS; 3]);
    }

    #[test]
    fn revcomp() {
        assert_eq!(revcomp_ascii(b"AACGTN"), b"NACGTT");
        assert_eq!(revcomp_codes(&encode(b"ACGT")), encode(b"ACGT"));
        assert_eq!(revcomp_codes(&[0, 0, 4, 1]), vec![2, 4, 3, 3]);
    }

    #[test]
    fn packing() {
        let codes = encode(b"ACGTTGCAA");
        let packed = PackedBases::from_codes(&codes);
        assert_eq!(packed.len(), 9);
        assert_eq!(packed.slice_codes(0, 9), codes);
        assert_eq!(packed.slice_codes(3, 6), encode(b"TTG"));
    }
}
