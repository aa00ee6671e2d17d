//! FM-index over a reference and its reverse complement.
//!
//! The indexed text is `fwd(seq_1) .. fwd(seq_k) revcomp(fwd(seq_1) .. fwd(seq_k)) $`,
//! so a single backward search finds hits on both strands. Matches that run
//! across a sequence boundary or the forward/reverse junction exist in the
//! text but are rejected when positions are resolved to [`Locus`] values.

mod occ;
mod persist;
mod sais;

pub use occ::{OccTable, BLOCK_SYMBOLS};
pub use persist::{load_index, save_index, FORMAT_VERSION, MAGIC};
pub use sais::suffix_array;

use std::fmt;

use thiserror::Error;

use crate::dna::{self, PackedBases};

pub const DEFAULT_SAMPLING_RATE: u32 = 8;
pub const DEFAULT_AMBIGUITY_SEED: u64 = 0x5eed_0a1b_2c3d_4e5f;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("duplicate sequence name `{0}`")]
    DuplicateName(String),
    #[error("sequence `{name}` has invalid character {byte:?} at offset {offset}")]
    InvalidBase { name: String, offset: usize, byte: char },
    #[error("reference too large to index ({0} bases)")]
    TooLarge(usize),
    #[error("sampling rate must be positive")]
    ZeroSamplingRate,
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("index file is truncated")]
    Truncated,
    #[error("index checksum mismatch")]
    ChecksumMismatch,
    #[error("index file is corrupt: {0}")]
    Corrupt(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strand {
    Forward,
    Reverse,
}

impl Strand {
    pub fn is_reverse(self) -> bool {
        self == Strand::Reverse
    }
}

impl fmt::Display for Strand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strand::Forward => "+",
            Strand::Reverse => "-",
        })
    }
}

/// A position on the reference: leftmost forward-strand coordinate of a match.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Locus {
    pub seq_id: u32,
    pub offset: usize,
    pub strand: Strand,
}

/// Half-open range of BWT rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SARange {
    pub low: usize,
    pub high: usize,
}

impl SARange {
    pub const EMPTY: SARange = SARange { low: 0, high: 0 };

    pub fn width(&self) -> usize {
        self.high - self.low
    }

    pub fn is_empty(&self) -> bool {
        self.high <= self.low
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceInfo {
    pub name: String,
    pub len: usize,
    /// Start in the concatenated forward text.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexMeta {
    pub sequences: Vec<SequenceInfo>,
    pub sampling_rate: u32,
    pub ambiguity_seed: u64,
    /// Forward-text positions whose ambiguity code was replaced.
    pub replaced: Vec<u64>,
}

/// Rank-capable bitvector marking the BWT rows that carry a suffix array sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct SampledRows {
    words: Vec<u64>,
    prefix: Vec<u32>,
}

impl SampledRows {
    fn from_words(words: Vec<u64>) -> Self {
        let mut prefix = Vec::with_capacity(words.len());
        let mut acc = 0u32;
        for w in &words {
            prefix.push(acc);
            acc += w.count_ones();
        }
        SampledRows { words, prefix }
    }

    #[inline]
    fn get(&self, row: usize) -> bool {
        (self.words[row / 64] >> (row % 64)) & 1 == 1
    }

    #[inline]
    fn rank(&self, row: usize) -> usize {
        let w = row / 64;
        let mask = (1u64 << (row % 64)) - 1;
        self.prefix[w] as usize + (self.words[w] & mask).count_ones() as usize
    }

    fn ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceIndex {
    /// C array: rows whose suffix starts with a symbol smaller than the base.
    counts: [usize; 4],
    occ: OccTable,
    sa_samples: Vec<u32>,
    sampled_rows: SampledRows,
    ref_bases: PackedBases,
    meta: IndexMeta,
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Replacement for an ambiguity code; depends only on seed and position.
pub fn ambiguity_replacement(seed: u64, position: u64) -> u8 {
    (splitmix64(seed ^ position.wrapping_mul(0x2545_f491_4f6c_dd1d)) >> 62) as u8
}

impl ReferenceIndex {
    /// Builds an index over named sequences.
    ///
    /// IUPAC ambiguity codes are replaced by a seed-deterministic base and
    /// their positions are kept in [`IndexMeta::replaced`].
    pub fn build<N, S>(reference: &[(N, S)], sampling_rate: u32) -> Result<Self, IndexError>
    where
        N: AsRef<str>,
        S: AsRef<[u8]>,
    {
        Self::build_with_seed(reference, sampling_rate, DEFAULT_AMBIGUITY_SEED)
    }

    pub fn build_with_seed<N, S>(
        reference: &[(N, S)],
        sampling_rate: u32,
        ambiguity_seed: u64,
    ) -> Result<Self, IndexError>
    where
        N: AsRef<str>,
        S: AsRef<[u8]>,
    {
        if sampling_rate == 0 {
            return Err(IndexError::ZeroSamplingRate);
        }
        let total: usize = reference.iter().map(|(_, s)| s.as_ref().len()).sum();
        if total == 0 {
            return Err(IndexError::EmptyReference);
        }
        // SA entries are u32 and the text is twice the reference plus a sentinel.
        if total >= (u32::MAX as usize - 2) / 2 {
            return Err(IndexError::TooLarge(total));
        }

        let mut sequences = Vec::with_capacity(reference.len());
        let mut seen = std::collections::HashSet::new();
        let mut forward = Vec::with_capacity(total);
        let mut replaced = Vec::new();
        for (name, seq) in reference {
            let name = name.as_ref();
            if !seen.insert(name.to_string()) {
                return Err(IndexError::DuplicateName(name.to_string()));
            }
            let offset = forward.len();
            for (i, &b) in seq.as_ref().iter().enumerate() {
                let code = dna::encode_base(b);
                if code < dna::AMBIGUOUS {
                    forward.push(code);
                } else if dna::is_nucleotide_letter(b) {
                    let pos = forward.len() as u64;
                    replaced.push(pos);
                    forward.push(ambiguity_replacement(ambiguity_seed, pos));
                } else {
                    return Err(IndexError::InvalidBase {
                        name: name.to_string(),
                        offset: i,
                        byte: b as char,
                    });
                }
            }
            sequences.push(SequenceInfo {
                name: name.to_string(),
                len: forward.len() - offset,
                offset,
            });
        }
        if !replaced.is_empty() {
            log::warn!("replaced {} ambiguous reference bases", replaced.len());
        }

        let len = forward.len();
        let mut text: Vec<u32> = Vec::with_capacity(2 * len + 1);
        text.extend(forward.iter().map(|&c| c as u32 + 1));
        text.extend(forward.iter().rev().map(|&c| 4 - c as u32));
        text.push(0);
        let sa = suffix_array(&text, 5);

        let rows = text.len();
        let mut bwt = vec![0u8; rows];
        let mut dollar_row = 0;
        let mut base_totals = [0usize; 4];
        let mut words = vec![0u64; rows.div_ceil(64)];
        let mut samples = Vec::with_capacity(rows / sampling_rate as usize + 1);
        for (row, &pos) in sa.iter().enumerate() {
            if pos == 0 {
                dollar_row = row;
            } else {
                let code = (text[pos as usize - 1] - 1) as u8;
                bwt[row] = code;
                base_totals[code as usize] += 1;
            }
            if pos % sampling_rate == 0 {
                words[row / 64] |= 1 << (row % 64);
                samples.push(pos);
            }
        }
        let mut counts = [0usize; 4];
        let mut acc = 1;
        for b in 0..4 {
            counts[b] = acc;
            acc += base_totals[b];
        }

        Ok(ReferenceIndex {
            counts,
            occ: OccTable::new(&bwt, dollar_row),
            sa_samples: samples,
            sampled_rows: SampledRows::from_words(words),
            ref_bases: PackedBases::from_codes(&forward),
            meta: IndexMeta {
                sequences,
                sampling_rate,
                ambiguity_seed,
                replaced,
            },
        })
    }

    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    pub fn sequences(&self) -> &[SequenceInfo] {
        &self.meta.sequences
    }

    /// Total forward reference length (all sequences).
    pub fn reference_len(&self) -> usize {
        self.ref_bases.len()
    }

    /// Indexed text length excluding the sentinel (forward plus reverse complement).
    pub fn text_len(&self) -> usize {
        2 * self.ref_bases.len()
    }

    pub fn bwt_len(&self) -> usize {
        self.occ.len()
    }

    pub fn counts(&self) -> [usize; 4] {
        self.counts
    }

    pub fn occ_table(&self) -> &OccTable {
        &self.occ
    }

    pub fn sa_samples(&self) -> &[u32] {
        &self.sa_samples
    }

    pub fn replaced_count(&self) -> usize {
        self.meta.replaced.len()
    }

    pub fn full_range(&self) -> SARange {
        SARange {
            low: 0,
            high: self.bwt_len(),
        }
    }

    #[inline]
    pub fn occ(&self, prefix: usize, base: u8) -> usize {
        self.occ.occ(prefix, base)
    }

    /// BWT symbol at `row` as a code, `None` for the sentinel.
    pub fn bwt_symbol(&self, row: usize) -> Option<u8> {
        self.occ.symbol(row)
    }

    /// Rows of `base` followed by the pattern represented by `range`.
    #[inline]
    pub fn backward_extend(&self, range: SARange, base: u8) -> SARange {
        debug_assert!(base < 4);
        if range.is_empty() {
            return SARange::EMPTY;
        }
        let c = self.counts[base as usize];
        SARange {
            low: c + self.occ.occ(range.low, base),
            high: c + self.occ.occ(range.high, base),
        }
    }

    /// [`backward_extend`](Self::backward_extend) for all four bases at once.
    #[inline]
    pub fn backward_extend_all(&self, range: SARange) -> [SARange; 4] {
        if range.is_empty() {
            return [SARange::EMPTY; 4];
        }
        let low = self.occ.occ_all(range.low);
        let high = self.occ.occ_all(range.high);
        std::array::from_fn(|b| SARange {
            low: self.counts[b] + low[b],
            high: self.counts[b] + high[b],
        })
    }

    /// Exact backward search over 2-bit codes.
    pub fn search_codes(&self, pattern: &[u8]) -> SARange {
        let mut range = self.full_range();
        for &b in pattern.iter().rev() {
            if b >= 4 {
                return SARange::EMPTY;
            }
            range = self.backward_extend(range, b);
            if range.is_empty() {
                return SARange::EMPTY;
            }
        }
        range
    }

    /// Number of occurrences of an ASCII ACGT pattern in the indexed text.
    pub fn count_occurrences(&self, pattern: &[u8]) -> Result<usize, IndexError> {
        if pattern.is_empty() {
            return Err(IndexError::InvalidPattern("empty pattern".into()));
        }
        let mut codes = Vec::with_capacity(pattern.len());
        for &b in pattern {
            let c = dna::encode_base(b);
            if c >= dna::AMBIGUOUS {
                return Err(IndexError::InvalidPattern(format!(
                    "non-ACGT symbol {:?}",
                    b as char
                )));
            }
            codes.push(c);
        }
        Ok(self.search_codes(&codes).width())
    }

    /// LF mapping for a non-sentinel row.
    #[inline]
    pub fn lf(&self, row: usize) -> Option<usize> {
        self.occ
            .symbol(row)
            .map(|b| self.counts[b as usize] + self.occ.occ(row, b))
    }

    /// Suffix array value of a row, walking LF to the nearest sample.
    pub fn sa_value(&self, mut row: usize) -> usize {
        let mut steps = 0;
        loop {
            if self.sampled_rows.get(row) {
                return self.sa_samples[self.sampled_rows.rank(row)] as usize + steps;
            }
            // The row with suffix-array value 0 is always sampled, so LF never
            // reaches the sentinel here.
            row = self.lf(row).expect("unsampled sentinel row");
            steps += 1;
        }
    }

    /// Text positions of the first `min(width, limit)` rows of `range`.
    pub fn locate(&self, range: SARange, limit: usize) -> Vec<usize> {
        if range.is_empty() {
            return Vec::new();
        }
        let end = range.high.min(range.low.saturating_add(limit));
        (range.low..end).map(|row| self.sa_value(row)).collect()
    }

    /// Maps a match `[text_pos, text_pos + len)` to a reference locus, or `None`
    /// when the match spans a sequence boundary or the strand junction.
    pub fn resolve(&self, text_pos: usize, len: usize) -> Option<Locus> {
        let fwd_len = self.reference_len();
        if len == 0 {
            return None;
        }
        let (start, strand) = if text_pos + len <= fwd_len {
            (text_pos, Strand::Forward)
        } else if text_pos >= fwd_len && text_pos + len <= 2 * fwd_len {
            (2 * fwd_len - text_pos - len, Strand::Reverse)
        } else {
            return None;
        };
        let seq_id = self.sequence_at(start);
        let info = &self.meta.sequences[seq_id];
        (start + len <= info.offset + info.len).then_some(Locus {
            seq_id: seq_id as u32,
            offset: start - info.offset,
            strand,
        })
    }

    /// Sequence containing forward-text position `pos`.
    pub fn sequence_at(&self, pos: usize) -> usize {
        let seqs = &self.meta.sequences;
        // Last sequence whose offset <= pos and which is non-empty.
        let idx = seqs.partition_point(|s| s.offset <= pos);
        let mut id = idx.saturating_sub(1);
        while seqs[id].len == 0 && id + 1 < seqs.len() {
            id += 1;
        }
        id
    }

    /// Forward-strand codes of `seq_id` over `[start, end)`, clipped to the sequence.
    pub fn sequence_codes(&self, seq_id: usize, start: usize, end: usize) -> Vec<u8> {
        let info = &self.meta.sequences[seq_id];
        let end = end.min(info.len);
        let start = start.min(end);
        self.ref_bases
            .slice_codes(info.offset + start, info.offset + end)
    }

    /// The indexed text (forward + reverse complement) as codes, without the sentinel.
    pub fn text_codes(&self) -> Vec<u8> {
        let fwd = self.ref_bases.slice_codes(0, self.ref_bases.len());
        let mut text = fwd.clone();
        text.extend(dna::revcomp_codes(&fwd));
        text
    }

    /// Walks LF from the sentinel row; yields the indexed text reversed.
    pub fn lf_walk_from_sentinel(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.text_len());
        let mut row = 0;
        while let Some(b) = self.occ.symbol(row) {
            out.push(b);
            row = self.counts[b as usize] + self.occ.occ(row, b);
        }
        out
    }

    pub(crate) fn ref_bases(&self) -> &PackedBases {
        &self.ref_bases
    }

    pub(crate) fn sampled_row_words(&self) -> &[u64] {
        &self.sampled_rows.words
    }

    pub(crate) fn from_parts(
        counts: [usize; 4],
        occ: OccTable,
        sa_samples: Vec<u32>,
        sampled_words: Vec<u64>,
        ref_bases: PackedBases,
        meta: IndexMeta,
    ) -> Result<Self, IndexError> {
        let sampled_rows = SampledRows::from_words(sampled_words);
        if sampled_rows.words.len() != occ.len().div_ceil(64) {
            return Err(IndexError::Corrupt("sampled-row bitvector length"));
        }
        if sampled_rows.ones() != sa_samples.len() {
            return Err(IndexError::Corrupt("sample count"));
        }
        if occ.len() != 2 * ref_bases.len() + 1 {
            return Err(IndexError::Corrupt("bwt length"));
        }
        let seq_total: usize = meta.sequences.iter().map(|s| s.len).sum();
        if seq_total != ref_bases.len() || meta.sampling_rate == 0 {
            return Err(IndexError::Corrupt("sequence table"));
        }
        Ok(ReferenceIndex {
            counts,
            occ,
            sa_samples,
            sampled_rows,
            ref_bases,
            meta,
        })
    }
}
