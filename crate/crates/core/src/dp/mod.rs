//! Affine-gap local alignment of a read against a reference window.
//!
//! Two implementations share one set of recurrences (rows index the
//! reference window, columns the read):
//!
//! ```text
//! M[i,j] = max(0, M[i-1,j-1], I[i-1,j-1], D[i-1,j-1]) + s(ref_i, read_j)
//! I[i,j] = max(M[i,j-1] + open, I[i,j-1] + extend)
//! D[i,j] = max(M[i-1,j] + open, D[i-1,j] + extend)
//! ```
//!
//! [`scalar_affine_dp`] fills full `i32` matrices row by row and serves as
//! the oracle. [`diagonal_affine_dp`] keeps one [`PackedCell`] per entry in
//! anti-diagonal order and fills `lanes` cells of a diagonal per step. Both
//! select the maximum at the smallest `(i, j)` and trace back preferring
//! M over I over D, so their results agree bit for bit.

mod cell;
mod diagonal;
mod scalar;

pub use cell::{pack_cell, unpack_cell, PackedCell, BIAS, NEG_INF, SCORE_MAX, SCORE_MIN};
pub use diagonal::{diagonal_affine_dp, DiagonalDp, DiagonalLayout};
pub use scalar::scalar_affine_dp;

use std::fmt;

use thiserror::Error;

use crate::dna::AMBIGUOUS;
use crate::index::ReferenceIndex;
use crate::seed::SeedHit;

/// Longest read the 10-bit cell fields can score without saturating.
pub const MAX_READ_LEN: usize = SCORE_MAX as usize;
pub const SUPPORTED_LANES: [usize; 4] = [1, 4, 8, 16];
pub const DEFAULT_LANES: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DpError {
    #[error("read length {0} outside 1..={MAX_READ_LEN}")]
    ReadLength(usize),
    #[error("window length {len} outside 1..={max}")]
    WindowLength { len: usize, max: usize },
    #[error("invalid scoring: {0}")]
    Scoring(&'static str),
    #[error("scores for a {0} bp read would not fit a packed cell")]
    ScoreRange(usize),
    #[error("unsupported lane count {0} (expected 1, 4, 8 or 16)")]
    Lanes(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScoringScheme {
    pub match_bonus: i32,
    pub mismatch_penalty: i32,
    /// Charged on the first base of a gap.
    pub gap_open_penalty: i32,
    /// Charged on each further base of a gap.
    pub gap_extend_penalty: i32,
    pub min_report_score: i32,
    /// Windows may be up to `2 * read_len + window_slack` bases.
    pub window_slack: usize,
}

impl Default for ScoringScheme {
    fn default() -> Self {
        ScoringScheme {
            match_bonus: 1,
            mismatch_penalty: -4,
            gap_open_penalty: -6,
            gap_extend_penalty: -1,
            min_report_score: 20,
            window_slack: 256,
        }
    }
}

impl ScoringScheme {
    pub fn validate(&self) -> Result<(), DpError> {
        if self.match_bonus <= 0 {
            return Err(DpError::Scoring("match bonus must be positive"));
        }
        if self.mismatch_penalty >= 0 || self.gap_open_penalty >= 0 || self.gap_extend_penalty >= 0 {
            return Err(DpError::Scoring("penalties must be negative"));
        }
        if self.gap_open_penalty > self.gap_extend_penalty {
            return Err(DpError::Scoring("gap open must cost at least as much as gap extend"));
        }
        // Gap scores bottom out at a mismatch followed by a gap open.
        if self.mismatch_penalty + self.gap_open_penalty < SCORE_MIN {
            return Err(DpError::Scoring("penalties too large for packed cells"));
        }
        Ok(())
    }

    #[inline(always)]
    pub fn substitution(&self, ref_base: u8, read_base: u8) -> i32 {
        if ref_base == read_base && read_base < AMBIGUOUS {
            self.match_bonus
        } else {
            self.mismatch_penalty
        }
    }

    pub(crate) fn check_inputs(&self, read_len: usize, window_len: usize) -> Result<(), DpError> {
        self.validate()?;
        if read_len == 0 || read_len > MAX_READ_LEN {
            return Err(DpError::ReadLength(read_len));
        }
        let max = 2 * read_len + self.window_slack;
        if window_len == 0 || window_len > max {
            return Err(DpError::WindowLength { len: window_len, max });
        }
        if (read_len as i64) * (self.match_bonus as i64) > SCORE_MAX as i64 {
            return Err(DpError::ScoreRange(read_len));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CigarOp {
    /// Alignment match or mismatch; consumes read and reference.
    Match,
    /// Insertion to the reference; consumes read.
    Ins,
    /// Deletion from the read; consumes reference.
    Del,
    SoftClip,
}

impl CigarOp {
    pub fn code(self) -> char {
        match self {
            CigarOp::Match => 'M',
            CigarOp::Ins => 'I',
            CigarOp::Del => 'D',
            CigarOp::SoftClip => 'S',
        }
    }

    pub fn consumes_read(self) -> bool {
        !matches!(self, CigarOp::Del)
    }

    pub fn consumes_ref(self) -> bool {
        matches!(self, CigarOp::Match | CigarOp::Del)
    }
}

/// Run-length CIGAR; adjacent runs never share an operation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Cigar(Vec<(CigarOp, u32)>);

impl Cigar {
    pub fn new() -> Self {
        Cigar(Vec::new())
    }

    pub fn push(&mut self, op: CigarOp, len: u32) {
        if len == 0 {
            return;
        }
        match self.0.last_mut() {
            Some((last, n)) if *last == op => *n += len,
            _ => self.0.push((op, len)),
        }
    }

    pub fn ops(&self) -> &[(CigarOp, u32)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn read_len(&self) -> usize {
        self.0.iter().filter(|(op, _)| op.consumes_read()).map(|&(_, n)| n as usize).sum()
    }

    pub fn ref_len(&self) -> usize {
        self.0.iter().filter(|(op, _)| op.consumes_ref()).map(|&(_, n)| n as usize).sum()
    }

    pub fn leading_clip(&self) -> usize {
        match self.0.first() {
            Some(&(CigarOp::SoftClip, n)) => n as usize,
            _ => 0,
        }
    }

    pub fn trailing_clip(&self) -> usize {
        match self.0.last() {
            Some(&(CigarOp::SoftClip, n)) if self.0.len() > 1 => n as usize,
            _ => 0,
        }
    }

    pub fn reversed(&self) -> Cigar {
        Cigar(self.0.iter().rev().copied().collect())
    }

    /// Builds a CIGAR from operations collected end to start.
    pub(crate) fn from_reversed_ops(read_len: usize, read_start: usize, read_end: usize, rev_ops: &[CigarOp]) -> Cigar {
        let mut cigar = Cigar::new();
        cigar.push(CigarOp::SoftClip, read_start as u32);
        for &op in rev_ops.iter().rev() {
            cigar.push(op, 1);
        }
        cigar.push(CigarOp::SoftClip, (read_len - read_end) as u32);
        cigar
    }
}

impl fmt::Display for Cigar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("*");
        }
        for (op, n) in &self.0 {
            write!(f, "{n}{}", op.code())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignmentResult {
    pub score: i32,
    /// Window-relative half-open reference span.
    pub ref_start: usize,
    pub ref_end: usize,
    pub cigar: Cigar,
    pub aligned: bool,
}

impl AlignmentResult {
    pub(crate) fn unaligned(score: i32, read_len: usize) -> Self {
        let mut cigar = Cigar::new();
        cigar.push(CigarOp::SoftClip, read_len as u32);
        AlignmentResult {
            score: score.max(0),
            ref_start: 0,
            ref_end: 0,
            cigar,
            aligned: false,
        }
    }
}

/// Re-scores the alignment a CIGAR describes; independent of either DP fill.
pub fn score_cigar(read: &[u8], window: &[u8], ref_start: usize, cigar: &Cigar, scoring: &ScoringScheme) -> i32 {
    let (mut r, mut q, mut score) = (ref_start, 0usize, 0i32);
    for &(op, n) in cigar.ops() {
        let n = n as usize;
        match op {
            CigarOp::SoftClip => q += n,
            CigarOp::Match => {
                for k in 0..n {
                    score += scoring.substitution(window[r + k], read[q + k]);
                }
                r += n;
                q += n;
            }
            CigarOp::Ins => {
                score += scoring.gap_open_penalty + (n as i32 - 1) * scoring.gap_extend_penalty;
                q += n;
            }
            CigarOp::Del => {
                score += scoring.gap_open_penalty + (n as i32 - 1) * scoring.gap_extend_penalty;
                r += n;
            }
        }
    }
    score
}

/// Reference window around a seed hit, clipped to the sequence.
/// Returns the forward-strand codes and the window's start in the sequence.
pub fn extract_window(index: &ReferenceIndex, hit: &SeedHit, read_len: usize, margin: usize) -> (Vec<u8>, usize) {
    window_around(index, hit.seq_id as usize, hit.offset as isize, read_len, margin)
}

pub(crate) fn window_around(
    index: &ReferenceIndex,
    seq_id: usize,
    offset: isize,
    read_len: usize,
    margin: usize,
) -> (Vec<u8>, usize) {
    let seq_len = index.sequences()[seq_id].len as isize;
    let start = (offset - margin as isize).clamp(0, seq_len) as usize;
    let end = (offset + (read_len + margin) as isize).clamp(0, seq_len) as usize;
    (index.sequence_codes(seq_id, start, end), start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dna;
    use crate::index::Strand;

    #[test]
    fn cigar_merges_runs_and_formats() {
        let mut c = Cigar::new();
        c.push(CigarOp::SoftClip, 2);
        c.push(CigarOp::Match, 3);
        c.push(CigarOp::Match, 4);
        c.push(CigarOp::Del, 1);
        c.push(CigarOp::Ins, 0);
        c.push(CigarOp::Match, 1);
        assert_eq!(c.to_string(), "2S7M1D1M");
        assert_eq!(c.read_len(), 10);
        assert_eq!(c.ref_len(), 9);
        assert_eq!(c.leading_clip(), 2);
        assert_eq!(c.trailing_clip(), 0);
        assert_eq!(Cigar::new().to_string(), "*");
    }

    #[test]
    fn scoring_validation() {
        assert!(ScoringScheme::default().validate().is_ok());
        let bad = ScoringScheme { gap_open_penalty: -1, gap_extend_penalty: -2, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ScoringScheme { match_bonus: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ScoringScheme { mismatch_penalty: 1, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    fn hit(offset: usize) -> SeedHit {
        SeedHit { seq_id: 0, offset, strand: Strand::Forward, mismatches: 0, seed_score: 0 }
    }

    #[test]
    fn window_examples() {
        let seq: Vec<u8> = (0..500).map(|i| b"ACGT"[(i * 7 + i / 3) % 4]).collect();
        let idx = ReferenceIndex::build(&[("chr", &seq)], 8).unwrap();
        let (w, origin) = extract_window(&idx, &hit(0), 50, 5);
        assert_eq!(origin, 0);
        assert_eq!(w.len(), 55);
        let (w, origin) = extract_window(&idx, &hit(200), 50, 32);
        assert_eq!(w.len(), 50 + 64);
        assert_eq!(origin, 168);
        assert_eq!(dna::decode(&w), &seq[168..282]);
        let (w, origin) = extract_window(&idx, &hit(470), 30, 10);
        assert_eq!((w.len(), origin), (40, 460));
    }
}
