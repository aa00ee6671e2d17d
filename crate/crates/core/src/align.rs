//! Per-read alignment: mismatch seeding, then affine DP around each hit.

use crate::dna;
use crate::dp::{window_around, Cigar, CigarOp, DiagonalDp, DpError, ScoringScheme, DEFAULT_LANES, MAX_READ_LEN, SUPPORTED_LANES};
use crate::index::{ReferenceIndex, Strand};
use crate::seed::{mismatch_search, HitOverflow, SearchBudget, SearchOutcome, DEFAULT_MIN_SEED_LEN};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignerConfig {
    pub budget: SearchBudget,
    pub scoring: ScoringScheme,
    pub lanes: usize,
    /// Reference bases added on each side of a projected read placement.
    pub margin: usize,
    pub min_seed_len: usize,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig {
            budget: SearchBudget::default(),
            scoring: ScoringScheme::default(),
            lanes: DEFAULT_LANES,
            margin: 16,
            min_seed_len: DEFAULT_MIN_SEED_LEN,
        }
    }
}

impl AlignerConfig {
    pub fn validate(&self) -> Result<(), DpError> {
        self.scoring.validate()?;
        if !SUPPORTED_LANES.contains(&self.lanes) {
            return Err(DpError::Lanes(self.lanes));
        }
        Ok(())
    }

    /// The controller-path configuration: no state cap, hits truncated at `max_hits`.
    pub fn fallback(&self, max_hits: usize) -> Self {
        AlignerConfig {
            budget: SearchBudget {
                max_mismatches: self.budget.max_mismatches,
                max_hits,
                max_states: usize::MAX,
                overflow: HitOverflow::Truncate,
            },
            ..self.clone()
        }
    }
}

/// One local alignment of a read against the reference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub seq_id: u32,
    /// 0-based leftmost aligned reference base.
    pub pos: usize,
    pub strand: Strand,
    pub score: i32,
    /// In reference orientation (of the reverse-complemented read on `-`).
    pub cigar: Cigar,
    pub edit_distance: u32,
}

impl Candidate {
    /// Exclusive end of the aligned reference span.
    pub fn end(&self) -> usize {
        self.pos + self.cigar.ref_len()
    }

    /// Where the read's first base would sit if its soft clips were aligned.
    pub fn unclipped_start(&self) -> isize {
        self.pos as isize - self.cigar.leading_clip() as isize
    }

    fn rank_key(&self) -> (std::cmp::Reverse<i32>, u32, usize, Strand) {
        (std::cmp::Reverse(self.score), self.seq_id, self.pos, self.strand)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReadOutcome {
    /// Candidates ranked best first; never empty.
    Mapped(Vec<Candidate>),
    Unmapped,
    /// The search budget ran out; nothing partial is kept.
    Deferred,
}

impl ReadOutcome {
    pub fn is_deferred(&self) -> bool {
        matches!(self, ReadOutcome::Deferred)
    }

    pub fn candidates(&self) -> &[Candidate] {
        match self {
            ReadOutcome::Mapped(c) => c,
            _ => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadAlignment {
    pub outcome: ReadOutcome,
    /// Seed-search states spent.
    pub states: usize,
}

/// Per-worker scratch space.
#[derive(Debug, Default)]
pub struct Scratch {
    dp: DiagonalDp,
    rc: Vec<u8>,
}

impl Scratch {
    pub fn new() -> Self {
        Self::default()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Placement {
    seq_id: u32,
    strand: Strand,
    start: isize,
}

fn edit_distance(read: &[u8], window: &[u8], ref_start: usize, cigar: &Cigar) -> u32 {
    let (mut r, mut q, mut nm) = (ref_start, 0usize, 0u32);
    for &(op, n) in cigar.ops() {
        let n = n as usize;
        match op {
            CigarOp::SoftClip => q += n,
            CigarOp::Match => {
                nm += (0..n)
                    .filter(|&k| window[r + k] != read[q + k] || read[q + k] >= dna::AMBIGUOUS)
                    .count() as u32;
                r += n;
                q += n;
            }
            CigarOp::Ins => {
                nm += n as u32;
                q += n;
            }
            CigarOp::Del => {
                nm += n as u32;
                r += n;
            }
        }
    }
    nm
}

/// Runs DP at each placement and collects aligned candidates.
fn extend_placements(
    index: &ReferenceIndex,
    read: &[u8],
    placements: &mut Vec<Placement>,
    config: &AlignerConfig,
    scratch: &mut Scratch,
) -> Vec<Candidate> {
    placements.sort_unstable();
    placements.dedup();
    let m = read.len();
    scratch.rc.clear();
    scratch.rc.extend(dna::revcomp_codes(read));
    let mut out = Vec::new();
    for p in placements.iter() {
        let (window, origin) = window_around(index, p.seq_id as usize, p.start, m, config.margin);
        if window.is_empty() {
            continue;
        }
        let oriented: &[u8] = if p.strand.is_reverse() { &scratch.rc } else { read };
        let Ok(res) = scratch.dp.align(oriented, &window, &config.scoring, config.lanes) else {
            continue;
        };
        if !res.aligned {
            continue;
        }
        out.push(Candidate {
            seq_id: p.seq_id,
            pos: origin + res.ref_start,
            strand: p.strand,
            score: res.score,
            edit_distance: edit_distance(oriented, &window, res.ref_start, &res.cigar),
            cigar: res.cigar,
        });
    }
    out
}

/// Ranks candidates and drops any that overlap a better one on the same
/// sequence and strand.
fn rank_candidates(mut cands: Vec<Candidate>) -> Vec<Candidate> {
    cands.sort_by_key(Candidate::rank_key);
    let mut kept: Vec<Candidate> = Vec::with_capacity(cands.len());
    for c in cands {
        let overlaps = kept
            .iter()
            .any(|k| k.seq_id == c.seq_id && k.strand == c.strand && k.pos < c.end() && c.pos < k.end());
        if !overlaps {
            kept.push(c);
        }
    }
    kept
}

/// Length of the exact-match pieces used when whole-read seeding finds nothing.
pub fn piece_len(read_len: usize, max_mismatches: u32, min_seed_len: usize) -> usize {
    (read_len / (max_mismatches as usize + 2)).max(min_seed_len)
}

/// Aligns one read given as 2-bit codes.
///
/// Whole-read mismatch search comes first. If it yields no aligned
/// candidate, the read is cut into non-overlapping pieces that are matched
/// exactly, and each piece's occurrences are projected back to a read
/// placement. Either search exceeding the budget defers the read.
pub fn align_read(index: &ReferenceIndex, read: &[u8], config: &AlignerConfig, scratch: &mut Scratch) -> ReadAlignment {
    let m = read.len();
    let unmapped = |states| ReadAlignment { outcome: ReadOutcome::Unmapped, states };
    if m < config.min_seed_len.max(1) || m > MAX_READ_LEN {
        return unmapped(0);
    }
    let budget = &config.budget;
    let search = match mismatch_search(index, read, budget, config.min_seed_len) {
        Ok(s) => s,
        Err(_) => return unmapped(0),
    };
    let mut states = search.states;
    let mut placements = Vec::new();
    match search.outcome {
        SearchOutcome::ExceededBudget => {
            return ReadAlignment { outcome: ReadOutcome::Deferred, states };
        }
        SearchOutcome::NoHit => {}
        SearchOutcome::Hits(hits) => {
            placements.extend(hits.iter().map(|h| Placement {
                seq_id: h.seq_id,
                strand: h.strand,
                start: h.offset as isize,
            }));
        }
    }
    let mut cands = extend_placements(index, read, &mut placements, config, scratch);

    if cands.is_empty() {
        placements.clear();
        let plen = piece_len(m, budget.max_mismatches, config.min_seed_len);
        let mut start = 0;
        while start + plen <= m {
            let piece = &read[start..start + plen];
            start += plen;
            if piece.iter().any(|&b| b >= dna::AMBIGUOUS) {
                continue;
            }
            let range = index.search_codes(piece);
            states += plen;
            if states > budget.max_states {
                return ReadAlignment { outcome: ReadOutcome::Deferred, states };
            }
            let width = range.width();
            if width == 0 {
                continue;
            }
            if width > budget.max_hits && budget.overflow == HitOverflow::Exceed {
                return ReadAlignment { outcome: ReadOutcome::Deferred, states };
            }
            let piece_start = start - plen;
            for text_pos in index.locate(range, budget.max_hits) {
                let Some(locus) = index.resolve(text_pos, plen) else {
                    continue;
                };
                let read_offset = match locus.strand {
                    Strand::Forward => piece_start,
                    Strand::Reverse => m - piece_start - plen,
                };
                placements.push(Placement {
                    seq_id: locus.seq_id,
                    strand: locus.strand,
                    start: locus.offset as isize - read_offset as isize,
                });
            }
        }
        cands = extend_placements(index, read, &mut placements, config, scratch);
    }

    let outcome = if cands.is_empty() {
        ReadOutcome::Unmapped
    } else {
        ReadOutcome::Mapped(rank_candidates(cands))
    };
    ReadAlignment { outcome, states }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::ReferenceIndex;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_dna(rng: &mut StdRng, n: usize) -> Vec<u8> {
        (0..n).map(|_| b"ACGT"[rng.random_range(0..4)]).collect()
    }

    fn setup() -> (ReferenceIndex, Vec<u8>) {
        let mut rng = StdRng::seed_from_u64(11);
        let seq = random_dna(&mut rng, 20_000);
        let index = ReferenceIndex::build(&[("chr", seq.clone())], 8).unwrap();
        (index, seq)
    }

    fn align(index: &ReferenceIndex, read: &[u8], config: &AlignerConfig) -> ReadAlignment {
        align_read(index, &dna::encode(read), config, &mut Scratch::new())
    }

    #[test]
    fn exact_forward_and_reverse() {
        let (index, seq) = setup();
        let config = AlignerConfig::default();
        let read = &seq[5000..5100];
        let res = align(&index, read, &config);
        let c = &res.outcome.candidates()[0];
        assert_eq!((c.pos, c.strand, c.score, c.edit_distance), (5000, Strand::Forward, 100, 0));
        assert_eq!(c.cigar.to_string(), "100M");

        let rc = dna::revcomp_ascii(read);
        let res = align(&index, &rc, &config);
        let c = &res.outcome.candidates()[0];
        assert_eq!((c.pos, c.strand, c.score), (5000, Strand::Reverse, 100));
    }

    #[test]
    fn indel_read_found_through_pieces() {
        let (index, seq) = setup();
        let mut read = seq[8000..8050].to_vec();
        read.extend_from_slice(&seq[8053..8103]);
        // Add three substitutions so the whole-read search cannot place it.
        for &p in &[10usize, 30, 90] {
            read[p] = if read[p] == b'A' { b'C' } else { b'A' };
        }
        let config = AlignerConfig::default();
        let res = align(&index, &read, &config);
        let c = &res.outcome.candidates()[0];
        assert_eq!(c.strand, Strand::Forward);
        assert!(c.unclipped_start().abs_diff(8000) <= 5, "{c:?}");
        assert!(c.cigar.to_string().contains('D'), "{}", c.cigar);
    }

    #[test]
    fn random_read_unmapped_and_short_read_unmapped() {
        let (index, _) = setup();
        let mut rng = StdRng::seed_from_u64(99);
        let read = random_dna(&mut rng, 100);
        assert_eq!(align(&index, &read, &AlignerConfig::default()).outcome, ReadOutcome::Unmapped);
        assert_eq!(align(&index, b"ACGTACGT", &AlignerConfig::default()).outcome, ReadOutcome::Unmapped);
    }

    #[test]
    fn tiny_budget_defers_and_fallback_recovers() {
        let (index, seq) = setup();
        let read = &seq[100..200];
        let tight = AlignerConfig {
            budget: SearchBudget { max_states: 1, ..SearchBudget::default() },
            ..AlignerConfig::default()
        };
        assert!(align(&index, read, &tight).outcome.is_deferred());
        let full = align(&index, read, &tight.fallback(1024));
        let normal = align(&index, read, &AlignerConfig::default());
        assert_eq!(full.outcome, normal.outcome);
    }

    #[test]
    fn repeats_defer_then_truncate() {
        let unit = b"ACGTTGCAAGCTTAGCCATGGATCCGATTACAGG";
        let mut seq = Vec::new();
        for _ in 0..120 {
            seq.extend_from_slice(unit);
            seq.extend_from_slice(b"TTTTTTTTTTTTTTTTTTTTTTTTTTTTTTTTTTT");
        }
        let index = ReferenceIndex::build(&[("rep", seq)], 4).unwrap();
        let read = unit.to_vec();
        assert!(align(&index, &read, &AlignerConfig::default()).outcome.is_deferred());
        let res = align(&index, &read, &AlignerConfig::default().fallback(1024));
        let cands = res.outcome.candidates();
        assert_eq!(cands.len(), 120);
        assert_eq!(cands[0].pos, 0);
    }
}
