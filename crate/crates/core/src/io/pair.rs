//! Turning ranked candidates into SAM records, with paired-end resolution.

use thiserror::Error;

use super::fastx::ReadRecord;
use super::sam::{flags, mapq_estimate, oriented_seq, AlignmentRecord};
use crate::align::Candidate;
use crate::index::{SequenceInfo, Strand};

/// Accepted template lengths for a forward-reverse pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InsertModel {
    pub min_insert: usize,
    pub max_insert: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid insert window [{min}, {max}]")]
pub struct InsertModelError {
    pub min: usize,
    pub max: usize,
}

impl Default for InsertModel {
    fn default() -> Self {
        InsertModel { min_insert: 100, max_insert: 1000 }
    }
}

impl InsertModel {
    pub fn new(min_insert: usize, max_insert: usize) -> Result<Self, InsertModelError> {
        if min_insert == 0 || min_insert > max_insert {
            return Err(InsertModelError { min: min_insert, max: max_insert });
        }
        Ok(InsertModel { min_insert, max_insert })
    }

    /// Median ± 4 × MAD of the observed template lengths.
    pub fn estimate(inserts: &[usize]) -> Option<Self> {
        if inserts.is_empty() {
            return None;
        }
        let mid = median(inserts.to_vec());
        let mad = median(inserts.iter().map(|&x| x.abs_diff(mid)).collect());
        InsertModel::new(mid.saturating_sub(4 * mad).max(1), mid + 4 * mad).ok()
    }

    pub fn contains(&self, template_len: usize) -> bool {
        (self.min_insert..=self.max_insert).contains(&template_len)
    }
}

fn median(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v[(v.len() - 1) / 2]
}

/// Unsigned template length if both alignments sit on one sequence.
pub fn template_len(a: &Candidate, b: &Candidate) -> Option<usize> {
    (a.seq_id == b.seq_id).then(|| a.end().max(b.end()) - a.pos.min(b.pos))
}

/// Opposite strands with the forward mate leftmost.
pub fn is_forward_reverse(a: &Candidate, b: &Candidate) -> bool {
    if a.seq_id != b.seq_id || a.strand == b.strand {
        return false;
    }
    let (fwd, rev) = if a.strand == Strand::Forward { (a, b) } else { (b, a) };
    fwd.pos <= rev.pos && fwd.end() <= rev.end()
}

pub fn is_concordant(a: &Candidate, b: &Candidate, model: &InsertModel) -> bool {
    is_forward_reverse(a, b) && template_len(a, b).is_some_and(|t| model.contains(t))
}

/// Indices chosen for each mate and whether they form a proper pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairChoice {
    pub first: Option<usize>,
    pub second: Option<usize>,
    pub proper: bool,
}

/// Picks the concordant pair with the highest combined score (ties go to
/// the earliest-ranked candidates), else each mate's own best.
pub fn choose_pair(c1: &[Candidate], c2: &[Candidate], model: &InsertModel) -> PairChoice {
    let mut best: Option<(i32, usize, usize)> = None;
    for (i, a) in c1.iter().enumerate() {
        for (j, b) in c2.iter().enumerate() {
            let total = a.score + b.score;
            if best.is_some_and(|(s, _, _)| s >= total) || !is_concordant(a, b, model) {
                continue;
            }
            best = Some((total, i, j));
        }
    }
    match best {
        Some((_, i, j)) => PairChoice { first: Some(i), second: Some(j), proper: true },
        None => PairChoice {
            first: (!c1.is_empty()).then_some(0),
            second: (!c2.is_empty()).then_some(0),
            proper: false,
        },
    }
}

/// MAPQ of `cands[chosen]` against the best other candidate.
fn mapq_for(cands: &[Candidate], chosen: usize) -> u8 {
    let second = cands
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != chosen)
        .map(|(_, c)| c.score)
        .max();
    mapq_estimate(cands[chosen].score, second.map(|s| s.min(cands[chosen].score)), cands.len())
}

fn mapped_record(read: &ReadRecord, cand: &Candidate, mapq: u8, refs: &[SequenceInfo]) -> AlignmentRecord {
    let reverse = cand.strand.is_reverse();
    let (seq, qual) = oriented_seq(&read.bases, read.qualities.as_deref(), reverse);
    AlignmentRecord {
        qname: read.name.clone(),
        flag: if reverse { flags::REVERSE } else { 0 },
        rname: refs[cand.seq_id as usize].name.clone(),
        pos: cand.pos as u64 + 1,
        mapq,
        cigar: Some(cand.cigar.clone()),
        rnext: "*".into(),
        pnext: 0,
        tlen: 0,
        seq,
        qual,
        score: Some(cand.score),
        edit_distance: Some(cand.edit_distance),
    }
}

fn unmapped_record(read: &ReadRecord) -> AlignmentRecord {
    AlignmentRecord::unmapped(&read.name, &read.bases, read.qualities.as_deref())
}

/// Primary record for an unpaired read from its ranked candidates.
pub fn single_record(read: &ReadRecord, cands: &[Candidate], refs: &[SequenceInfo]) -> AlignmentRecord {
    if cands.is_empty() {
        unmapped_record(read)
    } else {
        mapped_record(read, &cands[0], mapq_for(cands, 0), refs)
    }
}

/// Primary records for both mates, with mate fields cross-filled.
pub fn resolve_pair(
    read1: &ReadRecord,
    cands1: &[Candidate],
    read2: &ReadRecord,
    cands2: &[Candidate],
    model: &InsertModel,
    refs: &[SequenceInfo],
) -> (AlignmentRecord, AlignmentRecord) {
    let choice = choose_pair(cands1, cands2, model);
    let build = |read: &ReadRecord, cands: &[Candidate], idx: Option<usize>| match idx {
        Some(i) => mapped_record(read, &cands[i], mapq_for(cands, i), refs),
        None => unmapped_record(read),
    };
    let mut r1 = build(read1, cands1, choice.first);
    let mut r2 = build(read2, cands2, choice.second);
    r1.flag |= flags::PAIRED | flags::FIRST_IN_PAIR;
    r2.flag |= flags::PAIRED | flags::SECOND_IN_PAIR;
    if choice.proper {
        r1.flag |= flags::PROPER_PAIR;
        r2.flag |= flags::PROPER_PAIR;
    }

    // An unmapped mate borrows its partner's placement.
    if r1.is_unmapped() && !r2.is_unmapped() {
        (r1.rname, r1.pos) = (r2.rname.clone(), r2.pos);
    } else if r2.is_unmapped() && !r1.is_unmapped() {
        (r2.rname, r2.pos) = (r1.rname.clone(), r1.pos);
    }
    if let (Some(i), Some(j)) = (choice.first, choice.second) {
        let (a, b) = (&cands1[i], &cands2[j]);
        if let Some(t) = template_len(a, b) {
            let t = t as i64;
            // Leftmost mate gets the positive sign; ties go to the first mate.
            let first_leftmost = (a.pos, a.strand) <= (b.pos, b.strand);
            r1.tlen = if first_leftmost { t } else { -t };
            r2.tlen = -r1.tlen;
        }
    }
    cross_fill(&mut r1, &r2);
    cross_fill(&mut r2, &r1);
    (r1, r2)
}

fn cross_fill(this: &mut AlignmentRecord, mate: &AlignmentRecord) {
    if mate.is_unmapped() {
        this.flag |= flags::MATE_UNMAPPED;
    }
    if mate.is_reverse() {
        this.flag |= flags::MATE_REVERSE;
    }
    if mate.rname == "*" {
        this.rnext = "*".into();
        this.pnext = 0;
    } else {
        this.rnext = if mate.rname == this.rname { "=".into() } else { mate.rname.clone() };
        this.pnext = mate.pos;
    }
}
