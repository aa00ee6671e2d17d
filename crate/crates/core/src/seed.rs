//! Few-mismatch seeding by depth-first backward search on the FM-index.
//!
//! The search starts at the read's 3' end and branches over substituted
//! bases while the mismatch budget allows. Every `backward_extend` call is
//! one search state; the state and hit caps in [`SearchBudget`] bound the
//! work spent on repetitive reads so they can be deferred to a slower path.

use thiserror::Error;

use crate::dna::{self, AMBIGUOUS};
use crate::index::{ReferenceIndex, SARange, Strand};

pub const DEFAULT_MIN_SEED_LEN: usize = 17;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeedError {
    #[error("read of length {len} is shorter than the minimum seed length {min}")]
    TooShort { len: usize, min: usize },
    #[error("max_hits must be at least 1")]
    ZeroHitCap,
}

/// What to do when more than `max_hits` candidate positions are found.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HitOverflow {
    /// Give up on the read and report [`SearchOutcome::ExceededBudget`].
    Exceed,
    /// Keep the best `max_hits` hits by the ordering rule.
    Truncate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_mismatches: u32,
    pub max_hits: usize,
    pub max_states: usize,
    pub overflow: HitOverflow,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_mismatches: 2,
            max_hits: 64,
            max_states: 8192,
            overflow: HitOverflow::Exceed,
        }
    }
}

impl SearchBudget {
    /// No state cap and no hit cap.
    pub fn unlimited(max_mismatches: u32) -> Self {
        SearchBudget {
            max_mismatches,
            max_hits: usize::MAX,
            max_states: usize::MAX,
            overflow: HitOverflow::Exceed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedHit {
    pub seq_id: u32,
    /// 0-based leftmost forward-strand position of the read's window.
    pub offset: usize,
    pub strand: Strand,
    pub mismatches: u32,
    /// Ungapped score with unit match and a mismatch cost of 4; higher is better.
    pub seed_score: i32,
}

impl SeedHit {
    fn order_key(&self) -> (u32, usize, u32, Strand) {
        (self.mismatches, self.offset, self.seq_id, self.strand)
    }
}

pub fn sort_hits(hits: &mut [SeedHit]) {
    hits.sort_by_key(SeedHit::order_key);
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Hits(Vec<SeedHit>),
    ExceededBudget,
    NoHit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchResult {
    pub outcome: SearchOutcome,
    /// Backward-extension steps spent.
    pub states: usize,
}

struct Dfs<'a> {
    index: &'a ReferenceIndex,
    read: &'a [u8],
    k: u32,
    budget: &'a SearchBudget,
    states: usize,
    width: usize,
    exceeded: bool,
    found: Vec<(SARange, u32)>,
}

impl Dfs<'_> {
    fn extend(&mut self, remaining: usize, range: SARange, mismatches: u32) {
        if remaining == 0 {
            self.width = self.width.saturating_add(range.width());
            self.found.push((range, mismatches));
            if self.budget.overflow == HitOverflow::Exceed && self.width > self.budget.max_hits {
                self.exceeded = true;
            }
            return;
        }
        let want = self.read[remaining - 1];
        // Exact base first, then substitutions in code order.
        let first = if want < AMBIGUOUS { Some(want) } else { None };
        let order = first.into_iter().chain((0..4u8).filter(|&b| Some(b) != first));
        let all = (mismatches < self.k).then(|| self.index.backward_extend_all(range));
        for base in order {
            let cost = mismatches + u32::from(Some(base) != first);
            if cost > self.k {
                continue;
            }
            self.states += 1;
            if self.states > self.budget.max_states {
                self.exceeded = true;
                return;
            }
            let next = match &all {
                Some(all) => all[base as usize],
                None => self.index.backward_extend(range, base),
            };
            if !next.is_empty() {
                self.extend(remaining - 1, next, cost);
            }
            if self.exceeded {
                return;
            }
        }
    }
}

/// Finds all windows on either strand within `budget.max_mismatches`
/// substitutions of `read` (2-bit codes; [`AMBIGUOUS`] never matches).
pub fn mismatch_search(
    index: &ReferenceIndex,
    read: &[u8],
    budget: &SearchBudget,
    min_seed_len: usize,
) -> Result<SearchResult, SeedError> {
    if read.len() < min_seed_len.max(1) {
        return Err(SeedError::TooShort {
            len: read.len(),
            min: min_seed_len.max(1),
        });
    }
    if budget.max_hits == 0 {
        return Err(SeedError::ZeroHitCap);
    }
    let mut dfs = Dfs {
        index,
        read,
        k: budget.max_mismatches,
        budget,
        states: 0,
        width: 0,
        exceeded: false,
        found: Vec::new(),
    };
    dfs.extend(read.len(), index.full_range(), 0);
    let states = dfs.states;
    if dfs.exceeded {
        return Ok(SearchResult {
            outcome: SearchOutcome::ExceededBudget,
            states,
        });
    }

    let mut found = dfs.found;
    found.sort_by_key(|&(_, mm)| mm);
    let mut hits = Vec::new();
    let mut stratum_start = 0;
    while stratum_start < found.len() {
        let mm = found[stratum_start].1;
        let stratum_end = stratum_start + found[stratum_start..].partition_point(|&(_, m)| m == mm);
        for &(range, _) in &found[stratum_start..stratum_end] {
            for pos in index.locate(range, usize::MAX) {
                if let Some(locus) = index.resolve(pos, read.len()) {
                    hits.push(SeedHit {
                        seq_id: locus.seq_id,
                        offset: locus.offset,
                        strand: locus.strand,
                        mismatches: mm,
                        seed_score: (read.len() as i32 - mm as i32) - 4 * mm as i32,
                    });
                }
            }
        }
        stratum_start = stratum_end;
        // Strata are ordered, so later ones cannot displace anything once the cap is met.
        if budget.overflow == HitOverflow::Truncate && hits.len() >= budget.max_hits {
            break;
        }
    }
    sort_hits(&mut hits);
    hits.dedup_by_key(|h| (h.seq_id, h.offset, h.strand));
    hits.truncate(budget.max_hits);

    let outcome = if hits.is_empty() {
        SearchOutcome::NoHit
    } else {
        SearchOutcome::Hits(hits)
    };
    Ok(SearchResult { outcome, states })
}

/// Brute-force Hamming scan over every window of both strands. Test oracle
/// for [`mismatch_search`]; `reference` holds one code vector per sequence.
pub fn enumerate_hamming_oracle(reference: &[Vec<u8>], read: &[u8], k: u32) -> Vec<SeedHit> {
    let total: usize = reference.iter().map(Vec::len).sum();
    assert!(total <= 1_000_000, "oracle is limited to 1 Mbp references");
    let m = read.len();
    let rc = dna::revcomp_codes(read);
    let mut hits = Vec::new();
    for (seq_id, seq) in reference.iter().enumerate() {
        if m == 0 || seq.len() < m {
            continue;
        }
        for offset in 0..=seq.len() - m {
            let window = &seq[offset..offset + m];
            for (strand, query) in [(Strand::Forward, read), (Strand::Reverse, &rc[..])] {
                let mm = window
                    .iter()
                    .zip(query)
                    .filter(|(r, q)| **q >= AMBIGUOUS || r != q)
                    .count() as u32;
                if mm <= k {
                    hits.push(SeedHit {
                        seq_id: seq_id as u32,
                        offset,
                        strand,
                        mismatches: mm,
                        seed_score: (m as i32 - mm as i32) - 4 * mm as i32,
                    });
                }
            }
        }
    }
    sort_hits(&mut hits);
    hits
}
