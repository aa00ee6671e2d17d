//! Anti-diagonal DP over packed cells.
//!
//! Cell `(i, j)` (0-based reference row `i`, read column `j`) lives on
//! diagonal `d = i + j`, and a diagonal stores its cells by increasing `j`.
//! For a run of cells `j in a..a+L` on diagonal `d`, the upper-left
//! neighbours are the run `a-1..a+L-1` of diagonal `d-2`, the upper
//! neighbours the run `a..a+L` of `d-1` and the left neighbours the run
//! `a-1..a+L-1` of `d-1`. Each step loads those three runs and fills `L`
//! cells at once; runs that stick out past a diagonal's ends are masked
//! with the negative-infinity cell.

use super::cell::{PackedCell, NEG_INF};
use super::{AlignmentResult, Cigar, CigarOp, DpError, ScoringScheme, SUPPORTED_LANES};

/// Anti-diagonal-major addressing for an `n x m` table.
#[derive(Clone, Debug, Default)]
pub struct DiagonalLayout {
    n: usize,
    m: usize,
    /// Offset of each diagonal's first cell; one extra entry holds `n * m`.
    starts: Vec<usize>,
}

impl DiagonalLayout {
    pub fn new(n: usize, m: usize) -> Self {
        let mut layout = DiagonalLayout::default();
        layout.reset(n, m);
        layout
    }

    fn reset(&mut self, n: usize, m: usize) {
        self.n = n;
        self.m = m;
        self.starts.clear();
        let mut acc = 0;
        for d in 0..n + m - 1 {
            self.starts.push(acc);
            acc += self.col_hi(d) + 1 - self.col_lo(d);
        }
        self.starts.push(acc);
    }

    pub fn diagonals(&self) -> usize {
        self.n + self.m - 1
    }

    pub fn cells(&self) -> usize {
        self.n * self.m
    }

    /// First read column present on diagonal `d`.
    #[inline(always)]
    pub fn col_lo(&self, d: usize) -> usize {
        d.saturating_sub(self.n - 1)
    }

    /// Last read column present on diagonal `d`.
    #[inline(always)]
    pub fn col_hi(&self, d: usize) -> usize {
        d.min(self.m - 1)
    }

    #[inline(always)]
    pub fn address(&self, i: usize, j: usize) -> usize {
        let d = i + j;
        self.starts[d] + j - self.col_lo(d)
    }

    #[inline(always)]
    fn diagonal_start(&self, d: usize) -> usize {
        self.starts[d]
    }
}

/// Reusable buffers for the anti-diagonal fill; one per worker.
#[derive(Debug, Default)]
pub struct DiagonalDp {
    layout: DiagonalLayout,
    table: Vec<PackedCell>,
    rev_window: Vec<u8>,
}

/// Loads `L` cells of diagonal `d` starting at read column `col` (may be
/// negative); cells off the diagonal read as negative infinity.
#[inline(always)]
fn load_run<const L: usize>(
    layout: &DiagonalLayout,
    table: &[PackedCell],
    d: isize,
    col: isize,
    out: &mut [PackedCell; L],
) {
    if d < 0 {
        *out = [PackedCell::NEG_INF; L];
        return;
    }
    let d = d as usize;
    let lo = layout.col_lo(d) as isize;
    let hi = layout.col_hi(d) as isize;
    let base = layout.diagonal_start(d) as isize - lo;
    if col >= lo && col + L as isize - 1 <= hi {
        let s = (base + col) as usize;
        out.copy_from_slice(&table[s..s + L]);
    } else {
        for (t, cell) in out.iter_mut().enumerate() {
            let c = col + t as isize;
            *cell = if c >= lo && c <= hi {
                table[(base + c) as usize]
            } else {
                PackedCell::NEG_INF
            };
        }
    }
}

impl DiagonalDp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn layout(&self) -> &DiagonalLayout {
        &self.layout
    }

    /// Packed cell at 0-based `(i, j)`.
    pub fn cell(&self, i: usize, j: usize) -> PackedCell {
        self.table[self.layout.address(i, j)]
    }

    pub fn align(
        &mut self,
        read: &[u8],
        window: &[u8],
        scoring: &ScoringScheme,
        lanes: usize,
    ) -> Result<AlignmentResult, DpError> {
        if !SUPPORTED_LANES.contains(&lanes) {
            return Err(DpError::Lanes(lanes));
        }
        scoring.check_inputs(read.len(), window.len())?;
        let best = match lanes {
            1 => self.fill::<1>(read, window, scoring),
            4 => self.fill::<4>(read, window, scoring),
            8 => self.fill::<8>(read, window, scoring),
            _ => self.fill::<16>(read, window, scoring),
        };
        Ok(self.traceback(read.len(), best, scoring))
    }

    /// Fills the table; returns the best M score and its 0-based cell.
    fn fill<const L: usize>(&mut self, read: &[u8], window: &[u8], scoring: &ScoringScheme) -> (i32, usize, usize) {
        let (n, m) = (window.len(), read.len());
        self.layout.reset(n, m);
        self.table.clear();
        self.table.resize(n * m, PackedCell::NEG_INF);
        self.rev_window.clear();
        self.rev_window.extend(window.iter().rev());

        let open = scoring.gap_open_penalty;
        let extend = scoring.gap_extend_penalty;
        let (match_bonus, mismatch) = (scoring.match_bonus, scoring.mismatch_penalty);

        let mut best = (0i32, usize::MAX, usize::MAX);
        let mut diag = [PackedCell::NEG_INF; L];
        let mut up = [PackedCell::NEG_INF; L];
        let mut left = [PackedCell::NEG_INF; L];
        let mut out = [PackedCell::NEG_INF; L];
        let mut read_bases = [0u8; L];
        let mut ref_bases = [0u8; L];

        for d in 0..self.layout.diagonals() {
            let lo = self.layout.col_lo(d);
            let hi = self.layout.col_hi(d);
            let start = self.layout.diagonal_start(d);
            let mut a = lo;
            while a <= hi {
                let len = (hi + 1 - a).min(L);
                let (di, ai) = (d as isize, a as isize);
                load_run(&self.layout, &self.table, di - 2, ai - 1, &mut diag);
                load_run(&self.layout, &self.table, di - 1, ai, &mut up);
                load_run(&self.layout, &self.table, di - 1, ai - 1, &mut left);
                // Read bases run forward along the diagonal, reference bases
                // backward; the reversed window makes both contiguous.
                let rev_at = n - 1 + a - d;
                read_bases[..len].copy_from_slice(&read[a..a + len]);
                ref_bases[..len].copy_from_slice(&self.rev_window[rev_at..rev_at + len]);

                for t in 0..L {
                    // A missing field reads as -512 here, which the 0 floor absorbs.
                    let pred = diag[t].max_field_raw().max(0);
                    let s = if read_bases[t] == ref_bases[t] && read_bases[t] < 4 {
                        match_bonus
                    } else {
                        mismatch
                    };
                    let iv = (left[t].m() + open).max(left[t].i() + extend);
                    let dv = (up[t].m() + open).max(up[t].d() + extend);
                    out[t] = PackedCell::pack(pred + s, iv, dv);
                }

                let dst = start + a - lo;
                self.table[dst..dst + len].copy_from_slice(&out[..len]);
                let run_best = out[..len].iter().map(|c| c.m()).max().unwrap_or(0);
                if run_best > 0 && run_best >= best.0 {
                    for (t, cell) in out[..len].iter().enumerate() {
                        let score = cell.m();
                        if score == run_best {
                            let (i, j) = (d - (a + t), a + t);
                            if score > best.0 || (i, j) < (best.1, best.2) {
                                best = (score, i, j);
                            }
                        }
                    }
                }
                a += len;
            }
        }
        best
    }

    fn traceback(&self, m: usize, best: (i32, usize, usize), scoring: &ScoringScheme) -> AlignmentResult {
        let (score, bi, bj) = best;
        if score <= 0 || score < scoring.min_report_score {
            return AlignmentResult::unaligned(score, m);
        }
        let open = scoring.gap_open_penalty;
        let at = |i: isize, j: isize| -> PackedCell {
            if i < 0 || j < 0 {
                PackedCell::NEG_INF
            } else {
                self.cell(i as usize, j as usize)
            }
        };

        // 0-based cell coordinates; signed so the upper-left step can leave the table.
        let (mut i, mut j) = (bi as isize, bj as isize);
        let mut state = CigarOp::Match;
        let mut ops = Vec::with_capacity(bi + bj + 2);
        loop {
            match state {
                CigarOp::Match => {
                    ops.push(CigarOp::Match);
                    let (pm, pi, pd) = at(i - 1, j - 1).unpack();
                    i -= 1;
                    j -= 1;
                    let pred = pm.max(pi).max(pd);
                    if pred <= 0 {
                        break;
                    }
                    state = if pm == pred {
                        CigarOp::Match
                    } else if pi == pred {
                        CigarOp::Ins
                    } else {
                        CigarOp::Del
                    };
                }
                CigarOp::Ins => {
                    ops.push(CigarOp::Ins);
                    let here = at(i, j).i();
                    let from = at(i, j - 1);
                    state = if from.m() != NEG_INF && from.m() + open == here {
                        CigarOp::Match
                    } else {
                        CigarOp::Ins
                    };
                    j -= 1;
                }
                CigarOp::Del => {
                    ops.push(CigarOp::Del);
                    let here = at(i, j).d();
                    let from = at(i - 1, j);
                    state = if from.m() != NEG_INF && from.m() + open == here {
                        CigarOp::Match
                    } else {
                        CigarOp::Del
                    };
                    i -= 1;
                }
                CigarOp::SoftClip => unreachable!(),
            }
        }
        // (i, j) is now the cell just before the alignment's first match.
        let (ref_start, read_start) = ((i + 1) as usize, (j + 1) as usize);
        AlignmentResult {
            score,
            ref_start,
            ref_end: bi + 1,
            cigar: Cigar::from_reversed_ops(m, read_start, bj + 1, &ops),
            aligned: true,
        }
    }
}

/// Anti-diagonal affine DP with `lanes` cells per step (1, 4, 8 or 16).
pub fn diagonal_affine_dp(
    read: &[u8],
    window: &[u8],
    scoring: &ScoringScheme,
    lanes: usize,
) -> Result<AlignmentResult, DpError> {
    DiagonalDp::new().align(read, window, scoring, lanes)
}
