//! Row-major full-matrix reference implementation.

use super::cell::NEG_INF;
use super::{AlignmentResult, Cigar, CigarOp, DpError, ScoringScheme};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Table {
    M,
    I,
    D,
}

/// Smith-Waterman with affine gaps over full `i32` matrices.
pub fn scalar_affine_dp(read: &[u8], window: &[u8], scoring: &ScoringScheme) -> Result<AlignmentResult, DpError> {
    scoring.check_inputs(read.len(), window.len())?;
    let (n, m) = (window.len(), read.len());
    let width = m + 1;
    let mut mt = vec![NEG_INF; (n + 1) * width];
    let mut it = vec![NEG_INF; (n + 1) * width];
    let mut dt = vec![NEG_INF; (n + 1) * width];
    let open = scoring.gap_open_penalty;
    let extend = scoring.gap_extend_penalty;

    let mut best = 0;
    let mut best_at = (0, 0);
    for i in 1..=n {
        for j in 1..=m {
            let here = i * width + j;
            let diag = (i - 1) * width + j - 1;
            let left = here - 1;
            let up = here - width;
            let pred = mt[diag].max(it[diag]).max(dt[diag]);
            mt[here] = pred.max(0) + scoring.substitution(window[i - 1], read[j - 1]);
            it[here] = (mt[left] + open).max(it[left] + extend);
            dt[here] = (mt[up] + open).max(dt[up] + extend);
            // I and D never exceed the M cell they branched from, so the
            // global maximum always sits in M.
            if mt[here] > best {
                best = mt[here];
                best_at = (i, j);
            }
        }
    }

    if best <= 0 || best < scoring.min_report_score {
        return Ok(AlignmentResult::unaligned(best, m));
    }

    let (end_i, end_j) = best_at;
    let (mut i, mut j) = best_at;
    let mut table = Table::M;
    let mut ops = Vec::with_capacity(n + m);
    loop {
        let here = i * width + j;
        match table {
            Table::M => {
                ops.push(CigarOp::Match);
                let diag = (i - 1) * width + j - 1;
                let (pm, pi, pd) = (mt[diag], it[diag], dt[diag]);
                i -= 1;
                j -= 1;
                let pred = pm.max(pi).max(pd);
                if pred <= 0 {
                    break;
                }
                table = if pm == pred {
                    Table::M
                } else if pi == pred {
                    Table::I
                } else {
                    Table::D
                };
            }
            Table::I => {
                ops.push(CigarOp::Ins);
                let left = here - 1;
                table = if mt[left] + open == it[here] { Table::M } else { Table::I };
                j -= 1;
            }
            Table::D => {
                ops.push(CigarOp::Del);
                let up = here - width;
                table = if mt[up] + open == dt[here] { Table::M } else { Table::D };
                i -= 1;
            }
        }
    }

    Ok(AlignmentResult {
        score: best,
        ref_start: i,
        ref_end: end_i,
        cigar: Cigar::from_reversed_ops(m, j, end_j, &ops),
        aligned: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dna::encode;

    fn run(read: &[u8], window: &[u8]) -> AlignmentResult {
        scalar_affine_dp(&encode(read), &encode(window), &ScoringScheme::default()).unwrap()
    }

    #[test]
    fn identity() {
        let r = scalar_affine_dp(&encode(b"ACGTACGTAC"), &encode(b"ACGTACGTAC"), &ScoringScheme {
            min_report_score: 1,
            ..Default::default()
        })
        .unwrap();
        assert_eq!((r.score, r.cigar.to_string(), r.ref_start, r.ref_end), (10, "10M".into(), 0, 10));
    }

    #[test]
    fn one_deletion_fixture_prefers_gapless_mismatch() {
        // 10 A + mismatch + 9 T = 15 beats 20 matches with a 1-base deletion (20 - 6 = 14),
        // and 15 is below the default report threshold of 20.
        let read = b"AAAAAAAAAATTTTTTTTTT";
        let window = b"AAAAAAAAAAGTTTTTTTTTT";
        let r = run(read, window);
        assert!(!r.aligned);
        assert_eq!(r.score, 15);
        let s = ScoringScheme { min_report_score: 1, ..Default::default() };
        let r = scalar_affine_dp(&encode(read), &encode(window), &s).unwrap();
        assert_eq!(r.score, 15);
        assert_eq!(r.cigar.to_string(), "20M");
        assert_eq!((r.ref_start, r.ref_end), (0, 20));
    }

    #[test]
    fn deletion_is_taken_when_it_pays() {
        let read = b"ACGTTGCAAGCTTACGGATCCAGTACGATCGA";
        let mut window = read[..16].to_vec();
        window.extend_from_slice(b"TTT");
        window.extend_from_slice(&read[16..]);
        let r = run(read, &window);
        assert_eq!(r.cigar.to_string(), "16M3D16M");
        assert_eq!(r.score, 32 - 6 - 2);
    }

    #[test]
    fn insertion_and_soft_clip() {
        let core = b"ACGTTGCAAGCTTACGGATCCAGTACGATCGA";
        let mut read = b"TTTTT".to_vec();
        read.extend_from_slice(&core[..16]);
        read.extend_from_slice(b"CC");
        read.extend_from_slice(&core[16..]);
        let mut window = b"GGGGG".to_vec();
        window.extend_from_slice(core);
        let r = run(&read, &window);
        assert_eq!(r.cigar.to_string(), "5S16M2I16M");
        assert_eq!((r.ref_start, r.ref_end), (5, 37));
        assert_eq!(r.cigar.read_len(), read.len());
    }

    #[test]
    fn no_positive_cell_is_unaligned() {
        let r = scalar_affine_dp(&encode(b"TTTT"), &encode(b"AAAA"), &ScoringScheme {
            min_report_score: 1,
            ..Default::default()
        })
        .unwrap();
        assert!(!r.aligned);
        assert_eq!(r.cigar.to_string(), "4S");
    }

    #[test]
    fn below_report_threshold_is_unaligned() {
        let r = run(b"ACGTACGTAC", b"ACGTACGTAC");
        assert!(!r.aligned);
        assert_eq!(r.score, 10);
    }

    #[test]
    fn input_bounds() {
        let s = ScoringScheme::default();
        assert_eq!(scalar_affine_dp(&[], &[0], &s), Err(DpError::ReadLength(0)));
        assert!(matches!(scalar_affine_dp(&[0], &[], &s), Err(DpError::WindowLength { .. })));
        assert!(matches!(scalar_affine_dp(&[0], &vec![0; 259], &s), Err(DpError::WindowLength { .. })));
        assert_eq!(scalar_affine_dp(&vec![0; 512], &[0; 10], &s), Err(DpError::ReadLength(512)));
        let heavy = ScoringScheme { match_bonus: 2, ..s };
        assert_eq!(scalar_affine_dp(&vec![0; 300], &[0; 10], &heavy), Err(DpError::ScoreRange(300)));
    }
}
