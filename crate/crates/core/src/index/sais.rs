//! Suffix array construction by induced sorting (SA-IS), linear time.
//!
//! The input must end with a unique smallest symbol (the sentinel, `0`).

const EMPTY: u32 = u32::MAX;

/// Suffix array of `text`, whose last symbol must be a unique `0` and all
/// other symbols in `1..alphabet`.
pub fn suffix_array(text: &[u32], alphabet: usize) -> Vec<u32> {
    assert!(!text.is_empty(), "suffix_array: empty text");
    assert!(text.len() < EMPTY as usize, "suffix_array: text too long");
    debug_assert_eq!(*text.last().unwrap(), 0);
    let mut sa = vec![EMPTY; text.len()];
    sais(text, alphabet, &mut sa);
    sa
}

fn bucket_bounds(s: &[u32], k: usize) -> (Vec<u32>, Vec<u32>) {
    let mut counts = vec![0u32; k];
    for &c in s {
        counts[c as usize] += 1;
    }
    let mut starts = vec![0u32; k];
    let mut ends = vec![0u32; k];
    let mut sum = 0;
    for c in 0..k {
        starts[c] = sum;
        sum += counts[c];
        ends[c] = sum;
    }
    (starts, ends)
}

fn induce(s: &[u32], stype: &[bool], starts: &[u32], ends: &[u32], sa: &mut [u32]) {
    let n = s.len();
    let mut heads = starts.to_vec();
    for i in 0..n {
        let j = sa[i];
        if j != EMPTY && j > 0 && !stype[j as usize - 1] {
            let c = s[j as usize - 1] as usize;
            sa[heads[c] as usize] = j - 1;
            heads[c] += 1;
        }
    }
    let mut tails = ends.to_vec();
    for i in (0..n).rev() {
        let j = sa[i];
        if j != EMPTY && j > 0 && stype[j as usize - 1] {
            let c = s[j as usize - 1] as usize;
            tails[c] -= 1;
            sa[tails[c] as usize] = j - 1;
        }
    }
}

fn sais(s: &[u32], k: usize, sa: &mut [u32]) {
    let n = s.len();
    if n == 1 {
        sa[0] = 0;
        return;
    }
    let mut stype = vec![false; n];
    stype[n - 1] = true;
    for i in (0..n - 1).rev() {
        stype[i] = s[i] < s[i + 1] || (s[i] == s[i + 1] && stype[i + 1]);
    }
    let is_lms = |i: usize| i > 0 && stype[i] && !stype[i - 1];
    let (starts, ends) = bucket_bounds(s, k);

    // Sort LMS substrings.
    sa.fill(EMPTY);
    let mut tails = ends.clone();
    for i in (1..n).rev() {
        if is_lms(i) {
            let c = s[i] as usize;
            tails[c] -= 1;
            sa[tails[c] as usize] = i as u32;
        }
    }
    induce(s, &stype, &starts, &ends, sa);

    let mut m = 0;
    for i in 0..n {
        let p = sa[i];
        if is_lms(p as usize) {
            sa[m] = p;
            m += 1;
        }
    }

    // Name LMS substrings; equal substrings share a name.
    let mut names = vec![EMPTY; n / 2 + 1];
    let mut name = 0u32;
    let mut prev = EMPTY;
    for &entry in &sa[..m] {
        let pos = entry as usize;
        let mut differs = false;
        if prev == EMPTY {
            differs = true;
        } else {
            let prev = prev as usize;
            for d in 0..n {
                if s[pos + d] != s[prev + d] || stype[pos + d] != stype[prev + d] {
                    differs = true;
                    break;
                }
                if d > 0 && (is_lms(pos + d) || is_lms(prev + d)) {
                    break;
                }
            }
        }
        if differs {
            name += 1;
            prev = pos as u32;
        }
        names[pos / 2] = name - 1;
    }

    let lms_positions: Vec<u32> = (1..n).filter(|&i| is_lms(i)).map(|i| i as u32).collect();
    debug_assert_eq!(lms_positions.len(), m);
    let reduced: Vec<u32> = lms_positions.iter().map(|&p| names[p as usize / 2]).collect();

    let mut reduced_sa = vec![EMPTY; m];
    if (name as usize) < m {
        sais(&reduced, name as usize, &mut reduced_sa);
    } else {
        for (i, &c) in reduced.iter().enumerate() {
            reduced_sa[c as usize] = i as u32;
        }
    }

    sa.fill(EMPTY);
    let mut tails = ends.clone();
    for &r in reduced_sa.iter().rev() {
        let p = lms_positions[r as usize];
        let c = s[p as usize] as usize;
        tails[c] -= 1;
        sa[tails[c] as usize] = p;
    }
    induce(s, &stype, &starts, &ends, sa);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(text: &[u32]) -> Vec<u32> {
        let mut sa: Vec<u32> = (0..text.len() as u32).collect();
        sa.sort_by(|&a, &b| text[a as usize..].cmp(&text[b as usize..]));
        sa
    }

    #[test]
    fn small_texts() {
        assert_eq!(suffix_array(&[0], 1), vec![0]);
        let t = [2, 1, 3, 1, 3, 1, 0];
        assert_eq!(suffix_array(&t, 4), naive(&t));
        let t = [1, 1, 1, 1, 1, 1, 1, 0];
        assert_eq!(suffix_array(&t, 2), naive(&t));
    }

    proptest! {
        #[test]
        fn matches_naive_sort(mut body in proptest::collection::vec(1u32..5, 0..300)) {
            body.push(0);
            prop_assert_eq!(suffix_array(&body, 5), naive(&body));
        }

        #[test]
        fn repetitive_texts(unit in proptest::collection::vec(1u32..3, 1..5), reps in 1usize..40) {
            let mut text: Vec<u32> = unit.iter().cycle().take(unit.len() * reps).copied().collect();
            text.push(0);
            prop_assert_eq!(suffix_array(&text, 3), naive(&text));
        }
    }
}
