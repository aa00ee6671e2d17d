//! Paired-end read simulation from a random reference.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use crate::dna;
use crate::index::Strand;
use crate::io::fastx::{MateSide, ReadRecord, ReadUnit};

pub fn random_reference(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..len).map(|_| b"ACGT"[rng.random_range(0..4)]).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub pairs: usize,
    pub read_len: usize,
    pub substitution_rate: f64,
    /// Per reference base; each event is an insertion or deletion of 1..=`max_indel` bases.
    pub indel_rate: f64,
    pub max_indel: usize,
    pub insert_mean: f64,
    pub insert_sd: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            pairs: 1000,
            read_len: 100,
            substitution_rate: 0.01,
            indel_rate: 0.001,
            max_indel: 5,
            insert_mean: 400.0,
            insert_sd: 50.0,
            seed: 1,
        }
    }
}

/// Where a simulated mate came from: leftmost forward-strand reference base
/// and the strand the read was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Origin {
    pub pos: usize,
    pub strand: Strand,
}

/// Encodes both origins in the pair name so they survive a SAM round trip.
pub fn pair_name(index: usize, a: Origin, b: Origin) -> String {
    format!("sim{index}_{}{}_{}{}", a.pos, a.strand, b.pos, b.strand)
}

/// Inverse of [`pair_name`].
pub fn parse_pair_name(name: &str) -> Option<(Origin, Origin)> {
    let mut parts = name.split('_').skip(1);
    let origin = |s: &str| -> Option<Origin> {
        let (pos, strand) = s.split_at(s.len().checked_sub(1)?);
        let strand = match strand {
            "+" => Strand::Forward,
            "-" => Strand::Reverse,
            _ => return None,
        };
        Some(Origin { pos: pos.parse().ok()?, strand })
    };
    let a = origin(parts.next()?)?;
    let b = origin(parts.next()?)?;
    Some((a, b))
}

/// Copies `read_len` bases starting at `start`, applying substitutions and
/// indels. Returns `None` when the reference runs out.
fn mutate(reference: &[u8], start: usize, cfg: &SimConfig, rng: &mut StdRng) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(cfg.read_len);
    let mut r = start;
    while out.len() < cfg.read_len {
        if r >= reference.len() {
            return None;
        }
        if rng.random_bool(cfg.indel_rate) {
            let len = rng.random_range(1..=cfg.max_indel);
            if rng.random_bool(0.5) {
                for _ in 0..len.min(cfg.read_len - out.len()) {
                    out.push(b"ACGT"[rng.random_range(0..4)]);
                }
            } else {
                r += len;
            }
            continue;
        }
        let base = reference[r];
        r += 1;
        if rng.random_bool(cfg.substitution_rate) {
            let others: Vec<u8> = b"ACGT".iter().copied().filter(|&b| b != base).collect();
            out.push(others[rng.random_range(0..3)]);
        } else {
            out.push(base);
        }
    }
    Some(out)
}

/// Forward-reverse pairs from a single reference sequence. Fragment lengths
/// are drawn from a normal distribution clamped to at least one read length.
pub fn simulate_pairs(reference: &[u8], cfg: &SimConfig) -> Vec<ReadUnit> {
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let normal = Normal::new(cfg.insert_mean, cfg.insert_sd).expect("valid insert distribution");
    let limit = reference.len().saturating_sub(2 * cfg.max_indel + 1);
    assert!(limit > cfg.read_len, "reference too short to simulate from");
    let mut units = Vec::with_capacity(cfg.pairs);
    while units.len() < cfg.pairs {
        let frag = (normal.sample(&mut rng).round() as isize).clamp(cfg.read_len as isize, limit as isize) as usize;
        let frag_start = rng.random_range(0..=limit - frag);
        let left_start = frag_start;
        let right_start = frag_start + frag - cfg.read_len;
        let (Some(left), Some(right)) = (
            mutate(reference, left_start, cfg, &mut rng),
            mutate(reference, right_start, cfg, &mut rng),
        ) else {
            continue;
        };
        let left_origin = Origin { pos: left_start, strand: Strand::Forward };
        let right_origin = Origin { pos: right_start, strand: Strand::Reverse };
        let right = dna::revcomp_ascii(&right);
        let ((a, ao), (b, bo)) = if rng.random_bool(0.5) {
            ((left, left_origin), (right, right_origin))
        } else {
            ((right, right_origin), (left, left_origin))
        };
        let name = pair_name(units.len(), ao, bo);
        let qual = vec![b'I'; cfg.read_len];
        let mut r1 = ReadRecord::new(name.as_str(), &a, Some(&qual[..]));
        let mut r2 = ReadRecord::new(name.as_str(), &b, Some(&qual[..]));
        r1.ordinal = units.len() as u64;
        r2.ordinal = units.len() as u64;
        r1.mate = MateSide::First;
        r2.mate = MateSide::Second;
        units.push(ReadUnit::Pair(r1, r2));
    }
    units
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        let a = Origin { pos: 12, strand: Strand::Forward };
        let b = Origin { pos: 340, strand: Strand::Reverse };
        assert_eq!(parse_pair_name(&pair_name(7, a, b)), Some((a, b)));
        assert_eq!(parse_pair_name("junk"), None);
    }

    #[test]
    fn clean_reads_match_reference() {
        let reference = random_reference(5000, 2);
        let cfg = SimConfig { pairs: 50, substitution_rate: 0.0, indel_rate: 0.0, ..Default::default() };
        let units = simulate_pairs(&reference, &cfg);
        assert_eq!(units.len(), 50);
        for unit in &units {
            let ReadUnit::Pair(a, b) = unit else { panic!() };
            let (oa, ob) = parse_pair_name(&a.name).unwrap();
            assert_ne!(oa.strand, ob.strand);
            for (read, o) in [(a, oa), (b, ob)] {
                let window = &reference[o.pos..o.pos + 100];
                match o.strand {
                    Strand::Forward => assert_eq!(read.bases, window),
                    Strand::Reverse => assert_eq!(read.bases, dna::revcomp_ascii(window)),
                }
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let reference = random_reference(5000, 2);
        let cfg = SimConfig { pairs: 20, ..Default::default() };
        assert_eq!(simulate_pairs(&reference, &cfg), simulate_pairs(&reference, &cfg));
    }
}
