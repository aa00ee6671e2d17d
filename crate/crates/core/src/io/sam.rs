//! SAM text output.

use std::io::{self, Write};

use crate::dna;
use crate::dp::Cigar;
use crate::index::ReferenceIndex;

pub mod flags {
    pub const PAIRED: u16 = 0x1;
    pub const PROPER_PAIR: u16 = 0x2;
    pub const UNMAPPED: u16 = 0x4;
    pub const MATE_UNMAPPED: u16 = 0x8;
    pub const REVERSE: u16 = 0x10;
    pub const MATE_REVERSE: u16 = 0x20;
    pub const FIRST_IN_PAIR: u16 = 0x40;
    pub const SECOND_IN_PAIR: u16 = 0x80;
    pub const SECONDARY: u16 = 0x100;
    pub const SUPPLEMENTARY: u16 = 0x800;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignmentRecord {
    pub qname: String,
    pub flag: u16,
    /// Reference name or `*`.
    pub rname: String,
    /// 1-based leftmost position, 0 when unplaced.
    pub pos: u64,
    pub mapq: u8,
    /// `None` prints as `*`.
    pub cigar: Option<Cigar>,
    /// `=`, `*` or a reference name.
    pub rnext: String,
    pub pnext: u64,
    pub tlen: i64,
    pub seq: Vec<u8>,
    pub qual: Option<Vec<u8>>,
    /// `AS:i` tag.
    pub score: Option<i32>,
    /// `NM:i` tag.
    pub edit_distance: Option<u32>,
}

impl AlignmentRecord {
    pub fn unmapped(qname: &str, seq: &[u8], qual: Option<&[u8]>) -> Self {
        AlignmentRecord {
            qname: qname.to_string(),
            flag: flags::UNMAPPED,
            rname: "*".into(),
            pos: 0,
            mapq: 0,
            cigar: None,
            rnext: "*".into(),
            pnext: 0,
            tlen: 0,
            seq: seq.to_vec(),
            qual: qual.map(<[u8]>::to_vec),
            score: None,
            edit_distance: None,
        }
    }

    pub fn is_unmapped(&self) -> bool {
        self.flag & flags::UNMAPPED != 0
    }

    pub fn is_primary(&self) -> bool {
        self.flag & (flags::SECONDARY | flags::SUPPLEMENTARY) == 0
    }

    pub fn is_reverse(&self) -> bool {
        self.flag & flags::REVERSE != 0
    }

    pub fn is_proper_pair(&self) -> bool {
        self.flag & flags::PROPER_PAIR != 0
    }

    pub fn write_line(&self, out: &mut Vec<u8>) {
        use std::io::Write as _;
        let cigar = self.cigar.as_ref().map_or_else(|| "*".to_string(), Cigar::to_string);
        // Writing into a Vec cannot fail.
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t",
            self.qname, self.flag, self.rname, self.pos, self.mapq, cigar, self.rnext, self.pnext, self.tlen
        );
        if self.seq.is_empty() {
            out.push(b'*');
        } else {
            out.extend_from_slice(&self.seq);
        }
        out.push(b'\t');
        match &self.qual {
            Some(q) if !q.is_empty() => out.extend_from_slice(q),
            _ => out.push(b'*'),
        }
        if let Some(score) = self.score {
            let _ = write!(out, "\tAS:i:{score}");
        }
        if let Some(nm) = self.edit_distance {
            let _ = write!(out, "\tNM:i:{nm}");
        }
        out.push(b'\n');
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamHeader {
    pub sequences: Vec<(String, usize)>,
    pub program_name: String,
    pub program_version: String,
    pub command_line: String,
}

impl SamHeader {
    pub fn from_index(index: &ReferenceIndex, command_line: impl Into<String>) -> Self {
        SamHeader {
            sequences: index.sequences().iter().map(|s| (s.name.clone(), s.len)).collect(),
            program_name: "wavemap".into(),
            program_version: env!("CARGO_PKG_VERSION").into(),
            command_line: command_line.into(),
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "@HD\tVN:1.6\tSO:unsorted")?;
        for (name, len) in &self.sequences {
            writeln!(w, "@SQ\tSN:{name}\tLN:{len}")?;
        }
        // Tabs and newlines are not allowed inside header values.
        let cl: String = self
            .command_line
            .chars()
            .map(|c| if c == '\t' || c == '\n' { ' ' } else { c })
            .collect();
        writeln!(
            w,
            "@PG\tID:{0}\tPN:{0}\tVN:{1}\tCL:{2}",
            self.program_name, self.program_version, cl
        )
    }
}

pub fn write_sam<'a, W, I>(header: &SamHeader, records: I, sink: &mut W) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a AlignmentRecord>,
{
    header.write_to(sink)?;
    let mut buf = Vec::new();
    for rec in records {
        buf.clear();
        rec.write_line(&mut buf);
        sink.write_all(&buf)?;
    }
    Ok(())
}

/// Mapping quality from the best and second-best candidate scores.
///
/// A lone candidate gets 60; otherwise `6 * (best - second)` clamped to
/// `0..=60`. More than 32 candidates caps the value at 3.
pub fn mapq_estimate(best_score: i32, second_best_score: Option<i32>, hit_count: usize) -> u8 {
    let q = match second_best_score {
        None => 60,
        Some(second) => (6i64 * (best_score as i64 - second as i64)).clamp(0, 60) as u8,
    };
    if hit_count > 32 {
        q.min(3)
    } else {
        q
    }
}

/// Bases and qualities as stored in SAM for the given strand.
pub fn oriented_seq(bases: &[u8], qual: Option<&[u8]>, reverse: bool) -> (Vec<u8>, Option<Vec<u8>>) {
    if reverse {
        (
            dna::revcomp_ascii(bases),
            qual.map(|q| q.iter().rev().copied().collect()),
        )
    } else {
        (bases.to_vec(), qual.map(<[u8]>::to_vec))
    }
}

fn is_name_char(c: u8, first: bool) -> bool {
    (b'!'..=b'~').contains(&c) && !matches!(c, b'\\' | b',' | b'"' | b'`' | b'\'' | b'(' | b')' | b'[' | b']' | b'{' | b'}' | b'<' | b'>') && !(first && (c == b'*' || c == b'='))
}

fn check_int(field: &str, name: &str, min: i64, max: i64) -> Result<i64, String> {
    let v: i64 = field.parse().map_err(|_| format!("{name} is not an integer: {field:?}"))?;
    if v < min || v > max {
        return Err(format!("{name} {v} outside [{min}, {max}]"));
    }
    Ok(v)
}

fn check_refname(field: &str, name: &str, allow_eq: bool) -> Result<(), String> {
    if field == "*" || (allow_eq && field == "=") {
        return Ok(());
    }
    let bytes = field.as_bytes();
    if bytes.is_empty() || !bytes.iter().enumerate().all(|(i, &c)| is_name_char(c, i == 0)) {
        return Err(format!("invalid {name} {field:?}"));
    }
    Ok(())
}

/// Checks one alignment line against the SAM text grammar: 11 mandatory
/// fields, legal ranges, CIGAR syntax and CIGAR/SEQ length agreement.
pub fn validate_sam_line(line: &str) -> Result<(), String> {
    let fields: Vec<&str> = line.trim_end_matches('\n').split('\t').collect();
    if fields.len() < 11 {
        return Err(format!("expected at least 11 fields, found {}", fields.len()));
    }
    let qname = fields[0];
    let qname_ok = !qname.is_empty() && qname.len() <= 254 && qname.bytes().all(|c| (b'!'..=b'~').contains(&c) && c != b'@');
    if !qname_ok && qname != "*" {
        return Err(format!("invalid QNAME {qname:?}"));
    }
    let flag = check_int(fields[1], "FLAG", 0, 0xffff)? as u16;
    check_refname(fields[2], "RNAME", false)?;
    let pos = check_int(fields[3], "POS", 0, (1 << 31) - 1)?;
    check_int(fields[4], "MAPQ", 0, 255)?;
    let cigar = fields[5];
    let mut cigar_read_len = 0u64;
    if cigar != "*" {
        let mut num = String::new();
        if cigar.is_empty() {
            return Err("empty CIGAR".into());
        }
        for c in cigar.chars() {
            if c.is_ascii_digit() {
                num.push(c);
            } else if "MIDNSHP=X".contains(c) {
                let n: u64 = num.parse().map_err(|_| format!("invalid CIGAR {cigar:?}"))?;
                if n == 0 {
                    return Err(format!("zero-length CIGAR op in {cigar:?}"));
                }
                if "MIS=X".contains(c) {
                    cigar_read_len += n;
                }
                num.clear();
            } else {
                return Err(format!("invalid CIGAR {cigar:?}"));
            }
        }
        if !num.is_empty() {
            return Err(format!("dangling CIGAR length in {cigar:?}"));
        }
    }
    check_refname(fields[6], "RNEXT", true)?;
    check_int(fields[7], "PNEXT", 0, (1 << 31) - 1)?;
    check_int(fields[8], "TLEN", -((1 << 31) - 1), (1 << 31) - 1)?;
    let seq = fields[9];
    if seq != "*" && (seq.is_empty() || !seq.bytes().all(|c| c.is_ascii_alphabetic() || c == b'=' || c == b'.')) {
        return Err(format!("invalid SEQ {seq:?}"));
    }
    let qual = fields[10];
    if qual != "*" {
        if !qual.bytes().all(|c| (b'!'..=b'~').contains(&c)) {
            return Err("invalid QUAL".into());
        }
        if seq != "*" && qual.len() != seq.len() {
            return Err("QUAL length differs from SEQ".into());
        }
    }
    if cigar != "*" && seq != "*" && cigar_read_len != seq.len() as u64 {
        return Err(format!("CIGAR {cigar} consumes {cigar_read_len} bases but SEQ has {}", seq.len()));
    }
    if flag & flags::UNMAPPED == 0 && (pos == 0 || fields[2] == "*" || cigar == "*") {
        return Err("mapped record without placement".into());
    }
    if flag & flags::PAIRED == 0
        && flag & (flags::PROPER_PAIR | flags::MATE_UNMAPPED | flags::MATE_REVERSE | flags::FIRST_IN_PAIR | flags::SECOND_IN_PAIR) != 0
    {
        return Err("pair flags on an unpaired record".into());
    }
    for tag in &fields[11..] {
        let parts: Vec<&str> = tag.splitn(3, ':').collect();
        if parts.len() != 3 || parts[0].len() != 2 || parts[1].len() != 1 {
            return Err(format!("malformed tag {tag:?}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::CigarOp;

    #[test]
    fn mapq_rules() {
        assert_eq!(mapq_estimate(50, None, 1), 60);
        assert_eq!(mapq_estimate(50, Some(50), 2), 0);
        assert_eq!(mapq_estimate(50, Some(46), 2), 24);
        assert_eq!(mapq_estimate(50, Some(10), 2), 60);
        assert_eq!(mapq_estimate(50, Some(46), 40), 3);
        assert_eq!(mapq_estimate(40, Some(46), 2), 0);
    }

    #[test]
    fn header_only() {
        let header = SamHeader {
            sequences: vec![("chr1".into(), 1000), ("chr2".into(), 50)],
            program_name: "wavemap".into(),
            program_version: "0.1.0".into(),
            command_line: "wavemap align".into(),
        };
        let mut out = Vec::new();
        write_sam(&header, std::iter::empty(), &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "@HD\tVN:1.6\tSO:unsorted\n@SQ\tSN:chr1\tLN:1000\n@SQ\tSN:chr2\tLN:50\n\
             @PG\tID:wavemap\tPN:wavemap\tVN:0.1.0\tCL:wavemap align\n"
        );
    }

    #[test]
    fn forward_record_line() {
        let mut cigar = Cigar::new();
        cigar.push(CigarOp::Match, 10);
        let rec = AlignmentRecord {
            qname: "r1".into(),
            flag: 0,
            rname: "chr1".into(),
            pos: 100,
            mapq: 60,
            cigar: Some(cigar),
            rnext: "*".into(),
            pnext: 0,
            tlen: 0,
            seq: b"ACGTACGTAC".to_vec(),
            qual: Some(b"IIIIIIIIII".to_vec()),
            score: Some(10),
            edit_distance: Some(0),
        };
        let mut out = Vec::new();
        rec.write_line(&mut out);
        let line = String::from_utf8(out).unwrap();
        assert_eq!(line, "r1\t0\tchr1\t100\t60\t10M\t*\t0\t0\tACGTACGTAC\tIIIIIIIIII\tAS:i:10\tNM:i:0\n");
        validate_sam_line(&line).unwrap();
    }

    #[test]
    fn reverse_orientation() {
        let (seq, qual) = oriented_seq(b"AACGT", Some(b"ABCDE"), true);
        assert_eq!(seq, dna::revcomp_ascii(b"AACGT"));
        assert_eq!(seq, b"ACGTT");
        assert_eq!(qual.unwrap(), b"EDCBA");
    }

    #[test]
    fn grammar_rejections() {
        let ok = "r\t4\t*\t0\t0\t*\t*\t0\t0\tACGT\t*";
        validate_sam_line(ok).unwrap();
        assert!(validate_sam_line("r\t4\t*\t0\t0\t*\t*\t0\t0\tACGT").is_err());
        assert!(validate_sam_line("r\t0\tchr\t5\t0\t3M\t*\t0\t0\tACGT\t*").is_err());
        assert!(validate_sam_line("r\t0\tchr\t5\t0\t4Q\t*\t0\t0\tACGT\t*").is_err());
        assert!(validate_sam_line("r\t70000\t*\t0\t0\t*\t*\t0\t0\tACGT\t*").is_err());
        assert!(validate_sam_line("r\t6\t*\t0\t0\t*\t*\t0\t0\tACGT\t*").is_err());
        assert!(validate_sam_line("r\t0\t*\t0\t0\t*\t*\t0\t0\tACGT\t*").is_err());
    }
}
