//! FASTA / FASTQ reader with gzip sniffing and paired-file interleaving.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use thiserror::Error;

use crate::dna;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("paired inputs disagree at record {ordinal}: {message}")]
    Pairing { ordinal: u64, message: String },
}

impl ParseError {
    /// Errors a lenient reader may skip over.
    pub fn is_recoverable(&self) -> bool {
        matches!(self, ParseError::Malformed { .. })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MateSide {
    #[default]
    Single,
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadRecord {
    /// Name up to the first whitespace, with any `/1` or `/2` suffix removed.
    pub name: String,
    /// Upper-case bases; may contain IUPAC ambiguity codes.
    pub bases: Vec<u8>,
    pub qualities: Option<Vec<u8>>,
    pub ordinal: u64,
    pub mate: MateSide,
}

impl ReadRecord {
    pub fn new(name: impl Into<String>, bases: impl AsRef<[u8]>, qualities: Option<&[u8]>) -> Self {
        ReadRecord {
            name: name.into(),
            bases: bases.as_ref().to_ascii_uppercase(),
            qualities: qualities.map(<[u8]>::to_vec),
            ordinal: 0,
            mate: MateSide::Single,
        }
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn codes(&self) -> Vec<u8> {
        dna::encode(&self.bases)
    }
}

/// Unit of work: one single-end read or both mates of a pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReadUnit {
    Single(ReadRecord),
    Pair(ReadRecord, ReadRecord),
}

impl ReadUnit {
    pub fn ordinal(&self) -> u64 {
        match self {
            ReadUnit::Single(r) | ReadUnit::Pair(r, _) => r.ordinal,
        }
    }

    pub fn read_count(&self) -> usize {
        match self {
            ReadUnit::Single(_) => 1,
            ReadUnit::Pair(..) => 2,
        }
    }

    /// The read, or both mates in order.
    pub fn reads(&self) -> impl Iterator<Item = &ReadRecord> {
        let (a, b) = match self {
            ReadUnit::Single(r) => (r, None),
            ReadUnit::Pair(a, b) => (a, Some(b)),
        };
        std::iter::once(a).chain(b)
    }

    fn set_ordinal(&mut self, ordinal: u64) {
        match self {
            ReadUnit::Single(r) => r.ordinal = ordinal,
            ReadUnit::Pair(a, b) => {
                a.ordinal = ordinal;
                b.ordinal = ordinal;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatHint {
    Auto,
    Fasta,
    Fastq,
}

/// Opens a file, transparently decompressing gzip (detected by magic bytes).
pub fn open_maybe_gzip(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let mut reader = BufReader::new(File::open(path)?);
    let magic = reader.fill_buf()?;
    if magic.len() >= 2 && magic[0] == 0x1f && magic[1] == 0x8b {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(reader))))
    } else {
        Ok(Box::new(reader))
    }
}

pub fn normalize_name(header: &[u8]) -> String {
    let end = header.iter().position(u8::is_ascii_whitespace).unwrap_or(header.len());
    let mut name = &header[..end];
    if name.len() > 2 && (name.ends_with(b"/1") || name.ends_with(b"/2")) {
        name = &name[..name.len() - 2];
    }
    String::from_utf8_lossy(name).into_owned()
}

/// Streaming parser over one input.
pub struct FastxReader<R> {
    input: R,
    path: String,
    hint: FormatHint,
    line_no: usize,
    peeked: Option<(usize, Vec<u8>)>,
    buf: Vec<u8>,
    done: bool,
}

impl FastxReader<Box<dyn BufRead + Send>> {
    pub fn open(path: &Path, hint: FormatHint) -> Result<Self, ParseError> {
        let input = open_maybe_gzip(path).map_err(|source| ParseError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(FastxReader::new(input, path.display().to_string(), hint))
    }
}

impl<R: BufRead> FastxReader<R> {
    pub fn new(input: R, path: impl Into<String>, hint: FormatHint) -> Self {
        FastxReader {
            input,
            path: path.into(),
            hint,
            line_no: 0,
            peeked: None,
            buf: Vec::new(),
            done: false,
        }
    }

    fn next_line(&mut self) -> Result<Option<(usize, Vec<u8>)>, ParseError> {
        if let Some(line) = self.peeked.take() {
            return Ok(Some(line));
        }
        self.buf.clear();
        let n = self.input.read_until(b'\n', &mut self.buf).map_err(|source| ParseError::Io {
            path: self.path.clone(),
            source,
        })?;
        if n == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        while matches!(self.buf.last(), Some(b'\n' | b'\r')) {
            self.buf.pop();
        }
        Ok(Some((self.line_no, self.buf.clone())))
    }

    fn malformed(&self, line: usize, message: impl Into<String>) -> ParseError {
        ParseError::Malformed {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    /// Skips to the next line starting with a record marker.
    fn resync(&mut self) -> Result<(), ParseError> {
        while let Some((no, line)) = self.next_line()? {
            if matches!(line.first(), Some(b'@' | b'>')) {
                self.peeked = Some((no, line));
                break;
            }
        }
        Ok(())
    }

    fn check_bases(&self, line: usize, bases: &[u8]) -> Result<(), ParseError> {
        if bases.is_empty() {
            return Err(self.malformed(line, "empty sequence"));
        }
        if let Some(bad) = bases.iter().find(|&&b| !dna::is_nucleotide_letter(b)) {
            return Err(self.malformed(line, format!("invalid base {:?}", *bad as char)));
        }
        Ok(())
    }

    fn parse_fastq(&mut self, header_no: usize, header: Vec<u8>) -> Result<ReadRecord, ParseError> {
        let name = normalize_name(&header[1..]);
        if name.is_empty() {
            return Err(self.malformed(header_no, "empty read name"));
        }
        let (seq_no, seq) = self
            .next_line()?
            .ok_or_else(|| self.malformed(header_no, "truncated record: missing sequence"))?;
        self.check_bases(seq_no, &seq)?;
        let (plus_no, plus) = self
            .next_line()?
            .ok_or_else(|| self.malformed(seq_no, "truncated record: missing '+' line"))?;
        if plus.first() != Some(&b'+') {
            return Err(self.malformed(plus_no, "expected '+' separator"));
        }
        let (qual_no, qual) = self
            .next_line()?
            .ok_or_else(|| self.malformed(plus_no, "truncated record: missing qualities"))?;
        if qual.len() != seq.len() {
            return Err(self.malformed(
                qual_no,
                format!("quality length {} does not match sequence length {}", qual.len(), seq.len()),
            ));
        }
        if let Some(bad) = qual.iter().find(|&&q| !(b'!'..=b'~').contains(&q)) {
            return Err(self.malformed(qual_no, format!("invalid quality character {:?}", *bad as char)));
        }
        Ok(ReadRecord::new(name, seq, Some(&qual)))
    }

    fn parse_fasta(&mut self, header_no: usize, header: Vec<u8>) -> Result<ReadRecord, ParseError> {
        let name = normalize_name(&header[1..]);
        if name.is_empty() {
            return Err(self.malformed(header_no, "empty read name"));
        }
        let mut seq = Vec::new();
        while let Some((no, line)) = self.next_line()? {
            if line.first() == Some(&b'>') {
                self.peeked = Some((no, line));
                break;
            }
            let trimmed = line.trim_ascii();
            if let Some(bad) = trimmed.iter().find(|&&b| !dna::is_nucleotide_letter(b)) {
                return Err(self.malformed(no, format!("invalid base {:?}", *bad as char)));
            }
            seq.extend_from_slice(trimmed);
        }
        if seq.is_empty() {
            return Err(self.malformed(header_no, "empty sequence"));
        }
        Ok(ReadRecord::new(name, seq, None))
    }

    fn read_record(&mut self) -> Result<Option<ReadRecord>, ParseError> {
        let (no, line) = loop {
            match self.next_line()? {
                None => return Ok(None),
                Some((_, l)) if l.trim_ascii().is_empty() => continue,
                Some(l) => break l,
            }
        };
        let result = match (line[0], self.hint) {
            (b'@', FormatHint::Auto | FormatHint::Fastq) => self.parse_fastq(no, line),
            (b'>', FormatHint::Auto | FormatHint::Fasta) => self.parse_fasta(no, line),
            _ => Err(self.malformed(no, "expected a record header")),
        };
        match result {
            Ok(r) => Ok(Some(r)),
            Err(e) => {
                self.resync()?;
                Err(e)
            }
        }
    }
}

impl<R: BufRead> Iterator for FastxReader<R> {
    type Item = Result<ReadRecord, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                if !e.is_recoverable() {
                    self.done = true;
                }
                Some(Err(e))
            }
        }
    }
}

type BoxedRecords = Box<dyn Iterator<Item = Result<ReadRecord, ParseError>> + Send>;

/// Ordered stream of [`ReadUnit`]s with ordinals assigned in stream order.
///
/// Single-end mode concatenates its inputs; paired mode zips two inputs
/// record by record and requires matching names.
pub struct ReadSource {
    first: BoxedRecords,
    second: Option<BoxedRecords>,
    next_ordinal: u64,
    done: bool,
}

impl ReadSource {
    pub fn single(paths: &[PathBuf], hint: FormatHint) -> Result<Self, ParseError> {
        let mut readers = Vec::new();
        for p in paths {
            readers.push(FastxReader::open(p, hint)?);
        }
        Ok(Self::from_records(readers.into_iter().flatten(), None::<std::iter::Empty<_>>))
    }

    pub fn paired(first: &Path, second: &Path, hint: FormatHint) -> Result<Self, ParseError> {
        let a = FastxReader::open(first, hint)?;
        let b = FastxReader::open(second, hint)?;
        Ok(Self::from_records(a, Some(b)))
    }

    pub fn from_records<A, B>(first: A, second: Option<B>) -> Self
    where
        A: Iterator<Item = Result<ReadRecord, ParseError>> + Send + 'static,
        B: Iterator<Item = Result<ReadRecord, ParseError>> + Send + 'static,
    {
        ReadSource {
            first: Box::new(first),
            second: second.map(|b| Box::new(b) as BoxedRecords),
            next_ordinal: 0,
            done: false,
        }
    }

    /// In-memory units, renumbered in order.
    pub fn from_units(units: Vec<ReadUnit>) -> Self {
        let (singles, pairs): (Vec<_>, Vec<_>) = units.into_iter().partition(|u| matches!(u, ReadUnit::Single(_)));
        if pairs.is_empty() {
            let it = singles.into_iter().map(|u| match u {
                ReadUnit::Single(r) => Ok(r),
                ReadUnit::Pair(..) => unreachable!(),
            });
            Self::from_records(it, None::<std::iter::Empty<_>>)
        } else {
            assert!(singles.is_empty(), "mixed single and paired units");
            let (a, b): (Vec<_>, Vec<_>) = pairs
                .into_iter()
                .map(|u| match u {
                    ReadUnit::Pair(a, b) => (Ok(a), Ok(b)),
                    ReadUnit::Single(_) => unreachable!(),
                })
                .unzip();
            Self::from_records(a.into_iter(), Some(b.into_iter()))
        }
    }

    pub fn is_paired(&self) -> bool {
        self.second.is_some()
    }

    fn take_ordinal(&mut self, mut unit: ReadUnit) -> ReadUnit {
        unit.set_ordinal(self.next_ordinal);
        self.next_ordinal += 1;
        unit
    }
}

impl Iterator for ReadSource {
    type Item = Result<ReadUnit, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let Some(second) = self.second.as_mut() else {
            return match self.first.next() {
                None => {
                    self.done = true;
                    None
                }
                Some(Err(e)) => Some(Err(e)),
                Some(Ok(r)) => Some(Ok(self.take_ordinal(ReadUnit::Single(r)))),
            };
        };
        let ordinal = self.next_ordinal;
        match (self.first.next(), second.next()) {
            (None, None) => {
                self.done = true;
                None
            }
            (Some(_), None) | (None, Some(_)) => {
                self.done = true;
                Some(Err(ParseError::Pairing {
                    ordinal,
                    message: "paired inputs have different record counts".into(),
                }))
            }
            (Some(Err(e)), _) | (_, Some(Err(e))) => {
                if !e.is_recoverable() {
                    self.done = true;
                }
                Some(Err(e))
            }
            (Some(Ok(mut a)), Some(Ok(mut b))) => {
                if a.name != b.name {
                    self.done = true;
                    return Some(Err(ParseError::Pairing {
                        ordinal,
                        message: format!("mate names differ: `{}` vs `{}`", a.name, b.name),
                    }));
                }
                a.mate = MateSide::First;
                b.mate = MateSide::Second;
                Some(Ok(self.take_ordinal(ReadUnit::Pair(a, b))))
            }
        }
    }
}

/// Reads every record of a FASTA reference as `(name, bases)`.
pub fn read_reference(path: &Path) -> Result<Vec<(String, Vec<u8>)>, ParseError> {
    let mut out = Vec::new();
    for rec in FastxReader::open(path, FormatHint::Fasta)? {
        let rec = rec?;
        out.push((rec.name, rec.bases));
    }
    Ok(out)
}

/// Writes `rec` as FASTQ when it has qualities, otherwise as single-line FASTA.
pub fn write_record<W: Write>(w: &mut W, rec: &ReadRecord) -> io::Result<()> {
    match &rec.qualities {
        Some(q) => {
            writeln!(w, "@{}", rec.name)?;
            w.write_all(&rec.bases)?;
            w.write_all(b"\n+\n")?;
            w.write_all(q)?;
            w.write_all(b"\n")
        }
        None => {
            writeln!(w, ">{}", rec.name)?;
            w.write_all(&rec.bases)?;
            w.write_all(b"\n")
        }
    }
}

/// Parses an in-memory buffer; convenient for fixtures.
pub fn parse_bytes(data: &[u8], hint: FormatHint) -> Result<Vec<ReadRecord>, ParseError> {
    FastxReader::new(io::Cursor::new(data.to_vec()), "<memory>", hint).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_fastq() {
        let recs = parse_bytes(b"@r1\nACGT\n+\nIIII\n", FormatHint::Auto).unwrap();
        assert_eq!(recs, vec![ReadRecord::new("r1", "ACGT", Some(b"IIII"))]);
    }

    #[test]
    fn multi_line_fasta() {
        let recs = parse_bytes(b">s1 desc\nACG\nTTA\nGG\n>s2\nCC", FormatHint::Auto).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].name, "s1");
        assert_eq!(recs[0].bases, b"ACGTTAGG");
        assert_eq!(recs[0].qualities, None);
        assert_eq!(recs[1].bases, b"CC");
    }

    #[test]
    fn crlf_comments_and_missing_final_newline() {
        let data = b"@x/1 some comment\r\nacgn\r\n+x/1\r\nIIII\r\n@y\nAC\n+\n!!";
        let recs = parse_bytes(data, FormatHint::Fastq).unwrap();
        assert_eq!(recs[0].name, "x");
        assert_eq!(recs[0].bases, b"ACGN");
        assert_eq!(recs[1].qualities.as_deref(), Some(&b"!!"[..]));
    }

    #[test]
    fn malformed_records_report_line_numbers() {
        let err = parse_bytes(b"@r1\nACGT\n+\nIII\n", FormatHint::Auto).unwrap_err();
        assert!(matches!(err, ParseError::Malformed { line: 4, .. }), "{err}");
        let err = parse_bytes(b"@r1\nACGT\n", FormatHint::Auto).unwrap_err();
        assert!(matches!(err, ParseError::Malformed { line: 2, .. }), "{err}");
        let err = parse_bytes(b"@r1\nAC-T\n+\nIIII\n", FormatHint::Auto).unwrap_err();
        assert!(matches!(err, ParseError::Malformed { line: 2, .. }), "{err}");
        let err = parse_bytes(b"ACGT\n", FormatHint::Auto).unwrap_err();
        assert!(matches!(err, ParseError::Malformed { line: 1, .. }), "{err}");
    }

    #[test]
    fn lenient_iteration_skips_bad_records() {
        let data = b"@a\nACGT\n+\nII\n@b\nGGCC\n+\nIIII\n";
        let items: Vec<_> = FastxReader::new(io::Cursor::new(&data[..]), "t", FormatHint::Auto).collect();
        assert_eq!(items.len(), 2);
        assert!(items[0].is_err());
        assert_eq!(items[1].as_ref().unwrap().name, "b");
    }

    fn records(names: &[&str]) -> Vec<Result<ReadRecord, ParseError>> {
        names.iter().map(|n| Ok(ReadRecord::new(*n, "ACGT", None))).collect()
    }

    #[test]
    fn paired_suffixes_are_stripped() {
        let a = parse_bytes(b"@x/1\nACGT\n+\nIIII\n", FormatHint::Auto).unwrap();
        let b = parse_bytes(b"@x/2\nTTGG\n+\nIIII\n", FormatHint::Auto).unwrap();
        let mut src = ReadSource::from_records(a.into_iter().map(Ok), Some(b.into_iter().map(Ok)));
        let unit = src.next().unwrap().unwrap();
        match unit {
            ReadUnit::Pair(a, b) => {
                assert_eq!((a.name.as_str(), b.name.as_str()), ("x", "x"));
                assert_eq!((a.mate, b.mate), (MateSide::First, MateSide::Second));
            }
            _ => panic!("expected a pair"),
        }
        assert!(src.next().is_none());
    }

    #[test]
    fn pairing_errors() {
        let mut src = ReadSource::from_records(records(&["a", "b"]).into_iter(), Some(records(&["a"]).into_iter()));
        assert!(src.next().unwrap().is_ok());
        assert!(matches!(src.next(), Some(Err(ParseError::Pairing { ordinal: 1, .. }))));
        assert!(src.next().is_none());

        let mut src = ReadSource::from_records(records(&["a"]).into_iter(), Some(records(&["z"]).into_iter()));
        assert!(matches!(src.next(), Some(Err(ParseError::Pairing { .. }))));
    }

    #[test]
    fn ordinals_are_sequential() {
        let src = ReadSource::from_records(records(&["a", "b", "c"]).into_iter(), None::<std::iter::Empty<_>>);
        let ords: Vec<u64> = src.map(|u| u.unwrap().ordinal()).collect();
        assert_eq!(ords, vec![0, 1, 2]);
    }

    #[test]
    fn gzip_inputs_are_sniffed() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reads.fq.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::default());
        enc.write_all(b"@g\nACGTA\n+\nIIIII\n").unwrap();
        enc.finish().unwrap();
        let recs: Vec<_> = FastxReader::open(&path, FormatHint::Auto).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(recs[0].bases, b"ACGTA");
    }

    proptest::proptest! {
        #[test]
        fn serialized_records_parse_back(
            recs in proptest::collection::vec(("[A-Za-z0-9_.:-]{1,12}", "[ACGTN]{1,80}", proptest::bool::ANY), 1..20),
            fastq in proptest::bool::ANY,
        ) {
            let fixture: Vec<ReadRecord> = recs
                .iter()
                .map(|(name, bases, _)| {
                    let q = vec![b'5'; bases.len()];
                    ReadRecord::new(name.as_str(), bases.as_bytes(), fastq.then_some(&q[..]))
                })
                .collect();
            let mut buf = Vec::new();
            for r in &fixture {
                write_record(&mut buf, r).unwrap();
            }
            let parsed = parse_bytes(&buf, FormatHint::Auto).unwrap();
            proptest::prop_assert_eq!(parsed.len(), fixture.len());
            for (p, f) in parsed.iter().zip(&fixture) {
                proptest::prop_assert_eq!(&p.name, &f.name);
                proptest::prop_assert_eq!(&p.bases, &f.bases);
                proptest::prop_assert_eq!(&p.qualities, &f.qualities);
            }
        }
    }
}
