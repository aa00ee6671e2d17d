//! Little-endian index file.
//!
//! ```text
//! "MICL" | u32 version | u32 sampling_rate | u64 ambiguity_seed | u64 body_len
//! body: sections, each u32 tag | u64 len | payload
//!   BWT  u64 rows, u64 dollar_row, 2-bit packed symbols
//!   CNTS 4 x u64 C-array entries
//!   OCCT u64 blocks, 4 x u32 tallies per block
//!   SAMP u64 samples, u32 values, u64 words, u64 sampled-row bits
//!   REFB u64 bases, 2-bit packed forward reference
//!   META u32 sequences, (u32 name_len, name, u64 len)*, u64 replaced, u64 positions
//! u64 xxh3 checksum of every preceding byte
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use xxhash_rust::xxh3::xxh3_64;

use super::occ::{OccBlock, OccTable, BLOCK_SYMBOLS};
use super::{IndexError, IndexMeta, ReferenceIndex, SequenceInfo};
use crate::dna::PackedBases;

pub const MAGIC: &[u8; 4] = b"MICL";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

const TAG_BWT: u32 = u32::from_le_bytes(*b"BWT ");
const TAG_COUNTS: u32 = u32::from_le_bytes(*b"CNTS");
const TAG_OCC: u32 = u32::from_le_bytes(*b"OCCT");
const TAG_SAMPLES: u32 = u32::from_le_bytes(*b"SAMP");
const TAG_REF: u32 = u32::from_le_bytes(*b"REFB");
const TAG_META: u32 = u32::from_le_bytes(*b"META");

#[derive(Default)]
struct Buf(Vec<u8>);

impl Buf {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn section(&mut self, tag: u32, payload: Buf) {
        self.u32(tag);
        self.u64(payload.0.len() as u64);
        self.bytes(&payload.0);
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).ok_or(IndexError::Truncated)?;
        let out = self.data.get(self.pos..end).ok_or(IndexError::Truncated)?;
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize, IndexError> {
        usize::try_from(self.u64()?).map_err(|_| IndexError::Corrupt("length overflow"))
    }
    fn section(&mut self, tag: u32) -> Result<Cursor<'a>, IndexError> {
        if self.u32()? != tag {
            return Err(IndexError::Corrupt("unexpected section"));
        }
        let len = self.usize()?;
        Ok(Cursor {
            data: self.take(len)?,
            pos: 0,
        })
    }
}

fn pack_symbols(index: &ReferenceIndex) -> Vec<u8> {
    let occ = index.occ_table();
    let mut out = vec![0u8; occ.len().div_ceil(4)];
    for row in 0..occ.len() {
        let code = occ.symbol(row).unwrap_or(0);
        out[row / 4] |= code << ((row % 4) * 2);
    }
    out
}

pub fn encode_index(index: &ReferenceIndex) -> Vec<u8> {
    let meta = index.meta();
    let mut body = Buf::default();

    let occ = index.occ_table();
    let mut bwt = Buf::default();
    bwt.u64(occ.len() as u64);
    bwt.u64(occ.dollar_row() as u64);
    bwt.bytes(&pack_symbols(index));
    body.section(TAG_BWT, bwt);

    let mut counts = Buf::default();
    for c in index.counts() {
        counts.u64(c as u64);
    }
    body.section(TAG_COUNTS, counts);

    let mut checkpoints = Buf::default();
    checkpoints.u64(occ.blocks().len() as u64);
    for block in occ.blocks() {
        for c in block.counts {
            checkpoints.u32(c);
        }
    }
    body.section(TAG_OCC, checkpoints);

    let mut samples = Buf::default();
    samples.u64(index.sa_samples().len() as u64);
    for &s in index.sa_samples() {
        samples.u32(s);
    }
    let words = index.sampled_row_words();
    samples.u64(words.len() as u64);
    for &w in words {
        samples.u64(w);
    }
    body.section(TAG_SAMPLES, samples);

    let mut refb = Buf::default();
    refb.u64(index.ref_bases().len() as u64);
    refb.bytes(index.ref_bases().raw_bytes());
    body.section(TAG_REF, refb);

    let mut m = Buf::default();
    m.u32(meta.sequences.len() as u32);
    for s in &meta.sequences {
        m.u32(s.name.len() as u32);
        m.bytes(s.name.as_bytes());
        m.u64(s.len as u64);
    }
    m.u64(meta.replaced.len() as u64);
    for &p in &meta.replaced {
        m.u64(p);
    }
    body.section(TAG_META, m);

    let mut out = Buf::default();
    out.bytes(MAGIC);
    out.u32(FORMAT_VERSION);
    out.u32(meta.sampling_rate);
    out.u64(meta.ambiguity_seed);
    out.u64(body.0.len() as u64);
    out.bytes(&body.0);
    let checksum = xxh3_64(&out.0);
    out.u64(checksum);
    out.0
}

pub fn decode_index(data: &[u8]) -> Result<ReferenceIndex, IndexError> {
    if data.len() < 8 {
        return Err(IndexError::Truncated);
    }
    if &data[..4] != MAGIC {
        return Err(IndexError::BadMagic);
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(IndexError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if data.len() < HEADER_LEN + 8 {
        return Err(IndexError::Truncated);
    }
    let mut header = Cursor { data, pos: 8 };
    let sampling_rate = header.u32()?;
    let ambiguity_seed = header.u64()?;
    let body_len = header.usize()?;
    let expected_len = HEADER_LEN
        .checked_add(body_len)
        .and_then(|n| n.checked_add(8))
        .ok_or(IndexError::Corrupt("body length"))?;
    if data.len() < expected_len {
        return Err(IndexError::Truncated);
    }
    if data.len() > expected_len {
        return Err(IndexError::Corrupt("trailing bytes"));
    }
    let (covered, tail) = data.split_at(data.len() - 8);
    if xxh3_64(covered) != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(IndexError::ChecksumMismatch);
    }

    let mut body = Cursor {
        data: &covered[HEADER_LEN..],
        pos: 0,
    };

    let mut bwt = body.section(TAG_BWT)?;
    let rows = bwt.usize()?;
    let dollar_row = bwt.usize()?;
    let packed = bwt.take(rows.div_ceil(4))?;
    if dollar_row >= rows {
        return Err(IndexError::Corrupt("sentinel row"));
    }
    let symbols: Vec<u8> = (0..rows)
        .map(|r| (packed[r / 4] >> ((r % 4) * 2)) & 3)
        .collect();

    let mut counts_sec = body.section(TAG_COUNTS)?;
    let mut counts = [0usize; 4];
    for c in counts.iter_mut() {
        *c = counts_sec.usize()?;
    }

    let mut occ_sec = body.section(TAG_OCC)?;
    let nblocks = occ_sec.usize()?;
    if nblocks != rows / BLOCK_SYMBOLS + 1 {
        return Err(IndexError::Corrupt("checkpoint count"));
    }
    let rebuilt = OccTable::new(&symbols, dollar_row);
    let mut blocks: Vec<OccBlock> = Vec::with_capacity(nblocks);
    for block in rebuilt.blocks() {
        let mut tallies = [0u32; 4];
        for t in tallies.iter_mut() {
            *t = occ_sec.u32()?;
        }
        if tallies != block.counts {
            return Err(IndexError::Corrupt("occurrence checkpoints disagree with bwt"));
        }
        blocks.push(*block);
    }
    let occ = OccTable::from_parts(rows, dollar_row, blocks)
        .ok_or(IndexError::Corrupt("occurrence table"))?;

    let mut samp = body.section(TAG_SAMPLES)?;
    let nsamples = samp.usize()?;
    let mut sa_samples = Vec::with_capacity(nsamples.min(rows));
    for _ in 0..nsamples {
        let v = samp.u32()?;
        if v as usize >= rows {
            return Err(IndexError::Corrupt("suffix array sample out of range"));
        }
        sa_samples.push(v);
    }
    let nwords = samp.usize()?;
    let mut words = Vec::with_capacity(nwords.min(rows));
    for _ in 0..nwords {
        words.push(samp.u64()?);
    }

    let mut refb = body.section(TAG_REF)?;
    let nbases = refb.usize()?;
    let ref_bases = PackedBases::from_raw(nbases, refb.take(nbases.div_ceil(4))?.to_vec())
        .ok_or(IndexError::Corrupt("reference bases"))?;

    let mut m = body.section(TAG_META)?;
    let nseq = m.u32()? as usize;
    let mut sequences = Vec::with_capacity(nseq.min(1 << 20));
    let mut offset = 0;
    for _ in 0..nseq {
        let name_len = m.u32()? as usize;
        let name = String::from_utf8(m.take(name_len)?.to_vec())
            .map_err(|_| IndexError::Corrupt("sequence name"))?;
        let len = m.usize()?;
        sequences.push(SequenceInfo { name, len, offset });
        offset += len;
    }
    let nreplaced = m.usize()?;
    let mut replaced = Vec::with_capacity(nreplaced.min(nbases));
    for _ in 0..nreplaced {
        replaced.push(m.u64()?);
    }

    ReferenceIndex::from_parts(
        counts,
        occ,
        sa_samples,
        words,
        ref_bases,
        IndexMeta {
            sequences,
            sampling_rate,
            ambiguity_seed,
            replaced,
        },
    )
}

pub fn save_index(index: &ReferenceIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_index(index))?;
    w.flush()?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<ReferenceIndex, IndexError> {
    let mut data = Vec::new();
    File::open(path)?.read_to_end(&mut data)?;
    decode_index(&data)
}
