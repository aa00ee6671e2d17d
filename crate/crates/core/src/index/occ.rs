//! Checkpointed occurrence table.
//!
//! The BWT is stored 2-bit packed inside 128-symbol blocks, each block
//! prefixed by the four base tallies of everything before it, so one rank
//! query touches a single 48-byte block. The sentinel is stored as `A` and
//! corrected for using its recorded row.

pub const BLOCK_SYMBOLS: usize = 128;
const WORD_SYMBOLS: usize = 32;
const WORDS_PER_BLOCK: usize = BLOCK_SYMBOLS / WORD_SYMBOLS;
const LOW_BITS: u64 = 0x5555_5555_5555_5555;
const PATTERNS: [u64; 4] = [0, LOW_BITS, LOW_BITS << 1, u64::MAX];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OccBlock {
    pub counts: [u32; 4],
    pub words: [u64; WORDS_PER_BLOCK],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccTable {
    len: usize,
    dollar_row: usize,
    blocks: Vec<OccBlock>,
}

#[inline]
fn count_in_word(word: u64, base: u8, symbols: usize) -> u32 {
    if symbols == 0 {
        return 0;
    }
    let x = word ^ PATTERNS[base as usize];
    let mut hits = !(x | (x >> 1)) & LOW_BITS;
    if symbols < WORD_SYMBOLS {
        hits &= (1u64 << (2 * symbols)) - 1;
    }
    hits.count_ones()
}

impl OccTable {
    /// `bwt` holds codes 0..4 with the sentinel at `dollar_row` (its value there is ignored).
    pub fn new(bwt: &[u8], dollar_row: usize) -> Self {
        let len = bwt.len();
        let mut blocks = Vec::with_capacity(len / BLOCK_SYMBOLS + 1);
        let mut tally = [0u32; 4];
        for chunk_start in (0..=len).step_by(BLOCK_SYMBOLS) {
            let mut block = OccBlock {
                counts: tally,
                ..OccBlock::default()
            };
            let chunk_end = (chunk_start + BLOCK_SYMBOLS).min(len);
            for (row, &sym) in bwt.iter().enumerate().take(chunk_end).skip(chunk_start) {
                let code = if row == dollar_row { 0 } else { sym & 3 };
                let offset = row - chunk_start;
                block.words[offset / WORD_SYMBOLS] |= (code as u64) << (2 * (offset % WORD_SYMBOLS));
                if row != dollar_row {
                    tally[code as usize] += 1;
                }
            }
            blocks.push(block);
        }
        OccTable {
            len,
            dollar_row,
            blocks,
        }
    }

    pub(crate) fn from_parts(len: usize, dollar_row: usize, blocks: Vec<OccBlock>) -> Option<Self> {
        (blocks.len() == len / BLOCK_SYMBOLS + 1 && dollar_row < len.max(1)).then_some(OccTable {
            len,
            dollar_row,
            blocks,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dollar_row(&self) -> usize {
        self.dollar_row
    }

    pub fn blocks(&self) -> &[OccBlock] {
        &self.blocks
    }

    /// Count of `base` in `bwt[0..prefix)`.
    #[inline]
    pub fn occ(&self, prefix: usize, base: u8) -> usize {
        debug_assert!(prefix <= self.len);
        let block_idx = prefix / BLOCK_SYMBOLS;
        let block = &self.blocks[block_idx];
        let rem = prefix % BLOCK_SYMBOLS;
        let mut count = block.counts[base as usize];
        let full = rem / WORD_SYMBOLS;
        for &word in &block.words[..full] {
            count += count_in_word(word, base, WORD_SYMBOLS);
        }
        if full < WORDS_PER_BLOCK {
            count += count_in_word(block.words[full], base, rem % WORD_SYMBOLS);
        }
        let block_start = block_idx * BLOCK_SYMBOLS;
        if base == 0 && self.dollar_row >= block_start && self.dollar_row < prefix {
            count -= 1;
        }
        count as usize
    }

    /// Counts of all four bases in `bwt[0..prefix)`.
    #[inline]
    pub fn occ_all(&self, prefix: usize) -> [usize; 4] {
        debug_assert!(prefix <= self.len);
        let block_idx = prefix / BLOCK_SYMBOLS;
        let block = &self.blocks[block_idx];
        let rem = prefix % BLOCK_SYMBOLS;
        let mut counts = block.counts;
        for (w, &word) in block.words.iter().enumerate() {
            let symbols = rem.saturating_sub(w * WORD_SYMBOLS).min(WORD_SYMBOLS);
            if symbols == 0 {
                break;
            }
            for (base, c) in counts.iter_mut().enumerate() {
                *c += count_in_word(word, base as u8, symbols);
            }
        }
        let block_start = block_idx * BLOCK_SYMBOLS;
        if self.dollar_row >= block_start && self.dollar_row < prefix {
            counts[0] -= 1;
        }
        counts.map(|c| c as usize)
    }

    /// BWT symbol at `row`; `None` for the sentinel.
    #[inline]
    pub fn symbol(&self, row: usize) -> Option<u8> {
        if row == self.dollar_row {
            return None;
        }
        let block = &self.blocks[row / BLOCK_SYMBOLS];
        let offset = row % BLOCK_SYMBOLS;
        Some(((block.words[offset / WORD_SYMBOLS] >> (2 * (offset % WORD_SYMBOLS))) & 3) as u8)
    }
}
