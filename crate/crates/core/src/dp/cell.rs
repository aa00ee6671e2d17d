//! 32-bit DP cell holding biased M, I and D scores.
//!
//! Layout: M in bits 0..10, I in bits 10..20, D in bits 20..30, bits 30..32
//! reserved (zero). Each field stores `score + 512`, clamped to `1..=1023`;
//! field value 0 is negative infinity.

pub const FIELD_BITS: u32 = 10;
pub const BIAS: i32 = 512;
pub const FIELD_MAX: u32 = 1023;
const FIELD_MASK: u32 = (1 << FIELD_BITS) - 1;

/// Largest finite score a field represents exactly.
pub const SCORE_MAX: i32 = FIELD_MAX as i32 - BIAS;
/// Smallest finite score a field represents exactly.
pub const SCORE_MIN: i32 = 1 - BIAS;

/// Working value for negative infinity; anything at or below
/// [`NEG_INF_THRESHOLD`] packs to the sentinel.
pub const NEG_INF: i32 = -(1 << 24);
pub const NEG_INF_THRESHOLD: i32 = -(1 << 23);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
#[repr(transparent)]
pub struct PackedCell(pub u32);

// Both helpers are written as selects so fills over lanes vectorize.
#[inline(always)]
fn pack_field(score: i32) -> u32 {
    let clamped = (score.clamp(SCORE_MIN, SCORE_MAX) + BIAS) as u32;
    let finite = (score > NEG_INF_THRESHOLD) as u32;
    clamped * finite
}

#[inline(always)]
fn unpack_field(field: u32) -> i32 {
    let v = field as i32 - BIAS;
    if field == 0 { NEG_INF } else { v }
}

impl PackedCell {
    pub const NEG_INF: PackedCell = PackedCell(0);

    #[inline(always)]
    pub fn pack(m: i32, i: i32, d: i32) -> Self {
        PackedCell(pack_field(m) | (pack_field(i) << FIELD_BITS) | (pack_field(d) << (2 * FIELD_BITS)))
    }

    #[inline(always)]
    pub fn unpack(self) -> (i32, i32, i32) {
        (self.m(), self.i(), self.d())
    }

    #[inline(always)]
    pub fn m(self) -> i32 {
        unpack_field(self.0 & FIELD_MASK)
    }

    #[inline(always)]
    pub fn i(self) -> i32 {
        unpack_field((self.0 >> FIELD_BITS) & FIELD_MASK)
    }

    #[inline(always)]
    pub fn d(self) -> i32 {
        unpack_field((self.0 >> (2 * FIELD_BITS)) & FIELD_MASK)
    }

    /// Largest of the three scores, with a missing field counting as `-BIAS`.
    #[inline(always)]
    pub fn max_field_raw(self) -> i32 {
        let m = self.0 & FIELD_MASK;
        let i = (self.0 >> FIELD_BITS) & FIELD_MASK;
        let d = (self.0 >> (2 * FIELD_BITS)) & FIELD_MASK;
        m.max(i).max(d) as i32 - BIAS
    }

    /// Raw biased fields `(m, i, d)`.
    pub fn fields(self) -> (u32, u32, u32) {
        (
            self.0 & FIELD_MASK,
            (self.0 >> FIELD_BITS) & FIELD_MASK,
            (self.0 >> (2 * FIELD_BITS)) & FIELD_MASK,
        )
    }
}

pub fn pack_cell(m: i32, i: i32, d: i32) -> PackedCell {
    PackedCell::pack(m, i, d)
}

pub fn unpack_cell(cell: PackedCell) -> (i32, i32, i32) {
    cell.unpack()
}
