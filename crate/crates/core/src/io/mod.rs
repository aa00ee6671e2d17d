//! Read input, SAM output and paired-end record resolution.

pub mod fastx;
pub mod pair;
pub mod sam;

pub use fastx::{FormatHint, MateSide, ParseError, ReadRecord, ReadSource, ReadUnit};
pub use pair::{resolve_pair, single_record, InsertModel};
pub use sam::{mapq_estimate, validate_sam_line, write_sam, AlignmentRecord, SamHeader};
