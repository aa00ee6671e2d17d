//! Short-read alignment: FM-index few-mismatch seeding, anti-diagonal
//! affine-gap dynamic programming with packed cells, and a batch pipeline
//! that keeps worker pools busy and re-aligns over-budget reads on the
//! controller thread.

pub mod align;
pub mod dna;
pub mod dp;
pub mod index;
pub mod io;
pub mod pipeline;
pub mod seed;
pub mod sim;
