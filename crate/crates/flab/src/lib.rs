//! Numerical laboratory for Furstenberg systems of Hardy field sequences
//! mod 1: exact symbolic growth classification, high-precision evaluation,
//! correlation averaging against explicit torus models, and empirical
//! distribution measurements.

pub mod acceptance;
pub mod averaging;
pub mod correlation;
pub mod dd;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod exact;
pub mod hardy;
pub mod jobrunner;
pub mod measures;
pub mod mp;
pub mod oracle;
pub mod parse;
pub mod sum;
pub mod systems;
pub mod torus;

pub use error::{Error, Result};
