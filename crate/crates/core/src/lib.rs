//! Rotational sparse coding of image patches.
//!
//! Patches are expressed in a discrete steerable basis where rotation is a
//! diagonal phase multiplication; dictionaries are learned with a rotational
//! variant of K-SVD whose atoms may appear at any of `R` orientations.

pub mod bench;
pub mod coding;
pub mod error;
pub mod patches;
pub mod steerbasis;
pub mod texclass;

pub use error::{Error, Result};

/// File formats written by this crate, with their versions.
pub const FORMAT_VERSIONS: &str = "RSCDICT 1, RSCBASIS 1, PGM P5, CSV tables";
