//! Eigenword dictionaries from unlabeled text.
//!
//! Learns a low-dimensional real vector per word type from the correlation
//! between words and their left/right contexts, via one-step CCA, the
//! two-step variant, or a PCA baseline, and evaluates dictionaries with a
//! type-level supervised protocol on labeled word types.

pub mod context;
pub mod corpus;
pub mod dictionary;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod spectral;

pub use error::{Error, Result};
