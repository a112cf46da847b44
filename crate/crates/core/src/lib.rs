//! A desk-scale laboratory for sequence prediction over a toy monotone machine.
//!
//! The crate fixes a concrete reference machine (an 8-bit fixed-width
//! instruction set with a one-way input tape and an append-only output tape),
//! enumerates its programs, and builds on top of it:
//!
//! - a prefix-free bit-string codec ([`bits`]),
//! - length-lexicographic and canonical-program enumeration plus a fair
//!   dovetailing scheduler ([`enumerate`]),
//! - a description language of generators and predictors whose serialized
//!   length is the complexity currency ([`dsl`]),
//! - prediction semantics and empirical learning verdicts ([`predictors`]),
//! - diagonal adversaries ([`adversary`]),
//! - bounded complexity estimators and the small-program sequence catalog
//!   ([`complexity`]),
//! - an experiment harness with a content-addressed execution cache
//!   ([`harness`]).
//!
//! Everything is deterministic given explicit budgets: fuel (a step budget),
//! output caps, horizons. No operation consults wall-clock time or ambient
//! randomness.

pub mod adversary;
pub mod bits;
pub mod complexity;
pub mod dsl;
pub mod enumerate;
pub mod error;
pub mod exec;
pub mod harness;
pub mod predictors;
pub mod vm;

pub use bits::BitString;
pub use error::{Error, Result};
pub use exec::Lab;
