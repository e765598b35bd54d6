//! Attribute extraction from criminal-case documents.
//!
//! The pipeline projects span-annotated documents onto token tag sequences
//! ([`corpus`]), scores tokens against the eight tags ([`emission`]), trains
//! and decodes a linear-chain CRF over those scores ([`crf`]), reports
//! per-tag accuracy ([`eval`]) and feeds extracted attributes into a
//! downstream judgment classifier ([`judgment`]).

pub mod corpus;
pub mod crf;
pub mod emission;
pub mod error;
pub mod eval;
pub mod judgment;
pub mod synthetic;
pub mod tagset;

pub use error::{Error, Result};
pub use tagset::{Tag, TagSet, NUM_TAGS};
