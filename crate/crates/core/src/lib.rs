//! Categorization of malicious-hacking marketplace listings.
//!
//! The crate covers the whole offline pipeline: ingesting listing records and
//! collapsing cross-posts ([`corpus`]), title preprocessing and n-gram
//! extraction ([`textprep`]), TF-IDF weighting ([`vectorizer`]), seeded or
//! randomly initialized K-means with an outlier filter ([`clustering`]),
//! Rand-index / entropy scoring and per-cluster market and vendor diversity
//! ([`evaluation`]), a labeled synthetic corpus generator ([`synthgen`]) and
//! the experiment drivers used by the command-line tool ([`pipeline`]).

pub mod clustering;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod pipeline;
pub mod synthgen;
pub mod textprep;
pub mod vectorizer;

pub use error::{Error, Result};
