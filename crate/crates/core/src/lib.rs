//! # curalab
//!
//! A desk-scale laboratory for studying how training-data quality shapes a
//! text-line recognizer. The crate generates a synthetic glyph corpus, trains
//! a small CTC recognizer on it, and then manipulates the training set along
//! three quality axes plus raw quantity:
//!
//! * **difficulty** — partition candidates by model confidence and train on
//!   single bands; moderately hard data beats both trivial and chaotic data.
//! * **accuracy** — inject controlled label corruption and watch accuracy
//!   degrade gracefully until noise saturates the signal.
//! * **diversity** — cluster embeddings and restrict training to a subset of
//!   clusters; broader coverage wins at a fixed budget.
//! * **quantity** — nested subsets of one pool; more data helps, with
//!   diminishing returns.
//!
//! Everything here is deliberately self-contained: rendering, the recognizer,
//! CTC loss, k-means, and the metrics are all implemented in this crate so
//! that every number in an experiment report can be traced to code you can
//! read in one sitting. Determinism is load-bearing throughout: a study spec
//! plus a seed reproduces every artifact byte-for-byte.
//!
//! The crate is organized as a library (usable from tests and other tools)
//! plus a thin CLI binary (`curalab`) that wires the pieces into a pipeline:
//! `generate -> train -> score -> embed -> cluster -> curate -> ablate`.

pub mod corpus;
pub mod curation;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod provenance;
pub mod recognizer;
pub mod rng;

pub mod cli;

pub use error::{Error, Result};
