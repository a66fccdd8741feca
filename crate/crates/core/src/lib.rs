//! Core types and algorithms for building and scoring relation-extraction
//! challenge sets.
//!
//! Relation classification is treated throughout as a family of binary
//! decisions over `(sentence, subject, object, relation)` tuples. This crate
//! holds everything that can be expressed as a pure computation over those
//! tuples:
//!
//! - [`schema`]: relation inventory, argument type constraints, question templates.
//! - [`corpus`]: sentences, mentions, candidate instances, pair enumeration,
//!   confusion-set expansion and challenge-set statistics.
//! - [`predict`]: the prediction record, the [`predict::Predictor`] trait and
//!   the gold-informed event / type / event+type heuristic oracles.
//! - [`miner`]: suspicious-sentence mining over seed-model output, per-relation
//!   sampling and annotation task export.
//! - [`annotate`]: the append-only label log fold, task frontier and
//!   adjudication.
//! - [`qa`]: the question-answering reduction.
//! - [`eval`]: Acc / Acc+ / Acc- and binarized micro P/R/F1.
//! - [`inoculate`]: stratified halving and training-set augmentation.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, networking and
//! the command line live in the `cre` crate.

#![no_std]

extern crate alloc;

pub mod annotate;
pub mod corpus;
pub mod eval;
pub mod inoculate;
pub mod miner;
pub mod predict;
pub mod qa;
pub mod schema;

mod seed;

pub use corpus::{CandidateInstance, CreDataset, EntityMention, MulticlassInstance, Sentence};
pub use predict::{Prediction, Predictor};
pub use schema::{EntityType, RelationSchema, SchemaConfig};
