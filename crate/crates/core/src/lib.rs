//! Static analysis of object-oriented schemas for fine-grained
//! concurrency control.
//!
//! The pipeline: parse a schema into a [`schema::ClassModel`]; extract
//! per-method field-access facts ([`extraction`]); resolve late binding
//! into a per-class graph and fold it into transitive access vectors
//! ([`tav_graph`]); derive per-class commutativity tables
//! ([`commutativity`]); and schedule transactions under strict
//! two-phase locking over the inheritance graph ([`lockmgr`],
//! [`scenario`]).

pub mod commutativity;
pub mod error;
pub mod extraction;
pub mod fixtures;
pub mod generate;
pub mod lockmgr;
pub mod render;
pub mod scenario;
pub mod schema;
pub mod tav_graph;
pub mod vectors;

mod lex;

pub use error::{Error, Pos, Result};
