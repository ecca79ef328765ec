//! Temporal knowledge graph question answering through an LLM agent loop.
//!
//! The pipeline: load a timestamped fact store ([`tkg`]), enumerate and
//! filter grounded candidate actions ([`candidates`]), let a language model
//! pick one per step under methodology guidance distilled from clustered
//! reasoning history ([`memory`]), execute it through the action DSL
//! ([`dsl`]), and score the resulting answers with Hits@k ([`eval`]).
//! Scripted LLM and hashed bag-of-words embedding backends keep every piece
//! runnable offline and deterministic.

pub mod candidates;
pub mod dsl;
pub mod embed;
pub mod error;
pub mod eval;
pub mod kmeans;
pub mod llm;
pub mod memory;
pub mod prompts;
pub mod reasoner;
pub mod time;
pub mod tkg;

pub use error::{Error, Result};
