//! Query-specific article generation: retrieve passages for a broad query,
//! cluster them into subtopics, and summarize each cluster into a section
//! that keeps the ids of its source paragraphs.
//!
//! The crate also derives coordinated retrieval, clustering and summary
//! benchmarks from structured article outlines, and evaluates every stage
//! (MAP, ARI, ROUGE with paired bootstrap significance).

pub mod benchmark;
pub mod clustering;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod error;
pub mod io;
pub mod louvain;
pub mod pipeline;
pub mod provider;
pub mod retrieval;
pub mod simmetric;
pub mod summarize;

pub use error::{Error, ErrorKind, Result};
