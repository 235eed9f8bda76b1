//! Building blocks for generating SPARQL from natural-language questions with
//! gold entity and relation links, and for judging generated queries by
//! executing them against a knowledge-graph endpoint.

pub mod checkpoint;
pub mod codec;
pub mod datasets;
pub mod embeddings;
pub mod eval;
pub mod kg_client;
pub(crate) mod nn;
pub mod sparql;
pub mod pgn;
pub mod reranker;
