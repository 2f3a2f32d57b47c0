//! Question-paraphrase evaluation toolkit.

pub mod alist;
pub mod annosvc;
pub mod corpus;
pub mod embeddings;
pub mod errscan;
pub mod harness;
pub mod metrics;
pub mod paragen;
pub mod text;
