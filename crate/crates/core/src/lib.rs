//! Turns per-judge verdict corpora into instruction datasets and scores model
//! generations against them: lexical, semantic and stylistic similarity,
//! cross-judge specificity statistics and authorship discernment.

pub mod config;
pub mod corpus;
pub mod discernment;
pub mod gateway;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod retrieval;
pub mod stats;
pub mod text;
