//! Cultural bias evaluation harness.
//!
//! Measures how often a language model prefers Western over Arab targets in
//! masked Arabic prompts (the Cultural Bias Score), and supports human
//! annotation of free-form generations from causal and chat models.

pub mod corpus;
pub mod geneval;
pub mod harness;
pub(crate) mod http;
pub mod metric;
pub mod scoring;
pub mod text;
pub mod transforms;
