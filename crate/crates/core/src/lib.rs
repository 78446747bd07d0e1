//! Detection of domain-adjacent inputs for semantic parsers.
//!
//! A domain-adjacent utterance is on the parser's topic but asks for
//! something its output schema cannot express. The pipeline:
//!
//! 1. [`domain_mapping`] trains a CBOW model whose input layer maps
//!    pre-trained word vectors to domain-specific ones.
//! 2. [`encoders`] turns a sentence into a weighted average of pre-trained
//!    vectors, weighting each word by how surprising it is in its context
//!    under the domain-specific vectors.
//! 3. [`detector`] scores a sentence by its mean cosine distance to the `k`
//!    nearest training sentences and flags scores above a threshold
//!    calibrated on in-domain dev data.
//! 4. [`harness`] measures AUC and downstream parser accuracy.
//!
//! [`pipeline`] and [`cli`] wire the stages to files for the `adjacency`
//! binary.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod detector;
pub mod domain_mapping;
pub mod embeddings;
pub mod encoders;
mod error;
pub mod harness;
pub mod pipeline;
pub mod seed;
pub mod synthetic;

pub use error::{Error, Result};
