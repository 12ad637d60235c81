//! Knowledge-driven follow-up question toolkit.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every algorithm of
//! the pipeline: the triple store and entity linker, corpus model, a small
//! differentiable toolkit, knowledge-graph embeddings, knowledge selection,
//! prompt serialization, the five Gricean scores, and the reference-based
//! metrics used to compare systems. File formats, configuration and the
//! command-line driver live in the companion `kgfq` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod embed;
pub mod encoder;
mod error;
pub mod generation;
pub mod gricean;
pub mod kg;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod selection;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
