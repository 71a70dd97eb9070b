//! Gender-neutral GloVe word embeddings.
//!
//! The crate covers the whole pipeline: corpus statistics ([`corpus`]),
//! gender word lists ([`lexicon`]), trainable state ([`model`]), the
//! objective with its analytic gradients ([`objective`]), AdaGrad training
//! with optional lock-free parallelism ([`trainer`]), a post-hoc hard-debias
//! baseline ([`debias`]) and bias/quality metrics ([`eval`]).
//!
//! With the default `parallel` feature, co-occurrence counting, training and
//! evaluation fan out over rayon workers. Without it every entry point runs
//! sequentially and ignores thread counts.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod debias;
pub mod demo;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod model;
pub mod objective;
mod par;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
