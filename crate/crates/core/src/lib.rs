//! Low-shot fictional claim verification: synthetic plot-hole datasets,
//! rule-based knowledge graphs, hashed sentence encodings, and C-BERT /
//! U-BERT models with an optional GATv2 knowledge-graph branch.
//!
//! The numeric core is generic over [`Scalar`]; the aliases below fix the
//! double-precision instantiation used by the pipeline.

pub mod corpus;
pub mod encode;
pub mod error;
pub mod experiment;
pub mod inject;
pub mod jsonl;
pub mod kg;
pub mod lexicon;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod scalar;
pub mod selfcheck;

pub use scalar::Scalar;

pub type Tensor = nn::Tensor<f64>;
pub type ParamStore = nn::ParamStore<f64>;
pub type Tape = nn::Tape<f64>;
