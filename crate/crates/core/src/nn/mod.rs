//! Minimal dense reverse-mode autodiff engine and the layers built on it.

pub mod checkpoint;
pub mod gnn;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use gnn::{gnn_layer, Aggregation, GatOutput, GatV2Layer, GraphBatch, OutputActivation};
pub use layers::{
    length_mask, sinusoidal_positions, DecoderReduce, EncoderLayer, FeedForward, LayerNorm, Linear,
    MultiHeadAttention,
};
pub use optim::Adam;
pub use params::{ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
