//! 8-bit fixed-point weight quantization for convolutional networks.
//!
//! The pipeline: partition weights into scaling groups (layer-wise or
//! channel-wise), scale each group into (-2, 2) with a power-of-two
//! factor stored as a 4-bit exponent, quantize with a linear grid, a
//! three-region memory-free non-linear codebook, or a Lloyd-optimized
//! codebook, and account the resulting model size byte-exactly.
//! A small differentiable autoencoder hosts the weight-clipping
//! fine-tuning procedure end to end.
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability, or the `fixq` binary for the scripted workflows.

pub mod accounting;
pub mod cli;
pub mod error;
pub mod grouping;
pub mod io;
pub mod lloyd;
pub mod net;
pub mod pipeline;
pub mod quant;
pub mod tensor;
pub mod wcft;

pub use error::{Error, Result};
pub use grouping::Grouping;
pub use quant::FixedPointFormat;
pub use tensor::{FloatModel, ModelManifest, QuantizedModel, Scheme, WeightTensor};
