//! Learned weight masks for domain transfer of a classifier head.
//!
//! A head trained on a source domain is split into a frozen "specialize" set
//! and a tunable "reuse" set by one of three masking strategies (naive
//! σ-thresholding, editor-delta thresholding, Gumbel-sigmoid binary masks).
//! The reuse set is re-initialized and fine-tuned on a shifted target domain
//! while the frozen set keeps its source values, and the result is scored
//! against unmasked fine-tuning with source/target gains.
//!
//! Module map:
//! - [`math`]: seeded RNG streams, dense linear maps, softmax cross-entropy,
//!   Gumbel-sigmoid sampling, optimizers and finite-difference checks.
//! - [`data`]: feature datasets, the FTDS file format, stratified splits and
//!   the synthetic two-domain generator.
//! - [`model`]: the classifier head, its training loop and serialization.
//! - [`masking`]: the three mask strategies and mask serialization.
//! - [`transfer`]: re-initialization of the reuse set and masked fine-tuning.
//! - [`eval`]: baselines, gains, multi-seed aggregation and reports.
//! - [`pipeline`]: the full (strategy, init, seed) grid.

pub mod codec;
pub mod data;
pub mod error;
pub mod eval;
pub mod masking;
pub mod math;
pub mod model;
pub mod pipeline;
pub mod transfer;

pub use data::{FeatureDataset, SynthConfig};
pub use error::{Error, Result};
pub use eval::{GainRecord, TransferReport};
pub use masking::{DeltaW, MaskLogits, MaskStrategy, WeightMask};
pub use math::{DenseMatrix, OptimizerKind, OptimizerState, RngStream};
pub use model::{MlpHead, ParamSnapshot, TrainConfig};
pub use transfer::InitStrategy;
