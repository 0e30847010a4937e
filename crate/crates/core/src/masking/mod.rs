//! The three strategies that decide which final-layer weights are frozen
//! ("specialize", bit 1) and which are re-trained ("reuse", bit 0).

mod binary;
mod editor;
mod mask;
mod naive;

pub use binary::{binary_mask_objective, harden_mask, learn_binary_mask, sample_mask_noise, MaskLogits};
pub use editor::{editor_objective, learn_editor_delta, threshold_delta, DeltaW};
pub use mask::{decode_mask, encode_mask, load_mask, mask_sparsity, save_mask, MaskStrategy, WeightMask, MSMK_MAGIC, MSMK_VERSION};
pub use naive::naive_mask;
