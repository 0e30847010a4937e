use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::OptimizerKind;

/// How sampled masks enter the forward pass while learning mask logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ForwardMask {
    /// The relaxed sample multiplies the weights.
    #[default]
    Soft,
    /// The hardened bit multiplies the weights; gradients use the relaxed
    /// sample's derivative (straight-through).
    Hard,
}

/// Which tail of `|ΔW|` an editor mask freezes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FreezeDirection {
    /// Freeze entries with `|ΔW| > μ + σ`.
    #[default]
    Large,
    /// Freeze entries with `|ΔW| < μ - σ`.
    Small,
}

/// Hyperparameters for every training stage. Omitted fields take the
/// defaults below when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// λ for the editor objective `CE(W + ΔW) - λ·mean|ΔW|`.
    pub edit_l1: f64,
    /// α for the binary-mask penalty `α·mean(sigmoid(logits))`.
    pub sparsity: f64,
    pub temperature: f64,
    /// Masks sampled per batch.
    pub masks_per_batch: usize,
    pub forward_mask: ForwardMask,
    pub mask_logit_init: f64,
    /// Bound on |ΔW| entries; `None` means `5 · max|W|`.
    pub delta_clamp: Option<f64>,
    pub freeze_direction: FreezeDirection,
    /// 1 = single linear layer, 2 = hidden layer + ReLU before it.
    pub depth: usize,
    pub hidden_width: usize,
    /// Whether the final-layer bias trains during target fine-tuning.
    pub tune_bias: bool,
    /// Standard deviation for random re-initialization of reuse weights.
    pub random_init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 30,
            seed: 0,
            edit_l1: 1.0,
            sparsity: 1.0,
            temperature: 1.0,
            masks_per_batch: 4,
            forward_mask: ForwardMask::Soft,
            mask_logit_init: 2.0,
            delta_clamp: None,
            freeze_direction: FreezeDirection::Large,
            depth: 1,
            hidden_width: 256,
            tune_bias: true,
            random_init_std: 0.01,
        }
    }
}

impl TrainConfig {
    /// Checks every field except `epochs`; stages that must take at least one
    /// step call [`TrainConfig::require_epochs`] as well.
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("edit_l1", self.edit_l1),
            ("sparsity", self.sparsity),
            ("random_init_std", self.random_init_std),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if !self.mask_logit_init.is_finite() {
            return Err(Error::Config("mask_logit_init must be finite".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.masks_per_batch == 0 {
            return Err(Error::Config("masks_per_batch must be >= 1".into()));
        }
        if !(1..=2).contains(&self.depth) {
            return Err(Error::Config(format!("depth must be 1 or 2, got {}", self.depth)));
        }
        if self.depth == 2 && self.hidden_width == 0 {
            return Err(Error::Config("hidden_width must be >= 1".into()));
        }
        if let Some(c) = self.delta_clamp {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Config(format!("delta_clamp must be > 0, got {c}")));
            }
        }
        Ok(())
    }

    pub fn require_epochs(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        Ok(())
    }
}
