//! Target-domain fine-tuning under a weight mask.
//!
//! Frozen positions (bit 1) take their source-final values and never move;
//! reuse positions (bit 0) are re-initialized by an [`InitStrategy`] and then
//! trained on the target data. Nothing in this module takes source data.

use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::masking::WeightMask;
use crate::math::{DenseMatrix, RngStream};
use crate::model::{fit_final_layer, MlpHead, Snapshots, TrainConfig};

/// Starting point for reuse weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Continue from the values reached at the end of source training.
    SourceFinal,
    /// Rewind to the values the head had before source training.
    #[default]
    SourceInit,
    /// Fresh draws from `N(0, random_init_std²)`.
    Random,
}

impl InitStrategy {
    pub const ALL: [InitStrategy; 3] = [InitStrategy::SourceFinal, InitStrategy::SourceInit, InitStrategy::Random];

    pub fn name(self) -> &'static str {
        match self {
            InitStrategy::SourceFinal => "source-final",
            InitStrategy::SourceInit => "source-init",
            InitStrategy::Random => "random",
        }
    }
}

impl std::fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source-final" => Ok(InitStrategy::SourceFinal),
            "source-init" => Ok(InitStrategy::SourceInit),
            "random" => Ok(InitStrategy::Random),
            other => Err(Error::Config(format!("unknown init strategy `{other}`"))),
        }
    }
}

/// Builds the head fine-tuning starts from. Frozen entries always come from
/// the source-final snapshot; the bias is left as it is in `head`.
///
/// The random strategy draws one value per weight in row-major order, frozen
/// or not, so a reuse entry's value does not depend on the rest of the mask.
pub fn init_reuse_weights(
    head: &MlpHead,
    mask: &WeightMask,
    strategy: InitStrategy,
    snapshots: &Snapshots,
    random_std: f64,
    rng: &mut RngStream,
) -> Result<MlpHead> {
    mask.check_covers(head.weight())?;
    let final_snap = snapshots.source_final.as_ref();
    if final_snap.is_none() && (strategy == InitStrategy::SourceFinal || mask.frozen_count() > 0) {
        return Err(Error::State("source-final snapshot required but missing".into()));
    }
    let init_snap = snapshots.source_init.as_ref();
    if strategy == InitStrategy::SourceInit && init_snap.is_none() {
        return Err(Error::State("source-init snapshot required but missing".into()));
    }
    for snap in final_snap.iter().chain(init_snap.iter()) {
        if !snap.weight().same_shape(head.weight()) {
            return Err(Error::Dimension("snapshot shape differs from head".into()));
        }
    }
    if !(random_std >= 0.0) || !random_std.is_finite() {
        return Err(Error::Config(format!("random_init_std must be >= 0, got {random_std}")));
    }

    let n = head.weight().len();
    let draws: Vec<f64> = match strategy {
        InitStrategy::Random => (0..n).map(|_| rng.normal(0.0, random_std)).collect(),
        _ => Vec::new(),
    };
    let values = (0..n)
        .map(|i| {
            if mask.bits()[i] {
                return final_snap.unwrap().weight().as_slice()[i];
            }
            match strategy {
                InitStrategy::SourceFinal => final_snap.unwrap().weight().as_slice()[i],
                InitStrategy::SourceInit => init_snap.unwrap().weight().as_slice()[i],
                InitStrategy::Random => draws[i],
            }
        })
        .collect();
    let (rows, cols) = head.weight().shape();
    let mut out = head.clone();
    out.set_weight(DenseMatrix::new(rows, cols, values)?)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub head: MlpHead,
    pub loss_history: Vec<f64>,
    /// Largest |after − before| over frozen weights. Always 0 on success.
    pub max_frozen_drift: f64,
    /// Largest |after − before| over bias entries.
    pub max_bias_drift: f64,
}

/// Trains the reuse weights (and the bias when `config.tune_bias`) on the
/// target data while the frozen weights stay bit-identical to the input.
pub fn finetune_with_mask(
    head: &MlpHead,
    mask: &WeightMask,
    target: &FeatureDataset,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<FinetuneOutcome> {
    config.require_epochs()?;
    mask.check_covers(head.weight())?;
    let mut tuned = head.clone();
    let loss_history = fit_final_layer(&mut tuned, target, config, rng, Some(mask.bits()), config.tune_bias)?;
    let max_frozen_drift = max_drift(head.weight().as_slice(), tuned.weight().as_slice(), Some(mask.bits()));
    if max_frozen_drift != 0.0 {
        return Err(Error::Invariant(format!("frozen weights drifted by {max_frozen_drift}")));
    }
    let max_bias_drift = max_drift(head.bias(), tuned.bias(), None);
    Ok(FinetuneOutcome {
        head: tuned,
        loss_history,
        max_frozen_drift,
        max_bias_drift,
    })
}

/// Max absolute difference, optionally restricted to positions where `only` is set.
pub fn max_drift(before: &[f64], after: &[f64], only: Option<&[bool]>) -> f64 {
    before
        .iter()
        .zip(after)
        .enumerate()
        .filter(|(i, _)| only.is_none_or(|m| m[*i]))
        .map(|(_, (a, b))| (a - b).abs())
        .fold(0.0, f64::max)
}
