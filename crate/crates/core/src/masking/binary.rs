use super::{MaskStrategy, WeightMask};
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::math::{gumbel_sigmoid_with_noise, logistic_noise, sigmoid, DenseMatrix, OptimizerState, RngStream};
use crate::model::{cross_entropy_batch, ForwardMask, MlpHead, TrainConfig};

/// Real-valued parameters behind a learned binary mask; the keep probability
/// of each weight is `sigmoid(logit)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskLogits {
    pub logits: DenseMatrix,
}

/// One logistic-noise matrix per mask sample, shaped like `like`.
pub fn sample_mask_noise(like: &DenseMatrix, samples: usize, rng: &mut RngStream) -> Vec<DenseMatrix> {
    (0..samples)
        .map(|_| {
            let values = (0..like.len()).map(|_| logistic_noise(rng)).collect();
            DenseMatrix::new(like.rows(), like.cols(), values).expect("clamped noise is finite")
        })
        .collect()
}

/// Masked cross-entropy averaged over the supplied noise draws plus the
/// sparsity penalty `α·mean(sigmoid(logits))`, and its gradient in the logits.
///
/// Each draw forms `m = sigmoid((logit + noise)/τ)` (or its hardened bit in
/// [`ForwardMask::Hard`] mode) and evaluates the head with `W ⊙ m`. The
/// gradient always uses `dm/dlogit = m_soft(1 − m_soft)/τ`, which makes the
/// hard mode a straight-through estimator.
#[allow(clippy::too_many_arguments)]
pub fn binary_mask_objective(
    weight: &DenseMatrix,
    bias: &[f64],
    data: &FeatureDataset,
    indices: &[usize],
    logits: &DenseMatrix,
    noise: &[DenseMatrix],
    temperature: f64,
    sparsity: f64,
    mode: ForwardMask,
) -> Result<(f64, DenseMatrix)> {
    if !logits.same_shape(weight) || noise.iter().any(|n| !n.same_shape(weight)) {
        return Err(Error::Dimension("mask logits and noise must match W".into()));
    }
    if noise.is_empty() {
        return Err(Error::Config("at least one mask sample is required".into()));
    }
    let k = noise.len() as f64;
    let n = weight.len() as f64;
    let mut grad = DenseMatrix::zeros(weight.rows(), weight.cols());
    let mut masked = DenseMatrix::zeros(weight.rows(), weight.cols());
    let mut slope = vec![0.0; weight.len()];
    let mut grad_masked = DenseMatrix::zeros(weight.rows(), weight.cols());
    let mut grad_b = vec![0.0; bias.len()];
    let mut ce_total = 0.0;
    for draw in noise {
        for (i, ((m, s), (&l, &g))) in masked
            .as_mut_slice()
            .iter_mut()
            .zip(&mut slope)
            .zip(logits.as_slice().iter().zip(draw.as_slice()))
            .enumerate()
        {
            let sample = gumbel_sigmoid_with_noise(l, temperature, g)?;
            let gate = match mode {
                ForwardMask::Soft => sample.soft,
                ForwardMask::Hard => sample.hard_value(),
            };
            *m = weight.as_slice()[i] * gate;
            *s = sample.dsoft_dlogit(temperature);
        }
        ce_total += cross_entropy_batch(&masked, bias, data, indices, &mut grad_masked, &mut grad_b)?;
        for (i, g) in grad.as_mut_slice().iter_mut().enumerate() {
            *g += grad_masked.as_slice()[i] * weight.as_slice()[i] * slope[i] / k;
        }
    }
    let mut penalty = 0.0;
    for (g, &l) in grad.as_mut_slice().iter_mut().zip(logits.as_slice()) {
        let p = sigmoid(l);
        penalty += p;
        *g += sparsity * p * (1.0 - p) / n;
    }
    Ok((ce_total / k + sparsity * penalty / n, grad))
}

/// Learns mask logits over the final-layer W on the source data, with W and
/// b frozen. Logits start at `config.mask_logit_init`; every batch draws
/// `config.masks_per_batch` independent masks.
pub fn learn_binary_mask(
    head: &MlpHead,
    source: &FeatureDataset,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<MaskLogits> {
    config.validate()?;
    if source.is_empty() {
        return Err(Error::Data("mask training needs source samples".into()));
    }
    let data = head.embed_dataset(source)?;
    let weight = head.weight();
    let mut logits = DenseMatrix::filled(weight.rows(), weight.cols(), config.mask_logit_init);
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, logits.len())?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            let noise = sample_mask_noise(weight, config.masks_per_batch, rng);
            let (loss, grad) = binary_mask_objective(
                weight,
                head.bias(),
                &data,
                batch,
                &logits,
                &noise,
                config.temperature,
                config.sparsity,
                config.forward_mask,
            )?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("mask objective diverged in epoch {epoch}")));
            }
            opt.step(logits.as_mut_slice(), grad.as_slice(), None)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
        }
    }
    logits.check_finite("mask logit")?;
    Ok(MaskLogits { logits })
}

/// Deterministic readout: bit = 1 iff `logit > 0` (keep probability above one half).
pub fn harden_mask(logits: &MaskLogits) -> WeightMask {
    WeightMask::from_predicate(&logits.logits, MaskStrategy::Binary, |l| l > 0.0)
}
