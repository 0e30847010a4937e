use super::{MaskStrategy, WeightMask};
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::math::{DenseMatrix, OptimizerState, RngStream};
use crate::model::{cross_entropy_batch, mean_and_std, FreezeDirection, MlpHead, TrainConfig};

/// Additive edit to the final-layer W learned on the source domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaW {
    pub values: DenseMatrix,
}

/// `CE(W + ΔW) − λ·mean|ΔW|` over the selected samples and its gradient in ΔW.
///
/// The L1 term enters with a negative sign, so minimizing pushes ΔW entries
/// away from zero. Its subgradient at exactly zero is taken as zero.
pub fn editor_objective(
    weight: &DenseMatrix,
    bias: &[f64],
    data: &FeatureDataset,
    indices: &[usize],
    delta: &DenseMatrix,
    edit_l1: f64,
) -> Result<(f64, DenseMatrix)> {
    if !delta.same_shape(weight) {
        return Err(Error::Dimension(format!("ΔW is {:?}, W is {:?}", delta.shape(), weight.shape())));
    }
    let edited = DenseMatrix::new(
        weight.rows(),
        weight.cols(),
        weight.as_slice().iter().zip(delta.as_slice()).map(|(w, d)| w + d).collect(),
    )?;
    let mut grad = DenseMatrix::zeros(weight.rows(), weight.cols());
    let mut grad_b = vec![0.0; bias.len()];
    let ce = cross_entropy_batch(&edited, bias, data, indices, &mut grad, &mut grad_b)?;
    let n = delta.len() as f64;
    let l1 = delta.as_slice().iter().map(|d| d.abs()).sum::<f64>() / n;
    for (g, d) in grad.as_mut_slice().iter_mut().zip(delta.as_slice()) {
        let sign = if *d > 0.0 {
            1.0
        } else if *d < 0.0 {
            -1.0
        } else {
            0.0
        };
        *g -= edit_l1 * sign / n;
    }
    Ok((ce - edit_l1 * l1, grad))
}

/// Learns ΔW on the source data with W and b held fixed.
///
/// ΔW starts at zero and is clamped to `[−c, c]` after every step, where `c`
/// is `config.delta_clamp` or `5 · max|W|`. Zero epochs return ΔW = 0.
pub fn learn_editor_delta(
    head: &MlpHead,
    source: &FeatureDataset,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<DeltaW> {
    config.validate()?;
    if source.is_empty() {
        return Err(Error::Data("editor training needs source samples".into()));
    }
    let data = head.embed_dataset(source)?;
    let weight = head.weight();
    let bound = config.delta_clamp.unwrap_or(5.0 * weight.max_abs());
    let mut delta = DenseMatrix::zeros(weight.rows(), weight.cols());
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, delta.len())?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            let (loss, grad) = editor_objective(weight, head.bias(), &data, batch, &delta, config.edit_l1)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("editor objective diverged in epoch {epoch}")));
            }
            opt.step(delta.as_mut_slice(), grad.as_slice(), None)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
            for d in delta.as_mut_slice() {
                *d = d.clamp(-bound, bound);
            }
        }
    }
    delta.check_finite("ΔW")?;
    Ok(DeltaW { values: delta })
}

/// Thresholds `|ΔW|` one standard deviation from its mean.
pub fn threshold_delta(delta: &DeltaW, direction: FreezeDirection) -> Result<WeightMask> {
    let values = &delta.values;
    if values.is_empty() {
        return Err(Error::Dimension("empty ΔW".into()));
    }
    values.check_finite("ΔW")?;
    let magnitudes: Vec<f64> = values.as_slice().iter().map(|d| d.abs()).collect();
    let (mean, std) = mean_and_std(&magnitudes);
    Ok(match direction {
        FreezeDirection::Large => {
            let cut = mean + std;
            WeightMask::from_predicate(values, MaskStrategy::Editor, |d| d.abs() > cut)
        }
        FreezeDirection::Small => {
            let cut = mean - std;
            WeightMask::from_predicate(values, MaskStrategy::Editor, |d| d.abs() < cut)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, synth_domains, SynthConfig};
    use crate::math::finite_difference_check;
    use crate::model::{evaluate_accuracy, train_head};
    use proptest::prelude::*;

    fn delta(values: Vec<f64>) -> DeltaW {
        DeltaW { values: DenseMatrix::new(1, values.len(), values).unwrap() }
    }

    #[test]
    fn threshold_large_example() {
        // μ = 0.3, σ = sqrt(0.12) ≈ 0.3464 → cut 0.6464.
        let m = threshold_delta(&delta(vec![0.1, 0.1, 0.1, 0.9]), FreezeDirection::Large).unwrap();
        assert_eq!(m.bits(), &[false, false, false, true]);
    }

    #[test]
    fn threshold_small_example() {
        // Cut μ − σ ≈ −0.0464: nothing is below it.
        let m = threshold_delta(&delta(vec![0.1, 0.1, 0.1, 0.9]), FreezeDirection::Small).unwrap();
        assert_eq!(m.frozen_count(), 0);
    }

    #[test]
    fn constant_magnitudes_freeze_nothing() {
        for dir in [FreezeDirection::Large, FreezeDirection::Small] {
            let m = threshold_delta(&delta(vec![0.4, -0.4, 0.4, -0.4]), dir).unwrap();
            assert_eq!(m.frozen_count(), 0);
        }
    }

    proptest! {
        #[test]
        fn sign_pattern_does_not_matter(
            values in prop::collection::vec(-3.0f64..3.0, 2..40),
            flips in prop::collection::vec(any::<bool>(), 40),
        ) {
            let flipped: Vec<f64> = values.iter().zip(&flips).map(|(v, &f)| if f { -v } else { *v }).collect();
            for dir in [FreezeDirection::Large, FreezeDirection::Small] {
                prop_assert_eq!(
                    threshold_delta(&delta(values.clone()), dir).unwrap().bits().to_vec(),
                    threshold_delta(&delta(flipped.clone()), dir).unwrap().bits().to_vec()
                );
            }
        }
    }

    fn trained_source() -> (MlpHead, FeatureDataset) {
        let cfg = SynthConfig { feature_dim: 8, num_classes: 3, samples_per_class: 60, ..Default::default() };
        let (source, _) = synth_domains(&cfg).unwrap();
        let (train, _) = split(&source, 0.8, 0).unwrap();
        let tc = TrainConfig { learning_rate: 1e-2, ..Default::default() };
        let t = train_head(&train, &tc, &mut RngStream::new(1)).unwrap();
        (t.head, train)
    }

    #[test]
    fn zero_epochs_leave_delta_at_zero() {
        let (head, train) = trained_source();
        let cfg = TrainConfig { epochs: 0, edit_l1: 0.0, ..Default::default() };
        let d = learn_editor_delta(&head, &train, &cfg, &mut RngStream::new(2)).unwrap();
        assert!(d.values.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unpenalized_edit_keeps_source_accuracy() {
        let (head, train) = trained_source();
        let cfg = TrainConfig { edit_l1: 0.0, ..Default::default() };
        let before = head.clone();
        let d = learn_editor_delta(&head, &train, &cfg, &mut RngStream::new(2)).unwrap();
        assert_eq!(head, before, "head parameters must not change");
        let edited_w = DenseMatrix::new(
            head.weight().rows(),
            head.weight().cols(),
            head.weight().as_slice().iter().zip(d.values.as_slice()).map(|(w, d)| w + d).collect(),
        )
        .unwrap();
        let mut edited = head.clone();
        edited.set_weight(edited_w).unwrap();
        let a0 = evaluate_accuracy(&head, &train).unwrap();
        let a1 = evaluate_accuracy(&edited, &train).unwrap();
        assert!((a0 - a1).abs() <= 0.02, "{a0} vs {a1}");
    }

    #[test]
    fn stronger_penalty_edits_more() {
        let (head, train) = trained_source();
        let run = |l1: f64| {
            let cfg = TrainConfig { edit_l1: l1, learning_rate: 1e-2, epochs: 10, ..Default::default() };
            let d = learn_editor_delta(&head, &train, &cfg, &mut RngStream::new(4)).unwrap();
            d.values.as_slice().iter().map(|v| v.abs()).sum::<f64>() / d.values.len() as f64
        };
        assert!(run(10.0) > run(0.01));
    }

    #[test]
    fn clamp_bounds_every_entry() {
        let (head, train) = trained_source();
        let cfg = TrainConfig { edit_l1: 50.0, learning_rate: 0.5, epochs: 5, delta_clamp: Some(0.25), ..Default::default() };
        let d = learn_editor_delta(&head, &train, &cfg, &mut RngStream::new(4)).unwrap();
        assert!(d.values.max_abs() <= 0.25);
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let (head, train) = trained_source();
        let mut rng = RngStream::new(12);
        let (c, k) = head.weight().shape();
        let dv: Vec<f64> = (0..c * k).map(|_| 0.5 * rng.standard_normal()).collect();
        let d = DenseMatrix::new(c, k, dv.clone()).unwrap();
        let batch: Vec<usize> = (0..5).collect();
        let (_, g) = editor_objective(head.weight(), head.bias(), &train, &batch, &d, 0.7).unwrap();
        let f = |p: &[f64]| {
            let dm = DenseMatrix::new(c, k, p.to_vec()).unwrap();
            editor_objective(head.weight(), head.bias(), &train, &batch, &dm, 0.7).unwrap().0
        };
        let err = finite_difference_check(f, &dv, g.as_slice(), 1e-6).unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
