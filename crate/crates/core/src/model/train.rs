use serde::{Deserialize, Serialize};

use super::head::{HiddenLayer, MlpHead};
use super::objective::cross_entropy_batch;
use super::TrainConfig;
use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::math::{softmax_cross_entropy, DenseMatrix, OptimizerState, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotTag {
    /// Parameters before the first source-training step.
    SourceInit,
    /// Parameters after the last source-training step.
    SourceFinal,
}

/// Frozen copy of the final layer's parameters at a point in source training.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSnapshot {
    tag: SnapshotTag,
    weight: DenseMatrix,
    bias: Vec<f64>,
}

impl ParamSnapshot {
    pub fn capture(tag: SnapshotTag, head: &MlpHead) -> Self {
        Self {
            tag,
            weight: head.weight().clone(),
            bias: head.bias().to_vec(),
        }
    }

    pub fn from_parts(tag: SnapshotTag, weight: DenseMatrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Dimension("snapshot bias/weight rows disagree".into()));
        }
        Ok(Self { tag, weight, bias })
    }

    pub fn tag(&self) -> SnapshotTag {
        self.tag
    }

    pub fn weight(&self) -> &DenseMatrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshots {
    pub source_init: Option<ParamSnapshot>,
    pub source_final: Option<ParamSnapshot>,
}

#[derive(Debug, Clone)]
pub struct TrainedHead {
    pub head: MlpHead,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
    pub snapshots: Snapshots,
}

/// Trains a fresh head on `dataset` from a fan-in uniform initialization.
pub fn train_head(dataset: &FeatureDataset, config: &TrainConfig, rng: &mut RngStream) -> Result<TrainedHead> {
    config.validate()?;
    config.require_epochs()?;
    if dataset.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    let hidden = (config.depth == 2).then_some(config.hidden_width);
    let mut head = MlpHead::initialize(dataset.feature_dim(), dataset.num_classes(), hidden, rng)?;
    let source_init = ParamSnapshot::capture(SnapshotTag::SourceInit, &head);
    let loss_history = if hidden.is_some() {
        fit_two_layer(&mut head, dataset, config, rng)?
    } else {
        fit_final_layer(&mut head, dataset, config, rng, None, true)?
    };
    let source_final = ParamSnapshot::capture(SnapshotTag::SourceFinal, &head);
    Ok(TrainedHead {
        head,
        loss_history,
        snapshots: Snapshots {
            source_init: Some(source_init),
            source_final: Some(source_final),
        },
    })
}

fn numeric_in_epoch(epoch: usize, err: Error) -> Error {
    match err {
        Error::NonFinite { what, index } => Error::Numeric(format!("epoch {epoch}: non-finite {what} at index {index}")),
        other => other,
    }
}

/// Minibatch training of the final linear map only; any hidden layer stays fixed.
///
/// Entries with `frozen[i] == true` get a zeroed gradient, are skipped by the
/// optimizer (Adam moments included) and are restored after every step, so
/// they leave this function bit-identical. `tune_bias = false` keeps the bias
/// fixed as well. Returns the mean loss of each epoch.
pub fn fit_final_layer(
    head: &mut MlpHead,
    dataset: &FeatureDataset,
    config: &TrainConfig,
    rng: &mut RngStream,
    frozen: Option<&[bool]>,
    tune_bias: bool,
) -> Result<Vec<f64>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    let data = head.embed_dataset(dataset)?;
    let (_, weight, bias) = head.parts_mut();
    if let Some(f) = frozen {
        if f.len() != weight.len() {
            return Err(Error::Dimension(format!("freeze mask has {} bits, W has {}", f.len(), weight.len())));
        }
    }
    let pinned: Vec<(usize, f64)> = frozen
        .map(|f| {
            f.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| (i, weight.as_slice()[i]))
                .collect()
        })
        .unwrap_or_default();

    let mut opt_w = OptimizerState::new(config.optimizer, config.learning_rate, weight.len())?;
    let mut opt_b = OptimizerState::new(config.optimizer, config.learning_rate, bias.len())?;
    let mut grad_w = DenseMatrix::zeros(weight.rows(), weight.cols());
    let mut grad_b = vec![0.0; bias.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let loss = cross_entropy_batch(weight, bias, &data, batch, &mut grad_w, &mut grad_b)
                .map_err(|e| numeric_in_epoch(epoch, e))?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss in epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            for &(i, _) in &pinned {
                grad_w.as_mut_slice()[i] = 0.0;
            }
            opt_w
                .step(weight.as_mut_slice(), grad_w.as_slice(), frozen)
                .map_err(|e| numeric_in_epoch(epoch, e))?;
            for &(i, v) in &pinned {
                weight.as_mut_slice()[i] = v;
            }
            if tune_bias {
                opt_b.step(bias, &grad_b, None).map_err(|e| numeric_in_epoch(epoch, e))?;
            }
            weight.check_finite("weight").map_err(|e| numeric_in_epoch(epoch, e))?;
        }
        history.push(total / data.len() as f64);
    }
    Ok(history)
}

/// Gradients of the mean cross-entropy for a two-layer head over a batch.
struct TwoLayerGrads {
    hidden_w: DenseMatrix,
    hidden_b: Vec<f64>,
    weight: DenseMatrix,
    bias: Vec<f64>,
}

fn two_layer_batch(
    hidden: &HiddenLayer,
    weight: &DenseMatrix,
    bias: &[f64],
    data: &FeatureDataset,
    indices: &[usize],
    grads: &mut TwoLayerGrads,
) -> Result<f64> {
    grads.hidden_w.as_mut_slice().fill(0.0);
    grads.hidden_b.fill(0.0);
    grads.weight.as_mut_slice().fill(0.0);
    grads.bias.fill(0.0);
    let scale = 1.0 / indices.len() as f64;
    let width = hidden.weight.rows();
    let mut pre = vec![0.0; width];
    let mut act = vec![0.0; width];
    let mut logits = vec![0.0; weight.rows()];
    let mut back = vec![0.0; width];
    let mut total = 0.0;
    for &i in indices {
        let x = data.features(i);
        hidden.weight.matvec_into(x, &mut pre);
        for ((p, a), b) in pre.iter_mut().zip(&mut act).zip(&hidden.bias) {
            *p += b;
            *a = p.max(0.0);
        }
        weight.matvec_into(&act, &mut logits);
        logits.iter_mut().zip(bias).for_each(|(z, b)| *z += b);
        let (loss, g) = softmax_cross_entropy(&logits, data.label(i))?;
        total += loss;
        grads.weight.add_outer(&g, &act, scale);
        grads.bias.iter_mut().zip(&g).for_each(|(gb, gi)| *gb += scale * gi);
        for (h, bk) in back.iter_mut().enumerate() {
            let through: f64 = (0..weight.rows()).map(|c| weight.get(c, h) * g[c]).sum();
            *bk = if pre[h] > 0.0 { through } else { 0.0 };
        }
        grads.hidden_w.add_outer(&back, x, scale);
        grads.hidden_b.iter_mut().zip(&back).for_each(|(gb, bk)| *gb += scale * bk);
    }
    Ok(total * scale)
}

fn fit_two_layer(head: &mut MlpHead, data: &FeatureDataset, config: &TrainConfig, rng: &mut RngStream) -> Result<Vec<f64>> {
    head.check_input(data)?;
    let (hidden, weight, bias) = head.parts_mut();
    let hidden = hidden.expect("two-layer fit on a head with a hidden layer");
    let mut grads = TwoLayerGrads {
        hidden_w: DenseMatrix::zeros(hidden.weight.rows(), hidden.weight.cols()),
        hidden_b: vec![0.0; hidden.bias.len()],
        weight: DenseMatrix::zeros(weight.rows(), weight.cols()),
        bias: vec![0.0; bias.len()],
    };
    let mk = |n| OptimizerState::new(config.optimizer, config.learning_rate, n);
    let mut opts = [mk(hidden.weight.len())?, mk(hidden.bias.len())?, mk(weight.len())?, mk(bias.len())?];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let loss = two_layer_batch(hidden, weight, bias, data, batch, &mut grads)
                .map_err(|e| numeric_in_epoch(epoch, e))?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss in epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            let [o0, o1, o2, o3] = &mut opts;
            o0.step(hidden.weight.as_mut_slice(), grads.hidden_w.as_slice(), None)
                .and_then(|_| o1.step(&mut hidden.bias, &grads.hidden_b, None))
                .and_then(|_| o2.step(weight.as_mut_slice(), grads.weight.as_slice(), None))
                .and_then(|_| o3.step(bias, &grads.bias, None))
                .map_err(|e| numeric_in_epoch(epoch, e))?;
        }
        history.push(total / data.len() as f64);
    }
    Ok(history)
}
