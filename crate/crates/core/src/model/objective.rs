use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::math::{softmax_cross_entropy, DenseMatrix};

/// Mean softmax cross-entropy of `W·x + b` over the selected samples.
///
/// `grad_w` and `grad_b` are overwritten with the gradient of that mean.
/// `data` must already be in the final layer's input space.
pub fn cross_entropy_batch(
    weight: &DenseMatrix,
    bias: &[f64],
    data: &FeatureDataset,
    indices: &[usize],
    grad_w: &mut DenseMatrix,
    grad_b: &mut [f64],
) -> Result<f64> {
    if data.feature_dim() != weight.cols() || bias.len() != weight.rows() || !grad_w.same_shape(weight) {
        return Err(Error::Dimension(format!(
            "W {:?}, b {}, features {}, grad {:?}",
            weight.shape(),
            bias.len(),
            data.feature_dim(),
            grad_w.shape()
        )));
    }
    if indices.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    grad_w.as_mut_slice().fill(0.0);
    grad_b.fill(0.0);
    let scale = 1.0 / indices.len() as f64;
    let mut logits = vec![0.0; weight.rows()];
    let mut total = 0.0;
    for &i in indices {
        let x = data.features(i);
        weight.matvec_into(x, &mut logits);
        logits.iter_mut().zip(bias).for_each(|(z, b)| *z += b);
        let (loss, g) = softmax_cross_entropy(&logits, data.label(i))?;
        total += loss;
        grad_w.add_outer(&g, x, scale);
        grad_b.iter_mut().zip(&g).for_each(|(gb, gi)| *gb += scale * gi);
    }
    Ok(total * scale)
}
