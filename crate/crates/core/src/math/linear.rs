use super::DenseMatrix;
use crate::error::{Error, Result};

fn check_shapes(w: &DenseMatrix, b: &[f64], x: &[f64]) -> Result<()> {
    if b.len() != w.rows() || x.len() != w.cols() {
        return Err(Error::Dimension(format!(
            "W is {}x{}, b has {}, x has {}",
            w.rows(),
            w.cols(),
            b.len(),
            x.len()
        )));
    }
    Ok(())
}

/// `W·x + b`.
pub fn linear_forward(w: &DenseMatrix, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_shapes(w, b, x)?;
    let mut out = vec![0.0; w.rows()];
    w.matvec_into(x, &mut out);
    for (o, bi) in out.iter_mut().zip(b) {
        *o += bi;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub input: Option<Vec<f64>>,
}

/// Backward pass of [`linear_forward`] for an upstream gradient on the logits.
pub fn linear_backward(
    w: &DenseMatrix,
    b: &[f64],
    x: &[f64],
    grad_logits: &[f64],
    want_input_grad: bool,
) -> Result<LinearGrads> {
    check_shapes(w, b, x)?;
    if grad_logits.len() != w.rows() {
        return Err(Error::Dimension(format!(
            "grad_logits has {}, expected {}",
            grad_logits.len(),
            w.rows()
        )));
    }
    let mut weight = DenseMatrix::zeros(w.rows(), w.cols());
    weight.add_outer(grad_logits, x, 1.0);
    let input = want_input_grad.then(|| {
        (0..w.cols())
            .map(|c| (0..w.rows()).map(|r| w.get(r, c) * grad_logits[r]).sum())
            .collect()
    });
    Ok(LinearGrads {
        weight,
        bias: grad_logits.to_vec(),
        input,
    })
}
