use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::math::{DenseMatrix, RngStream};

/// Optional hidden layer (`relu(W1·x + b1)`) in front of the final map.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

/// Classifier head. Only the final linear map (`weight`, `bias`) is ever
/// masked or fine-tuned; a hidden layer, when present, is trained with the
/// source domain and fixed afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead {
    hidden: Option<HiddenLayer>,
    weight: DenseMatrix,
    bias: Vec<f64>,
}

fn uniform_fan_in(rows: usize, cols: usize, rng: &mut RngStream) -> (DenseMatrix, Vec<f64>) {
    let bound = 1.0 / (cols as f64).sqrt();
    let w = (0..rows * cols).map(|_| rng.uniform_range(-bound, bound)).collect();
    let b = (0..rows).map(|_| rng.uniform_range(-bound, bound)).collect();
    (DenseMatrix::new(rows, cols, w).expect("finite init"), b)
}

impl MlpHead {
    /// Fan-in uniform initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
    /// for every weight and bias.
    pub fn initialize(
        input_dim: usize,
        num_classes: usize,
        hidden_width: Option<usize>,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if input_dim == 0 || num_classes == 0 || hidden_width == Some(0) {
            return Err(Error::Dimension("head dimensions must be positive".into()));
        }
        let hidden = hidden_width.map(|h| {
            let (weight, bias) = uniform_fan_in(h, input_dim, rng);
            HiddenLayer { weight, bias }
        });
        let final_in = hidden_width.unwrap_or(input_dim);
        let (weight, bias) = uniform_fan_in(num_classes, final_in, rng);
        Ok(Self { hidden, weight, bias })
    }

    pub fn from_parts(hidden: Option<HiddenLayer>, weight: DenseMatrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Dimension(format!("bias has {}, W has {} rows", bias.len(), weight.rows())));
        }
        if let Some(h) = &hidden {
            if h.bias.len() != h.weight.rows() || h.weight.rows() != weight.cols() {
                return Err(Error::Dimension("hidden layer does not chain into the final layer".into()));
            }
            h.weight.check_finite("hidden weight")?;
            check_vec(&h.bias, "hidden bias")?;
        }
        weight.check_finite("weight")?;
        check_vec(&bias, "bias")?;
        Ok(Self { hidden, weight, bias })
    }

    pub fn depth(&self) -> usize {
        if self.hidden.is_some() {
            2
        } else {
            1
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.as_ref().map_or(self.weight.cols(), |h| h.weight.cols())
    }

    pub fn num_classes(&self) -> usize {
        self.weight.rows()
    }

    pub fn hidden(&self) -> Option<&HiddenLayer> {
        self.hidden.as_ref()
    }

    pub fn weight(&self) -> &DenseMatrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn set_weight(&mut self, weight: DenseMatrix) -> Result<()> {
        if !weight.same_shape(&self.weight) {
            return Err(Error::Dimension(format!("W is {:?}, got {:?}", self.weight.shape(), weight.shape())));
        }
        weight.check_finite("weight")?;
        self.weight = weight;
        Ok(())
    }

    pub fn set_bias(&mut self, bias: Vec<f64>) -> Result<()> {
        if bias.len() != self.bias.len() {
            return Err(Error::Dimension(format!("bias has {}, got {}", self.bias.len(), bias.len())));
        }
        check_vec(&bias, "bias")?;
        self.bias = bias;
        Ok(())
    }

    pub(crate) fn parts_mut(&mut self) -> (Option<&mut HiddenLayer>, &mut DenseMatrix, &mut Vec<f64>) {
        (self.hidden.as_mut(), &mut self.weight, &mut self.bias)
    }

    /// Input to the final linear map for one sample.
    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        match &self.hidden {
            None => x.to_vec(),
            Some(h) => {
                let mut z = vec![0.0; h.weight.rows()];
                h.weight.matvec_into(x, &mut z);
                z.iter_mut().zip(&h.bias).for_each(|(v, b)| *v = (*v + b).max(0.0));
                z
            }
        }
    }

    /// The dataset as seen by the final linear map.
    pub fn embed_dataset(&self, ds: &FeatureDataset) -> Result<FeatureDataset> {
        self.check_input(ds)?;
        match &self.hidden {
            None => Ok(ds.clone()),
            Some(h) => ds.map_features(h.weight.rows(), |x| self.embed(x)),
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!("input has {}, head expects {}", x.len(), self.input_dim())));
        }
        let z = self.embed(x);
        let mut out = vec![0.0; self.num_classes()];
        self.weight.matvec_into(&z, &mut out);
        out.iter_mut().zip(&self.bias).for_each(|(o, b)| *o += b);
        Ok(out)
    }

    /// Argmax of the logits; ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    pub(crate) fn check_input(&self, ds: &FeatureDataset) -> Result<()> {
        if ds.feature_dim() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "dataset feature_dim {} vs head input {}",
                ds.feature_dim(),
                self.input_dim()
            )));
        }
        if ds.num_classes() != self.num_classes() {
            return Err(Error::Dimension(format!(
                "dataset has {} classes, head has {}",
                ds.num_classes(),
                self.num_classes()
            )));
        }
        Ok(())
    }
}

fn check_vec(v: &[f64], what: &'static str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose predicted class equals the label.
pub fn evaluate_accuracy(head: &MlpHead, ds: &FeatureDataset) -> Result<f64> {
    head.check_input(ds)?;
    if ds.is_empty() {
        return Err(Error::Data("cannot evaluate accuracy on an empty dataset".into()));
    }
    let mut correct = 0usize;
    for (x, y) in ds.iter() {
        if head.predict(x)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}
