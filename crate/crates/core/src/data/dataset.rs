use crate::error::{Error, Result};

/// Fixed-dimension feature vectors with class labels, tagged with a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    feature_dim: usize,
    num_classes: usize,
    domain: String,
    features: Vec<f64>,
    labels: Vec<u32>,
}

impl FeatureDataset {
    /// `features` is row-major, one row of `feature_dim` values per label.
    pub fn new(
        feature_dim: usize,
        num_classes: usize,
        domain: impl Into<String>,
        features: Vec<f64>,
        labels: Vec<u32>,
    ) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::Data("feature_dim must be at least 1".into()));
        }
        if num_classes == 0 {
            return Err(Error::Data("num_classes must be at least 1".into()));
        }
        if features.len() != labels.len() * feature_dim {
            return Err(Error::Dimension(format!(
                "{} labels need {} feature values, got {}",
                labels.len(),
                labels.len() * feature_dim,
                features.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l as usize >= num_classes) {
            return Err(Error::Data(format!(
                "sample {i} has label {} but num_classes is {num_classes}",
                labels[i]
            )));
        }
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "feature", index });
        }
        Ok(Self {
            feature_dim,
            num_classes,
            domain: domain.into(),
            features,
            labels,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn raw_features(&self) -> &[f64] {
        &self.features
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.features
            .chunks_exact(self.feature_dim)
            .zip(&self.labels)
            .map(|(x, &y)| (x, y as usize))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// A new dataset holding the given samples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.feature_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.features(i));
            labels.push(self.labels[i]);
        }
        Self {
            feature_dim: self.feature_dim,
            num_classes: self.num_classes,
            domain: self.domain.clone(),
            features,
            labels,
        }
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = domain.into();
        self
    }

    /// Replaces every feature vector through `map`, keeping labels. Used to
    /// push samples through a frozen hidden layer.
    pub fn map_features<F>(&self, new_dim: usize, mut map: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut features = Vec::with_capacity(self.len() * new_dim);
        for x in self.features.chunks_exact(self.feature_dim) {
            let y = map(x);
            if y.len() != new_dim {
                return Err(Error::Dimension(format!("mapped feature has {}, expected {new_dim}", y.len())));
            }
            features.extend(y);
        }
        Self::new(new_dim, self.num_classes, self.domain.clone(), features, self.labels.clone())
    }
}
