use serde::{Deserialize, Serialize};

use super::FeatureDataset;
use crate::error::{Error, Result};
use crate::math::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKind {
    /// Givens rotations by `shift_magnitude` radians in planes (0,1), (2,3), ...
    Rotation,
    /// Translation by a seeded unit direction scaled to `shift_magnitude`.
    MeanOffset,
    /// Rotation followed by the offset.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub feature_dim: usize,
    pub num_classes: usize,
    pub samples_per_class: usize,
    /// Class centers are `center_scale * N(0, I)`.
    pub center_scale: f64,
    /// Per-coordinate standard deviation of within-class noise.
    pub noise_std: f64,
    pub shift_kind: ShiftKind,
    pub shift_magnitude: f64,
    pub seed: u64,
    pub source_name: String,
    pub target_name: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            feature_dim: 32,
            num_classes: 4,
            samples_per_class: 200,
            center_scale: 1.0,
            noise_std: 0.5,
            shift_kind: ShiftKind::Rotation,
            shift_magnitude: std::f64::consts::FRAC_PI_4,
            seed: 0,
            source_name: "source".into(),
            target_name: "target".into(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config("num_classes must be >= 2".into()));
        }
        if self.samples_per_class < 10 {
            return Err(Error::Config("samples_per_class must be >= 10".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be >= 1".into()));
        }
        for (name, v) in [("center_scale", self.center_scale), ("noise_std", self.noise_std)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.shift_magnitude.is_finite() {
            return Err(Error::Config("shift_magnitude must be finite".into()));
        }
        let rotates = matches!(self.shift_kind, ShiftKind::Rotation | ShiftKind::Both);
        if rotates && self.shift_magnitude != 0.0 && self.feature_dim < 2 {
            return Err(Error::Config("rotation shift needs feature_dim >= 2".into()));
        }
        if self.source_name == self.target_name {
            return Err(Error::Config("source_name and target_name must differ".into()));
        }
        Ok(())
    }
}

fn rotate_pairs(x: &mut [f64], angle: f64) {
    let (s, c) = angle.sin_cos();
    for pair in x.chunks_exact_mut(2) {
        let (a, b) = (pair[0], pair[1]);
        pair[0] = c * a - s * b;
        pair[1] = s * a + c * b;
    }
}

/// Draws a source domain and a shifted target domain sharing class identities.
///
/// Centers are drawn once; source samples are `center + noise` and target
/// samples are `shift(center) + noise` with independent noise. With
/// `shift_magnitude == 0` the shift is the identity, so both domains come from
/// the same distribution.
pub fn synth_domains(config: &SynthConfig) -> Result<(FeatureDataset, FeatureDataset)> {
    config.validate()?;
    let d = config.feature_dim;
    let root = RngStream::new(config.seed);

    let mut center_rng = root.derive(0);
    let centers: Vec<Vec<f64>> = (0..config.num_classes)
        .map(|_| (0..d).map(|_| config.center_scale * center_rng.standard_normal()).collect())
        .collect();

    let mut dir_rng = root.derive(1);
    let mut direction: Vec<f64> = (0..d).map(|_| dir_rng.standard_normal()).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);

    let shifted: Vec<Vec<f64>> = centers
        .iter()
        .map(|c| {
            let mut s = c.clone();
            if matches!(config.shift_kind, ShiftKind::Rotation | ShiftKind::Both) {
                rotate_pairs(&mut s, config.shift_magnitude);
            }
            if matches!(config.shift_kind, ShiftKind::MeanOffset | ShiftKind::Both) {
                for (v, u) in s.iter_mut().zip(&direction) {
                    *v += config.shift_magnitude * u;
                }
            }
            s
        })
        .collect();

    let draw = |centers: &[Vec<f64>], mut rng: RngStream, name: &str| {
        let n = config.num_classes * config.samples_per_class;
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for (k, c) in centers.iter().enumerate() {
            for _ in 0..config.samples_per_class {
                features.extend(c.iter().map(|&m| m + config.noise_std * rng.standard_normal()));
                labels.push(k as u32);
            }
        }
        FeatureDataset::new(d, config.num_classes, name, features, labels)
    };
    let source = draw(&centers, root.derive(2), &config.source_name)?;
    let target = draw(&shifted, root.derive(3), &config.target_name)?;
    Ok((source, target))
}
