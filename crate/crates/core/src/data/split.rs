use super::FeatureDataset;
use crate::error::{Error, Result};
use crate::math::RngStream;

/// Stratified train/test index assignment.
///
/// Each class is shuffled with a stream derived from `seed` and
/// `round(n_c * train_fraction)` of its samples (clamped so both sides get at
/// least one) go to train. Both index lists come back in ascending order.
pub fn split_indices(ds: &FeatureDataset, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Parameter(format!("train_fraction must be in (0, 1), got {train_fraction}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for i in 0..ds.len() {
        by_class[ds.label(i)].push(i);
    }
    let root = RngStream::new(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        match members.len() {
            0 => continue,
            1 => {
                return Err(Error::Stratification(format!("class {class} has a single sample")));
            }
            n => {
                root.derive(class as u64).shuffle(&mut members);
                let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
                train.extend_from_slice(&members[..n_train]);
                test.extend_from_slice(&members[n_train..]);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(ds: &FeatureDataset, train_fraction: f64, seed: u64) -> Result<(FeatureDataset, FeatureDataset)> {
    let (train, test) = split_indices(ds, train_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}
