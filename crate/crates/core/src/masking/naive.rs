use super::{MaskStrategy, WeightMask};
use crate::error::{Error, Result};
use crate::math::DenseMatrix;
use crate::model::mean_and_std;

/// Freezes the weights lying strictly outside one standard deviation of the
/// layer mean: `w > μ + σ` or `w < μ − σ`. Needs no data.
pub fn naive_mask(w: &DenseMatrix) -> Result<WeightMask> {
    if w.len() < 2 {
        return Err(Error::Data(format!("naive masking needs at least 2 weights, got {}", w.len())));
    }
    let (mean, std) = mean_and_std(w.as_slice());
    let (hi, lo) = (mean + std, mean - std);
    Ok(WeightMask::from_predicate(w, MaskStrategy::Naive, |v| v > hi || v < lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::mask_sparsity;
    use crate::math::RngStream;
    use proptest::prelude::*;

    #[test]
    fn constant_weights_freeze_nothing() {
        let m = naive_mask(&DenseMatrix::filled(4, 4, 0.3)).unwrap();
        assert_eq!(m.frozen_count(), 0);
    }

    #[test]
    fn small_example() {
        // μ = 2.5, σ = sqrt(18.75) ≈ 4.3301 → thresholds (−1.8301, 6.8301).
        let w = DenseMatrix::new(1, 4, vec![0.0, 0.0, 0.0, 10.0]).unwrap();
        assert_eq!(naive_mask(&w).unwrap().bits(), &[false, false, false, true]);
    }

    #[test]
    fn gaussian_tail_fraction() {
        // Two-sided standard normal tail beyond 1σ: 2·Φ(−1) = erfc(1/√2) ≈ 0.3173.
        let mut rng = RngStream::new(31);
        let w = DenseMatrix::new(100, 100, (0..10_000).map(|_| rng.standard_normal()).collect()).unwrap();
        let (frozen, _) = mask_sparsity(&naive_mask(&w).unwrap());
        assert!((frozen - 0.3173).abs() < 0.03, "{frozen}");
    }

    #[test]
    fn too_small() {
        assert!(matches!(naive_mask(&DenseMatrix::zeros(1, 1)), Err(Error::Data(_))));
    }

    proptest! {
        #[test]
        fn shifted_and_scaled_weights_give_the_same_mask(
            seed in any::<u64>(),
            scale in prop::sample::select(vec![0.25, 0.5, 2.0, 4.0, 8.0]),
            shift in -4.0f64..4.0,
        ) {
            let mut rng = RngStream::new(seed);
            let values: Vec<f64> = (0..200).map(|_| rng.standard_normal()).collect();
            let w = DenseMatrix::new(10, 20, values.clone()).unwrap();
            let moved = DenseMatrix::new(10, 20, values.iter().map(|v| scale * v + shift).collect()).unwrap();
            prop_assert_eq!(naive_mask(&w).unwrap().bits().to_vec(), naive_mask(&moved).unwrap().bits().to_vec());
        }
    }
}
