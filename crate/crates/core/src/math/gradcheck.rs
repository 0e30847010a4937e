use crate::error::{Error, Result};

/// Compares an analytic gradient against central differences of `loss_fn`.
///
/// Returns the largest `|analytic - numeric| / max(1e-12, |numeric|)` over all
/// coordinates. `loss_fn` must be deterministic; it is evaluated twice at the
/// unperturbed point and any difference is reported as a
/// [`Error::Determinism`].
pub fn finite_difference_check<F>(mut loss_fn: F, params: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Parameter(format!("eps must be in [1e-7, 1e-3], got {eps}")));
    }
    if params.len() != analytic.len() {
        return Err(Error::Dimension(format!(
            "{} params vs {} analytic entries",
            params.len(),
            analytic.len()
        )));
    }
    let first = loss_fn(params);
    let second = loss_fn(params);
    if first.to_bits() != second.to_bits() {
        return Err(Error::Determinism(format!("{first} then {second} at the same point")));
    }

    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let up = loss_fn(&probe);
        probe[i] = orig - eps;
        let down = loss_fn(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let rel = (analytic[i] - numeric).abs() / numeric.abs().max(1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn exact_for_quadratic() {
        let err = finite_difference_check(|p| p[0] * p[0], &[3.0], &[6.0], 1e-4).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let f = |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>();
        let p = [1.0, -2.0, 0.5];
        let doubled: Vec<f64> = p.iter().map(|x| 2.0 * 2.0 * x).collect();
        let err = finite_difference_check(f, &p, &doubled, 1e-5).unwrap();
        assert!((err - 1.0).abs() < 1e-6, "{err}");
        assert!(err >= 1e-4);
    }

    #[test]
    fn nondeterministic_loss_is_rejected() {
        let counter = Cell::new(0.0);
        let f = |p: &[f64]| {
            counter.set(counter.get() + 1.0);
            p[0] + counter.get()
        };
        assert!(matches!(finite_difference_check(f, &[0.0], &[1.0], 1e-5), Err(Error::Determinism(_))));
    }

    #[test]
    fn eps_range_enforced() {
        let f = |p: &[f64]| p[0];
        assert!(matches!(finite_difference_check(f, &[0.0], &[1.0], 1e-2), Err(Error::Parameter(_))));
        assert!(matches!(finite_difference_check(f, &[0.0], &[1.0], 1e-9), Err(Error::Parameter(_))));
    }
}
