use super::RngStream;
use crate::error::{Error, Result};

/// Uniform draws are clamped to `[UNIFORM_CLAMP, 1 - UNIFORM_CLAMP]` so the
/// logistic noise stays finite.
pub const UNIFORM_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GumbelSample {
    /// Relaxed sample in (0, 1).
    pub soft: f64,
    /// `soft > 0.5`.
    pub hard: bool,
}

impl GumbelSample {
    /// d(soft)/d(logit). Also the straight-through gradient of `hard`.
    pub fn dsoft_dlogit(&self, temperature: f64) -> f64 {
        self.soft * (1.0 - self.soft) / temperature
    }

    pub fn hard_value(&self) -> f64 {
        if self.hard {
            1.0
        } else {
            0.0
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log u - log(1 - u)` for a clamped uniform `u`: a standard logistic draw,
/// i.e. the difference of two Gumbel(0, 1) variables.
pub fn logistic_noise(rng: &mut RngStream) -> f64 {
    let u = rng.uniform().clamp(UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP);
    u.ln() - (1.0 - u).ln()
}

fn check_args(logit: f64, temperature: f64) -> Result<()> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Parameter(format!("temperature must be > 0, got {temperature}")));
    }
    if !logit.is_finite() {
        return Err(Error::NonFinite { what: "mask logit", index: 0 });
    }
    Ok(())
}

/// Relaxed Bernoulli sample for a fixed noise value.
pub fn gumbel_sigmoid_with_noise(logit: f64, temperature: f64, noise: f64) -> Result<GumbelSample> {
    check_args(logit, temperature)?;
    let soft = sigmoid((logit + noise) / temperature);
    Ok(GumbelSample { soft, hard: soft > 0.5 })
}

/// Relaxed Bernoulli sample for a given uniform draw (clamped like the sampler does).
pub fn gumbel_sigmoid_from_uniform(logit: f64, temperature: f64, u: f64) -> Result<GumbelSample> {
    let u = u.clamp(UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP);
    gumbel_sigmoid_with_noise(logit, temperature, u.ln() - (1.0 - u).ln())
}

pub fn gumbel_sigmoid_sample(logit: f64, temperature: f64, rng: &mut RngStream) -> Result<GumbelSample> {
    check_args(logit, temperature)?;
    gumbel_sigmoid_with_noise(logit, temperature, logistic_noise(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn forced_half_uniform_is_plain_sigmoid() {
        // u = 0.5 gives zero noise, so soft = sigmoid(2 / 0.5) = sigmoid(4).
        let oracle = 1.0 / (1.0 + (-4.0f64).exp());
        assert_abs_diff_eq!(oracle, 0.9820138, epsilon = 1e-7);
        let s = gumbel_sigmoid_from_uniform(2.0, 0.5, 0.5).unwrap();
        assert_abs_diff_eq!(s.soft, oracle, epsilon = 1e-15);
        assert!(s.hard);
    }

    #[test]
    fn saturates_for_large_logit() {
        for u in [UNIFORM_CLAMP, 1e-6, 0.5, 1.0 - UNIFORM_CLAMP] {
            let s = gumbel_sigmoid_from_uniform(100.0, 1.0, u).unwrap();
            assert!(s.hard);
            assert!(s.soft > 1.0 - 1e-15);
        }
    }

    #[test]
    fn zero_logit_is_fair_coin() {
        let mut rng = RngStream::new(5);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| gumbel_sigmoid_sample(0.0, 0.7, &mut rng).unwrap().hard)
            .count();
        assert_abs_diff_eq!(ones as f64 / n as f64, 0.5, epsilon = 0.01);
    }

    #[test]
    fn extreme_uniforms_are_clamped() {
        let lo = gumbel_sigmoid_from_uniform(0.0, 1.0, 0.0).unwrap();
        let hi = gumbel_sigmoid_from_uniform(0.0, 1.0, 1.0).unwrap();
        assert!(lo.soft > 0.0 && lo.soft.is_finite());
        assert!(hi.soft < 1.0 + 1e-15);
    }

    #[test]
    fn rejects_bad_temperature() {
        let mut rng = RngStream::new(0);
        for t in [0.0, -1.0, f64::NAN] {
            assert!(matches!(gumbel_sigmoid_sample(0.0, t, &mut rng), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn soft_derivative_matches_finite_difference() {
        let (noise, tau) = (0.3, 0.8);
        let l = 0.4;
        let s = gumbel_sigmoid_with_noise(l, tau, noise).unwrap();
        let h = 1e-6;
        let up = gumbel_sigmoid_with_noise(l + h, tau, noise).unwrap().soft;
        let dn = gumbel_sigmoid_with_noise(l - h, tau, noise).unwrap().soft;
        assert_abs_diff_eq!(s.dsoft_dlogit(tau), (up - dn) / (2.0 * h), epsilon = 1e-9);
    }
}
