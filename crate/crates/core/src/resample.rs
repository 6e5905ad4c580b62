//! Resampling schemes and the effective sample size.
//!
//! Schemes implement [`Resampler`] and are looked up by name, so the
//! configuration can pick one at run time.

use crate::error::{Error, Result};
use rand::{Rng, RngCore};

pub trait Resampler: Send + Sync {
    fn name(&self) -> &'static str;

    /// Draws `n` ancestor indices with probabilities proportional to
    /// `weights`.
    fn ancestors(&self, weights: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>>;
}

/// Independent categorical draws.
pub struct Multinomial;

/// One uniform offset, `n` evenly spaced pointers.
pub struct Systematic;

fn cumulative(weights: &[f64]) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    let cdf: Vec<f64> = weights
        .iter()
        .map(|&w| {
            debug_assert!(w >= 0.0, "negative weight {w}");
            acc += w;
            acc
        })
        .collect();
    if !(acc > 0.0) || !acc.is_finite() {
        return Err(Error::AllZeroWeights);
    }
    Ok(cdf)
}

/// First index whose cumulative weight exceeds `u`, skipping zero-weight
/// entries.
fn locate(cdf: &[f64], u: f64) -> usize {
    let i = cdf.partition_point(|&c| c <= u);
    i.min(cdf.len() - 1)
}

impl Resampler for Multinomial {
    fn name(&self) -> &'static str {
        "multinomial"
    }

    fn ancestors(&self, weights: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
        let cdf = cumulative(weights)?;
        let total = *cdf.last().unwrap();
        Ok((0..n).map(|_| locate(&cdf, rng.gen::<f64>() * total)).collect())
    }
}

impl Resampler for Systematic {
    fn name(&self) -> &'static str {
        "systematic"
    }

    fn ancestors(&self, weights: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
        let cdf = cumulative(weights)?;
        let total = *cdf.last().unwrap();
        let u0: f64 = rng.gen();
        Ok((0..n)
            .map(|i| locate(&cdf, (u0 + i as f64) / n as f64 * total))
            .collect())
    }
}

static RESAMPLERS: &[&dyn Resampler] = &[&Multinomial, &Systematic];

pub fn resampler(name: &str) -> Result<&'static dyn Resampler> {
    RESAMPLERS
        .iter()
        .copied()
        .find(|r| r.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "resampler",
            name: name.to_string(),
            available: resampler_names().join(", "),
        })
}

pub fn resampler_names() -> Vec<&'static str> {
    RESAMPLERS.iter().map(|r| r.name()).collect()
}

/// `(sum w)^2 / sum w^2`, computed on max-normalized weights.
pub fn ess(weights: &[f64]) -> Result<f64> {
    let max = weights.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::AllZeroWeights);
    }
    let (s, s2) = weights
        .iter()
        .map(|w| w / max)
        .fold((0.0, 0.0), |(s, s2), w| (s + w, s2 + w * w));
    Ok(s * s / s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn one_hot_is_deterministic() {
        let mut rng = SimRng::seed_from_u64(0);
        for r in [resampler("multinomial").unwrap(), resampler("systematic").unwrap()] {
            assert_eq!(r.ancestors(&[0.0, 0.0, 1.0, 0.0], 4, &mut rng).unwrap(), vec![2; 4]);
        }
    }

    #[test]
    fn zero_weights_error() {
        let mut rng = SimRng::seed_from_u64(0);
        assert!(matches!(Multinomial.ancestors(&[0.0, 0.0], 2, &mut rng), Err(Error::AllZeroWeights)));
        assert!(matches!(ess(&[0.0; 3]), Err(Error::AllZeroWeights)));
    }

    #[test]
    fn unknown_resampler() {
        assert!(matches!(resampler("stratified"), Err(Error::UnknownStrategy { .. })));
    }

    #[test]
    fn ess_hand_cases() {
        assert_eq!(ess(&[1.0; 8]).unwrap(), 8.0);
        let mut one = [0.0; 8];
        one[3] = 2.5;
        assert_eq!(ess(&one).unwrap(), 1.0);
        assert!((ess(&[2.0, 1.0, 1.0]).unwrap() - 16.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn systematic_counts_are_within_one_of_expectation() {
        let w = [0.5, 0.25, 0.125, 0.125];
        let mut rng = SimRng::seed_from_u64(5);
        for _ in 0..100 {
            let a = Systematic.ancestors(&w, 16, &mut rng).unwrap();
            for (k, wk) in w.iter().enumerate() {
                let c = a.iter().filter(|&&i| i == k).count() as f64;
                assert!((c - 16.0 * wk).abs() <= 1.0);
            }
        }
    }

    proptest! {
        #[test]
        fn ess_bounds_and_scale_invariance(ws in proptest::collection::vec(0.0..10.0f64, 1..40), c in 0.01..100.0f64) {
            prop_assume!(ws.iter().any(|&w| w > 1e-6));
            let e = ess(&ws).unwrap();
            prop_assert!(e >= 1.0 - 1e-12 && e <= ws.len() as f64 + 1e-9);
            let scaled: Vec<f64> = ws.iter().map(|w| w * c).collect();
            prop_assert!((ess(&scaled).unwrap() - e).abs() < 1e-9 * e);
        }

        #[test]
        fn ancestors_never_pick_zero_weight(ws in proptest::collection::vec(prop_oneof![Just(0.0), 0.1..5.0f64], 1..20), seed in any::<u64>()) {
            prop_assume!(ws.iter().any(|&w| w > 0.0));
            let mut rng = SimRng::seed_from_u64(seed);
            for r in [resampler("multinomial").unwrap(), resampler("systematic").unwrap()] {
                for a in r.ancestors(&ws, 10, &mut rng).unwrap() {
                    prop_assert!(ws[a] > 0.0);
                }
            }
        }
    }
}
