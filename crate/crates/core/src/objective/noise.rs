use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{finite, Objective, ObjectiveError};
use crate::rng::{mix_seed, seeded};
use crate::space::ParamVector;

/// Additive Gaussian noise with a fixed seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub stddev: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Adds `N(0, stddev^2)` to every evaluation.
///
/// The noise for evaluation `eval_id` comes from a stream seeded with
/// `mix_seed(seed, eval_id)`, so noisy runs replay exactly.
pub struct Noisy<O> {
    inner: O,
    normal: Normal<f64>,
    seed: u64,
    clamp_unit: bool,
}

impl<O: Objective> Noisy<O> {
    /// `clamp_unit` keeps results in `[0, 1]` for accuracy-like surfaces.
    pub fn new(inner: O, spec: NoiseSpec, clamp_unit: bool) -> Self {
        let normal = Normal::new(0.0, spec.stddev).expect("stddev validated by ObjectiveSpec::check");
        Noisy { inner, normal, seed: spec.seed, clamp_unit }
    }
}

impl<O: Objective> Objective for Noisy<O> {
    fn evaluate(&self, params: &ParamVector, eval_id: u64) -> Result<f64, ObjectiveError> {
        let clean = self.inner.evaluate(params, eval_id)?;
        let mut rng = seeded(mix_seed(self.seed, eval_id));
        let noisy = clean + self.normal.sample(&mut rng);
        finite(if self.clamp_unit { noisy.clamp(0.0, 1.0) } else { noisy })
    }

    fn distinct_evaluations(&self) -> Option<u64> {
        self.inner.distinct_evaluations()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::from_fn;

    #[test]
    fn noise_is_keyed_by_eval_id() {
        let n = Noisy::new(from_fn(|_| 0.5), NoiseSpec { stddev: 0.1, seed: 3 }, true);
        let p = ParamVector::new(vec![1]);
        let a = n.evaluate(&p, 7).unwrap();
        assert_eq!(a, n.evaluate(&p, 7).unwrap());
        assert_ne!(a, n.evaluate(&p, 8).unwrap());
        assert_ne!(a, 0.5);
    }

    #[test]
    fn noise_statistics_match_stddev() {
        let n = Noisy::new(from_fn(|_| 0.0), NoiseSpec { stddev: 2.0, seed: 1 }, false);
        let p = ParamVector::new(vec![0]);
        let xs: Vec<f64> = (0..20_000).map(|i| n.evaluate(&p, i).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!(mean.abs() < 0.05, "{mean}");
        assert!((var.sqrt() - 2.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn clamping_keeps_accuracy_range() {
        let n = Noisy::new(from_fn(|_| 0.999), NoiseSpec { stddev: 0.5, seed: 0 }, true);
        let p = ParamVector::new(vec![0]);
        for i in 0..200 {
            assert!((0.0..=1.0).contains(&n.evaluate(&p, i).unwrap()));
        }
    }
}
