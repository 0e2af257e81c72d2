//! Fitness functions.
//!
//! Everything the engine evaluates implements [`Objective`]. Fitness is maximised;
//! minimisation problems are negated at this boundary.
//!
//! [`ObjectiveSpec`] is the serialisable description used in config files, and
//! [`ObjectiveSpec::build`] turns it into a ready-to-use evaluator with noise and
//! memoisation layered on as requested.

mod external;
mod memo;
mod noise;
pub mod protocol;
mod surface;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::space::{ParamSpace, ParamVector};

pub use external::{ExternalEvaluator, ExternalSettings};
pub use memo::Memoized;
pub use noise::{NoiseSpec, Noisy};
pub use surface::{
    rastrigin_int, sphere_int, Bump, IntegerBenchmark, MultimodalSettings, Surrogate,
    UnimodalSettings,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjectiveError {
    #[error("objective returned a non-finite fitness ({0})")]
    NonFinite(f64),
    #[error("expected {expected} coordinates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("evaluation timed out after {0:?}")]
    Timeout(Duration),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("evaluator process exited: {0}")]
    ChildExited(String),
    #[error("evaluator reported an error: {0}")]
    Reported(String),
    #[error("{0}")]
    Other(String),
}

/// Errors raised while turning an [`ObjectiveSpec`] into an evaluator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error("{field}: expected {expected} values, found {found}")]
    DimensionMismatch { field: &'static str, expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot verify the planted optimum: {0}")]
    ConstructionUnverifiable(String),
    #[error("planted optimum {planted} is not the unique maximiser; {found} scores {value} >= {peak}")]
    OptimumNotUnique { planted: ParamVector, found: ParamVector, value: f64, peak: f64 },
    #[error("failed to start evaluator: {0}")]
    Spawn(String),
}

/// A black-box fitness function. Higher is better.
///
/// `eval_id` is the engine's sequence number for this evaluation. Deterministic
/// objectives ignore it; noise layers key their random stream on it.
pub trait Objective: Send + Sync {
    fn evaluate(&self, params: &ParamVector, eval_id: u64) -> Result<f64, ObjectiveError>;

    /// Number of times an underlying function was actually invoked, when a cache sits
    /// in front of it.
    fn distinct_evaluations(&self) -> Option<u64> {
        None
    }
}

impl<O: Objective + ?Sized> Objective for Box<O> {
    fn evaluate(&self, params: &ParamVector, eval_id: u64) -> Result<f64, ObjectiveError> {
        (**self).evaluate(params, eval_id)
    }

    fn distinct_evaluations(&self) -> Option<u64> {
        (**self).distinct_evaluations()
    }
}

impl<O: Objective + ?Sized> Objective for &O {
    fn evaluate(&self, params: &ParamVector, eval_id: u64) -> Result<f64, ObjectiveError> {
        (**self).evaluate(params, eval_id)
    }

    fn distinct_evaluations(&self) -> Option<u64> {
        (**self).distinct_evaluations()
    }
}

/// Adapts a closure over the raw coordinates.
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[i64]) -> f64 + Send + Sync,
{
    fn evaluate(&self, params: &ParamVector, _eval_id: u64) -> Result<f64, ObjectiveError> {
        Ok((self.0)(params.values()))
    }
}

pub fn from_fn<F>(f: F) -> FnObjective<F>
where
    F: Fn(&[i64]) -> f64 + Send + Sync,
{
    FnObjective(f)
}

/// Which fitness function to evaluate, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveKind {
    SurrogateUnimodal(UnimodalSettings),
    SurrogateMultimodal(MultimodalSettings),
    SphereInt(IntegerBenchmark),
    RastriginInt(IntegerBenchmark),
    External(ExternalSettings),
}

impl ObjectiveKind {
    fn is_surrogate(&self) -> bool {
        matches!(self, ObjectiveKind::SurrogateUnimodal(_) | ObjectiveKind::SurrogateMultimodal(_))
    }

    fn is_deterministic(&self) -> bool {
        !matches!(self, ObjectiveKind::External(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    #[serde(flatten)]
    pub kind: ObjectiveKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    /// Cache fitness by parameter vector. Defaults to on for built-in surfaces and
    /// off for external evaluators; must be off when noise is enabled.
    #[serde(default)]
    pub memoize: Option<bool>,
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind) -> Self {
        ObjectiveSpec { kind, noise: None, memoize: None }
    }

    pub fn default_surrogate() -> Self {
        Self::new(ObjectiveKind::SurrogateUnimodal(UnimodalSettings::default()))
    }

    fn noisy(&self) -> bool {
        self.noise.as_ref().is_some_and(|n| n.stddev > 0.0)
    }

    /// Memoisation setting after defaults.
    pub fn effective_memoize(&self) -> bool {
        self.memoize.unwrap_or(self.kind.is_deterministic() && !self.noisy())
    }

    /// Checks settings that do not depend on the space.
    pub fn check(&self) -> Result<(), BuildError> {
        if let Some(noise) = &self.noise {
            if !(noise.stddev >= 0.0 && noise.stddev.is_finite()) {
                return Err(BuildError::Invalid(format!(
                    "objective.noise.stddev must be finite and >= 0, got {}",
                    noise.stddev
                )));
            }
        }
        if self.memoize == Some(true) && self.noisy() {
            return Err(BuildError::Invalid(
                "objective.memoize cannot be enabled together with noise".into(),
            ));
        }
        if let ObjectiveKind::External(ext) = &self.kind {
            ext.check()?;
        }
        Ok(())
    }

    /// Copy with every defaulted field written out, for echoing into run outputs.
    pub fn resolved(&self) -> ObjectiveSpec {
        let mut spec = self.clone();
        spec.memoize = Some(self.effective_memoize());
        spec
    }

    /// Validates against `space` without starting any process.
    pub fn validate_for(&self, space: &ParamSpace) -> Result<(), BuildError> {
        self.check()?;
        match &self.kind {
            ObjectiveKind::SurrogateUnimodal(s) => Surrogate::unimodal(space, s.clone()).map(drop),
            ObjectiveKind::SurrogateMultimodal(s) => {
                Surrogate::multimodal(space, s.clone()).map(drop)
            }
            ObjectiveKind::SphereInt(b) | ObjectiveKind::RastriginInt(b) => {
                b.resolve_shift(space).map(drop)
            }
            ObjectiveKind::External(_) => Ok(()),
        }
    }

    /// Builds the evaluator stack: base function, then noise, then cache.
    pub fn build(&self, space: &ParamSpace) -> Result<Box<dyn Objective>, BuildError> {
        self.check()?;
        let base: Box<dyn Objective> = match &self.kind {
            ObjectiveKind::SurrogateUnimodal(s) => Box::new(Surrogate::unimodal(space, s.clone())?),
            ObjectiveKind::SurrogateMultimodal(s) => {
                Box::new(Surrogate::multimodal(space, s.clone())?)
            }
            ObjectiveKind::SphereInt(b) => Box::new(b.sphere(space)?),
            ObjectiveKind::RastriginInt(b) => Box::new(b.rastrigin(space)?),
            ObjectiveKind::External(ext) => Box::new(ExternalEvaluator::spawn(ext, space)?),
        };
        let with_noise: Box<dyn Objective> = match &self.noise {
            Some(n) if n.stddev > 0.0 => {
                Box::new(Noisy::new(base, n.clone(), self.kind.is_surrogate()))
            }
            _ => base,
        };
        Ok(if self.effective_memoize() {
            Box::new(Memoized::new(with_noise))
        } else {
            with_noise
        })
    }
}

/// Rejects NaN and infinite fitness values.
pub(crate) fn finite(value: f64) -> Result<f64, ObjectiveError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ObjectiveError::NonFinite(value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamDomain;

    fn standard_space() -> ParamSpace {
        ParamSpace::new(vec![
            ParamDomain::new("epochs", 1, 100).unwrap(),
            ParamDomain::new("units", 16, 256).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn spec_parses_with_defaults() {
        let spec: ObjectiveSpec = serde_json::from_str(r#"{"kind":"surrogate_unimodal"}"#).unwrap();
        assert_eq!(spec, ObjectiveSpec::default_surrogate());
        assert!(spec.effective_memoize());
        let obj = spec.build(&standard_space()).unwrap();
        assert_eq!(obj.evaluate(&ParamVector::new(vec![49, 108]), 0).unwrap(), 0.9963);
    }

    #[test]
    fn resolved_spec_round_trips() {
        let spec: ObjectiveSpec =
            serde_json::from_str(r#"{"kind":"rastrigin_int","shift":[3,4]}"#).unwrap();
        let json = serde_json::to_string(&spec.resolved()).unwrap();
        assert!(json.contains(r#""memoize":true"#), "{json}");
        let back: ObjectiveSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.kind, spec.kind);
    }

    #[test]
    fn noise_and_memoize_conflict() {
        let spec: ObjectiveSpec = serde_json::from_str(
            r#"{"kind":"surrogate_unimodal","noise":{"stddev":0.01,"seed":1},"memoize":true}"#,
        )
        .unwrap();
        assert!(matches!(spec.check(), Err(BuildError::Invalid(_))));
        let spec: ObjectiveSpec = serde_json::from_str(
            r#"{"kind":"surrogate_unimodal","noise":{"stddev":0.01,"seed":1}}"#,
        )
        .unwrap();
        assert!(!spec.effective_memoize());
        let negative: ObjectiveSpec =
            serde_json::from_str(r#"{"kind":"sphere_int","noise":{"stddev":-1.0,"seed":1}}"#).unwrap();
        assert!(negative.check().is_err());
    }

    #[test]
    fn external_requires_command() {
        let spec: ObjectiveSpec =
            serde_json::from_str(r#"{"kind":"external","command":[]}"#).unwrap();
        assert!(matches!(spec.check(), Err(BuildError::Invalid(_))));
        assert!(!ObjectiveSpec::new(ObjectiveKind::External(ExternalSettings::new(vec!["x".into()])))
            .effective_memoize());
    }

    #[test]
    fn dimension_mismatch_is_reported_at_build() {
        let space = ParamSpace::new(vec![ParamDomain::new("x", 0, 5).unwrap()]).unwrap();
        assert!(matches!(
            ObjectiveSpec::default_surrogate().build(&space),
            Err(BuildError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn closures_are_objectives() {
        let obj = from_fn(|v| -(v[0] as f64).abs());
        assert_eq!(obj.evaluate(&ParamVector::new(vec![-3]), 0).unwrap(), -3.0);
    }
}
