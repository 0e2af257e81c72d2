//! Built-in fitness surfaces.
//!
//! The surrogate surfaces stand in for "validation accuracy after training": a concave
//! quadratic bowl with a planted peak, optionally with Gaussian bumps that create
//! deceptive local maxima. Values are clamped to `[0, 1]`.

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{finite, BuildError, Objective, ObjectiveError};
use crate::space::{ParamSpace, ParamVector, DEFAULT_ENUMERATION_LIMIT};

fn default_optimum() -> Vec<i64> {
    vec![49, 108]
}

fn default_peak() -> f64 {
    0.9963
}

fn default_coeffs() -> Vec<f64> {
    vec![2e-5, 1e-6]
}

fn default_true() -> bool {
    true
}

/// `clamp(peak - sum_i coeffs_i * (v_i - optimum_i)^2, 0, 1)`.
///
/// The defaults plant the peak `0.9963` at `(epochs, units) = (49, 108)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnimodalSettings {
    #[serde(default = "default_optimum")]
    pub optimum: Vec<i64>,
    #[serde(default = "default_peak")]
    pub peak: f64,
    #[serde(default = "default_coeffs")]
    pub coeffs: Vec<f64>,
}

impl Default for UnimodalSettings {
    fn default() -> Self {
        UnimodalSettings { optimum: default_optimum(), peak: default_peak(), coeffs: default_coeffs() }
    }
}

/// A Gaussian bump `height * exp(-|v - center|^2 / width^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<i64>,
    pub height: f64,
    pub width: f64,
}

/// The unimodal bowl plus a list of bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalSettings {
    #[serde(default = "default_optimum")]
    pub optimum: Vec<i64>,
    #[serde(default = "default_peak")]
    pub peak: f64,
    #[serde(default = "default_coeffs")]
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub bumps: Vec<Bump>,
    /// Enumerate the space at construction and confirm the planted optimum is the
    /// unique maximiser.
    #[serde(default = "default_true")]
    pub verify: bool,
}

impl MultimodalSettings {
    pub fn from_unimodal(base: UnimodalSettings, bumps: Vec<Bump>) -> Self {
        MultimodalSettings {
            optimum: base.optimum,
            peak: base.peak,
            coeffs: base.coeffs,
            bumps,
            verify: true,
        }
    }

    /// A random deceptive surface over `space` with `bump_count` bumps.
    ///
    /// Draws the optimum and bump centres uniformly, scales the bowl so it stays
    /// positive over the whole grid, and sizes each bump to a fraction of the gap
    /// between the bowl's value at its centre and the peak. Draws that fail
    /// verification are discarded and redrawn.
    pub fn random<R: RngCore + ?Sized>(
        space: &ParamSpace,
        bump_count: usize,
        rng: &mut R,
    ) -> Result<Self, BuildError> {
        let dims = space.dims() as f64;
        for _ in 0..256 {
            let optimum = space.sample_uniform(rng);
            let peak = rng.random_range(0.6..0.95);
            let coeffs: Vec<f64> = space
                .domains()
                .iter()
                .map(|d| {
                    let span = (d.upper() - d.lower()).max(1) as f64;
                    0.5 * peak / (dims * span * span)
                })
                .collect();
            let bowl = |v: &ParamVector| -> f64 {
                peak - coeffs
                    .iter()
                    .zip(v.values().iter().zip(optimum.values()))
                    .map(|(c, (a, b))| c * ((a - b) as f64).powi(2))
                    .sum::<f64>()
            };
            let bumps = (0..bump_count)
                .map(|_| {
                    let center = space.sample_uniform(rng);
                    let gap = peak - bowl(&center);
                    Bump {
                        height: gap * rng.random_range(0.4..0.85),
                        width: rng.random_range(1.0..3.0),
                        center: center.into_inner(),
                    }
                })
                .collect();
            let settings = MultimodalSettings {
                optimum: optimum.into_inner(),
                peak,
                coeffs,
                bumps,
                verify: true,
            };
            if Surrogate::multimodal(space, settings.clone()).is_ok() {
                return Ok(settings);
            }
        }
        Err(BuildError::Invalid("could not draw a verifiable multimodal surface".into()))
    }
}

/// A planted-optimum surrogate accuracy surface.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    optimum: ParamVector,
    peak: f64,
    coeffs: Vec<f64>,
    bumps: Vec<Bump>,
}

fn check_len<T>(field: &'static str, values: &[T], space: &ParamSpace) -> Result<(), BuildError> {
    if values.len() != space.dims() {
        return Err(BuildError::DimensionMismatch {
            field,
            expected: space.dims(),
            found: values.len(),
        });
    }
    Ok(())
}

impl Surrogate {
    pub fn unimodal(space: &ParamSpace, settings: UnimodalSettings) -> Result<Self, BuildError> {
        check_len("optimum", &settings.optimum, space)?;
        check_len("coeffs", &settings.coeffs, space)?;
        space
            .validate(&ParamVector::new(settings.optimum.clone()))
            .map_err(|e| BuildError::Invalid(format!("optimum: {e}")))?;
        Surrogate::from_settings(settings)
    }

    /// A unimodal surface not tied to any space; only the settings themselves are
    /// checked.
    pub fn from_settings(settings: UnimodalSettings) -> Result<Self, BuildError> {
        if settings.coeffs.len() != settings.optimum.len() {
            return Err(BuildError::DimensionMismatch {
                field: "coeffs",
                expected: settings.optimum.len(),
                found: settings.coeffs.len(),
            });
        }
        let optimum = ParamVector::new(settings.optimum);
        if !(settings.peak > 0.0 && settings.peak <= 1.0) {
            return Err(BuildError::Invalid(format!("peak must lie in (0, 1], got {}", settings.peak)));
        }
        if let Some(c) = settings.coeffs.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(BuildError::Invalid(format!("coeffs must be finite and > 0, got {c}")));
        }
        Ok(Surrogate { optimum, peak: settings.peak, coeffs: settings.coeffs, bumps: Vec::new() })
    }

    pub fn multimodal(space: &ParamSpace, settings: MultimodalSettings) -> Result<Self, BuildError> {
        let mut surface = Surrogate::unimodal(
            space,
            UnimodalSettings {
                optimum: settings.optimum,
                peak: settings.peak,
                coeffs: settings.coeffs,
            },
        )?;
        for bump in &settings.bumps {
            check_len("bumps[].center", &bump.center, space)?;
            if !(bump.height.is_finite() && bump.height >= 0.0) {
                return Err(BuildError::Invalid(format!("bump height must be >= 0, got {}", bump.height)));
            }
            if !(bump.width.is_finite() && bump.width > 0.0) {
                return Err(BuildError::Invalid(format!("bump width must be > 0, got {}", bump.width)));
            }
        }
        surface.bumps = settings.bumps;

        let top = surface.fitness(&surface.optimum);
        for bump in &surface.bumps {
            let center = ParamVector::new(bump.center.clone());
            let value = surface.fitness(&center);
            if value >= top {
                return Err(BuildError::OptimumNotUnique {
                    planted: surface.optimum.clone(),
                    found: center,
                    value,
                    peak: top,
                });
            }
        }
        if settings.verify {
            let grid = space
                .enumerate_grid_with_limit(DEFAULT_ENUMERATION_LIMIT)
                .map_err(|e| BuildError::ConstructionUnverifiable(e.to_string()))?;
            for v in grid {
                if v != surface.optimum {
                    let value = surface.fitness(&v);
                    if value >= top {
                        return Err(BuildError::OptimumNotUnique {
                            planted: surface.optimum.clone(),
                            found: v,
                            value,
                            peak: top,
                        });
                    }
                }
            }
        }
        Ok(surface)
    }

    pub fn optimum(&self) -> &ParamVector {
        &self.optimum
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    /// Surface value at `v`. Assumes `v` has the right length.
    pub fn fitness(&self, v: &ParamVector) -> f64 {
        let bowl: f64 = self
            .coeffs
            .iter()
            .zip(v.values().iter().zip(self.optimum.values()))
            .map(|(c, (a, b))| c * ((a - b) as f64).powi(2))
            .sum();
        let bumps: f64 = self
            .bumps
            .iter()
            .map(|b| {
                let d2: f64 = v
                    .values()
                    .iter()
                    .zip(&b.center)
                    .map(|(x, c)| ((x - c) as f64).powi(2))
                    .sum();
                b.height * (-d2 / (b.width * b.width)).exp()
            })
            .sum();
        (self.peak - bowl + bumps).clamp(0.0, 1.0)
    }
}

impl Objective for Surrogate {
    fn evaluate(&self, params: &ParamVector, _eval_id: u64) -> Result<f64, ObjectiveError> {
        if params.len() != self.optimum.len() {
            return Err(ObjectiveError::DimensionMismatch {
                expected: self.optimum.len(),
                found: params.len(),
            });
        }
        finite(self.fitness(params))
    }
}

/// `-sum_i (v_i - shift_i)^2`; maximum 0 at `shift`.
pub fn sphere_int(v: &[i64], shift: &[i64]) -> f64 {
    -v.iter()
        .zip(shift)
        .map(|(x, s)| ((x - s) as f64).powi(2))
        .sum::<f64>()
}

/// Negated Rastrigin on integer inputs; maximum 0 at `shift`.
pub fn rastrigin_int(v: &[i64], shift: &[i64]) -> f64 {
    -v.iter()
        .zip(shift)
        .map(|(x, s)| {
            let d = (x - s) as f64;
            d * d - 10.0 * (2.0 * PI * d).cos() + 10.0
        })
        .sum::<f64>()
}

/// Settings shared by the integer sphere and Rastrigin functions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntegerBenchmark {
    /// Location of the maximum; the origin when absent.
    #[serde(default)]
    pub shift: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BenchmarkFn {
    Sphere,
    Rastrigin,
}

/// A shifted integer benchmark bound to a dimension count.
#[derive(Debug, Clone)]
pub struct BenchmarkSurface {
    function: BenchmarkFn,
    shift: Vec<i64>,
}

impl IntegerBenchmark {
    pub(crate) fn resolve_shift(&self, space: &ParamSpace) -> Result<Vec<i64>, BuildError> {
        let shift = self.shift.clone().unwrap_or_else(|| vec![0; space.dims()]);
        check_len("shift", &shift, space)?;
        Ok(shift)
    }

    pub fn sphere(&self, space: &ParamSpace) -> Result<BenchmarkSurface, BuildError> {
        Ok(BenchmarkSurface { function: BenchmarkFn::Sphere, shift: self.resolve_shift(space)? })
    }

    pub fn rastrigin(&self, space: &ParamSpace) -> Result<BenchmarkSurface, BuildError> {
        Ok(BenchmarkSurface { function: BenchmarkFn::Rastrigin, shift: self.resolve_shift(space)? })
    }
}

impl Objective for BenchmarkSurface {
    fn evaluate(&self, params: &ParamVector, _eval_id: u64) -> Result<f64, ObjectiveError> {
        if params.len() != self.shift.len() {
            return Err(ObjectiveError::DimensionMismatch {
                expected: self.shift.len(),
                found: params.len(),
            });
        }
        finite(match self.function {
            BenchmarkFn::Sphere => sphere_int(params.values(), &self.shift),
            BenchmarkFn::Rastrigin => rastrigin_int(params.values(), &self.shift),
        })
    }
}
