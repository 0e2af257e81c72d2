//! Integer hyperparameter domains.
//!
//! A [`ParamSpace`] is an ordered list of named integer grids. Points in it are
//! [`ParamVector`]s, aligned positionally with the domains.

use std::collections::HashSet;
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::rng::uniform_index;

/// Default cap on the number of points [`ParamSpace::enumerate_grid`] will produce.
pub const DEFAULT_ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpaceError {
    #[error("parameter name must be non-empty")]
    EmptyName,
    #[error("parameter `{name}`: lower bound {lower} exceeds upper bound {upper}")]
    InvalidBounds { name: String, lower: i64, upper: i64 },
    #[error("parameter `{name}`: step must be at least 1, got {step}")]
    InvalidStep { name: String, step: i64 },
    #[error("parameter `{name}`: range {lower}..={upper} is not a multiple of step {step}")]
    Misaligned { name: String, lower: i64, upper: i64, step: i64 },
    #[error("parameter `{name}`: more than 2^64 - 1 grid points")]
    RangeTooWide { name: String },
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("parameter space must contain at least one domain")]
    NoDomains,
    #[error("space has {cardinality} grid points, more than the enumeration limit of {limit}")]
    SpaceTooLarge { cardinality: u128, limit: u128 },
    #[error("every coordinate has a single-point neighbourhood; the space is degenerate")]
    NeighborhoodEmpty,
    #[error("expected {expected} coordinates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter `{name}`: value {value} is not on the grid {lower}..={upper} step {step}")]
    OffGrid { name: String, value: i64, lower: i64, upper: i64, step: i64 },
    #[error("neighbourhood radius must be at least 1")]
    InvalidRadius,
}

fn default_step() -> i64 {
    1
}

#[derive(Deserialize)]
struct RawDomain {
    name: String,
    lower: i64,
    upper: i64,
    #[serde(default = "default_step")]
    step: i64,
}

/// One named integer hyperparameter: the grid `lower, lower + step, ..., upper`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain")]
pub struct ParamDomain {
    name: String,
    lower: i64,
    upper: i64,
    step: i64,
}

impl TryFrom<RawDomain> for ParamDomain {
    type Error = SpaceError;

    fn try_from(raw: RawDomain) -> Result<Self, Self::Error> {
        ParamDomain::with_step(raw.name, raw.lower, raw.upper, raw.step)
    }
}

impl ParamDomain {
    pub fn new(name: impl Into<String>, lower: i64, upper: i64) -> Result<Self, SpaceError> {
        Self::with_step(name, lower, upper, 1)
    }

    pub fn with_step(
        name: impl Into<String>,
        lower: i64,
        upper: i64,
        step: i64,
    ) -> Result<Self, SpaceError> {
        let name = name.into();
        if name.is_empty() {
            return Err(SpaceError::EmptyName);
        }
        if lower > upper {
            return Err(SpaceError::InvalidBounds { name, lower, upper });
        }
        if step < 1 {
            return Err(SpaceError::InvalidStep { name, step });
        }
        if (upper as i128 - lower as i128) % step as i128 != 0 {
            return Err(SpaceError::Misaligned { name, lower, upper, step });
        }
        if (upper as i128 - lower as i128) / step as i128 >= u64::MAX as i128 {
            return Err(SpaceError::RangeTooWide { name });
        }
        Ok(ParamDomain { name, lower, upper, step })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lower(&self) -> i64 {
        self.lower
    }

    pub fn upper(&self) -> i64 {
        self.upper
    }

    pub fn step(&self) -> i64 {
        self.step
    }

    /// Number of grid points.
    pub fn size(&self) -> u64 {
        ((self.upper as i128 - self.lower as i128) / self.step as i128 + 1) as u64
    }

    /// Grid value at position `index` (0-based).
    pub fn value_at(&self, index: u64) -> i64 {
        (self.lower as i128 + index as i128 * self.step as i128) as i64
    }

    pub fn contains(&self, value: i64) -> bool {
        value >= self.lower
            && value <= self.upper
            && (value as i128 - self.lower as i128) % self.step as i128 == 0
    }
}

/// A point in a [`ParamSpace`].
///
/// Ordering is lexicographic over the coordinates, which is the tie-break order used
/// when sorting candidates of equal fitness.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<i64>);

impl ParamVector {
    pub fn new(values: Vec<i64>) -> Self {
        ParamVector(values)
    }

    pub fn values(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }
}

impl From<Vec<i64>> for ParamVector {
    fn from(values: Vec<i64>) -> Self {
        ParamVector(values)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = i64;

    fn index(&self, i: usize) -> &i64 {
        &self.0[i]
    }
}

/// The search space: an ordered, non-empty list of uniquely named domains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamDomain>", into = "Vec<ParamDomain>")]
pub struct ParamSpace {
    domains: Vec<ParamDomain>,
}

impl TryFrom<Vec<ParamDomain>> for ParamSpace {
    type Error = SpaceError;

    fn try_from(domains: Vec<ParamDomain>) -> Result<Self, Self::Error> {
        ParamSpace::new(domains)
    }
}

impl From<ParamSpace> for Vec<ParamDomain> {
    fn from(space: ParamSpace) -> Self {
        space.domains
    }
}

impl ParamSpace {
    pub fn new(domains: Vec<ParamDomain>) -> Result<Self, SpaceError> {
        if domains.is_empty() {
            return Err(SpaceError::NoDomains);
        }
        let mut seen = HashSet::new();
        for d in &domains {
            if !seen.insert(d.name.as_str()) {
                return Err(SpaceError::DuplicateName(d.name.clone()));
            }
        }
        Ok(ParamSpace { domains })
    }

    pub fn domains(&self) -> &[ParamDomain] {
        &self.domains
    }

    pub fn dims(&self) -> usize {
        self.domains.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.domains.iter().map(|d| d.name.as_str())
    }

    /// Product of the per-domain grid sizes, saturating at `u128::MAX`.
    pub fn cardinality(&self) -> u128 {
        self.domains
            .iter()
            .try_fold(1u128, |acc, d| acc.checked_mul(d.size() as u128))
            .unwrap_or(u128::MAX)
    }

    /// True when the space holds exactly one point.
    pub fn is_single_point(&self) -> bool {
        self.domains.iter().all(|d| d.size() == 1)
    }

    /// Checks length, bounds and step alignment of `v`.
    pub fn validate(&self, v: &ParamVector) -> Result<(), SpaceError> {
        if v.len() != self.dims() {
            return Err(SpaceError::DimensionMismatch { expected: self.dims(), found: v.len() });
        }
        for (d, &value) in self.domains.iter().zip(v.values()) {
            if !d.contains(value) {
                return Err(SpaceError::OffGrid {
                    name: d.name.clone(),
                    value,
                    lower: d.lower,
                    upper: d.upper,
                    step: d.step,
                });
            }
        }
        Ok(())
    }

    /// Draws one grid point uniformly; consumes exactly one `u64` per domain.
    pub fn sample_uniform<R: RngCore + ?Sized>(&self, rng: &mut R) -> ParamVector {
        ParamVector(
            self.domains
                .iter()
                .map(|d| d.value_at(uniform_index(rng, d.size())))
                .collect(),
        )
    }

    /// Draws a neighbour of `center` within `ngh` steps on every coordinate.
    ///
    /// Each coordinate is drawn independently and uniformly from the in-bounds grid
    /// points `center_i + k * step_i`, `|k| <= ngh` (the unchanged value included).
    /// Points outside the domain are dropped rather than clamped. An outcome equal to
    /// `center` is rejected and redrawn.
    pub fn neighbor<R: RngCore + ?Sized>(
        &self,
        center: &ParamVector,
        ngh: u32,
        rng: &mut R,
    ) -> Result<ParamVector, SpaceError> {
        if ngh == 0 {
            return Err(SpaceError::InvalidRadius);
        }
        self.validate(center)?;
        let ngh = ngh as i128;
        // Admissible step offsets (lowest k, count) per coordinate.
        let windows: Vec<(i128, u64)> = self
            .domains
            .iter()
            .zip(center.values())
            .map(|(d, &c)| {
                let step = d.step as i128;
                let below = (c as i128 - d.lower as i128) / step;
                let above = (d.upper as i128 - c as i128) / step;
                let lo = -ngh.min(below);
                let hi = ngh.min(above);
                (lo, (hi - lo + 1) as u64)
            })
            .collect();
        if windows.iter().all(|&(_, count)| count == 1) {
            return Err(SpaceError::NeighborhoodEmpty);
        }
        loop {
            let values: Vec<i64> = self
                .domains
                .iter()
                .zip(center.values())
                .zip(&windows)
                .map(|((d, &c), &(lo, count))| {
                    let k = lo + uniform_index(rng, count) as i128;
                    (c as i128 + k * d.step as i128) as i64
                })
                .collect();
            if values != center.values() {
                return Ok(ParamVector(values));
            }
        }
    }

    /// Every grid point in lexicographic order, refusing spaces above `limit` points.
    pub fn enumerate_grid_with_limit(&self, limit: u128) -> Result<GridPoints<'_>, SpaceError> {
        let cardinality = self.cardinality();
        if cardinality > limit {
            return Err(SpaceError::SpaceTooLarge { cardinality, limit });
        }
        Ok(GridPoints {
            space: self,
            indices: vec![0; self.dims()],
            remaining: cardinality as u64,
        })
    }

    pub fn enumerate_grid(&self) -> Result<GridPoints<'_>, SpaceError> {
        self.enumerate_grid_with_limit(DEFAULT_ENUMERATION_LIMIT)
    }

    /// Formats `v` as `{name:value,...}`.
    pub fn format_params(&self, v: &ParamVector) -> String {
        let body: Vec<String> = self
            .names()
            .zip(v.values())
            .map(|(n, x)| format!("{n}:{x}"))
            .collect();
        format!("{{{}}}", body.join(","))
    }
}

/// Iterator over every point of a space, last coordinate varying fastest.
#[derive(Debug, Clone)]
pub struct GridPoints<'a> {
    space: &'a ParamSpace,
    indices: Vec<u64>,
    remaining: u64,
}

impl Iterator for GridPoints<'_> {
    type Item = ParamVector;

    fn next(&mut self) -> Option<ParamVector> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let point = ParamVector(
            self.space
                .domains
                .iter()
                .zip(&self.indices)
                .map(|(d, &i)| d.value_at(i))
                .collect(),
        );
        for (i, d) in self.indices.iter_mut().zip(&self.space.domains).rev() {
            *i += 1;
            if *i < d.size() {
                break;
            }
            *i = 0;
        }
        Some(point)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining as usize, Some(self.remaining as usize))
    }
}

impl ExactSizeIterator for GridPoints<'_> {}

impl fmt::Display for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(i64::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}
