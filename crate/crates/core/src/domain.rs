//! Search domain and candidate points.
//!
//! Optimizers work in the normalized box `[-1, 1]^dim`. The session maps
//! candidates to user units only when handing them to the caller, using one
//! scalar `[lower, upper]` pair for every dimension.

use crate::error::{Error, Result};

/// Scalar bounds shared by all dimensions, plus the dimensionality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchDomain {
    lower: f64,
    upper: f64,
    dim: usize,
}

impl SearchDomain {
    pub fn new(lower: f64, upper: f64, dim: usize) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(Error::Config(format!(
                "bounds must be finite, got [{lower}, {upper}]"
            )));
        }
        if lower >= upper {
            return Err(Error::Config(format!(
                "lower bound {lower} must be strictly below upper bound {upper}"
            )));
        }
        if dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        Ok(Self { lower, upper, dim })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Inclusive integer range `[ceil(lower), floor(upper)]`, or a
    /// configuration error when the bounds contain no integer.
    pub fn integer_range(&self) -> Result<(i64, i64)> {
        let lo = self.lower.ceil();
        let hi = self.upper.floor();
        if hi < lo {
            return Err(Error::Config(format!(
                "no integer lies in [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok((lo as i64, hi as i64))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// Maps normalized coordinates to user units.
    pub fn to_user(&self, point: &CandidatePoint) -> Result<Vec<f64>> {
        self.check_dim(point.dim())?;
        let span = self.upper - self.lower;
        Ok(point
            .coords()
            .iter()
            .map(|&c| (self.lower + (c + 1.0) * 0.5 * span).clamp(self.lower, self.upper))
            .collect())
    }

    /// Rounds user values half-away-from-zero and clamps them into the
    /// domain's integer range.
    pub fn to_integer_values(&self, user_values: &[f64]) -> Result<Vec<i64>> {
        self.check_dim(user_values.len())?;
        let (lo, hi) = self.integer_range()?;
        Ok(user_values
            .iter()
            .map(|&v| (v.round() as i64).clamp(lo, hi))
            .collect())
    }

    /// Inverse of [`SearchDomain::to_user`].
    pub fn from_user(&self, values: &[f64]) -> Result<CandidatePoint> {
        self.check_dim(values.len())?;
        let span = self.upper - self.lower;
        let mut coords = Vec::with_capacity(values.len());
        for &v in values {
            if !(self.lower..=self.upper).contains(&v) {
                return Err(Error::OutOfDomain {
                    value: v,
                    lower: self.lower,
                    upper: self.upper,
                });
            }
            coords.push((2.0 * (v - self.lower) / span - 1.0).clamp(-1.0, 1.0));
        }
        Ok(CandidatePoint(coords))
    }
}

/// A candidate solution in normalized coordinates, each in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePoint(Vec<f64>);

impl CandidatePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Contract("candidate point must be non-empty".into()));
        }
        if let Some(c) = coords.iter().find(|c| !(-1.0..=1.0).contains(*c)) {
            return Err(Error::Contract(format!(
                "normalized coordinate {c} outside [-1, 1]"
            )));
        }
        Ok(Self(coords))
    }

    /// Builds a point from coordinates already known to be in range.
    pub(crate) fn from_coords_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| (-1.0..=1.0).contains(c)));
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}
