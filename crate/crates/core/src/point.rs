//! Dense points in R^n with strict finiteness and dimension checking.
//!
//! Every vector that enters solver state goes through [`Point::new`], which
//! rejects NaN/Inf entries. Binary operations check dimensions and return
//! [`CoreError::DimensionMismatch`] instead of panicking, so a mismatched
//! oracle is reported as a normal error.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// An immutable point in R^n (n ≥ 1), all entries finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    /// Wraps a coordinate vector, rejecting empty or non-finite input.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(CoreError::invalid("a point needs at least one coordinate"));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(CoreError::invalid(format!(
                "point coordinates must be finite, found {bad}"
            )));
        }
        Ok(Point { coords })
    }

    /// The origin of R^dim.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "zero-dimensional points are not representable");
        Point { coords: vec![0.0; dim] }
    }

    /// 1-dimensional convenience constructor.
    pub fn scalar(x: f64) -> Result<Self> {
        Point::new(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    /// Coordinate access; panics out of range like slice indexing.
    pub fn coord(&self, i: usize) -> f64 {
        self.coords[i]
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Point) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn add(&self, other: &Point) -> Result<Point> {
        self.check_dim(other)?;
        Ok(Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Point) -> Result<Point> {
        self.check_dim(other)?;
        Ok(Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// `self * c`. The result may be non-finite if `c` is huge; callers that
    /// feed it back into solver state must re-validate via [`Point::is_finite`].
    pub fn scale(&self, c: f64) -> Point {
        Point {
            coords: self.coords.iter().map(|a| a * c).collect(),
        }
    }

    /// `self + c * other`, the workhorse of subgradient steps.
    pub fn add_scaled(&self, c: f64, other: &Point) -> Result<Point> {
        self.check_dim(other)?;
        Ok(Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + c * b)
                .collect(),
        })
    }

    /// Convex-style combination `(1 − t) * self + t * other` (t may exceed [0,1]).
    pub fn lerp(&self, t: f64, other: &Point) -> Result<Point> {
        self.check_dim(other)?;
        Ok(Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    fn check_dim(&self, other: &Point) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(CoreError::dim(self.dim(), other.dim()))
        }
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = CoreError;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Point::new(coords)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.coords
    }
}
