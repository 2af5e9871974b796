//! Finite quadrature rules standing in for a compact measure space `(X, ν)`.
//!
//! Functions on the space are plain value vectors at the nodes; the Hilbert
//! space `L²(X, dν)` carries the weighted inner product `Σ f_i g_i w_i`.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Node set with strictly positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasureSpace {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasureSpace {
    /// Build a space from arbitrary nodes and weights.
    ///
    /// All points must share one dimension and be pairwise distinct; every
    /// weight must be finite and strictly positive.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("space must contain at least one point".into()));
        }
        check_len(points.len(), weights.len())?;
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("points must have at least one coordinate".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(format!("point {i} has a non-finite coordinate")));
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "weight {i} must be finite and strictly positive, got {w}"
                )));
            }
        }

        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a]
                .iter()
                .zip(&points[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for pair in order.windows(2) {
            if points[pair[0]] == points[pair[1]] {
                return Err(Error::InvalidArgument(format!(
                    "points {} and {} coincide",
                    pair[0].min(pair[1]),
                    pair[0].max(pair[1])
                )));
            }
        }

        Ok(Self { points, weights })
    }

    /// Midpoint rule on `[0, 1]` with uniform weights `1/n`.
    pub fn interval_grid(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("interval_grid needs n >= 1".into()));
        }
        let w = 1.0 / n as f64;
        let points = (0..n).map(|i| vec![(i as f64 + 0.5) * w]).collect();
        Ok(Self {
            points,
            weights: vec![w; n],
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coordinate dimension of the nodes.
    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Index of the node closest (Euclidean) to `x`.
    pub fn nearest(&self, x: &[f64]) -> Result<usize> {
        check_len(self.dim(), x.len())?;
        let dist = |p: &[f64]| -> f64 { p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum() };
        Ok((0..self.len())
            .min_by(|&a, &b| dist(&self.points[a]).total_cmp(&dist(&self.points[b])))
            .expect("space is non-empty"))
    }

    /// `⟨f, g⟩ = Σ f_i g_i w_i`.
    pub fn inner(&self, f: &FieldVector, g: &FieldVector) -> Result<f64> {
        check_len(self.len(), f.len())?;
        check_len(self.len(), g.len())?;
        Ok(weighted_dot(&f.0, &g.0, &self.weights))
    }

    pub fn norm(&self, f: &FieldVector) -> Result<f64> {
        Ok(self.inner(f, f)?.max(0.0).sqrt())
    }
}

pub(crate) fn weighted_dot(f: &[f64], g: &[f64], w: &[f64]) -> f64 {
    f.iter().zip(g).zip(w).map(|((a, b), w)| a * b * w).sum()
}

/// Function values at the nodes of a [`DiscreteMeasureSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldVector(pub Vec<f64>);

impl FieldVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Tabulate `f` at every node of `space`.
    pub fn from_fn(space: &DiscreteMeasureSpace, f: impl Fn(&[f64]) -> f64) -> Self {
        Self(space.points().iter().map(|p| f(p)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FieldVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for FieldVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
