//! Covariance kernels and assembly of the covariance matrix over a space.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::measure_space::DiscreteMeasureSpace;

/// Names accepted by [`CovarianceKernel::builtin`].
pub const BUILTIN_KERNELS: [&str; 5] = [
    "brownian_motion",
    "brownian_bridge",
    "fbm",
    "squared_exponential",
    "white_diagonal",
];

/// A symmetric positive semidefinite kernel `K(s, t) = E[B_s B_t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceKernel {
    /// `min(s, t)` on the line; Lévy's form `½(|s| + |t| − |s − t|)` in higher dimension.
    BrownianMotion,
    /// `min(s, t) − s t`, one-dimensional only.
    BrownianBridge,
    /// `½(|s|^{2H} + |t|^{2H} − |s − t|^{2H})`.
    Fbm { hurst: f64 },
    /// `exp(−|s − t|² / (2ℓ²))`.
    SquaredExponential { length_scale: f64 },
    /// `σ²` on the diagonal, zero elsewhere.
    WhiteDiagonal { variance: f64 },
}

impl CovarianceKernel {
    /// Look up a builtin kernel by name. Missing parameters take their
    /// defaults (`hurst = 0.5`, `length_scale = 1`, `variance = 1`).
    pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match name {
            "brownian_motion" | "brownian_bridge" => &[],
            "fbm" => &["hurst"],
            "squared_exponential" => &["length_scale"],
            "white_diagonal" => &["variance"],
            _ => return Err(Error::UnknownKernel(name.to_string())),
        };
        if let Some(extra) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!(
                "kernel `{name}` has no parameter `{extra}`"
            )));
        }
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let kernel = match name {
            "brownian_motion" => Self::BrownianMotion,
            "brownian_bridge" => Self::BrownianBridge,
            "fbm" => Self::Fbm {
                hurst: get("hurst", 0.5),
            },
            "squared_exponential" => Self::SquaredExponential {
                length_scale: get("length_scale", 1.0),
            },
            _ => Self::WhiteDiagonal {
                variance: get("variance", 1.0),
            },
        };
        kernel.validate()?;
        Ok(kernel)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Fbm { hurst } if !(hurst > 0.0 && hurst < 1.0) => Err(Error::InvalidParameter(
                format!("fbm hurst must lie in (0, 1), got {hurst}"),
            )),
            Self::SquaredExponential { length_scale } if !(length_scale > 0.0 && length_scale.is_finite()) => {
                Err(Error::InvalidParameter(format!(
                    "squared_exponential length_scale must be positive, got {length_scale}"
                )))
            }
            Self::WhiteDiagonal { variance } if !(variance >= 0.0 && variance.is_finite()) => {
                Err(Error::InvalidParameter(format!(
                    "white_diagonal variance must be non-negative, got {variance}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::BrownianMotion => "brownian_motion",
            Self::BrownianBridge => "brownian_bridge",
            Self::Fbm { .. } => "fbm",
            Self::SquaredExponential { .. } => "squared_exponential",
            Self::WhiteDiagonal { .. } => "white_diagonal",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        match *self {
            Self::Fbm { hurst } => {
                out.insert("hurst".to_string(), hurst);
            }
            Self::SquaredExponential { length_scale } => {
                out.insert("length_scale".to_string(), length_scale);
            }
            Self::WhiteDiagonal { variance } => {
                out.insert("variance".to_string(), variance);
            }
            _ => {}
        }
        out
    }

    /// Evaluate `K(s, t)`. Both points must have the same dimension.
    pub fn eval(&self, s: &[f64], t: &[f64]) -> f64 {
        match *self {
            Self::BrownianMotion if s.len() == 1 => s[0].min(t[0]),
            Self::BrownianMotion => 0.5 * (euclid(s) + euclid(t) - dist(s, t)),
            Self::BrownianBridge => s[0].min(t[0]) - s[0] * t[0],
            Self::Fbm { hurst } => {
                let e = 2.0 * hurst;
                0.5 * (euclid(s).powf(e) + euclid(t).powf(e) - dist(s, t).powf(e))
            }
            Self::SquaredExponential { length_scale } => {
                let d = dist(s, t);
                (-d * d / (2.0 * length_scale * length_scale)).exp()
            }
            Self::WhiteDiagonal { variance } => {
                if s == t {
                    variance
                } else {
                    0.0
                }
            }
        }
    }

    /// Assemble `C_ij = K(x_i, x_j)`, symmetrized as `(C + Cᵀ)/2`.
    pub fn assemble(&self, space: &DiscreteMeasureSpace) -> Result<CovarianceMatrix> {
        if matches!(self, Self::BrownianBridge) && space.dim() != 1 {
            return Err(Error::InvalidParameter(
                "brownian_bridge is only defined on one-dimensional points".into(),
            ));
        }
        let n = space.len();
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let value = self.eval(space.point(i), space.point(j));
                if !value.is_finite() {
                    return Err(Error::NonFinite { i, j, value });
                }
                c[(i, j)] = value;
            }
        }
        Ok(CovarianceMatrix::symmetrized(c))
    }
}

impl fmt::Display for CovarianceKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        let params = self.params();
        if !params.is_empty() {
            let list: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", list.join(", "))?;
        }
        Ok(())
    }
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(s: &[f64], t: &[f64]) -> f64 {
    s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Symmetric `n × n` covariance matrix over the nodes of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(DMatrix<f64>);

impl CovarianceMatrix {
    /// Wrap a square matrix, replacing it with `(C + Cᵀ)/2`.
    pub fn symmetrized(c: DMatrix<f64>) -> Self {
        assert!(c.is_square(), "covariance matrix must be square");
        let sym = (&c + c.transpose()) * 0.5;
        Self(sym)
    }

    /// Wrap a square matrix as is. Used for estimators that are symmetric by construction.
    pub fn from_matrix(c: DMatrix<f64>) -> Result<Self> {
        check_len(c.nrows(), c.ncols())?;
        Ok(Self(c))
    }

    /// Read from row-major entries; rejects ragged or non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidArgument("covariance matrix is empty".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            check_len(n, row.len())?;
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { i, j, value: row[j] });
            }
        }
        Ok(Self::symmetrized(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &CovarianceMatrix) -> Result<f64> {
        check_len(self.size(), other.size())?;
        Ok(self.0.iter().zip(other.0.iter()).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Discrete trace of the integral operator, `Σ_i C_ii w_i`.
    pub fn trace_of_operator(&self, space: &DiscreteMeasureSpace) -> Result<f64> {
        check_len(space.len(), self.size())?;
        Ok(space.weights().iter().enumerate().map(|(i, w)| self.0[(i, i)] * w).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn builtin_values() {
        let bm = CovarianceKernel::builtin("brownian_motion", &params(&[])).unwrap();
        assert_eq!(bm.eval(&[0.25], &[0.75]), 0.25);

        let bridge = CovarianceKernel::builtin("brownian_bridge", &params(&[])).unwrap();
        assert_eq!(bridge.eval(&[0.5], &[0.5]), 0.25);

        let fbm = CovarianceKernel::builtin("fbm", &params(&[("hurst", 0.5)])).unwrap();
        for &(s, t) in &[(0.1, 0.9), (0.5, 0.5), (0.7, 0.2), (0.0, 0.3)] {
            assert!((fbm.eval(&[s], &[t]) - bm.eval(&[s], &[t])).abs() < 1e-15);
        }
    }

    #[test]
    fn builtin_errors() {
        assert_eq!(
            CovarianceKernel::builtin("matern", &params(&[])),
            Err(Error::UnknownKernel("matern".into()))
        );
        for h in [0.0, 1.0, -0.2, 1.5] {
            assert!(matches!(
                CovarianceKernel::builtin("fbm", &params(&[("hurst", h)])),
                Err(Error::InvalidParameter(_))
            ));
        }
        assert!(matches!(
            CovarianceKernel::builtin("brownian_motion", &params(&[("hurst", 0.3)])),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            CovarianceKernel::builtin("squared_exponential", &params(&[("length_scale", 0.0)])),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn assemble_examples() {
        let space = DiscreteMeasureSpace::interval_grid(2).unwrap();
        let c = CovarianceKernel::BrownianMotion.assemble(&space).unwrap();
        assert_eq!(c.matrix(), &DMatrix::from_row_slice(2, 2, &[0.25, 0.25, 0.25, 0.75]));

        let space = DiscreteMeasureSpace::interval_grid(5).unwrap();
        let c = CovarianceKernel::WhiteDiagonal { variance: 1.0 }.assemble(&space).unwrap();
        assert_eq!(c.matrix(), &DMatrix::identity(5, 5));

        // exp(-x) by its Taylor series, summed far past double precision
        let exp_neg = |x: f64| -> f64 {
            let mut term = 1.0;
            let mut sum = 0.0;
            for k in 0..40 {
                sum += term;
                term *= -x / (k as f64 + 1.0);
            }
            sum
        };
        let se = CovarianceKernel::SquaredExponential { length_scale: 1.0 };
        // nodes 1/8, 3/8: spacing 0.25
        let c = se.assemble(&DiscreteMeasureSpace::interval_grid(4).unwrap()).unwrap();
        assert!((c.get(0, 1) - exp_neg(1.0 / 32.0)).abs() < 1e-15);
        assert!((c.get(0, 1) - 0.96923).abs() < 1e-5);
        // nodes 1/6, 1/2: spacing 1/3
        let c = se.assemble(&DiscreteMeasureSpace::interval_grid(3).unwrap()).unwrap();
        assert!((c.get(0, 1) - exp_neg(1.0 / 18.0)).abs() < 1e-15);
    }

    #[test]
    fn fbm_half_matches_brownian_motion_matrix() {
        let space = DiscreteMeasureSpace::interval_grid(64).unwrap();
        let a = CovarianceKernel::BrownianMotion.assemble(&space).unwrap();
        let b = CovarianceKernel::Fbm { hurst: 0.5 }.assemble(&space).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-14);
    }

    #[test]
    fn assemble_rejects_non_finite() {
        let space = DiscreteMeasureSpace::new(vec![vec![0.0], vec![f64::MAX]], vec![1.0, 1.0]).unwrap();
        let err = CovarianceKernel::Fbm { hurst: 0.9 }.assemble(&space).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn bridge_needs_one_dimension() {
        let space = DiscreteMeasureSpace::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 1.0]).unwrap();
        assert!(CovarianceKernel::BrownianBridge.assemble(&space).is_err());
        assert!(CovarianceKernel::BrownianMotion.assemble(&space).is_ok());
    }

    #[test]
    fn assembly_symmetrizes_input() {
        let c = CovarianceMatrix::from_rows(&[vec![1.0, 0.2], vec![0.4, 1.0]]).unwrap();
        assert!((c.get(0, 1) - 0.3).abs() < 1e-15);
        assert_eq!(c.get(0, 1), c.get(1, 0));
    }

    #[test]
    fn trace_examples() {
        let space = DiscreteMeasureSpace::interval_grid(7).unwrap();
        let white = CovarianceKernel::WhiteDiagonal { variance: 1.0 }.assemble(&space).unwrap();
        assert!((white.trace_of_operator(&space).unwrap() - 1.0).abs() < 1e-15);

        let space = DiscreteMeasureSpace::interval_grid(4).unwrap();
        let bm = CovarianceKernel::BrownianMotion.assemble(&space).unwrap();
        assert_eq!(bm.trace_of_operator(&space).unwrap(), 0.5);

        let fbm = CovarianceKernel::Fbm { hurst: 0.75 }.assemble(&space).unwrap();
        let oracle: f64 = [0.125f64, 0.375, 0.625, 0.875].iter().map(|t| t * t.sqrt() / 4.0).sum();
        assert!((fbm.trace_of_operator(&space).unwrap() - oracle).abs() < 1e-15);
    }
}
