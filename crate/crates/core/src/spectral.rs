//! Spectral decomposition of the covariance operator, white-noise kernel
//! factorization under a chosen gauge, and the reproducing kernel Hilbert
//! space `H_μ = √K(H)`.
//!
//! The operator `f ↦ Σ_j C(·, x_j) f(x_j) w_j` is not symmetric as a matrix,
//! so it is diagonalized through the whitened form `S = D^{1/2} C D^{1/2}`
//! with `D = diag(w)`. Eigenvectors `v_k` of `S` map to `L²(ν)`-orthonormal
//! eigenfunctions `φ_k = D^{-1/2} v_k` with the same eigenvalues.
//!
//! A white-noise kernel is stored by its coordinates against `{φ_k}`:
//! row `i` of the factor holds `⟨h(x_i, ·), φ_k⟩` for `k = 1..m`, so that
//! `∫ h(x, z) h(y, z) dν(z) = Σ_k h_xk h_yk`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernels::CovarianceMatrix;
use crate::measure_space::{weighted_dot, DiscreteMeasureSpace, FieldVector};

/// Default relative threshold below which eigenvalues are discarded.
pub const DEFAULT_DROP_TOL: f64 = 1e-12;

/// Eigenvalues above `-NEGATIVE_CLAMP · λ_max` are round-off and clamped to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-10;

/// Relative gap under which sorted eigenvalues are treated as one cluster.
const CLUSTER_TOL: f64 = 1e-10;

/// Magnitude a component must exceed to fix an eigenvector's sign.
const SIGN_TOL: f64 = 1e-8;

/// Eigenpairs `(λ_k, φ_k)` of the covariance operator, `λ_1 ≥ … ≥ λ_m > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MercerDecomposition {
    eigenvalues: Vec<f64>,
    /// `n × m`, column `k` is `φ_k` evaluated at the nodes.
    eigenfunctions: DMatrix<f64>,
    weights: Vec<f64>,
    dropped_mass: f64,
}

/// Serialized form of a [`MercerDecomposition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionExport {
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
    pub rank: usize,
    pub dropped_mass: f64,
}

impl MercerDecomposition {
    /// Diagonalize the covariance operator of `c` over `space`.
    ///
    /// Eigenvalues at or below `drop_tol · λ_1` are discarded and their sum
    /// reported as `dropped_mass`. Negative eigenvalues no smaller than
    /// `-1e-10 · λ_1` are treated as zero; anything more negative is an error.
    pub fn decompose(c: &CovarianceMatrix, space: &DiscreteMeasureSpace, drop_tol: f64) -> Result<Self> {
        let n = space.len();
        check_len(n, c.size())?;
        if !(drop_tol >= 0.0 && drop_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "drop_tol must be finite and non-negative, got {drop_tol}"
            )));
        }

        let sqrt_w: Vec<f64> = space.weights().iter().map(|w| w.sqrt()).collect();
        let cm = c.matrix();
        let s = DMatrix::from_fn(n, n, |i, j| {
            0.5 * (cm[(i, j)] + cm[(j, i)]) * sqrt_w[i] * sqrt_w[j]
        });
        let eig = SymmetricEigen::new(s);

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let lambda_max = eig.eigenvalues[order[0]];
        let floor = -NEGATIVE_CLAMP * lambda_max.max(0.0);
        let worst_pos = n - 1;
        let worst = eig.eigenvalues[order[worst_pos]];
        if worst < floor {
            return Err(Error::NotPositiveSemidefinite {
                eigenvalue: worst,
                index: worst_pos,
                threshold: floor,
            });
        }

        let cutoff = drop_tol * lambda_max;
        let mut kept: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut dropped_mass = 0.0;
        for &k in &order {
            let lambda = eig.eigenvalues[k];
            if lambda > cutoff && lambda > 0.0 {
                let mut phi: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, k)] / sqrt_w[i]).collect();
                fix_sign(&mut phi);
                kept.push((lambda, phi));
            } else if lambda > 0.0 {
                dropped_mass += lambda;
            }
        }
        order_clusters(&mut kept, lambda_max);

        let m = kept.len();
        let eigenfunctions = DMatrix::from_fn(n, m, |i, k| kept[k].1[i]);
        Ok(Self {
            eigenvalues: kept.into_iter().map(|(l, _)| l).collect(),
            eigenfunctions,
            weights: space.weights().to_vec(),
            dropped_mass,
        })
    }

    /// Number of retained eigenpairs.
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of quadrature nodes.
    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.eigenfunctions
    }

    pub fn eigenfunction(&self, k: usize) -> FieldVector {
        FieldVector(self.eigenfunctions.column(k).iter().copied().collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dropped_mass(&self) -> f64 {
        self.dropped_mass
    }

    /// Largest eigenvalue, zero for an empty decomposition.
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `Σ_k λ_k` over retained eigenvalues.
    pub fn eigenvalue_sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `Σ_k λ_k φ_k(x) φ_k(y)`.
    pub fn reconstruct(&self) -> CovarianceMatrix {
        let scaled = DMatrix::from_fn(self.size(), self.rank(), |i, k| {
            self.eigenfunctions[(i, k)] * self.eigenvalues[k]
        });
        CovarianceMatrix::symmetrized(scaled * self.eigenfunctions.transpose())
    }

    /// `max_jk |⟨φ_j, φ_k⟩_{L²(ν)} − δ_jk|`.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.rank();
        let mut worst: f64 = 0.0;
        for j in 0..m {
            for k in j..m {
                let ip = self.l2_inner_columns(j, k);
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    fn l2_inner_columns(&self, j: usize, k: usize) -> f64 {
        weighted_dot(
            self.eigenfunctions.column(j).as_slice(),
            self.eigenfunctions.column(k).as_slice(),
            &self.weights,
        )
    }

    /// `⟨f, φ_k⟩_{L²(ν)}` for every retained `k`.
    pub fn project(&self, f: &FieldVector) -> Result<Vec<f64>> {
        check_len(self.size(), f.len())?;
        Ok((0..self.rank())
            .map(|k| weighted_dot(f.as_slice(), self.eigenfunctions.column(k).as_slice(), &self.weights))
            .collect())
    }

    /// Coordinates of `f` in `H_μ` against `Φ_k = √λ_k φ_k`.
    ///
    /// `f` must lie in the eigen-span: the `L²` residual after projection
    /// may not exceed `membership_tol · ‖f‖`.
    pub fn to_rkhs(&self, f: &FieldVector, membership_tol: f64) -> Result<RkhsElement> {
        let proj = self.project(f)?;
        let norm_f = weighted_dot(f.as_slice(), f.as_slice(), &self.weights).sqrt();
        let residual: Vec<f64> = (0..self.size())
            .map(|i| {
                f[i] - proj
                    .iter()
                    .enumerate()
                    .map(|(k, p)| p * self.eigenfunctions[(i, k)])
                    .sum::<f64>()
            })
            .collect();
        let residual = weighted_dot(&residual, &residual, &self.weights).sqrt();
        let tolerance = membership_tol * norm_f;
        if residual > tolerance {
            return Err(Error::NotInRkhs { residual, tolerance });
        }
        Ok(RkhsElement::new(
            proj.iter().zip(&self.eigenvalues).map(|(p, l)| p / l.sqrt()).collect(),
        ))
    }

    /// The section `K(x_i, ·)` as an element of `H_μ`: coefficients `√λ_k φ_k(x_i)`.
    pub fn kernel_section(&self, x_index: usize) -> Result<RkhsElement> {
        if x_index >= self.size() {
            return Err(Error::IndexOutOfRange {
                index: x_index as isize,
                len: self.size(),
            });
        }
        Ok(RkhsElement::new(
            self.eigenvalues
                .iter()
                .enumerate()
                .map(|(k, l)| l.sqrt() * self.eigenfunctions[(x_index, k)])
                .collect(),
        ))
    }

    /// Basis element `Φ_k` (zero-based `k`) as a function on the nodes.
    pub fn rkhs_basis_function(&self, k: usize) -> FieldVector {
        let s = self.eigenvalues[k].sqrt();
        FieldVector(self.eigenfunctions.column(k).iter().map(|v| v * s).collect())
    }

    /// Values at the nodes of `Σ_k a_k Φ_k`.
    pub fn evaluate(&self, a: &RkhsElement) -> Result<FieldVector> {
        check_len(self.rank(), a.len())?;
        Ok(FieldVector(
            (0..self.size())
                .map(|i| {
                    a.coeffs()
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * self.eigenvalues[k].sqrt() * self.eigenfunctions[(i, k)])
                        .sum()
                })
                .collect(),
        ))
    }

    /// Build the white-noise kernel in the requested gauge.
    pub fn factorize(&self, gauge: Gauge) -> Result<WhiteNoiseKernel> {
        let (n, m) = (self.size(), self.rank());
        let sym = DMatrix::from_fn(n, m, |i, k| self.eigenvalues[k].sqrt() * self.eigenfunctions[(i, k)]);
        let factor = match gauge {
            Gauge::SymmetricSqrt => sym,
            Gauge::Triangular => lower_trapezoidal(sym),
            Gauge::Rotated { seed } => sym * haar_orthogonal(m, seed),
        };
        Ok(WhiteNoiseKernel { factor, gauge })
    }

    pub fn export(&self) -> DecompositionExport {
        DecompositionExport {
            eigenvalues: self.eigenvalues.clone(),
            eigenfunctions: (0..self.rank())
                .map(|k| self.eigenfunctions.column(k).iter().copied().collect())
                .collect(),
            rank: self.rank(),
            dropped_mass: self.dropped_mass,
        }
    }
}

fn fix_sign(phi: &mut [f64]) {
    if let Some(&lead) = phi.iter().find(|v| v.abs() > SIGN_TOL) {
        if lead < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

fn lex_desc(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| y.total_cmp(x))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Within runs of numerically equal eigenvalues, order eigenvectors
/// lexicographically (descending) so repeated runs give the same basis.
fn order_clusters(kept: &mut [(f64, Vec<f64>)], lambda_max: f64) {
    let tol = CLUSTER_TOL * lambda_max;
    let mut start = 0;
    while start < kept.len() {
        let mut end = start + 1;
        while end < kept.len() && kept[end - 1].0 - kept[end].0 <= tol {
            end += 1;
        }
        if end - start > 1 {
            kept[start..end].sort_by(|a, b| lex_desc(&a.1, &b.1));
        }
        start = end;
    }
}

/// Rotate `h` (n × m, m ≤ n) to `h·Q` with `Q` orthogonal so the result is
/// lower trapezoidal with a non-negative diagonal.
fn lower_trapezoidal(h: DMatrix<f64>) -> DMatrix<f64> {
    let m = h.ncols();
    if m == 0 {
        return h;
    }
    let qr = h.transpose().qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..m.min(r.nrows()).min(r.ncols()) {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    let mut out = h * q;
    // entries above the diagonal are round-off
    for k in 1..m {
        for i in 0..k.min(out.nrows()) {
            out[(i, k)] = 0.0;
        }
    }
    out
}

/// Haar-distributed orthogonal `m × m` matrix from a seeded Gaussian draw.
pub fn haar_orthogonal(m: usize, seed: u64) -> DMatrix<f64> {
    if m == 0 {
        return DMatrix::zeros(0, 0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..m {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Choice of unitary `L: H_μ → H` fixing one white-noise kernel among the
/// distributionally equivalent ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// `h_ik = √λ_k φ_k(x_i)`.
    SymmetricSqrt,
    /// Lower-trapezoidal factor; equals the Cholesky factor at full rank.
    Triangular,
    /// Symmetric factor times a seeded Haar-random orthogonal matrix.
    Rotated { seed: u64 },
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gauge::SymmetricSqrt => f.write_str("symmetric_sqrt"),
            Gauge::Triangular => f.write_str("triangular"),
            Gauge::Rotated { seed } => write!(f, "rotated({seed})"),
        }
    }
}

impl FromStr for Gauge {
    type Err = Error;

    /// Accepts `symmetric_sqrt`, `triangular`, `rotated` (seed 0) and `rotated(SEED)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "symmetric_sqrt" => return Ok(Gauge::SymmetricSqrt),
            "triangular" => return Ok(Gauge::Triangular),
            "rotated" => return Ok(Gauge::Rotated { seed: 0 }),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("rotated(").and_then(|r| r.strip_suffix(')')) {
            if let Ok(seed) = inner.trim().parse() {
                return Ok(Gauge::Rotated { seed });
            }
        }
        Err(Error::InvalidArgument(format!("unknown gauge `{s}`")))
    }
}

/// Coordinates of the white-noise kernel `h(x_i, ·)` against `{φ_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteNoiseKernel {
    factor: DMatrix<f64>,
    gauge: Gauge,
}

impl WhiteNoiseKernel {
    /// Wrap an externally supplied `n × m` factor (for example one read from disk).
    pub fn from_factor(factor: DMatrix<f64>, gauge: Gauge) -> Self {
        Self { factor, gauge }
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn size(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    /// `∫ h(x_i, z) h(x_j, z) dν(z) = Σ_k h_ik h_jk`.
    pub fn reproduce_covariance(&self, space: &DiscreteMeasureSpace) -> Result<CovarianceMatrix> {
        check_len(space.len(), self.size())?;
        Ok(CovarianceMatrix::symmetrized(&self.factor * self.factor.transpose()))
    }

    /// Hilbert–Schmidt norm `(Σ_ik h_ik² w_i)^{1/2}`.
    pub fn hs_norm(&self, space: &DiscreteMeasureSpace) -> Result<f64> {
        check_len(space.len(), self.size())?;
        let total: f64 = self
            .factor
            .row_iter()
            .zip(space.weights())
            .map(|(row, w)| row.iter().map(|v| v * v).sum::<f64>() * w)
            .sum();
        Ok(total.sqrt())
    }

    /// Tabulate the kernel as a function of both arguments, `P_ij = h(x_i, z_j)`.
    pub fn pointwise(&self, dec: &MercerDecomposition) -> Result<DMatrix<f64>> {
        check_len(dec.rank(), self.rank())?;
        check_len(dec.size(), self.size())?;
        Ok(&self.factor * dec.eigenfunctions().transpose())
    }

    /// Inverse of [`pointwise`](Self::pointwise): project `P(x_i, ·)` onto
    /// `{φ_k}`. Components outside the eigen-span are discarded.
    pub fn from_pointwise(p: &DMatrix<f64>, dec: &MercerDecomposition, gauge: Gauge) -> Result<Self> {
        check_len(dec.size(), p.ncols())?;
        let weighted = DMatrix::from_fn(dec.size(), dec.rank(), |j, k| {
            dec.eigenfunctions()[(j, k)] * dec.weights()[j]
        });
        Ok(Self {
            factor: p * weighted,
            gauge,
        })
    }
}

/// Element `Σ_k a_k Φ_k` of `H_μ` with `Φ_k = √λ_k φ_k` orthonormal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RkhsElement {
    coeffs: Vec<f64>,
}

impl RkhsElement {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// Unit coordinate vector `Φ_k` (zero-based) in an `m`-dimensional span.
    pub fn basis(k: usize, m: usize) -> Self {
        let mut coeffs = vec![0.0; m];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `⟨a, b⟩_{H_μ} = Σ a_k b_k`.
    pub fn inner(&self, other: &RkhsElement) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum()
    }
}
