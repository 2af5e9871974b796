//! Gaussian fields over a discrete space: white noise, series sampling,
//! empirical statistics and kernel-level diagnostics (mollification and
//! rescaled increments).

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::kernels::{CovarianceKernel, CovarianceMatrix};
use crate::measure_space::{DiscreteMeasureSpace, FieldVector};
use crate::spectral::{Gauge, MercerDecomposition, WhiteNoiseKernel};

/// Independent standard normals `ξ_1..ξ_m` for one realization.
///
/// Draw `stream` under `seed` always yields the same variates, independent
/// of how many other draws are generated or in which order.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    xi: Vec<f64>,
    seed: u64,
    stream: u64,
}

impl NoiseDraw {
    pub fn generate(seed: u64, stream: u64, m: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let xi = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self { xi, seed, stream }
    }

    /// Wrap fixed variates, e.g. for deterministic evaluation.
    pub fn from_values(xi: Vec<f64>) -> Self {
        Self { xi, seed: 0, stream: 0 }
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

/// Isonormal process on `H`: `W(h) = Σ_k ⟨h, φ_k⟩ ξ_k` for `h` given by its
/// coordinates against an orthonormal basis.
pub fn white_noise_functional(h_coeffs: &[f64], noise: &NoiseDraw) -> Result<f64> {
    check_len(noise.len(), h_coeffs.len())?;
    Ok(h_coeffs.iter().zip(noise.xi()).map(|(h, x)| h * x).sum())
}

/// A centered Gaussian field with its spectral data and white-noise kernel.
#[derive(Debug, Clone)]
pub struct GaussianField {
    space: DiscreteMeasureSpace,
    dec: MercerDecomposition,
    factor: WhiteNoiseKernel,
}

impl GaussianField {
    pub fn new(space: DiscreteMeasureSpace, dec: MercerDecomposition, factor: WhiteNoiseKernel) -> Result<Self> {
        check_len(space.len(), dec.size())?;
        check_len(space.len(), factor.size())?;
        check_len(dec.rank(), factor.rank())?;
        Ok(Self { space, dec, factor })
    }

    /// Assemble, decompose and factorize `kernel` over `space`.
    pub fn from_kernel(
        space: DiscreteMeasureSpace,
        kernel: &CovarianceKernel,
        gauge: Gauge,
        drop_tol: f64,
    ) -> Result<Self> {
        let c = kernel.assemble(&space)?;
        Self::from_covariance(space, &c, gauge, drop_tol)
    }

    pub fn from_covariance(
        space: DiscreteMeasureSpace,
        c: &CovarianceMatrix,
        gauge: Gauge,
        drop_tol: f64,
    ) -> Result<Self> {
        let dec = MercerDecomposition::decompose(c, &space, drop_tol)?;
        let factor = dec.factorize(gauge)?;
        Self::new(space, dec, factor)
    }

    pub fn space(&self) -> &DiscreteMeasureSpace {
        &self.space
    }

    pub fn decomposition(&self) -> &MercerDecomposition {
        &self.dec
    }

    pub fn factor(&self) -> &WhiteNoiseKernel {
        &self.factor
    }

    pub fn rank(&self) -> usize {
        self.dec.rank()
    }

    /// `B_i = Σ_{k<m} h_ik ξ_k` using the first `m` noise variates.
    pub fn realize(&self, noise: &NoiseDraw, m: usize) -> Result<FieldVector> {
        self.check_truncation(m)?;
        if noise.len() < m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: noise.len(),
            });
        }
        let h = self.factor.factor();
        Ok(FieldVector(
            (0..self.space.len())
                .map(|i| (0..m).map(|k| h[(i, k)] * noise.xi()[k]).sum())
                .collect(),
        ))
    }

    fn check_truncation(&self, m: usize) -> Result<()> {
        let rank = self.rank();
        if m > rank || (m == 0 && rank > 0) {
            return Err(Error::InvalidArgument(format!(
                "truncation m = {m} must satisfy 1 <= m <= rank = {rank}"
            )));
        }
        Ok(())
    }

    /// Draw `n_draws` independent realizations of the series truncated at `m`.
    ///
    /// Row `r` uses noise stream `r` under `seed`, so batches are
    /// reproducible regardless of thread scheduling.
    pub fn sample(&self, n_draws: usize, m: usize, seed: u64) -> Result<SampleBatch> {
        self.check_truncation(m)?;
        if n_draws == 0 {
            return Err(Error::InvalidArgument("n_draws must be at least 1".into()));
        }
        let n = self.space.len();
        let h = self.factor.factor();
        let rows: Vec<f64> = (0..n_draws as u64)
            .into_par_iter()
            .flat_map_iter(|r| {
                let noise = NoiseDraw::generate(seed, r, m);
                (0..n).map(move |i| (0..m).map(|k| h[(i, k)] * noise.xi()[k]).sum::<f64>())
            })
            .collect();
        Ok(SampleBatch {
            draws: DMatrix::from_row_slice(n_draws, n, &rows),
            seed,
            truncation: m,
        })
    }

    /// Smooth the kernel along its integration variable with a Gaussian
    /// window of standard deviation `bandwidth`.
    ///
    /// The window is cut at four bandwidths and renormalized to unit
    /// `ν`-mass at every node, so constants are preserved and boundaries
    /// need no reflection. The result is projected back onto the eigen-span.
    pub fn mollify_factor(&self, bandwidth: f64) -> Result<WhiteNoiseKernel> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        let n = self.space.len();
        let w = self.space.weights();
        let reach = 4.0 * bandwidth;
        let mut window = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut mass = 0.0;
            for l in 0..n {
                let d = euclid_dist(self.space.point(j), self.space.point(l));
                if d <= reach {
                    let g = (-d * d / (2.0 * bandwidth * bandwidth)).exp() * w[l];
                    window[(l, j)] = g;
                    mass += g;
                }
            }
            window.column_mut(j).scale_mut(1.0 / mass);
        }
        let p = self.factor.pointwise(&self.dec)?;
        WhiteNoiseKernel::from_pointwise(&(p * window), &self.dec, self.factor.gauge())
    }

    /// Gram matrix of rescaled kernel increments
    /// `G_ab = ⟨h(t + o_a) − h(t), h(t + o_b) − h(t)⟩_H / r²`,
    /// with offsets counted in node indices.
    pub fn tangent_gram(&self, t_index: usize, offsets: &[isize], r: f64) -> Result<CovarianceMatrix> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale r must be positive, got {r}")));
        }
        let n = self.space.len();
        if t_index >= n {
            return Err(Error::IndexOutOfRange {
                index: t_index as isize,
                len: n,
            });
        }
        let h = self.factor.factor();
        let increments: Vec<Vec<f64>> = offsets
            .iter()
            .map(|&o| {
                let s = t_index as isize + o;
                if s < 0 || s >= n as isize {
                    return Err(Error::IndexOutOfRange { index: s, len: n });
                }
                let s = s as usize;
                Ok((0..h.ncols()).map(|k| (h[(s, k)] - h[(t_index, k)]) / r).collect())
            })
            .collect::<Result<_>>()?;
        let q = offsets.len();
        let g = DMatrix::from_fn(q, q, |a, b| {
            increments[a].iter().zip(&increments[b]).map(|(x, y)| x * y).sum()
        });
        CovarianceMatrix::from_matrix(g)
    }
}

fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `E‖B − B^m‖²_{L²(ν)} = Σ_{k>m} λ_k`.
pub fn truncation_error(dec: &MercerDecomposition, m: usize) -> Result<f64> {
    if m > dec.rank() {
        return Err(Error::InvalidArgument(format!(
            "truncation m = {m} exceeds rank {}",
            dec.rank()
        )));
    }
    Ok(dec.eigenvalues()[m..].iter().sum())
}

/// Realizations of a truncated series, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    draws: DMatrix<f64>,
    seed: u64,
    truncation: usize,
}

impl SampleBatch {
    /// Wrap an existing `N × n` matrix of draws.
    pub fn from_draws(draws: DMatrix<f64>, seed: u64, truncation: usize) -> Result<Self> {
        if draws.nrows() == 0 {
            return Err(Error::InvalidArgument("a batch needs at least one draw".into()));
        }
        if draws.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("draws must be finite".into()));
        }
        Ok(Self {
            draws,
            seed,
            truncation,
        })
    }

    pub fn draws(&self) -> &DMatrix<f64> {
        &self.draws
    }

    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.draws.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Centered estimator `(1/N) Σ_r b_r b_rᵀ`; the field has mean zero.
    pub fn empirical_covariance(&self) -> Result<CovarianceMatrix> {
        let n = self.n_draws();
        if n < 2 {
            return Err(Error::InsufficientSamples(n));
        }
        CovarianceMatrix::from_matrix(self.draws.tr_mul(&self.draws) / n as f64)
    }
}

/// Standard error of the centered covariance estimator at entry `(i, j)`
/// for a Gaussian vector: `√((C_ii C_jj + C_ij²) / N)`.
pub fn covariance_standard_error(c: &CovarianceMatrix, i: usize, j: usize, n_draws: usize) -> f64 {
    ((c.get(i, i) * c.get(j, j) + c.get(i, j).powi(2)) / n_draws as f64).sqrt()
}

/// Largest `|Ĉ_ij − C_ij| / SE_ij` over all entries; `None` if the shapes differ.
///
/// Entries with zero standard error must match exactly or yield infinity.
pub fn max_standard_score(estimate: &CovarianceMatrix, truth: &CovarianceMatrix, n_draws: usize) -> Option<f64> {
    if estimate.size() != truth.size() {
        return None;
    }
    let n = truth.size();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let diff = (estimate.get(i, j) - truth.get(i, j)).abs();
            let se = covariance_standard_error(truth, i, j, n_draws);
            let score = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(score);
        }
    }
    Some(worst)
}
