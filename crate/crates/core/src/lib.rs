//! White-noise representation toolkit for Gaussian random fields over
//! discretized compact measure spaces.
//!
//! A field `B` with covariance `K` over a quadrature rule `(x_i, w_i)` is
//! decomposed into eigenpairs of its covariance operator, factored as
//! `K(x, y) = ∫ h(x, z) h(y, z) dν(z)` under a chosen gauge, sampled through
//! the series `B = Σ √λ_k ξ_k φ_k`, and integrated against with exact
//! polynomial-chaos arithmetic for the divergence.
//!
//! ```
//! use grf_core::{CovarianceKernel, DiscreteMeasureSpace, Gauge, GaussianField};
//!
//! let space = DiscreteMeasureSpace::interval_grid(64).unwrap();
//! let field = GaussianField::from_kernel(space, &CovarianceKernel::BrownianMotion, Gauge::SymmetricSqrt, 1e-12).unwrap();
//! let batch = field.sample(10, field.rank(), 42).unwrap();
//! assert_eq!(batch.draws().shape(), (10, 64));
//! ```

pub mod chaos;
pub mod error;
pub mod field;
pub mod integral;
pub mod kernels;
pub mod measure_space;
pub mod spectral;

pub use nalgebra::DMatrix;
pub use chaos::{gaussian_moment, inner_hmu, sobolev_inner, ChaosPolynomial, HmuValuedPolynomial};
pub use error::{Error, Result};
pub use field::{
    covariance_standard_error, max_standard_score, truncation_error, white_noise_functional, GaussianField,
    NoiseDraw, SampleBatch,
};
pub use integral::{
    duality_check, skorokhod_integral, transfer, white_noise_divergence, wiener_integral, IntegrandBasis,
    RandomIntegrand,
};
pub use kernels::{CovarianceKernel, CovarianceMatrix, BUILTIN_KERNELS};
pub use measure_space::{DiscreteMeasureSpace, FieldVector};
pub use spectral::{
    haar_orthogonal, DecompositionExport, Gauge, MercerDecomposition, RkhsElement, WhiteNoiseKernel,
    DEFAULT_DROP_TOL,
};
