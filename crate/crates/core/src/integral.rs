//! Stochastic integrals against the field.
//!
//! With `Φ_k = √λ_k φ_k` as the basis of `H_μ` and `ξ_k = B(Φ_k)`, a
//! deterministic `f = Σ a_k Φ_k` integrates to `Σ a_k ξ_k`, and a polynomial
//! integrand `u = Σ P_k Φ_k` has divergence
//! `δ(u) = Σ_k (P_k ξ_k − ∂P_k/∂ξ_k)`, the unique choice satisfying
//! `E[F δ(u)] = E[⟨DF, u⟩]` for every polynomial `F`.

use rand::Rng;

use crate::chaos::{inner_hmu, ChaosPolynomial, HmuValuedPolynomial};
use crate::error::{check_len, Error, Result};
use crate::field::NoiseDraw;
use crate::spectral::{MercerDecomposition, RkhsElement};

/// Which orthonormal basis the integrand coordinates refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrandBasis {
    /// Coordinates against `Φ_k` in `H_μ`; integrated against `B`.
    Rkhs,
    /// Coordinates against `φ_k` in `H = L²(ν)`; integrated against `W`.
    WhiteNoise,
}

/// Random integrand `u = Σ_k P_k e_k` with polynomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomIntegrand {
    components: Vec<ChaosPolynomial>,
    basis: IntegrandBasis,
}

impl RandomIntegrand {
    /// `u = Σ_k P_k Φ_k`. The variable count is lifted so that every
    /// component index has its own coordinate `ξ_k`.
    pub fn new(components: Vec<ChaosPolynomial>) -> Self {
        Self::with_basis(components, IntegrandBasis::Rkhs)
    }

    fn with_basis(components: Vec<ChaosPolynomial>, basis: IntegrandBasis) -> Self {
        let vars = components
            .iter()
            .map(|p| p.num_vars())
            .max()
            .unwrap_or(0)
            .max(components.len());
        Self {
            components: components.into_iter().map(|p| p.extended(vars)).collect(),
            basis,
        }
    }

    /// Deterministic integrand with constant components.
    pub fn deterministic(f: &RkhsElement) -> Self {
        let m = f.len();
        Self::new(f.coeffs().iter().map(|&a| ChaosPolynomial::constant(a, m)).collect())
    }

    /// Parse components from the text polynomial format.
    pub fn parse(components: &[impl AsRef<str>]) -> Result<Self> {
        let parsed = components
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<Vec<ChaosPolynomial>>>()?;
        Ok(Self::new(parsed))
    }

    /// Random integrand with `n_components` components over `num_vars ≥ n_components` variables.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        n_components: usize,
        num_vars: usize,
        max_degree: u32,
        terms_per_component: usize,
    ) -> Self {
        let vars = num_vars.max(n_components);
        Self::new(
            (0..n_components)
                .map(|_| ChaosPolynomial::random(rng, vars, max_degree, terms_per_component))
                .collect(),
        )
    }

    pub fn components(&self) -> &[ChaosPolynomial] {
        &self.components
    }

    pub fn basis(&self) -> IntegrandBasis {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.components.first().map_or(0, |p| p.num_vars())
    }

    pub fn as_hmu(&self) -> HmuValuedPolynomial {
        HmuValuedPolynomial::new(self.components.clone())
    }
}

/// `∫ f dB = Σ_k ⟨f, Φ_k⟩_{H_μ} ξ_k`.
pub fn wiener_integral(f: &RkhsElement, noise: &NoiseDraw) -> Result<f64> {
    check_len(noise.len(), f.len())?;
    Ok(f.coeffs().iter().zip(noise.xi()).map(|(a, x)| a * x).sum())
}

/// Divergence `δ(u) = Σ_k (P_k ξ_k − ∂P_k/∂ξ_k)` as an exact polynomial.
pub fn skorokhod_integral(u: &RandomIntegrand) -> ChaosPolynomial {
    let vars = u.num_vars();
    u.components()
        .iter()
        .enumerate()
        .fold(ChaosPolynomial::zero(vars), |acc, (k, p)| {
            let xi = ChaosPolynomial::variable(k, vars);
            &acc + &(&(p * &xi) - &p.partial(k))
        })
}

/// `|E[F δ(u)] − E[⟨DF, u⟩]|`; zero up to round-off when `δ` is the adjoint of `D`.
pub fn duality_check(f: &ChaosPolynomial, u: &RandomIntegrand) -> f64 {
    let lhs = (f * &skorokhod_integral(u)).expectation();
    let m = u.len().max(f.num_vars());
    let df = f.malliavin_derivative().padded(m);
    let uu = u.as_hmu().padded(m);
    let rhs = inner_hmu(&df, &uu).expect("both padded to m").expectation();
    (lhs - rhs).abs()
}

/// Carry `u ∈ H_μ` to `L(u) ∈ H` through the unitary `Φ_k ↦ φ_k`.
///
/// Coordinates are unchanged; only their basis changes, so that
/// `∫ u dB = ∫ L(u) dW`.
pub fn transfer(u: &RandomIntegrand, dec: &MercerDecomposition) -> Result<RandomIntegrand> {
    if u.basis() != IntegrandBasis::Rkhs {
        return Err(Error::InvalidArgument("transfer expects an H_mu integrand".into()));
    }
    if u.len() > dec.rank() {
        return Err(Error::DimensionMismatch {
            expected: dec.rank(),
            found: u.len(),
        });
    }
    Ok(RandomIntegrand::with_basis(u.components.clone(), IntegrandBasis::WhiteNoise))
}

/// Divergence against the white noise on `H = L²(ν)`, computed through the
/// function-space route: tabulate `v(z_j) = Σ_k Q_k φ_k(z_j)` at the nodes,
/// recover `⟨v, φ_k⟩_H` by quadrature for every retained `k`, and apply
/// `δ^W(v) = Σ_k (⟨v, φ_k⟩ ξ_k − ⟨D_{φ_k} v, φ_k⟩)` with `W(φ_k) = ξ_k`.
pub fn white_noise_divergence(v: &RandomIntegrand, dec: &MercerDecomposition) -> Result<ChaosPolynomial> {
    if v.basis() != IntegrandBasis::WhiteNoise {
        return Err(Error::InvalidArgument(
            "white_noise_divergence expects an integrand in H; apply transfer first".into(),
        ));
    }
    if v.len() > dec.rank() {
        return Err(Error::DimensionMismatch {
            expected: dec.rank(),
            found: v.len(),
        });
    }
    let vars = v.num_vars().max(dec.rank());
    let phi = dec.eigenfunctions();
    let w = dec.weights();
    let pointwise: Vec<ChaosPolynomial> = (0..dec.size())
        .map(|j| {
            v.components().iter().enumerate().fold(ChaosPolynomial::zero(vars), |acc, (k, q)| {
                &acc + &q.scale(phi[(j, k)])
            })
        })
        .collect();
    let mut out = ChaosPolynomial::zero(vars);
    for k in 0..dec.rank() {
        let coord = pointwise
            .iter()
            .enumerate()
            .fold(ChaosPolynomial::zero(vars), |acc, (j, vj)| {
                &acc + &vj.scale(phi[(j, k)] * w[j])
            });
        let xi = ChaosPolynomial::variable(k, vars);
        out = &out + &(&(&coord * &xi) - &coord.partial(k));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kernels::CovarianceKernel;
    use crate::measure_space::DiscreteMeasureSpace;
    use crate::spectral::DEFAULT_DROP_TOL;

    fn p(s: &str) -> ChaosPolynomial {
        s.parse().unwrap()
    }

    fn integrand(parts: &[&str]) -> RandomIntegrand {
        RandomIntegrand::parse(parts).unwrap()
    }

    #[test]
    fn skorokhod_examples() {
        assert_eq!(skorokhod_integral(&integrand(&["1"])), p("x1"));
        assert_eq!(skorokhod_integral(&integrand(&["x1"])), p("x1^2 - 1"));
        assert_eq!(skorokhod_integral(&integrand(&["x2"])), p("x1*x2"));
        assert!(skorokhod_integral(&integrand(&["0", "0"])).is_zero());
    }

    #[test]
    fn skorokhod_matches_duality_oracle() {
        // δ(ξ_1 Φ_1) against test functionals 1, ξ_1, ξ_1²
        let u = integrand(&["x1"]);
        let delta = skorokhod_integral(&u);
        for (f, expected) in [(p("1"), 0.0), (p("x1"), 0.0), (p("x1^2"), 2.0)] {
            let lhs = (&f * &delta).expectation();
            assert!((lhs - expected).abs() < 1e-14);
            assert!(duality_check(&f, &u) < 1e-14);
        }
    }

    #[test]
    fn duality_examples() {
        assert_eq!(duality_check(&ChaosPolynomial::constant(1.0, 0), &integrand(&["x1*x2", "x2^3"])), 0.0);
        assert_eq!(duality_check(&p("x1"), &integrand(&["1"])), 0.0);
        assert_eq!(duality_check(&p("x1^2"), &integrand(&["x1"])), 0.0);
    }

    #[test]
    fn random_duality_and_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let m = rng.random_range(1..=6);
            let f = ChaosPolynomial::random(&mut rng, m, 4, 6);
            let q = rng.random_range(1..=m);
            let u = RandomIntegrand::random(&mut rng, q, m, 3, 4);
            let delta = skorokhod_integral(&u);
            let scale = 1.0 + (&f * &delta).expectation().abs();
            assert!(duality_check(&f, &u) <= 1e-10 * scale);
            assert!(delta.expectation().abs() <= 1e-12);
        }
    }

    #[test]
    fn deterministic_integrand_reduces_to_linear_form() {
        let f = RkhsElement::new(vec![0.5, -2.0, 0.0, 1.25]);
        let delta = skorokhod_integral(&RandomIntegrand::deterministic(&f));
        let linear = (0..4).fold(ChaosPolynomial::zero(4), |acc, k| {
            &acc + &ChaosPolynomial::variable(k, 4).scale(f.coeffs()[k])
        });
        assert_eq!(delta, linear);
        assert_eq!((&delta * &delta).expectation(), f.norm_sq());
    }

    #[test]
    fn wiener_integral_examples() {
        let noise = NoiseDraw::generate(3, 0, 3);
        assert_eq!(wiener_integral(&RkhsElement::basis(0, 3), &noise).unwrap(), noise.xi()[0]);
        assert_eq!(wiener_integral(&RkhsElement::new(vec![0.0; 3]), &noise).unwrap(), 0.0);
        assert!(wiener_integral(&RkhsElement::new(vec![1.0]), &noise).is_err());
    }

    #[test]
    fn transfer_preserves_divergence() {
        let space = DiscreteMeasureSpace::interval_grid(24).unwrap();
        let c = CovarianceKernel::BrownianMotion.assemble(&space).unwrap();
        let dec = MercerDecomposition::decompose(&c, &space, DEFAULT_DROP_TOL).unwrap();

        let u = integrand(&["1"]);
        let v = transfer(&u, &dec).unwrap();
        assert_eq!(v.basis(), IntegrandBasis::WhiteNoise);
        assert_eq!(v.components(), u.components());
        assert!(white_noise_divergence(&v, &dec).unwrap().max_coeff_diff(&p("x1")) < 1e-13);

        let zero = integrand(&["0"]);
        assert!(white_noise_divergence(&transfer(&zero, &dec).unwrap(), &dec).unwrap().max_abs_coeff() < 1e-13);

        let u = integrand(&["x1*x3 - 2", "x2^2", "0.5*x1"]);
        let lhs = skorokhod_integral(&u);
        let rhs = white_noise_divergence(&transfer(&u, &dec).unwrap(), &dec).unwrap();
        assert!(lhs.max_coeff_diff(&rhs) <= 1e-12);

        assert!(white_noise_divergence(&u, &dec).is_err());
        let too_long = RandomIntegrand::new(vec![ChaosPolynomial::constant(1.0, 0); 25]);
        assert!(transfer(&too_long, &dec).is_err());
    }
}
