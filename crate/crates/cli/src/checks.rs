//! The invariant suite behind `grf verify`.

use grf_core::{
    max_standard_score, skorokhod_integral, transfer, white_noise_divergence, ChaosPolynomial, FieldVector,
    Gauge, NoiseDraw, RandomIntegrand, RkhsElement, WhiteNoiseKernel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::Prepared;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl Check {
    fn new(name: &'static str, measured: f64, threshold: f64) -> Self {
        Self {
            name,
            passed: measured <= threshold,
            measured,
            threshold,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub kernel: String,
    pub gauge: String,
    pub n_points: usize,
    pub rank: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

const MAX_DEGREE: u32 = 4;
const MAX_VARS: usize = 6;

pub fn run_all(cfg: &RunConfig, p: &Prepared, factor: WhiteNoiseKernel) -> Result<Report, CliError> {
    let v = &cfg.verify;
    let lambda_1 = p.dec.lambda_max();
    let rank = p.dec.rank();
    let mut checks = Vec::new();

    let reproduced = factor.reproduce_covariance(&p.space).map_err(CliError::data)?;
    let diff = reproduced.max_abs_diff(&p.covariance).map_err(CliError::data)?;
    checks.push(Check::new("factorization_identity", ratio(diff, lambda_1), v.factor_tol));

    let hs_sq = factor.hs_norm(&p.space).map_err(CliError::data)?.powi(2);
    let spectrum = p.dec.eigenvalue_sum();
    checks.push(Check::new("hs_norm_vs_spectrum", ratio((hs_sq - spectrum).abs(), spectrum), v.trace_tol));

    checks.push(Check::new("orthonormality", p.dec.orthonormality_error(), v.factor_tol));

    let trace = p.trace();
    let parseval = (spectrum + p.dec.dropped_mass() - trace).abs();
    checks.push(Check::new("parseval_trace", ratio(parseval, trace), v.trace_tol));

    checks.push(Check::new("reproducing_property", reproducing(cfg, p)?, v.reproducing_tol));

    // Sampling checks need a factor whose rank matches the decomposition.
    if factor.rank() == rank && rank > 0 {
        let field = p.field(factor)?;
        let full = field.sample(v.n_draws, rank, cfg.seed).map_err(CliError::data)?;
        let empirical = full.empirical_covariance().map_err(CliError::data)?;
        let score = max_standard_score(&empirical, &p.covariance, v.n_draws).unwrap_or(0.0);
        checks.push(Check::new("covariance_band", score, v.se_band));

        let mut worst: f64 = 0.0;
        let mut levels = vec![1, rank / 2];
        levels.retain(|&m| m >= 1 && m < rank);
        levels.dedup();
        for m in levels {
            let partial = field.sample(v.n_draws, m, cfg.seed).map_err(CliError::data)?;
            worst = worst.max(truncation_score(&full, &partial, p, field.factor(), m)?);
        }
        checks.push(Check::new("truncation_error", worst, v.se_band));
    } else {
        let measured = if factor.rank() == rank { 0.0 } else { f64::INFINITY };
        checks.push(Check::new("covariance_band", measured, v.se_band));
        checks.push(Check::new("truncation_error", measured, v.se_band));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..v.duality_pairs {
        let m = rng.random_range(1..=MAX_VARS);
        let f = ChaosPolynomial::random(&mut rng, m, MAX_DEGREE, 5);
        let q = rng.random_range(1..=m);
        let u = RandomIntegrand::random(&mut rng, q, m, MAX_DEGREE, 4);
        worst = worst.max(grf_core::duality_check(&f, &u));
    }
    checks.push(Check::new("duality_battery", worst, v.duality_tol));

    let mut worst: f64 = 0.0;
    let span = rank.min(MAX_VARS);
    if span > 0 {
        for _ in 0..v.transfer_integrands {
            let m = rng.random_range(1..=span);
            let q = rng.random_range(1..=m);
            let u = RandomIntegrand::random(&mut rng, q, m, 3, 4);
            let lhs = skorokhod_integral(&u);
            let moved = transfer(&u, &p.dec).map_err(CliError::data)?;
            let rhs = white_noise_divergence(&moved, &p.dec).map_err(CliError::data)?;
            worst = worst.max(lhs.max_coeff_diff(&rhs));
        }
    }
    checks.push(Check::new("transfer_identity", worst, v.exact_tol));

    let mut worst: f64 = 0.0;
    if rank > 0 {
        for _ in 0..20 {
            let m = rng.random_range(1..=rank.min(12));
            let f = RkhsElement::new((0..m).map(|_| rng.random_range(-2.0..2.0)).collect());
            let delta = skorokhod_integral(&RandomIntegrand::deterministic(&f));
            worst = worst.max(((&delta * &delta).expectation() - f.norm_sq()).abs());
        }
    }
    checks.push(Check::new("symbolic_isometry", worst, v.exact_tol));

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(Report {
        kernel: cfg.kernel.name.clone(),
        gauge: p.gauge.to_string(),
        n_points: p.space.len(),
        rank,
        seed: cfg.seed,
        checks,
        all_passed,
    })
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        a
    }
}

/// Worst `|⟨f, K(x,·)⟩ − f(x)| / (‖f‖ √K(x,x))` over random eigen-span `f`
/// and every node `x`.
fn reproducing(cfg: &RunConfig, p: &Prepared) -> Result<f64, CliError> {
    let rank = p.dec.rank();
    if rank == 0 {
        return Ok(0.0);
    }
    let phi = p.dec.eigenfunctions();
    let sections: Vec<RkhsElement> = (0..p.space.len())
        .map(|x| p.dec.kernel_section(x))
        .collect::<Result<_, _>>()
        .map_err(CliError::data)?;
    let mut worst: f64 = 0.0;
    for r in 0..cfg.verify.reproducing_functions as u64 {
        let coeffs = NoiseDraw::generate(cfg.seed ^ 0x5eed, r, rank);
        let values: Vec<f64> = (0..p.space.len())
            .map(|i| (0..rank).map(|k| coeffs.xi()[k] * phi[(i, k)]).sum())
            .collect();
        let f = FieldVector(values);
        let a = p.dec.to_rkhs(&f, 1e-8).map_err(CliError::data)?;
        let norm = a.norm_sq().sqrt();
        for (x, section) in sections.iter().enumerate() {
            let scale = norm * p.covariance.get(x, x).sqrt();
            if scale > 0.0 {
                let value = a.inner(section).map_err(CliError::data)?;
                worst = worst.max((value - f[x]).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// `Σ_{k>m} λ_k` when the factor columns follow the eigenbasis; otherwise
/// the `ν`-mass of the discarded columns, `Σ_{k>m} Σ_i h_ik² w_i`.
fn expected_tail(p: &Prepared, factor: &WhiteNoiseKernel, m: usize) -> Result<f64, CliError> {
    if factor.gauge() == Gauge::SymmetricSqrt {
        return grf_core::truncation_error(&p.dec, m).map_err(CliError::data);
    }
    let h = factor.factor();
    let w = p.space.weights();
    Ok((m..h.ncols())
        .map(|k| (0..h.nrows()).map(|i| h[(i, k)] * h[(i, k)] * w[i]).sum::<f64>())
        .sum())
}

/// Standard score of the mean squared `L²(ν)` tail `‖B − B^m‖²` against
/// `Σ_{k>m} λ_k`.
fn truncation_score(
    full: &grf_core::SampleBatch,
    partial: &grf_core::SampleBatch,
    p: &Prepared,
    field_factor: &WhiteNoiseKernel,
    m: usize,
) -> Result<f64, CliError> {
    let w = p.space.weights();
    let n_draws = full.n_draws();
    let tails: Vec<f64> = (0..n_draws)
        .map(|r| {
            (0..p.space.len())
                .map(|i| (full.draws()[(r, i)] - partial.draws()[(r, i)]).powi(2) * w[i])
                .sum()
        })
        .collect();
    let mean = tails.iter().sum::<f64>() / n_draws as f64;
    let var = tails.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n_draws as f64 - 1.0);
    let expected = expected_tail(p, field_factor, m)?;
    let se = (var / n_draws as f64).sqrt();
    Ok(if se > 0.0 {
        (mean - expected).abs() / se
    } else {
        (mean - expected).abs()
    })
}
