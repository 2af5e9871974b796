//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs as a plain binary so the lines appear under `cargo test`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use grf_core::{
    duality_check, max_standard_score, skorokhod_integral, transfer, truncation_error, white_noise_divergence,
    wiener_integral, ChaosPolynomial, CovarianceKernel, CovarianceMatrix, DiscreteMeasureSpace, FieldVector, Gauge,
    GaussianField, MercerDecomposition, NoiseDraw, RandomIntegrand, RkhsElement, SampleBatch, DEFAULT_DROP_TOL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const FACTOR_TOL: f64 = 1e-8;
const REPRODUCING_TOL: f64 = 1e-6;
const SE_BAND: f64 = 5.0;
const DUALITY_TOL: f64 = 1e-10;
const EXACT_TOL: f64 = 1e-12;

fn report(id: u32, name: &str, passed: bool, detail: String) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:>2} {name}: {detail}");
    if !passed {
        FAILURES.fetch_add(1, Ordering::Relaxed);
    }
}

static FAILURES: AtomicUsize = AtomicUsize::new(0);

fn builtin_kernels() -> Vec<CovarianceKernel> {
    vec![
        CovarianceKernel::BrownianMotion,
        CovarianceKernel::BrownianBridge,
        CovarianceKernel::Fbm { hurst: 0.7 },
        CovarianceKernel::SquaredExponential { length_scale: 1.0 },
        CovarianceKernel::WhiteDiagonal { variance: 1.0 },
    ]
}

fn gauges() -> [Gauge; 3] {
    [Gauge::SymmetricSqrt, Gauge::Triangular, Gauge::Rotated { seed: 7 }]
}

fn setup(kernel: &CovarianceKernel, n: usize) -> (DiscreteMeasureSpace, CovarianceMatrix, MercerDecomposition) {
    let space = DiscreteMeasureSpace::interval_grid(n).unwrap();
    let c = kernel.assemble(&space).unwrap();
    let dec = MercerDecomposition::decompose(&c, &space, DEFAULT_DROP_TOL).unwrap();
    (space, c, dec)
}

fn field(kernel: &CovarianceKernel, n: usize, gauge: Gauge) -> GaussianField {
    GaussianField::from_kernel(DiscreteMeasureSpace::interval_grid(n).unwrap(), kernel, gauge, DEFAULT_DROP_TOL)
        .unwrap()
}

/// Worst ratio `max_ij |Σ_k h_ik h_jk − C_ij| / (1e−8 λ_1)` over all gauges,
/// plus the worst cross-gauge disagreement in the same units.
fn factorization_sweep() -> (f64, f64) {
    let mut worst_fit: f64 = 0.0;
    let mut worst_gauge: f64 = 0.0;
    for kernel in builtin_kernels() {
        for n in [8, 64, 256] {
            let (space, c, dec) = setup(&kernel, n);
            let unit = FACTOR_TOL * dec.lambda_max();
            let reproduced: Vec<CovarianceMatrix> = gauges()
                .iter()
                .map(|&g| dec.factorize(g).unwrap().reproduce_covariance(&space).unwrap())
                .collect();
            for r in &reproduced {
                worst_fit = worst_fit.max(r.max_abs_diff(&c).unwrap() / unit);
                worst_gauge = worst_gauge.max(r.max_abs_diff(&reproduced[0]).unwrap() / unit);
            }
        }
    }
    (worst_fit, worst_gauge)
}

fn criterion_01_factorization_identity() {
    let start = Instant::now();
    let (worst, _) = factorization_sweep();
    let elapsed = start.elapsed();
    report(
        1,
        "factorization identity",
        worst <= 1.0 && elapsed < Duration::from_secs(10),
        format!("max |hh^T - C| = {worst:.3e} x (1e-8 lambda_1) over 5 kernels x 3 gauges x n in {{8,64,256}}; {elapsed:.2?} (< 10 s)"),
    );
}

fn criterion_02_brownian_spectral_convergence() {
    let start = Instant::now();
    let (space, c, dec) = setup(&CovarianceKernel::BrownianMotion, 512);
    let worst_rel = (1..=5)
        .map(|k| {
            let exact = (((k as f64) - 0.5) * PI).powi(-2);
            (dec.eigenvalues()[k - 1] - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    let trace = c.trace_of_operator(&space).unwrap();
    let trace_rel = (trace - 0.5).abs() / 0.5;
    let elapsed = start.elapsed();
    report(
        2,
        "BM spectral convergence",
        worst_rel <= 0.01 && trace_rel <= 0.005 && elapsed < Duration::from_secs(5),
        format!("max rel err lambda_1..5 = {worst_rel:.3e} (<= 1e-2), trace rel err = {trace_rel:.3e} (<= 5e-3); {elapsed:.2?} (< 5 s)"),
    );
}

fn criterion_03_reproducing_property() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for kernel in [CovarianceKernel::BrownianMotion, CovarianceKernel::SquaredExponential { length_scale: 1.0 }] {
        let (space, c, dec) = setup(&kernel, 128);
        for _ in 0..10 {
            let coeffs: Vec<f64> = (0..dec.rank()).map(|_| rng.sample(StandardNormal)).collect();
            let values: Vec<f64> = (0..space.len())
                .map(|i| (0..dec.rank()).map(|k| coeffs[k] * dec.eigenfunctions()[(i, k)]).sum())
                .collect();
            let f = FieldVector(values);
            let a = dec.to_rkhs(&f, 1e-8).unwrap();
            let norm = a.norm_sq().sqrt();
            for x in 0..space.len() {
                let value = a.inner(&dec.kernel_section(x).unwrap()).unwrap();
                let scale = norm * c.get(x, x).sqrt();
                worst = worst.max((value - f[x]).abs() / (REPRODUCING_TOL * scale));
            }
        }
    }
    report(
        3,
        "reproducing property",
        worst <= 1.0,
        format!("max |<f,K(x,.)> - f(x)| = {worst:.3e} x (1e-6 |f|_Hmu sqrt K(x,x)), BM and SE, n=128"),
    );
}

/// `(score of empirical covariance, worst truncation score)` for one field at n=16.
fn sampling_scores(kernel: &CovarianceKernel, gauge: Gauge, seed: u64) -> (f64, f64) {
    let n_draws = 200_000;
    let field = field(kernel, 16, gauge);
    let truth = kernel.assemble(field.space()).unwrap();
    let rank = field.rank();
    let full = field.sample(n_draws, rank, seed).unwrap();
    let cov_score = max_standard_score(&full.empirical_covariance().unwrap(), &truth, n_draws).unwrap();

    let dec = field.decomposition();
    let w = field.space().weights();
    let mut trunc_score: f64 = 0.0;
    for m in [1, rank / 2] {
        let partial = field.sample(n_draws, m, seed).unwrap();
        let tail_sq: f64 = (0..n_draws)
            .map(|r| {
                (0..16)
                    .map(|i| (full.draws()[(r, i)] - partial.draws()[(r, i)]).powi(2) * w[i])
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n_draws as f64;
        let expected = truncation_error(dec, m).unwrap();
        // Var(Σ_{k>m} λ_k ξ_k²) = 2 Σ_{k>m} λ_k²
        let se = (2.0 * dec.eigenvalues()[m..].iter().map(|l| l * l).sum::<f64>() / n_draws as f64).sqrt();
        trunc_score = trunc_score.max((tail_sq - expected).abs() / se);
    }
    (cov_score, trunc_score)
}

fn criterion_04_sampling_consistency() {
    let start = Instant::now();
    let (bm_cov, bm_trunc) = sampling_scores(&CovarianceKernel::BrownianMotion, Gauge::SymmetricSqrt, 401);
    let (fbm_cov, fbm_trunc) = sampling_scores(&CovarianceKernel::Fbm { hurst: 0.7 }, Gauge::SymmetricSqrt, 402);
    let elapsed = start.elapsed();
    let worst = bm_cov.max(bm_trunc).max(fbm_cov).max(fbm_trunc);
    report(
        4,
        "sampling consistency",
        worst <= SE_BAND && elapsed < Duration::from_secs(60),
        format!(
            "covariance SE scores BM {bm_cov:.2}, fBm {fbm_cov:.2}; truncation SE scores BM {bm_trunc:.2}, fBm {fbm_trunc:.2} (<= 5); {elapsed:.2?} (< 60 s)"
        ),
    );
}

fn criterion_05_malliavin_duality() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(1..=6);
        let f = ChaosPolynomial::random(&mut rng, m, 4, 6);
        let q = rng.random_range(1..=m);
        let u = RandomIntegrand::random(&mut rng, q, m, 4, 4);
        worst = worst.max(duality_check(&f, &u));
    }
    let elapsed = start.elapsed();
    report(
        5,
        "Malliavin duality",
        worst <= DUALITY_TOL && elapsed < Duration::from_secs(5),
        format!("max |E[F d(u)] - E[<DF,u>]| = {worst:.3e} over 100 pairs (<= 1e-10); {elapsed:.2?} (< 5 s)"),
    );
}

fn criterion_06_deterministic_isometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_symbolic: f64 = 0.0;
    for _ in 0..20 {
        let m = rng.random_range(1..=12);
        let f = RkhsElement::new((0..m).map(|_| rng.random_range(-2.0..2.0)).collect());
        let delta = skorokhod_integral(&RandomIntegrand::deterministic(&f));
        worst_symbolic = worst_symbolic.max(((&delta * &delta).expectation() - f.norm_sq()).abs());
    }

    // odd grid so that 0.5 is a node
    let (space, _, dec) = setup(&CovarianceKernel::BrownianMotion, 257);
    let x = space.nearest(&[0.5]).unwrap();
    assert_eq!(space.point(x)[0], 0.5);
    let section = dec.kernel_section(x).unwrap();
    let n_draws = 100_000u64;
    let second: f64 = (0..n_draws)
        .map(|r| wiener_integral(&section, &NoiseDraw::generate(606, r, dec.rank())).unwrap().powi(2))
        .sum::<f64>()
        / n_draws as f64;
    let se = 0.5 * (2.0 / n_draws as f64).sqrt();
    let score = (second - 0.5).abs() / se;
    report(
        6,
        "deterministic-integrand isometry",
        worst_symbolic <= EXACT_TOL && score <= SE_BAND,
        format!("symbolic |E[d(f)^2] - |f|^2| = {worst_symbolic:.3e} (<= 1e-12); empirical Var = {second:.5} vs 0.5, {score:.2} SE (<= 5)"),
    );
}

fn criterion_07_transfer_identity() {
    let (_, _, dec) = setup(&CovarianceKernel::BrownianMotion, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = rng.random_range(1..=6);
        let q = rng.random_range(1..=m);
        let u = RandomIntegrand::random(&mut rng, q, m, 3, 4);
        let lhs = skorokhod_integral(&u);
        let rhs = white_noise_divergence(&transfer(&u, &dec).unwrap(), &dec).unwrap();
        worst = worst.max(lhs.max_coeff_diff(&rhs));
    }
    report(
        7,
        "transfer identity",
        worst <= EXACT_TOL,
        format!("max coefficient gap between d^B(u) and d^W(L(u)) = {worst:.3e} over 20 integrands (<= 1e-12)"),
    );
}

fn criterion_08_gauge_invariance() {
    let (_, worst_gauge) = factorization_sweep();
    let (sym_cov, _) = sampling_scores(&CovarianceKernel::BrownianMotion, Gauge::SymmetricSqrt, 801);
    let (rot_cov, _) = sampling_scores(&CovarianceKernel::BrownianMotion, Gauge::Rotated { seed: 7 }, 802);

    // the same seed under two gauges gives different paths with the same law
    let a = field(&CovarianceKernel::BrownianMotion, 16, Gauge::SymmetricSqrt).sample(4, 16, 9).unwrap();
    let b = field(&CovarianceKernel::BrownianMotion, 16, Gauge::Rotated { seed: 7 }).sample(4, 16, 9).unwrap();
    let paths_differ = a != b;
    report(
        8,
        "gauge invariance",
        worst_gauge <= 1.0 && sym_cov <= SE_BAND && rot_cov <= SE_BAND && paths_differ,
        format!(
            "cross-gauge covariance gap = {worst_gauge:.3e} x (1e-8 lambda_1); sample SE scores symmetric_sqrt {sym_cov:.2}, rotated(7) {rot_cov:.2} (<= 5)"
        ),
    );
}

fn criterion_09_tangent_structure() {
    let n_bm = 512;
    let bm = field(&CovarianceKernel::BrownianMotion, n_bm, Gauge::SymmetricSqrt);
    let c = 1.0 / n_bm as f64;
    let g_bm = bm.tangent_gram(n_bm / 2, &[1], c.sqrt()).unwrap().get(0, 0);

    let n_fbm = 1024;
    let fbm = field(&CovarianceKernel::Fbm { hurst: 0.7 }, n_fbm, Gauge::SymmetricSqrt);
    let c = 1.0 / n_fbm as f64;
    let g_fbm = fbm.tangent_gram(n_fbm / 2, &[1], c.powf(0.7)).unwrap().get(0, 0);
    report(
        9,
        "tangent structure",
        (g_bm - 1.0).abs() <= 1e-9 && (g_fbm - 1.0).abs() <= 0.02,
        format!("BM G_11 = {g_bm:.12} (|G-1| <= 1e-9), fBm(0.7) n=1024 G_11 = {g_fbm:.6} (within 2%)"),
    );
}

fn criterion_10_mollification() {
    let bm = field(&CovarianceKernel::BrownianMotion, 128, Gauge::SymmetricSqrt);
    let c = CovarianceKernel::BrownianMotion.assemble(bm.space()).unwrap();
    let distances: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&b| {
            bm.mollify_factor(b)
                .unwrap()
                .reproduce_covariance(bm.space())
                .unwrap()
                .max_abs_diff(&c)
                .unwrap()
        })
        .collect();
    let strictly_decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    report(
        10,
        "mollification",
        strictly_decreasing,
        format!(
            "|C_n - C|_max along bandwidths 0.1, 0.05, 0.025, 0.0125 = [{}]",
            distances.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

fn sample_batch_is_seed_reproducible() {
    let f = field(&CovarianceKernel::Fbm { hurst: 0.7 }, 16, Gauge::Triangular);
    let a: SampleBatch = f.sample(50, 16, 1).unwrap();
    let same = a == f.sample(50, 16, 1).unwrap();
    let tag = if same { "PASS" } else { "FAIL" };
    println!("[{tag}] seed reproducibility: identical 50x16 batches from seed 1");
    if !same {
        FAILURES.fetch_add(1, Ordering::Relaxed);
    }
}

fn main() -> ExitCode {
    criterion_01_factorization_identity();
    criterion_02_brownian_spectral_convergence();
    criterion_03_reproducing_property();
    criterion_04_sampling_consistency();
    criterion_05_malliavin_duality();
    criterion_06_deterministic_isometry();
    criterion_07_transfer_identity();
    criterion_08_gauge_invariance();
    criterion_09_tangent_structure();
    criterion_10_mollification();
    sample_batch_is_seed_reproducible();
    match FAILURES.load(Ordering::Relaxed) {
        0 => ExitCode::SUCCESS,
        n => {
            println!("{n} acceptance check(s) failed");
            ExitCode::FAILURE
        }
    }
}
