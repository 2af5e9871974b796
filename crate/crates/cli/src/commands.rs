use std::path::Path;

use grf_core::{
    skorokhod_integral, wiener_integral, CovarianceMatrix, DecompositionExport, DiscreteMeasureSpace, Gauge,
    GaussianField, MercerDecomposition, NoiseDraw, RandomIntegrand, RkhsElement, WhiteNoiseKernel,
};
use serde::{Deserialize, Serialize};

use crate::checks;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{fmt_f64, matrix_csv, read_matrix_csv, write_atomic, write_json};

/// Everything derived from the space and kernel sections of a config.
pub struct Prepared {
    pub space: DiscreteMeasureSpace,
    pub covariance: CovarianceMatrix,
    pub dec: MercerDecomposition,
    pub gauge: Gauge,
}

impl Prepared {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let space = cfg.space()?;
        let gauge = cfg.gauge()?;
        let covariance = cfg.covariance(&space)?;
        let dec = MercerDecomposition::decompose(&covariance, &space, cfg.drop_tol).map_err(CliError::data)?;
        Ok(Self {
            space,
            covariance,
            dec,
            gauge,
        })
    }

    pub fn factor(&self) -> Result<WhiteNoiseKernel, CliError> {
        self.dec.factorize(self.gauge).map_err(CliError::data)
    }

    pub fn field(&self, factor: WhiteNoiseKernel) -> Result<GaussianField, CliError> {
        GaussianField::new(self.space.clone(), self.dec.clone(), factor).map_err(CliError::data)
    }

    pub fn trace(&self) -> f64 {
        self.covariance
            .trace_of_operator(&self.space)
            .expect("covariance assembled over this space")
    }

    /// Configured truncation, defaulting to the full rank.
    pub fn truncation(&self, cfg: &RunConfig) -> Result<usize, CliError> {
        let rank = self.dec.rank();
        match cfg.truncation {
            None => Ok(rank),
            Some(m) if m > rank => Err(CliError::Data(format!("truncation m = {m} exceeds rank {rank}"))),
            Some(0) if rank > 0 => Err(CliError::Usage("truncation must be at least 1".into())),
            Some(m) => Ok(m),
        }
    }
}

#[derive(Serialize)]
struct DecompositionFile<'a> {
    kernel: &'a str,
    gauge: String,
    n_points: usize,
    trace: f64,
    #[serde(flatten)]
    decomposition: DecompositionExport,
}

pub fn factorize(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let p = Prepared::new(cfg)?;
    let factor = p.factor()?;
    let trace = p.trace();
    write_json(
        &out.join("decomposition.json"),
        &DecompositionFile {
            kernel: &cfg.kernel.name,
            gauge: p.gauge.to_string(),
            n_points: p.space.len(),
            trace,
            decomposition: p.dec.export(),
        },
    )?;
    let h = factor.factor();
    let header: Vec<String> = (1..=h.ncols()).map(|k| format!("h{k}")).collect();
    let csv = matrix_csv(&header, h.row_iter().map(|r| r.iter().copied().collect()))?;
    write_atomic(&out.join("factor.csv"), &csv)?;

    println!("rank = {}", p.dec.rank());
    println!("trace = {}", fmt_f64(trace));
    println!("dropped_mass = {}", fmt_f64(p.dec.dropped_mass()));
    Ok(())
}

#[derive(Serialize)]
struct SampleSidecar<'a> {
    seed: u64,
    truncation: usize,
    gauge: String,
    kernel: &'a str,
    n_draws: usize,
    n_points: usize,
    points: &'a [Vec<f64>],
}

pub fn sample(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let p = Prepared::new(cfg)?;
    let m = p.truncation(cfg)?;
    let field = p.field(p.factor()?)?;
    let batch = field.sample(cfg.sample.n_draws, m, cfg.seed).map_err(CliError::data)?;
    let header: Vec<String> = (1..=p.space.len()).map(|i| format!("p{i}")).collect();
    let csv = matrix_csv(&header, batch.draws().row_iter().map(|r| r.iter().copied().collect()))?;
    write_atomic(&out.join("samples.csv"), &csv)?;
    write_json(
        &out.join("samples.json"),
        &SampleSidecar {
            seed: cfg.seed,
            truncation: m,
            gauge: p.gauge.to_string(),
            kernel: &cfg.kernel.name,
            n_draws: batch.n_draws(),
            n_points: batch.n_points(),
            points: p.space.points(),
        },
    )?;
    println!(
        "{} draws x {} points, truncation {m} of rank {}, seed {}",
        batch.n_draws(),
        batch.n_points(),
        p.dec.rank(),
        cfg.seed
    );
    Ok(())
}

pub fn verify(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let p = Prepared::new(cfg)?;
    let factor = match &cfg.verify.factor_file {
        Some(path) => {
            let rows = read_matrix_csv(&cfg.resolve_path(path))?;
            let width = rows[0].len();
            if rows.len() != p.space.len() || rows.iter().any(|r| r.len() != width) {
                return Err(CliError::Data(format!(
                    "factor file must be {} rows of equal width",
                    p.space.len()
                )));
            }
            let flat: Vec<f64> = rows.concat();
            WhiteNoiseKernel::from_factor(grf_core::DMatrix::from_row_slice(rows.len(), width, &flat), p.gauge)
        }
        None => p.factor()?,
    };
    let report = checks::run_all(cfg, &p, factor)?;
    write_json(&out.join("verify_report.json"), &report)?;
    for c in &report.checks {
        println!(
            "[{}] {:<28} measured {:.3e}  threshold {:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold
        );
    }
    if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Err(CliError::Data(format!("verification failed: {}", failed.join(", "))))
    }
}

/// Integrand file: exactly one of these keys.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum IntegrandSpec {
    /// Random integrand `Σ_k P_k Φ_k` in the text polynomial format.
    Components(Vec<String>),
    /// `K(x, ·)` at a node, given by coordinates (nearest node) or index.
    KernelSection(NodeRef),
    /// Function values at the nodes; must lie in the eigen-span.
    Values(Vec<f64>),
    /// Coordinates against `Φ_k`, zero-padded to the rank.
    Coefficients(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum NodeRef {
    Index(usize),
    Point(crate::config::PointSpec),
}

#[derive(Serialize)]
struct Histogram {
    edges: Vec<f64>,
    counts: Vec<usize>,
}

#[derive(Serialize)]
struct SampledSummary {
    n_draws: usize,
    seed: u64,
    mean: f64,
    variance: f64,
    min: f64,
    max: f64,
    histogram: Histogram,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum IntegrateReport {
    Deterministic {
        rkhs_norm_sq: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        node: Option<Vec<f64>>,
        symbolic_variance: f64,
        sampled: SampledSummary,
    },
    Random {
        polynomial: String,
        mean: f64,
        variance: f64,
    },
}

pub fn integrate(cfg: &RunConfig, integrand: &Path, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(integrand)
        .map_err(|e| CliError::Usage(format!("cannot read integrand {}: {e}", integrand.display())))?;
    let spec: IntegrandSpec = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!(
            "integrand must be an object with exactly one of components, kernel_section, values, coefficients: {e}"
        ))
    })?;
    if let IntegrandSpec::Components(c) = &spec {
        if c.is_empty() {
            return Err(CliError::Usage("integrand has no components".into()));
        }
    }
    let p = Prepared::new(cfg)?;
    let rank = p.dec.rank();

    let report = match spec {
        IntegrandSpec::Components(components) => {
            let u = RandomIntegrand::parse(&components).map_err(|e| CliError::Usage(e.to_string()))?;
            if u.num_vars() > rank {
                return Err(CliError::Data(format!(
                    "integrand uses {} coordinates but the rank is {rank}",
                    u.num_vars()
                )));
            }
            let delta = skorokhod_integral(&u);
            let mean = delta.expectation();
            let variance = (&delta * &delta).expectation() - mean * mean;
            println!("delta(u) = {delta}");
            println!("mean = {mean}, variance = {variance}");
            IntegrateReport::Random {
                polynomial: delta.to_string(),
                mean,
                variance,
            }
        }
        deterministic => {
            let (f, node) = deterministic_element(deterministic, &p, cfg.integrate.membership_tol)?;
            let symbolic = skorokhod_integral(&RandomIntegrand::deterministic(&f));
            let symbolic_variance = (&symbolic * &symbolic).expectation();
            let sampled = sample_wiener(&f, cfg)?;
            println!("|f|^2_Hmu = {}", f.norm_sq());
            println!(
                "sampled over {} draws: mean {:.6}, variance {:.6}",
                sampled.n_draws, sampled.mean, sampled.variance
            );
            IntegrateReport::Deterministic {
                rkhs_norm_sq: f.norm_sq(),
                node,
                symbolic_variance,
                sampled,
            }
        }
    };
    write_json(&out.join("integrate.json"), &report)
}

fn deterministic_element(
    spec: IntegrandSpec,
    p: &Prepared,
    membership_tol: f64,
) -> Result<(RkhsElement, Option<Vec<f64>>), CliError> {
    let rank = p.dec.rank();
    match spec {
        IntegrandSpec::KernelSection(node) => {
            let index = match node {
                NodeRef::Index(i) => i,
                NodeRef::Point(x) => p.space.nearest(&x.into_vec()).map_err(|e| CliError::Usage(e.to_string()))?,
            };
            let f = p.dec.kernel_section(index).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok((f, Some(p.space.point(index).to_vec())))
        }
        IntegrandSpec::Values(values) => {
            if values.len() != p.space.len() {
                return Err(CliError::Usage(format!(
                    "values has {} entries, the space has {} points",
                    values.len(),
                    p.space.len()
                )));
            }
            let f = p
                .dec
                .to_rkhs(&grf_core::FieldVector(values), membership_tol)
                .map_err(CliError::data)?;
            Ok((f, None))
        }
        IntegrandSpec::Coefficients(mut a) => {
            if a.is_empty() {
                return Err(CliError::Usage("integrand has no coefficients".into()));
            }
            if a.len() > rank {
                return Err(CliError::Data(format!(
                    "{} coefficients but the rank is {rank}",
                    a.len()
                )));
            }
            a.resize(rank, 0.0);
            Ok((RkhsElement::new(a), None))
        }
        IntegrandSpec::Components(_) => unreachable!("handled by the caller"),
    }
}

fn sample_wiener(f: &RkhsElement, cfg: &RunConfig) -> Result<SampledSummary, CliError> {
    let n_draws = cfg.integrate.n_draws;
    let values: Vec<f64> = (0..n_draws as u64)
        .map(|r| wiener_integral(f, &NoiseDraw::generate(cfg.seed, r, f.len())))
        .collect::<Result<_, _>>()
        .map_err(CliError::data)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SampledSummary {
        n_draws,
        seed: cfg.seed,
        mean,
        variance,
        min,
        max,
        histogram: histogram(&values, min, max, cfg.integrate.bins),
    })
}

fn histogram(values: &[f64], min: f64, max: f64, bins: usize) -> Histogram {
    let width = if max > min { (max - min) / bins as f64 } else { 1.0 };
    let mut counts = vec![0; bins];
    for v in values {
        let b = (((v - min) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram {
        edges: (0..=bins).map(|b| min + b as f64 * width).collect(),
        counts,
    }
}

#[derive(Serialize)]
struct TangentEntry {
    scale: usize,
    step: f64,
    r: f64,
    gram: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct TangentReport {
    t_index: usize,
    t: Vec<f64>,
    offsets: Vec<isize>,
    exponent: f64,
    entries: Vec<TangentEntry>,
}

/// For each ladder scale `s` the offsets are multiplied by `s`, the step is
/// `c = s · (ν-mass / n)` and increments are divided by `r = c^exponent`.
pub fn tangent(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let opts = cfg
        .tangent
        .as_ref()
        .ok_or_else(|| CliError::Usage("config has no `tangent` section".into()))?;
    let p = Prepared::new(cfg)?;
    let field = p.field(p.factor()?)?;
    let spacing = p.space.total_mass() / p.space.len() as f64;
    let mut entries = Vec::new();
    for &scale in &opts.ladder {
        let offsets: Vec<isize> = opts.offsets.iter().map(|o| o * scale as isize).collect();
        let step = scale as f64 * spacing;
        let r = step.powf(opts.exponent);
        let g = field
            .tangent_gram(opts.t_index, &offsets, r)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let gram: Vec<Vec<f64>> = (0..g.size()).map(|a| (0..g.size()).map(|b| g.get(a, b)).collect()).collect();
        println!(
            "scale {scale}: c = {step:.6e}, r = {r:.6e}, diag = {:?}",
            (0..g.size()).map(|a| g.get(a, a)).collect::<Vec<_>>()
        );
        entries.push(TangentEntry { scale, step, r, gram });
    }
    write_json(
        &out.join("tangent.json"),
        &TangentReport {
            t_index: opts.t_index,
            t: p.space.point(opts.t_index).to_vec(),
            offsets: opts.offsets.clone(),
            exponent: opts.exponent,
            entries,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let v = [0.0, 0.1, 0.5, 0.99, 1.0];
        let h = histogram(&v, 0.0, 1.0, 4);
        assert_eq!(h.counts, vec![2, 0, 1, 2]);
        assert_eq!(h.edges.len(), 5);
        assert_eq!(histogram(&[3.0, 3.0], 3.0, 3.0, 2).counts, vec![2, 0]);
    }

    #[test]
    fn integrand_shapes() {
        let ok = [
            r#"{"components":["x1","0"]}"#,
            r#"{"kernel_section":{"point":0.5}}"#,
            r#"{"kernel_section":{"point":[0.5]}}"#,
            r#"{"kernel_section":{"index":3}}"#,
            r#"{"values":[1,2]}"#,
            r#"{"coefficients":[1]}"#,
        ];
        for t in ok {
            serde_json::from_str::<IntegrandSpec>(t).unwrap();
        }
        let bad = [r#"{}"#, r#"{"values":[1],"coefficients":[1]}"#, r#"{"kernel_section":{}}"#, "[]"];
        for t in bad {
            assert!(serde_json::from_str::<IntegrandSpec>(t).is_err(), "{t}");
        }
    }
}
