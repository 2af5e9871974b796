//! Run configuration: JSON validated against the published schema, then
//! deserialized and resolved into core types.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use grf_core::{CovarianceKernel, CovarianceMatrix, DiscreteMeasureSpace, Gauge, DEFAULT_DROP_TOL};
use serde::Deserialize;
use serde_json::Value;

use crate::error::CliError;
use crate::io::read_matrix_csv;

/// The published configuration schema.
pub const SCHEMA: &str = include_str!("../schema/run_config.schema.json");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceSpec,
    pub kernel: KernelSpec,
    #[serde(default = "default_gauge")]
    pub gauge: String,
    #[serde(default = "default_drop_tol")]
    pub drop_tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub truncation: Option<usize>,
    #[serde(default)]
    pub sample: SampleOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default)]
    pub integrate: IntegrateOptions,
    #[serde(default)]
    pub tangent: Option<TangentOptions>,

    /// Directory of the config file; relative paths inside it resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_gauge() -> String {
    "symmetric_sqrt".to_string()
}

fn default_drop_tol() -> f64 {
    DEFAULT_DROP_TOL
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    IntervalGrid { n: usize },
    Custom { points: Vec<PointSpec>, weights: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PointSpec {
    pub fn into_vec(self) -> Vec<f64> {
        match self {
            PointSpec::Scalar(x) => vec![x],
            PointSpec::Vector(v) => v,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub matrix_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleOptions {
    pub n_draws: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { n_draws: 1000 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub duality_pairs: usize,
    pub transfer_integrands: usize,
    pub reproducing_functions: usize,
    pub n_draws: usize,
    pub factor_tol: f64,
    pub reproducing_tol: f64,
    pub se_band: f64,
    pub duality_tol: f64,
    pub exact_tol: f64,
    pub trace_tol: f64,
    pub factor_file: Option<PathBuf>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            duality_pairs: 100,
            transfer_integrands: 20,
            reproducing_functions: 10,
            n_draws: 200_000,
            factor_tol: 1e-8,
            reproducing_tol: 1e-6,
            se_band: 5.0,
            duality_tol: 1e-10,
            exact_tol: 1e-12,
            trace_tol: 1e-10,
            factor_file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrateOptions {
    pub n_draws: usize,
    pub membership_tol: f64,
    pub bins: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            n_draws: 100_000,
            membership_tol: 1e-8,
            bins: 20,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TangentOptions {
    pub t_index: usize,
    pub offsets: Vec<isize>,
    #[serde(default = "default_ladder")]
    pub ladder: Vec<usize>,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn default_ladder() -> Vec<usize> {
    vec![1]
}

fn default_exponent() -> f64 {
    0.5
}

fn validator() -> &'static jsonschema::Validator {
    static VALIDATOR: OnceLock<jsonschema::Validator> = OnceLock::new();
    VALIDATOR.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("schema is valid JSON");
        jsonschema::validator_for(&schema).expect("schema compiles")
    })
}

/// Validate raw JSON against the schema; every violation is listed.
pub fn validate_json(value: &Value) -> Result<(), CliError> {
    let errors: Vec<String> = validator()
        .iter_errors(value)
        .map(|e| format!("{} at `{}`", e, e.instance_path()))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("config violates schema:\n  {}", errors.join("\n  "))))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config is not valid JSON: {e}")))?;
        validate_json(&value)?;
        serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn space(&self) -> Result<DiscreteMeasureSpace, CliError> {
        let space = match &self.space {
            SpaceSpec::IntervalGrid { n } => DiscreteMeasureSpace::interval_grid(*n),
            SpaceSpec::Custom { points, weights } => DiscreteMeasureSpace::new(
                points.iter().cloned().map(PointSpec::into_vec).collect(),
                weights.clone(),
            ),
        };
        space.map_err(|e| CliError::Usage(format!("invalid space: {e}")))
    }

    pub fn gauge(&self) -> Result<Gauge, CliError> {
        self.gauge.parse().map_err(|e| CliError::Usage(format!("{e}")))
    }

    /// Assemble the covariance matrix, reading it from disk for `custom` kernels.
    pub fn covariance(&self, space: &DiscreteMeasureSpace) -> Result<CovarianceMatrix, CliError> {
        if self.kernel.name == "custom" {
            let path = self
                .kernel
                .matrix_file
                .as_ref()
                .ok_or_else(|| CliError::Usage("custom kernel needs `matrix_file`".into()))?;
            if !self.kernel.params.is_empty() {
                return Err(CliError::Usage("custom kernel takes no params".into()));
            }
            let rows = read_matrix_csv(&self.resolve_path(path))?;
            let c = CovarianceMatrix::from_rows(&rows).map_err(CliError::data)?;
            if c.size() != space.len() {
                return Err(CliError::Data(format!(
                    "custom matrix is {0}x{0} but the space has {1} points",
                    c.size(),
                    space.len()
                )));
            }
            return Ok(c);
        }
        if self.kernel.matrix_file.is_some() {
            return Err(CliError::Usage("`matrix_file` is only valid for the custom kernel".into()));
        }
        let kernel = CovarianceKernel::builtin(&self.kernel.name, &self.kernel.params)
            .map_err(|e| CliError::Usage(format!("{e}")))?;
        kernel.assemble(space).map_err(|e| match e {
            grf_core::Error::InvalidParameter(_) => CliError::Usage(format!("{e}")),
            other => CliError::data(other),
        })
    }
}
