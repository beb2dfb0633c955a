//! Experiment configuration: a versioned JSON schema describing the
//! geometry, mesh resolution, base point, radius sweep, test functions,
//! and tolerances of a run.

use mvslab::manifold::Shape;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub geometry: GeometryConfig,
    /// Target chart edge length.
    pub mesh_h: f64,
    /// Requested base point in chart coordinates; snapped to the nearest
    /// mesh vertex at run time and reported back in the summary.
    #[serde(default)]
    pub x0: [f64; 2],
    pub radii: Vec<f64>,
    #[serde(default = "default_test_functions")]
    pub test_functions: Vec<TestFunction>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Optional ensemble/search knobs; absent fields take the documented
    /// defaults.
    #[serde(default)]
    pub harnack: Option<HarnackConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryConfig {
    Square { side: f64 },
    Disk { radius: f64 },
    SphereCap { angle: f64 },
    HyperbolicDisk { rho: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunction {
    /// u ≡ 1: averages reproduce the constant exactly.
    Constant,
    /// u = x - x0_x: discrete-harmonic in the flat chart.
    CoordinateHarmonic,
    /// u = |x - x0|²: subharmonic; averages grow with r.
    DistSquared,
    /// Per-vertex values, one decimal per line, vertex order.
    CustomFromFile { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnackConfig {
    /// Ball radius s; the Dirichlet problem is solved on B(x0, 2s).
    pub s: f64,
    pub samples: usize,
}

fn default_test_functions() -> Vec<TestFunction> {
    vec![TestFunction::Constant, TestFunction::CoordinateHarmonic, TestFunction::DistSquared]
}

impl GeometryConfig {
    pub fn shape(&self) -> Shape {
        match *self {
            GeometryConfig::Square { side } => Shape::Square { side },
            GeometryConfig::Disk { radius } => Shape::Disk { radius },
            GeometryConfig::SphereCap { angle } => Shape::SphereCap { angle },
            GeometryConfig::HyperbolicDisk { rho } => Shape::HyperbolicDisk { rho },
        }
    }
}

/// A configuration problem: reported with exit code 2, as opposed to
/// numerical failures (exit code 1).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(ConfigError(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    if !(cfg.mesh_h > 0.0) {
        return Err(ConfigError("mesh_h must be positive".into()));
    }
    if cfg.radii.is_empty() {
        return Err(ConfigError("radii must be nonempty".into()));
    }
    if cfg.radii.iter().any(|&r| !(r > 0.0)) {
        return Err(ConfigError("radii must be positive".into()));
    }
    if cfg.radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError("radii must be strictly increasing".into()));
    }
    for (name, &tol) in &cfg.tolerances {
        if !(tol > 0.0) {
            return Err(ConfigError(format!("tolerance {name} must be positive")));
        }
    }
    if let Some(h) = &cfg.harnack {
        if !(h.s > 0.0) || h.samples == 0 {
            return Err(ConfigError("harnack needs s > 0 and samples >= 1".into()));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}
