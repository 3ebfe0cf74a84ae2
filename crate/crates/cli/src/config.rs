//! Experiment configuration files.

use std::path::PathBuf;

use levy_field::measure::BesovP;
use levy_field::verify::OnbCounterexampleSpec;
use levy_field::{CharacteristicsConfig, Region, SamplerConfig, TestFunction};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub characteristics: CharacteristicsConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum JumpFormat {
    #[default]
    Jsonl,
    Bin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub jump_format: JumpFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), jump_format: JumpFormat::default() }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("levy-field-out")
}

fn one() -> f64 {
    1.0
}

fn one_u64() -> u64 {
    1
}

fn permutations() -> usize {
    levy_field::verify::DEFAULT_PERMUTATIONS
}

fn level() -> f64 {
    0.01
}

fn halvings() -> usize {
    3
}

fn duality_tol() -> f64 {
    1e-6
}

fn r_max() -> f64 {
    1e6
}

fn ten_thousand() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    /// Export the jumps of the first `replicates` realizations.
    Sample {
        #[serde(default = "one_u64")]
        replicates: u64,
    },
    /// `∫_A f dM(t, ·)` for every replicate; `A` defaults to the window.
    Integrate {
        f: TestFunction,
        #[serde(default = "one")]
        t: f64,
        #[serde(default)]
        region: Option<Region>,
    },
    /// `X(t, x)` on a tensor grid.
    Sheet {
        #[serde(default = "one")]
        t: f64,
        grid: Vec<Vec<f64>>,
        #[serde(default)]
        replicate: u64,
    },
    VerifyCf {
        /// Defaults to the indicator of the window.
        #[serde(default)]
        f: Option<TestFunction>,
        #[serde(default = "one")]
        t: f64,
        u: Vec<f64>,
    },
    /// Permutation test of `M(t, A)` against `M(t, B)`.
    VerifyIndependence {
        a: Region,
        b: Region,
        #[serde(default = "one")]
        t: f64,
        #[serde(default = "permutations")]
        permutations: usize,
        #[serde(default = "level")]
        level: f64,
    },
    VerifyDuality {
        f: TestFunction,
        #[serde(default = "one")]
        t: f64,
        h0: f64,
        #[serde(default = "halvings")]
        halvings: usize,
        #[serde(default)]
        replicate: u64,
        #[serde(default = "duality_tol")]
        tolerance: f64,
    },
    CheckIntegrability {
        f: TestFunction,
        #[serde(default)]
        domain: Option<Region>,
    },
    CheckTempered {
        #[serde(default = "r_max")]
        r_max: f64,
    },
    ClassifyBesov {
        alpha: f64,
        d: usize,
        p: BesovP,
        tau: f64,
        rho: f64,
    },
    Counterexample {
        #[serde(default)]
        spec: Option<OnbCounterexampleSpec>,
        #[serde(default = "ten_thousand")]
        n: usize,
    },
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Sample { .. } => "sample",
            Task::Integrate { .. } => "integrate",
            Task::Sheet { .. } => "sheet",
            Task::VerifyCf { .. } => "verify-cf",
            Task::VerifyIndependence { .. } => "verify-independence",
            Task::VerifyDuality { .. } => "verify-duality",
            Task::CheckIntegrability { .. } => "check-integrability",
            Task::CheckTempered { .. } => "check-tempered",
            Task::ClassifyBesov { .. } => "classify-besov",
            Task::Counterexample { .. } => "counterexample",
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates; every failure here is a schema error.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        let chars = cfg.characteristics.build().map_err(|e| CliError::Schema(format!("characteristics: {e}")))?;
        cfg.sampler.validate().map_err(|e| CliError::Schema(format!("sampler: {e}")))?;
        if cfg.sampler.window.dim != chars.dim {
            return Err(CliError::Schema(format!(
                "sampler.window has dimension {}, characteristics have {}",
                cfg.sampler.window.dim, chars.dim
            )));
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
[characteristics]
dim = 1
preset = { name = "gaussian-white-noise" }
[sampler]
seed = 3
window = { dim = 1, parts = [{ lo = [0.0], hi = [1.0] }] }
"#;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert!(c.tasks.is_empty());
        assert_eq!(c.output.dir, PathBuf::from("levy-field-out"));
        assert_eq!(c.hash(), ExperimentConfig::from_toml(MINIMAL).unwrap().hash());
    }

    #[test]
    fn schema_rules() {
        let no_seed = MINIMAL.replace("seed = 3\n", "");
        assert!(matches!(ExperimentConfig::from_toml(&no_seed), Err(CliError::Schema(_))));
        let unknown = MINIMAL.replace("seed = 3", "seed = 3\nsneed = 4");
        assert!(matches!(ExperimentConfig::from_toml(&unknown), Err(CliError::Schema(_))));
        let version = MINIMAL.replace("schema_version = 1", "schema_version = 9");
        assert!(matches!(ExperimentConfig::from_toml(&version), Err(CliError::Schema(_))));
        let bad_task = format!("{MINIMAL}\n[[tasks]]\nkind = \"check-tempered\"\nr_mx = 3.0\n");
        assert!(matches!(ExperimentConfig::from_toml(&bad_task), Err(CliError::Schema(_))));
    }
}
