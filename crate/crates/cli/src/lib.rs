//! Batch runner behind the `levy-field` binary.

pub mod config;
pub mod run;

use std::fmt::Write as _;

use levy_field::measure::{control_measure, stationarity_check, tempered_test, Stationarity, Temperedness};
use levy_field::{Preset, Region};

pub use config::{ExperimentConfig, JumpFormat, Task};
pub use run::{run_config, RunOutcome};

/// Overrides `output.dir` of every config.
pub const OUTPUT_DIR_ENV: &str = "LEVY_FIELD_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Schema(String),
    #[error("task {task} failed: {message}")]
    Task { task: String, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Task { .. } | CliError::Io(_) => 1,
        }
    }
}

/// Human-readable summary of a preset in dimension `dim`.
pub fn describe(preset: &str, dim: usize) -> Result<String, CliError> {
    let p = Preset::parse(preset).map_err(|e| CliError::Schema(e.to_string()))?;
    let chars = p.build(dim).map_err(|e| CliError::Schema(e.to_string()))?;
    let task = |e: levy_field::Error| CliError::Task { task: "describe".into(), message: e.to_string() };
    let unit = control_measure(&chars, &Region::unit(dim)).map_err(task)?;
    let mut s = String::new();
    let _ = writeln!(s, "preset: {}", p.label());
    let _ = writeln!(s, "characteristics: {}", chars.describe());
    let _ = writeln!(s, "control measure of the unit box: {}", unit.value);
    let stat = match stationarity_check(&chars) {
        Stationarity::Stationary { .. } => "stationary".to_string(),
        Stationarity::NonStationary { witness } => {
            format!("not stationary ({} differs at {:?})", witness.component, witness.x)
        }
    };
    let _ = writeln!(s, "stationarity: {stat}");
    let temp = match tempered_test(&chars, 1e6).map_err(task)? {
        Temperedness::Tempered { r } => format!("tempered (r = {r})"),
        Temperedness::NotTemperedUpTo { r_max } => format!("no weight found up to r = {r_max}"),
        Temperedness::Indeterminate { r, evidence } => format!("indeterminate at r = {r}: {evidence}"),
    };
    let _ = writeln!(s, "temperedness: {temp}");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn describe_presets() {
        let s = describe("balan-stable(1.5,0.5,0.5)", 1).unwrap();
        assert!(s.contains("control measure of the unit box: 4\n"), "{s}");
        assert!(s.contains("stationarity: stationary\n"));
        assert!(s.contains("temperedness: tempered"));
        let g = describe("gaussian-white-noise", 2).unwrap();
        assert!(g.contains("γ = 0; Σ = leb; ν = 0"), "{g}");
        assert_eq!(describe("no-such-thing", 1).unwrap_err().exit_code(), 2);
    }
}
