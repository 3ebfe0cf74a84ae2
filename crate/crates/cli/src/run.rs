//! Task execution and artifact writing.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use levy_field::export::{write_bin, write_jsonl};
use levy_field::integrator::IntegralPlan;
use levy_field::measure::{besov_classify, lm_membership, tempered_test};
use levy_field::sampler::{map_replicates, sample_field, sample_replicate};
use levy_field::sheets::duality_study;
use levy_field::verify::{
    cf_match_test, cf_rows_csv, independence_test, onb_counterexample, reports_jsonl, suite_failed, summary_table,
    Decision, VerificationReport,
};
use levy_field::{sheet_from_field, Characteristics, TestFunction};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, JumpFormat, Task};
use crate::CliError;

/// Observed convergence order a duality study must reach.
const DUALITY_MIN_ORDER: f64 = 1.8;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub artifacts: Vec<String>,
    pub reports: Vec<VerificationReport>,
    /// `(task label, message)` for tasks that returned an error.
    pub errors: Vec<(String, String)>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if !self.errors.is_empty() || suite_failed(&self.reports) {
            1
        } else {
            0
        }
    }
}

#[derive(Debug, Default)]
struct TaskOutput {
    files: Vec<(String, Vec<u8>)>,
    reports: Vec<VerificationReport>,
}

#[derive(Serialize)]
struct ArtifactEntry {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    config_sha256: String,
    seed: u64,
    versions: [(&'a str, &'a str); 2],
    tasks: Vec<&'a str>,
    artifacts: Vec<ArtifactEntry>,
    failed_tasks: Vec<&'a str>,
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s.into_bytes()
}

/// Runs every task; tasks execute concurrently and their artifacts are written
/// in declaration order.
pub fn run_config(
    cfg: &ExperimentConfig,
    dir_override: Option<&Path>,
    format_override: Option<JumpFormat>,
) -> Result<RunOutcome, CliError> {
    let chars = cfg.characteristics.build().map_err(|e| CliError::Schema(format!("characteristics: {e}")))?;
    let dir = dir_override.map_or_else(|| cfg.output.dir.clone(), Path::to_path_buf);
    std::fs::create_dir_all(&dir)?;
    let format = format_override.unwrap_or(cfg.output.jump_format);
    let results: Vec<_> = cfg
        .tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| run_task(&chars, cfg, task, format).map_err(|e| (format!("{i:02}-{}", task.kind()), e)))
        .collect();

    let mut artifacts = Vec::new();
    let mut entries = Vec::new();
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for (i, (task, res)) in cfg.tasks.iter().zip(results).enumerate() {
        match res {
            Ok(out) => {
                for (suffix, bytes) in out.files {
                    let name = format!("{i:02}-{}{suffix}", task.kind());
                    write_atomic(&dir, &name, &bytes)?;
                    entries.push(ArtifactEntry {
                        file: name.clone(),
                        bytes: bytes.len(),
                        sha256: hex::encode(Sha256::digest(&bytes)),
                    });
                    artifacts.push(name);
                }
                reports.extend(out.reports);
            }
            Err((label, e)) => errors.push((label, e.to_string())),
        }
    }
    if !reports.is_empty() {
        for (name, bytes) in [
            ("reports.jsonl", reports_jsonl(&reports).into_bytes()),
            ("summary.txt", summary_table(&reports).into_bytes()),
        ] {
            write_atomic(&dir, name, &bytes)?;
            entries.push(ArtifactEntry { file: name.into(), bytes: bytes.len(), sha256: hex::encode(Sha256::digest(&bytes)) });
            artifacts.push(name.into());
        }
    }
    let manifest = Manifest {
        schema_version: cfg.schema_version,
        config_sha256: cfg.hash(),
        seed: cfg.sampler.seed,
        versions: [("levy-field-core", levy_field::VERSION), ("levy-field-cli", env!("CARGO_PKG_VERSION"))],
        tasks: cfg.tasks.iter().map(Task::kind).collect(),
        artifacts: entries,
        failed_tasks: errors.iter().map(|(l, _)| l.as_str()).collect(),
    };
    write_atomic(&dir, "manifest.json", &json_bytes(&manifest))?;
    artifacts.push("manifest.json".into());
    Ok(RunOutcome { dir, artifacts, reports, errors })
}

fn csv_line(values: &[f64]) -> String {
    let cols: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    cols.join(",") + "\n"
}

fn run_task(chars: &Characteristics, cfg: &ExperimentConfig, task: &Task, format: JumpFormat) -> levy_field::Result<TaskOutput> {
    let sampler = &cfg.sampler;
    let mut out = TaskOutput::default();
    match task {
        Task::Sample { replicates } => {
            for r in 0..*replicates {
                let real = sample_replicate(chars, sampler, r)?;
                let mut buf = Vec::new();
                let ext = match format {
                    JumpFormat::Jsonl => {
                        write_jsonl(&real, &mut buf)?;
                        "jsonl"
                    }
                    JumpFormat::Bin => {
                        write_bin(&real, &mut buf)?;
                        "bin"
                    }
                };
                out.files.push((format!("-r{r}.{ext}"), buf));
            }
        }
        Task::Integrate { f, t, region } => {
            let region = region.clone().unwrap_or_else(|| sampler.window.clone());
            let probe = sample_field(chars, sampler)?;
            let plan = IntegralPlan::new(&probe, f, *t, &region)?;
            let values = map_replicates(chars, sampler, |r| plan.evaluate(r))?;
            let mut s = String::from("replicate,value,net_drift,gaussian,jumps,error\n");
            for (r, v) in values.iter().enumerate() {
                let _ = write!(s, "{r},{}", csv_line(&[v.value, v.net_drift, v.gaussian, v.jumps, v.error]));
            }
            out.files.push((".csv".into(), s.into_bytes()));
        }
        Task::Sheet { t, grid, replicate } => {
            let sheet = sheet_from_field(sample_replicate(chars, sampler, *replicate)?);
            out.files.push((".csv".into(), sheet.grid_csv(*t, grid)?.into_bytes()));
        }
        Task::VerifyCf { f, t, u } => {
            let f = f.clone().unwrap_or_else(|| TestFunction::indicator(sampler.window.clone()));
            let (report, rows) = cf_match_test(chars, &f, *t, u, sampler)?;
            out.files.push((".csv".into(), cf_rows_csv(&rows).into_bytes()));
            out.reports.push(report);
        }
        Task::VerifyIndependence { a, b, t, permutations, level } => {
            if !a.disjoint_from(b) {
                return Err(levy_field::Error::Precondition("regions A and B must be disjoint".into()));
            }
            let pairs = map_replicates(chars, sampler, |r| Ok((r.evaluate(*t, a)?, r.evaluate(*t, b)?)))?;
            let mut s = String::from("m_a,m_b\n");
            for (x, y) in &pairs {
                s.push_str(&csv_line(&[*x, *y]));
            }
            out.files.push((".csv".into(), s.into_bytes()));
            out.reports.push(independence_test("independence", &pairs, *permutations, *level, sampler.seed)?);
        }
        Task::VerifyDuality { f, t, h0, halvings, replicate, tolerance } => {
            let real = sample_replicate(chars, sampler, *replicate)?;
            let study = duality_study(&real, f, *t, *h0, *halvings)?;
            let mut s = String::from("h,cells,lhs,rhs,error,order\n");
            for (k, r) in study.results.iter().enumerate() {
                let order = if k == 0 { f64::NAN } else { study.orders[k - 1] };
                let _ = write!(s, "{:?},{},{}", r.h, r.cells, csv_line(&[r.lhs, r.rhs, r.error, order]));
            }
            out.files.push((".csv".into(), s.into_bytes()));
            let last = study.results.last().expect("at least one mesh").error;
            let min_order = study.orders.iter().copied().fold(f64::INFINITY, f64::min);
            let ok = last <= *tolerance && (study.orders.is_empty() || min_order >= DUALITY_MIN_ORDER);
            out.reports.push(VerificationReport {
                test: "duality".into(),
                statistic: last,
                threshold: *tolerance,
                decision: if ok { Decision::Pass } else { Decision::Fail },
                sample_size: 1,
                seed: Some(sampler.seed),
                target: format!("finest-mesh error; minimum observed order {min_order:.3}"),
                control: false,
            });
        }
        Task::CheckIntegrability { f, domain } => {
            out.files.push((".json".into(), json_bytes(&lm_membership(chars, f, domain.as_ref())?)));
        }
        Task::CheckTempered { r_max } => {
            out.files.push((".json".into(), json_bytes(&tempered_test(chars, *r_max)?)));
        }
        Task::ClassifyBesov { alpha, d, p, tau, rho } => {
            let class = besov_classify(*alpha, *d, *p, *tau, *rho)?;
            let v = serde_json::json!({ "alpha": alpha, "d": d, "p": p, "tau": tau, "rho": rho, "class": class });
            out.files.push((".json".into(), json_bytes(&v)));
        }
        Task::Counterexample { spec, n } => {
            let spec = spec.clone().unwrap_or_default();
            out.reports.push(onb_counterexample(&spec, *n, sampler.seed)?.as_control());
        }
    }
    Ok(out)
}
