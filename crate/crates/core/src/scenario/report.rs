//! Running a scenario: tasks in parallel, results in task order, errors kept per task.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::model::{Expected, Scenario};
use super::tasks::{execute, TaskEnv};

pub const TOOL: &str = "typeii";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default tolerance for expected values and cross-method agreement.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    /// Overrides every task tolerance.
    pub tol: Option<f64>,
    pub slow: bool,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaskReport {
    pub index: usize,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub module: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
    /// SHA-256 of the task object, the run seed and the task index.
    pub inputs_digest: String,
    pub values: BTreeMap<String, Value>,
    pub bounds: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub skipped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub timing: Timing,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub scenario_digest: String,
    pub seed: u64,
    pub slow: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance_override: Option<f64>,
    pub tasks: Vec<TaskReport>,
    pub summary: Summary,
    pub pass: bool,
}

impl Report {
    /// The report with wall times zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Report {
        let mut r = self.clone();
        for t in &mut r.tasks {
            t.timing.wall_seconds = 0.0;
        }
        r
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn run_one(scenario: &Scenario, index: usize, seed: u64, opts: &RunOptions) -> TaskReport {
    let spec = &scenario.tasks[index];
    let start = Instant::now();
    let digest_input = serde_json::json!({"task": spec.raw, "seed": seed, "index": index});
    let tolerance = opts.tol.or(spec.tolerance).unwrap_or(DEFAULT_TOLERANCE);
    let mut report = TaskReport {
        index,
        kind: spec.kind.name().to_string(),
        label: spec.label.clone(),
        module: spec.raw.get("module").and_then(Value::as_str).map(str::to_string),
        element: spec.element.clone(),
        inputs_digest: sha256_hex(digest_input.to_string().as_bytes()),
        values: BTreeMap::new(),
        bounds: BTreeMap::new(),
        residuals: BTreeMap::new(),
        value: None,
        expected: spec.expected.clone(),
        deviation: None,
        tolerance,
        pass: false,
        skipped: false,
        error: None,
        notes: Vec::new(),
        timing: Timing { wall_seconds: 0.0 },
    };
    if spec.kind.is_slow() && !opts.slow {
        report.skipped = true;
        report.pass = true;
        report.notes.push("slow task; run with --slow to include it".into());
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut env = TaskEnv { scenario, spec, run_seed: seed, rng, tol: tolerance };
    match execute(&spec.kind, &mut env) {
        Ok(out) => {
            report.values = out.values;
            report.bounds = out.bounds;
            report.residuals = out.residuals;
            report.value = out.primary;
            report.notes = out.notes;
            report.pass = out.pass;
            if let Some(exp) = &spec.expected {
                match out.primary {
                    Some(v) => {
                        let dev = (v - exp.value).abs();
                        report.deviation = Some(dev);
                        if !(dev <= tolerance) {
                            report.pass = false;
                            report.notes.push(format!("failed: value {v} differs from the expected {} by {dev:.3e}", exp.value));
                        }
                    }
                    None => {
                        report.pass = false;
                        report.notes.push("failed: an expected value was given but the task produces none".into());
                    }
                }
            }
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report.timing.wall_seconds = start.elapsed().as_secs_f64();
    report
}

/// Runs every task. Task errors are recorded in the report and never stop the batch.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<Report> {
    let seed = opts.seed.or(scenario.seed).unwrap_or(0);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        if j == 0 {
            return Err(Error::Domain("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::ResourceLimit(format!("thread pool: {e}")))?;
    let tasks: Vec<TaskReport> = pool.install(|| {
        (0..scenario.tasks.len())
            .into_par_iter()
            .map(|i| run_one(scenario, i, seed, opts))
            .collect()
    });
    let mut summary = Summary { total: tasks.len(), ..Default::default() };
    for t in &tasks {
        if t.error.is_some() {
            summary.errors += 1;
        } else if t.skipped {
            summary.skipped += 1;
        } else if t.pass {
            summary.passed += 1;
        } else {
            summary.failed += 1;
        }
    }
    let pass = summary.failed == 0 && summary.errors == 0;
    Ok(Report {
        tool: TOOL.into(),
        version: VERSION.into(),
        scenario: scenario.name.clone(),
        scenario_digest: sha256_hex(scenario.source.as_bytes()),
        seed,
        slow: opts.slow,
        tolerance_override: opts.tol,
        tasks,
        summary,
        pass,
    })
}
