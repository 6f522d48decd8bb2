//! Batch driver: scenario files, verification suites and machine-readable reports.
//!
//! A scenario names a trace context, modules (given by `D`, `F` or a random recipe),
//! K-theory elements over `M_N(A)` and a list of tasks. Modules are referenced from tasks
//! as `name` or `name/double/to_bounded/d_alpha=0.5`.

mod agreement;
mod library;
mod matrix;
mod model;
mod report;
mod tasks;

use std::path::Path;

pub use agreement::{agreement, Agreement, AgreementParams, MethodValue};
pub use library::{builtin, pair, parse_levels, verify, ElementPairing, PairReport, Suite, SuiteReport, LIBRARY};
pub use matrix::{complex_json, matrix_json, parse_matrix, parse_matrix_dim};
pub use model::{
    apply_steps, parse_element, parse_module, parse_scenario, scenario_from_value, Built, ElementKind, Expected,
    KElement, ModuleBase, ModuleDef, ModuleRef, RandomSpec, Resolved, Scenario, Step, TaskSpec,
};
pub use report::{run, sha256_hex, Report, RunOptions, Summary, TaskReport, Timing, DEFAULT_TOLERANCE, TOOL, VERSION};
pub use tasks::{BoundConstant, TaskKind};

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> crate::Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text).map_err(|e| match e {
        crate::Error::Parse(m) => crate::Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}
