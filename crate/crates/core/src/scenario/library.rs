//! The built-in scenario library, verification suites and the standalone pairing command.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

use super::agreement::{agreement, Agreement, AgreementParams};
use super::model::{parse_element, parse_module, parse_scenario, KElement, Resolved, Scenario};
use super::report::{run, sha256_hex, Report, RunOptions, DEFAULT_TOLERANCE, TOOL, VERSION};

/// `(name, JSON text)` of every built-in scenario.
pub const LIBRARY: &[(&str, &str)] = &[
    ("type_i_worked", include_str!("../../../../scenarios/type_i_worked.json")),
    ("fractional", include_str!("../../../../scenarios/fractional.json")),
    ("odd_consistency", include_str!("../../../../scenarios/odd_consistency.json")),
    ("complex", include_str!("../../../../scenarios/complex.json")),
    ("cocycles", include_str!("../../../../scenarios/cocycles.json")),
    ("transgressions", include_str!("../../../../scenarios/transgressions.json")),
    ("reduction", include_str!("../../../../scenarios/reduction.json")),
    ("appendix", include_str!("../../../../scenarios/appendix.json")),
];

pub fn builtin(name: &str) -> Result<Scenario> {
    let (_, text) = LIBRARY
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Parse(format!("no built-in scenario `{name}`")))?;
    parse_scenario(text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Complex,
    Cocycles,
    Indices,
    Transgressions,
    Reduction,
    Appendix,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = ["complex", "cocycles", "indices", "transgressions", "reduction", "appendix", "all"];

    pub fn scenarios(self) -> Vec<&'static str> {
        match self {
            Suite::Complex => vec!["complex"],
            Suite::Cocycles => vec!["cocycles"],
            Suite::Indices => vec!["type_i_worked", "fractional", "odd_consistency"],
            Suite::Transgressions => vec!["transgressions"],
            Suite::Reduction => vec!["reduction"],
            Suite::Appendix => vec!["appendix"],
            Suite::All => LIBRARY.iter().map(|(n, _)| *n).collect(),
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "complex" => Suite::Complex,
            "cocycles" => Suite::Cocycles,
            "indices" => Suite::Indices,
            "transgressions" => Suite::Transgressions,
            "reduction" => Suite::Reduction,
            "appendix" => Suite::Appendix,
            "all" => Suite::All,
            _ => return Err(Error::Parse(format!("unknown suite `{s}`; valid suites are {}", Suite::NAMES.join(", ")))),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub tool: String,
    pub version: String,
    pub suite: Suite,
    pub reports: Vec<Report>,
    pub pass: bool,
}

/// Runs the built-in scenarios of a suite with fixed seeds (overridable).
pub fn verify(suite: Suite, opts: &RunOptions) -> Result<SuiteReport> {
    let reports = suite
        .scenarios()
        .into_iter()
        .map(|name| run(&builtin(name)?, opts))
        .collect::<Result<Vec<_>>>()?;
    let pass = reports.iter().all(|r| r.pass);
    Ok(SuiteReport { tool: TOOL.into(), version: VERSION.into(), suite, reports, pass })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElementPairing {
    pub element: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Agreement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairReport {
    pub tool: String,
    pub version: String,
    pub module_digest: String,
    pub ktheory_digest: String,
    pub levels: (usize, usize),
    pub tolerance: f64,
    pub pairings: Vec<ElementPairing>,
    pub pass: bool,
}

/// Parses `a..b` (inclusive of `b`) or a single level.
pub fn parse_levels(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parse(format!("levels `{s}` must look like 0..6"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim_start_matches('=').trim()),
        None => (s.trim(), s.trim()),
    };
    let (a, b) = (a.parse::<usize>().map_err(|_| bad())?, b.parse::<usize>().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn elements_from(v: &Value, ctx: &crate::semifinite::TraceContext) -> Result<Vec<KElement>> {
    let list = match v {
        Value::Array(xs) => xs.clone(),
        Value::Object(o) if o.contains_key("ktheory") => o["ktheory"]
            .as_array()
            .cloned()
            .ok_or_else(|| Error::Parse("ktheory: expected an array".into()))?,
        Value::Object(_) => vec![v.clone()],
        _ => return Err(Error::Parse("ktheory: expected an element, an array or {\"ktheory\": [...]}".into())),
    };
    list.iter()
        .enumerate()
        .map(|(i, x)| parse_element(x, &format!("ktheory[{i}]"), ctx))
        .collect()
}

/// Every applicable pairing of a module file with each element of a K-theory file.
pub fn pair(module: &Value, ktheory: &Value, levels: (usize, usize), tol: Option<f64>) -> Result<PairReport> {
    let def = parse_module(module, "module", None)?;
    let ctx = match module.get("ctx") {
        Some(c) => std::sync::Arc::new(serde_json::from_value(c.clone()).map_err(|e| Error::Parse(format!("module.ctx: {e}")))?),
        None => return Err(Error::Parse("module: missing ctx".into())),
    };
    let elements = elements_from(ktheory, &ctx)?;
    let base = Resolved { built: def.base(&ctx, 0)?, doublings: Vec::new() };
    let r = super::model::apply_steps(base, &def.constructions.first().cloned().unwrap_or_default())?;
    let tol = tol.unwrap_or(DEFAULT_TOLERANCE);
    let pairings: Vec<ElementPairing> = elements
        .iter()
        .map(|el| {
            let parity = match el.kind {
                super::model::ElementKind::Projection => 0,
                super::model::ElementKind::Unitary => 1,
            };
            let lv: Vec<usize> = (levels.0..=levels.1).filter(|l| l % 2 == parity).collect();
            let params = AgreementParams { levels: Some(lv), max_level: levels.1, ..Default::default() };
            match agreement(&r, el, &params, tol) {
                Ok(a) => ElementPairing { element: el.name.clone(), pass: a.pass, agreement: Some(a), error: None },
                Err(e) => ElementPairing { element: el.name.clone(), agreement: None, error: Some(e.to_string()), pass: false },
            }
        })
        .collect();
    let pass = pairings.iter().all(|p| p.pass);
    Ok(PairReport {
        tool: TOOL.into(),
        version: VERSION.into(),
        module_digest: sha256_hex(module.to_string().as_bytes()),
        ktheory_digest: sha256_hex(ktheory.to_string().as_bytes()),
        levels,
        tolerance: tol,
        pairings,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses() {
        for (name, _) in LIBRARY {
            builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn levels_syntax() {
        assert_eq!(parse_levels("0..6").unwrap(), (0, 6));
        assert_eq!(parse_levels("1..=5").unwrap(), (1, 5));
        assert_eq!(parse_levels("3").unwrap(), (3, 3));
        assert!(parse_levels("6..0").is_err());
        assert!(parse_levels("a..b").is_err());
    }

    #[test]
    fn suite_names_round_trip() {
        for n in Suite::NAMES {
            let s: Suite = n.parse().unwrap();
            assert_eq!(serde_json::to_value(s).unwrap(), Value::String(n.to_string()));
        }
        assert!("nope".parse::<Suite>().unwrap_err().to_string().contains("complex"));
    }
}
