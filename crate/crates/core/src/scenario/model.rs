//! Scenario files: a trace context, named modules and K-theory elements, and a task list.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::characters::{check_projection, check_unitary};
use crate::error::{Error, Result};
use crate::fredholm::{random_unbounded, BoundedModule, UnboundedModule};
use crate::linalg::{identity, CMat};
use crate::semifinite::{Grading, TraceContext};

use super::matrix::parse_matrix_dim;
use super::tasks::TaskKind;

/// A step applied to a named module, written `name/double/to_bounded/d_alpha=0.5`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Double,
    ToBounded,
    DAlpha(f64),
}

impl Step {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(Step::Double),
            "to_bounded" => Ok(Step::ToBounded),
            _ => match s.strip_prefix("d_alpha=") {
                Some(a) => a
                    .parse::<f64>()
                    .map(Step::DAlpha)
                    .map_err(|_| Error::Parse(format!("bad α in construction step `{s}`"))),
                None => Err(Error::Parse(format!(
                    "unknown construction step `{s}` (expected double, to_bounded or d_alpha=<α>)"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModuleRef {
    pub name: String,
    pub steps: Vec<Step>,
}

impl ModuleRef {
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split('/');
        let name = parts.next().unwrap_or_default().trim().to_string();
        if name.is_empty() {
            return Err(Error::Parse(format!("empty module name in `{s}`")));
        }
        let steps = parts.map(|p| Step::parse(p.trim())).collect::<Result<_>>()?;
        Ok(Self { name, steps })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    #[serde(default)]
    pub graded: bool,
    #[serde(default = "default_generators")]
    pub generators: usize,
    /// Operator norm of the random `D`.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Fixed seed; without one the module is drawn from the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_generators() -> usize {
    2
}

fn default_scale() -> f64 {
    1.5
}

#[derive(Clone, Debug)]
pub enum ModuleBase {
    Unbounded(UnboundedModule),
    Bounded(BoundedModule),
    Random(RandomSpec),
}

#[derive(Clone, Debug)]
pub struct ModuleDef {
    pub name: String,
    pub base: ModuleBase,
    /// Pipelines listed under `constructions`, built by the `construct` task.
    pub constructions: Vec<Vec<Step>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Projection,
    Unitary,
}

/// A projection or unitary in `M_N(A)`, stored in the inflated ordering of the scenario context.
#[derive(Clone, Debug)]
pub struct KElement {
    pub name: String,
    pub n: usize,
    pub kind: ElementKind,
    pub matrix: CMat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub value: f64,
    /// Where the number comes from; required so that reports stay auditable.
    pub provenance: String,
}

#[derive(Clone, Debug)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub label: Option<String>,
    pub module: Option<ModuleRef>,
    pub element: Option<String>,
    pub expected: Option<Expected>,
    pub tolerance: Option<f64>,
    /// The task object as written, for the inputs digest.
    pub raw: Value,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub ctx: Arc<TraceContext>,
    pub seed: Option<u64>,
    pub modules: BTreeMap<String, ModuleDef>,
    pub ktheory: BTreeMap<String, KElement>,
    pub tasks: Vec<TaskSpec>,
    /// Canonical JSON of the file, hashed into reports.
    pub source: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    description: String,
    ctx: TraceContext,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    modules: Vec<Value>,
    #[serde(default)]
    ktheory: Vec<Value>,
    #[serde(default)]
    tasks: Vec<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModule {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    ctx: Option<TraceContext>,
    #[serde(rename = "D", default)]
    d: Option<Value>,
    #[serde(rename = "F", default)]
    f: Option<Value>,
    #[serde(default)]
    grading: Option<Vec<f64>>,
    #[serde(default)]
    generators: Vec<Value>,
    #[serde(default)]
    random: Option<RandomSpec>,
    #[serde(default)]
    constructions: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElement {
    #[serde(default)]
    name: Option<String>,
    #[serde(rename = "N", default = "one")]
    n: usize,
    #[serde(default)]
    projection: Option<Value>,
    #[serde(default)]
    unitary: Option<Value>,
}

fn one() -> usize {
    1
}

fn field<T: serde::de::DeserializeOwned>(v: Value, path: &str) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Parse(format!("{path}: {e}")))
}

/// Parses a module object. `ctx` is used when the object carries none; a module file must carry its own.
pub fn parse_module(v: &Value, path: &str, ctx: Option<&Arc<TraceContext>>) -> Result<ModuleDef> {
    let raw: RawModule = field(v.clone(), path)?;
    let name = raw.name.clone().unwrap_or_else(|| "module".into());
    let ctx = match (raw.ctx, ctx) {
        (Some(own), Some(outer)) if own != **outer => {
            return Err(Error::Parse(format!("{path}.ctx: differs from the scenario context")))
        }
        (Some(own), _) => Arc::new(own),
        (None, Some(outer)) => outer.clone(),
        (None, None) => return Err(Error::Parse(format!("{path}: missing ctx"))),
    };
    let dim = ctx.dim();
    let grading = match &raw.grading {
        Some(signs) => {
            if signs.len() != dim {
                return Err(Error::Parse(format!("{path}.grading: has {} signs, expected {dim}", signs.len())));
            }
            Some(Grading::new(signs.clone()).map_err(|e| Error::Parse(format!("{path}.grading: {e}")))?)
        }
        None => None,
    };
    let generators = raw
        .generators
        .iter()
        .enumerate()
        .map(|(k, g)| parse_matrix_dim(g, &format!("{path}.generators[{k}]"), dim))
        .collect::<Result<Vec<_>>>()?;
    let at = |what: &str, e: Error| Error::Parse(format!("{path}.{what}: {e}"));
    let base = match (raw.d, raw.f, raw.random) {
        (Some(d), None, None) => {
            let d = parse_matrix_dim(&d, &format!("{path}.D"), dim)?;
            ModuleBase::Unbounded(UnboundedModule::new(ctx.clone(), d, grading, generators).map_err(|e| at("D", e))?)
        }
        (None, Some(f), None) => {
            let f = parse_matrix_dim(&f, &format!("{path}.F"), dim)?;
            ModuleBase::Bounded(BoundedModule::new(ctx.clone(), f, grading, generators).map_err(|e| at("F", e))?)
        }
        (None, None, Some(r)) => {
            if raw.grading.is_some() || !generators.is_empty() {
                return Err(Error::Parse(format!("{path}: random modules draw their own grading and generators")));
            }
            ModuleBase::Random(r)
        }
        _ => return Err(Error::Parse(format!("{path}: give exactly one of D, F or random"))),
    };
    let constructions = raw
        .constructions
        .iter()
        .enumerate()
        .map(|(k, s)| {
            s.split('/')
                .map(|p| Step::parse(p.trim()))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| at(&format!("constructions[{k}]"), e))
        })
        .collect::<Result<_>>()?;
    Ok(ModuleDef { name, base, constructions })
}

/// Parses a K-theory element over `ctx`.
pub fn parse_element(v: &Value, path: &str, ctx: &TraceContext) -> Result<KElement> {
    let raw: RawElement = field(v.clone(), path)?;
    let big = ctx.inflate(raw.n).map_err(|e| Error::Parse(format!("{path}.N: {e}")))?;
    let (kind, m, key) = match (raw.projection, raw.unitary) {
        (Some(p), None) => (ElementKind::Projection, p, "projection"),
        (None, Some(u)) => (ElementKind::Unitary, u, "unitary"),
        _ => return Err(Error::Parse(format!("{path}: give exactly one of projection or unitary"))),
    };
    let matrix = match &m {
        Value::String(s) if s == "identity" => identity(big.dim()),
        _ => parse_matrix_dim(&m, &format!("{path}.{key}"), big.dim())?,
    };
    let checked = match kind {
        ElementKind::Projection => check_projection(&big, &matrix),
        ElementKind::Unitary => check_unitary(&big, &matrix),
    };
    checked.map_err(|e| Error::Parse(format!("{path}.{key}: {e}")))?;
    Ok(KElement { name: raw.name.unwrap_or_else(|| key.into()), n: raw.n, kind, matrix })
}

fn parse_task(v: &Value, path: &str) -> Result<TaskSpec> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Parse(format!("{path}: expected an object")))?;
    let mut rest = obj.clone();
    let mut take = |k: &str| rest.remove(k);
    let label = take("label").map(|x| field::<String>(x, &format!("{path}.label"))).transpose()?;
    let module = take("module")
        .map(|x| field::<String>(x, &format!("{path}.module")))
        .transpose()?
        .map(|s| ModuleRef::parse(&s).map_err(|e| Error::Parse(format!("{path}.module: {e}"))))
        .transpose()?;
    let element = take("element").map(|x| field::<String>(x, &format!("{path}.element"))).transpose()?;
    let expected = take("expected").map(|x| field::<Expected>(x, &format!("{path}.expected"))).transpose()?;
    let tolerance = take("tolerance").map(|x| field::<f64>(x, &format!("{path}.tolerance"))).transpose()?;
    if !rest.contains_key("kind") {
        return Err(Error::Parse(format!("{path}: missing `kind` (one of {})", TaskKind::NAMES.join(", "))));
    }
    let kind: TaskKind = serde_json::from_value(Value::Object(rest)).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown variant") {
            Error::Parse(format!("{path}.kind: unknown task kind; valid kinds are {}", TaskKind::NAMES.join(", ")))
        } else {
            Error::Parse(format!("{path}: {msg}"))
        }
    })?;
    if let Some(t) = tolerance {
        if !(t >= 0.0) {
            return Err(Error::Parse(format!("{path}.tolerance: must be non-negative")));
        }
    }
    let (needs_module, needs_element) = kind.needs();
    if needs_module && module.is_none() {
        return Err(Error::Parse(format!("{path}: task `{}` needs a module", kind.name())));
    }
    if needs_element && element.is_none() {
        return Err(Error::Parse(format!("{path}: task `{}` needs an element", kind.name())));
    }
    Ok(TaskSpec { kind, label, module, element, expected, tolerance, raw: v.clone() })
}

/// Parses and validates scenario JSON text. Errors carry the line and column of syntax
/// problems and the field path of semantic ones.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario JSON: {e}")))?;
    scenario_from_value(&value)
}

pub fn scenario_from_value(value: &Value) -> Result<Scenario> {
    let raw: RawScenario = field(value.clone(), "scenario")?;
    let ctx = Arc::new(raw.ctx);
    let mut modules = BTreeMap::new();
    for (i, m) in raw.modules.iter().enumerate() {
        let path = format!("modules[{i}]");
        let def = parse_module(m, &path, Some(&ctx))?;
        if modules.contains_key(&def.name) {
            return Err(Error::Parse(format!("{path}.name: duplicate module `{}`", def.name)));
        }
        modules.insert(def.name.clone(), def);
    }
    let mut ktheory = BTreeMap::new();
    for (i, k) in raw.ktheory.iter().enumerate() {
        let path = format!("ktheory[{i}]");
        let el = parse_element(k, &path, &ctx)?;
        if ktheory.contains_key(&el.name) {
            return Err(Error::Parse(format!("{path}.name: duplicate element `{}`", el.name)));
        }
        ktheory.insert(el.name.clone(), el);
    }
    let mut tasks = Vec::with_capacity(raw.tasks.len());
    for (i, t) in raw.tasks.iter().enumerate() {
        let path = format!("tasks[{i}]");
        let spec = parse_task(t, &path)?;
        if let Some(m) = &spec.module {
            if !modules.contains_key(&m.name) {
                return Err(Error::Parse(format!("{path}.module: no module named `{}`", m.name)));
            }
        }
        if let Some(e) = &spec.element {
            if !ktheory.contains_key(e) {
                return Err(Error::Parse(format!("{path}.element: no K-theory element named `{e}`")));
            }
        }
        tasks.push(spec);
    }
    Ok(Scenario {
        name: raw.name,
        description: raw.description,
        ctx,
        seed: raw.seed,
        modules,
        ktheory,
        tasks,
        source: serde_json::to_string(value)?,
    })
}

/// A module after its construction steps, with the contexts it was doubled from.
#[derive(Clone, Debug)]
pub enum Built {
    Unbounded(UnboundedModule),
    Bounded(BoundedModule),
}

#[derive(Clone, Debug)]
pub struct Resolved {
    pub built: Built,
    /// Contexts before each doubling, oldest first; elements are carried along as `p ⊕ 0` and `u ⊕ 1`.
    pub doublings: Vec<Arc<TraceContext>>,
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn alternating(dim: usize) -> Grading {
    Grading::new((0..dim).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect()).expect("±1 signs")
}

impl ModuleDef {
    /// The base module; random ones are drawn from their own seed or from `run_seed` and the name.
    pub fn base(&self, ctx: &Arc<TraceContext>, run_seed: u64) -> Result<Built> {
        Ok(match &self.base {
            ModuleBase::Unbounded(m) => Built::Unbounded(m.clone()),
            ModuleBase::Bounded(m) => Built::Bounded(m.clone()),
            ModuleBase::Random(r) => {
                let seed = r.seed.unwrap_or(run_seed ^ fnv(&self.name));
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let grading = r.graded.then(|| alternating(ctx.dim()));
                Built::Unbounded(random_unbounded(ctx.clone(), grading, r.generators, r.scale, &mut rng))
            }
        })
    }
}

pub fn apply_steps(mut r: Resolved, steps: &[Step]) -> Result<Resolved> {
    for step in steps {
        r.built = match (step, r.built) {
            (Step::Double, Built::Unbounded(m)) => {
                r.doublings.push(m.ctx.clone());
                Built::Unbounded(m.doubled())
            }
            (Step::Double, Built::Bounded(_)) => {
                return Err(Error::Domain("double applies to unbounded modules".into()))
            }
            (Step::ToBounded, Built::Unbounded(m)) => Built::Bounded(m.to_bounded()?),
            (Step::ToBounded, b @ Built::Bounded(_)) => b,
            (Step::DAlpha(a), Built::Unbounded(m)) => Built::Unbounded(m.d_alpha(*a)?),
            (Step::DAlpha(_), Built::Bounded(_)) => {
                return Err(Error::Domain("d_alpha applies to unbounded modules".into()))
            }
        };
    }
    Ok(r)
}

impl Resolved {
    pub fn is_graded(&self) -> bool {
        match &self.built {
            Built::Unbounded(m) => m.is_graded(),
            Built::Bounded(m) => m.is_graded(),
        }
    }

    /// The module with `D`; a bounded module is read as `D = F`.
    pub fn unbounded(&self) -> UnboundedModule {
        match &self.built {
            Built::Unbounded(m) => m.clone(),
            Built::Bounded(b) => UnboundedModule {
                ctx: b.ctx.clone(),
                d: b.f.clone(),
                grading: b.grading.clone(),
                generators: b.generators.clone(),
            },
        }
    }

    /// The module with `F`, taking the phase of `D` when needed.
    pub fn bounded(&self) -> Result<BoundedModule> {
        match &self.built {
            Built::Unbounded(m) => m.to_bounded(),
            Built::Bounded(b) => Ok(b.clone()),
        }
    }

    /// Carries an element of the scenario context through the doublings.
    pub fn embed(&self, el: &KElement) -> Result<CMat> {
        let mut x = el.matrix.clone();
        for ctx in &self.doublings {
            let grid = ctx.extract_grid(&x, el.n)?;
            let one = ctx.identity();
            let embedded: Vec<Vec<CMat>> = grid
                .iter()
                .enumerate()
                .map(|(k, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(l, a)| match el.kind {
                            ElementKind::Projection => ctx.embed_first_copy(a),
                            ElementKind::Unitary if k == l => {
                                ctx.embed_first_copy(&(a - &one)) + ctx.doubled().identity()
                            }
                            ElementKind::Unitary => ctx.embed_first_copy(a),
                        })
                        .collect()
                })
                .collect();
            x = ctx.doubled().inflate_grid(&embedded)?;
        }
        Ok(x)
    }
}

impl Scenario {
    pub fn resolve(&self, r: &ModuleRef, run_seed: u64) -> Result<Resolved> {
        let def = self
            .modules
            .get(&r.name)
            .ok_or_else(|| Error::Parse(format!("no module named `{}`", r.name)))?;
        let base = Resolved { built: def.base(&self.ctx, run_seed)?, doublings: Vec::new() };
        apply_steps(base, &r.steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({
            "name": "minimal",
            "ctx": {"blocks": [[2, 1.0]]},
            "modules": [{"name": "m", "D": [[0, 1], [1, 0]], "grading": [1, -1]}],
            "ktheory": [{"name": "p", "projection": [[1, 0], [0, 0]]}],
            "tasks": [{"kind": "pairing_kernel", "module": "m", "element": "p",
                       "expected": {"value": 1.0, "provenance": "kernel of [[0,1],[1,0]] restricted"}}]
        })
    }

    #[test]
    fn minimal_file_loads() {
        let s = scenario_from_value(&minimal()).unwrap();
        assert_eq!(s.modules.len(), 1);
        assert_eq!(s.tasks.len(), 1);
        assert_eq!(s.tasks[0].expected.as_ref().unwrap().value, 1.0);
    }

    #[test]
    fn unknown_kind_lists_valid_kinds() {
        let mut v = minimal();
        v["tasks"][0]["kind"] = json!("frobnicate");
        let e = scenario_from_value(&v).unwrap_err().to_string();
        assert!(e.contains("tasks[0].kind"), "{e}");
        assert!(e.contains("pairing_kernel") && e.contains("jlo_cocycle"), "{e}");
    }

    #[test]
    fn ragged_matrix_names_the_field() {
        let mut v = minimal();
        v["modules"][0]["D"] = json!([[0, 1], [1, 0, 0]]);
        let e = scenario_from_value(&v).unwrap_err().to_string();
        assert!(e.contains("modules[0].D: row 1 has 3 entries, expected 2"), "{e}");
    }

    #[test]
    fn provenance_is_required() {
        let mut v = minimal();
        v["tasks"][0]["expected"] = json!({"value": 1.0});
        let e = scenario_from_value(&v).unwrap_err().to_string();
        assert!(e.contains("tasks[0].expected") && e.contains("provenance"), "{e}");
    }

    #[test]
    fn dangling_references_are_rejected() {
        let mut v = minimal();
        v["tasks"][0]["module"] = json!("nope/double");
        assert!(scenario_from_value(&v).unwrap_err().to_string().contains("no module named `nope`"));
        let mut v = minimal();
        v["tasks"][0]["module"] = json!("m/triple");
        assert!(scenario_from_value(&v).unwrap_err().to_string().contains("unknown construction step"));
    }

    #[test]
    fn non_projection_is_rejected() {
        let mut v = minimal();
        v["ktheory"][0]["projection"] = json!([[1, 1], [0, 0]]);
        assert!(scenario_from_value(&v).unwrap_err().to_string().contains("ktheory[0].projection"));
    }

    #[test]
    fn embedding_survives_inflation() {
        let ctx = Arc::new(TraceContext::new(&[(1, 0.5), (2, 1.0)]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid: Vec<Vec<CMat>> = (0..2)
            .map(|_| (0..2).map(|_| crate::cyclic::random_element(&ctx, None, &mut rng)).collect())
            .collect();
        let x = ctx.inflate_grid(&grid).unwrap();
        let back = ctx.extract_grid(&x, 2).unwrap();
        for (r, s) in grid.iter().zip(&back) {
            for (a, b) in r.iter().zip(s) {
                assert_eq!(a, b);
            }
        }
    }
}
