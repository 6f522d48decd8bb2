//! Task kinds and their evaluation. Each task produces named values, bounds and residuals
//! and a pass flag; errors are returned to the runner, which records them per task.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::characters::{
    cobound_check, connes_cocycle_check, connes_transgression_check, d_alpha_transgression_check, duhamel_check,
    getzler_check, jlo_cocycle_check, lemma_misc_check, level2aux_check, psi_identities_check, reduction_check,
    scalar_factor_check, scaling_limit_report, variation_check, HeatKernel, IdentityReport, LemmaVariant,
    SlopeReport, SCALING_GRID,
};
use crate::cyclic::{bicomplex_check, canonicalize, random_chain, random_element, Chain};
use crate::error::{Error, Result};
use crate::fredholm::{
    ef_index_kernel, ef_index_parametrix, interpolation_bound_check, log_commutator_check, log_constants,
    perturbation_bound_check, pseudo_parametrix, random_odd_hermitian, random_unbounded, UnboundedModule,
};
use crate::linalg::{op_norm, random_complex, random_hermitian, CMat, C64};
use crate::quadrature::QuadratureSpec;
use crate::semifinite::{
    holder_check, mu_identity_defect, mu_monotone_check, mu_product_check, ptheta_check, str_norm_check,
    tau_integral_defect, BoundCheck, Grading, Operator, Parity, TraceContext, THETA_GRID,
};

use super::agreement::{agreement, AgreementParams};
use super::matrix::parse_matrix_dim;
use super::model::{apply_steps, Built, ElementKind, KElement, Resolved, Scenario, Step, TaskSpec};

fn d_levels() -> Vec<usize> {
    vec![0, 1, 2]
}
fn d_chains() -> usize {
    3
}
fn d_h0() -> f64 {
    0.02
}
fn d_powers() -> Vec<u32> {
    vec![1, 3]
}
fn d_times() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn d_six() -> usize {
    6
}
fn d_instances() -> usize {
    20
}
fn d_kernel_tol() -> f64 {
    crate::fredholm::DEFAULT_KERNEL_TOL
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundConstant {
    /// The constant as displayed with the inequality.
    #[default]
    Displayed,
    /// The constant this crate proves and certifies.
    Certified,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskKind {
    Validate {
        #[serde(default)]
        p_grid: Vec<f64>,
    },
    Construct {},
    EfIndexKernel {
        e: Value,
        f: Value,
        t: Value,
        #[serde(default = "d_kernel_tol")]
        tol: f64,
    },
    EfIndexParametrix {
        e: Value,
        f: Value,
        t: Value,
        #[serde(default = "d_powers")]
        m: Vec<u32>,
    },
    PairingKernel {},
    PairingParametrix {
        #[serde(default = "d_powers")]
        m: Vec<u32>,
    },
    MckeanSinger {
        #[serde(default = "d_times")]
        t: Vec<f64>,
    },
    PairingConnes {
        #[serde(default)]
        levels: Option<Vec<usize>>,
    },
    PairingJlo {
        #[serde(default = "d_six")]
        max_level: usize,
    },
    SpectralFlow {},
    IndexAgreement {
        #[serde(default)]
        levels: Option<Vec<usize>>,
        #[serde(default = "d_powers")]
        m: Vec<u32>,
        #[serde(default = "d_times")]
        t: Vec<f64>,
        #[serde(default = "d_six")]
        max_level: usize,
    },
    Doubling {
        #[serde(default = "d_six")]
        max_level: usize,
    },
    AlphaEndpoint {},
    Bicomplex {
        #[serde(default = "d_bicomplex_chains")]
        chains: usize,
        #[serde(default = "d_five")]
        max_level: usize,
        #[serde(default = "d_ten")]
        cochains: usize,
        #[serde(default = "d_two")]
        terms: usize,
    },
    HeatMethods {
        #[serde(default = "d_fifty")]
        instances: usize,
        #[serde(default = "d_three")]
        max_level: usize,
        #[serde(default = "d_six")]
        max_dim: usize,
        #[serde(default = "d_samples")]
        samples: usize,
        #[serde(default = "d_quad_tol")]
        quad_tol: f64,
    },
    JloCocycle {
        #[serde(default = "d_levels")]
        levels: Vec<usize>,
        #[serde(default = "d_chains")]
        chains: usize,
    },
    ConnesCocycle {
        #[serde(default = "d_levels")]
        levels: Vec<usize>,
        #[serde(default = "d_chains")]
        chains: usize,
    },
    Variation {
        #[serde(default = "d_levels")]
        levels: Vec<usize>,
        #[serde(default = "d_chains")]
        chains: usize,
    },
    Level2aux {
        #[serde(default = "d_levels")]
        levels: Vec<usize>,
        #[serde(default = "d_chains")]
        chains: usize,
    },
    Cobound {
        #[serde(default = "d_levels")]
        levels: Vec<usize>,
        #[serde(default = "d_chains")]
        chains: usize,
        #[serde(default = "d_h0")]
        h0: f64,
    },
    Duhamel {
        /// Numbers of factors in the brackets.
        #[serde(default = "d_factor_counts")]
        factors: Vec<usize>,
        #[serde(default = "d_h0")]
        h0: f64,
    },
    ConnesTransgression {
        #[serde(default = "d_levels")]
        levels: Vec<usize>,
        #[serde(default = "d_chains")]
        chains: usize,
        #[serde(default = "d_h0")]
        h0: f64,
    },
    Lemma {
        #[serde(default = "d_four")]
        factors: usize,
    },
    ScalarFactor {
        #[serde(default = "d_scalar_levels")]
        levels: Vec<usize>,
    },
    Reduction {
        #[serde(default = "d_levels")]
        levels: Vec<usize>,
        #[serde(default = "d_chains")]
        chains: usize,
    },
    Getzler {
        #[serde(default = "d_fifty")]
        instances: usize,
        #[serde(default = "d_three")]
        max_level: usize,
        #[serde(default = "d_delta")]
        delta: f64,
        #[serde(default = "d_eps")]
        eps: f64,
    },
    ScalingLimit {
        #[serde(default = "d_levels")]
        levels: Vec<usize>,
        #[serde(default = "d_chains")]
        chains: usize,
    },
    AlphaTransgression {
        #[serde(default = "d_alpha_levels")]
        levels: Vec<usize>,
        #[serde(default = "d_half")]
        alpha: f64,
        #[serde(default = "d_one")]
        t: f64,
        #[serde(default = "d_alpha_h0")]
        h0: f64,
        #[serde(default = "d_one_usize")]
        chains: usize,
    },
    Holder {
        #[serde(default = "d_instances")]
        instances: usize,
    },
    StrNorm {
        #[serde(default = "d_instances")]
        instances: usize,
    },
    MuProperties {
        #[serde(default = "d_instances")]
        instances: usize,
    },
    TauIntegral {
        #[serde(default = "d_instances")]
        instances: usize,
    },
    Ptheta {
        #[serde(default = "d_ptheta_p")]
        p: Vec<f64>,
    },
    Perturbation {
        #[serde(default = "d_fifty")]
        instances: usize,
        #[serde(default = "d_perturbation_eps")]
        eps: Vec<f64>,
    },
    Interpolation {
        #[serde(default = "d_alphas")]
        alphas: Vec<f64>,
        #[serde(default = "d_two_f")]
        p: f64,
        #[serde(default = "d_five")]
        instances: usize,
        #[serde(default)]
        constant: BoundConstant,
    },
    LogCommutator {
        #[serde(default = "d_five")]
        instances: usize,
        #[serde(default)]
        constant: BoundConstant,
    },
}

fn d_bicomplex_chains() -> usize {
    100
}
fn d_five() -> usize {
    5
}
fn d_ten() -> usize {
    10
}
fn d_two() -> usize {
    2
}
fn d_three() -> usize {
    3
}
fn d_four() -> usize {
    4
}
fn d_fifty() -> usize {
    50
}
fn d_samples() -> usize {
    100_000
}
fn d_quad_tol() -> f64 {
    1e-9
}
fn d_factor_counts() -> Vec<usize> {
    vec![1, 2, 3]
}
fn d_scalar_levels() -> Vec<usize> {
    vec![0, 1, 2, 3]
}
fn d_delta() -> f64 {
    crate::fredholm::JLO_DELTA
}
fn d_eps() -> f64 {
    0.1
}
fn d_alpha_levels() -> Vec<usize> {
    vec![1, 2]
}
fn d_half() -> f64 {
    0.5
}
fn d_one() -> f64 {
    1.0
}
fn d_one_usize() -> usize {
    1
}
fn d_alpha_h0() -> f64 {
    1e-2
}
fn d_ptheta_p() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 4.0]
}
fn d_perturbation_eps() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}
fn d_alphas() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}
fn d_two_f() -> f64 {
    2.0
}

impl TaskKind {
    pub const NAMES: &'static [&'static str] = &[
        "validate",
        "construct",
        "ef_index_kernel",
        "ef_index_parametrix",
        "pairing_kernel",
        "pairing_parametrix",
        "mckean_singer",
        "pairing_connes",
        "pairing_jlo",
        "spectral_flow",
        "index_agreement",
        "doubling",
        "alpha_endpoint",
        "bicomplex",
        "heat_methods",
        "jlo_cocycle",
        "connes_cocycle",
        "variation",
        "level2aux",
        "cobound",
        "duhamel",
        "connes_transgression",
        "lemma",
        "scalar_factor",
        "reduction",
        "getzler",
        "scaling_limit",
        "alpha_transgression",
        "holder",
        "str_norm",
        "mu_properties",
        "tau_integral",
        "ptheta",
        "perturbation",
        "interpolation",
        "log_commutator",
    ];

    pub fn name(&self) -> &'static str {
        match serde_json::to_value(self) {
            Ok(Value::Object(m)) => {
                let k = m.get("kind").and_then(Value::as_str).unwrap_or_default();
                Self::NAMES.iter().copied().find(|n| *n == k).unwrap_or("unknown")
            }
            _ => "unknown",
        }
    }

    /// Whether the task needs a module and an element.
    pub fn needs(&self) -> (bool, bool) {
        use TaskKind::*;
        match self {
            EfIndexKernel { .. } | EfIndexParametrix { .. } | Bicomplex { .. } | HeatMethods { .. } => (false, false),
            ScalarFactor { .. } | Holder { .. } | StrNorm { .. } | MuProperties { .. } | TauIntegral { .. } => {
                (false, false)
            }
            PairingKernel {} | PairingParametrix { .. } | MckeanSinger { .. } | PairingConnes { .. } => (true, true),
            PairingJlo { .. } | SpectralFlow {} | IndexAgreement { .. } | Doubling { .. } => (true, true),
            _ => (true, false),
        }
    }

    /// Tasks that only run with `--slow`.
    pub fn is_slow(&self) -> bool {
        matches!(self, TaskKind::AlphaTransgression { .. })
    }
}

/// What a task produced. `primary` is compared with the expected value, if any.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub values: BTreeMap<String, Value>,
    pub bounds: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    pub primary: Option<f64>,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { pass: true, ..Default::default() }
    }

    fn value(&mut self, key: impl Into<String>, v: impl Serialize) {
        let v = serde_json::to_value(v).unwrap_or(Value::Null);
        self.values.insert(key.into(), v);
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.pass = false;
            self.notes.push(format!("failed: {}", what.into()));
        }
    }

    fn identity(&mut self, key: &str, rep: &IdentityReport) {
        self.residuals.insert(key.to_string(), rep.max_relative);
        self.value(key, rep);
        self.check(rep.pass, format!("{} (relative residual {:.3e})", rep.identity, rep.max_relative));
    }

    fn slope(&mut self, key: &str, rep: &SlopeReport) {
        if let Some(e) = rep.errors.last() {
            self.residuals.insert(key.to_string(), *e);
        }
        self.value(key, rep);
        let shown = rep.slope.map_or("roundoff".to_string(), |s| format!("{s:.3}"));
        self.check(rep.pass, format!("{} (slope {shown})", rep.identity));
    }

    /// Records the worst `lhs/rhs` of a family of bound checks under `key`.
    fn bounds(&mut self, key: &str, checks: &[BoundCheck]) {
        let worst = checks.iter().map(|b| ratio(b.lhs, b.rhs)).fold(0.0, f64::max);
        let fails = checks.iter().filter(|b| !b.pass).count();
        self.bounds.insert(format!("{key}.worst_ratio"), worst);
        self.value(format!("{key}.checks"), checks.len());
        self.value(format!("{key}.violations"), fails);
        self.check(fails == 0, format!("{key}: {fails} of {} bounds violated", checks.len()));
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// Everything a task needs to run.
pub struct TaskEnv<'a> {
    pub scenario: &'a Scenario,
    pub spec: &'a TaskSpec,
    pub run_seed: u64,
    /// Per-task generator, independent of scheduling.
    pub rng: ChaCha8Rng,
    /// Tolerance for comparisons against expected values and between methods.
    pub tol: f64,
}

impl TaskEnv<'_> {
    fn resolved(&self) -> Result<Resolved> {
        let r = self.spec.module.as_ref().ok_or_else(|| Error::Parse("task needs a module".into()))?;
        self.scenario.resolve(r, self.run_seed)
    }

    fn unbounded(&self) -> Result<UnboundedModule> {
        Ok(self.resolved()?.unbounded())
    }

    fn element(&self) -> Result<&KElement> {
        let name = self.spec.element.as_deref().ok_or_else(|| Error::Parse("task needs an element".into()))?;
        self.scenario.ktheory.get(name).ok_or_else(|| Error::Parse(format!("no element named `{name}`")))
    }

    fn matrix(&self, v: &Value, what: &str) -> Result<CMat> {
        parse_matrix_dim(v, what, self.scenario.ctx.dim())
    }
}

/// Keeps the levels whose parity matches; the rest are listed under `skipped_levels`.
fn split_levels(levels: &[usize], even: bool, out: &mut Outcome) -> Vec<usize> {
    let (keep, skip): (Vec<usize>, Vec<usize>) = levels.iter().partition(|&&l| (l % 2 == 0) == even);
    if !skip.is_empty() {
        out.value("skipped_levels", &skip);
    }
    keep
}

fn chains_at(m: &UnboundedModule, level: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Chain> {
    (0..count).map(|_| random_chain(&m.ctx, level, 2, m.grading.as_ref(), rng)).collect()
}

fn even_hermitian(ctx: &TraceContext, g: Option<&Grading>, rng: &mut ChaCha8Rng) -> CMat {
    let pieces: Vec<CMat> = ctx.blocks().iter().map(|b| random_hermitian(rng, b.dim)).collect();
    let h = ctx.assemble(&pieces);
    match g {
        Some(g) => g.even_part(&h),
        None => h,
    }
}

fn random_op(ctx: &TraceContext, rng: &mut ChaCha8Rng) -> CMat {
    random_element(ctx, None, rng)
}

fn positive(ctx: &TraceContext, rng: &mut ChaCha8Rng) -> CMat {
    let a = random_op(ctx, rng);
    a.adjoint() * a
}

const EXPONENTS: [f64; 6] = [1.0, 1.5, 2.0, 3.0, 4.0, f64::INFINITY];

pub fn execute(kind: &TaskKind, env: &mut TaskEnv) -> Result<Outcome> {
    let mut out = Outcome::new();
    let tol = env.tol;
    match kind {
        TaskKind::Validate { p_grid } => {
            let r = env.resolved()?;
            let rep = match &r.built {
                Built::Unbounded(m) => m.validate(p_grid),
                Built::Bounded(b) => b.validate(p_grid.first().copied()),
            };
            out.check(rep.ok, rep.issues.join("; "));
            out.value("validation", rep);
        }
        TaskKind::Construct {} => {
            let r = env.resolved()?;
            let def = &env.scenario.modules[&env.spec.module.as_ref().expect("checked at load").name];
            let mut built = vec![("requested".to_string(), r)];
            for steps in &def.constructions {
                let base = env.scenario.resolve(&super::model::ModuleRef { name: def.name.clone(), steps: vec![] }, env.run_seed)?;
                built.push((describe(steps), apply_steps(base, steps)?));
            }
            for (label, r) in built {
                let (kind, dim, ok, defect) = match &r.built {
                    Built::Unbounded(m) => ("unbounded", m.ctx.dim(), m.validate(&[]).ok, None),
                    Built::Bounded(b) => {
                        let v = b.validate(None);
                        ("bounded", b.ctx.dim(), v.ok, v.involution_defect)
                    }
                };
                out.check(ok, format!("construction `{label}` is not a valid module"));
                out.value(label, serde_json::json!({"kind": kind, "dim": dim, "valid": ok, "involution_defect": defect}));
            }
        }
        TaskKind::EfIndexKernel { e, f, t, tol: kt } => {
            let (e, f, t) = (env.matrix(e, "e")?, env.matrix(f, "f")?, env.matrix(t, "t")?);
            let rep = ef_index_kernel(&env.scenario.ctx, &e, &f, &t, *kt)?;
            out.primary = Some(rep.value);
            out.value("index", rep);
        }
        TaskKind::EfIndexParametrix { e, f, t, m } => {
            let ctx = &env.scenario.ctx;
            let (e, f, t) = (env.matrix(e, "e")?, env.matrix(f, "f")?, env.matrix(t, "t")?);
            let kernel = ef_index_kernel(ctx, &e, &f, &t, crate::fredholm::DEFAULT_KERNEL_TOL)?;
            let s = pseudo_parametrix(ctx, &e, &f, &t)?;
            for &p in m {
                let rep = ef_index_parametrix(ctx, &e, &f, &t, &s, p)?;
                let dev = (rep.value - kernel.value).abs();
                out.residuals.insert(format!("m{p}.vs_kernel"), dev);
                out.check(dev <= 1e-10, format!("parametrix m={p} differs from the kernel index by {dev:.3e}"));
                out.primary.get_or_insert(rep.value);
                out.value(format!("m{p}"), rep);
            }
            out.value("kernel", kernel);
        }
        TaskKind::PairingKernel {} => {
            let (r, el) = (env.resolved()?, env.element()?);
            let b = r.bounded()?;
            let x = r.embed(el)?;
            let rep = match el.kind {
                ElementKind::Projection => crate::fredholm::pairing_even_bounded(&b, &x, el.n)?,
                ElementKind::Unitary => crate::fredholm::pairing_odd_bounded(&b, &x, el.n)?,
            };
            out.primary = Some(rep.value);
            out.value("index", rep);
        }
        TaskKind::PairingParametrix { m } => {
            let (r, el) = (env.resolved()?, env.element()?);
            require_projection(el)?;
            let b = r.bounded()?;
            let x = r.embed(el)?;
            let mut vals = Vec::new();
            for &p in m {
                let rep = crate::fredholm::pairing_even_parametrix(&b, &x, el.n, p)?;
                vals.push(rep.value);
                out.value(format!("m{p}"), rep);
            }
            spread(&mut out, "powers", &vals, tol);
        }
        TaskKind::MckeanSinger { t } => {
            let (r, el) = (env.resolved()?, env.element()?);
            require_projection(el)?;
            let (m, x) = (r.unbounded(), r.embed(el)?);
            let mut vals = Vec::new();
            for &s in t {
                let rep = crate::fredholm::mckean_singer(&m, &x, el.n, s)?;
                vals.push(rep.value);
                out.value(format!("t{s}"), rep);
            }
            spread(&mut out, "times", &vals, 1e-10);
        }
        TaskKind::PairingConnes { levels } => {
            let (r, el) = (env.resolved()?, env.element()?);
            let b = r.bounded()?;
            let x = r.embed(el)?;
            let levels = levels.clone().unwrap_or_else(|| match el.kind {
                ElementKind::Projection => vec![0, 2, 4, 6],
                ElementKind::Unitary => vec![1, 3, 5],
            });
            let mut vals = Vec::new();
            for l in levels {
                let rep = match el.kind {
                    ElementKind::Projection => crate::fredholm::connes_pairing_even(&b, &x, el.n, l)?,
                    ElementKind::Unitary => crate::fredholm::connes_pairing_odd(&b, &x, el.n, l)?,
                };
                vals.push(rep.value);
                out.value(format!("level{l}"), rep);
            }
            spread(&mut out, "levels", &vals, tol);
        }
        TaskKind::PairingJlo { max_level } => {
            let (r, el) = (env.resolved()?, env.element()?);
            let (m, x) = (r.unbounded(), r.embed(el)?);
            let rep = match el.kind {
                ElementKind::Projection => crate::fredholm::jlo_pairing_even(&m, &x, el.n, *max_level)?,
                ElementKind::Unitary => crate::fredholm::jlo_pairing_odd(&m, &x, el.n, *max_level)?,
            };
            if let Some(t) = rep.diagnostics.get("tail_bound") {
                out.bounds.insert("tail_bound".into(), *t);
            }
            out.primary = Some(rep.value);
            out.value("index", rep);
        }
        TaskKind::SpectralFlow {} => {
            let (r, el) = (env.resolved()?, env.element()?);
            if el.kind != ElementKind::Unitary {
                return Err(Error::Parity("spectral flow pairs with unitaries".into()));
            }
            let rep = crate::fredholm::spectral_flow_pairing(&r.unbounded(), &r.embed(el)?, el.n)?;
            out.primary = Some(rep.value);
            out.value("index", rep);
        }
        TaskKind::IndexAgreement { levels, m, t, max_level } => {
            let (r, el) = (env.resolved()?, env.element()?);
            let params = AgreementParams { levels: levels.clone(), powers: m.clone(), times: t.clone(), max_level: *max_level };
            let a = agreement(&r, el, &params, tol)?;
            for mv in &a.methods {
                out.residuals.insert(mv.label.clone(), mv.deviation);
                out.check(mv.deviation <= mv.allowed, format!("{} deviates by {:.3e}", mv.label, mv.deviation));
            }
            out.primary = Some(a.reference);
            out.value("agreement", a);
        }
        TaskKind::Doubling { max_level } => doubling(env, *max_level, &mut out)?,
        TaskKind::AlphaEndpoint {} => {
            let m = env.unbounded()?;
            let f = m.to_bounded()?.f;
            let one = m.d_alpha(1.0)?.d;
            let zero = m.d_alpha(0.0)?.d;
            let d1 = op_norm(&(&one - &f));
            let d0 = op_norm(&(&zero - &m.d));
            out.residuals.insert("alpha1_vs_phase".into(), d1);
            out.residuals.insert("alpha0_vs_d".into(), d0);
            out.check(d1 <= 1e-12, format!("D_1 differs from F by {d1:.3e}"));
            out.check(d0 == 0.0, format!("D_0 differs from D by {d0:.3e}"));
        }
        TaskKind::Bicomplex { chains, max_level, cochains, terms } => {
            let ctx = env.scenario.ctx.clone();
            let cs: Vec<Chain> = (0..*chains)
                .map(|i| canonicalize(&random_chain(&ctx, i % (max_level + 1), *terms, None, &mut env.rng)))
                .collect();
            let seeds: Vec<u64> = (0..*cochains).map(|_| env.rng.gen()).collect();
            let rep = bicomplex_check(&cs, &seeds, 1e-10)?;
            out.residuals.insert("b_squared".into(), rep.b_squared);
            out.residuals.insert("B_squared".into(), rep.big_b_squared);
            out.residuals.insert("bB_plus_Bb".into(), rep.anticommutator);
            out.check(rep.pass, "bicomplex relations");
            out.value("bicomplex", rep);
        }
        TaskKind::HeatMethods { instances, max_level, max_dim, samples, quad_tol } => {
            heat_methods(env, *instances, *max_level, *max_dim, *samples, *quad_tol, &mut out)?
        }
        TaskKind::JloCocycle { levels, chains } => {
            let m = env.unbounded()?;
            for n in split_levels(levels, m.is_graded(), &mut out) {
                let cs = chains_at(&m, n + 1, *chains, &mut env.rng);
                out.identity(&format!("level{n}"), &jlo_cocycle_check(&m, n, &cs)?);
            }
        }
        TaskKind::ConnesCocycle { levels, chains } => {
            let m = env.unbounded()?;
            let b = env.resolved()?.bounded()?;
            for n in split_levels(levels, m.is_graded(), &mut out) {
                let at = chains_at(&m, n, *chains, &mut env.rng);
                let up = chains_at(&m, n + 2, *chains, &mut env.rng);
                out.identity(&format!("psi_level{n}"), &psi_identities_check(&b, n, &at, &up)?);
                let mut cs = chains_at(&m, n + 1, *chains, &mut env.rng);
                if n >= 1 {
                    cs.extend(chains_at(&m, n - 1, *chains, &mut env.rng));
                }
                out.identity(&format!("cocycle_level{n}"), &connes_cocycle_check(&b, n, &cs)?);
            }
        }
        TaskKind::Variation { levels, chains } => {
            let m = env.unbounded()?;
            let v = random_odd_hermitian(&m.ctx, m.grading.as_ref(), &mut env.rng);
            for n in split_levels(levels, m.is_graded(), &mut out) {
                let cs = chains_at(&m, n, *chains, &mut env.rng);
                out.identity(&format!("level{n}"), &variation_check(&m, &v, n, &cs)?);
            }
        }
        TaskKind::Level2aux { levels, chains } => {
            let m = env.unbounded()?;
            let v = random_odd_hermitian(&m.ctx, m.grading.as_ref(), &mut env.rng);
            let w = random_odd_hermitian(&m.ctx, m.grading.as_ref(), &mut env.rng);
            for n in split_levels(levels, !m.is_graded(), &mut out) {
                let cs = chains_at(&m, n, *chains, &mut env.rng);
                out.identity(&format!("level{n}"), &level2aux_check(&m, &v, &w, n, &cs)?);
            }
        }
        TaskKind::Cobound { levels, chains, h0 } => {
            let m = env.unbounded()?;
            let v = random_odd_hermitian(&m.ctx, m.grading.as_ref(), &mut env.rng);
            for n in split_levels(levels, m.is_graded(), &mut out) {
                let cs = chains_at(&m, n, *chains, &mut env.rng);
                out.slope(&format!("level{n}"), &cobound_check(&m, &v, n, &cs, *h0)?);
            }
        }
        TaskKind::Duhamel { factors, h0 } => {
            let m = env.unbounded()?;
            let v = random_odd_hermitian(&m.ctx, m.grading.as_ref(), &mut env.rng);
            for &k in factors {
                let fs: Vec<CMat> = (0..k).map(|_| random_element(&m.ctx, m.grading.as_ref(), &mut env.rng)).collect();
                out.slope(&format!("factors{k}"), &duhamel_check(&m, &v, &fs, *h0)?);
            }
        }
        TaskKind::ConnesTransgression { levels, chains, h0 } => {
            let m = env.unbounded()?;
            let b = env.resolved()?.bounded()?;
            let h = even_hermitian(&b.ctx, b.grading.as_ref(), &mut env.rng);
            for n in split_levels(levels, m.is_graded(), &mut out) {
                let cs = chains_at(&m, n, *chains, &mut env.rng);
                out.slope(&format!("level{n}"), &connes_transgression_check(&b, &h, n, &cs, *h0)?);
            }
        }
        TaskKind::Lemma { factors } => {
            let m = env.unbounded()?;
            if *factors < 2 {
                return Err(Error::Domain("the bracket identities need at least two factors".into()));
            }
            let fs: Vec<(CMat, Parity)> = (0..*factors)
                .map(|k| {
                    let x = random_op(&m.ctx, &mut env.rng);
                    match &m.grading {
                        Some(g) if k % 2 == 1 => (g.odd_part(&x), Parity::Odd),
                        Some(g) => (g.even_part(&x), Parity::Even),
                        None => (x, Parity::Unassigned),
                    }
                })
                .collect();
            for (name, variant) in [
                ("cyclic", LemmaVariant::Cyclic),
                ("insert_ones", LemmaVariant::InsertOnes),
                ("bracket_d", LemmaVariant::BracketD),
            ] {
                out.identity(name, &lemma_misc_check(&m, &fs, variant, 1)?);
            }
            for j in 1..*factors {
                out.identity(&format!("bracket_d2_j{j}"), &lemma_misc_check(&m, &fs, LemmaVariant::BracketD2, j)?);
            }
        }
        TaskKind::ScalarFactor { levels } => {
            let quad = QuadratureSpec::default();
            for &n in levels {
                let rep = scalar_factor_check(n, &quad)?;
                out.residuals.insert(format!("level{n}"), rep.residual);
                out.check(rep.pass, format!("scalar factor at level {n} off by {:.3e}", rep.residual));
                out.value(format!("level{n}"), rep);
            }
        }
        TaskKind::Reduction { levels, chains } => {
            let m = env.unbounded()?;
            let quad = QuadratureSpec::default();
            for n in split_levels(levels, m.is_graded(), &mut out) {
                let cs = chains_at(&m, n, *chains, &mut env.rng);
                out.identity(&format!("level{n}"), &reduction_check(&m, n, &cs, &quad)?);
            }
        }
        TaskKind::Getzler { instances, max_level, delta, eps } => {
            let m = env.unbounded()?;
            let g = m.grading.as_ref();
            let mut checks = Vec::with_capacity(*instances);
            let mut with_power = 0;
            for _ in 0..*instances {
                let n = env.rng.gen_range(0..=*max_level);
                // at most n power factors: the leading slot never carries one
                let fs: Vec<(Option<CMat>, CMat)> = (0..=n)
                    .map(|j| {
                        let f = (j > 0 && env.rng.gen_bool(0.5)).then(|| random_element(&m.ctx, g, &mut env.rng));
                        (f, random_element(&m.ctx, g, &mut env.rng))
                    })
                    .collect();
                with_power += fs.iter().any(|(f, _)| f.is_some()) as usize;
                checks.push(getzler_check(&m, &fs, *delta, *eps)?);
            }
            out.value("instances_with_power_factors", with_power);
            out.value("delta", delta);
            out.value("eps", eps);
            out.bounds("getzler", &checks);
        }
        TaskKind::ScalingLimit { levels, chains } => {
            let m = env.unbounded()?;
            for n in split_levels(levels, m.is_graded(), &mut out) {
                let cs: Vec<Chain> = (0..=n)
                    .filter(|l| (l % 2 == 0) == m.is_graded())
                    .flat_map(|l| chains_at(&m, l, *chains, &mut env.rng))
                    .collect();
                let rep = scaling_limit_report(&m, n, &cs, &SCALING_GRID)?;
                out.check(rep.pass, format!("no decay of the level-{n} family along the scaling grid"));
                out.value(format!("level{n}"), rep);
            }
        }
        TaskKind::AlphaTransgression { levels, alpha, t, h0, chains } => {
            let m = env.unbounded()?;
            let quad = QuadratureSpec::default();
            for n in split_levels(levels, m.is_graded(), &mut out) {
                let cs: Vec<Chain> = (0..=n)
                    .filter(|l| (l % 2 == 0) == m.is_graded())
                    .flat_map(|l| (0..*chains).map(|_| random_chain(&m.ctx, l, 1, m.grading.as_ref(), &mut env.rng)).collect::<Vec<_>>())
                    .collect();
                out.slope(&format!("level{n}"), &d_alpha_transgression_check(&m, n, *alpha, *t, &cs, *h0, &quad)?);
            }
        }
        TaskKind::Holder { instances } => {
            let ctx = env.scenario.ctx.clone();
            let mut checks = Vec::new();
            for _ in 0..*instances {
                let p = EXPONENTS[env.rng.gen_range(0..EXPONENTS.len())];
                let q = EXPONENTS[env.rng.gen_range(0..EXPONENTS.len())];
                let r = 1.0 / (inv(p) + inv(q));
                let s = Operator::new(ctx.clone(), random_op(&ctx, &mut env.rng), Parity::Unassigned)?;
                let t = Operator::new(ctx.clone(), random_op(&ctx, &mut env.rng), Parity::Unassigned)?;
                checks.push(holder_check(&s, &t, p, q, r)?);
            }
            out.bounds("holder", &checks);
        }
        TaskKind::StrNorm { instances } => {
            let ctx = env.scenario.ctx.clone();
            let mut checks = Vec::new();
            for _ in 0..*instances {
                let p = EXPONENTS[env.rng.gen_range(0..EXPONENTS.len())];
                let (s, t, r) = (random_op(&ctx, &mut env.rng), random_op(&ctx, &mut env.rng), random_op(&ctx, &mut env.rng));
                checks.push(str_norm_check(&ctx, &s, &t, &r, p)?);
            }
            out.bounds("str_norm", &checks);
        }
        TaskKind::MuProperties { instances } => {
            let ctx = env.scenario.ctx.clone();
            let (mut mono, mut prod) = (Vec::new(), Vec::new());
            let mut worst: f64 = 0.0;
            for _ in 0..*instances {
                let t = random_op(&ctx, &mut env.rng);
                let z = C64::new(env.rng.gen_range(-2.0..2.0), env.rng.gen_range(-2.0..2.0));
                worst = worst.max(mu_identity_defect(&ctx, &t, z)? / op_norm(&t).max(1.0));
                let a = positive(&ctx, &mut env.rng);
                let s = &a + positive(&ctx, &mut env.rng);
                mono.push(mu_monotone_check(&ctx, &a, &s)?);
                let (x, y) = (random_op(&ctx, &mut env.rng), random_op(&ctx, &mut env.rng));
                prod.push(mu_product_check(&ctx, &x, &t, &y)?);
            }
            out.residuals.insert("adjoint_abs_scalar".into(), worst);
            out.check(worst <= 1e-10, format!("μ(T), μ(|T|), μ(T*), μ(zT)/|z| differ by {worst:.3e}"));
            out.bounds("monotone", &mono);
            out.bounds("product", &prod);
        }
        TaskKind::TauIntegral { instances } => {
            let ctx = env.scenario.ctx.clone();
            let mut worst: f64 = 0.0;
            for _ in 0..*instances {
                worst = worst.max(tau_integral_defect(&ctx, &random_op(&ctx, &mut env.rng))?);
            }
            out.residuals.insert("relative".into(), worst);
            out.check(worst <= 1e-10, format!("τ(|T|) and ∫μ differ by {worst:.3e}"));
        }
        TaskKind::Ptheta { p } => {
            let m = env.unbounded()?;
            let d = m.dirac()?;
            let mut checks = Vec::new();
            for &q in p {
                for &t in &THETA_GRID {
                    checks.push(ptheta_check(&d, q, t)?);
                }
            }
            out.bounds("ptheta", &checks);
        }
        TaskKind::Perturbation { instances, eps } => {
            let m = env.unbounded()?;
            let mut checks = Vec::new();
            for i in 0..*instances {
                let v = if i == 0 {
                    CMat::zeros(m.ctx.dim(), m.ctx.dim())
                } else {
                    let v = random_odd_hermitian(&m.ctx, m.grading.as_ref(), &mut env.rng);
                    let s = env.rng.gen_range(0.05..1.5) / op_norm(&v).max(1e-300);
                    v * C64::new(s, 0.0)
                };
                let e = eps[i % eps.len().max(1)];
                let r = perturbation_bound_check(&m, &v, e)?;
                checks.push(BoundCheck { lhs: r.lhs, rhs: r.rhs, pass: r.pass });
            }
            out.bounds("perturbation", &checks);
        }
        TaskKind::Interpolation { alphas, p, instances, constant } => {
            let m = env.unbounded()?;
            let (mut shown, mut cert) = (Vec::new(), Vec::new());
            for _ in 0..*instances {
                let a = random_element(&m.ctx, m.grading.as_ref(), &mut env.rng);
                for &al in alphas {
                    let r = interpolation_bound_check(&m, &a, al, *p)?;
                    shown.push(BoundCheck { lhs: r.lhs, rhs: r.rhs, pass: r.pass });
                    cert.push(BoundCheck { lhs: r.lhs, rhs: r.certified_rhs, pass: r.certified_pass });
                }
            }
            record_pair(&mut out, "interpolation", &shown, &cert, *constant);
        }
        TaskKind::LogCommutator { instances, constant } => {
            let m = env.unbounded()?;
            let k = log_constants()?;
            let pi = std::f64::consts::PI;
            out.residuals.insert("C1_minus_pi".into(), (k.c1 - pi).abs());
            out.residuals.insert("C1prime".into(), k.c1_prime.abs());
            out.check((k.c1 - pi).abs() <= 1e-8, "C1 → π");
            out.check(k.c1_prime.abs() <= 1e-8, "C1′ → 0");
            out.value("constants", k);
            let (mut shown, mut cert) = (Vec::new(), Vec::new());
            for _ in 0..*instances {
                let a = random_element(&m.ctx, m.grading.as_ref(), &mut env.rng);
                let r = log_commutator_check(&m, &a, &k)?;
                shown.push(BoundCheck { lhs: r.lhs, rhs: r.rhs, pass: r.pass });
                cert.push(BoundCheck { lhs: r.lhs, rhs: r.certified_rhs, pass: r.certified_pass });
            }
            record_pair(&mut out, "log_commutator", &shown, &cert, *constant);
        }
    }
    Ok(out)
}

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

fn describe(steps: &[Step]) -> String {
    steps
        .iter()
        .map(|s| match s {
            Step::Double => "double".to_string(),
            Step::ToBounded => "to_bounded".to_string(),
            Step::DAlpha(a) => format!("d_alpha={a}"),
        })
        .collect::<Vec<_>>()
        .join("/")
}

fn require_projection(el: &KElement) -> Result<()> {
    match el.kind {
        ElementKind::Projection => Ok(()),
        ElementKind::Unitary => Err(Error::Parity("this method pairs with projections".into())),
    }
}

/// Sets the first value as primary and checks that all agree within `tol`.
fn spread(out: &mut Outcome, what: &str, vals: &[f64], tol: f64) {
    let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    out.primary = vals.first().copied();
    if vals.len() > 1 {
        out.residuals.insert(format!("{what}.spread"), hi - lo);
        out.check(hi - lo <= tol, format!("values over {what} spread by {:.3e}", hi - lo));
    }
}

/// Records both the displayed and the certified version of a bound; `constant` decides which one gates `pass`.
fn record_pair(out: &mut Outcome, key: &str, shown: &[BoundCheck], cert: &[BoundCheck], constant: BoundConstant) {
    let mut side = Outcome::new();
    let (gate, info, gate_name, info_name) = match constant {
        BoundConstant::Displayed => (shown, cert, "displayed", "certified"),
        BoundConstant::Certified => (cert, shown, "certified", "displayed"),
    };
    out.bounds(&format!("{key}.{gate_name}"), gate);
    side.bounds(&format!("{key}.{info_name}"), info);
    out.bounds.extend(side.bounds);
    out.values.extend(side.values);
    out.value("gating_constant", gate_name);
}

fn heat_methods(
    env: &mut TaskEnv,
    instances: usize,
    max_level: usize,
    max_dim: usize,
    samples: usize,
    quad_tol: f64,
    out: &mut Outcome,
) -> Result<()> {
    if max_dim < 2 {
        return Err(Error::Domain("max_dim must be at least 2".into()));
    }
    let (mut quad, mut mc): (f64, f64) = (0.0, 0.0);
    for i in 0..instances {
        let d = env.rng.gen_range(2..=max_dim);
        let n = env.rng.gen_range(0..=max_level);
        let ctx = Arc::new(TraceContext::new(&[(d, 1.0)])?);
        let m = random_unbounded(ctx.clone(), None, 0, 1.5, &mut env.rng);
        let k = HeatKernel::new(&ctx, &m.d, None, 1.0)?;
        let fs: Vec<CMat> = (0..=n).map(|_| random_complex(&mut env.rng, d, d)).collect();
        let refs: Vec<&CMat> = fs.iter().collect();
        let exact = k.bracket(&refs)?;
        let q = k.bracket_nested_quadrature(&refs, quad_tol)?;
        let (e, _) = k.bracket_monte_carlo(&refs, samples, env.run_seed.wrapping_add(i as u64))?;
        let scale = exact.norm().max(1e-300);
        quad = quad.max((exact - q).norm() / scale);
        mc = mc.max((exact - e).norm() / scale);
    }
    out.residuals.insert("nested_quadrature_relative".into(), quad);
    out.residuals.insert("monte_carlo_relative".into(), mc);
    out.check(quad <= 1e-6, format!("nested quadrature off by {quad:.3e}"));
    out.check(mc <= 1e-2, format!("Monte Carlo off by {mc:.3e}"));
    out.value("instances", instances);
    Ok(())
}

/// Pairings before and after doubling, against McKean–Singer (even) or the kernel index (odd).
fn doubling(env: &mut TaskEnv, max_level: usize, out: &mut Outcome) -> Result<()> {
    let (r, el) = (env.resolved()?, env.element()?);
    let tol = env.tol;
    let m = r.unbounded();
    let dd = apply_steps(r.clone(), &[Step::Double])?;
    let big = dd.unbounded();
    // D'² = (D²+1) ⊕ (D²+1)
    let sq = &m.d * &m.d + m.ctx.identity();
    let pieces: Vec<CMat> = (0..m.ctx.blocks().len())
        .map(|k| {
            let b = m.ctx.block(&sq, k);
            let n = b.nrows();
            let mut x = CMat::zeros(2 * n, 2 * n);
            x.view_mut((0, 0), (n, n)).copy_from(&b);
            x.view_mut((n, n), (n, n)).copy_from(&b);
            x
        })
        .collect();
    let defect = op_norm(&(&big.d * &big.d - big.ctx.assemble(&pieces)));
    out.residuals.insert("square_defect".into(), defect);
    out.check(defect <= 1e-10 * op_norm(&sq).max(1.0), format!("D'² differs from (D²+1)⊕(D²+1) by {defect:.3e}"));

    let x = r.embed(el)?;
    let xd = dd.embed(el)?;
    let n = el.n;
    let bd = dd.bounded()?;
    let mut rows: Vec<(&str, f64, f64)> = Vec::new();
    let reference = match el.kind {
        ElementKind::Projection => {
            let ms = crate::fredholm::mckean_singer(&m, &x, n, 1.0)?.value;
            rows.push(("mckean_singer_after", crate::fredholm::mckean_singer(&big, &xd, n, 1.0)?.value, 0.0));
            rows.push(("kernel_after", crate::fredholm::pairing_even_bounded(&bd, &xd, n)?.value, 0.0));
            rows.push(("connes_after", crate::fredholm::connes_pairing_even(&bd, &xd, n, 2)?.value, 0.0));
            for (label, mm, y) in [("jlo_before", &m, &x), ("jlo_after", &big, &xd)] {
                let j = crate::fredholm::jlo_pairing_even(mm, y, n, max_level)?;
                rows.push((label, j.value, j.diagnostics.get("tail_bound").copied().unwrap_or(0.0)));
            }
            if let Ok(b) = r.bounded() {
                rows.push(("kernel_before", crate::fredholm::pairing_even_bounded(&b, &x, n)?.value, 0.0));
            }
            ms
        }
        ElementKind::Unitary => {
            let b = r.bounded()?;
            let k = crate::fredholm::pairing_odd_bounded(&b, &x, n)?.value;
            rows.push(("kernel_after", crate::fredholm::pairing_odd_bounded(&bd, &xd, n)?.value, 0.0));
            rows.push(("connes_after", crate::fredholm::connes_pairing_odd(&bd, &xd, n, 1)?.value, 0.0));
            rows.push(("spectral_flow_before", crate::fredholm::spectral_flow_pairing(&m, &x, n)?.value, 0.0));
            for (label, mm, y) in [("jlo_before", &m, &x), ("jlo_after", &big, &xd)] {
                let j = crate::fredholm::jlo_pairing_odd(mm, y, n, max_level.max(1))?;
                rows.push((label, j.value, j.diagnostics.get("tail_bound").copied().unwrap_or(0.0)));
            }
            k
        }
    };
    out.primary = Some(reference);
    out.value("reference", reference);
    for (label, v, tail) in rows {
        let dev = (v - reference).abs();
        out.value(label, v);
        out.residuals.insert(label.to_string(), dev);
        out.check(dev <= tol + tail, format!("{label} deviates by {dev:.3e}"));
    }
    Ok(())
}
