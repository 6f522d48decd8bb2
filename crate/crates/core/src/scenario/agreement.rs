//! Every index computation that applies to one module and one K-theory element, side by side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fredholm::{
    connes_pairing_even, connes_pairing_odd, jlo_pairing_even, jlo_pairing_odd, mckean_singer, pairing_even_bounded,
    pairing_even_parametrix, pairing_odd_bounded, spectral_flow_pairing, IndexReport,
};

use super::model::{apply_steps, ElementKind, KElement, Resolved, Step};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgreementParams {
    /// Connes levels; defaults to the even levels `0..=6` or the odd levels `1..=5`.
    pub levels: Option<Vec<usize>>,
    pub powers: Vec<u32>,
    pub times: Vec<f64>,
    pub max_level: usize,
}

impl Default for AgreementParams {
    fn default() -> Self {
        Self { levels: None, powers: vec![1, 3], times: vec![0.5, 1.0, 2.0], max_level: 6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodValue {
    pub label: String,
    pub report: IndexReport,
    /// `|value − reference|`.
    pub deviation: f64,
    /// Allowed deviation: the tolerance plus the reported tail bound, if any.
    pub allowed: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Agreement {
    pub kind: ElementKind,
    /// The kernel index, against which every other method is compared.
    pub reference: f64,
    /// True when `D` was not invertible and the bounded methods ran on the doubled module.
    pub bounded_via_double: bool,
    pub methods: Vec<MethodValue>,
    pub max_deviation: f64,
    pub pass: bool,
}

fn default_levels(kind: ElementKind, max_level: usize) -> Vec<usize> {
    let start = match kind {
        ElementKind::Projection => 0,
        ElementKind::Unitary => 1,
    };
    (start..=max_level).step_by(2).collect()
}

/// The module whose phase gives the bounded methods, doubling `D` when it is not invertible.
fn bounded_side(r: &Resolved) -> Result<(Resolved, bool)> {
    match r.bounded() {
        Ok(_) => Ok((r.clone(), false)),
        Err(Error::NotInvertible(_)) => Ok((apply_steps(r.clone(), &[Step::Double])?, true)),
        Err(e) => Err(e),
    }
}

pub fn agreement(r: &Resolved, el: &KElement, params: &AgreementParams, tol: f64) -> Result<Agreement> {
    let ub = r.unbounded();
    let x = r.embed(el)?;
    let (rb, doubled) = bounded_side(r)?;
    let b = rb.bounded()?;
    let xb = rb.embed(el)?;
    let n = el.n;
    let levels = params.levels.clone().unwrap_or_else(|| default_levels(el.kind, params.max_level));
    let mut rows: Vec<(String, IndexReport)> = Vec::new();
    match el.kind {
        ElementKind::Projection => {
            rows.push(("kernel".into(), pairing_even_bounded(&b, &xb, n)?));
            for &m in &params.powers {
                rows.push((format!("parametrix_m{m}"), pairing_even_parametrix(&b, &xb, n, m)?));
            }
            for &t in &params.times {
                rows.push((format!("mckean_singer_t{t}"), mckean_singer(&ub, &x, n, t)?));
            }
            for &l in &levels {
                rows.push((format!("connes_level{l}"), connes_pairing_even(&b, &xb, n, l)?));
            }
            rows.push(("jlo".into(), jlo_pairing_even(&ub, &x, n, params.max_level)?));
        }
        ElementKind::Unitary => {
            rows.push(("kernel".into(), pairing_odd_bounded(&b, &xb, n)?));
            for &l in &levels {
                rows.push((format!("connes_level{l}"), connes_pairing_odd(&b, &xb, n, l)?));
            }
            rows.push(("jlo".into(), jlo_pairing_odd(&ub, &x, n, params.max_level.max(1))?));
            rows.push(("spectral_flow".into(), spectral_flow_pairing(&ub, &x, n)?));
        }
    }
    let reference = rows[0].1.value;
    let mut max_deviation: f64 = 0.0;
    let mut pass = true;
    let methods = rows
        .into_iter()
        .map(|(label, report)| {
            let deviation = (report.value - reference).abs();
            let allowed = tol + report.diagnostics.get("tail_bound").copied().unwrap_or(0.0);
            max_deviation = max_deviation.max(deviation);
            pass &= deviation <= allowed;
            MethodValue { label, report, deviation, allowed }
        })
        .collect();
    Ok(Agreement { kind: el.kind, reference, bounded_via_double: doubled, methods, max_deviation, pass })
}
