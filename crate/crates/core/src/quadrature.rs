//! Adaptive Gauss–Legendre quadrature for scalar and complex integrands.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Accumulator, C64};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

fn cached_rule(order: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (1..=40).map(gauss_legendre).collect());
    &rules[order.clamp(1, 40) - 1]
}

/// Upper integration limit for semi-infinite ranges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cutoff {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub panels: usize,
    pub order: usize,
    pub cutoff: Cutoff,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-11
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { panels: 4, order: 12, cutoff: Cutoff::Auto(AutoTag::Auto), tol: default_tol() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: C64,
    pub error: f64,
    pub evaluations: usize,
    /// Bound on the neglected tail for semi-infinite ranges.
    pub tail: f64,
    pub upper: f64,
}

const MAX_DEPTH: usize = 40;

fn rule<F>(f: &F, a: f64, b: f64, order: usize, evals: &mut usize) -> Result<C64>
where
    F: Fn(f64) -> Result<C64>,
{
    let (x, w) = cached_rule(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = Accumulator::new();
    for (xi, wi) in x.iter().zip(w) {
        acc.add(f(mid + half * xi)? * (wi * half));
    }
    *evals += x.len();
    Ok(acc.value())
}

#[allow(clippy::too_many_arguments)]
fn refine<F>(
    f: &F,
    a: f64,
    b: f64,
    whole: C64,
    order: usize,
    tol: f64,
    depth: usize,
    evals: &mut usize,
    acc: &mut Accumulator,
    err: &mut f64,
) -> Result<()>
where
    F: Fn(f64) -> Result<C64>,
{
    let m = 0.5 * (a + b);
    let left = rule(f, a, m, order, evals)?;
    let right = rule(f, m, b, order, evals)?;
    let both = left + right;
    let diff = (both - whole).norm();
    if diff <= tol || depth >= MAX_DEPTH || (b - a) < 1e-14 * a.abs().max(b.abs()).max(1.0) {
        acc.add(both);
        *err += diff;
        return Ok(());
    }
    refine(f, a, m, left, order, 0.5 * tol, depth + 1, evals, acc, err)?;
    refine(f, m, b, right, order, 0.5 * tol, depth + 1, evals, acc, err)
}

/// Adaptive Gauss–Legendre integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F>(f: F, a: f64, b: f64, panels: usize, order: usize, tol: f64) -> Result<Integral>
where
    F: Fn(f64) -> Result<C64>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature("finite limits required".into()));
    }
    let panels = panels.max(1);
    let mut evals = 0;
    let mut acc = Accumulator::new();
    let mut err = 0.0;
    let h = (b - a) / panels as f64;
    for k in 0..panels {
        let lo = a + h * k as f64;
        let hi = if k + 1 == panels { b } else { lo + h };
        let whole = rule(&f, lo, hi, order, &mut evals)?;
        refine(&f, lo, hi, whole, order, tol / panels as f64, 0, &mut evals, &mut acc, &mut err)?;
    }
    Ok(Integral { value: acc.value(), error: err, evaluations: evals, tail: 0.0, upper: b })
}

pub fn integrate_real<F>(f: F, a: f64, b: f64, panels: usize, order: usize, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    Ok(integrate(|x| Ok(C64::new(f(x), 0.0)), a, b, panels, order, tol)?.value.re)
}

/// `∫_0^∞ f` where `tail(U)` bounds `∫_U^∞ |f|`.
pub fn integrate_to_infinity<F, T>(f: F, tail: T, spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(f64) -> Result<C64>,
    T: Fn(f64) -> f64,
{
    let upper = match spec.cutoff {
        Cutoff::Fixed(u) => {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::Quadrature(format!("cutoff {u} must be positive")));
            }
            u
        }
        Cutoff::Auto(_) => {
            let mut u = 1.0;
            while tail(u) > spec.tol {
                u *= 1.25;
                if u > 1e6 {
                    return Err(Error::Quadrature("tail envelope does not decay".into()));
                }
            }
            u
        }
    };
    let mut out = integrate(f, 0.0, upper, spec.panels, spec.order, spec.tol)?;
    out.tail = tail(upper);
    out.upper = upper;
    Ok(out)
}

/// `∫_0^∞ (1+x)^{-1} x^{-a} (ln x)^k dx` for `0 < a < 1`, integrated in `x = e^s`.
pub fn log_moment(a: f64, k: u32) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!("log_moment exponent {a} must lie in (0,1)")));
    }
    let rate = a.min(1.0 - a);
    // integrand ≤ |s|^k e^{-rate |s|}; pick L with negligible tails
    let mut l: f64 = 10.0;
    while (l.powi(k as i32) + 1.0) * (-rate * l).exp() / rate > 1e-15 {
        l += 5.0;
    }
    integrate_real(
        |s| {
            let e = s.exp();
            s.powi(k as i32) * e.powf(1.0 - a) / (1.0 + e)
        },
        -l,
        l,
        16,
        20,
        1e-13,
    )
}
