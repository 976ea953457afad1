//! Executes scenarios: barriers first, then the entire-solution run (which
//! tracks dominance by the barriers as it goes), then every check on v̄.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use frontlab::barrier::{
    minimize_barrier, poincare_study, reservoir_barrier, BarrierConfig, BarrierResult, Variant,
};
use frontlab::dynamics::{
    default_nu, limit_profile_with, slide_bubble, slide_rho, slide_w, sliding_profile,
    universality_check, ClassificationResult, Lab, Verdict,
};
use frontlab::geometry::{blade_flux, tunnel_clearance, GridDomain};
use frontlab::nonlin::barrier_constants;
use frontlab::solver::{RunStatus, ScalarField};
use rayon::prelude::*;
use serde::Serialize;

use crate::output;
use crate::scenario::{load_file, Check, Loaded, Overrides};

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub t_final: f64,
    pub steps: u64,
    pub residual: f64,
    pub probe_min: f64,
    pub probe_max: f64,
    pub min_increment: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub passed: bool,
    pub values: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckOutcome {
    fn new(check: &str) -> Self {
        Self { check: check.into(), passed: true, values: BTreeMap::new(), note: None }
    }

    fn value(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        self.values.insert(key.into(), v);
        self
    }

    /// Records `v` and fails the check unless `ok`.
    fn require(&mut self, key: impl Into<String>, v: f64, ok: bool) -> &mut Self {
        self.passed &= ok;
        self.value(key, v)
    }

    fn fail(&mut self, note: impl Into<String>) -> &mut Self {
        self.passed = false;
        self.note = Some(note.into());
        self
    }
}

/// Everything a scenario produced. Wall-clock time is kept out of the
/// serialized form so that reports are reproducible byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSummary>,
    pub checks: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub passed: bool,
    #[serde(skip)]
    pub wall_clock: f64,
}

impl Report {
    fn failed(name: String, file: Option<&Path>, err: &anyhow::Error) -> Self {
        Self {
            name,
            file: file.map(|p| p.display().to_string()),
            verdict: None,
            run: None,
            checks: vec![],
            error: Some(format!("{err:#}")),
            passed: false,
            wall_clock: 0.0,
        }
    }

    pub fn check(&self, label: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.check == label)
    }
}

/// Barriers computed before the run, with the running max of ū − w0.
struct Tracked {
    label: &'static str,
    result: BarrierResult,
    excess: f64,
}

fn variant_label(v: Variant) -> &'static str {
    match v {
        Variant::Constrained => "constrained",
        Variant::Cylinder => "cylinder",
    }
}

fn barriers(lab: &Lab, s: &Loaded, grid: &Arc<GridDomain>) -> Result<Vec<Tracked>> {
    let k = barrier_constants(&lab.nl)?;
    let mut out = Vec::new();
    for check in &s.checks {
        match check {
            Check::Certificate { variants, .. } => {
                for &v in variants {
                    let mut cfg = BarrierConfig::for_wall(&s.spec, k)?;
                    cfg.variant = v;
                    cfg.seed = s.seed;
                    let g = cfg.grid(&s.spec, s.params.h, s.params.height, s.params.lateral_bc)?;
                    let result = minimize_barrier(&s.spec, &cfg, &lab.nl, &g)
                        .with_context(|| format!("{} barrier", variant_label(v)))?;
                    out.push(Tracked { label: variant_label(v), result, excess: f64::NEG_INFINITY });
                }
            }
            Check::Reservoir { .. } => {
                let result = reservoir_barrier(&s.spec, k, &lab.nl, grid).context("reservoir barrier")?;
                out.push(Tracked { label: "reservoir", result, excess: f64::NEG_INFINITY });
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Least-squares slope of front position against time over the samples
/// with the front in `[from, to]`.
fn front_speed(run: &ClassificationResult, from: f64, to: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = run
        .front_history
        .iter()
        .filter(|r| r.front_x >= from && r.front_x <= to)
        .map(|r| (r.t, r.front_x))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, mx) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - mx), a.1 + (p.0 - mt).powi(2)));
    Some(sxy / sxx)
}

struct Ctx<'a> {
    lab: &'a Lab,
    s: &'a Loaded,
    grid: &'a Arc<GridDomain>,
    v_bar: &'a ScalarField,
    run: &'a ClassificationResult,
    tracked: &'a [Tracked],
}

fn evaluate(cx: &Ctx, check: &Check) -> Result<CheckOutcome> {
    let (lab, s, p) = (cx.lab, cx.s, &cx.s.params);
    let mut o = CheckOutcome::new(check.label());
    match check {
        Check::Verdict { expect } => {
            o.passed = cx.run.verdict == *expect;
            o.value("probe_min", cx.run.probe_min).value("probe_max", cx.run.probe_max);
        }
        Check::Monotone { tol } => {
            o.require("min_increment", cx.run.min_increment, cx.run.min_increment >= -tol);
        }
        Check::FrontSpeed { from_x, to_x, tol } => match front_speed(cx.run, *from_x, *to_x) {
            Some(speed) => {
                let c = lab.wave.c();
                let rel = (speed - c).abs() / c;
                o.value("speed", speed).value("c", c).require("relative_error", rel, rel <= *tol);
            }
            None => {
                o.fail("too few history samples in the window");
            }
        },
        Check::Certificate { el_tol, agreement, dominance, .. } => {
            let k = barrier_constants(&lab.nl)?;
            let certs: Vec<&Tracked> = cx.tracked.iter().filter(|t| t.label != "reservoir").collect();
            for t in &certs {
                let r = &t.result;
                let l = t.label;
                o.require(format!("{l}.constraint_slack"), r.constraint_slack, r.is_certificate());
                o.require(format!("{l}.el_residual"), r.el_residual, r.el_residual <= *el_tol);
                o.require(format!("{l}.right_tail"), r.right_tail, r.right_tail <= k.delta);
                o.require(format!("{l}.energy_drop"), r.energy_zeta - r.energy, r.energy <= r.energy_zeta);
                o.require(format!("{l}.dominance_excess"), t.excess, t.excess <= *dominance);
                o.value(format!("{l}.feasibility_ratio"), r.feasibility.ratio);
                o.value(format!("{l}.pw_estimate"), r.pw_estimate);
                o.value(format!("{l}.supersolution_margin"), r.supersolution_margin(&lab.nl));
                o.value(format!("{l}.iterations"), r.iterations as f64);
            }
            if let [a, b] = certs[..] {
                let gap = a.result.w0.max_abs_diff(&b.result.w0)?;
                o.require("variant_gap", gap, gap <= *agreement);
            }
            o.passed &= cx.run.verdict == Verdict::Blocking;
        }
        Check::Reservoir { dominance } => {
            let k = barrier_constants(&lab.nl)?;
            let t = cx.tracked.iter().find(|t| t.label == "reservoir").expect("reservoir barrier computed");
            let r = &t.result;
            let parts = s.spec.reservoir_parts().expect("reservoir wall");
            let cavity = parts.cavity;
            let mean = cx.v_bar.mean_where(|x, y| cavity.contains(x, y)).unwrap_or(f64::NAN);
            let terminal = r.excess_over(cx.grid, cx.v_bar.values())?;
            o.require("constraint_slack", r.constraint_slack, r.is_certificate());
            o.require("cavity_mean", mean, mean <= k.delta);
            o.require("terminal_excess", terminal, terminal <= *dominance);
            o.value("dominance_excess", t.excess);
            o.value("probe_min", cx.run.probe_min);
            o.value("el_residual", r.el_residual);
            o.value("feasibility_ratio", r.feasibility.ratio);
        }
        Check::Universality { point, tol } => {
            let u = universality_check(lab, &s.spec, p, cx.v_bar, (point[0], point[1]))?;
            o.require("bubble_gap", u.bubble_gap, u.bubble_gap <= *tol);
            o.require("h_gap", u.h_gap, u.h_gap <= *tol);
            o.value("sandwich", if u.sandwich { 1.0 } else { 0.0 });
            o.passed &= u.bubble_verdict == cx.run.verdict && u.h_verdict == cx.run.verdict;
        }
        Check::SlideBubble { path } => {
            let path: Vec<(f64, f64)> = path.iter().map(|q| (q[0], q[1])).collect();
            match slide_bubble(&lab.bubble, cx.v_bar, &path) {
                Ok(ok) => {
                    o.passed = ok;
                    o.value("r0", lab.r0());
                }
                Err(e) => {
                    o.fail(e.to_string());
                }
            }
        }
        Check::SlideRho { delta_f, lambdas, nu } => {
            let rho = sliding_profile(&lab.nl, *delta_f)?;
            let nu = nu.unwrap_or(default_nu(p.h));
            let period = s.spec.period().unwrap_or(p.height);
            let rep = slide_rho(&rho, period, cx.v_bar, &lambdas.values(), nu);
            o.require("max_violation", rep.max_violation, rep.within_nu());
            o.value("nu", nu);
            let drop = rep.worst_decrease();
            o.require("worst_decrease", drop, drop <= p.h * p.h);
            o.value("b_root", rho.b_root());
        }
        Check::SlideW { delta_f, lambdas } => {
            let rho = sliding_profile(&lab.nl, *delta_f)?;
            let rep = slide_w(&rho, s.spec.m, cx.v_bar, &lambdas.values());
            o.passed = rep.ok;
            o.value("worst_excess", rep.worst_excess).value("min_v_bar", rep.min_v_bar);
        }
        Check::MinVBar { min } => {
            let lo = cx.v_bar.range_where(|_, _| true).map_or(f64::NAN, |r| r.0);
            o.require("min_v_bar", lo, lo >= *min);
        }
        Check::Clearance => {
            let c = tunnel_clearance(&s.spec, cx.grid);
            o.require("clearance", c, c >= lab.r0()).value("r0", lab.r0());
        }
        Check::BladeFlux { max } => {
            let flux = blade_flux(&s.spec);
            o.require("blade_flux", flux, flux <= *max);
        }
        Check::Poincare { count, stability } => {
            let study = |h: f64| poincare_study(&s.spec, h, p.height, p.lateral_bc, s.seed, *count);
            let coarse = study(p.h)?;
            let fine = study(p.h / 2.0)?;
            let change = (fine.min_ratio - coarse.min_ratio).abs() / coarse.min_ratio;
            o.require("min_ratio", coarse.min_ratio, coarse.min_ratio > 0.0);
            o.require("min_ratio_refined", fine.min_ratio, fine.min_ratio > 0.0);
            o.require("relative_change", change, change <= *stability);
            o.value("max_support", coarse.max_support);
        }
    }
    Ok(o)
}

fn execute(lab: &Lab, s: &Loaded, out: Option<&Path>) -> Result<Report> {
    let grid = s.params.grid(&s.spec)?;
    let mut tracked = barriers(lab, s, &grid)?;
    let (v_bar, run) = limit_profile_with(lab, &s.spec, &s.params, s.initializer, |_, u| {
        for t in tracked.iter_mut() {
            // Alignment was fixed by construction; a mismatch shows up as NaN.
            let e = t.result.excess_over(&grid, u).unwrap_or(f64::NAN);
            t.excess = if e.is_nan() { f64::NAN } else { t.excess.max(e) };
        }
    })?;
    let cx = Ctx { lab, s, grid: &grid, v_bar: &v_bar, run: &run, tracked: &tracked };
    let mut checks = Vec::with_capacity(s.checks.len());
    for c in &s.checks {
        let outcome = evaluate(&cx, c).unwrap_or_else(|e| {
            let mut o = CheckOutcome::new(c.label());
            o.fail(format!("{e:#}"));
            o
        });
        checks.push(outcome);
    }
    let passed = checks.iter().all(|c| c.passed);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        output::write_history(&dir.join("history.csv"), &run.front_history)?;
        output::write_field(&dir.join("v_bar.pgm"), &v_bar)?;
        output::write_mask(&dir.join("mask.pgm"), &grid)?;
        for t in &tracked {
            output::write_field(&dir.join(format!("barrier_{}.pgm", t.label)), &t.result.w0)?;
        }
    }
    Ok(Report {
        name: s.name.clone(),
        file: s.file.as_ref().map(|p| p.display().to_string()),
        verdict: Some(run.verdict),
        run: Some(RunSummary {
            status: run.status,
            t_final: run.t_final,
            steps: run.steps,
            residual: run.residual,
            probe_min: run.probe_min,
            probe_max: run.probe_max,
            min_increment: run.min_increment,
        }),
        checks,
        error: None,
        passed,
        wall_clock: 0.0,
    })
}

/// Runs one loaded scenario. Failures of any kind end up in the report;
/// with `out`, artifacts go to `out/<name>/`.
pub fn run_scenario(lab: &Lab, s: &Loaded, out: Option<&Path>) -> Report {
    let start = Instant::now();
    let dir = out.map(|d| d.join(&s.name));
    let mut report = execute(lab, s, dir.as_deref())
        .unwrap_or_else(|e| Report::failed(s.name.clone(), s.file.as_deref(), &e));
    report.wall_clock = start.elapsed().as_secs_f64();
    if let Some(dir) = &dir {
        if let Err(e) = write_report(dir, &report) {
            report.passed = false;
            report.error.get_or_insert(format!("{e:#}"));
        }
    }
    report
}

fn write_report(dir: &Path, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary {
    pub scenarios: usize,
    pub passed: usize,
    pub failed: usize,
    pub reports: Vec<Report>,
}

impl SuiteSummary {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn get(&self, name: &str) -> Option<&Report> {
        self.reports.iter().find(|r| r.name == name)
    }
}

/// `*.json` files in `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Runs every scenario in `dir` on the rayon pool. A scenario that fails
/// to load is reported as failed and the others still run.
pub fn run_suite(lab: &Lab, dir: &Path, ov: Overrides, out: Option<&Path>) -> Result<SuiteSummary> {
    let files = scenario_files(dir)?;
    let reports: Vec<Report> = files
        .par_iter()
        .map(|f| match load_file(f, ov) {
            Ok(s) => run_scenario(lab, &s, out),
            Err(e) => {
                let stem = f.file_stem().map_or("?".into(), |s| s.to_string_lossy().into_owned());
                Report::failed(stem, Some(f), &e)
            }
        })
        .collect();
    let passed = reports.iter().filter(|r| r.passed).count();
    let summary = SuiteSummary { scenarios: reports.len(), passed, failed: reports.len() - passed, reports };
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
        // Wall-clock lives outside the JSON/CSV artifacts, which must be
        // reproducible.
        let timings: String = summary.reports.iter().map(|r| format!("{} {:.1}\n", r.name, r.wall_clock)).collect();
        std::fs::write(out.join("timings.txt"), timings)?;
    }
    Ok(summary)
}
