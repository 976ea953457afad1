use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use frontlab::barrier::{minimize_barrier, reservoir_barrier, BarrierConfig, Variant};
use frontlab::dynamics::Lab;
use frontlab::geometry::{
    blade_flux, hole_measure, is_directionally_convex, tunnel_clearance, Wall,
};
use frontlab::nonlin::{
    barrier_constants, constants_report, solve_h, solve_rho, solve_wave_profile, Nonlinearity,
    DEFAULT_STEP, DEFAULT_WINDOW,
};
use frontlab::radial::{find_r0, solve_bubble};
use frontlab_cli::output;
use frontlab_cli::runner::{run_scenario, run_suite, Report};
use frontlab_cli::scenario::{load_file, Check, Loaded, Overrides, Span};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "frontlab", version, about = "Bistable fronts crossing perforated walls")]
struct Cli {
    /// Seed for every randomized step (barrier tiles, Poincaré fields).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid spacing, overriding the scenario's resolution.
    #[arg(long, global = true)]
    h: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long = "t-max", global = true)]
    t_max: Option<f64>,
    /// Threshold α of the cubic nonlinearity.
    #[arg(long, global = true, default_value_t = 0.25)]
    alpha: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileKind {
    /// The travelling wave φ.
    Wave,
    /// The half-line profile H.
    H,
    /// The sliding profile ρ (needs --delta-f).
    Rho,
}

#[derive(Clone, Copy, ValueEnum)]
enum SlideMode {
    Bubble,
    Rho,
    W,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Constrained,
    Cylinder,
}

#[derive(Subcommand)]
enum Command {
    /// One-dimensional profile: summary on stdout, samples as CSV.
    Profile {
        #[arg(long, value_enum, default_value = "wave")]
        kind: ProfileKind,
        #[arg(long = "delta-f", default_value_t = 0.01)]
        delta_f: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Constants of the nonlinearity.
    Constants,
    /// Radial bubble of a given radius (default R₀).
    Bubble {
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Geometry statistics of a scenario's wall, optionally the mask as PGM.
    Geom {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Limit profile and verdict of a scenario's wall, without its checks.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One sliding test on a scenario's limit profile.
    Slide {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: SlideMode,
        #[arg(long = "delta-f", default_value_t = 0.01)]
        delta_f: f64,
        /// λ range for rho and w, as from:to:step.
        #[arg(long, default_value = "-50:50:0.25")]
        lambdas: String,
        /// Bubble path, as x,y;x,y;...
        #[arg(long)]
        path: Option<String>,
    },
    /// Blocking barrier for a scenario's wall (the reservoir barrier for a
    /// reservoir): summary as JSON, field as PGM next to it.
    Barrier {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "constrained")]
        variant: VariantArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Run one scenario file.
    Run {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scenario file in a directory.
    Suite {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn parse_span(s: &str) -> Result<Span> {
    let parts: Vec<f64> = s.split(':').map(str::parse).collect::<Result<_, _>>().context("λ range")?;
    let [from, to, step] = parts[..] else { bail!("λ range must be from:to:step") };
    if !(step > 0.0) {
        bail!("λ step must be positive");
    }
    Ok(Span { from, to, step })
}

fn parse_path(s: &str) -> Result<Vec<[f64; 2]>> {
    s.split(';')
        .map(|p| {
            let xy: Vec<f64> = p.split(',').map(|v| v.trim().parse()).collect::<Result<_, _>>()?;
            match xy[..] {
                [x, y] => Ok([x, y]),
                _ => bail!("path points are x,y"),
            }
        })
        .collect()
}

fn lab(nl: Nonlinearity) -> Result<Lab> {
    Ok(Lab::new(nl)?)
}

/// Prints the report and turns a failed scenario into a nonzero exit.
fn finish(report: &Report) -> Result<ExitCode> {
    print(report)?;
    eprintln!("{}: {} in {:.1} s", report.name, if report.passed { "pass" } else { "FAIL" }, report.wall_clock);
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn with_checks(mut s: Loaded, checks: Vec<Check>) -> Loaded {
    s.checks = checks;
    s
}

fn run(cli: Cli) -> Result<ExitCode> {
    let nl = Nonlinearity::cubic(cli.alpha)?;
    let ov = Overrides { h: cli.h, dt: cli.dt, t_max: cli.t_max, seed: cli.seed };
    let load = |p: &Path| load_file(p, ov);
    match cli.command {
        Command::Profile { kind, delta_f, out } => {
            let (summary, samples): (serde_json::Value, Vec<(f64, f64, f64)>) = match kind {
                ProfileKind::Wave => {
                    let w = solve_wave_profile(&nl, DEFAULT_WINDOW, DEFAULT_STEP)?;
                    (json!({"c": w.c(), "ode_residual": w.ode_residual(&nl)}), w.samples().collect())
                }
                ProfileKind::H | ProfileKind::Rho => {
                    let p = match kind {
                        ProfileKind::H => solve_h(&nl, DEFAULT_WINDOW, DEFAULT_STEP)?,
                        _ => solve_rho(&nl, delta_f)?,
                    };
                    let s = json!({
                        "delta_f": p.delta_f(),
                        "b_root": p.b_root(),
                        "slope_at_zero": p.slope_at_zero(),
                        "ode_residual": p.ode_residual(&nl),
                        "first_integral_residual": p.first_integral_residual(&nl),
                    });
                    (s, p.samples().collect())
                }
            };
            if let Some(out) = out {
                output::write_rows(&out, samples.iter().map(|&(z, v, dv)| Sample { z, value: v, deriv: dv }))?;
            }
            print(&summary)?;
        }
        Command::Constants => print(&constants_report(&nl)?)?,
        Command::Bubble { radius, dim, out } => {
            let r = match radius {
                Some(r) => r,
                None => find_r0(&nl, dim, 1e-3)?,
            };
            let Some(b) = solve_bubble(&nl, r, dim) else { bail!("no positive bubble of radius {r}") };
            if let Some(out) = out {
                output::write_rows(&out, b.samples().map(|(z, v, dv)| Sample { z, value: v, deriv: dv }))?;
            }
            print(&json!({
                "radius": b.radius(),
                "dim": b.n_dim(),
                "branch": b.branch(),
                "center_value": b.center_value(),
                "energy": b.energy(&nl),
                "ode_residual": b.ode_residual(&nl),
            }))?;
        }
        Command::Geom { config, out } => {
            let s = load(&config)?;
            let g = s.params.grid(&s.spec)?;
            if let Some(out) = out {
                output::write_mask(&out, &g)?;
            }
            print(&json!({
                "nx": g.nx,
                "ny": g.ny,
                "fluid_cells": g.fluid_count(),
                "solid_cells": g.solid_count(),
                "components": g.components(),
                "hole_measure": hole_measure(&s.spec, &g),
                "blade_flux": blade_flux(&s.spec),
                "clearance": tunnel_clearance(&s.spec, &g),
                "directionally_convex": is_directionally_convex(&g),
            }))?;
        }
        Command::Classify { config, out } => {
            let s = with_checks(load(&config)?, vec![]);
            return finish(&run_scenario(&lab(nl)?, &s, out.as_deref()));
        }
        Command::Slide { config, mode, delta_f, lambdas, path } => {
            let check = match mode {
                SlideMode::Bubble => {
                    let Some(path) = path else { bail!("--mode bubble needs --path") };
                    Check::SlideBubble { path: parse_path(&path)? }
                }
                SlideMode::Rho => Check::SlideRho { delta_f, lambdas: parse_span(&lambdas)?, nu: None },
                SlideMode::W => Check::SlideW { delta_f, lambdas: parse_span(&lambdas)? },
            };
            let s = with_checks(load(&config)?, vec![check]);
            return finish(&run_scenario(&lab(nl)?, &s, None));
        }
        Command::Barrier { config, variant, out } => {
            let s = load(&config)?;
            let k = barrier_constants(&nl)?;
            let p = &s.params;
            let result = if matches!(s.spec.wall, Wall::Reservoir { .. }) {
                reservoir_barrier(&s.spec, k, &nl, &p.grid(&s.spec)?)?
            } else {
                let mut cfg = BarrierConfig::for_wall(&s.spec, k)?;
                cfg.variant = match variant {
                    VariantArg::Constrained => Variant::Constrained,
                    VariantArg::Cylinder => Variant::Cylinder,
                };
                cfg.seed = s.seed;
                let g = cfg.grid(&s.spec, p.h, p.height, p.lateral_bc)?;
                minimize_barrier(&s.spec, &cfg, &nl, &g)?
            };
            let summary = result.summary();
            if let Some(out) = out {
                std::fs::write(&out, serde_json::to_string_pretty(&summary)? + "\n")?;
                output::write_field(&out.with_extension("pgm"), &result.w0)?;
            }
            print(&summary)?;
            let ok = result.is_certificate();
            eprintln!("certificate: {}", if ok { "valid" } else { "not valid" });
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Command::Scenario(ScenarioCommand::Run { file, out }) => {
            let s = load(&file)?;
            return finish(&run_scenario(&lab(nl)?, &s, out.as_deref()));
        }
        Command::Scenario(ScenarioCommand::Suite { dir, out }) => {
            let summary = run_suite(&lab(nl)?, &dir, ov, out.as_deref())?;
            for r in &summary.reports {
                eprintln!("{:<28} {} {:>7.1} s", r.name, if r.passed { "pass" } else { "FAIL" }, r.wall_clock);
                if let Some(e) = &r.error {
                    eprintln!("    {e}");
                }
                for c in r.checks.iter().filter(|c| !c.passed) {
                    eprintln!("    failed {}: {:?}", c.check, c.values);
                }
            }
            eprintln!("{} scenarios, {} passed, {} failed", summary.scenarios, summary.passed, summary.failed);
            print(&json!({"scenarios": summary.scenarios, "passed": summary.passed, "failed": summary.failed}))?;
            return Ok(if summary.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Sample {
    z: f64,
    value: f64,
    deriv: f64,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
