//! The entire solution ū, its limit v̄, the propagation/blocking verdict, and
//! the sliding arguments that certify propagation on particular walls.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rasterize, Extent, GeometryError, GridDomain, LateralBc, ObstacleSpec};
use crate::nonlin::{
    eval_super_sub, solve_h, solve_rho, solve_wave_profile, HalfLineProfile, NonlinError,
    Nonlinearity, SuperSubPair, WaveProfile, DEFAULT_STEP, DEFAULT_WINDOW,
};
use crate::radial::{distance_to_obstacle, embed_bubble, find_r0, solve_bubble, RadialBubble, RadialError};
use crate::solver::{
    run_to_steady_with, HistoryRow, RunOutcome, RunStatus, ScalarField, SolverError, StepConfig,
    DEFAULT_STEADY_TOL, MAX_CFL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("initial front at x1 = {front} is closer to the wall than {limit}")]
    FrontTooClose { front: f64, limit: f64 },
    #[error("path point ({x}, {y}) is {distance} from the obstacle, closer than {radius}")]
    PathTooClose { x: f64, y: f64, distance: f64, radius: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Nonlin(#[from] NonlinError),
    #[error(transparent)]
    Radial(#[from] RadialError),
}

/// Probe values must lie within this distance of 0 or 1.
pub const EPS_CLS: f64 = 0.05;
/// The probe window starts this far right of the wall.
pub const PROBE_OFFSET: f64 = 10.0;
/// The initial front sits this far left of the wall.
pub const FRONT_GAP: f64 = 20.0;
/// Shifts in the running max that builds the initial datum.
pub const SHIFT_SAMPLES: usize = 400;
/// Tolerance of the sliding comparisons.
pub const SLIDE_TOL: f64 = 1e-3;

/// Precomputed one-dimensional objects shared by every run.
#[derive(Debug, Clone)]
pub struct Lab {
    pub nl: Nonlinearity,
    pub wave: WaveProfile,
    pub pair: SuperSubPair,
    pub h_profile: HalfLineProfile,
    /// The bubble of radius R₀ (upper end of the bisection bracket).
    pub bubble: RadialBubble,
}

impl Lab {
    pub fn new(nl: Nonlinearity) -> Result<Self, DynamicsError> {
        let wave = solve_wave_profile(&nl, DEFAULT_WINDOW, DEFAULT_STEP)?;
        let pair = SuperSubPair::search(&nl, &wave)?;
        let h_profile = solve_h(&nl, DEFAULT_WINDOW, DEFAULT_STEP)?;
        let r0 = find_r0(&nl, 2, 1e-3)?;
        let bubble = solve_bubble(&nl, r0, 2).ok_or(RadialError::BracketFailed(r0))?;
        Ok(Self { nl, wave, pair, h_profile, bubble })
    }

    pub fn r0(&self) -> f64 {
        self.bubble.radius()
    }
}

/// Resolution, domain and run controls for one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunParams {
    pub h: f64,
    pub height: f64,
    pub lateral_bc: LateralBc,
    /// Length of fluid left of x₁ = 0. The front starts 20 units in, and the
    /// reflecting end must sit where its tail is flat to ~1e-13, otherwise
    /// the first steps dip there and the run is not monotone.
    pub left: f64,
    /// Length of fluid right of x₁ = M.
    pub right: f64,
    pub cfl: f64,
    pub steady_tol: f64,
    pub t_max: f64,
    pub record_every: f64,
    pub probe_offset: f64,
    pub eps_cls: f64,
    /// Explicit step; `None` takes the largest allowed by `cfl`.
    pub dt: Option<f64>,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            h: 0.05,
            height: 4.0,
            lateral_bc: LateralBc::Periodic,
            left: 60.0,
            right: 40.0,
            cfl: MAX_CFL,
            steady_tol: DEFAULT_STEADY_TOL,
            t_max: 2000.0,
            record_every: 1.0,
            probe_offset: PROBE_OFFSET,
            eps_cls: EPS_CLS,
            dt: None,
        }
    }
}

impl RunParams {
    /// `[−left, M + right] × [0, height]`, snapped outwards to whole cells.
    pub fn extent(&self, m: f64) -> Extent {
        let h = self.h;
        Extent {
            x_min: -(self.left / h - 1e-9).ceil() * h,
            x_max: ((m + self.right) / h - 1e-9).ceil() * h,
            height: self.height,
        }
    }

    pub fn grid(&self, spec: &ObstacleSpec) -> Result<Arc<GridDomain>, DynamicsError> {
        Ok(Arc::new(rasterize(spec, self.h, self.extent(spec.m), self.lateral_bc)?))
    }

    pub fn step_config(&self, m: f64) -> StepConfig {
        let mut cfg = StepConfig::for_grid(self.h, self.cfl, self.t_max);
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        cfg.steady_tol = self.steady_tol;
        cfg.record_every = self.record_every;
        cfg.probe_from = Some(m + self.probe_offset);
        cfg
    }
}

/// Time at which the front c·t − ξ(t) of w⁻ sits `FRONT_GAP` left of the wall.
pub fn default_t_start(pair: &SuperSubPair, wave: &WaveProfile) -> f64 {
    let front = |t: f64| wave.c() * t - pair.xi(t);
    let (mut lo, mut hi) = (-FRONT_GAP / wave.c() - 100.0, pair.horizon);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if front(mid) > -FRONT_GAP {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// How the initial datum of the entire-solution run is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Initializer {
    /// Running max of w⁻ over earlier shifts: a subsolution, so the run is
    /// nondecreasing in time.
    #[default]
    SupOverShifts,
    /// w⁻ at the start time alone, which is not monotone in time.
    Plain,
}

/// The initial datum sup_{s ≤ t_start} w⁻(s, ·), a function of x₁ only.
pub fn build_entire_initial(
    wave: &WaveProfile,
    pair: &SuperSubPair,
    grid: &Arc<GridDomain>,
    t_start: f64,
) -> Result<ScalarField, DynamicsError> {
    build_initial(wave, pair, grid, t_start, Initializer::SupOverShifts)
}

pub fn build_initial(
    wave: &WaveProfile,
    pair: &SuperSubPair,
    grid: &Arc<GridDomain>,
    t_start: f64,
    how: Initializer,
) -> Result<ScalarField, DynamicsError> {
    let c = wave.c();
    let front = c * t_start - pair.xi(t_start);
    if t_start > pair.horizon || front > -FRONT_GAP + 1e-9 {
        return Err(DynamicsError::FrontTooClose { front, limit: -FRONT_GAP });
    }
    // Shifts cover the last 40 units of front travel.
    let span = 2.0 * FRONT_GAP / c;
    let shifts: Vec<f64> = match how {
        Initializer::SupOverShifts => (0..SHIFT_SAMPLES)
            .map(|k| t_start - span * k as f64 / (SHIFT_SAMPLES - 1) as f64)
            .collect(),
        Initializer::Plain => vec![t_start],
    };
    let column: Vec<f64> = (0..grid.nx)
        .map(|i| {
            let x = grid.x_center(i);
            shifts
                .iter()
                .map(|&s| eval_super_sub(pair, wave, s, x).map(|(lo, _)| lo).unwrap_or(0.0))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(ScalarField::from_fn(grid.clone(), |x, _| {
        let i = ((x - grid.x1_offset) / grid.h).floor() as usize;
        column[i.min(grid.nx - 1)]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Propagation,
    Blocking,
    Undecided,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationResult {
    pub verdict: Verdict,
    pub probe_min: f64,
    pub probe_max: f64,
    pub front_history: Vec<HistoryRow>,
    /// max |u_t| at the last step.
    pub residual: f64,
    pub status: RunStatus,
    pub t_final: f64,
    pub steps: u64,
    /// Most negative per-step increment.
    pub min_increment: f64,
}

/// Verdict from the probe window `{x₁ ≥ M + probe_offset}` of a field.
pub fn classify_field(field: &ScalarField, m: f64, params: &RunParams, status: RunStatus) -> (Verdict, f64, f64) {
    let from = m + params.probe_offset;
    let (lo, hi) = field.range_where(|x, _| x >= from).unwrap_or((f64::NAN, f64::NAN));
    let verdict = if status == RunStatus::HorizonReached {
        Verdict::Undecided
    } else if lo >= 1.0 - params.eps_cls {
        Verdict::Propagation
    } else if hi <= params.eps_cls {
        Verdict::Blocking
    } else {
        Verdict::Undecided
    };
    (verdict, lo, hi)
}

fn classification(outcome: &RunOutcome, m: f64, params: &RunParams) -> ClassificationResult {
    let (verdict, probe_min, probe_max) = classify_field(&outcome.field, m, params, outcome.status);
    ClassificationResult {
        verdict,
        probe_min,
        probe_max,
        front_history: outcome.history.clone(),
        residual: outcome.residual,
        status: outcome.status,
        t_final: outcome.t_final,
        steps: outcome.steps,
        min_increment: outcome.min_increment,
    }
}

/// Evolves `u0` to steady state on the wall's grid and classifies it.
pub fn evolve_and_classify(
    lab: &Lab,
    spec: &ObstacleSpec,
    params: &RunParams,
    u0: &ScalarField,
    observe: impl FnMut(f64, &[f64]),
) -> Result<(ScalarField, ClassificationResult), DynamicsError> {
    let cfg = params.step_config(spec.m);
    let outcome = run_to_steady_with(u0, &lab.nl, &cfg, observe)?;
    let result = classification(&outcome, spec.m, params);
    Ok((outcome.field, result))
}

/// v̄ from the entire-solution run, with `observe` seeing every history sample.
pub fn limit_profile_with(
    lab: &Lab,
    spec: &ObstacleSpec,
    params: &RunParams,
    how: Initializer,
    observe: impl FnMut(f64, &[f64]),
) -> Result<(ScalarField, ClassificationResult), DynamicsError> {
    let grid = params.grid(spec)?;
    let t_start = default_t_start(&lab.pair, &lab.wave);
    let u0 = build_initial(&lab.wave, &lab.pair, &grid, t_start, how)?;
    evolve_and_classify(lab, spec, params, &u0, observe)
}

pub fn limit_profile(
    lab: &Lab,
    spec: &ObstacleSpec,
    params: &RunParams,
) -> Result<(ScalarField, ClassificationResult), DynamicsError> {
    limit_profile_with(lab, spec, params, Initializer::SupOverShifts, |_, _| {})
}

/// Most negative per-step increment of a run; the monotone contract is ≥ −1e-12.
pub fn monotonicity_check(run: &ClassificationResult) -> f64 {
    run.min_increment
}

#[derive(Debug, Clone, Serialize)]
pub struct UniversalityReport {
    pub point: (f64, f64),
    /// max |U^P(∞) − v̄|.
    pub bubble_gap: f64,
    /// max |U^H(∞) − v̄|.
    pub h_gap: f64,
    /// Whether Ψ^P ≤ H(x₁) held at t = 0.
    pub sandwich: bool,
    pub bubble_verdict: Verdict,
    pub h_verdict: Verdict,
}

impl UniversalityReport {
    pub fn max_gap(&self) -> f64 {
        self.bubble_gap.max(self.h_gap)
    }
}

/// Evolves Ψ^P and H(x₁) to steady state and compares both with `v_bar`.
pub fn universality_check(
    lab: &Lab,
    spec: &ObstacleSpec,
    params: &RunParams,
    v_bar: &ScalarField,
    p: (f64, f64),
) -> Result<UniversalityReport, DynamicsError> {
    let grid = v_bar.grid().clone();
    let psi = embed_bubble(&lab.bubble, p, &grid)?;
    let h0 = ScalarField::from_fn(grid, |x, _| lab.h_profile.eval(x));
    let sandwich = psi.max_excess_over(&h0)? <= 0.0;
    let (from_psi, psi_run) = evolve_and_classify(lab, spec, params, &psi, |_, _| {})?;
    let (from_h, h_run) = evolve_and_classify(lab, spec, params, &h0, |_, _| {})?;
    Ok(UniversalityReport {
        point: p,
        bubble_gap: from_psi.max_abs_diff(v_bar)?,
        h_gap: from_h.max_abs_diff(v_bar)?,
        sandwich,
        bubble_verdict: psi_run.verdict,
        h_verdict: h_run.verdict,
    })
}

/// Points every `step` along a polyline.
fn walk(path: &[(f64, f64)], step: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let n = (len / step).ceil().max(1.0) as usize;
        for k in 0..n {
            let s = k as f64 / n as f64;
            out.push((a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1)));
        }
    }
    if let Some(&last) = path.last() {
        out.push(last);
    }
    out
}

/// Slides Ψ^{P(s)} along `path` and reports whether it stays below
/// `v_bar + SLIDE_TOL` everywhere.
pub fn slide_bubble(
    bubble: &RadialBubble,
    v_bar: &ScalarField,
    path: &[(f64, f64)],
) -> Result<bool, DynamicsError> {
    let grid = v_bar.grid();
    let r = bubble.radius();
    let points = walk(path, grid.h);
    for &(x, y) in &points {
        let distance = distance_to_obstacle(grid, (x, y), r);
        if distance < r {
            return Err(DynamicsError::PathTooClose { x, y, distance, radius: r });
        }
    }
    for &p in &points {
        let psi = embed_bubble(bubble, p, grid)?;
        if psi.max_excess_over(v_bar)? > SLIDE_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize)]
pub struct SlideWReport {
    pub ok: bool,
    /// max over λ and cells of W^λ − v̄.
    pub worst_excess: f64,
    pub b_root: f64,
    pub min_v_bar: f64,
}

/// W^λ = max(ρ(x₁ − λ), ρ(M − x₁ − λ)) against v̄ for every λ.
pub fn slide_w(
    rho: &HalfLineProfile,
    m: f64,
    v_bar: &ScalarField,
    lambdas: &[f64],
) -> SlideWReport {
    let grid = v_bar.grid();
    let values = v_bar.values();
    let mut worst = f64::NEG_INFINITY;
    let mut min_v = f64::INFINITY;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            if !grid.is_fluid(k) {
                continue;
            }
            min_v = min_v.min(values[k]);
            let x = grid.x_center(i);
            for &l in lambdas {
                let w = rho.eval(x - l).max(rho.eval(m - x - l));
                worst = worst.max(w - values[k]);
            }
        }
    }
    SlideWReport { ok: worst <= SLIDE_TOL, worst_excess: worst, b_root: rho.b_root(), min_v_bar: min_v }
}

/// Default bound on |D^λ|: a twentieth of one grid cell, i.e. D^λ empty.
pub fn default_nu(h: f64) -> f64 {
    0.05 * h * h
}

#[derive(Debug, Clone, Serialize)]
pub struct SlideReport {
    pub lambdas: Vec<f64>,
    pub d_measure: Vec<f64>,
    pub max_violation: f64,
    pub nu: f64,
}

impl SlideReport {
    pub fn within_nu(&self) -> bool {
        self.max_violation <= self.nu
    }

    /// Largest drop of |D^λ| between consecutive λ (0 when nondecreasing).
    pub fn worst_decrease(&self) -> f64 {
        self.d_measure.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

/// |{ρ(x₁ − λ) > v̄}| within one lateral period, for each λ.
pub fn slide_rho(
    rho: &HalfLineProfile,
    period: f64,
    v_bar: &ScalarField,
    lambdas: &[f64],
    nu: f64,
) -> SlideReport {
    let grid = v_bar.grid();
    let cell = grid.h * grid.h;
    let d_measure: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            let mut count = 0usize;
            for j in 0..grid.ny {
                if grid.y_center(j) >= period {
                    continue;
                }
                for i in 0..grid.nx {
                    let k = grid.idx(i, j);
                    if grid.is_fluid(k) && rho.eval(grid.x_center(i) - l) > v_bar.values()[k] {
                        count += 1;
                    }
                }
            }
            count as f64 * cell
        })
        .collect();
    let max_violation = d_measure.iter().copied().fold(0.0, f64::max);
    SlideReport { lambdas: lambdas.to_vec(), d_measure, max_violation, nu }
}

/// ρ for the sliding tests, with the default forcing δ.
pub fn sliding_profile(nl: &Nonlinearity, delta_f: f64) -> Result<HalfLineProfile, DynamicsError> {
    Ok(solve_rho(nl, delta_f)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walk_covers_the_path() {
        let pts = walk(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)], 0.25);
        assert_eq!(pts.len(), 9);
        assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
    }

    #[test]
    fn extent_snaps_to_cells() {
        let p = RunParams { h: 0.05, ..RunParams::default() };
        let e = p.extent(1.0);
        assert!((e.x_min + 60.0).abs() < 1e-12 && (e.x_max - 41.0).abs() < 1e-9);
    }
}
