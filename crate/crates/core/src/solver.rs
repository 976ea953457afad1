//! Explicit monotone finite-difference stepping of u_t = Δu + f(u) on a
//! masked strip, with zero flux through every solid face.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GridDomain;
use crate::nonlin::Nonlinearity;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("time step {dt} exceeds the monotone limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Grid function with one value per cell; solid cells always hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Arc<GridDomain>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: Arc<GridDomain>, v: f64) -> Self {
        Self::from_fn(grid, |_, _| v)
    }

    /// Samples `f` at fluid cell centres.
    pub fn from_fn(grid: Arc<GridDomain>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        for j in 0..grid.ny {
            let y = grid.y_center(j);
            for i in 0..grid.nx {
                let k = grid.idx(i, j);
                if grid.is_fluid(k) {
                    values[k] = f(grid.x_center(i), y);
                }
            }
        }
        Self { grid, values }
    }

    /// Takes raw cell values, zeroing solid cells.
    pub fn from_values(grid: Arc<GridDomain>, mut values: Vec<f64>) -> Result<Self, SolverError> {
        if values.len() != grid.len() {
            return Err(SolverError::GridMismatch);
        }
        for (v, &f) in values.iter_mut().zip(grid.fluid_mask()) {
            if !f {
                *v = 0.0;
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Value of the cell containing `(x, y)`, if any.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let g = &self.grid;
        let i = ((x - g.x1_offset) / g.h).floor();
        let j = (y / g.h).floor();
        if i < 0.0 || j < 0.0 || i as usize >= g.nx || j as usize >= g.ny {
            return None;
        }
        Some(self.at(i as usize, j as usize))
    }

    fn same_grid(&self, other: &Self) -> Result<(), SolverError> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(SolverError::GridMismatch)
        }
    }

    /// Max-norm distance over fluid cells.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, SolverError> {
        self.same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// max(self − other) over fluid cells.
    pub fn max_excess_over(&self, other: &Self) -> Result<f64, SolverError> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.fluid_mask())
            .filter(|(_, &f)| f)
            .map(|((a, b), _)| a - b)
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, SolverError> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::from_values(self.grid.clone(), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::from_values(self.grid.clone(), values).expect("same length")
    }

    /// (min, max) over fluid cells whose centre satisfies `keep`.
    pub fn range_where(&self, keep: impl Fn(f64, f64) -> bool) -> Option<(f64, f64)> {
        let g = &self.grid;
        let mut out: Option<(f64, f64)> = None;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                if g.is_fluid(k) && keep(g.x_center(i), g.y_center(j)) {
                    let v = self.values[k];
                    out = Some(out.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))));
                }
            }
        }
        out
    }

    /// Mean over fluid cells whose centre satisfies `keep`.
    pub fn mean_where(&self, keep: impl Fn(f64, f64) -> bool) -> Option<f64> {
        let g = &self.grid;
        let (mut sum, mut n) = (0.0, 0usize);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                if g.is_fluid(k) && keep(g.x_center(i), g.y_center(j)) {
                    sum += self.values[k];
                    n += 1;
                }
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}

/// Default steady threshold, per unit time.
pub const DEFAULT_STEADY_TOL: f64 = 1e-7;
/// Largest admissible `dt·2N/h²`.
pub const MAX_CFL: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub dt: f64,
    pub cfl_factor: f64,
    pub steady_tol: f64,
    pub t_max: f64,
    /// History sampling interval in time units.
    #[serde(default = "default_record_every")]
    pub record_every: f64,
    /// Left edge of the probe window recorded in the history.
    #[serde(default)]
    pub probe_from: Option<f64>,
}

fn default_record_every() -> f64 {
    1.0
}

impl StepConfig {
    /// The largest step allowed by `cfl_factor` on a grid of spacing `h`.
    pub fn for_grid(h: f64, cfl_factor: f64, t_max: f64) -> Self {
        Self {
            dt: cfl_factor * h * h / 4.0,
            cfl_factor,
            steady_tol: DEFAULT_STEADY_TOL,
            t_max,
            record_every: default_record_every(),
            probe_from: None,
        }
    }

    /// Checks both the diffusive limit and nonnegativity of the update's
    /// derivative in u, which together make the scheme order-preserving.
    pub fn check(&self, h: f64, nl: &Nonlinearity) -> Result<(), SolverError> {
        let cfl = self.cfl_factor.min(MAX_CFL);
        let diffusive = cfl * h * h / 4.0;
        let reactive = 1.0 / (4.0 / (h * h) - nl.min_slope());
        let limit = diffusive.min(reactive);
        if !(self.dt > 0.0 && self.dt <= limit * (1.0 + 1e-12)) {
            return Err(SolverError::CflViolation { dt: self.dt, limit });
        }
        Ok(())
    }
}

/// Max and min of the pointwise increment over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub max_abs: f64,
    pub min_inc: f64,
}

/// Values below this are flushed to 0 so far-field tails never go
/// subnormal; the map is monotone, so ordering survives it.
const FLUSH: f64 = 1e-100;

/// Column band whose faces carry explicit weights.
#[derive(Debug, Clone)]
struct Band {
    lo: usize,
    hi: usize,
    /// Per cell of the band, row-major: east, west, north, south openness.
    weights: Vec<[f64; 4]>,
}

/// Precomputed stencil for one grid. Away from the wall and the x₁ ends
/// every face is open, so only narrow bands store weights and the bulk runs
/// a mask-free loop.
#[derive(Debug, Clone)]
struct Stencil {
    nx: usize,
    ny: usize,
    north_row: Vec<usize>,
    south_row: Vec<usize>,
    north_open: Vec<f64>,
    south_open: Vec<f64>,
    bands: Vec<Band>,
    /// Mask-free column ranges, all inside `1..nx-1`.
    plain: Vec<(usize, usize)>,
}

impl Stencil {
    fn new(g: &GridDomain) -> Self {
        let (nx, ny) = (g.nx, g.ny);
        let mut weighted = vec![false; nx];
        weighted[0] = true;
        weighted[nx - 1] = true;
        for i in 0..nx {
            if (0..ny).any(|j| !g.is_fluid(g.idx(i, j))) {
                for k in i.saturating_sub(1)..=(i + 1).min(nx - 1) {
                    weighted[k] = true;
                }
            }
        }
        let open = |a: usize, b: Option<usize>| b.is_some_and(|b| g.is_fluid(a) && g.is_fluid(b));
        let mut bands = Vec::new();
        let mut plain = Vec::new();
        let mut i = 0;
        while i < nx {
            let start = i;
            while i < nx && weighted[i] == weighted[start] {
                i += 1;
            }
            if !weighted[start] {
                plain.push((start, i));
                continue;
            }
            let mut weights = Vec::with_capacity((i - start) * ny);
            for j in 0..ny {
                for col in start..i {
                    let k = g.idx(col, j);
                    let w = |b: bool| if b { 1.0 } else { 0.0 };
                    weights.push([
                        w(open(k, (col + 1 < nx).then(|| k + 1))),
                        w(open(k, (col > 0).then(|| k - 1))),
                        w(open(k, g.north(j).map(|jn| g.idx(col, jn)))),
                        w(open(k, g.south(j).map(|js| g.idx(col, js)))),
                    ]);
                }
            }
            bands.push(Band { lo: start, hi: i, weights });
        }
        Self {
            nx,
            ny,
            north_row: (0..ny).map(|j| g.north(j).unwrap_or(j)).collect(),
            south_row: (0..ny).map(|j| g.south(j).unwrap_or(j)).collect(),
            north_open: (0..ny).map(|j| if g.north(j).is_some() { 1.0 } else { 0.0 }).collect(),
            south_open: (0..ny).map(|j| if g.south(j).is_some() { 1.0 } else { 0.0 }).collect(),
            bands,
            plain,
        }
    }

    /// `out = u + dt (Δ_h u + f(u))`, returning increment statistics.
    fn apply(&self, u: &[f64], out: &mut [f64], nl: &Nonlinearity, dt: f64, h: f64) -> StepStats {
        let nx = self.nx;
        let r = dt / (h * h);
        let mut max_abs = [0.0f64; 4];
        let mut min_inc = [0.0f64; 4];
        let cell = |v: f64, lap: f64| {
            let next = v + r * lap + dt * nl.f(v);
            if next.abs() < FLUSH {
                0.0
            } else {
                next
            }
        };
        for j in 0..self.ny {
            let row = j * nx..(j + 1) * nx;
            let uc = &u[row.clone()];
            let un = &u[self.north_row[j] * nx..][..nx];
            let us = &u[self.south_row[j] * nx..][..nx];
            let o = &mut out[row];
            for band in &self.bands {
                let width = band.hi - band.lo;
                let wrow = &band.weights[j * width..(j + 1) * width];
                for (col, w) in (band.lo..band.hi).zip(wrow) {
                    let v = uc[col];
                    let e = uc[(col + 1).min(nx - 1)];
                    let west = uc[col.saturating_sub(1)];
                    let lap = w[0] * (e - v) + w[1] * (west - v) + w[2] * (un[col] - v)
                        + w[3] * (us[col] - v);
                    o[col] = cell(v, lap);
                }
            }
            let (nf, sf) = (self.north_open[j], self.south_open[j]);
            for &(a, b) in &self.plain {
                // Equal-length slices: no bounds checks, no branches.
                let n = b - a;
                let (c, e, w) = (&uc[a..b], &uc[a + 1..b + 1], &uc[a - 1..b - 1]);
                let (nn, ss) = (&un[a..b], &us[a..b]);
                let oc = &mut o[a..b];
                for i in 0..n {
                    let v = c[i];
                    let lap = (e[i] - v) + (w[i] - v) + nf * (nn[i] - v) + sf * (ss[i] - v);
                    oc[i] = cell(v, lap);
                }
            }
            let mut oc = o.chunks_exact(4);
            let mut cc = uc.chunks_exact(4);
            for (a, b) in (&mut oc).zip(&mut cc) {
                for lane in 0..4 {
                    let d = a[lane] - b[lane];
                    max_abs[lane] = max_abs[lane].max(d.abs());
                    min_inc[lane] = min_inc[lane].min(d);
                }
            }
            for (a, b) in oc.remainder().iter().zip(cc.remainder()) {
                let d = a - b;
                max_abs[0] = max_abs[0].max(d.abs());
                min_inc[0] = min_inc[0].min(d);
            }
        }
        StepStats {
            max_abs: max_abs.into_iter().fold(0.0, f64::max),
            min_inc: min_inc.into_iter().fold(0.0, f64::min),
        }
    }
}

/// One explicit step.
pub fn step(u: &ScalarField, nl: &Nonlinearity, cfg: &StepConfig) -> Result<ScalarField, SolverError> {
    cfg.check(u.grid.h, nl)?;
    let stencil = Stencil::new(&u.grid);
    let mut out = vec![0.0; u.values.len()];
    stencil.apply(&u.values, &mut out, nl, cfg.dt, u.grid.h);
    Ok(ScalarField { grid: u.grid.clone(), values: out })
}

/// An evolution in progress: owns its two buffers and swaps them each step.
#[derive(Debug, Clone)]
pub struct Evolution {
    grid: Arc<GridDomain>,
    nl: Nonlinearity,
    dt: f64,
    stencil: Stencil,
    u: Vec<f64>,
    next: Vec<f64>,
    steps: u64,
    last: StepStats,
    min_increment: f64,
}

impl Evolution {
    pub fn new(u0: &ScalarField, nl: &Nonlinearity, cfg: &StepConfig) -> Result<Self, SolverError> {
        cfg.check(u0.grid.h, nl)?;
        Ok(Self {
            stencil: Stencil::new(&u0.grid),
            grid: u0.grid.clone(),
            nl: *nl,
            dt: cfg.dt,
            u: u0.values.clone(),
            next: vec![0.0; u0.values.len()],
            steps: 0,
            last: StepStats { max_abs: f64::INFINITY, min_inc: 0.0 },
            min_increment: 0.0,
        })
    }

    pub fn advance(&mut self) -> StepStats {
        let stats = self.stencil.apply(&self.u, &mut self.next, &self.nl, self.dt, self.grid.h);
        std::mem::swap(&mut self.u, &mut self.next);
        self.steps += 1;
        self.last = stats;
        self.min_increment = self.min_increment.min(stats.min_inc);
        stats
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn field(&self) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.u.clone() }
    }

    pub fn into_field(self) -> ScalarField {
        ScalarField { grid: self.grid, values: self.u }
    }

    pub fn grid(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn last(&self) -> StepStats {
        self.last
    }

    /// Most negative pointwise increment seen so far (0 if none).
    pub fn min_increment(&self) -> f64 {
        self.min_increment
    }
}

/// Rightmost 0.5 crossing along the row nearest the strip's centreline.
/// Between two fluid cells it is linearly interpolated; a front stalled
/// against a solid face (or the grid end) is reported at that face. With no
/// value ≥ 0.5 on the row, the left end of the grid is reported.
pub fn front_position(grid: &GridDomain, values: &[f64]) -> f64 {
    let j = grid.ny / 2;
    let row = &values[j * grid.nx..(j + 1) * grid.nx];
    let fluid = |i: usize| grid.is_fluid(grid.idx(i, j));
    let Some(i) = (0..grid.nx).rev().find(|&i| fluid(i) && row[i] >= 0.5) else {
        return grid.x1_offset;
    };
    if i + 1 < grid.nx && fluid(i + 1) {
        grid.x_center(i) + grid.h * (row[i] - 0.5) / (row[i] - row[i + 1])
    } else {
        grid.x_center(i) + 0.5 * grid.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub t: f64,
    pub front_x: f64,
    pub probe_min: f64,
    pub probe_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Steady,
    HorizonReached,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub field: ScalarField,
    pub history: Vec<HistoryRow>,
    pub status: RunStatus,
    pub t_final: f64,
    pub steps: u64,
    /// Most negative per-step increment over the run.
    pub min_increment: f64,
    /// Max-norm of the discrete time derivative at the last step.
    pub residual: f64,
}

fn history_row(ev: &Evolution, probe_from: f64) -> HistoryRow {
    let g = ev.grid();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..g.nx {
        if g.x_center(i) < probe_from {
            continue;
        }
        for j in 0..g.ny {
            let k = g.idx(i, j);
            if g.is_fluid(k) {
                lo = lo.min(ev.values()[k]);
                hi = hi.max(ev.values()[k]);
            }
        }
    }
    HistoryRow { t: ev.time(), front_x: front_position(g, ev.values()), probe_min: lo, probe_max: hi }
}

/// Steps until the increment falls below `steady_tol·dt` or `t_max` is hit;
/// `observe` sees the field at every history sample.
pub fn run_to_steady_with(
    u0: &ScalarField,
    nl: &Nonlinearity,
    cfg: &StepConfig,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<RunOutcome, SolverError> {
    let mut ev = Evolution::new(u0, nl, cfg)?;
    let g = u0.grid.clone();
    let probe_from = cfg.probe_from.unwrap_or(g.x1_offset + 0.75 * (g.x_max() - g.x1_offset));
    let stride = ((cfg.record_every / cfg.dt).round() as u64).max(1);
    let max_steps = (cfg.t_max / cfg.dt).ceil() as u64;
    let mut history = vec![history_row(&ev, probe_from)];
    observe(0.0, ev.values());
    let mut status = RunStatus::HorizonReached;
    while ev.steps() < max_steps {
        let stats = ev.advance();
        let steady = stats.max_abs < cfg.steady_tol * cfg.dt;
        if ev.steps() % stride == 0 || steady {
            history.push(history_row(&ev, probe_from));
            observe(ev.time(), ev.values());
        }
        if steady {
            status = RunStatus::Steady;
            break;
        }
    }
    let residual = if ev.steps() == 0 { 0.0 } else { ev.last().max_abs / cfg.dt };
    Ok(RunOutcome {
        history,
        status,
        t_final: ev.time(),
        steps: ev.steps(),
        min_increment: ev.min_increment(),
        residual,
        field: ev.into_field(),
    })
}

pub fn run_to_steady(u0: &ScalarField, nl: &Nonlinearity, cfg: &StepConfig) -> Result<RunOutcome, SolverError> {
    run_to_steady_with(u0, nl, cfg, |_, _| {})
}

/// Evolves both fields in lockstep for `t_max` and reports whether
/// `u ≤ v` held on every cell after every step.
pub fn compare_evolutions(
    u0: &ScalarField,
    v0: &ScalarField,
    nl: &Nonlinearity,
    cfg: &StepConfig,
) -> Result<bool, SolverError> {
    u0.same_grid(v0)?;
    let ordered = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x <= y);
    if !ordered(&u0.values, &v0.values) {
        return Ok(false);
    }
    let mut u = Evolution::new(u0, nl, cfg)?;
    let mut v = Evolution::new(v0, nl, cfg)?;
    let steps = (cfg.t_max / cfg.dt).ceil() as u64;
    for _ in 0..steps {
        u.advance();
        v.advance();
        if !ordered(u.values(), v.values()) {
            return Ok(false);
        }
    }
    Ok(true)
}
