//! Blocking barriers: discrete minimizers of the wall energy that are
//! stationary supersolutions equal to 1 on the left and small beyond the
//! wall, the reservoir barrier, and the relative Poincaré ratio.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    hole_measure, rasterize, Extent, GeometryError, GridDomain, LateralBc, ObstacleSpec, Rect,
};
use crate::nonlin::{BarrierConstants, Nonlinearity};
use crate::solver::{ScalarField, SolverError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BarrierError {
    #[error("descent stopped after {iterations} iterations with projected gradient {gradient:e}")]
    NotConverged { iterations: usize, gradient: f64 },
    #[error("opening measure is {ratio:.1} times the admissible bound; no certificate")]
    Infeasible { ratio: f64 },
    #[error("field has empty support")]
    EmptySupport,
    #[error("wall has no slab [a, b]")]
    NoSlab,
    #[error("wall is not a reservoir")]
    NotReservoir,
    #[error("barrier field lives on a grid that does not line up with the run")]
    Misaligned,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Truncation distance right of the slab.
pub const TRUNCATION: f64 = 20.0;
/// `right_tail` looks at `x₁ ≥ b + TAIL_FROM`.
pub const TAIL_FROM: f64 = 5.0;
/// Openings this many times larger than the bound are refused outright.
pub const INFEASIBLE_RATIO: f64 = 100.0;
/// Random starts of the Rayleigh minimization on each subdomain.
pub const PW_SAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Global minimizer under the mean constraint on every subdomain, with a
    /// free (Neumann) right end.
    #[default]
    Constrained,
    /// Local minimizer near ζ on the truncated cylinder with w = 0 on the
    /// right end and no mean constraint.
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierConfig {
    pub a: f64,
    pub b: f64,
    pub r_trunc: f64,
    pub delta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub variant: Variant,
    /// Stop when the projected gradient (in residual units) falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl BarrierConfig {
    pub fn new(a: f64, b: f64, k: BarrierConstants) -> Self {
        Self {
            a,
            b,
            r_trunc: b + TRUNCATION,
            delta: k.delta,
            mu: k.mu,
            sigma: k.sigma,
            variant: Variant::Constrained,
            tol: 1e-7,
            max_iter: 200_000,
            seed: 0,
        }
    }

    pub fn for_wall(spec: &ObstacleSpec, k: BarrierConstants) -> Result<Self, BarrierError> {
        let (a, b) = spec.slab().ok_or(BarrierError::NoSlab)?;
        Ok(Self::new(a, b, k))
    }

    /// The truncated domain `[−1, r_trunc] × [0, height]`.
    pub fn grid(
        &self,
        spec: &ObstacleSpec,
        h: f64,
        height: f64,
        bc: LateralBc,
    ) -> Result<Arc<GridDomain>, BarrierError> {
        let e = Extent { x_min: -1.0, x_max: self.r_trunc, height };
        Ok(Arc::new(rasterize(spec, h, e, bc)?))
    }

    /// The constant of the smallness condition: a transition layer of
    /// length `len` costs at most `1/(2 len²) − F(α) + F(1)` per unit area.
    fn layer_cost(&self, nl: &Nonlinearity, len: f64) -> f64 {
        1.0 / (2.0 * len * len) - nl.primitive(nl.alpha()) + nl.f_one()
    }
}

/// How the opening compares with `σ·D_min / layer cost`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub opening: f64,
    pub bound: f64,
    pub ratio: f64,
    /// The sufficient condition itself (ratio < 1).
    pub holds: bool,
}

/// Unit squares tiling a region, as lists of grid cells.
#[derive(Debug, Clone)]
pub struct Subdomains {
    pub cells: Vec<Vec<usize>>,
    pub d_min: f64,
}

/// Tiles the cells accepted by `keep` with unit squares anchored at
/// `origin`. Pieces smaller than half a square are merged into a neighbour.
pub fn unit_tiles(grid: &GridDomain, origin: (f64, f64), keep: impl Fn(usize, f64, f64) -> bool) -> Subdomains {
    let mut tiles: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for j in 0..grid.ny {
        let y = grid.y_center(j);
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let x = grid.x_center(i);
            if grid.is_fluid(k) && keep(k, x, y) {
                let key = ((x - origin.0).floor() as i64, (y - origin.1).floor() as i64);
                tiles.entry(key).or_default().push(k);
            }
        }
    }
    let cell = grid.h * grid.h;
    loop {
        let mut keys: Vec<_> = tiles.keys().copied().collect();
        keys.sort();
        let small = keys.iter().copied().find(|key| (tiles[key].len() as f64) * cell < 0.5 - 1e-9);
        let Some((ix, iy)) = small else { break };
        let target = [(ix, iy - 1), (ix - 1, iy), (ix, iy + 1), (ix + 1, iy)]
            .into_iter()
            .find(|t| tiles.contains_key(t));
        let Some(target) = target else { break };
        let moved = tiles.remove(&(ix, iy)).unwrap_or_default();
        tiles.get_mut(&target).expect("neighbour tile").extend(moved);
    }
    let mut keys: Vec<_> = tiles.keys().copied().collect();
    keys.sort();
    let cells: Vec<Vec<usize>> = keys.into_iter().map(|k| tiles.remove(&k).unwrap_or_default()).collect();
    let d_min = cells.iter().map(|c| c.len() as f64 * cell).fold(f64::INFINITY, f64::min);
    Subdomains { cells, d_min }
}

/// Smallest Rayleigh quotient ∫|∇φ|² / ∫(φ − φ̄)² found on each tile by
/// Ritz descent from `PW_SAMPLES` random smooth zero-mean fields; tiles of
/// identical shape are checked once.
pub fn pw_estimate(grid: &GridDomain, tiles: &Subdomains, seed: u64) -> f64 {
    let mut seen: HashMap<Vec<(usize, usize)>, f64> = HashMap::new();
    let mut best = f64::INFINITY;
    for tile in &tiles.cells {
        let i0 = tile.iter().map(|&k| k % grid.nx).min().unwrap_or(0);
        let j0 = tile.iter().map(|&k| k / grid.nx).min().unwrap_or(0);
        let mut shape: Vec<(usize, usize)> =
            tile.iter().map(|&k| (k % grid.nx - i0, k / grid.nx - j0)).collect();
        shape.sort();
        let v = *seen.entry(shape).or_insert_with(|| tile_rayleigh(grid, tile, seed));
        best = best.min(v);
    }
    best
}

fn tile_rayleigh(grid: &GridDomain, tile: &[usize], seed: u64) -> f64 {
    let n = tile.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let local: HashMap<usize, usize> = tile.iter().enumerate().map(|(l, &k)| (k, l)).collect();
    // Faces inside the tile only: Neumann on its boundary.
    let mut faces = Vec::new();
    for (l, &k) in tile.iter().enumerate() {
        let (i, j) = (k % grid.nx, k / grid.nx);
        let east = (i + 1 < grid.nx).then(|| grid.idx(i + 1, j));
        let north = grid.north(j).map(|jn| grid.idx(i, jn));
        for nb in [east, north].into_iter().flatten() {
            if let Some(&m) = local.get(&nb) {
                faces.push((l, m));
            }
        }
    }
    let h2 = grid.h * grid.h;
    let apply = |v: &[f64]| {
        let mut out = vec![0.0; n];
        for &(p, q) in &faces {
            let d = (v[p] - v[q]) / h2;
            out[p] += d;
            out[q] -= d;
        }
        out
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let center = |v: &mut Vec<f64>| {
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= m);
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        tile.iter().map(|&k| (grid.x_center(k % grid.nx), grid.y_center(k / grid.nx))).unzip();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, (hi - lo).max(grid.h))
    };
    let ((x0, lx), (y0, ly)) = (span(&xs), span(&ys));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
    let mut best = f64::INFINITY;
    for _ in 0..PW_SAMPLES {
        let coef: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut v: Vec<f64> = (0..n)
            .map(|l| {
                let (sx, sy) = ((xs[l] - x0) / lx, (ys[l] - y0) / ly);
                let mut s = 0.1 * rng.gen_range(-1.0..1.0);
                for p in 0..3 {
                    for q in 0..3 {
                        s += coef[3 * p + q]
                            * (std::f64::consts::PI * p as f64 * sx).cos()
                            * (std::f64::consts::PI * q as f64 * sy).cos();
                    }
                }
                s
            })
            .collect();
        center(&mut v);
        let mut rq = f64::INFINITY;
        for _ in 0..150 {
            let av = apply(&v);
            let vv = dot(&v, &v);
            if vv == 0.0 {
                break;
            }
            rq = dot(&v, &av) / vv;
            let mut g: Vec<f64> = av.iter().zip(&v).map(|(a, x)| a - rq * x).collect();
            center(&mut g);
            let gg = dot(&g, &g);
            if gg <= 1e-24 * vv {
                break;
            }
            // Ritz step on span{v, g}.
            let ag = apply(&g);
            let (a11, a12, a22) = (dot(&v, &av), dot(&v, &ag), dot(&g, &ag));
            let (b11, b12, b22) = (vv, dot(&v, &g), gg);
            let qa = b11 * b22 - b12 * b12;
            let qb = -(a11 * b22 + a22 * b11 - 2.0 * a12 * b12);
            let qc = a11 * a22 - a12 * a12;
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
            let lam = (-qb - disc) / (2.0 * qa);
            // (A − λB) y = 0 for y = (1, s).
            let s = if (a12 - lam * b12).abs() > (a22 - lam * b22).abs() * 1e-300 {
                -(a11 - lam * b11) / (a12 - lam * b12)
            } else {
                0.0
            };
            if !s.is_finite() {
                break;
            }
            for (x, gi) in v.iter_mut().zip(&g) {
                *x += s * gi;
            }
            let norm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        best = best.min(rq);
    }
    best
}

/// ζ: 1 left of a, linear on [a, b], 0 right of b.
pub fn zeta_field(cfg: &BarrierConfig, grid: &Arc<GridDomain>) -> ScalarField {
    let (a, b) = (cfg.a, cfg.b);
    ScalarField::from_fn(grid.clone(), |x, _| ((b - x) / (b - a)).clamp(0.0, 1.0))
}

/// The discrete variational problem on a set of cells.
struct Problem {
    h: f64,
    /// Grid indices of the cells taking part.
    cells: Vec<usize>,
    free: Vec<bool>,
    /// Compact neighbour indices over open faces (E, N only: each face once).
    faces: Vec<(u32, u32)>,
    /// Cells whose integrand carries +F(1).
    shifted: Vec<bool>,
    tile_of: Vec<u32>,
    tile_len: Vec<usize>,
    delta: f64,
    constrained: bool,
}

const NO_TILE: u32 = u32::MAX;

impl Problem {
    fn new(
        grid: &GridDomain,
        cells: Vec<usize>,
        free: Vec<bool>,
        shifted: Vec<bool>,
        tiles: &Subdomains,
        delta: f64,
        constrained: bool,
    ) -> Self {
        let local: HashMap<usize, u32> = cells.iter().enumerate().map(|(l, &k)| (k, l as u32)).collect();
        let mut faces = Vec::new();
        for (l, &k) in cells.iter().enumerate() {
            let (i, j) = (k % grid.nx, k / grid.nx);
            let east = (i + 1 < grid.nx).then(|| grid.idx(i + 1, j));
            let north = grid.north(j).map(|jn| grid.idx(i, jn));
            for nb in [east, north].into_iter().flatten() {
                if let Some(&m) = local.get(&nb) {
                    faces.push((l as u32, m));
                }
            }
        }
        let mut tile_of = vec![NO_TILE; cells.len()];
        let mut tile_len = Vec::new();
        for (t, tile) in tiles.cells.iter().enumerate() {
            let mut count = 0;
            for k in tile {
                if let Some(&l) = local.get(k) {
                    if free[l as usize] {
                        tile_of[l as usize] = t as u32;
                        count += 1;
                    }
                }
            }
            tile_len.push(count);
        }
        Self { h: grid.h, cells, free, faces, shifted, tile_of, tile_len, delta, constrained }
    }

    fn energy(&self, w: &[f64], nl: &Nonlinearity) -> f64 {
        let h2 = self.h * self.h;
        let f1 = nl.f_one();
        let bulk: f64 = w
            .iter()
            .zip(&self.shifted)
            .map(|(&v, &s)| h2 * (-nl.primitive(v) + if s { f1 } else { 0.0 }))
            .sum();
        let grad: f64 = self
            .faces
            .iter()
            .map(|&(p, q)| {
                let d = w[p as usize] - w[q as usize];
                0.5 * d * d
            })
            .sum();
        bulk + grad
    }

    /// −(Δ_h w + f(w)) on free cells, 0 on fixed ones.
    fn gradient(&self, w: &[f64], nl: &Nonlinearity, out: &mut [f64]) {
        let h2 = self.h * self.h;
        for (o, &v) in out.iter_mut().zip(w) {
            *o = -nl.f(v);
        }
        for &(p, q) in &self.faces {
            let d = (w[p as usize] - w[q as usize]) / h2;
            out[p as usize] += d;
            out[q as usize] -= d;
        }
        for (o, &f) in out.iter_mut().zip(&self.free) {
            if !f {
                *o = 0.0;
            }
        }
    }

    fn means(&self, w: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.tile_len.len()];
        for (&t, &v) in self.tile_of.iter().zip(w) {
            if t != NO_TILE {
                sums[t as usize] += v;
            }
        }
        sums.iter().zip(&self.tile_len).map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 }).collect()
    }

    /// Clip to [0, 1]; under the mean constraint also lower offending
    /// subdomains uniformly by their excess, repeating while clipping at 0
    /// pushes a mean back over δ.
    fn project(&self, w: &mut [f64]) {
        for (v, &f) in w.iter_mut().zip(&self.free) {
            if f {
                *v = v.clamp(0.0, 1.0);
            }
        }
        if !self.constrained {
            return;
        }
        for _ in 0..50 {
            let excess: Vec<f64> = self.means(w).iter().map(|m| (m - self.delta).max(0.0)).collect();
            if excess.iter().all(|&e| e <= 0.0) {
                break;
            }
            for (v, &t) in w.iter_mut().zip(&self.tile_of) {
                if t != NO_TILE {
                    *v = (*v - excess[t as usize]).clamp(0.0, 1.0);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierResult {
    pub w0: ScalarField,
    /// Cells where the barrier is defined (free or held at a boundary value).
    pub region: Vec<bool>,
    /// Cells where it was optimized.
    pub free: Vec<bool>,
    pub variant: Variant,
    pub energy: f64,
    pub energy_zeta: f64,
    pub el_residual: f64,
    /// max_j (mean of w0 on D_j) − δ.
    pub constraint_slack: f64,
    /// max of w0 on {x₁ ≥ b + 5}; for the reservoir, on the cavity.
    pub right_tail: f64,
    pub means: Vec<f64>,
    pub feasibility: Feasibility,
    /// Smallest Rayleigh quotient found on the subdomains, against 2μ.
    pub pw_estimate: f64,
    pub pw_ok: bool,
    pub iterations: usize,
    /// Projected-gradient size at exit.
    pub gradient: f64,
    pub restarts: usize,
    /// Largest energy increase over accepted steps (round-off only).
    pub max_energy_rise: f64,
}

/// Serializable digest of a [`BarrierResult`].
#[derive(Debug, Clone, Serialize)]
pub struct BarrierSummary {
    pub variant: Variant,
    pub energy: f64,
    pub energy_zeta: f64,
    pub el_residual: f64,
    pub constraint_slack: f64,
    pub right_tail: f64,
    pub feasibility: Feasibility,
    pub pw_estimate: f64,
    pub pw_ok: bool,
    pub iterations: usize,
    pub restarts: usize,
}

impl BarrierResult {
    pub fn summary(&self) -> BarrierSummary {
        BarrierSummary {
            variant: self.variant,
            energy: self.energy,
            energy_zeta: self.energy_zeta,
            el_residual: self.el_residual,
            constraint_slack: self.constraint_slack,
            right_tail: self.right_tail,
            feasibility: self.feasibility,
            pw_estimate: self.pw_estimate,
            pw_ok: self.pw_ok,
            iterations: self.iterations,
            restarts: self.restarts,
        }
    }

    pub fn is_certificate(&self) -> bool {
        self.constraint_slack < 0.0
    }

    /// max over the barrier's region of `u − w0`, for a field on a grid
    /// with the same spacing whose cells line up with the barrier's.
    pub fn excess_over(&self, grid: &GridDomain, values: &[f64]) -> Result<f64, BarrierError> {
        let g = self.w0.grid();
        let shift = (g.x1_offset - grid.x1_offset) / g.h;
        if (g.h - grid.h).abs() > 1e-12 || (shift - shift.round()).abs() > 1e-6 || g.ny != grid.ny {
            return Err(BarrierError::Misaligned);
        }
        let shift = shift.round() as i64;
        let mut worst = f64::NEG_INFINITY;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                let iu = i as i64 + shift;
                if !self.region[k] || iu < 0 || iu >= grid.nx as i64 {
                    continue;
                }
                let ku = grid.idx(iu as usize, j);
                if grid.is_fluid(ku) {
                    worst = worst.max(values[ku] - self.w0.values()[k]);
                }
            }
        }
        Ok(worst)
    }

    /// min of −(Δ_h w0 + f(w0)) over the free cells.
    pub fn supersolution_margin(&self, nl: &Nonlinearity) -> f64 {
        verify_supersolution(&self.w0, &self.free, nl)
    }
}

/// min over `interior` fluid cells of −(Δ_h w + f(w)), with zero flux
/// through solid faces. A discrete supersolution has a nonnegative margin.
pub fn verify_supersolution(w: &ScalarField, interior: &[bool], nl: &Nonlinearity) -> f64 {
    let g = w.grid();
    let v = w.values();
    let h2 = g.h * g.h;
    let mut worst = f64::INFINITY;
    for k in 0..g.len() {
        if !interior[k] || !g.is_fluid(k) {
            continue;
        }
        let lap: f64 = g.neighbours(k).into_iter().map(|m| v[m] - v[k]).sum::<f64>() / h2;
        worst = worst.min(-(lap + nl.f(v[k])));
    }
    worst
}

/// Interior cells of a grid for [`verify_supersolution`]: fluid cells off
/// the first and last columns.
pub fn interior_cells(grid: &GridDomain) -> Vec<bool> {
    (0..grid.len())
        .map(|k| {
            let i = k % grid.nx;
            grid.is_fluid(k) && i > 0 && i + 1 < grid.nx
        })
        .collect()
}

/// J on the whole grid: `|∇w|²/2 − F(w) + F(1)` left of b, `|∇w|²/2 − F(w)`
/// right of it, gradients by forward differences across open faces.
pub fn energy_j(w: &ScalarField, cfg: &BarrierConfig, nl: &Nonlinearity) -> f64 {
    let g = w.grid();
    let cells: Vec<usize> = (0..g.len()).filter(|&k| g.is_fluid(k)).collect();
    let shifted = cells.iter().map(|&k| g.x_center(k % g.nx) < cfg.b).collect();
    let free = vec![true; cells.len()];
    let empty = Subdomains { cells: vec![], d_min: f64::INFINITY };
    let p = Problem::new(g, cells.clone(), free, shifted, &empty, cfg.delta, false);
    let local: Vec<f64> = cells.iter().map(|&k| w.values()[k]).collect();
    p.energy(&local, nl)
}

struct Descent {
    w: Vec<f64>,
    iterations: usize,
    restarts: usize,
    max_rise: f64,
    residual: f64,
}

/// Projected FISTA with restart whenever the energy would rise.
fn descend(p: &Problem, w0: Vec<f64>, nl: &Nonlinearity, tol: f64, max_iter: usize) -> Result<Descent, BarrierError> {
    let n = w0.len();
    let tau = 1.0 / (8.0 / (p.h * p.h) + nl.lipschitz());
    let mut x = w0;
    p.project(&mut x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut j_x = p.energy(&x, nl);
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let (mut restarts, mut max_rise) = (0, 0.0f64);
    let step = |from: &[f64], g: &mut Vec<f64>, out: &mut Vec<f64>| {
        p.gradient(from, nl, g);
        for k in 0..n {
            out[k] = from[k] - tau * g[k];
        }
        p.project(out);
    };
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        if it % 20 == 0 {
            // Projected-gradient size at x, in residual units.
            step(&x, &mut g, &mut trial);
            residual = x.iter().zip(&trial).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / tau;
            if residual < tol {
                return Ok(Descent { w: x, iterations: it, restarts, max_rise, residual });
            }
        }
        step(&y, &mut g, &mut trial);
        let mut j_new = p.energy(&trial, nl);
        if j_new > j_x {
            restarts += 1;
            t = 1.0;
            step(&x, &mut g, &mut trial);
            j_new = p.energy(&trial, nl);
            max_rise = max_rise.max(j_new - j_x);
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_new;
        for k in 0..n {
            y[k] = trial[k] + beta * (trial[k] - x[k]);
        }
        std::mem::swap(&mut x, &mut trial);
        t = t_new;
        j_x = j_new;
    }
    Err(BarrierError::NotConverged { iterations: max_iter, gradient: residual })
}

fn finish(
    grid: &Arc<GridDomain>,
    p: &Problem,
    d: Descent,
    nl: &Nonlinearity,
    energy_zeta: f64,
    variant: Variant,
    feasibility: Feasibility,
    pw_estimate: f64,
    pw_ok: bool,
    tail: impl Fn(f64, f64) -> bool,
) -> Result<BarrierResult, BarrierError> {
    let mut values = vec![0.0; grid.len()];
    let mut region = vec![false; grid.len()];
    let mut free = vec![false; grid.len()];
    for (l, &k) in p.cells.iter().enumerate() {
        values[k] = d.w[l];
        region[k] = true;
        free[k] = p.free[l];
    }
    let mut g = vec![0.0; d.w.len()];
    p.gradient(&d.w, nl, &mut g);
    let el_residual = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let means = p.means(&d.w);
    let constraint_slack = means.iter().map(|m| m - p.delta).fold(f64::NEG_INFINITY, f64::max);
    let right_tail = p
        .cells
        .iter()
        .zip(&d.w)
        .filter(|(&k, _)| tail(grid.x_center(k % grid.nx), grid.y_center(k / grid.nx)))
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    Ok(BarrierResult {
        w0: ScalarField::from_values(grid.clone(), values)?,
        region,
        free,
        variant,
        energy: p.energy(&d.w, nl),
        energy_zeta,
        el_residual,
        constraint_slack,
        right_tail,
        means,
        feasibility,
        pw_estimate,
        pw_ok,
        iterations: d.iterations,
        gradient: d.residual,
        restarts: d.restarts,
        max_energy_rise: d.max_rise,
    })
}

fn feasibility(opening: f64, sigma: f64, d_min: f64, cost: f64) -> Result<Feasibility, BarrierError> {
    let bound = sigma * d_min / cost;
    let ratio = opening / bound;
    if ratio >= INFEASIBLE_RATIO {
        return Err(BarrierError::Infeasible { ratio });
    }
    Ok(Feasibility { opening, bound, ratio, holds: ratio < 1.0 })
}

/// Minimizes J from ζ on the truncated grid of `cfg`. The left column is
/// held at 1; the cylinder variant also holds the right column at 0.
pub fn minimize_barrier(
    spec: &ObstacleSpec,
    cfg: &BarrierConfig,
    nl: &Nonlinearity,
    grid: &Arc<GridDomain>,
) -> Result<BarrierResult, BarrierError> {
    let g = grid.as_ref();
    let period = spec.period().unwrap_or(g.height()).min(g.height());
    let held_right = cfg.variant == Variant::Cylinder;
    let tiles = unit_tiles(g, (cfg.b, 0.0), |k, x, y| {
        x > cfg.b && y < period && !(held_right && k % g.nx == g.nx - 1)
    });
    let opening = hole_measure(spec, g);
    let feas = feasibility(opening, cfg.sigma, tiles.d_min, cfg.layer_cost(nl, cfg.b - cfg.a))?;
    let pw = pw_estimate(g, &tiles, cfg.seed);

    let cells: Vec<usize> = (0..g.len()).filter(|&k| g.is_fluid(k)).collect();
    let col = |k: usize| k % g.nx;
    let free: Vec<bool> = cells
        .iter()
        .map(|&k| col(k) > 0 && !(cfg.variant == Variant::Cylinder && col(k) == g.nx - 1))
        .collect();
    let shifted = cells.iter().map(|&k| g.x_center(col(k)) < cfg.b).collect();
    let p = Problem::new(g, cells.clone(), free, shifted, &tiles, cfg.delta, cfg.variant == Variant::Constrained);
    let zeta = zeta_field(cfg, grid);
    let start: Vec<f64> = cells.iter().map(|&k| zeta.values()[k]).collect();
    let energy_zeta = p.energy(&start, nl);
    let d = descend(&p, start, nl, cfg.tol, cfg.max_iter)?;
    let from = cfg.b + TAIL_FROM;
    finish(grid, &p, d, nl, energy_zeta, cfg.variant, feas, pw, pw >= 2.0 * cfg.mu, |x, _| x >= from)
}

/// The reservoir barrier V: J_res minimized over channel ∪ cavity with V = 1
/// just outside the mouth, the channel carrying +F(1), and the mean
/// constraint on unit squares tiling the cavity.
pub fn reservoir_barrier(
    spec: &ObstacleSpec,
    k: BarrierConstants,
    nl: &Nonlinearity,
    grid: &Arc<GridDomain>,
) -> Result<BarrierResult, BarrierError> {
    let parts = spec.reservoir_parts().ok_or(BarrierError::NotReservoir)?;
    let g = grid.as_ref();
    let inside = |r: &Rect, x: f64, y: f64| r.contains(x, y);
    let ch = parts.channel;
    let mouth = Rect { x0: ch.x0 - g.h, x1: ch.x0, ..ch };
    let tiles = unit_tiles(g, (parts.cavity.x0, parts.cavity.y0), |_, x, y| inside(&parts.cavity, x, y));
    let opening = ch.area();
    let feas = feasibility(opening, k.sigma, tiles.d_min, 1.0 / (2.0 * (ch.x1 - ch.x0).powi(2)) - nl.primitive(nl.alpha()) + nl.f_one())?;
    let pw = pw_estimate(g, &tiles, 0);

    let mut cells = Vec::new();
    let mut free = Vec::new();
    let mut shifted = Vec::new();
    for kk in 0..g.len() {
        if !g.is_fluid(kk) {
            continue;
        }
        let (x, y) = (g.x_center(kk % g.nx), g.y_center(kk / g.nx));
        if inside(&mouth, x, y) {
            cells.push(kk);
            free.push(false);
            shifted.push(true);
        } else if inside(&ch, x, y) || inside(&parts.cavity, x, y) {
            cells.push(kk);
            free.push(true);
            shifted.push(inside(&ch, x, y));
        }
    }
    let p = Problem::new(g, cells.clone(), free, shifted, &tiles, k.delta, true);
    let start: Vec<f64> = cells
        .iter()
        .map(|&kk| {
            let x = g.x_center(kk % g.nx);
            if x < ch.x0 {
                1.0
            } else {
                ((ch.x1 - x) / (ch.x1 - ch.x0)).clamp(0.0, 1.0)
            }
        })
        .collect();
    let energy_zeta = p.energy(&start, nl);
    let d = descend(&p, start, nl, 1e-7, 200_000)?;
    let cavity = parts.cavity;
    finish(grid, &p, d, nl, energy_zeta, Variant::Constrained, feas, pw, pw >= 2.0 * k.mu, |x, y| {
        cavity.contains(x, y)
    })
}

/// (∫|∇w|²)·|supp w| / ∫w²: the planar relative Poincaré constant of w.
pub fn poincare_ratio(w: &ScalarField) -> Result<f64, BarrierError> {
    let g = w.grid();
    let v = w.values();
    let support = v.iter().filter(|&&x| x != 0.0).count();
    if support == 0 {
        return Err(BarrierError::EmptySupport);
    }
    let mut grad = 0.0;
    for k in 0..g.len() {
        if !g.is_fluid(k) {
            continue;
        }
        let (i, j) = (k % g.nx, k / g.nx);
        let east = (i + 1 < g.nx).then(|| g.idx(i + 1, j));
        let north = g.north(j).map(|jn| g.idx(i, jn));
        for m in [east, north].into_iter().flatten() {
            if g.is_fluid(m) {
                grad += (v[k] - v[m]).powi(2);
            }
        }
    }
    let mass: f64 = v.iter().map(|x| x * x).sum();
    Ok(grad * support as f64 / mass)
}

/// A nonnegative bump `amp·(1 − |x − c|²/r²)₊`, defined independently of any grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub center: (f64, f64),
    pub radius: f64,
    pub amp: f64,
}

impl Bump {
    pub fn value(&self, x: f64, y: f64, period: Option<f64>) -> f64 {
        let mut dy = y - self.center.1;
        if let Some(p) = period {
            dy -= p * (dy / p).round();
        }
        let dx = x - self.center.0;
        self.amp * (1.0 - (dx * dx + dy * dy) / (self.radius * self.radius)).max(0.0)
    }
}

/// `count` random fields of one to three bumps each, centred in `window`
/// with radii in `radii`; the same seed gives the same fields on every grid.
pub fn random_bump_sets(seed: u64, count: usize, window: Rect, radii: (f64, f64)) -> Vec<Vec<Bump>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=3);
            (0..n)
                .map(|_| Bump {
                    center: (rng.gen_range(window.x0..window.x1), rng.gen_range(window.y0..window.y1)),
                    radius: rng.gen_range(radii.0..radii.1),
                    amp: rng.gen_range(0.2..1.0),
                })
                .collect()
        })
        .collect()
}

pub fn sample_bumps(grid: &Arc<GridDomain>, bumps: &[Bump]) -> ScalarField {
    let period = match grid.lateral_bc {
        LateralBc::Periodic => Some(grid.height()),
        LateralBc::Reflecting => None,
    };
    ScalarField::from_fn(grid.clone(), |x, y| {
        bumps.iter().map(|b| b.value(x, y, period)).fold(0.0, f64::max)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PoincareStudy {
    pub h: f64,
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    /// Largest support measure among the fields.
    pub max_support: f64,
}

/// Poincaré ratios of `count` random small-support fields near the wall.
pub fn poincare_study(
    spec: &ObstacleSpec,
    h: f64,
    height: f64,
    bc: LateralBc,
    seed: u64,
    count: usize,
) -> Result<PoincareStudy, BarrierError> {
    let e = Extent { x_min: -2.0, x_max: spec.m + 2.0, height };
    let grid = Arc::new(rasterize(spec, h, e, bc)?);
    let window = Rect { x0: -0.5, x1: spec.m + 0.5, y0: 0.0, y1: height };
    let mut ratios = Vec::with_capacity(count);
    let mut max_support = 0.0f64;
    for set in random_bump_sets(seed, count, window, (0.1, 0.3)) {
        let w = sample_bumps(&grid, &set);
        let support = w.values().iter().filter(|&&v| v > 0.0).count() as f64 * h * h;
        max_support = max_support.max(support);
        ratios.push(poincare_ratio(&w)?);
    }
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PoincareStudy { h, ratios, min_ratio, max_support })
}
