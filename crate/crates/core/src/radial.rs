//! Positive radial solutions of ΔΨ + f(Ψ) = 0 in a ball with Ψ = 0 on the
//! sphere, the critical radius R₀, and the compactly supported bubble Ψ^P.
//!
//! Shooting on Ψ(0) = p gives a first-zero radius r₀(p) that is U-shaped on
//! (α, 1): it blows up at both ends and has a single minimum, which is R₀.
//! Every R > R₀ therefore carries two bubbles. The upper one (larger Ψ(0))
//! is the energy minimizer and is the default; the lower one is reachable
//! through [`solve_bubble_branch`].

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{GridDomain, LateralBc};
use crate::nonlin::Nonlinearity;
use crate::ode::{hermite, hermite_crossing, hermite_deriv, rk4};
use crate::solver::ScalarField;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadialError {
    #[error("no bubble exists up to radius {0}")]
    BracketFailed(f64),
    #[error("bubble centre is {distance} from the obstacle, closer than its radius {radius}")]
    TooCloseToObstacle { distance: f64, radius: f64 },
}

/// Largest radius searched by [`find_r0`].
pub const R_CAP: f64 = 100.0;
/// Radial step; the series start covers `[0, STEP]`.
const STEP: f64 = 1e-3;
/// Samples of Ψ(0) between α and 1, geometrically clustered towards 1.
const SCAN: usize = 160;
const SCAN_DECADES: f64 = 13.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Larger Ψ(0); negative energy for R well above R₀.
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialBubble {
    radius: f64,
    n_dim: usize,
    branch: Branch,
    step: f64,
    psi: Vec<f64>,
    dpsi: Vec<f64>,
}

enum Shot {
    Crossing(f64),
    Miss,
}

/// State after the series start at r = `h`.
fn series_start(nl: &Nonlinearity, p: f64, n: usize, h: f64) -> [f64; 3] {
    let fp = nl.f(p);
    [p - fp * h * h / (2.0 * n as f64), -fp * h / n as f64, h]
}

fn rhs(nl: &Nonlinearity, n: usize) -> impl Fn(&[f64; 3]) -> [f64; 3] + '_ {
    move |y| [y[1], -((n - 1) as f64) / y[2] * y[1] - nl.f(y[0]), 1.0]
}

/// First zero of Ψ, provided it comes before Ψ′ returns to 0 and before `r_stop`.
fn shoot(nl: &Nonlinearity, p: f64, n: usize, r_stop: f64) -> Shot {
    let f = rhs(nl, n);
    let mut y = series_start(nl, p, n, STEP);
    while y[2] < r_stop {
        let next = rk4(y, STEP, &f);
        if next[0] <= 0.0 {
            let s = hermite_crossing(y[0], y[1], next[0], next[1], STEP, 0.0);
            return Shot::Crossing(y[2] + s * STEP);
        }
        if next[1] >= 0.0 {
            return Shot::Miss;
        }
        y = next;
    }
    Shot::Miss
}

fn first_zero(nl: &Nonlinearity, p: f64, n: usize, r_stop: f64) -> Option<f64> {
    match shoot(nl, p, n, r_stop) {
        Shot::Crossing(r) => Some(r),
        Shot::Miss => None,
    }
}

fn scan_points(nl: &Nonlinearity) -> Vec<f64> {
    let gap = 1.0 - nl.alpha();
    (1..=SCAN).map(|k| 1.0 - gap * 10f64.powf(-SCAN_DECADES * k as f64 / SCAN as f64)).collect()
}

/// The fold: (p*, R₀) with R₀ = min r₀(p).
fn fold(nl: &Nonlinearity, n: usize) -> Option<(f64, f64)> {
    let stop = 2.0 * R_CAP;
    let ps = scan_points(nl);
    let rs: Vec<f64> =
        ps.iter().map(|&p| first_zero(nl, p, n, stop).unwrap_or(f64::INFINITY)).collect();
    let k = (0..ps.len()).min_by(|&a, &b| rs[a].total_cmp(&rs[b]))?;
    if !rs[k].is_finite() {
        return None;
    }
    let lo_p = if k == 0 { nl.alpha() + 1e-12 } else { ps[k - 1] };
    let hi_p = ps.get(k + 1).copied().unwrap_or(1.0 - 1e-15);
    let r = |p: f64| first_zero(nl, p, n, stop).unwrap_or(f64::INFINITY);
    // Golden section; r₀ is smooth and unimodal around the fold.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo_p, hi_p);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut rc, mut rd) = (r(c), r(d));
    for _ in 0..80 {
        if rc < rd {
            b = d;
            d = c;
            rd = rc;
            c = b - g * (b - a);
            rc = r(c);
        } else {
            a = c;
            c = d;
            rc = rd;
            d = a + g * (b - a);
            rd = r(d);
        }
    }
    let (p, rmin) = if rc < rd { (c, rc) } else { (d, rd) };
    let (p, rmin) = if rs[k] < rmin { (ps[k], rs[k]) } else { (p, rmin) };
    Some((p, rmin))
}

/// Bisection on Ψ(0) between `inside` (r₀ ≤ R) and `outside` (r₀ > R or no crossing).
fn hit_radius(nl: &Nonlinearity, n: usize, r: f64, mut inside: f64, mut outside: f64) -> f64 {
    let stop = r * (1.0 + 1e-6) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        match first_zero(nl, mid, n, stop) {
            Some(r0) if (r0 - r).abs() < 1e-12 => return mid,
            Some(r0) if r0 <= r => inside = mid,
            _ => outside = mid,
        }
    }
    inside
}

/// Bubble of radius `r` on the energy-minimizing branch, falling back to the
/// lower branch when Ψ(0) would have to sit closer to 1 than f64 resolves.
pub fn solve_bubble(nl: &Nonlinearity, r: f64, n_dim: usize) -> Option<RadialBubble> {
    solve_bubble_branch(nl, r, n_dim, Branch::Upper)
        .or_else(|| solve_bubble_branch(nl, r, n_dim, Branch::Lower))
}

pub fn solve_bubble_branch(
    nl: &Nonlinearity,
    r: f64,
    n_dim: usize,
    branch: Branch,
) -> Option<RadialBubble> {
    if !(r > 0.0) || n_dim == 0 {
        return None;
    }
    let (p_star, r_min) = fold(nl, n_dim)?;
    if r_min > r {
        return None;
    }
    let stop = r * (1.0 + 1e-6) + 1.0;
    let ps = scan_points(nl);
    let beyond = |p: f64| first_zero(nl, p, n_dim, stop).is_none_or(|r0| r0 > r);
    let outside = match branch {
        Branch::Upper => ps.iter().copied().find(|&p| p > p_star && beyond(p))?,
        Branch::Lower => ps
            .iter()
            .copied()
            .rev()
            .chain([nl.alpha() + 1e-12])
            .find(|&p| p < p_star && beyond(p))?,
    };
    let p = hit_radius(nl, n_dim, r, p_star, outside);
    Some(sample(nl, p, r, n_dim, branch))
}

/// Tabulates Ψ on a uniform grid of `[0, R]` with spacing ≤ [`STEP`].
fn sample(nl: &Nonlinearity, p: f64, r: f64, n: usize, branch: Branch) -> RadialBubble {
    let cells = (r / STEP).ceil().max(1.0) as usize;
    let h = r / cells as f64;
    let f = rhs(nl, n);
    let mut psi = vec![p];
    let mut dpsi = vec![0.0];
    let mut y = series_start(nl, p, n, h);
    psi.push(y[0]);
    dpsi.push(y[1]);
    for _ in 1..cells {
        y = rk4(y, h, &f);
        psi.push(y[0]);
        dpsi.push(y[1]);
    }
    RadialBubble { radius: r, n_dim: n, branch, step: h, psi, dpsi }
}

/// Area of the unit sphere in Rᴺ.
fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => sphere_area(n - 2) * 2.0 * std::f64::consts::PI / (n - 2) as f64,
    }
}

impl RadialBubble {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn center_value(&self) -> f64 {
        self.psi[0]
    }

    /// Computed Ψ(R); the shooting tolerance keeps it tiny, not exactly 0.
    pub fn boundary_value(&self) -> f64 {
        *self.psi.last().expect("nonempty")
    }

    /// `(r, Ψ, Ψ′)` at the grid nodes.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.psi
            .iter()
            .zip(&self.dpsi)
            .enumerate()
            .map(|(k, (&v, &d))| (k as f64 * self.step, v, d))
    }

    /// Ψ(|r|), zero outside the ball.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.radius {
            return 0.0;
        }
        let x = r / self.step;
        let k = (x.floor() as usize).min(self.psi.len() - 2);
        let s = x - k as f64;
        let v = hermite(self.psi[k], self.dpsi[k], self.psi[k + 1], self.dpsi[k + 1], self.step, s);
        v.max(0.0)
    }

    pub fn eval_deriv(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.radius {
            return 0.0;
        }
        let x = r / self.step;
        let k = (x.floor() as usize).min(self.psi.len() - 2);
        let s = x - k as f64;
        hermite_deriv(self.psi[k], self.dpsi[k], self.psi[k + 1], self.dpsi[k + 1], self.step, s)
    }

    /// max |Ψ″ + (N−1)Ψ′/r + f(Ψ)| over interior nodes, Ψ″ by central
    /// differences of the tabulated Ψ′.
    pub fn ode_residual(&self, nl: &Nonlinearity) -> f64 {
        let h = self.step;
        (1..self.psi.len() - 1)
            .map(|k| {
                let r = k as f64 * h;
                let d2 = (self.dpsi[k + 1] - self.dpsi[k - 1]) / (2.0 * h);
                (d2 + (self.n_dim - 1) as f64 / r * self.dpsi[k] + nl.f(self.psi[k])).abs()
            })
            .fold(0.0, f64::max)
    }

    /// H[Ψ] = ∫_{B_R} |∇Ψ|²/2 − F(Ψ) by the trapezoid rule in r.
    pub fn energy(&self, nl: &Nonlinearity) -> f64 {
        let h = self.step;
        let g = |k: usize| {
            let r = k as f64 * h;
            (0.5 * self.dpsi[k] * self.dpsi[k] - nl.primitive(self.psi[k]))
                * r.powi(self.n_dim as i32 - 1)
        };
        let m = self.psi.len() - 1;
        let inner: f64 = (1..m).map(g).sum();
        sphere_area(self.n_dim) * h * (inner + 0.5 * (g(0) + g(m)))
    }
}

/// Bisection bracket for R₀ with `solve_bubble(lo) = None` and
/// `solve_bubble(hi) = Some`, `hi − lo ≤ tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct R0Bracket {
    pub lo: f64,
    pub hi: f64,
    /// Ψ(0) at the fold.
    pub center_value: f64,
}

/// Critical radius: the returned value is the upper end of the bracket.
pub fn find_r0(nl: &Nonlinearity, n_dim: usize, tol: f64) -> Result<f64, RadialError> {
    find_r0_bracket(nl, n_dim, tol).map(|b| b.hi)
}

pub fn find_r0_bracket(nl: &Nonlinearity, n_dim: usize, tol: f64) -> Result<R0Bracket, RadialError> {
    let (p_star, r_min) =
        fold(nl, n_dim).filter(|&(_, r)| r <= R_CAP).ok_or(RadialError::BracketFailed(R_CAP))?;
    // Existence at R is exactly r_min ≤ R, so the bisection runs on that
    // predicate instead of re-shooting the whole family each time.
    let exists = |r: f64| r_min <= r;
    let (mut lo, mut hi) = (0.0, R_CAP);
    let tol = tol.max(1e-12);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if exists(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(R0Bracket { lo, hi, center_value: p_star })
}

/// Distance from a point to the nearest solid cell (as a square), over the
/// lateral images of the point.
pub fn distance_to_obstacle(grid: &GridDomain, p: (f64, f64), reach: f64) -> f64 {
    let hh = grid.h / 2.0;
    let mut best = f64::INFINITY;
    for py in lateral_images(grid, p.1, reach) {
        for j in 0..grid.ny {
            let dy = ((grid.y_center(j) - py).abs() - hh).max(0.0);
            if dy >= best {
                continue;
            }
            for i in 0..grid.nx {
                if grid.is_fluid(grid.idx(i, j)) {
                    continue;
                }
                let dx = ((grid.x_center(i) - p.0).abs() - hh).max(0.0);
                best = best.min((dx * dx + dy * dy).sqrt());
            }
        }
    }
    best
}

/// y-coordinates of the copies of `y` that can reach the strip within `reach`.
fn lateral_images(grid: &GridDomain, y: f64, reach: f64) -> Vec<f64> {
    let height = grid.height();
    let m = (reach / height).ceil() as i64 + 1;
    let mut out = Vec::new();
    for k in -m..=m {
        let shift = k as f64 * height;
        match grid.lateral_bc {
            LateralBc::Periodic => out.push(y + shift),
            LateralBc::Reflecting => {
                out.push(y + 2.0 * shift);
                out.push(-y + 2.0 * shift);
            }
        }
    }
    out
}

/// Ψ^P: the bubble centred at `p`, zero outside the ball. On a periodic
/// strip lower than the bubble the lateral copies are combined by max, which
/// keeps the field periodic and a subsolution.
pub fn embed_bubble(
    bubble: &RadialBubble,
    p: (f64, f64),
    grid: &Arc<GridDomain>,
) -> Result<ScalarField, RadialError> {
    let r = bubble.radius();
    let distance = distance_to_obstacle(grid, p, r);
    if distance < r {
        return Err(RadialError::TooCloseToObstacle { distance, radius: r });
    }
    let centres: Vec<f64> = match grid.lateral_bc {
        LateralBc::Periodic => lateral_images(grid, p.1, r),
        LateralBc::Reflecting => vec![p.1],
    };
    Ok(ScalarField::from_fn(grid.clone(), |x, y| {
        centres
            .iter()
            .map(|&cy| bubble.eval(((x - p.0).powi(2) + (y - cy).powi(2)).sqrt()))
            .fold(0.0, f64::max)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert_eq!(sphere_area(1), 2.0);
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((sphere_area(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn small_ball_has_no_bubble() {
        let nl = Nonlinearity::cubic(0.25).unwrap();
        assert!(solve_bubble(&nl, 0.5, 2).is_none());
    }
}
