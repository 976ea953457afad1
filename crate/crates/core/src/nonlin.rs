//! The bistable nonlinearity, its primitive, and the one-dimensional special
//! profiles built from it: the travelling front φ, the half-line profiles H
//! and ρ, and the sub/supersolution pair w± used to start the entire solution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{hermite, hermite_crossing, hermite_deriv, rk4};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonlinError {
    #[error("alpha must lie in (0, 1/2) for an unbalanced bistable f, got {0}")]
    InvalidAlpha(f64),
    #[error("shooting on the wave speed did not converge")]
    NoConvergence,
    #[error("profile tails are {0:e} away from their limits at the window edge")]
    TruncatedTails(f64),
    #[error("no admissible (delta, mu, sigma) triple")]
    SearchFailed,
    #[error("forcing level {0} admits no stable root with positive energy")]
    DeltaTooLarge(f64),
    #[error("time {t} lies beyond the horizon T = {horizon}")]
    TimeOutOfRange { t: f64, horizon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `u (1 - u) (u - alpha)`.
    #[default]
    Cubic,
}

#[derive(Deserialize)]
struct RawNonlinearity {
    alpha: f64,
    #[serde(default)]
    shape: Shape,
}

/// A bistable `f` with zeros `0 < alpha < 1`, continued linearly outside
/// `[0, 1]` with the slopes it has at the stable zeros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNonlinearity")]
pub struct Nonlinearity {
    alpha: f64,
    shape: Shape,
}

impl TryFrom<RawNonlinearity> for Nonlinearity {
    type Error = NonlinError;
    fn try_from(raw: RawNonlinearity) -> Result<Self, Self::Error> {
        match raw.shape {
            Shape::Cubic => Self::cubic(raw.alpha),
        }
    }
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Self { alpha: 0.25, shape: Shape::Cubic }
    }
}

impl Nonlinearity {
    /// Balanced (`alpha = 1/2`) and inverted cubics are rejected: the theory
    /// needs `F(1) > 0`.
    pub fn cubic(alpha: f64) -> Result<Self, NonlinError> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(NonlinError::InvalidAlpha(alpha));
        }
        Ok(Self { alpha, shape: Shape::Cubic })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// f on [0, 1], without the extension.
    fn poly(&self, u: f64) -> f64 {
        u * (1.0 - u) * (u - self.alpha)
    }

    pub fn slope_at_zero(&self) -> f64 {
        -self.alpha
    }

    pub fn slope_at_one(&self) -> f64 {
        self.alpha - 1.0
    }

    /// Extended f. Written without branches so the stencil loop vectorizes.
    #[inline(always)]
    pub fn f(&self, s: f64) -> f64 {
        let u = s.clamp(0.0, 1.0);
        self.poly(u) + self.slope_at_zero() * s.min(0.0) + self.slope_at_one() * (s - 1.0).max(0.0)
    }

    pub fn df(&self, s: f64) -> f64 {
        if s < 0.0 {
            self.slope_at_zero()
        } else if s > 1.0 {
            self.slope_at_one()
        } else {
            -3.0 * s * s + 2.0 * (1.0 + self.alpha) * s - self.alpha
        }
    }

    /// F(s) = ∫₀ˢ f for the extended f.
    pub fn primitive(&self, s: f64) -> f64 {
        let a = self.alpha;
        if s < 0.0 {
            0.5 * self.slope_at_zero() * s * s
        } else if s > 1.0 {
            self.f_one() + 0.5 * self.slope_at_one() * (s - 1.0) * (s - 1.0)
        } else {
            -s.powi(4) / 4.0 + (1.0 + a) * s.powi(3) / 3.0 - a * s * s / 2.0
        }
    }

    /// F(1), the energy gap driving the front to the right.
    pub fn f_one(&self) -> f64 {
        1.0 / 12.0 - self.alpha / 6.0
    }

    /// Critical points of f on (0, 1): the minimum below alpha and the peak above it.
    fn critical_points(&self) -> (f64, f64) {
        let a = self.alpha;
        let disc = ((1.0 + a) * (1.0 + a) - 3.0 * a).sqrt();
        ((1.0 + a - disc) / 3.0, (1.0 + a + disc) / 3.0)
    }

    /// Supremum of the δ₀ with f' < 0 on [0, δ₀] ∪ [1 − δ₀, 1]; any smaller
    /// positive value is admissible.
    pub fn delta0(&self) -> f64 {
        let (lo, hi) = self.critical_points();
        lo.min(1.0 - hi)
    }

    /// max |f'| over the real line.
    pub fn lipschitz(&self) -> f64 {
        let top = self.df((1.0 + self.alpha) / 3.0);
        top.max(-self.slope_at_one()).max(-self.slope_at_zero())
    }

    /// min f' over the real line; bounds the explicit time step from below.
    pub fn min_slope(&self) -> f64 {
        self.slope_at_zero().min(self.slope_at_one())
    }

    /// `f(b - t)` as the exact Taylor polynomial around `b ∈ [0, 1]`. Free of
    /// the cancellation that `f(b - t)` suffers for tiny `t`.
    fn below(&self, b: f64, t: f64) -> f64 {
        let c1 = self.df(b);
        let c2 = -3.0 * b + (1.0 + self.alpha);
        self.poly(b) - c1 * t + c2 * t * t + t * t * t
    }

    /// ∫_{b-ψ}^{b} (f − δ) from the same expansion.
    fn gap_below(&self, b: f64, delta: f64, psi: f64) -> f64 {
        let c1 = self.df(b);
        let c2 = -3.0 * b + (1.0 + self.alpha);
        (self.poly(b) - delta) * psi - 0.5 * c1 * psi * psi
            + c2 * psi.powi(3) / 3.0
            + psi.powi(4) / 4.0
    }

    /// Largest zero of `f − delta` in (alpha, 1].
    pub fn stable_root(&self, delta: f64) -> Result<f64, NonlinError> {
        if delta == 0.0 {
            return Ok(1.0);
        }
        let (_, peak) = self.critical_points();
        if !(delta > 0.0 && delta < self.poly(peak)) {
            return Err(NonlinError::DeltaTooLarge(delta));
        }
        let (mut lo, mut hi) = (peak, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.poly(mid) > delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// The extended f at `s`.
pub fn eval_f(nl: &Nonlinearity, s: f64) -> f64 {
    nl.f(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierConstants {
    pub delta: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Largest μ the default search may return. Unit squares have first Neumann
/// eigenvalue π², so any μ up to π²/2 is compatible with them.
pub const DEFAULT_MU_CAP: f64 = std::f64::consts::PI * std::f64::consts::PI / 2.0;

const SCAN_LO: f64 = -3.0;
const SCAN_HI: f64 = 4.0;
const SCAN_STEP: f64 = 1e-4;

/// `min_s −F(s) + μ(s−δ)²` over the scan grid, lowered by the worst-case
/// gap between grid points. `None` when the tails are not monotone.
pub fn w2_margin(nl: &Nonlinearity, delta: f64, mu: f64) -> Option<f64> {
    let g = |s: f64| -nl.primitive(s) + mu * (s - delta) * (s - delta);
    let dg = |s: f64| -nl.f(s) + 2.0 * mu * (s - delta);
    // Outside [0, 1] both terms are convex quadratics; the grid ends only
    // need the right slope signs.
    if dg(SCAN_LO) > 0.0 || dg(SCAN_HI) < 0.0 {
        return None;
    }
    let n = ((SCAN_HI - SCAN_LO) / SCAN_STEP).round() as usize;
    let min = (0..=n).map(|i| g(SCAN_LO + i as f64 * SCAN_STEP)).fold(f64::INFINITY, f64::min);
    let curvature = nl.lipschitz() + 2.0 * mu;
    Some(min - SCAN_STEP * SCAN_STEP * curvature / 8.0)
}

/// (δ, μ, σ) with −F(s) + μ(s−δ)² ≥ σ for every s, maximizing σ over
/// δ ∈ {α k/10} and μ ∈ {0.05·2^j} ≤ [`DEFAULT_MU_CAP`]. On ties the smaller
/// μ wins, since it is the easier Poincaré–Wirtinger requirement.
pub fn barrier_constants(nl: &Nonlinearity) -> Result<BarrierConstants, NonlinError> {
    barrier_constants_capped(nl, DEFAULT_MU_CAP)
}

pub fn barrier_constants_capped(
    nl: &Nonlinearity,
    mu_cap: f64,
) -> Result<BarrierConstants, NonlinError> {
    let mut best: Option<BarrierConstants> = None;
    let mut mu = 0.05;
    while mu <= mu_cap {
        for k in (1..=10).rev() {
            let delta = nl.alpha() * k as f64 / 10.0;
            let Some(sigma) = w2_margin(nl, delta, mu) else { continue };
            if sigma > 0.0 && best.map_or(true, |b| sigma > b.sigma) {
                best = Some(BarrierConstants { delta, mu, sigma });
            }
        }
        mu *= 2.0;
    }
    best.ok_or(NonlinError::SearchFailed)
}

/// The travelling front: φ'' + cφ' + f(φ) = 0, φ(−∞) = 1, φ(+∞) = 0,
/// normalized by φ(0) = α and sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    c: f64,
    z_min: f64,
    step: f64,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    /// Exponential rates of 1 − φ at −∞ (positive) and of φ at +∞ (negative).
    rate_left: f64,
    rate_right: f64,
}

pub const DEFAULT_WINDOW: f64 = 40.0;
pub const DEFAULT_STEP: f64 = 1e-3;
const TAIL_TOL: f64 = 1e-8;

/// Decay rates at the two saddles for a given speed.
fn saddle_rates(nl: &Nonlinearity, c: f64) -> (f64, f64) {
    let left = 0.5 * (-c + (c * c - 4.0 * nl.slope_at_one()).sqrt());
    let right = 0.5 * (-c - (c * c - 4.0 * nl.slope_at_zero()).sqrt());
    (left, right)
}

/// Integrates from 1 − ε along the unstable manifold of φ = 1 until φ = α.
/// The state is ψ = 1 − φ so the tiny deviation keeps full precision.
/// Returns the slope φ' at the crossing, or 0 if the orbit turns back first.
fn shoot_left(nl: &Nonlinearity, c: f64, step: f64, z_cap: f64) -> f64 {
    let (mu, _) = saddle_rates(nl, c);
    let eps = 1e-10;
    let target = 1.0 - nl.alpha();
    let rhs = |y: &[f64; 2]| [y[1], -c * y[1] + nl.below(1.0, y[0])];
    let mut y = [eps, mu * eps];
    let mut z = 0.0;
    while z < z_cap {
        let next = rk4(y, step, rhs);
        if next[1] <= 0.0 {
            return 0.0;
        }
        if next[0] >= target {
            let s = (target - y[0]) / (next[0] - y[0]);
            return -(y[1] + s * (next[1] - y[1]));
        }
        y = next;
        z += step;
    }
    0.0
}

/// Integrates backward from ε along the stable manifold of φ = 0 until φ = α.
fn shoot_right(nl: &Nonlinearity, c: f64, step: f64, z_cap: f64) -> f64 {
    let (_, nu) = saddle_rates(nl, c);
    let eps = 1e-10;
    let target = nl.alpha();
    let rhs = |y: &[f64; 2]| [y[1], -c * y[1] - nl.f(y[0])];
    let mut y = [eps, nu * eps];
    let mut z = 0.0;
    while z < z_cap {
        let next = rk4(y, -step, rhs);
        if next[1] >= 0.0 {
            return 0.0;
        }
        if next[0] >= target {
            let s = (target - y[0]) / (next[0] - y[0]);
            return y[1] + s * (next[1] - y[1]);
        }
        y = next;
        z += step;
    }
    0.0
}

/// Slope mismatch at φ = α; increasing in c and zero at the true speed.
fn mismatch(nl: &Nonlinearity, c: f64, step: f64, z_cap: f64) -> f64 {
    shoot_left(nl, c, step, z_cap) - shoot_right(nl, c, step, z_cap)
}

/// Runs one branch on a fixed grid of `n` steps, re-scaling the initial
/// amplitude until the α-crossing lands on the last node. Returns the nodes
/// as (value, derivative) in the branch's own variable.
fn pinned_branch(
    n: usize,
    step: f64,
    rate: f64,
    target: f64,
    rhs: impl Fn(&[f64; 2]) -> [f64; 2],
) -> Result<(Vec<f64>, Vec<f64>), NonlinError> {
    // `step` carries the integration direction; `rate` is the growth rate of
    // the branch variable along it.
    let h = step.abs();
    let growth = rate.abs();
    let mut eps = (-(growth * n as f64 * h)).exp().max(1e-300) * target;
    for _ in 0..40 {
        let mut vals = Vec::with_capacity(n + 1);
        let mut ders = Vec::with_capacity(n + 1);
        let mut y = [eps, rate * eps];
        vals.push(y[0]);
        ders.push(y[1]);
        let mut crossing = None;
        let mut k = 0;
        // March past the end if needed so the crossing is always located.
        while crossing.is_none() && k < 4 * n {
            let next = rk4(y, step, &rhs);
            if next[0] >= target {
                let frac = hermite_crossing(y[0], y[1], next[0], next[1], step, target);
                crossing = Some(k as f64 + frac);
            }
            y = next;
            k += 1;
            if k <= n {
                vals.push(y[0]);
                ders.push(y[1]);
            }
        }
        let Some(at) = crossing else { return Err(NonlinError::NoConvergence) };
        let offset = (at - n as f64) * h;
        if offset.abs() < 1e-10 && vals.len() == n + 1 {
            return Ok((vals, ders));
        }
        eps *= (growth * offset).exp();
    }
    Err(NonlinError::NoConvergence)
}

/// Shooting on c with bisection on the slope mismatch at φ = α, then both
/// halves integrated in their stable directions on the output grid.
pub fn solve_wave_profile(
    nl: &Nonlinearity,
    window: f64,
    step: f64,
) -> Result<WaveProfile, NonlinError> {
    let z_cap = 4.0 * window;
    let (mut lo, mut hi) = (0.0, 1.0);
    if mismatch(nl, lo, step, z_cap) >= 0.0 {
        return Err(NonlinError::NoConvergence);
    }
    while mismatch(nl, hi, step, z_cap) <= 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(NonlinError::NoConvergence);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mismatch(nl, mid, step, z_cap) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let (mu, nu) = saddle_rates(nl, c);
    let n = (window / step).round() as usize;

    // Left half in ψ = 1 − φ, forward from z = −window.
    let (psi, dpsi) = pinned_branch(n, step, mu, 1.0 - nl.alpha(), |y| {
        [y[1], -c * y[1] + nl.below(1.0, y[0])]
    })?;
    // Right half in φ, backward from z = +window.
    let (phr, dphr) = pinned_branch(n, -step, nu, nl.alpha(), |y| {
        [y[1], -c * y[1] - nl.f(y[0])]
    })?;

    let mut phi = Vec::with_capacity(2 * n + 1);
    let mut dphi = Vec::with_capacity(2 * n + 1);
    for k in 0..n {
        phi.push(1.0 - psi[k]);
        dphi.push(-dpsi[k]);
    }
    phi.push(nl.alpha());
    dphi.push(0.5 * (-dpsi[n] + dphr[n]));
    for k in (0..n).rev() {
        phi.push(phr[k]);
        dphi.push(dphr[k]);
    }
    let tail = psi[0].max(phr[0]);
    if tail > TAIL_TOL {
        return Err(NonlinError::TruncatedTails(tail));
    }
    Ok(WaveProfile {
        c,
        z_min: -(n as f64) * step,
        step,
        phi,
        dphi,
        rate_left: mu,
        rate_right: nu,
    })
}

impl WaveProfile {
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Half-width of the sampled window.
    pub fn window(&self) -> f64 {
        -self.z_min
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.phi
            .iter()
            .zip(&self.dphi)
            .enumerate()
            .map(|(k, (&p, &d))| (self.z_min + k as f64 * self.step, p, d))
    }

    fn cell(&self, z: f64) -> (usize, f64) {
        let x = (z - self.z_min) / self.step;
        let k = (x.floor() as usize).min(self.phi.len() - 2);
        (k, x - k as f64)
    }

    pub fn eval(&self, z: f64) -> f64 {
        let last = self.phi.len() - 1;
        if z <= self.z_min {
            return 1.0 - (1.0 - self.phi[0]) * (self.rate_left * (z - self.z_min)).exp();
        }
        if z >= -self.z_min {
            return self.phi[last] * (self.rate_right * (z + self.z_min)).exp();
        }
        let (k, s) = self.cell(z);
        hermite(self.phi[k], self.dphi[k], self.phi[k + 1], self.dphi[k + 1], self.step, s)
    }

    pub fn eval_deriv(&self, z: f64) -> f64 {
        let last = self.phi.len() - 1;
        if z <= self.z_min {
            return -(1.0 - self.phi[0])
                * self.rate_left
                * (self.rate_left * (z - self.z_min)).exp();
        }
        if z >= -self.z_min {
            return self.phi[last]
                * self.rate_right
                * (self.rate_right * (z + self.z_min)).exp();
        }
        let (k, s) = self.cell(z);
        hermite_deriv(self.phi[k], self.dphi[k], self.phi[k + 1], self.dphi[k + 1], self.step, s)
    }

    /// Max over interior samples of |φ'' + cφ' + f(φ)|, with φ'' from
    /// central differences of the sampled φ'.
    pub fn ode_residual(&self, nl: &Nonlinearity) -> f64 {
        (1..self.phi.len() - 1)
            .map(|k| {
                let d2 = (self.dphi[k + 1] - self.dphi[k - 1]) / (2.0 * self.step);
                (d2 + self.c * self.dphi[k] + nl.f(self.phi[k])).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HalfLineKind {
    H,
    Rho,
}

/// Decreasing solution of p'' + f(p) = δ on z < 0 with p(0) = 0 and
/// p(−∞) = b, extended by zero on z ≥ 0. With δ = 0 this is H.
#[derive(Debug, Clone)]
pub struct HalfLineProfile {
    kind: HalfLineKind,
    delta_f: f64,
    b_root: f64,
    z_min: f64,
    step: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
    rate: f64,
}

fn solve_half_line(
    nl: &Nonlinearity,
    delta_f: f64,
    window: f64,
    step: f64,
) -> Result<HalfLineProfile, NonlinError> {
    let b = nl.stable_root(delta_f)?;
    if nl.gap_below(b, delta_f, b) <= 0.0 {
        return Err(NonlinError::DeltaTooLarge(delta_f));
    }
    // ψ = b − p obeys ψ' = √(2·gap(ψ)); integrating it towards −∞ is stable.
    let speed = |psi: f64| (2.0 * nl.gap_below(b, delta_f, psi).max(0.0)).sqrt();
    let n = (window / step).round() as usize;
    let mut psi = vec![0.0; n + 1];
    psi[n] = b;
    for k in (0..n).rev() {
        psi[k] = rk4([psi[k + 1]], -step, |y| [speed(y[0])])[0];
    }
    let values: Vec<f64> = psi.iter().map(|p| b - p).collect();
    let derivs: Vec<f64> = psi.iter().map(|&p| -speed(p)).collect();
    if psi[0] > TAIL_TOL {
        return Err(NonlinError::TruncatedTails(psi[0]));
    }
    Ok(HalfLineProfile {
        kind: if delta_f == 0.0 { HalfLineKind::H } else { HalfLineKind::Rho },
        delta_f,
        b_root: b,
        z_min: -(n as f64) * step,
        step,
        values,
        derivs,
        rate: (-nl.df(b)).sqrt(),
    })
}

/// H'' + f(H) = 0 on z < 0, H(0) = 0, H(−∞) = 1, extended by 0.
pub fn solve_h(nl: &Nonlinearity, window: f64, step: f64) -> Result<HalfLineProfile, NonlinError> {
    solve_half_line(nl, 0.0, window, step)
}

/// ρ'' + f(ρ) = δ on z < 0, ρ(0) = 0, ρ(−∞) = b, extended by 0.
pub fn solve_rho(nl: &Nonlinearity, delta_f: f64) -> Result<HalfLineProfile, NonlinError> {
    if delta_f < 0.0 {
        return Err(NonlinError::DeltaTooLarge(delta_f));
    }
    solve_half_line(nl, delta_f, DEFAULT_WINDOW, DEFAULT_STEP)
}

impl HalfLineProfile {
    pub fn kind(&self) -> HalfLineKind {
        self.kind
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn b_root(&self) -> f64 {
        self.b_root
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Sampled (z, p, p') on [z_min, 0].
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values
            .iter()
            .zip(&self.derivs)
            .enumerate()
            .map(|(k, (&v, &d))| (self.z_min + k as f64 * self.step, v, d))
    }

    pub fn eval(&self, z: f64) -> f64 {
        if z >= 0.0 {
            return 0.0;
        }
        if z <= self.z_min {
            let gap = self.b_root - self.values[0];
            return self.b_root - gap * (self.rate * (z - self.z_min)).exp();
        }
        let x = (z - self.z_min) / self.step;
        let k = (x.floor() as usize).min(self.values.len() - 2);
        let s = x - k as f64;
        hermite(
            self.values[k],
            self.derivs[k],
            self.values[k + 1],
            self.derivs[k + 1],
            self.step,
            s,
        )
    }

    pub fn slope_at_zero(&self) -> f64 {
        *self.derivs.last().expect("profile has samples")
    }

    /// Max |p'²/2 − (F_δ(b) − F_δ(p))| with p' from central differences.
    pub fn first_integral_residual(&self, nl: &Nonlinearity) -> f64 {
        let b = self.b_root;
        let energy = |p: f64| nl.primitive(p) - self.delta_f * p;
        (1..self.values.len() - 1)
            .map(|k| {
                let d = (self.values[k + 1] - self.values[k - 1]) / (2.0 * self.step);
                (0.5 * d * d - (energy(b) - energy(self.values[k]))).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Max |p'' + f(p) − δ| with p'' from second differences.
    pub fn ode_residual(&self, nl: &Nonlinearity) -> f64 {
        let h2 = self.step * self.step;
        (1..self.values.len() - 1)
            .map(|k| {
                let d2 = (self.values[k + 1] - 2.0 * self.values[k] + self.values[k - 1]) / h2;
                (d2 + nl.f(self.values[k]) - self.delta_f).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// The pair w⁻ ≤ w⁺ of sub/supersolutions on t ≤ T built from φ, mirrored
/// across x₁ = 0 (the left face of the wall slab).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperSubPair {
    pub m1: f64,
    pub lambda_exp: f64,
    pub horizon: f64,
    c: f64,
}

const M1_TOL: f64 = 1e-9;

impl SuperSubPair {
    pub fn new(nl: &Nonlinearity, c: f64, m1: f64) -> Self {
        let lambda_exp = 0.5 * (c + (c * c - 4.0 * nl.slope_at_zero()).sqrt());
        let horizon = (c / (c + m1)).ln() / (lambda_exp * c);
        Self { m1, lambda_exp, horizon, c }
    }

    /// Smallest M1 ∈ {1, 2, 4, ...} for which both differential inequalities
    /// hold on a (t, x₁) lattice below the horizon.
    pub fn search(nl: &Nonlinearity, wp: &WaveProfile) -> Result<Self, NonlinError> {
        (0..24)
            .map(|k| Self::new(nl, wp.c(), f64::from(1u32 << k)))
            .find(|pair| pair.worst_residual(nl, wp) >= -M1_TOL)
            .ok_or(NonlinError::SearchFailed)
    }

    pub fn xi(&self, t: f64) -> f64 {
        let e = self.m1 / self.c * (self.lambda_exp * self.c * t).exp();
        -(-e).ln_1p() / self.lambda_exp
    }

    pub fn xi_dot(&self, t: f64) -> f64 {
        self.m1 * (self.lambda_exp * (self.c * t + self.xi(t))).exp()
    }

    /// Smallest of the sub- and supersolution residuals on the lattice
    /// (nonnegative when both inequalities hold), also requiring 0 ≤ w⁻ ≤ w⁺.
    pub fn worst_residual(&self, nl: &Nonlinearity, wp: &WaveProfile) -> f64 {
        let c = self.c;
        let phi = |z: f64| wp.eval(z);
        let dphi = |z: f64| wp.eval_deriv(z);
        let mut worst = f64::INFINITY;
        let nt = 400;
        let nx = 240;
        // Violations concentrate next to the mirror plane, so the negative
        // half-line is sampled quadratically towards it.
        let xs: Vec<f64> = (1..=nx)
            .map(|k| -60.0 * (k as f64 / nx as f64).powi(2))
            .chain((1..=nx / 4).map(|k| 60.0 * k as f64 / (nx / 4) as f64))
            .collect();
        for it in 0..=nt {
            let t = self.horizon - 200.0 * it as f64 / nt as f64;
            let xi = self.xi(t);
            let xd = self.xi_dot(t);
            for &x in &xs {
                let (sub, sup, lo, hi);
                if x < 0.0 {
                    let (z1, z2) = (x - c * t + xi, -x - c * t + xi);
                    let (p1, p2) = (phi(z1), phi(z2));
                    sub = nl.f(p1 - p2) - nl.f(p1) + nl.f(p2) - xd * (dphi(z1) - dphi(z2));
                    let (z3, z4) = (x - c * t - xi, -x - c * t - xi);
                    let (p3, p4) = (phi(z3), phi(z4));
                    sup = -xd * (dphi(z3) + dphi(z4)) + nl.f(p3) + nl.f(p4) - nl.f(p3 + p4);
                    lo = p1 - p2;
                    hi = p3 + p4;
                } else {
                    let z5 = -c * t - xi;
                    sub = 0.0;
                    sup = -2.0 * dphi(z5) * (c + xd) - nl.f(2.0 * phi(z5));
                    lo = 0.0;
                    hi = 2.0 * phi(z5);
                }
                worst = worst.min(sub).min(sup);
                // Far behind the front both sides round to 1, so only the
                // weak order is testable there.
                if !(lo >= 0.0 && lo <= hi + 1e-12) {
                    worst = worst.min(-1.0);
                }
            }
        }
        worst
    }
}

/// (w⁻, w⁺) at (t, x₁), split at the mirror plane x₁ = 0.
pub fn eval_super_sub(
    pair: &SuperSubPair,
    wp: &WaveProfile,
    t: f64,
    x1: f64,
) -> Result<(f64, f64), NonlinError> {
    if t > pair.horizon {
        return Err(NonlinError::TimeOutOfRange { t, horizon: pair.horizon });
    }
    let c = pair.c;
    let xi = pair.xi(t);
    if x1 < 0.0 {
        let lower = wp.eval(x1 - c * t + xi) - wp.eval(-x1 - c * t + xi);
        let upper = wp.eval(x1 - c * t - xi) + wp.eval(-x1 - c * t - xi);
        Ok((lower, upper))
    } else {
        Ok((0.0, 2.0 * wp.eval(-c * t - xi)))
    }
}

/// Scalar constants reported by `frontlab constants`.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport {
    pub alpha: f64,
    pub delta0: f64,
    pub f_one: f64,
    pub delta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub lambda_exp: f64,
    pub wave_speed: f64,
}

pub fn constants_report(nl: &Nonlinearity) -> Result<ConstantsReport, NonlinError> {
    let bc = barrier_constants(nl)?;
    let wp = solve_wave_profile(nl, DEFAULT_WINDOW, DEFAULT_STEP)?;
    let pair = SuperSubPair::new(nl, wp.c(), 1.0);
    Ok(ConstantsReport {
        alpha: nl.alpha(),
        delta0: nl.delta0(),
        f_one: nl.f_one(),
        delta: bc.delta,
        mu: bc.mu,
        sigma: bc.sigma,
        lambda_exp: pair.lambda_exp,
        wave_speed: wp.c(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nl() -> Nonlinearity {
        Nonlinearity::default()
    }

    #[test]
    fn zeros_and_extension() {
        let nl = nl();
        assert_eq!(nl.f(0.0), 0.0);
        assert_eq!(nl.f(0.25), 0.0);
        assert_eq!(nl.f(1.0), 0.0);
        assert!((nl.f(-0.5) - 0.125).abs() < 1e-15);
        assert!((nl.f(1.5) - -0.375).abs() < 1e-15);
        assert!((nl.f_one() - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_balanced_or_out_of_range_alpha() {
        assert!(Nonlinearity::cubic(0.5).is_err());
        assert!(Nonlinearity::cubic(0.0).is_err());
        assert!(serde_json::from_str::<Nonlinearity>(r#"{"alpha": 0.7}"#).is_err());
        let nl: Nonlinearity = serde_json::from_str(r#"{"alpha": 0.3, "shape": "cubic"}"#).unwrap();
        assert_eq!(nl.alpha(), 0.3);
    }

    #[test]
    fn taylor_forms_match_direct_evaluation() {
        let nl = nl();
        for &(b, t) in &[(1.0, 0.3), (0.9, 0.05), (0.97, 0.6)] {
            assert!((nl.below(b, t) - nl.f(b - t)).abs() < 1e-14);
            let direct = nl.primitive(b) - nl.primitive(b - t) - 0.01 * t;
            assert!((nl.gap_below(b, 0.01, t) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn primitive_is_c1() {
        let nl = nl();
        for s in [0.0, 1.0] {
            let (l, r) = (nl.primitive(s - 1e-9), nl.primitive(s + 1e-9));
            assert!(((r - l) / 2e-9 - nl.f(s)).abs() < 1e-6);
        }
    }

    #[test]
    fn delta0_brackets_negative_slope() {
        let nl = nl();
        let d0 = nl.delta0();
        assert!(d0 > 0.0 && d0 < 0.5);
        assert!(nl.df(0.999 * d0) < 0.0 && nl.df(1.0 - 0.999 * d0) < 0.0);
    }
}
