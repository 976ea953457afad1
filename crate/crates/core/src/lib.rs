//! Numerical laboratory for bistable fronts crossing perforated walls.
//!
//! The equation is `u_t = Δu + f(u)` outside an obstacle `K ⊂ {0 ≤ x₁ ≤ M}`
//! with zero-flux conditions on `∂K`. A front arrives from `x₁ = −∞`; the
//! question is whether it gets through.

pub mod nonlin;
mod ode;
pub mod geometry;
pub mod solver;
pub mod radial;
pub mod dynamics;
pub mod barrier;
