//! One-dimensional profiles against closed forms and independent quadrature.

use frontlab::nonlin::*;
use std::time::Instant;

fn cubic(alpha: f64) -> Nonlinearity {
    Nonlinearity::cubic(alpha).unwrap()
}

/// Independent oracle: c = (1 − 2α)/√2 and φ = (1 + e^{(z − z₀)/√2})⁻¹.
fn closed_form_speed(alpha: f64) -> f64 {
    (1.0 - 2.0 * alpha) / 2f64.sqrt()
}

fn closed_form_phi(alpha: f64, z: f64) -> f64 {
    // The kink centred at 0.5 moves left by z₀ so that φ(0) = α.
    let z0 = 2f64.sqrt() * ((1.0 - alpha) / alpha).ln();
    1.0 / (1.0 + ((z + z0) / 2f64.sqrt()).exp())
}

#[test]
fn wave_speed_matches_closed_form_across_alpha() {
    for alpha in [0.1, 0.2, 0.25, 0.3, 0.4] {
        let started = Instant::now();
        let wp = solve_wave_profile(&cubic(alpha), DEFAULT_WINDOW, DEFAULT_STEP).unwrap();
        let exact = closed_form_speed(alpha);
        let rel = (wp.c() - exact).abs() / exact;
        println!("alpha {alpha}: c = {:.10} exact {exact:.10} rel {rel:.2e} in {:?}", wp.c(), started.elapsed());
        assert!(rel <= 0.02);
        // Far tighter in practice; guards against a silent regression.
        assert!(rel < 1e-6);
    }
}

#[test]
fn wave_profile_matches_kink_and_normalization() {
    let nl = cubic(0.25);
    let wp = solve_wave_profile(&nl, DEFAULT_WINDOW, DEFAULT_STEP).unwrap();
    assert!((wp.eval(0.0) - 0.25).abs() < 1e-9);
    // The unnormalized kink sits at 0.5 and needs z₀ = √2 ln 3 to move to α.
    let z0 = 2f64.sqrt() * 3f64.ln();
    assert!((z0 - 1.5537).abs() < 1e-4);
    assert!((closed_form_phi(0.25, 0.0) - 0.25).abs() < 1e-14);
    let worst = (-300..=300)
        .map(|i| i as f64 * 0.1)
        .map(|z| (wp.eval(z) - closed_form_phi(0.25, z)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-7, "profile deviates from the kink by {worst:e}");
    assert!(wp.ode_residual(&nl) <= 1e-6);
    let samples: Vec<_> = wp.samples().collect();
    assert!(samples.windows(2).all(|w| w[1].1 < w[0].1));
    assert!(samples.iter().all(|s| s.2 < 0.0));
    assert!(1.0 - samples[0].1 <= 1e-8 && samples.last().unwrap().1 <= 1e-8);
}

#[test]
fn profile_residuals_for_every_alpha() {
    for alpha in [0.1, 0.4] {
        let nl = cubic(alpha);
        let wp = solve_wave_profile(&nl, DEFAULT_WINDOW, DEFAULT_STEP).unwrap();
        assert!(wp.ode_residual(&nl) <= 1e-6);
    }
}

#[test]
fn h_profile_slope_and_first_integral() {
    let nl = cubic(0.25);
    let h = solve_h(&nl, DEFAULT_WINDOW, DEFAULT_STEP).unwrap();
    // F(1) = 1/12 − α/6 = 1/24, so H'(0) = −√(1/12).
    assert!((h.slope_at_zero() - -0.288_675_134_6).abs() < 1e-6);
    assert_eq!(h.eval(1.0), 0.0);
    assert_eq!(h.eval(0.0), 0.0);
    assert!(h.first_integral_residual(&nl) <= 1e-6);
    assert!(h.ode_residual(&nl) <= 1e-6);
    assert!(1.0 - h.eval(-40.0) < 1e-8);
    let s: Vec<_> = h.samples().collect();
    assert!(s[..s.len() - 1].iter().all(|p| p.2 < 0.0));
}

#[test]
fn rho_root_and_shape() {
    let nl = cubic(0.25);
    let rho = solve_rho(&nl, 0.01).unwrap();
    // Oracle: bisection on u(1−u)(u−0.25) = 0.01 near u = 1, written out here.
    let g = |u: f64| u * (1.0 - u) * (u - 0.25) - 0.01;
    let (mut lo, mut hi) = (0.8, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 { lo = mid } else { hi = mid }
    }
    assert!((rho.b_root() - lo).abs() < 1e-12);
    assert!(rho.b_root() > 0.97 && rho.b_root() < 0.99);
    assert_eq!(rho.eval(1.0), 0.0);
    assert!(rho.ode_residual(&nl) <= 1e-6);
    assert!(rho.first_integral_residual(&nl) <= 1e-6);
    assert!((rho.eval(-40.0) - rho.b_root()).abs() < 1e-8);
    let s: Vec<_> = rho.samples().collect();
    assert!(s[..s.len() - 1].iter().all(|p| p.2 < 0.0));
}

#[test]
fn rho_without_forcing_is_h() {
    let nl = cubic(0.25);
    let rho = solve_rho(&nl, 0.0).unwrap();
    let h = solve_h(&nl, DEFAULT_WINDOW, DEFAULT_STEP).unwrap();
    for z in [-30.0, -5.0, -1.0, -0.1, 0.0, 2.0] {
        assert_eq!(rho.eval(z), h.eval(z));
    }
}

#[test]
fn rho_rejects_large_forcing() {
    let nl = cubic(0.25);
    assert!(matches!(solve_rho(&nl, 0.2), Err(NonlinError::DeltaTooLarge(_))));
    // Admissible root, but ∫₀^b (f − δ) ≤ 0.
    assert!(matches!(solve_rho(&nl, 0.06), Err(NonlinError::DeltaTooLarge(_))));
}

#[test]
fn barrier_constants_satisfy_w2() {
    let nl = cubic(0.25);
    // The documented example triple, re-checked with an independent scan.
    let scan_min = (0..=70_000)
        .map(|i| -3.0 + i as f64 * 1e-4)
        .map(|s| -nl.primitive(s) + 0.2 * (s - 0.2) * (s - 0.2))
        .fold(f64::INFINITY, f64::min);
    assert!((scan_min - 1.96e-3).abs() < 1e-5);
    assert!(scan_min >= 0.0015);

    let bc = barrier_constants(&nl).unwrap();
    assert!(bc.delta > 0.0 && bc.delta <= nl.alpha());
    assert!(bc.sigma <= -nl.primitive(bc.delta));
    for i in 0..=700_000 {
        let s = -3.0 + i as f64 * 1e-5;
        assert!(-nl.primitive(s) + bc.mu * (s - bc.delta).powi(2) >= bc.sigma);
    }
    // σ cannot exceed −F(δ) ≤ −F(α); the search reaches that ceiling.
    assert!((bc.sigma - -nl.primitive(0.25)).abs() < 1e-8);
    assert_eq!((bc.delta, bc.mu), (0.25, 0.2));
}

#[test]
fn super_sub_pair_properties() {
    let nl = cubic(0.25);
    let wp = solve_wave_profile(&nl, DEFAULT_WINDOW, DEFAULT_STEP).unwrap();
    let pair = SuperSubPair::search(&nl, &wp).unwrap();
    // λ² − cλ + f'(0) = 0 with c = (1−2α)/√2, f'(0) = −α.
    assert!((pair.lambda_exp - 0.707_106_8).abs() < 1e-6);
    let l = pair.lambda_exp;
    assert!((l * l - wp.c() * l + nl.slope_at_zero()).abs() < 1e-12);
    assert!(pair.horizon <= 0.0);
    // Frozen from the lattice search; M1 = 1 fails by about 1.2e-7 just
    // left of the mirror plane.
    assert_eq!(pair.m1, 2.0);
    assert!(SuperSubPair::new(&nl, wp.c(), 1.0).worst_residual(&nl, &wp) < -1e-8);

    assert!(pair.xi(-200.0).abs() < 1e-12);
    let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..=400 {
        let t = pair.horizon - 100.0 + i as f64 * 0.25;
        let (xi, front) = (pair.xi(t), wp.c() * t + pair.xi(t));
        assert!(xi > prev.0 && front > prev.1);
        prev = (xi, front);
        let d = 1e-5;
        let fd = (pair.xi(t - d) - pair.xi(t - 2.0 * d)) / d;
        assert!((fd - pair.xi_dot(t - 1.5 * d)).abs() < 1e-4 * (1.0 + fd.abs()));
    }
    assert!((wp.c() * pair.horizon + pair.xi(pair.horizon)).abs() < 1e-12);

    let t = pair.horizon - 3.0;
    let (wm, wpl) = eval_super_sub(&pair, &wp, t, 2.0).unwrap();
    assert_eq!(wm, 0.0);
    assert_eq!(wpl, 2.0 * wp.eval(-wp.c() * t - pair.xi(t)));
    for x in [-30.0, -5.0, -0.5, 0.0, 3.0] {
        let (lo, hi) = eval_super_sub(&pair, &wp, t, x).unwrap();
        assert!(0.0 <= lo && lo < hi);
    }
    assert!(matches!(
        eval_super_sub(&pair, &wp, pair.horizon + 1.0, 0.0),
        Err(NonlinError::TimeOutOfRange { .. })
    ));
}
