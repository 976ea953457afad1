use std::sync::{Arc, OnceLock};

use frontlab::dynamics::*;
use frontlab::geometry::*;
use frontlab::nonlin::Nonlinearity;
use frontlab::radial::embed_bubble;
use frontlab::solver::*;

fn lab() -> &'static Lab {
    static LAB: OnceLock<Lab> = OnceLock::new();
    LAB.get_or_init(|| Lab::new(Nonlinearity::default()).unwrap())
}

/// Coarse, one-cell-wide-ish runs: cheap enough for the unit suite.
fn coarse() -> RunParams {
    RunParams { h: 0.1, height: 0.5, ..RunParams::default() }
}

#[test]
fn sup_initializer_dominates_and_vanishes_past_the_wall() {
    let lab = lab();
    let spec = ObstacleSpec::empty(1.0);
    let g = coarse().grid(&spec).unwrap();
    let t0 = default_t_start(&lab.pair, &lab.wave);
    let sup = build_initial(&lab.wave, &lab.pair, &g, t0, Initializer::SupOverShifts).unwrap();
    let plain = build_initial(&lab.wave, &lab.pair, &g, t0, Initializer::Plain).unwrap();
    assert!(plain.max_excess_over(&sup).unwrap() <= 0.0);
    for i in 0..g.nx {
        let v = sup.at(i, 0);
        assert!((0.0..1.0).contains(&v));
        if g.x_center(i) >= 0.0 {
            assert_eq!(v, 0.0);
        }
    }
    // φ is pinned by φ(0) = α, so the 0.5-level trails the nominal front
    // position −FRONT_GAP by √2·ln((1−α)/α) ≈ 1.55.
    let x = front_position(&g, sup.values());
    let lag = 2f64.sqrt() * 3f64.ln();
    assert!((x + FRONT_GAP + lag).abs() < 0.05, "front at {x}");
}

#[test]
fn late_start_is_refused() {
    let lab = lab();
    let g = coarse().grid(&ObstacleSpec::empty(1.0)).unwrap();
    let t0 = default_t_start(&lab.pair, &lab.wave);
    let r = build_entire_initial(&lab.wave, &lab.pair, &g, t0 + 10.0);
    assert!(matches!(r, Err(DynamicsError::FrontTooClose { .. })));
}

#[test]
fn empty_strip_propagates_monotonically() {
    let lab = lab();
    let spec = ObstacleSpec::empty(1.0);
    let (v_bar, run) = limit_profile(lab, &spec, &coarse()).unwrap();
    assert_eq!(run.status, RunStatus::Steady);
    assert_eq!(run.verdict, Verdict::Propagation);
    assert!(monotonicity_check(&run) >= -1e-12, "{}", run.min_increment);
    assert!(v_bar.range_where(|_, _| true).unwrap().0 >= 0.95);
    // The plain start is not a subsolution; it still ends at the same place.
    let (other, _) = limit_profile_with(lab, &spec, &coarse(), Initializer::Plain, |_, _| {}).unwrap();
    assert!(other.max_abs_diff(&v_bar).unwrap() < 1e-3);
}

#[test]
fn short_horizon_is_undecided() {
    let lab = lab();
    let p = RunParams { t_max: 20.0, ..coarse() };
    let (_, run) = limit_profile(lab, &ObstacleSpec::empty(1.0), &p).unwrap();
    assert_eq!(run.status, RunStatus::HorizonReached);
    assert_eq!(run.verdict, Verdict::Undecided);
}

#[test]
fn bubble_sits_below_h() {
    let lab = lab();
    let p = RunParams { h: 0.1, height: 4.0, ..RunParams::default() };
    let g = p.grid(&ObstacleSpec::empty(1.0)).unwrap();
    let psi = embed_bubble(&lab.bubble, (-10.0, 2.0), &g).unwrap();
    let h0 = ScalarField::from_fn(g.clone(), |x, _| lab.h_profile.eval(x));
    assert!(psi.max_excess_over(&h0).unwrap() <= 0.0);
    let cfg = p.step_config(1.0);
    let cfg = StepConfig { t_max: 2.0, ..cfg };
    assert!(compare_evolutions(&psi, &h0, &lab.nl, &cfg).unwrap());
}

fn strip(height: f64) -> Arc<GridDomain> {
    let e = Extent { x_min: -10.0, x_max: 10.0, height };
    Arc::new(GridDomain::open(0.1, e, LateralBc::Periodic).unwrap())
}

#[test]
fn sliding_against_one_and_zero() {
    let lab = lab();
    let g = strip(1.0);
    let rho = sliding_profile(&lab.nl, 0.01).unwrap();
    let lambdas: Vec<f64> = (0..=20).map(|k| -5.0 + 0.5 * k as f64).collect();
    let ones = ScalarField::constant(g.clone(), 1.0);
    let zeros = ScalarField::zeros(g.clone());

    let under = slide_rho(&rho, 1.0, &ones, &lambdas, default_nu(g.h));
    assert!(under.within_nu());
    assert_eq!(under.worst_decrease(), 0.0);
    let over = slide_rho(&rho, 1.0, &zeros, &lambdas, default_nu(g.h));
    assert!(!over.within_nu());
    // ρ(x − λ) > 0 on x < λ + b, so the measure grows with λ.
    assert!(over.worst_decrease() <= g.h * g.h);

    assert!(slide_w(&rho, 0.0, &ones, &lambdas).ok);
    assert!(!slide_w(&rho, 0.0, &zeros, &lambdas).ok);
}

#[test]
fn sliding_bubble_needs_room_and_support() {
    let lab = lab();
    let g = strip(4.0);
    let path = [(-1.0, 2.0), (1.0, 2.0)];
    assert!(slide_bubble(&lab.bubble, &ScalarField::constant(g.clone(), 1.0), &path).unwrap());
    assert!(!slide_bubble(&lab.bubble, &ScalarField::zeros(g), &path).unwrap());

    let spec = ObstacleSpec::new(Wall::PeriodicSlits { thickness: 1.0, slit_width: 0.5, period: 4.0 }, 1.0);
    let e = Extent { x_min: -10.0, x_max: 11.0, height: 4.0 };
    let walled = Arc::new(rasterize(&spec, 0.1, e, LateralBc::Periodic).unwrap());
    let r = slide_bubble(&lab.bubble, &ScalarField::constant(walled, 1.0), &[(-9.0, 2.0), (9.0, 2.0)]);
    assert!(matches!(r, Err(DynamicsError::PathTooClose { .. })));
}

#[test]
fn narrowing_slits_end_up_blocked() {
    // Widths shrink towards a blocking value; once blocked, narrower slits stay
    // blocked and the probe maximum does not grow.
    let lab = lab();
    let p = RunParams { h: 0.1, height: 2.0, right: 20.0, ..RunParams::default() };
    let mut seen = Vec::new();
    for width in [0.8, 0.4, 0.2] {
        let spec = ObstacleSpec::new(Wall::PeriodicSlits { thickness: 1.0, slit_width: width, period: 2.0 }, 1.0);
        let (_, run) = limit_profile(lab, &spec, &p).unwrap();
        seen.push((width, run.verdict, run.probe_max));
    }
    let first = seen.iter().position(|s| s.1 == Verdict::Blocking).expect("no slit blocks");
    assert!(seen[first..].iter().all(|s| s.1 == Verdict::Blocking), "{seen:?}");
    assert!(seen.windows(2).all(|w| w[1].2 <= w[0].2 + 1e-6), "{seen:?}");
}
