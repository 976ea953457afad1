use std::sync::Arc;

use frontlab::geometry::*;
use frontlab::nonlin::Nonlinearity;
use frontlab::solver::*;
use proptest::prelude::*;

fn nl() -> Nonlinearity {
    Nonlinearity::cubic(0.25).unwrap()
}

fn debris_grid(centers: Vec<[f64; 2]>, radius: f64, bc: LateralBc) -> Option<Arc<GridDomain>> {
    let spec = ObstacleSpec::new(Wall::Debris { disk_centers: centers, disk_radius: radius, slab: None }, 2.0);
    let e = Extent { x_min: -1.0, x_max: 3.0, height: 2.0 };
    rasterize(&spec, 0.1, e, bc).ok().map(Arc::new)
}

fn holey() -> Arc<GridDomain> {
    debris_grid(vec![[0.5, 0.5], [1.5, 1.3]], 0.35, LateralBc::Periodic).unwrap()
}

#[test]
fn zeros_of_f_are_exact_fixed_points() {
    let g = holey();
    let cfg = StepConfig::for_grid(g.h, 0.8, 1.0);
    for v in [0.0, 0.25, 1.0] {
        let mut ev = Evolution::new(&ScalarField::constant(g.clone(), v), &nl(), &cfg).unwrap();
        for _ in 0..200 {
            ev.advance();
        }
        for k in 0..g.len() {
            let want = if g.is_fluid(k) { v } else { 0.0 };
            assert_eq!(ev.values()[k], want);
        }
        assert_eq!(ev.min_increment(), 0.0);
    }
}

#[test]
fn oversized_step_is_refused() {
    let g = holey();
    let mut cfg = StepConfig::for_grid(g.h, 0.8, 1.0);
    cfg.dt = 0.25 * g.h * g.h;
    let u = ScalarField::zeros(g);
    assert!(matches!(step(&u, &nl(), &cfg), Err(SolverError::CflViolation { .. })));
}

#[test]
fn x_only_data_stays_x_only() {
    for bc in [LateralBc::Periodic, LateralBc::Reflecting] {
        let e = Extent { x_min: -3.0, x_max: 3.0, height: 1.0 };
        let g = Arc::new(GridDomain::open(0.1, e, bc).unwrap());
        let u0 = ScalarField::from_fn(g.clone(), |x, _| 0.5 * (1.0 - (2.0 * x).tanh()));
        let cfg = StepConfig::for_grid(g.h, 0.8, 1.0);
        let mut ev = Evolution::new(&u0, &nl(), &cfg).unwrap();
        for _ in 0..500 {
            ev.advance();
        }
        let u = ev.field();
        for j in 1..g.ny {
            for i in 0..g.nx {
                assert_eq!(u.at(i, j), u.at(i, 0));
            }
        }
    }
}

#[test]
fn free_front_moves_at_wave_speed() {
    let e = Extent { x_min: -20.0, x_max: 40.0, height: 0.5 };
    let g = Arc::new(GridDomain::open(0.1, e, LateralBc::Periodic).unwrap());
    let u0 = ScalarField::from_fn(g.clone(), |x, _| if x < -10.0 { 1.0 } else { 0.0 });
    let cfg = StepConfig::for_grid(g.h, 0.8, 50.0);
    let out = run_to_steady(&u0, &nl(), &cfg).unwrap();
    assert_eq!(out.status, RunStatus::HorizonReached);
    let at = |t: f64| out.history.iter().find(|r| (r.t - t).abs() < 1e-6).unwrap().front_x;
    let speed = (at(50.0) - at(20.0)) / 30.0;
    let c = 0.5 / 2f64.sqrt();
    assert!((speed - c).abs() / c < 0.02, "speed {speed}");
}

#[test]
fn steady_run_stops_early_and_reports_residual() {
    let g = holey();
    let cfg = StepConfig::for_grid(g.h, 0.8, 10.0);
    let out = run_to_steady(&ScalarField::constant(g, 1.0), &nl(), &cfg).unwrap();
    assert_eq!(out.status, RunStatus::Steady);
    assert_eq!(out.steps, 1);
    assert_eq!(out.residual, 0.0);
}

#[test]
fn runs_are_bit_deterministic() {
    let g = holey();
    let u0 = ScalarField::from_fn(g.clone(), |x, y| (0.3 * x + y).sin().abs());
    let cfg = StepConfig::for_grid(g.h, 0.8, 3.0);
    let a = run_to_steady(&u0, &nl(), &cfg).unwrap();
    let b = run_to_steady(&u0, &nl(), &cfg).unwrap();
    assert_eq!(a.field, b.field);
    assert_eq!(a.history, b.history);
}

#[test]
fn unordered_pair_is_reported() {
    let g = holey();
    let cfg = StepConfig::for_grid(g.h, 0.8, 0.5);
    let u = ScalarField::constant(g.clone(), 0.6);
    let v = ScalarField::constant(g, 0.5);
    assert!(!compare_evolutions(&u, &v, &nl(), &cfg).unwrap());
    assert!(compare_evolutions(&v, &u, &nl(), &cfg).unwrap());
}

fn field_from(g: &Arc<GridDomain>, raw: &[f64]) -> ScalarField {
    let values = (0..g.len()).map(|k| raw[k % raw.len()]).collect();
    ScalarField::from_values(g.clone(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ordered_pairs_stay_ordered(
        centers in proptest::collection::vec((0.0f64..2.0, 0.0f64..2.0), 1..4),
        raw in proptest::collection::vec(0.0f64..1.0, 97),
        bump in proptest::collection::vec(0.0f64..0.2, 89),
        periodic in any::<bool>(),
    ) {
        let bc = if periodic { LateralBc::Periodic } else { LateralBc::Reflecting };
        let centers = centers.iter().map(|c| [c.0, c.1]).collect();
        let Some(g) = debris_grid(centers, 0.3, bc) else { return Ok(()); };
        let u0 = field_from(&g, &raw);
        let v0 = u0.zip_with(&field_from(&g, &bump), |a, b| (a + b).min(1.0)).unwrap();
        let cfg = StepConfig::for_grid(g.h, 0.8, 0.5);
        prop_assert!(compare_evolutions(&u0, &v0, &nl(), &cfg).unwrap());
    }

    #[test]
    fn unit_interval_is_invariant(raw in proptest::collection::vec(0.0f64..1.0, 101)) {
        let g = holey();
        let mut ev = Evolution::new(&field_from(&g, &raw), &nl(), &StepConfig::for_grid(g.h, 0.8, 1.0)).unwrap();
        for _ in 0..400 {
            ev.advance();
            prop_assert!(ev.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
