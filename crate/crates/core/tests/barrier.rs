use std::sync::{Arc, OnceLock};

use frontlab::barrier::*;
use frontlab::geometry::*;
use frontlab::nonlin::{barrier_constants, BarrierConstants, Nonlinearity};
use frontlab::solver::ScalarField;

fn nl() -> Nonlinearity {
    Nonlinearity::default()
}

fn k() -> BarrierConstants {
    barrier_constants(&nl()).unwrap()
}

fn slits(width: f64) -> ObstacleSpec {
    ObstacleSpec::new(Wall::PeriodicSlits { thickness: 1.0, slit_width: width, period: 4.0 }, 1.0)
}

fn cfg_for(spec: &ObstacleSpec, variant: Variant) -> BarrierConfig {
    let mut cfg = BarrierConfig::for_wall(spec, k()).unwrap();
    cfg.variant = variant;
    cfg
}

/// Coarse slit certificates, both variants, computed once.
fn coarse_slit() -> &'static [(BarrierResult, Arc<GridDomain>); 2] {
    static CERTS: OnceLock<[(BarrierResult, Arc<GridDomain>); 2]> = OnceLock::new();
    CERTS.get_or_init(|| {
        let spec = slits(0.1);
        [Variant::Constrained, Variant::Cylinder].map(|v| {
            let cfg = cfg_for(&spec, v);
            let g = cfg.grid(&spec, 0.1, 4.0, LateralBc::Periodic).unwrap();
            (minimize_barrier(&spec, &cfg, &nl(), &g).unwrap(), g)
        })
    })
}

#[test]
fn zeta_ramp() {
    let cfg = BarrierConfig::new(0.0, 1.0, k());
    let e = Extent { x_min: -1.0, x_max: 3.0, height: 0.1 };
    let g = Arc::new(GridDomain::open(0.05, e, LateralBc::Periodic).unwrap());
    let z = zeta_field(&cfg, &g);
    // Cell centres sit half a cell off the sample points; the ramp is linear.
    let at = |x: f64| z.sample(x, 0.05).unwrap();
    assert!((at(0.025) - 0.975).abs() < 1e-12);
    assert!((at(0.525) - 0.475).abs() < 1e-12);
    assert_eq!(at(2.025), 0.0);
    assert_eq!(at(-0.525), 1.0);
}

#[test]
fn zeta_energy_is_carried_by_the_holes() {
    let nl = nl();
    let layer = 0.5 - nl.primitive(nl.alpha()) + nl.f_one();
    let mut prev = f64::INFINITY;
    for width in [0.4, 0.2, 0.1] {
        let spec = slits(width);
        let cfg = cfg_for(&spec, Variant::Constrained);
        let g = cfg.grid(&spec, 0.05, 4.0, LateralBc::Periodic).unwrap();
        let j = energy_j(&zeta_field(&cfg, &g), &cfg, &nl);
        let eps = hole_measure(&spec, &g);
        // Quadrature on a ramp sampled at cell centres: O(h) per unit length.
        assert!(j > 0.0 && j <= eps * layer + 0.05 * eps, "width {width}: J = {j}");
        assert!(j < prev);
        prev = j;
    }
}

#[test]
fn perturbing_right_of_the_wall_raises_the_energy() {
    let nl = nl();
    let (cert, g) = &coarse_slit()[0];
    let spec = slits(0.1);
    let cfg = cfg_for(&spec, Variant::Constrained);
    let zeta = zeta_field(&cfg, g);
    let bumps = random_bump_sets(7, 5, Rect { x0: 2.0, x1: 6.0, y0: 0.0, y1: 4.0 }, (0.3, 0.6));
    for set in bumps {
        // A zero-mean perturbation clipped at 0 on the zero tail of ζ is
        // its positive part.
        let bump = sample_bumps(g, &set);
        let w = zeta.zip_with(&bump, |z, b| (z + 0.1 * b).min(1.0)).unwrap();
        assert!(energy_j(&w, &cfg, &nl) > energy_j(&zeta, &cfg, &nl));
    }
    assert!(cert.energy <= cert.energy_zeta);
}

#[test]
fn slit_certificate() {
    let nl = nl();
    for (r, _) in coarse_slit() {
        assert!(r.is_certificate(), "{:?}", r.summary());
        assert!(r.el_residual <= 1e-5);
        assert!(r.right_tail <= k().delta);
        assert!(r.supersolution_margin(&nl) >= -1e-5);
        assert!(r.max_energy_rise <= 1e-12);
        assert!(r.energy <= r.energy_zeta);
        assert!(r.pw_ok);
        // The sufficient smallness condition is far from met by any slit the
        // grid can resolve, yet the certificate exists.
        assert!(!r.feasibility.holds);
        let g = r.w0.grid();
        for j in 0..g.ny {
            assert_eq!(r.w0.at(0, j), 1.0);
        }
    }
    let [(a, _), (b, _)] = coarse_slit();
    assert!(a.w0.max_abs_diff(&b.w0).unwrap() <= 5e-2);
}

#[test]
fn zeta_is_not_a_supersolution() {
    let (_, g) = &coarse_slit()[0];
    let cfg = cfg_for(&slits(0.1), Variant::Constrained);
    let margin = verify_supersolution(&zeta_field(&cfg, g), &interior_cells(g), &nl());
    assert!(margin < -1.0, "{margin}");
}

#[test]
fn wide_openings_are_refused() {
    let spec = ObstacleSpec::new(
        Wall::SlabWithHoles {
            a: 0.0,
            b: 1.0,
            hole_rects: vec![Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 3.5 }],
        },
        1.0,
    );
    let cfg = cfg_for(&spec, Variant::Constrained);
    let g = cfg.grid(&spec, 0.1, 4.0, LateralBc::Periodic).unwrap();
    let r = minimize_barrier(&spec, &cfg, &nl(), &g);
    assert!(matches!(r, Err(BarrierError::Infeasible { ratio }) if ratio >= INFEASIBLE_RATIO));
}

#[test]
fn cap_reached_is_reported() {
    let spec = slits(0.1);
    let mut cfg = cfg_for(&spec, Variant::Constrained);
    cfg.max_iter = 10;
    let g = cfg.grid(&spec, 0.1, 4.0, LateralBc::Periodic).unwrap();
    let r = minimize_barrier(&spec, &cfg, &nl(), &g);
    assert!(matches!(r, Err(BarrierError::NotConverged { iterations: 10, .. })));
}

#[test]
fn missing_slab_or_reservoir() {
    assert_eq!(BarrierConfig::for_wall(&ObstacleSpec::empty(1.0), k()), Err(BarrierError::NoSlab));
    let e = Extent { x_min: -1.0, x_max: 2.0, height: 1.0 };
    let g = Arc::new(GridDomain::open(0.1, e, LateralBc::Periodic).unwrap());
    let r = reservoir_barrier(&slits(0.1), k(), &nl(), &g);
    assert_eq!(r.err(), Some(BarrierError::NotReservoir));
}

fn reservoir(mouth: f64) -> ObstacleSpec {
    ObstacleSpec::new(
        Wall::Reservoir { mouth_width: mouth, cavity_size: 2.0, entrance_len: 1.0, wall: 0.5, x0: 0.0, center_y: 3.0 },
        3.5,
    )
}

#[test]
fn reservoir_certificate_and_wide_mouth() {
    let nl = nl();
    let e = Extent { x_min: -3.0, x_max: 6.5, height: 6.0 };
    let spec = reservoir(0.05);
    let g = Arc::new(rasterize(&spec, 0.05, e, LateralBc::Reflecting).unwrap());
    let r = reservoir_barrier(&spec, k(), &nl, &g).unwrap();
    assert!(r.is_certificate(), "{:?}", r.summary());
    assert!(r.means.iter().all(|&m| m < k().delta));
    assert!(r.supersolution_margin(&nl) >= -1e-5);

    let spec = reservoir(1.8);
    let g = Arc::new(rasterize(&spec, 0.05, e, LateralBc::Reflecting).unwrap());
    assert!(matches!(reservoir_barrier(&spec, k(), &nl, &g), Err(BarrierError::Infeasible { .. })));
}

fn open_grid(h: f64) -> Arc<GridDomain> {
    let e = Extent { x_min: -1.0, x_max: 1.0, height: 2.0 };
    Arc::new(GridDomain::open(h, e, LateralBc::Periodic).unwrap())
}

#[test]
fn single_cell_ratio() {
    let g = open_grid(0.05);
    let mut v = vec![0.0; g.len()];
    v[g.idx(20, 20)] = 1.0;
    let one = ScalarField::from_values(g.clone(), v).unwrap();
    // Four faces of unit jump over one cell of unit mass. The quotient
    // without the support factor is 4/h², which blows up under refinement.
    assert_eq!(poincare_ratio(&one).unwrap(), 4.0);
    assert_eq!(poincare_ratio(&ScalarField::zeros(g)), Err(BarrierError::EmptySupport));
}

#[test]
fn tent_ratio_settles_under_refinement() {
    // Pyramid 1 − max(|x|, |y|)/s: |∇w| = 1/s on the support, so
    // ∫|∇w|² = 4, ∫w² = 2s²/3 and |supp| = 4s². The ratio is 24 for every s.
    let tent = |x: f64, y: f64| (1.0 - x.abs().max((y - 1.0).abs()) / 0.4).max(0.0);
    let errors: Vec<f64> = [0.05, 0.025, 0.0125]
        .iter()
        .map(|&h| (poincare_ratio(&ScalarField::from_fn(open_grid(h), tent)).unwrap() - 24.0).abs() / 24.0)
        .collect();
    assert!(errors[2] < errors[0] && errors[2] < 0.05, "{errors:?}");
}

#[test]
fn bump_sets_are_reproducible() {
    let w = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 2.0 };
    assert_eq!(random_bump_sets(3, 10, w, (0.1, 0.3)), random_bump_sets(3, 10, w, (0.1, 0.3)));
    assert_ne!(random_bump_sets(3, 10, w, (0.1, 0.3)), random_bump_sets(4, 10, w, (0.1, 0.3)));
}
