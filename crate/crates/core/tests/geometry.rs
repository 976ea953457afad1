use frontlab::geometry::*;
use proptest::prelude::*;

fn ext(x_min: f64, x_max: f64, height: f64) -> Extent {
    Extent { x_min, x_max, height }
}

fn slits(width: f64) -> ObstacleSpec {
    ObstacleSpec::new(Wall::PeriodicSlits { thickness: 1.0, slit_width: width, period: 4.0 }, 1.0)
}

fn slab_with(holes: Vec<Rect>) -> ObstacleSpec {
    ObstacleSpec::new(Wall::SlabWithHoles { a: 0.0, b: 1.0, hole_rects: holes }, 1.0)
}

#[test]
fn empty_wall_is_all_fluid() {
    let g = rasterize(&ObstacleSpec::empty(1.0), 0.1, ext(-5.0, 5.0, 2.0), LateralBc::Periodic)
        .unwrap();
    assert_eq!(g.solid_count(), 0);
    assert_eq!((g.nx, g.ny), (100, 20));
    assert_eq!(hole_measure(&ObstacleSpec::empty(1.0), &g), 0.0);
}

#[test]
fn slit_resolution() {
    for (h, cells) in [(0.025, 2), (0.05, 1)] {
        let g = rasterize(&slits(0.05), h, ext(-2.0, 3.0, 4.0), LateralBc::Periodic).unwrap();
        let col = g.column_of(0.5).unwrap();
        let open = (0..g.ny).filter(|&j| g.is_fluid(g.idx(col, j))).count();
        assert_eq!(open, cells, "h = {h}");
        let m = hole_measure(&slits(0.05), &g);
        assert!((m - 0.05).abs() <= h * h, "h = {h}: {m}");
    }
}

#[test]
fn solid_slab_disconnects() {
    let r = rasterize(&slab_with(vec![]), 0.1, ext(-2.0, 3.0, 2.0), LateralBc::Periodic);
    assert_eq!(r, Err(GeometryError::DisconnectedComplement(2)));
}

#[test]
fn walls_must_stay_in_the_slab() {
    let spec = ObstacleSpec::new(
        Wall::SlabWithHoles {
            a: -0.5,
            b: 1.0,
            hole_rects: vec![Rect { x0: -0.5, x1: 1.0, y0: 0.5, y1: 1.0 }],
        },
        1.0,
    );
    let r = rasterize(&spec, 0.1, ext(-2.0, 3.0, 2.0), LateralBc::Periodic);
    assert!(matches!(r, Err(GeometryError::ObstacleOutsideSlab { .. })));
}

#[test]
fn extents_must_be_whole_cells() {
    let r = rasterize(&ObstacleSpec::empty(1.0), 0.3, ext(0.0, 1.0, 1.0), LateralBc::Periodic);
    assert!(matches!(r, Err(GeometryError::BadExtent(..))));
}

#[test]
fn two_holes_measure_within_boundary_cells() {
    // Edges deliberately off the grid lines.
    let holes = vec![
        Rect { x0: 0.0, x1: 1.0, y0: 0.613, y1: 0.713 },
        Rect { x0: 0.0, x1: 1.0, y0: 2.271, y1: 2.371 },
    ];
    let spec = slab_with(holes.clone());
    let exact: f64 = holes.iter().map(Rect::area).sum();
    assert!((exact - 0.2).abs() < 1e-12);
    let perimeter = 2.0 * 2.0 * (1.0 + 0.1);
    let mut errors = Vec::new();
    for h in [0.05, 0.025, 0.0125] {
        let g = rasterize(&spec, h, ext(-1.0, 2.0, 4.0), LateralBc::Periodic).unwrap();
        let err = (hole_measure(&spec, &g) - exact).abs();
        assert!(err <= h * perimeter, "h = {h}: error {err}");
        errors.push(err);
    }
    // First order on average over two refinements.
    assert!(errors[2] <= 0.5 * errors[0] + 1e-12);
}

#[test]
fn blade_flux_counts_end_caps() {
    let blades = |t: f64, count: usize| {
        ObstacleSpec::new(
            Wall::ParallelBlades { blade_len: 1.0, blade_thickness: t, gap: 1.0, count },
            1.0,
        )
    };
    assert!((blade_flux(&blades(0.05, 1)) - 0.1).abs() < 1e-15);
    assert_eq!(blade_flux(&blades(0.05, 0)), 0.0);
    assert!((blade_flux(&blades(0.02, 3)) - 0.12).abs() < 1e-15);
}

#[test]
fn clearance_of_simple_walls() {
    let r0 = 7.3946;
    let g = rasterize(&ObstacleSpec::empty(1.0), 0.1, ext(-5.0, 5.0, 6.0), LateralBc::Reflecting)
        .unwrap();
    assert_eq!(tunnel_clearance(&ObstacleSpec::empty(1.0), &g), 3.0);

    // Tunnel of width 2R₀ + 4h centred in a reflecting strip of height 20.
    let h = 0.1;
    let half = r0 + 2.0 * h;
    let spec = slab_with(vec![Rect { x0: 0.0, x1: 1.0, y0: 10.0 - half, y1: 10.0 + half }]);
    let g = rasterize(&spec, h, ext(-3.0, 4.0, 20.0), LateralBc::Reflecting).unwrap();
    let c = tunnel_clearance(&spec, &g);
    assert!(c >= r0, "clearance {c}");
    // The open rows span the rasterized tunnel; the centre row sits at most
    // half a tunnel from the wall.
    assert!(c <= half + h);

    let g = rasterize(&slits(0.05), 0.025, ext(-3.0, 4.0, 4.0), LateralBc::Periodic).unwrap();
    assert!(tunnel_clearance(&slits(0.05), &g) < r0);
    assert!(tunnel_clearance(&slits(0.05), &g) <= 0.05);
}

fn diamond(center_y: f64) -> ObstacleSpec {
    ObstacleSpec::new(
        Wall::ConvexBlock {
            profile: BlockProfile { center_y, knots: vec![[0.0, 0.0], [1.5, 2.0], [3.0, 0.0]] },
        },
        3.0,
    )
}

#[test]
fn convex_block_passes_line_scan() {
    for h in [0.1, 0.05] {
        let g = rasterize(&diamond(0.0), h, ext(-2.0, 5.0, 6.0), LateralBc::Reflecting).unwrap();
        assert!(g.solid_count() > 0);
        assert!(is_directionally_convex(&g));
    }
    // Two slits make every wall row a single run but break the common column.
    let g = rasterize(&slits(0.5), 0.1, ext(-2.0, 3.0, 4.0), LateralBc::Periodic).unwrap();
    assert!(is_directionally_convex(&g));
    let comb = ObstacleSpec::new(
        Wall::Debris { disk_centers: vec![[0.5, 1.0], [2.5, 3.0]], disk_radius: 0.4, slab: None },
        3.0,
    );
    let g = rasterize(&comb, 0.1, ext(-2.0, 5.0, 4.0), LateralBc::Periodic).unwrap();
    assert!(!is_directionally_convex(&g));
}

#[test]
fn non_unimodal_block_is_rejected() {
    let spec = ObstacleSpec::new(
        Wall::ConvexBlock {
            profile: BlockProfile {
                center_y: 0.0,
                knots: vec![[0.0, 1.0], [1.0, 0.2], [2.0, 1.0]],
            },
        },
        2.0,
    );
    assert!(matches!(spec.validate(), Err(GeometryError::Invalid(_))));
}

#[test]
fn reservoir_parts_are_disjoint_and_walled() {
    let spec = ObstacleSpec::new(
        Wall::Reservoir {
            mouth_width: 0.1,
            cavity_size: 2.0,
            entrance_len: 1.0,
            wall: 0.5,
            x0: 0.0,
            center_y: 3.0,
        },
        3.5,
    );
    let g = rasterize(&spec, 0.05, ext(-3.0, 6.5, 6.0), LateralBc::Reflecting).unwrap();
    let p = spec.reservoir_parts().unwrap();
    assert_eq!(p.cavity.area(), 4.0);
    assert!((p.channel.area() - 0.1).abs() < 1e-12);
    // Inside the cavity is fluid, the walls are solid, and the mouth opens.
    let at = |x: f64, y: f64| g.is_fluid(g.idx(g.column_of(x).unwrap(), g.row_of(y).unwrap()));
    assert!(at(2.0, 3.0));
    assert!(!at(3.2, 3.0));
    assert!(!at(0.5, 2.5));
    assert!(at(0.5, 3.0 + 0.025));
    assert_eq!(g.components(), 1);
}

fn brute_distance(g: &GridDomain, k: usize) -> f64 {
    let (i, j) = (k % g.nx, k / g.nx);
    let mut best = f64::INFINITY;
    for jj in 0..g.ny {
        for ii in 0..g.nx {
            if g.is_fluid(g.idx(ii, jj)) {
                continue;
            }
            let dx = (ii as f64 - i as f64) * g.h;
            let mut dy = ((jj as f64 - j as f64) * g.h).abs();
            match g.lateral_bc {
                LateralBc::Periodic => dy = dy.min(g.height() - dy),
                LateralBc::Reflecting => {
                    // Mirror images below 0 and above the top.
                    let ym = -(jj as f64 + 0.5) * g.h;
                    let yp = 2.0 * g.height() - (jj as f64 + 0.5) * g.h;
                    let y = (j as f64 + 0.5) * g.h;
                    dy = dy.min((y - ym).abs()).min((y - yp).abs());
                }
            }
            best = best.min((dx * dx + dy * dy).sqrt());
        }
    }
    best - 0.5 * g.h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distance_transform_matches_brute_force(
        seeds in proptest::collection::vec((0.0f64..2.0, 0.2f64..2.8, 0.1f64..0.5), 1..5),
        periodic in any::<bool>(),
    ) {
        let centers = seeds.iter().map(|s| [s.0, s.1]).collect();
        let spec = ObstacleSpec::new(Wall::Debris { disk_centers: centers, disk_radius: 0.3, slab: None }, 2.0);
        let bc = if periodic { LateralBc::Periodic } else { LateralBc::Reflecting };
        let Ok(g) = rasterize(&spec, 0.1, ext(-1.0, 3.0, 3.0), bc) else { return Ok(()); };
        prop_assume!(g.solid_count() > 0);
        let d = distance_to_solid(&g);
        for k in 0..g.len() {
            if g.is_fluid(k) {
                prop_assert!((d[k] - brute_distance(&g, k)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn clearance_shrinks_as_debris_accumulates(
        disks in proptest::collection::vec((0.1f64..1.9, 0.5f64..3.5), 1..8),
    ) {
        let slab = TunnelSlab { a: 0.0, b: 2.0, tunnel: [0.5, 3.5] };
        let mut prev = f64::INFINITY;
        for n in 0..=disks.len() {
            let centers = disks[..n].iter().map(|d| [d.0, d.1]).collect();
            let spec = ObstacleSpec::new(
                Wall::Debris { disk_centers: centers, disk_radius: 0.15, slab: Some(slab) },
                2.0,
            );
            let Ok(g) = rasterize(&spec, 0.1, ext(-2.0, 4.0, 4.0), LateralBc::Reflecting) else { break; };
            let c = tunnel_clearance(&spec, &g);
            prop_assert!(c <= prev + 1e-12);
            prev = c;
        }
    }
}
