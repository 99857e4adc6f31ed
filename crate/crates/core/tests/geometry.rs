use approx::assert_abs_diff_eq;
use phaseshift_core::geometry::{project, ChordHit, ConvexObstacle, Harmonic, PhaseRay, Side, Vec2};
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

fn disk() -> ConvexObstacle<f64> {
    ConvexObstacle::circle(1.0).unwrap()
}

fn ellipse() -> ConvexObstacle<f64> {
    ConvexObstacle::ellipse(2.0, 1.0).unwrap()
}

fn bumpy() -> ConvexObstacle<f64> {
    ConvexObstacle::support(
        1.0,
        vec![
            Harmonic {
                order: 2,
                amplitude: 0.08,
                phase: 0.3,
            },
            Harmonic {
                order: 3,
                amplitude: 0.03,
                phase: -1.1,
            },
        ],
    )
    .unwrap()
}

/// Line–conic intersection for `x²/a² + y²/b² = 1`, solved as a quadratic in
/// the line coordinate.
fn conic_roots(a: f64, b: f64, ray: &PhaseRay<f64>) -> Option<(f64, f64)> {
    let w = ray.direction();
    let p = ray.foot();
    let qa = w.x * w.x / (a * a) + w.y * w.y / (b * b);
    let qb = 2.0 * (p.x * w.x / (a * a) + p.y * w.y / (b * b));
    let qc = p.x * p.x / (a * a) + p.y * p.y / (b * b) - 1.0;
    let disc = qb * qb - 4.0 * qa * qc;
    (disc > 0.0).then(|| {
        let r = disc.sqrt();
        ((-qb - r) / (2.0 * qa), (-qb + r) / (2.0 * qa))
    })
}

/// Arc length by adaptive Simpson on `|γ'|`.
fn arc_length(ob: &ConvexObstacle<f64>) -> f64 {
    fn simpson(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let f = |t: f64| ob.tangent(t).norm();
    let (fa, fm, fb) = (f(0.0), f(PI), f(TAU));
    simpson(&f, 0.0, TAU, fa, fm, fb, TAU / 6.0 * (fa + 4.0 * fm + fb), 1e-12, 40)
}

#[test]
fn disk_chord_through_centre() {
    match disk().chord(&PhaseRay::new(0.0, 0.0)).unwrap() {
        ChordHit::Crossing { entry, exit } => {
            assert_abs_diff_eq!(entry.s, -1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(exit.s, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(entry.point.x, -1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(entry.point.y, 0.0, epsilon = 1e-12);
        }
        other => panic!("expected two hits, got {other:?}"),
    }
}

#[test]
fn disk_misses_outside_width() {
    assert_eq!(disk().chord(&PhaseRay::new(0.0, 2.0)).unwrap().count(), 0);
}

#[test]
fn ellipse_vertical_chord() {
    let ray = PhaseRay::new(FRAC_PI_2, 1.0);
    let (r0, r1) = conic_roots(2.0, 1.0, &ray).unwrap();
    assert_abs_diff_eq!(r0, -(3f64.sqrt()) / 2.0, epsilon = 1e-15);
    match ellipse().chord(&ray).unwrap() {
        ChordHit::Crossing { entry, exit } => {
            assert_abs_diff_eq!(entry.s, r0, epsilon = 1e-12);
            assert_abs_diff_eq!(exit.s, r1, epsilon = 1e-12);
            assert_abs_diff_eq!(entry.point.x, -1.0, epsilon = 1e-12);
        }
        other => panic!("expected two hits, got {other:?}"),
    }
}

#[test]
fn cauchy_volume_disk() {
    let v = disk().interaction_volume(200_000, 11);
    assert!(v.brackets(4.0 * PI, 3.0), "{v:?}");
}

#[test]
fn cauchy_volume_ellipse_and_support_curve() {
    for ob in [ellipse(), bumpy()] {
        let l = arc_length(&ob);
        assert_abs_diff_eq!(ob.perimeter(), l, epsilon = 1e-9);
        let v = ob.interaction_volume(200_000, 5);
        assert!(v.brackets(2.0 * l, 3.0), "{v:?} vs {}", 2.0 * l);
    }
}

#[test]
fn projection_examples() {
    assert_abs_diff_eq!(project(0.0, Vec2::new(-1.0, 0.0)), 0.0);
    assert_abs_diff_eq!(project(0.0, Vec2::new(0.0, 1.0)), 1.0);
    let y = ellipse().point(0.0);
    let perp = Vec2::new(-FRAC_PI_4.sin(), FRAC_PI_4.cos());
    assert_abs_diff_eq!(project(FRAC_PI_4, y), y.x * perp.x + y.y * perp.y, epsilon = 1e-15);
    assert_abs_diff_eq!(project(FRAC_PI_4, y), -(2f64.sqrt()), epsilon = 1e-15);
}

#[test]
fn inverse_projection_disk() {
    let (y, jac) = disk().inverse_project(0.0, 0.0, Side::Illuminated).unwrap();
    assert_abs_diff_eq!(y.x, -1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(jac, 1.0, epsilon = 1e-12);
    // Jacobian blows up like (1 − z²)^{−1/2}
    for z in [0.9, 0.99, 0.999, 0.9999] {
        let (_, jac) = disk().inverse_project(0.0, z, Side::Illuminated).unwrap();
        assert_abs_diff_eq!(jac * (1.0 - z * z).sqrt(), 1.0, epsilon = 1e-6);
    }
    assert!(disk().inverse_project(0.0, 1.0 + 1e-9, Side::Shadow).is_err());
}

#[test]
fn glancing_distance_examples() {
    assert_abs_diff_eq!(disk().glancing_distance(&PhaseRay::new(1.3, 0.0)), 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(disk().glancing_distance(&PhaseRay::new(1.3, 1.0)), 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(
        ellipse().glancing_distance(&PhaseRay::new(0.0, 0.9)),
        0.1,
        epsilon = 1e-12
    );
    assert!(disk().in_glancing_zone(&PhaseRay::new(0.0, 0.99), 1000.0, 0.0));
    assert!(!disk().in_glancing_zone(&PhaseRay::new(0.0, 0.5), 1000.0, 0.0));
}

#[test]
fn rejects_non_convex_support_curve() {
    let bad = ConvexObstacle::support(
        1.0,
        vec![Harmonic {
            order: 3,
            amplitude: 0.2,
            phase: 0.0,
        }],
    );
    assert!(bad.is_err());
    assert!(ConvexObstacle::<f64>::ellipse(1.0, -1.0).is_err());
}

#[test]
fn single_precision_instantiation() {
    let ob = ConvexObstacle::<f32>::ellipse(2.0, 1.0).unwrap();
    match ob.chord(&PhaseRay::new(std::f32::consts::FRAC_PI_2, 1.0)).unwrap() {
        ChordHit::Crossing { entry, .. } => assert!((entry.s + 0.866_025_4).abs() < 1e-5),
        other => panic!("{other:?}"),
    }
}

fn obstacles() -> impl Strategy<Value = ConvexObstacle<f64>> {
    prop_oneof![Just(disk()), Just(ellipse()), Just(bumpy())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn chord_count_matches_support_interval(ob in obstacles(), omega in 0.0..TAU, u in -1.5f64..1.5) {
        let (lo, hi) = ob.impact_interval(omega);
        let eta = 0.5 * (lo + hi) + u * 0.5 * (hi - lo);
        let hit = ob.chord(&PhaseRay::new(omega, eta)).unwrap();
        let inside = eta > lo + 1e-9 && eta < hi - 1e-9;
        let outside = eta < lo - 1e-9 || eta > hi + 1e-9;
        if inside {
            prop_assert_eq!(hit.count(), 2);
            prop_assert!(ob.glancing_distance(&PhaseRay::new(omega, eta)) > 0.0);
        }
        if outside {
            prop_assert_eq!(hit.count(), 0);
        }
    }

    #[test]
    fn chord_points_lie_on_boundary(ob in obstacles(), omega in 0.0..TAU, u in -0.999f64..0.999) {
        let (lo, hi) = ob.impact_interval(omega);
        let eta = 0.5 * (lo + hi) + u * 0.5 * (hi - lo);
        let ray = PhaseRay::new(omega, eta);
        if let ChordHit::Crossing { entry, exit } = ob.chord(&ray).unwrap() {
            prop_assert!(entry.s < exit.s);
            for imp in [entry, exit] {
                let on_line = ray.foot() + ray.direction() * imp.s;
                prop_assert!((on_line - ob.point(imp.param)).norm() < 1e-10);
                prop_assert!((imp.point - ob.point(imp.param)).norm() < 1e-12);
            }
        } else {
            prop_assert!(false, "expected a crossing");
        }
    }

    #[test]
    fn inverse_projection_round_trip(ob in obstacles(), omega in 0.0..TAU, u in -0.98f64..0.98, shadow in any::<bool>()) {
        let (lo, hi) = ob.impact_interval(omega);
        let z = 0.5 * (lo + hi) + u * 0.5 * (hi - lo);
        let side = if shadow { Side::Shadow } else { Side::Illuminated };
        let (y, jac) = ob.inverse_project(omega, z, side).unwrap();
        prop_assert!((project(omega, y) - z).abs() < 1e-10);
        // |dy/dz| by centred differences
        let h = 1e-5 * (hi - lo);
        let (yp, _) = ob.inverse_project(omega, z + h, side).unwrap();
        let (ym, _) = ob.inverse_project(omega, z - h, side).unwrap();
        let fd = (yp - ym).norm() / (2.0 * h);
        prop_assert!((fd / jac - 1.0).abs() < 1e-6, "fd {} jac {}", fd, jac);
    }

    #[test]
    fn normals_are_unit_and_orthogonal(ob in obstacles(), t in 0.0..TAU) {
        let n = ob.normal(t);
        let tg = ob.tangent(t);
        prop_assert!((n.norm() - 1.0).abs() < 1e-12);
        prop_assert!(n.dot(tg).abs() < 1e-12 * tg.norm());
        prop_assert!(ob.curvature(t) > 0.0);
    }
}
