use num_complex::Complex64;
use phaseshift_core::linalg::trace_power;
use phaseshift_core::scattering::*;
use phaseshift_core::specfun::cylinder_array;
use phaseshift_core::spectra::*;
use phaseshift_core::{ComplexMatrix, ConvexObstacle, Error, Provenance};
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

const J01: f64 = 2.404825557695773;

fn disk_op(k: f64) -> ScatteringOperator {
    disk_smatrix(1.0, k, default_grid_size(k, 1.0)).unwrap()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn branch_convention() {
    assert!((branch(Complex64::from_polar(1.0, -0.1)) + 0.1).abs() < 1e-15);
    assert!((branch(Complex64::from_polar(1.0, 0.1)) - (0.1 - TAU)).abs() < 1e-15);
}

#[test]
fn identity_operator_has_trivial_spectrum() {
    let op = ScatteringOperator::from_matrix(5.0, ComplexMatrix::identity(12), Provenance::DiskOracle);
    let ps = phase_shifts(&op).unwrap();
    assert!(ps.betas().iter().all(|&b| b == 0.0));
    assert_eq!(ps.reduced_phase(), 0.0);
    assert_eq!(coherent_trace_identity(), Complex64::new(0.0, 0.0));
}

fn coherent_trace_identity() -> Complex64 {
    let m = default_grid_size(20.0, 1.0);
    let op = ScatteringOperator::from_matrix(20.0, ComplexMatrix::identity(m), Provenance::DiskOracle);
    coherent_trace(&op, 1.0).unwrap()
}

#[test]
fn disk_phase_shifts_match_partial_waves() {
    let k = 10.0;
    let op = disk_op(k);
    let ps = phase_shifts(&op).unwrap();
    let h = op.grid_size() / 2;
    let cyl = cylinder_array(h, k);
    let oracle: Vec<f64> = (1 - h as i64..=h as i64)
        .map(|n| {
            let c = cyl[n.unsigned_abs() as usize];
            let s = if c.j_underflow || c.y_overflow {
                Complex64::new(1.0, 0.0)
            } else {
                -c.h2() / c.h1()
            };
            if (s - 1.0).norm() < BRANCH_FLOOR {
                0.0
            } else {
                branch(s)
            }
        })
        .collect();
    let (a, b) = (sorted(ps.betas().to_vec()), sorted(oracle));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn refuses_non_unitary_operators() {
    let m = default_grid_size(10.0, 1.0);
    let mut op = ScatteringOperator::from_matrix(
        10.0,
        ComplexMatrix::identity(m).scale(Complex64::new(1.1, 0.0)),
        Provenance::Kirchhoff,
    );
    op.unitarity_defect = op.matrix.unitarity_defect();
    assert!(matches!(phase_shifts(&op), Err(Error::UnitarityDefect { .. })));
}

#[test]
fn sector_counts() {
    let ps = phase_shifts(&disk_op(20.0)).unwrap();
    assert!(ps.sector_count(2.0, 2.0).is_err());
    assert!(ps.sector_count(0.0, 1.0).is_err());
    // the circle minus a notch of half-width δ around 1
    for delta in [0.5, 0.1, 0.01] {
        let n = ps.sector_count(delta, TAU - delta).unwrap();
        let chord = 2.0 * (delta / 2.0).sin();
        let direct = ps.gaps().iter().filter(|&&g| g > chord + 1e-9).count();
        assert_eq!(n, direct);
    }
    assert!((sector_prediction(FRAC_PI_2, 3.0 * FRAC_PI_2, TAU, 80.0) - 80.0).abs() < 1e-12);
}

#[test]
fn mu_pairings() {
    let op = disk_op(40.0);
    let ps = phase_shifts(&op).unwrap();
    assert_eq!(ps.mu_pairing(|_| Complex64::new(0.0, 0.0)), Complex64::new(0.0, 0.0));
    let f = |z: Complex64| Complex64::new((z - 1.0).norm_sqr(), 0.0);
    let target = mu_target(TAU, f);
    assert!((target.re - 8.0 * PI).abs() < 1e-9);
    let got = ps.mu_pairing(f);
    assert!((got.re - target.re).abs() / target.re < 0.1, "{got} vs {target}");
    // polynomial test functions pair with traces of powers exactly
    for p in 1..=3u32 {
        let pair = ps.mu_pairing(|z| (z - 1.0).powu(p));
        let tr = trace_power(&op.a_matrix(), p).unwrap() * (TAU / 40.0);
        assert!((pair - tr).norm() <= 1e-8 * tr.norm(), "p = {p}: {pair} vs {tr}");
    }
}

#[test]
fn trace_formula_on_the_disk() {
    let op = disk_op(40.0);
    let ps = phase_shifts(&op).unwrap();
    let t1 = trace_formula_check(&op, 1, TAU).unwrap();
    let sum: Complex64 = ps.eigenvalues().map(|z| z - 1.0).sum();
    assert!((t1.measured - sum).norm() <= 1e-8 * sum.norm());
    assert_eq!(t1.predicted, -80.0);
    assert!(t1.gap <= 0.15);
    let t2 = trace_formula_check(&op, 2, TAU).unwrap();
    assert_eq!(t2.predicted, 80.0);
    assert!(t2.measured.re > 0.0);
    let tm = trace_formula_check(&op, -1, TAU).unwrap();
    assert!((tm.measured - t1.measured.conj()).norm() < 1e-12);
    assert!(trace_formula_check(&op, 0, TAU).is_err());
    let smaller = trace_formula_check(&disk_op(20.0), 1, TAU).unwrap();
    assert!(t1.gap < smaller.gap);
}

#[test]
fn scattering_phase_matches_mode_tracking() {
    let targets = [5.0, 12.0, 20.0];
    let s = disk_scattering_phase(1.0, &targets).unwrap();
    // track every arg S_n continuously by itself
    let nmax = partial_wave_cutoff(1.0, 20.0);
    let mut phases = vec![0.0f64; nmax + 1];
    let mut prev: Option<Vec<Complex64>> = None;
    let mut k = 1e-3;
    let mut oracle = Vec::new();
    let mut ti = 0;
    while ti < targets.len() {
        let step: f64 = (0.01f64).min(k);
        let next = (k + step).min(targets[ti]);
        let modes = disk_modes(1.0, next, nmax);
        match &prev {
            None => phases.iter_mut().zip(&modes).for_each(|(p, m)| *p = m.arg()),
            Some(old) => {
                for n in 0..=nmax {
                    phases[n] += (modes[n] / old[n]).arg();
                }
            }
        }
        prev = Some(modes);
        k = next;
        if k == targets[ti] {
            let total: f64 = phases
                .iter()
                .enumerate()
                .map(|(n, p)| if n == 0 { *p } else { 2.0 * p })
                .sum();
            oracle.push(-total);
            ti += 1;
        }
    }
    for (got, want) in s.iter().zip(&oracle) {
        assert!((got.s - want).abs() <= 1e-6, "k = {}: {} vs {want}", got.k, got.s);
    }
    // in the plane s(k) ≈ π/ln(2/k) vanishes only logarithmically
    let tiny = disk_scattering_phase(1.0, &[1e-8, 1e-4, 1e-2]).unwrap();
    assert!(tiny[0].s.abs() < tiny[1].s.abs() && tiny[1].s.abs() < tiny[2].s.abs());
    for t in &tiny {
        assert!((t.s * (2.0 / t.k).ln() / PI - 1.0).abs() < 0.15, "{t:?}");
    }
}

#[test]
fn ladder_jumps_are_rejected() {
    let dets = [
        (1.0, Complex64::new(1.0, 0.0)),
        (1.1, Complex64::from_polar(1.0, -0.95 * PI)),
    ];
    assert!(matches!(unwrap_phase(&dets), Err(Error::BranchAmbiguity { .. })));
    let ladder = phase_ladder(1e-3, 10.0, PI, TAU);
    for w in ladder.windows(2) {
        assert!(w[1] - w[0] <= PI / (2.0 * (PI * w[0] + TAU)) + 1e-15);
    }
}

#[test]
fn reduced_phase_disk() {
    let ps = phase_shifts(&disk_op(40.0)).unwrap();
    let r = ps.reduced_phase() / (TAU * 40.0);
    assert!((r - 1.0).abs() <= 0.15, "{r}");
    let waves = PhaseShiftSet::disk(1.0, 40.0, partial_wave_cutoff(1.0, 40.0));
    assert!((waves.reduced_phase() - ps.reduced_phase()).abs() < 1e-8);
}

#[test]
fn inside_outside_duality() {
    let rep = duality_check(1.0, 6.0, 1e-4).unwrap();
    assert!(rep.matched(), "{rep:?}");
    assert_eq!(rep.eigenvalues.len(), 4);
    assert_eq!(rep.crossings.iter().map(|c| c.multiplicity).sum::<u32>(), 6);
    assert_eq!(rep.counterclockwise_crossings, 0);
    assert!(rep.identity_gap <= 1e-4);
    // just below the first zero S₀ approaches 1 from the upper half-plane
    let s = disk_modes(1.0, J01 - 1e-6, 0)[0];
    assert!((s - 1.0).norm() <= 1e-3 && s.im > 0.0, "{s}");
    let after = disk_modes(1.0, J01 + 1e-6, 0)[0];
    assert!(after.im < 0.0 && branch(after) > -1e-3);
}

/// `2|J_n|/|H_n|` with `J_n` from its series and `Y_n` by forward recurrence
/// seeded through the Wronskian.
fn tail_oracle(k: f64, l: f64) -> usize {
    let x = k;
    let j = |n: u32| {
        let h = x / 2.0;
        let mut term = (1..=n).fold(1.0, |t, m| t * h / m as f64);
        let mut sum = term;
        for m in 1..400 {
            term *= -h * h / (m as f64 * (m + n) as f64);
            sum += term;
        }
        sum
    };
    let (j0, y0) = {
        let h2 = x * x / 4.0;
        let (mut t, mut s, mut tail, mut hm) = (1.0, 1.0, 0.0, 0.0);
        for m in 1..120 {
            t *= -h2 / (m * m) as f64;
            hm += 1.0 / m as f64;
            s += t;
            tail -= hm * t;
        }
        (
            s,
            2.0 / PI * ((x / 2.0).ln() + 0.5772156649015329) * s + 2.0 / PI * tail,
        )
    };
    let y1 = (j(1) * y0 - 2.0 / (PI * x)) / j0;
    let thr = (-l * k).exp();
    let (mut ym, mut y) = (y0, y1);
    let mut count = usize::from(2.0 * j0.abs() / j0.hypot(y0) >= thr);
    for n in 1..200u32 {
        let jn = j(n);
        if 2.0 * jn.abs() / jn.hypot(y) >= thr {
            count += 2;
        }
        let next = 2.0 * n as f64 / x * y - ym;
        ym = y;
        y = next;
    }
    count
}

#[test]
fn tail_count_golden_value() {
    assert_eq!(tail_oracle(10.0, 1.0), 33);
    let t = tail_bound_check(1.0, &[1.0], &[10.0]);
    assert_eq!(t.rows[0].count, 33);
}

#[test]
fn tail_counts_are_monotone() {
    let ls = [0.5, 1.0, 2.0, 4.0];
    let t = tail_bound_check(1.0, &ls, &[10.0, 20.0]);
    for chunk in t.rows.chunks(ls.len()) {
        for w in chunk.windows(2) {
            assert!(w[0].count <= w[1].count);
        }
    }
    assert!(t.rows[1].count <= t.rows[ls.len() + 1].count);
}

#[test]
fn coherent_state_norm_scaling() {
    for k in [10.0, 20.0, 40.0, 80.0, 160.0] {
        let m = 4096;
        let angles = grid_angles(m);
        let phi = CoherentState {
            omega0: 1.0,
            eta0: 0.3,
            k,
        }
        .sample(&angles);
        let norm = (phi.iter().map(|z| z.norm_sqr()).sum::<f64>() * TAU / m as f64).sqrt();
        let scaled = k.powf(0.25) * norm;
        assert!((scaled / PI.powf(0.25) - 1.0).abs() < 0.01, "k = {k}: {scaled}");
    }
}

#[test]
fn resolution_of_identity() {
    let mut prev = f64::INFINITY;
    for k in [20.0, 40.0] {
        let m = default_grid_size(k, 1.0);
        for order in [0i32, 2] {
            let f: Vec<Complex64> = grid_angles(m)
                .iter()
                .map(|&t| Complex64::from_polar(1.0, order as f64 * t))
                .collect();
            let err = resolution_check(&f, k, order.abs() as f64 / k + 8.0 / k.sqrt()).unwrap();
            assert!(err < 0.5 / k, "k = {k}, order {order}: {err}");
            if order == 0 {
                assert!(err < prev);
                prev = err;
            }
        }
    }
    let coarse = vec![Complex64::new(1.0, 0.0); 32];
    assert!(matches!(
        resolution_check(&coarse, 40.0, 1.0),
        Err(Error::Resolution(_))
    ));
    assert!(matches!(resolution_check(&coarse, 5.0, 1.0), Err(Error::Resolution(_))));
}

/// Smooth bump on `θ ∈ (1, 2π − 1)`, vanishing near `z = 1`.
fn bump(z: Complex64) -> Complex64 {
    let t = z.arg().rem_euclid(TAU);
    let (a, b) = (1.0, TAU - 1.0);
    if t <= a || t >= b {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new((-1.0 / ((t - a) * (b - t)) + 4.0 / ((b - a) * (b - a))).exp(), 0.0)
}

#[test]
fn equidistribution_trend_on_the_ellipse() {
    let e = ConvexObstacle::ellipse(2.0, 1.0).unwrap();
    let target = mu_target(e.perimeter(), bump);
    let gaps: Vec<f64> = [20.0, 40.0, 80.0]
        .iter()
        .map(|&k| {
            let op = nystrom_smatrix(&e, k, min_nodes(k, e.perimeter()), default_grid_size(k, e.max_radius())).unwrap();
            (phase_shifts(&op).unwrap().mu_pairing(bump) - target).norm()
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?} (target {target})");
}

proptest! {
    #[test]
    fn phase_shift_set_invariants(angles in prop::collection::vec(-10.0f64..10.0, 1..60), radii in prop::collection::vec(0.9f64..1.1, 60)) {
        let values: Vec<Complex64> = angles.iter().zip(&radii).map(|(&a, &r)| Complex64::from_polar(r, a)).collect();
        let ps = PhaseShiftSet::from_unit_values(7.0, &values, 0.0);
        prop_assert_eq!(ps.len(), values.len());
        for &b in ps.betas() {
            prop_assert!(b > -TAU && b <= 0.0);
        }
        for w in ps.gaps().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        let s: f64 = ps.betas().iter().sum();
        prop_assert!((ps.reduced_phase() + s).abs() < 1e-12);
    }
}
