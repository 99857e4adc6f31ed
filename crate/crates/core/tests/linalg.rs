use num_complex::Complex64;
use phaseshift_core::linalg::*;
use phaseshift_core::montecarlo::stream;
use phaseshift_core::scattering::{default_grid_size, disk_modes, disk_smatrix};
use phaseshift_core::Error;
use rand::Rng;

type M = ComplexMatrix<f64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random(n: usize, seed: u64) -> M {
    let mut rng = stream(seed, 0);
    let data = (0..n * n)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    M::new(n, n, data).unwrap()
}

/// Product of random Householder reflections.
fn random_unitary(n: usize, seed: u64) -> M {
    let mut u = M::identity(n);
    let mut rng = stream(seed, 1);
    for _ in 0..n {
        let v: Vec<Complex64> = (0..n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let nv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let h = M::from_fn(n, n, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            c(d, 0.0) - v[i] * v[j].conj() * (2.0 / nv)
        });
        u = u.matmul(&h);
    }
    u
}

/// Largest distance from an eigenvalue in `a` to the nearest one in `b`.
fn one_sided(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

#[test]
fn identity_system_is_exact() {
    let b = random(6, 3);
    assert_eq!(lu_solve(&M::identity(6), &b).unwrap(), b);
}

#[test]
fn swap_determinant() {
    let a = M::new(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
    assert_eq!(determinant(&a).unwrap(), c(-1.0, 0.0));
}

#[test]
fn random_solve_residual() {
    let a = random(50, 4);
    let b = random(50, 5);
    let x = lu_solve(&a, &b).unwrap();
    let r = a.matmul(&x).sub(&b).frobenius_norm();
    assert!(r <= 1e-10 * a.frobenius_norm() * x.frobenius_norm(), "residual {r:e}");
}

#[test]
fn singular_system_is_reported() {
    let a = M::new(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]).unwrap();
    assert!(matches!(lu_solve(&a, &M::identity(2)), Err(Error::Singular { .. })));
    assert!(M::new(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
}

#[test]
fn determinant_is_multiplicative() {
    for seed in 0..5 {
        let a = random(20, 10 + seed);
        let b = random(20, 20 + seed);
        let lhs = determinant(&a.matmul(&b)).unwrap();
        let rhs = determinant(&a).unwrap() * determinant(&b).unwrap();
        assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm());
    }
}

#[test]
fn diagonal_and_rotation_spectra() {
    let d = [c(3.0, 1.0), c(-2.0, 0.5), c(0.1, 0.0), c(0.0, -4.0)];
    let e = eigenvalues(&M::from_diagonal(&d)).unwrap();
    assert!(one_sided(&d, &e.eigenvalues) < 1e-14);
    let t: f64 = 0.83;
    let r = M::new(
        2,
        2,
        vec![c(t.cos(), 0.0), c(-t.sin(), 0.0), c(t.sin(), 0.0), c(t.cos(), 0.0)],
    )
    .unwrap();
    let e = eigenvalues(&r).unwrap();
    let want = [Complex64::from_polar(1.0, t), Complex64::from_polar(1.0, -t)];
    assert!(one_sided(&want, &e.eigenvalues) < 1e-14);
    assert!(one_sided(&e.eigenvalues, &want) < 1e-14);
}

#[test]
fn disk_matrix_spectrum_matches_partial_waves() {
    let k = 20.0;
    let m = default_grid_size(k, 1.0);
    let op = disk_smatrix(1.0, k, m).unwrap();
    let e = eigenvalues(&op.matrix).unwrap();
    assert!(!e.flagged);
    let modes = disk_modes(1.0, k, m / 2);
    let want: Vec<Complex64> = (1 - (m / 2) as i64..=(m / 2) as i64)
        .map(|n| modes[n.unsigned_abs() as usize])
        .collect();
    assert!(one_sided(&want, &e.eigenvalues) <= 1e-10);
    assert!(one_sided(&e.eigenvalues, &want) <= 1e-10);
    let worst = e.eigenvalues.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-8);
}

#[test]
fn trace_power_examples() {
    assert_eq!(trace_power(&M::identity(5), 3).unwrap(), c(5.0, 0.0));
    let nil = M::new(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
    assert_eq!(trace_power(&nil, 2).unwrap(), c(0.0, 0.0));
    let a = random(30, 7);
    let e = eigenvalues(&a).unwrap();
    for p in 1..=4 {
        let t = trace_power(&a, p).unwrap();
        let s: Complex64 = e.eigenvalues.iter().map(|z| z.powu(p)).sum();
        assert!((t - s).norm() <= 1e-8 * t.norm().max(1.0), "p = {p}: {t} vs {s}");
    }
}

#[test]
fn eigenvalues_are_backward_stable_for_normal_matrices() {
    for seed in 0..5 {
        let n = 24;
        let u = random_unitary(n, seed);
        let mut rng = stream(seed, 2);
        let d: Vec<Complex64> = (0..n)
            .map(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
            .collect();
        let a = u.matmul(&M::from_diagonal(&d)).matmul(&u.adjoint());
        let e = random(n, 100 + seed).scale(c(1e-6 / n as f64, 0.0));
        let pert = eigenvalues(&a.add(&e)).unwrap().eigenvalues;
        let base = eigenvalues(&a).unwrap().eigenvalues;
        let bound = e.frobenius_norm() * (1.0 + 1e-6);
        assert!(
            one_sided(&pert, &base) <= bound,
            "{} > {bound}",
            one_sided(&pert, &base)
        );
    }
}

#[test]
fn ladder_determinant_examples() {
    let one = M::new(1, 1, vec![c(1.0, 0.0)]).unwrap();
    let zero = M::zeros(1, 1);
    let r = ladder_determinant_check(&one, &zero, 1).unwrap();
    assert!((r.det_m - c(-2.0, 0.0)).norm() < 1e-14);
    assert!(r.residual < 1e-14);
    let b = random(2, 42);
    let r = ladder_determinant_check(&M::identity(2), &b, 1).unwrap();
    assert!((r.det_m - c(4.0, 0.0)).norm() < 1e-12);
    let r = ladder_determinant_check(&zero, &one, 2).unwrap();
    assert!(r.absolute && r.residual < 1e-14);
}

#[test]
fn ladder_determinant_random_sweep() {
    let mut rng = stream(77, 0);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let n = rng.gen_range(1..=4);
        let p = rng.gen_range(1..=4);
        let a = random(n, 1000 + trial);
        let b = random(n, 2000 + trial);
        let r = ladder_determinant_check(&a, &b, p).unwrap();
        assert!(!r.absolute);
        worst = worst.max(r.residual);
    }
    assert!(worst <= 1e-8, "worst residual {worst:e}");
}

#[test]
fn single_precision_lu() {
    use num_complex::Complex32;
    let a = ComplexMatrix::<f32>::new(
        2,
        2,
        vec![
            Complex32::new(2.0, 0.0),
            Complex32::new(1.0, 0.0),
            Complex32::new(1.0, 0.0),
            Complex32::new(3.0, 0.0),
        ],
    )
    .unwrap();
    let d = determinant(&a).unwrap();
    assert!((d.re - 5.0).abs() < 1e-5 && d.im.abs() < 1e-6);
}
