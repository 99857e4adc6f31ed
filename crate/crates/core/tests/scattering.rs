use num_complex::Complex64;
use phaseshift_core::linalg::eigenvalues;
use phaseshift_core::scattering::*;
use phaseshift_core::{ConvexObstacle, Error, Vec2};
use std::f64::consts::{PI, TAU};

const EULER_GAMMA: f64 = 0.5772156649015329;
/// `S₀ = −H₀⁽²⁾(1)/H₀⁽¹⁾(1)`.
const S0_AT_ONE: (f64, f64) = (-0.973743228415274485, 0.227649127201047226);

/// `J₀` and `Y₀` from their power series.
fn j0_y0_series(x: f64) -> (f64, f64) {
    let h2 = x * x / 4.0;
    let (mut term, mut j0, mut tail, mut harmonic) = (1.0, 1.0, 0.0, 0.0);
    for m in 1..60 {
        term *= -h2 / (m * m) as f64;
        harmonic += 1.0 / m as f64;
        j0 += term;
        tail -= harmonic * term;
    }
    let y0 = 2.0 / PI * ((x / 2.0).ln() + EULER_GAMMA) * j0 + 2.0 / PI * tail;
    (j0, y0)
}

fn disk() -> ConvexObstacle {
    ConvexObstacle::circle(1.0).unwrap()
}

fn ellipse() -> ConvexObstacle {
    ConvexObstacle::ellipse(2.0, 1.0).unwrap()
}

/// Greedy one-to-one matching distance (adequate when the sets agree far
/// better than their spacing).
fn matching_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (i, d) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[i] = true;
        worst = worst.max(d);
    }
    worst
}

#[test]
fn golden_s0_at_unit_wavenumber() {
    let (j0, y0) = j0_y0_series(1.0);
    let h1 = Complex64::new(j0, y0);
    let oracle = -h1.conj() / h1;
    assert!((oracle - Complex64::new(S0_AT_ONE.0, S0_AT_ONE.1)).norm() < 1e-14);
    let s0 = disk_modes(1.0, 1.0, 0)[0];
    assert!((s0 - oracle).norm() < 1e-13, "{s0} vs {oracle}");
}

#[test]
fn partial_waves_are_unimodular_and_trivial_at_zeros() {
    for s in disk_modes(1.0, 13.7, 80) {
        assert!((s.norm() - 1.0).abs() < 1e-14);
    }
    let j01 = 2.404825557695773;
    let s = disk_modes(1.0, j01, 0)[0];
    assert!((s - 1.0).norm() < 1e-13);
    // far past the bandwidth the modes are flushed to exactly 1
    let far = disk_modes(1.0, 5.0, 600);
    assert_eq!(far[600], Complex64::new(1.0, 0.0));
}

#[test]
fn grid_below_bandwidth_is_rejected() {
    assert!(matches!(disk_smatrix(1.0, 20.0, 100), Err(Error::Resolution(_))));
    assert!(matches!(
        nystrom_smatrix(&disk(), 20.0, 40, 136),
        Err(Error::Resolution(_))
    ));
}

#[test]
fn nystrom_matches_disk_oracle() {
    let k = 20.0;
    let m = default_grid_size(k, 1.0);
    let oracle = disk_smatrix(1.0, k, m).unwrap();
    let ny = nystrom_smatrix(&disk(), k, min_nodes(k, TAU), m).unwrap();
    assert!(ny.unitarity_defect <= 1e-8, "{:e}", ny.unitarity_defect);
    let a = eigenvalues(&ny.matrix).unwrap().eigenvalues;
    let b = eigenvalues(&oracle.matrix).unwrap().eigenvalues;
    let d = matching_distance(&a, &b);
    assert!(d <= 1e-6, "matching distance {d:e}");
}

#[test]
fn ellipse_is_unitary_and_self_convergent() {
    let e = ellipse();
    let k = 20.0;
    let m = default_grid_size(k, e.max_radius());
    let n = min_nodes(k, e.perimeter());
    let coarse = nystrom_smatrix(&e, k, n, m).unwrap();
    let fine = nystrom_smatrix(&e, k, 2 * n, m).unwrap();
    assert!(coarse.unitarity_defect <= 1e-8);
    let a = eigenvalues(&coarse.matrix).unwrap().eigenvalues;
    let b = eigenvalues(&fine.matrix).unwrap().eigenvalues;
    assert!(matching_distance(&a, &b) <= 1e-7);
    assert!(nystrom_smatrix_checked(&e, k, n, m, 1e-8).is_ok());
}

#[test]
fn reciprocity() {
    let e = ellipse();
    let k = 12.0;
    let m = default_grid_size(k, e.max_radius());
    let op = nystrom_smatrix(&e, k, default_nodes(k, e.perimeter()), m).unwrap();
    let h = m / 2;
    let scale = (0..m).map(|j| op.amplitude(j, 0).norm()).fold(0.0, f64::max);
    for j in (0..m).step_by(7) {
        for l in (0..m).step_by(5) {
            let lhs = op.amplitude(j, l);
            let rhs = op.amplitude((l + h) % m, (j + h) % m);
            assert!((lhs - rhs).norm() <= 1e-9 * scale);
        }
    }
}

#[test]
fn kirchhoff_forward_amplitude() {
    // ω = θ: the weight is 2 max(ν·d, 0), integrating to twice the width
    for k in [5.0, 20.0] {
        let kk = kirchhoff_amplitude(&disk(), k);
        let fine = kirchhoff_amplitude_with(&disk(), k, 20_000);
        let a = kk.amplitude(0.3, 0.3);
        assert!((a - fine.amplitude(0.3, 0.3)).norm() < 1e-4 * a.norm());
        assert!((a - Complex64::new(-k / PI, 0.0)).norm() < 1e-4 * k);
    }
}

#[test]
fn kirchhoff_backscatter_grows_like_root_k() {
    let ks = [20.0, 40.0, 80.0];
    let mags: Vec<f64> = ks
        .iter()
        .map(|&k| kirchhoff_amplitude(&disk(), k).amplitude(PI, 0.0).norm())
        .collect();
    let slope = (mags[2] / mags[0]).ln() / (ks[2] / ks[0]).ln();
    assert!((slope - 0.5).abs() <= 0.05, "exponent {slope}");
}

#[test]
fn kirchhoff_against_nystrom() {
    let mut gaps = Vec::new();
    for k in [20.0, 40.0] {
        let m = default_grid_size(k, 1.0);
        let op = nystrom_smatrix(&disk(), k, min_nodes(k, TAU), m).unwrap();
        gaps.push(kirchhoff_gap(&op, &kirchhoff_amplitude(&disk(), k), 0, 0.3));
    }
    assert!(gaps[1] < gaps[0], "{gaps:?}");
    assert!(gaps[1] < 0.06, "{gaps:?}");
}

#[test]
fn kirchhoff_weight_vanishes_on_the_shadow_side() {
    for i in 0..360 {
        let nu = Vec2::from_angle(i as f64 * TAU / 360.0);
        for j in 0..36 {
            let w = Vec2::from_angle(j as f64 * TAU / 36.0);
            if nu.dot(w) > 0.0 {
                assert_eq!(kirchhoff_weight(nu, w, w), 0.0);
            }
        }
    }
}

#[test]
fn container_round_trip_and_corruption() {
    let op = nystrom_smatrix(&disk(), 8.0, 80, default_grid_size(8.0, 1.0)).unwrap();
    let bytes = container::encode(&op);
    let back = container::decode(&bytes).unwrap();
    assert_eq!(back, op);
    for (i, z) in op.matrix.as_slice().iter().enumerate() {
        assert_eq!(z.re.to_bits(), back.matrix.as_slice()[i].re.to_bits());
    }
    let mut bad = bytes.clone();
    bad[40] ^= 1;
    assert!(matches!(container::decode(&bad), Err(Error::Corrupt(_))));
    assert!(matches!(container::decode(&bytes[..20]), Err(Error::Corrupt(_))));
}

#[test]
fn obstacle_hash_separates_shapes() {
    assert_ne!(obstacle_hash(&disk()), obstacle_hash(&ellipse()));
    assert_eq!(
        obstacle_hash(&disk()),
        obstacle_hash(&ConvexObstacle::circle(1.0).unwrap())
    );
}
