//! Exterior scattering map `κ`, interior billiard map `κ_int`, the four
//! single-reflection branches, and near-periodic volume estimates.

use crate::error::{Error, Result};
use crate::geometry::{project, ChordHit, ConvexObstacle, Impact, PhaseRay, Vec2};
use crate::montecarlo::{self, Estimate};
use crate::scalar::{angle_diff, wrap_angle, Real};

/// Rays hitting the boundary with `|ξ·ν|` below this are rejected.
pub const GLANCING_TOLERANCE: f64 = 1e-8;

/// A point of the interior billiard phase space: boundary parameter `t` and
/// an inward unit direction stored as its angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryState<T> {
    pub t: T,
    pub xi: T,
}

impl<T: Real> BoundaryState<T> {
    /// Checked constructor: the direction must point strictly inward.
    pub fn new(obstacle: &ConvexObstacle<T>, t: T, xi: T) -> Result<Self> {
        let s = Self {
            t: wrap_angle(t),
            xi: wrap_angle(xi),
        };
        let c = s.direction().dot(obstacle.normal(s.t));
        if !(c < -T::lit(GLANCING_TOLERANCE)) {
            let y = obstacle.point(s.t);
            return Err(Error::Glancing {
                omega: s.xi.to_f64_lossy(),
                eta: project(s.xi, y).to_f64_lossy(),
            });
        }
        Ok(s)
    }

    #[inline]
    pub fn direction(&self) -> Vec2<T> {
        Vec2::from_angle(self.xi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Minus,
    Plus,
}

/// Branch label `(ε₁, ε₂)`: `ε₁` picks the impact with `ν·α` of that sign
/// (entry or exit), `ε₂` keeps (`−`) or reflects (`+`) the direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ScatterBranch {
    pub eps1: Sign,
    pub eps2: Sign,
}

impl ScatterBranch {
    pub const ALL: [ScatterBranch; 4] = [
        ScatterBranch::new(Sign::Minus, Sign::Minus),
        ScatterBranch::new(Sign::Minus, Sign::Plus),
        ScatterBranch::new(Sign::Plus, Sign::Minus),
        ScatterBranch::new(Sign::Plus, Sign::Plus),
    ];

    pub const fn new(eps1: Sign, eps2: Sign) -> Self {
        Self { eps1, eps2 }
    }
}

/// Output of a branch: new direction `α'`, boundary point `y'` and the ray
/// `(α', π_{α'}(y'))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchPoint<T> {
    pub alpha: T,
    pub point: Vec2<T>,
    pub normal: Vec2<T>,
    pub ray: PhaseRay<T>,
}

fn glancing<T: Real>(ray: &PhaseRay<T>) -> Error {
    Error::Glancing {
        omega: ray.omega.to_f64_lossy(),
        eta: ray.eta.to_f64_lossy(),
    }
}

/// Both impacts of an interacting ray; `None` for a non-interacting one.
fn impacts<T: Real>(obstacle: &ConvexObstacle<T>, ray: &PhaseRay<T>) -> Result<Option<(Impact<T>, Impact<T>)>> {
    match obstacle.chord(ray)? {
        ChordHit::Miss => Ok(None),
        ChordHit::Tangent(_) => Err(glancing(ray)),
        ChordHit::Crossing { entry, exit } => {
            let w = ray.direction();
            let tol = T::lit(GLANCING_TOLERANCE);
            if w.dot(obstacle.normal(entry.param)).abs() < tol || w.dot(obstacle.normal(exit.param)).abs() < tol {
                return Err(glancing(ray));
            }
            Ok(Some((entry, exit)))
        }
    }
}

/// `κ`: specular reflection at the first impact; identity off `𝒥`.
pub fn scatter_map<T: Real>(obstacle: &ConvexObstacle<T>, ray: &PhaseRay<T>) -> Result<PhaseRay<T>> {
    match impacts(obstacle, ray)? {
        None => Ok(*ray),
        Some((entry, _)) => {
            let nu = obstacle.normal(entry.param);
            let w = ray.direction().reflect(nu);
            let omega = w.angle();
            Ok(PhaseRay::new(omega, project(omega, entry.point)))
        }
    }
}

/// `κ^p`.
pub fn scatter_iterate<T: Real>(obstacle: &ConvexObstacle<T>, ray: &PhaseRay<T>, p: usize) -> Result<PhaseRay<T>> {
    let mut r = *ray;
    for _ in 0..p {
        r = scatter_map(obstacle, &r)?;
    }
    Ok(r)
}

/// The point of `𝒥` scattered into `ray` by `κ`.
pub fn scatter_map_inverse<T: Real>(obstacle: &ConvexObstacle<T>, ray: &PhaseRay<T>) -> Result<PhaseRay<T>> {
    match impacts(obstacle, ray)? {
        None => Ok(*ray),
        Some(_) => Ok(tau_branch(obstacle, ray, ScatterBranch::new(Sign::Plus, Sign::Plus))?.ray),
    }
}

/// `κ_int`: fly to the next boundary impact and reflect.
pub fn billiard_map<T: Real>(obstacle: &ConvexObstacle<T>, s: &BoundaryState<T>) -> Result<BoundaryState<T>> {
    let y = obstacle.point(s.t);
    let xi = s.direction();
    let ray = PhaseRay::new(s.xi, project(s.xi, y));
    if xi.dot(obstacle.normal(s.t)) > -T::lit(GLANCING_TOLERANCE) {
        return Err(glancing(&ray));
    }
    let exit = match obstacle.chord(&ray)? {
        ChordHit::Crossing { exit, .. } => exit,
        _ => return Err(glancing(&ray)),
    };
    let nu = obstacle.normal(exit.param);
    if xi.dot(nu).abs() < T::lit(GLANCING_TOLERANCE) {
        return Err(glancing(&ray));
    }
    Ok(BoundaryState {
        t: exit.param,
        xi: xi.reflect(nu).angle(),
    })
}

/// Impact state attached to an interacting ray: the first impact together
/// with the reversed reflected direction, which points into the obstacle.
pub fn impact_state<T: Real>(obstacle: &ConvexObstacle<T>, ray: &PhaseRay<T>) -> Result<BoundaryState<T>> {
    match impacts(obstacle, ray)? {
        None => Err(Error::Domain(ray.eta.to_f64_lossy())),
        Some((entry, _)) => {
            let reflected = ray.direction().reflect(obstacle.normal(entry.param));
            Ok(BoundaryState {
                t: entry.param,
                xi: (-reflected).angle(),
            })
        }
    }
}

/// Discrepancy between `κ_int(J(ray))` and `J(κ(ray))`, where `J` is
/// [`impact_state`]: the larger of the boundary point distance and the
/// direction angle difference.
pub fn conjugacy_check<T: Real>(obstacle: &ConvexObstacle<T>, ray: &PhaseRay<T>) -> Result<T> {
    let lhs = billiard_map(obstacle, &impact_state(obstacle, ray)?)?;
    let rhs = impact_state(obstacle, &scatter_map(obstacle, ray)?)?;
    let dp = (obstacle.point(lhs.t) - obstacle.point(rhs.t)).norm();
    let da = angle_diff(lhs.xi, rhs.xi).abs();
    Ok(dp.max(da))
}

/// The branch `τ^{ε₁,ε₂}` of single-reflection data over `ray`.
pub fn tau_branch<T: Real>(
    obstacle: &ConvexObstacle<T>,
    ray: &PhaseRay<T>,
    branch: ScatterBranch,
) -> Result<BranchPoint<T>> {
    let (entry, exit) = impacts(obstacle, ray)?.ok_or_else(|| Error::Domain(ray.eta.to_f64_lossy()))?;
    let hit = match branch.eps1 {
        Sign::Minus => entry,
        Sign::Plus => exit,
    };
    let nu = obstacle.normal(hit.param);
    let alpha = match branch.eps2 {
        Sign::Minus => ray.omega,
        Sign::Plus => ray.direction().reflect(nu).angle(),
    };
    Ok(BranchPoint {
        alpha,
        point: hit.point,
        normal: nu,
        ray: PhaseRay::new(alpha, project(alpha, hit.point)),
    })
}

/// Monte Carlo estimate of `Vol{ray ∈ 𝒥 : d(κᵖ(ray), ray) < ε}` with the
/// phase-space distance `max(|Δω|, |Δη|)`.
pub fn near_periodic_volume<T: Real>(
    obstacle: &ConvexObstacle<T>,
    p: usize,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Estimate {
    let r = obstacle.max_radius().to_f64_lossy();
    let hits = montecarlo::count(samples, seed, |rng| {
        let (w, e) = montecarlo::uniform_ray(rng, r);
        let ray = PhaseRay::new(T::lit(w), T::lit(e));
        match impacts(obstacle, &ray) {
            Ok(Some(_)) => match scatter_iterate(obstacle, &ray, p) {
                Ok(out) => out.distance(&ray).to_f64_lossy() < eps,
                Err(_) => false,
            },
            _ => false,
        }
    });
    Estimate::from_fraction(hits, samples, std::f64::consts::TAU * 2.0 * r)
}

/// Extremes of `d_g(κ(ray)) / d_g(ray)` over sampled interacting rays whose
/// glancing distance exceeds `min_distance`.
pub fn glancing_stability_ratio<T: Real>(
    obstacle: &ConvexObstacle<T>,
    samples: usize,
    min_distance: f64,
    seed: u64,
) -> (f64, f64) {
    use rayon::prelude::*;
    let r = obstacle.max_radius().to_f64_lossy();
    let chunk = 4096usize;
    let chunks = samples.div_ceil(chunk);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = montecarlo::stream(seed, c as u64);
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for _ in 0..chunk.min(samples - c * chunk) {
                let (w, e) = montecarlo::uniform_ray(&mut rng, r);
                let ray = PhaseRay::new(T::lit(w), T::lit(e));
                let d0 = obstacle.glancing_distance(&ray).to_f64_lossy();
                if d0 <= min_distance || !matches!(impacts(obstacle, &ray), Ok(Some(_))) {
                    continue;
                }
                if let Ok(out) = scatter_map(obstacle, &ray) {
                    let q = obstacle.glancing_distance(&out).to_f64_lossy() / d0;
                    lo = lo.min(q);
                    hi = hi.max(q);
                }
            }
            (lo, hi)
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)))
}

/// A ray with `κᵖ(ray) ≈ ray` found by damped Gauss–Newton from `seed`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicRay<T> {
    pub ray: PhaseRay<T>,
    pub residual: T,
    pub iterations: usize,
}

/// Return displacement `κᵖ(ray) − ray` with the angle wrapped.
fn displacement<T: Real>(obstacle: &ConvexObstacle<T>, ray: &PhaseRay<T>, p: usize) -> Result<[T; 2]> {
    let out = scatter_iterate(obstacle, ray, p)?;
    Ok([angle_diff(out.omega, ray.omega), out.eta - ray.eta])
}

/// Levenberg-damped Gauss–Newton on the period-`p` return displacement;
/// tolerates the rank-deficient Jacobians of continuous families.
pub fn find_periodic_ray<T: Real>(
    obstacle: &ConvexObstacle<T>,
    p: usize,
    seed: PhaseRay<T>,
    tol: T,
) -> Result<PeriodicRay<T>> {
    let mut ray = seed;
    let mut f = displacement(obstacle, &ray, p)?;
    let norm = |v: &[T; 2]| v[0].hypot(v[1]);
    let mut lambda = T::lit(1e-3);
    let h = T::epsilon().sqrt() * T::lit(4.0);
    for it in 0..100 {
        let res = norm(&f);
        if res <= tol {
            return Ok(PeriodicRay {
                ray,
                residual: res,
                iterations: it,
            });
        }
        // forward-difference Jacobian
        let mut jac = [[T::zero(); 2]; 2];
        for c in 0..2 {
            let mut q = ray;
            if c == 0 {
                q.omega = q.omega + h;
            } else {
                q.eta = q.eta + h;
            }
            let fq = displacement(obstacle, &q, p)?;
            jac[0][c] = (fq[0] - f[0]) / h;
            jac[1][c] = (fq[1] - f[1]) / h;
        }
        // (JᵀJ + λI) δ = −Jᵀf
        let mut accepted = false;
        for _ in 0..30 {
            let a00 = jac[0][0] * jac[0][0] + jac[1][0] * jac[1][0] + lambda;
            let a11 = jac[0][1] * jac[0][1] + jac[1][1] * jac[1][1] + lambda;
            let a01 = jac[0][0] * jac[0][1] + jac[1][0] * jac[1][1];
            let g0 = -(jac[0][0] * f[0] + jac[1][0] * f[1]);
            let g1 = -(jac[0][1] * f[0] + jac[1][1] * f[1]);
            let det = a00 * a11 - a01 * a01;
            let d0 = (g0 * a11 - a01 * g1) / det;
            let d1 = (a00 * g1 - a01 * g0) / det;
            let cand = PhaseRay::new(ray.omega + d0, ray.eta + d1);
            if let Ok(fc) = displacement(obstacle, &cand, p) {
                if norm(&fc) < res {
                    ray = cand;
                    f = fc;
                    lambda = (lambda * T::lit(0.3)).max(T::lit(1e-12));
                    accepted = true;
                    break;
                }
            }
            lambda = lambda * T::lit(10.0);
        }
        if !accepted {
            break;
        }
    }
    let res = norm(&f);
    if res <= tol {
        return Ok(PeriodicRay {
            ray,
            residual: res,
            iterations: 100,
        });
    }
    Err(Error::NoConvergence {
        omega: ray.omega.to_f64_lossy(),
        eta: ray.eta.to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn back_reflection() {
        let disk = ConvexObstacle::circle(1.0).unwrap();
        let out = scatter_map(&disk, &PhaseRay::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(out.omega, PI, epsilon = 1e-14);
        assert_abs_diff_eq!(out.eta, 0.0, epsilon = 1e-14);
        let miss = PhaseRay::new(0.4, 1.5);
        assert_eq!(scatter_map(&disk, &miss).unwrap(), miss);
        assert!(matches!(
            scatter_map(&disk, &PhaseRay::new(0.4, 1.0)),
            Err(Error::Glancing { .. })
        ));
    }

    #[test]
    fn diameter_and_axis_orbits() {
        let disk = ConvexObstacle::circle(1.0).unwrap();
        let s = BoundaryState::new(&disk, 0.0, PI).unwrap();
        let s1 = billiard_map(&disk, &s).unwrap();
        assert_abs_diff_eq!(disk.point(s1.t).x, -1.0, epsilon = 1e-14);
        assert!(angle_diff(s1.xi, 0.0).abs() < 1e-14);
        let el = ConvexObstacle::ellipse(2.0, 1.0).unwrap();
        let s = BoundaryState::new(&el, 0.0, PI).unwrap();
        let s1 = billiard_map(&el, &s).unwrap();
        assert_abs_diff_eq!(el.point(s1.t).x, -2.0, epsilon = 1e-14);
        assert!(angle_diff(s1.xi, 0.0).abs() < 1e-14);
        let s2 = billiard_map(&el, &s1).unwrap();
        assert!(angle_diff(s2.t, 0.0).abs() < 1e-14);
        assert!(BoundaryState::new(&el, 0.0, 0.0).is_err());
        assert!(BoundaryState::new(&el, 0.0, PI / 2.0).is_err());
    }
}
