//! Smooth strictly convex planar obstacles and the chord/projection geometry
//! of rays `(ω, η)` in `T*S¹`.
//!
//! A ray is the oriented line `{ s·ω + η·ω⊥ : s ∈ ℝ }` where `ω⊥` is `ω`
//! rotated by `+π/2`. All obstacles are parametrised on `[0, 2π)` with
//! positive orientation and exact derivatives.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::montecarlo::{self, Estimate};
use crate::scalar::{wrap_angle, Real};

/// Number of parameter samples used to certify curvature positivity.
pub const CONVEXITY_SAMPLES: usize = 10_000;

const MAX_ROOT_ITERS: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn from_angle(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s)
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    /// Rotation by `+π/2`.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn angle(self) -> T {
        wrap_angle(self.y.atan2(self.x))
    }

    /// Mirror `self` in the line orthogonal to the unit vector `n`.
    #[inline]
    pub fn reflect(self, n: Self) -> Self {
        self - n * (T::two() * self.dot(n))
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// A point `(ω, η)` of `T*S¹`: direction angle and scalar impact parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseRay<T> {
    pub omega: T,
    pub eta: T,
}

impl<T: Real> PhaseRay<T> {
    pub fn new(omega: T, eta: T) -> Self {
        Self {
            omega: wrap_angle(omega),
            eta,
        }
    }

    #[inline]
    pub fn direction(&self) -> Vec2<T> {
        Vec2::from_angle(self.omega)
    }

    /// The point `η·ω⊥` of the line closest to the origin.
    #[inline]
    pub fn foot(&self) -> Vec2<T> {
        self.direction().perp() * self.eta
    }

    /// Phase-space distance `max(|Δω|, |Δη|)` with the angle difference wrapped.
    pub fn distance(&self, other: &Self) -> T {
        let dw = crate::scalar::angle_diff(self.omega, other.omega).abs();
        dw.max((self.eta - other.eta).abs())
    }

    pub fn cast<U: Real>(&self) -> PhaseRay<U> {
        PhaseRay {
            omega: U::lit(self.omega.to_f64_lossy()),
            eta: U::lit(self.eta.to_f64_lossy()),
        }
    }
}

/// A boundary hit of a line: position `s` along the line, boundary parameter
/// and the point itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Impact<T> {
    pub s: T,
    pub param: T,
    pub point: Vec2<T>,
}

/// Intersections of a line with the obstacle boundary, sorted along the line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChordHit<T> {
    Miss,
    Tangent(Impact<T>),
    Crossing { entry: Impact<T>, exit: Impact<T> },
}

impl<T> ChordHit<T> {
    pub fn count(&self) -> usize {
        match self {
            ChordHit::Miss => 0,
            ChordHit::Tangent(_) => 1,
            ChordHit::Crossing { .. } => 2,
        }
    }
}

/// Which half of the boundary a projection is inverted onto: the side facing
/// the incoming direction (`ν·ω < 0`) or the side facing away.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Illuminated,
    Shadow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Harmonic<T> {
    pub order: u32,
    pub amplitude: T,
    pub phase: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape<T> {
    Circle {
        radius: T,
    },
    Ellipse {
        a: T,
        b: T,
    },
    /// Curve with support function `h(θ) = c₀ + Σ cⱼ cos(jθ + φⱼ)`,
    /// parametrised by the outward normal angle.
    Support {
        c0: T,
        harmonics: Vec<Harmonic<T>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexObstacle<T> {
    shape: Shape<T>,
    perimeter: T,
    area: T,
    max_support: T,
}

impl<T: Real> ConvexObstacle<T> {
    pub fn circle(radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidObstacle(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        Self::build(Shape::Circle { radius })
    }

    pub fn ellipse(a: T, b: T) -> Result<Self> {
        if !(a > T::zero() && b > T::zero()) || !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidObstacle(format!(
                "ellipse semi-axes must be positive, got ({a}, {b})"
            )));
        }
        Self::build(Shape::Ellipse { a, b })
    }

    pub fn support(c0: T, harmonics: Vec<Harmonic<T>>) -> Result<Self> {
        if harmonics.iter().any(|h| h.order == 0) {
            return Err(Error::InvalidObstacle("harmonic orders start at 1".into()));
        }
        Self::build(Shape::Support { c0, harmonics })
    }

    fn build(shape: Shape<T>) -> Result<Self> {
        let mut ob = Self {
            shape,
            perimeter: T::zero(),
            area: T::zero(),
            max_support: T::zero(),
        };
        ob.certify_convex()?;
        let n = 4096;
        let dt = T::TAU() / T::from_usize_lossy(n);
        let mut perim = T::zero();
        let mut area2 = T::zero();
        let mut hmax = T::zero();
        for i in 0..n {
            let t = dt * T::from_usize_lossy(i);
            let p = ob.point(t);
            let d = ob.tangent(t);
            perim = perim + d.norm();
            area2 = area2 + p.cross(d);
            hmax = hmax.max(p.norm());
        }
        ob.perimeter = perim * dt;
        ob.area = area2 * dt * T::half();
        ob.max_support = hmax;
        Ok(ob)
    }

    fn certify_convex(&self) -> Result<()> {
        let dt = T::TAU() / T::from_usize_lossy(CONVEXITY_SAMPLES);
        for i in 0..CONVEXITY_SAMPLES {
            let t = dt * T::from_usize_lossy(i);
            let kappa = self.curvature(t);
            if !(kappa > T::zero()) || !kappa.is_finite() {
                return Err(Error::InvalidObstacle(format!(
                    "curvature {kappa} is not positive at t = {t}"
                )));
            }
            if let Shape::Support { .. } = self.shape {
                // origin must be interior so the support function is a radius
                if !(self.support_h(t)[0] > T::zero()) {
                    return Err(Error::InvalidObstacle(format!(
                        "support function is not positive at θ = {t}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> &Shape<T> {
        &self.shape
    }

    /// Length of the boundary.
    pub fn perimeter(&self) -> T {
        self.perimeter
    }

    /// Enclosed area.
    pub fn area(&self) -> T {
        self.area
    }

    /// `max |γ(t)|`, equal to the largest support value.
    pub fn max_radius(&self) -> T {
        self.max_support
    }

    /// `h, h', h'', h'''` of the support-function family at `θ`.
    fn support_h(&self, theta: T) -> [T; 4] {
        match &self.shape {
            Shape::Support { c0, harmonics } => {
                let mut h = [*c0, T::zero(), T::zero(), T::zero()];
                for hm in harmonics {
                    let j = T::from_u32(hm.order).unwrap();
                    let (s, c) = (j * theta + hm.phase).sin_cos();
                    let a = hm.amplitude;
                    h[0] = h[0] + a * c;
                    h[1] = h[1] - a * j * s;
                    h[2] = h[2] - a * j * j * c;
                    h[3] = h[3] + a * j * j * j * s;
                }
                h
            }
            _ => unreachable!("support_h on a non-support shape"),
        }
    }

    /// Boundary point `γ(t)`.
    pub fn point(&self, t: T) -> Vec2<T> {
        match &self.shape {
            Shape::Circle { radius } => Vec2::from_angle(t) * *radius,
            Shape::Ellipse { a, b } => {
                let (s, c) = t.sin_cos();
                Vec2::new(*a * c, *b * s)
            }
            Shape::Support { .. } => {
                let h = self.support_h(t);
                let n = Vec2::from_angle(t);
                n * h[0] + n.perp() * h[1]
            }
        }
    }

    /// `γ'(t)`.
    pub fn tangent(&self, t: T) -> Vec2<T> {
        match &self.shape {
            Shape::Circle { radius } => Vec2::from_angle(t).perp() * *radius,
            Shape::Ellipse { a, b } => {
                let (s, c) = t.sin_cos();
                Vec2::new(-*a * s, *b * c)
            }
            Shape::Support { .. } => {
                let h = self.support_h(t);
                Vec2::from_angle(t).perp() * (h[0] + h[2])
            }
        }
    }

    /// `γ''(t)`.
    pub fn second_derivative(&self, t: T) -> Vec2<T> {
        match &self.shape {
            Shape::Circle { radius } => -Vec2::from_angle(t) * *radius,
            Shape::Ellipse { a, b } => {
                let (s, c) = t.sin_cos();
                Vec2::new(-*a * c, -*b * s)
            }
            Shape::Support { .. } => {
                let h = self.support_h(t);
                let n = Vec2::from_angle(t);
                n.perp() * (h[1] + h[3]) - n * (h[0] + h[2])
            }
        }
    }

    /// Outward unit normal `ν(t)`.
    pub fn normal(&self, t: T) -> Vec2<T> {
        match &self.shape {
            Shape::Circle { .. } | Shape::Support { .. } => Vec2::from_angle(t),
            Shape::Ellipse { .. } => {
                let d = self.tangent(t);
                Vec2::new(d.y, -d.x) * (T::one() / d.norm())
            }
        }
    }

    /// Signed curvature, positive for a convex positively oriented curve.
    pub fn curvature(&self, t: T) -> T {
        if let Shape::Support { .. } = self.shape {
            // radius of curvature h + h'' carries the sign
            let h = self.support_h(t);
            return T::one() / (h[0] + h[2]);
        }
        let d1 = self.tangent(t);
        let d2 = self.second_derivative(t);
        let speed = d1.norm();
        d1.cross(d2) / (speed * speed * speed)
    }

    /// Boundary parameter at which the outward normal has angle `theta`.
    pub fn param_for_normal(&self, theta: T) -> T {
        match &self.shape {
            Shape::Circle { .. } | Shape::Support { .. } => wrap_angle(theta),
            Shape::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                wrap_angle((*b * s).atan2(*a * c))
            }
        }
    }

    /// Support function `h(θ) = max_y y·(cos θ, sin θ)`.
    pub fn support_value(&self, theta: T) -> T {
        match &self.shape {
            Shape::Circle { radius } => *radius,
            Shape::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                ((*a * c).powi(2) + (*b * s).powi(2)).sqrt()
            }
            Shape::Support { .. } => self.support_h(theta)[0],
        }
    }

    /// Open interval of impact parameters `(η₋, η₊)` of interacting rays with
    /// direction `omega`; its endpoints are the glancing values.
    pub fn impact_interval(&self, omega: T) -> (T, T) {
        let half_pi = T::FRAC_PI_2();
        let hi = self.support_value(omega + half_pi);
        let lo = -self.support_value(omega - half_pi);
        (lo, hi)
    }

    /// Intersections of the line of `ray` with the boundary.
    pub fn chord(&self, ray: &PhaseRay<T>) -> Result<ChordHit<T>> {
        let omega = ray.direction();
        let u = omega.perp();
        let eta = ray.eta;
        let (lo, hi) = self.impact_interval(ray.omega);
        let tol = T::epsilon() * T::lit(64.0) * self.max_support;
        if eta > hi + tol || eta < lo - tol {
            return Ok(ChordHit::Miss);
        }
        let t_hi = self.param_for_normal(u.angle());
        let t_lo = self.param_for_normal((-u).angle());
        if (eta - hi).abs() <= tol || (eta - lo).abs() <= tol {
            let t = if (eta - hi).abs() <= tol { t_hi } else { t_lo };
            let p = self.point(t);
            return Ok(ChordHit::Tangent(Impact {
                s: p.dot(omega),
                param: t,
                point: p,
            }));
        }
        // g(t) = γ(t)·u − η is monotone on each arc between the tangent points.
        let tau = T::TAU();
        let mut a_end = t_hi;
        if a_end <= t_lo {
            a_end = a_end + tau;
        }
        let r1 = self.monotone_root(u, eta, t_lo, a_end).ok_or(Error::NoConvergence {
            omega: ray.omega.to_f64_lossy(),
            eta: eta.to_f64_lossy(),
        })?;
        let r2 = self
            .monotone_root(u, eta, a_end, t_lo + tau)
            .ok_or(Error::NoConvergence {
                omega: ray.omega.to_f64_lossy(),
                eta: eta.to_f64_lossy(),
            })?;
        let mk = |t: T| {
            let p = self.point(t);
            Impact {
                s: p.dot(omega),
                param: wrap_angle(t),
                point: p,
            }
        };
        let (i1, i2) = (mk(r1), mk(r2));
        let (entry, exit) = if i1.s <= i2.s { (i1, i2) } else { (i2, i1) };
        Ok(ChordHit::Crossing { entry, exit })
    }

    /// Safeguarded Newton for `γ(t)·u = η` on a bracket where `g` changes sign
    /// monotonically.
    fn monotone_root(&self, u: Vec2<T>, eta: T, mut a: T, mut b: T) -> Option<T> {
        let g = |t: T| self.point(t).dot(u) - eta;
        let mut ga = g(a);
        let gb = g(b);
        if ga == T::zero() {
            return Some(a);
        }
        if gb == T::zero() {
            return Some(b);
        }
        if ga.signum() == gb.signum() {
            return None;
        }
        let tol = T::epsilon() * T::lit(8.0) * (T::one() + b.abs());
        let mut t = (a + b) * T::half();
        for _ in 0..MAX_ROOT_ITERS {
            let gt = g(t);
            if gt == T::zero() {
                return Some(t);
            }
            if gt.signum() == ga.signum() {
                a = t;
                ga = gt;
            } else {
                b = t;
            }
            let dg = self.tangent(t).dot(u);
            let delta = gt / dg;
            if delta.abs() <= tol {
                return Some(t - delta);
            }
            let mut next = t - delta;
            if !(next > a && next < b) || !next.is_finite() {
                next = (a + b) * T::half();
            }
            let step = (next - t).abs();
            t = next;
            if step <= tol || (b - a).abs() <= tol {
                return Some(t);
            }
        }
        None
    }

    /// Monte Carlo estimate of `Vol(𝒥) = ∫ width(ω) dω`.
    pub fn interaction_volume(&self, samples: usize, seed: u64) -> Estimate {
        let r = self.max_support.to_f64_lossy();
        let box_volume = std::f64::consts::TAU * 2.0 * r;
        let hits = montecarlo::count(samples, seed, |rng| {
            let (w, e) = montecarlo::uniform_ray(rng, r);
            let ray = PhaseRay::new(T::lit(w), T::lit(e));
            matches!(self.chord(&ray), Ok(ChordHit::Crossing { .. }))
        });
        Estimate::from_fraction(hits, samples, box_volume)
    }

    /// Point of `Y∓_ω` projecting onto `z`, with the Jacobian `|ω·ν|⁻¹`.
    pub fn inverse_project(&self, omega: T, z: T, side: Side) -> Result<(Vec2<T>, T)> {
        let ray = PhaseRay::new(omega, z);
        match self.chord(&ray)? {
            ChordHit::Crossing { entry, exit } => {
                let hit = match side {
                    Side::Illuminated => entry,
                    Side::Shadow => exit,
                };
                let nu = self.normal(hit.param);
                let jac = T::one() / ray.direction().dot(nu).abs();
                Ok((hit.point, jac))
            }
            _ => Err(Error::Domain(z.to_f64_lossy())),
        }
    }

    /// Impact-parameter distance from `ray` to the glancing set.
    pub fn glancing_distance(&self, ray: &PhaseRay<T>) -> T {
        let (lo, hi) = self.impact_interval(ray.omega);
        (hi - ray.eta).abs().min((ray.eta - lo).abs())
    }

    /// Membership in `G_ε`: glancing distance below `k^{-1/3+ε}`.
    pub fn in_glancing_zone(&self, ray: &PhaseRay<T>, k: T, eps: T) -> bool {
        self.glancing_distance(ray) < k.powf(eps - T::one() / T::lit(3.0))
    }

    /// The ray with direction `incoming` that leaves the obstacle along
    /// `outgoing` after one specular reflection. `None` in the forward
    /// direction, where no reflection exists.
    pub fn specular_ray(&self, incoming: T, outgoing: T) -> Option<PhaseRay<T>> {
        let d = Vec2::from_angle(incoming);
        let th = Vec2::from_angle(outgoing);
        let diff = th - d;
        if diff.norm() <= T::epsilon().sqrt() {
            return None;
        }
        let t = self.param_for_normal(diff.angle());
        let y = self.point(t);
        Some(PhaseRay::new(incoming, project(incoming, y)))
    }
}

/// Coordinate of `π_ω(y) = y − (y·ω)ω` in `ω⊥`.
pub fn project<T: Real>(omega: T, y: Vec2<T>) -> T {
    y.dot(Vec2::from_angle(omega).perp())
}
