//! Integer-order cylinder functions of real positive argument and the
//! Dirichlet spectrum of the disk.
//!
//! `J_n` comes from Miller's backward recurrence normalised by
//! `J₀ + 2ΣJ₂ₖ = 1`; `Y₀, Y₁` from the Neumann series over the same sweep
//! (Hankel asymptotics for large argument) and `Y_n` by forward recurrence.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_4, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const RESCALE_AT: f64 = 1e250;
/// Above this argument `J₀, J₁, Y₀, Y₁` use the Hankel expansion.
const ASYMPTOTIC_FROM: f64 = 25.0;

/// `J`, `Y` and the Hankel functions of one order at one argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylinderEval {
    pub order: u32,
    pub x: f64,
    pub j: f64,
    pub y: f64,
    /// `|J_n(x)|` is below the smallest normal double and was flushed to 0.
    pub j_underflow: bool,
    /// `Y_n(x)` overflowed to `-∞`.
    pub y_overflow: bool,
}

impl CylinderEval {
    pub fn h1(&self) -> Complex64 {
        Complex64::new(self.j, self.y)
    }

    pub fn h2(&self) -> Complex64 {
        Complex64::new(self.j, -self.y)
    }
}

fn miller_start(nmax: usize, x: f64) -> usize {
    let lead = nmax.max(x.ceil() as usize);
    lead + 30usize.max((10.0 * x.cbrt()).ceil() as usize)
}

/// `J₀(x), …, J_{nmax}(x)` from one backward sweep.
pub fn bessel_j_array(nmax: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "bessel_j_array: x = {x}");
    if x == 0.0 {
        let mut v = vec![0.0; nmax + 1];
        v[0] = 1.0;
        return v;
    }
    let (f, norm) = miller_sweep(nmax, x);
    f[..=nmax].iter().map(|v| v / norm).collect()
}

/// Unnormalised backward recurrence values and the normalisation sum.
fn miller_sweep(nmax: usize, x: f64) -> (Vec<f64>, f64) {
    let start = miller_start(nmax, x);
    let mut f = vec![0.0; start + 2];
    f[start] = 1e-300;
    for m in (1..=start).rev() {
        f[m - 1] = (2.0 * m as f64 / x) * f[m] - f[m + 1];
        if f[m - 1].abs() > RESCALE_AT {
            for v in &mut f[m - 1..] {
                *v /= RESCALE_AT;
            }
        }
    }
    let mut norm = f[0];
    let mut m = 2;
    while m <= start {
        norm += 2.0 * f[m];
        m += 2;
    }
    (f, norm)
}

/// `J_n(x)`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    bessel_j_array(n as usize, x)[n as usize]
}

/// `J₀, J₁, Y₀, Y₁` at `x > 0`.
pub fn bessel_01(x: f64) -> [f64; 4] {
    assert!(x > 0.0 && x.is_finite(), "bessel_01: x = {x}");
    if x >= ASYMPTOTIC_FROM {
        let (j0, y0) = hankel_asymptotic(0.0, x);
        let (j1, y1) = hankel_asymptotic(1.0, x);
        return [j0, j1, y0, y1];
    }
    let (f, norm) = miller_sweep(1, x);
    let j = |m: usize| f[m] / norm;
    let lg = (x / 2.0).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < f.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j(2 * k) / k as f64;
        s1 += sign * (j(2 * k - 1) - j(2 * k + 1)) / k as f64;
        k += 1;
    }
    let (j0, j1) = (j(0), j(1));
    let y0 = 2.0 / PI * lg * j0 - 4.0 / PI * s0;
    let y1 = -2.0 / (PI * x) * j0 + 2.0 / PI * lg * j1 + 2.0 / PI * s1;
    [j0, j1, y0, y1]
}

/// Hankel's large-argument expansion of `(J_ν(x), Y_ν(x))`, summed up to the
/// smallest term.
fn hankel_asymptotic(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= last || term.abs() < 1e-18 {
            break;
        }
        last = term.abs();
        // a_k / x^k enters P for even k, Q for odd k, with alternating signs
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let chi = x - (nu / 2.0) * PI - FRAC_PI_4;
    let (s, c) = chi.sin_cos();
    let amp = (2.0 / (PI * x)).sqrt();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// `Y₀(x), …, Y_{nmax}(x)` by forward recurrence; entries past an overflow
/// are `-∞`.
pub fn bessel_y_array(nmax: usize, x: f64) -> Vec<f64> {
    let [_, _, y0, y1] = bessel_01(x);
    let mut y = Vec::with_capacity(nmax + 1);
    y.push(y0);
    if nmax >= 1 {
        y.push(y1);
    }
    for m in 1..nmax {
        let next = (2.0 * m as f64 / x) * y[m] - y[m - 1];
        y.push(if next.is_finite() { next } else { f64::NEG_INFINITY });
    }
    y
}

/// `Y_n(x)` for `x > 0`.
pub fn bessel_y(n: u32, x: f64) -> f64 {
    bessel_y_array(n as usize, x)[n as usize]
}

/// All cylinder data for orders `0..=nmax` at `x > 0`.
pub fn cylinder_array(nmax: usize, x: f64) -> Vec<CylinderEval> {
    let j = bessel_j_array(nmax, x);
    let y = bessel_y_array(nmax, x);
    (0..=nmax)
        .map(|n| CylinderEval {
            order: n as u32,
            x,
            j: j[n],
            y: y[n],
            j_underflow: j[n].abs() < f64::MIN_POSITIVE,
            y_overflow: !y[n].is_finite(),
        })
        .collect()
}

/// `(H⁽¹⁾_n(x), H⁽²⁾_n(x))`.
pub fn hankel(n: u32, x: f64) -> (Complex64, Complex64) {
    let c = cylinder_array(n as usize, x)[n as usize];
    (c.h1(), c.h2())
}

/// A Dirichlet eigenvalue of the disk: `J_n(ka) = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiskEigenvalue {
    pub k: f64,
    pub order: u32,
    pub multiplicity: u32,
}

/// Zeros of `J_n` in `(0, xmax]`, bracketed by a sign scan with step `step`
/// and bisected to `tol`.
pub fn bessel_j_zeros(n: u32, xmax: f64, step: f64, tol: f64) -> Vec<f64> {
    let mut zeros = Vec::new();
    // no zero of J_n lies below n (and J_n(0) = 0 is excluded)
    let mut a = (n as f64 * 0.999).max(step * 0.5);
    let mut fa = bessel_j(n, a);
    while a < xmax {
        let b = (a + step).min(xmax);
        let fb = bessel_j(n, b);
        if fb == 0.0 {
            zeros.push(b);
        } else if fa != 0.0 && fa.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let fm = bessel_j(n, mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    zeros
}

/// Dirichlet eigenvalues `k ∈ (0, kmax]` of the disk of radius `a`, sorted
/// ascending, multiplicity 2 for `n ≥ 1`.
pub fn dirichlet_disk_eigenvalues(a: f64, kmax: f64) -> Vec<DiskEigenvalue> {
    assert!(a > 0.0 && kmax > 0.0);
    let xmax = kmax * a;
    let step = 0.1f64.min(1.0 / a) * a;
    let mut out = Vec::new();
    let mut n = 0u32;
    while (n as f64) < xmax {
        for z in bessel_j_zeros(n, xmax, step, 1e-13 * a) {
            out.push(DiskEigenvalue {
                k: z / a,
                order: n,
                multiplicity: if n == 0 { 1 } else { 2 },
            });
        }
        n += 1;
    }
    out.sort_by(|p, q| p.k.total_cmp(&q.k));
    out
}

/// Dirichlet counting function `N_D(k)` of the disk with multiplicity.
pub fn dirichlet_disk_count(a: f64, k: f64) -> u32 {
    dirichlet_disk_eigenvalues(a, k).iter().map(|e| e.multiplicity).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn values_at_zero() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(1, 0.0), 0.0);
    }

    #[test]
    fn wronskian_spot_check() {
        let x = 7.3;
        let w = bessel_j(6, x) * bessel_y(5, x) - bessel_j(5, x) * bessel_y(6, x);
        assert_relative_eq!(w, 2.0 / (PI * x), max_relative = 1e-12);
    }

    #[test]
    fn branches_agree_at_switch() {
        for x in [ASYMPTOTIC_FROM - 1e-9, ASYMPTOTIC_FROM + 1e-9, 24.0, 26.0] {
            let a = bessel_01(x);
            let (f, norm) = miller_sweep(1, x);
            assert!((a[0] - f[0] / norm).abs() < 1e-14);
            assert!((a[1] - f[1] / norm).abs() < 1e-14);
        }
    }

    #[test]
    fn hankel_conjugates() {
        let (h1, h2) = hankel(3, 4.5);
        assert_eq!(h1.re.to_bits(), h2.re.to_bits());
        assert_eq!(h1.im.to_bits(), (-h2.im).to_bits());
        assert_eq!(h1.norm().to_bits(), h2.norm().to_bits());
    }

    #[test]
    fn large_order_flags() {
        let c = cylinder_array(400, 0.5);
        assert!(c[400].j_underflow);
        assert!(c[400].y_overflow);
        assert!(!c[1].j_underflow && !c[1].y_overflow);
    }
}
