//! Dense complex matrices: LU, determinants, Hessenberg–QR eigenvalues and
//! traces of powers.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} entries for a {rows}×{cols} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at ({}, {})",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![Complex::one(); n])
    }

    pub fn from_diagonal(d: &[Complex<T>]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Build from an entry function, rows evaluated in parallel.
    pub fn from_fn<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> Complex<T> + Sync,
    {
        let mut data = vec![Complex::zero(); rows * cols];
        if cols > 0 {
            data.par_chunks_mut(cols).enumerate().for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = f(i, j);
                }
            });
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<Complex<T>> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// `self − I`.
    pub fn minus_identity(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] = m[(i, i)] - Complex::one();
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (n, m) = (self.rows, other.cols);
        let mut out = vec![Complex::zero(); n * m];
        if m > 0 {
            out.par_chunks_mut(m).enumerate().for_each(|(i, orow)| {
                for (l, &a) in self.row(i).iter().enumerate() {
                    if a.is_zero() {
                        continue;
                    }
                    for (o, &b) in orow.iter_mut().zip(other.row(l)) {
                        *o = *o + a * b;
                    }
                }
            });
        }
        Self {
            rows: n,
            cols: m,
            data: out,
        }
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(Complex::zero(), |s, (a, b)| s + a * b))
            .collect()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn trace(&self) -> Complex<T> {
        self.diagonal().into_iter().fold(Complex::zero(), |s, z| s + z)
    }

    /// `‖A†A − I‖_F`.
    pub fn unitarity_defect(&self) -> T {
        self.adjoint().matmul(self).minus_identity().frobenius_norm()
    }

    pub fn lu(&self) -> Result<Lu<T>> {
        if !self.is_square() {
            return Err(Error::InvalidArgument(format!(
                "LU of a non-square {}×{} matrix",
                self.rows, self.cols
            )));
        }
        Ok(Lu::factor(self.clone()))
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// Partial-pivot LU factorisation `PA = LU`, stored in place.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: ComplexMatrix<T>,
    perm: Vec<usize>,
    odd: bool,
    scale: T,
}

impl<T: Real> Lu<T> {
    fn factor(mut a: ComplexMatrix<T>) -> Self {
        let n = a.rows;
        let scale = a.max_abs();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut odd = false;
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| a[(x, c)].norm().total_cmp_real(a[(y, c)].norm()))
                .unwrap();
            if p != c {
                for j in 0..n {
                    a.data.swap(p * n + j, c * n + j);
                }
                perm.swap(p, c);
                odd = !odd;
            }
            let piv = a[(c, c)];
            if piv.is_zero() {
                continue;
            }
            let (head, tail) = a.data.split_at_mut((c + 1) * n);
            let prow = &head[c * n..(c + 1) * n];
            tail.par_chunks_mut(n).for_each(|row| {
                let f = row[c] / piv;
                row[c] = f;
                if f.is_zero() {
                    return;
                }
                for j in c + 1..n {
                    row[j] = row[j] - f * prow[j];
                }
            });
        }
        Self {
            lu: a,
            perm,
            odd,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    /// Product of pivots with the permutation sign; zero for a singular matrix.
    pub fn determinant(&self) -> Complex<T> {
        let mut d = Complex::one();
        for i in 0..self.dim() {
            d = d * self.lu[(i, i)];
        }
        if self.odd {
            -d
        } else {
            d
        }
    }

    /// First pivot that is zero to working precision relative to `max|A|`.
    pub fn singular_pivot(&self) -> Option<(usize, T)> {
        let n = self.dim();
        let tol = T::epsilon() * T::from_usize_lossy(n.max(1)) * self.scale;
        (0..n).map(|i| (i, self.lu[(i, i)].norm())).find(|&(_, p)| !(p > tol))
    }

    /// Solve `AX = B` column by column.
    pub fn solve(&self, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        let n = self.dim();
        if b.rows != n {
            return Err(Error::InvalidArgument(format!(
                "right-hand side has {} rows, expected {n}",
                b.rows
            )));
        }
        if let Some((column, pivot)) = self.singular_pivot() {
            return Err(Error::Singular {
                column,
                pivot: pivot.to_f64_lossy(),
            });
        }
        // work on the transposed right-hand sides so each solve is contiguous
        let m = b.cols;
        let mut cols: Vec<Vec<Complex<T>>> = (0..m).map(|j| self.perm.iter().map(|&p| b[(p, j)]).collect()).collect();
        cols.par_iter_mut().for_each(|x| self.substitute(x));
        Ok(ComplexMatrix::from_fn(n, m, |i, j| cols[j][i]))
    }

    fn substitute(&self, x: &mut [Complex<T>]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in 0..i {
                s = s - row[j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in i + 1..n {
                s = s - row[j] * x[j];
            }
            x[i] = s / row[i];
        }
    }
}

trait TotalCmpReal {
    fn total_cmp_real(self, other: Self) -> std::cmp::Ordering;
}

impl<T: Real> TotalCmpReal for T {
    fn total_cmp_real(self, other: Self) -> std::cmp::Ordering {
        self.partial_cmp(&other).unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Solve `AX = B` by partial-pivot LU.
pub fn lu_solve<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    a.lu()?.solve(b)
}

/// `det A` as the signed pivot product.
pub fn determinant<T: Real>(a: &ComplexMatrix<T>) -> Result<Complex<T>> {
    Ok(a.lu()?.determinant())
}

/// Eigenvalues with a backward-error estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult<T> {
    pub eigenvalues: Vec<Complex<T>>,
    /// Neglected subdiagonal mass plus rounding, relative to `‖A‖_F`.
    pub backward_error: T,
    /// Set when the backward error exceeds `100·n·ε`.
    pub flagged: bool,
}

/// All eigenvalues via Householder reduction to Hessenberg form followed by
/// single-shift complex QR with Wilkinson shifts and deflation.
pub fn eigenvalues<T: Real>(a: &ComplexMatrix<T>) -> Result<EigenResult<T>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("eigenvalues of a non-square matrix".into()));
    }
    let n = a.rows;
    let anorm = a.frobenius_norm();
    if n == 0 {
        return Ok(EigenResult {
            eigenvalues: vec![],
            backward_error: T::zero(),
            flagged: false,
        });
    }
    let mut h = a.clone();
    hessenberg(&mut h);
    let mut dropped = T::zero();
    let eps = T::epsilon();
    let max_sweeps = 30 * n;
    let mut sweeps = 0usize;
    let mut hi = n - 1;
    let mut since_deflation = 0usize;
    while hi > 0 {
        // find the active unreduced block [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let small = if diag > T::zero() { eps * diag } else { eps * anorm };
            if sub <= small {
                dropped = dropped + sub * sub;
                h[(lo, lo - 1)] = Complex::zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        if sweeps >= max_sweeps {
            return Err(Error::EigenNoConvergence {
                sweeps,
                deflated: n - 1 - hi,
                dim: n,
            });
        }
        sweeps += 1;
        since_deflation += 1;
        let mu = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex::new(h[(hi, hi - 1)].norm() * T::lit(0.75), T::zero())
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_sweep(&mut h, lo, hi, mu);
    }
    let n_t = T::from_usize_lossy(n);
    let backward_error = if anorm > T::zero() {
        (dropped.sqrt() + eps * n_t * anorm) / anorm
    } else {
        T::zero()
    };
    Ok(EigenResult {
        eigenvalues: h.diagonal(),
        backward_error,
        flagged: backward_error > T::lit(100.0) * n_t * eps,
    })
}

/// Eigenvalue of the trailing 2×2 block closest to its last diagonal entry.
fn wilkinson_shift<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Complex<T> {
    let half = T::half();
    let m = (a + d) * half;
    let disc = ((a - d) * half * ((a - d) * half) + b * c).sqrt();
    let l1 = m + disc;
    let l2 = m - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Givens rotation `[c s; −s̄ c]` with real `c` zeroing `y` in `(x, y)`.
fn givens<T: Real>(x: Complex<T>, y: Complex<T>) -> (T, Complex<T>) {
    let ny = y.norm();
    if ny.is_zero() {
        return (T::one(), Complex::zero());
    }
    let nx = x.norm();
    if nx.is_zero() {
        return (T::zero(), (y / Complex::new(ny, T::zero())).conj());
    }
    let r = nx.hypot(ny);
    let c = nx / r;
    let phase = x / Complex::new(nx, T::zero());
    let s = phase * y.conj() / Complex::new(r, T::zero());
    (c, s)
}

/// One implicit single-shift QR bulge chase on rows/columns `lo..=hi`.
fn qr_sweep<T: Real>(h: &mut ComplexMatrix<T>, lo: usize, hi: usize, mu: Complex<T>) {
    let mut x = h[(lo, lo)] - mu;
    let mut y = h[(lo + 1, lo)];
    for k in lo..hi {
        let (c, s) = givens(x, y);
        let cc = Complex::new(c, T::zero());
        // rows k, k+1 from the left
        let j0 = if k > lo { k - 1 } else { lo };
        for j in j0..=hi {
            let a = h[(k, j)];
            let b = h[(k + 1, j)];
            h[(k, j)] = cc * a + s * b;
            h[(k + 1, j)] = cc * b - s.conj() * a;
        }
        // columns k, k+1 from the right
        let i1 = (k + 2).min(hi);
        for i in lo..=i1 {
            let a = h[(i, k)];
            let b = h[(i, k + 1)];
            h[(i, k)] = a * cc + b * s.conj();
            h[(i, k + 1)] = b * cc - a * s;
        }
        if k > lo {
            h[(k + 1, k - 1)] = Complex::zero();
        }
        if k + 1 < hi {
            x = h[(k + 1, k)];
            y = h[(k + 2, k)];
        }
    }
}

/// Householder reduction to upper Hessenberg form (eigenvalues only, so the
/// transformations are not accumulated).
fn hessenberg<T: Real>(h: &mut ComplexMatrix<T>) {
    let n = h.rows;
    if n < 3 {
        return;
    }
    let mut v = vec![Complex::zero(); n];
    for c in 0..n - 2 {
        let norm = (c + 1..n).map(|i| h[(i, c)].norm_sqr()).sum::<T>().sqrt();
        if norm.is_zero() {
            continue;
        }
        let x0 = h[(c + 1, c)];
        let phase = if x0.norm().is_zero() {
            Complex::one()
        } else {
            x0 / Complex::new(x0.norm(), T::zero())
        };
        let alpha = -phase * Complex::new(norm, T::zero());
        for i in c + 1..n {
            v[i] = h[(i, c)];
        }
        v[c + 1] = v[c + 1] - alpha;
        let vnorm2 = (c + 1..n).map(|i| v[i].norm_sqr()).sum::<T>();
        if vnorm2.is_zero() {
            continue;
        }
        let beta = T::two() / vnorm2;
        // H ← (I − βvv†) H
        for j in c..n {
            let mut s = Complex::zero();
            for i in c + 1..n {
                s = s + v[i].conj() * h[(i, j)];
            }
            let s = s * beta;
            for i in c + 1..n {
                h[(i, j)] = h[(i, j)] - v[i] * s;
            }
        }
        // H ← H (I − βvv†)
        let vv = &v;
        h.data.par_chunks_mut(n).for_each(|row| {
            let mut s = Complex::zero();
            for i in c + 1..n {
                s = s + row[i] * vv[i];
            }
            let s = s * beta;
            for i in c + 1..n {
                row[i] = row[i] - s * vv[i].conj();
            }
        });
        for i in c + 2..n {
            h[(i, c)] = Complex::zero();
        }
    }
}

/// `Tr(Aᵖ)` by repeated multiplication, `p ≥ 1`.
pub fn trace_power<T: Real>(a: &ComplexMatrix<T>, p: u32) -> Result<Complex<T>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("trace of a non-square matrix".into()));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("trace_power needs p ≥ 1".into()));
    }
    if p == 1 {
        return Ok(a.trace());
    }
    let mut pw = a.clone();
    for _ in 2..p {
        pw = pw.matmul(a);
    }
    // Tr(Aᵖ⁻¹·A) without forming the last product
    let n = a.rows;
    let mut t = Complex::zero();
    for i in 0..n {
        for j in 0..n {
            t = t + pw[(i, j)] * a[(j, i)];
        }
    }
    Ok(t)
}

/// The `(2p+1)n`-dimensional block matrix whose determinant is
/// `(−1)^{pn} det(2A)`.
pub fn ladder_matrix<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>, p: usize) -> Result<ComplexMatrix<T>> {
    if !a.is_square() || !b.is_square() || a.rows != b.rows {
        return Err(Error::InvalidArgument("A and B must be square of equal size".into()));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    let n = a.rows;
    let dim = (2 * p + 1) * n;
    let mut m = ComplexMatrix::zeros(dim, dim);
    let one = Complex::<T>::one();
    let right = p * n;
    // top p block rows: [0 | 1 −1 ladder]
    for blk in 0..p {
        for i in 0..n {
            let r = blk * n + i;
            m[(r, right + blk * n + i)] = one;
            m[(r, right + (blk + 1) * n + i)] = -one;
        }
    }
    // bottom p+1 block rows: [1/−1 ladder | A+B … A−B]
    let bottom = p * n;
    for blk in 0..=p {
        for i in 0..n {
            let r = bottom + blk * n + i;
            if blk < p {
                m[(r, blk * n + i)] = one;
            }
            if blk > 0 {
                m[(r, (blk - 1) * n + i)] = -one;
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            m[(bottom + i, right + j)] = a[(i, j)] + b[(i, j)];
            m[(bottom + p * n + i, right + p * n + j)] = a[(i, j)] - b[(i, j)];
        }
    }
    Ok(m)
}

/// Outcome of checking the block-determinant identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderResidual<T> {
    pub det_m: Complex<T>,
    pub expected: Complex<T>,
    /// Relative residual, or absolute when `det(2A) = 0`.
    pub residual: T,
    pub absolute: bool,
}

pub fn ladder_determinant_check<T: Real>(
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
    p: usize,
) -> Result<LadderResidual<T>> {
    let m = ladder_matrix(a, b, p)?;
    let det_m = determinant(&m)?;
    let two = Complex::new(T::two(), T::zero());
    let det2a = determinant(&a.scale(two))?;
    let expected = if (p * a.rows) % 2 == 1 { -det2a } else { det2a };
    let diff = (det_m - expected).norm();
    let absolute = det2a.norm().is_zero();
    let residual = if absolute { diff } else { diff / det2a.norm() };
    Ok(LadderResidual {
        det_m,
        expected,
        residual,
        absolute,
    })
}
