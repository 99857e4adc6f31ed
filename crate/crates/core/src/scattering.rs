//! Scattering matrices `S(k)` on an equispaced angular grid.
//!
//! Convention: incident plane wave `e^{ik d·x}`, outgoing amplitude
//! `a(θ, d)` normalised so that `S = I + A` with `(Af)(θ) = ∫ a(θ, d) f(d) dd`
//! is unitary and the disk has eigenvalues `S_n = −H⁽²⁾_n(ka)/H⁽¹⁾_n(ka)`.
//! Every discrete operator is `S̃ = I + (2π/M)·[a(θ_j, θ_l)]`.

use std::f64::consts::{E, PI, TAU};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{ConvexObstacle, Shape, Vec2};
use crate::linalg::{lu_solve, ComplexMatrix};
use crate::specfun::{bessel_01, cylinder_array};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// How an operator was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    DiskOracle,
    Nystrom,
    Kirchhoff,
}

impl Provenance {
    pub fn tag(self) -> u8 {
        match self {
            Provenance::DiskOracle => 0,
            Provenance::Nystrom => 1,
            Provenance::Kirchhoff => 2,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Provenance::DiskOracle),
            1 => Some(Provenance::Nystrom),
            2 => Some(Provenance::Kirchhoff),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Provenance::DiskOracle => "disk-oracle",
            Provenance::Nystrom => "nystrom",
            Provenance::Kirchhoff => "kirchhoff",
        }
    }
}

/// Weight-symmetrised discretisation of `S(k)` on `M` equispaced angles.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringOperator {
    pub k: f64,
    pub matrix: ComplexMatrix<f64>,
    pub provenance: Provenance,
    /// Boundary nodes of the solver (0 for the disk oracle).
    pub nodes: usize,
    /// `‖S̃†S̃ − I‖_F`.
    pub unitarity_defect: f64,
    /// Disk oracle only: `S_n` for the grid modes `n = −M/2+1, …, M/2`.
    pub modes: Option<Vec<Complex64>>,
    pub obstacle_hash: [u8; 32],
}

impl ScatteringOperator {
    pub fn grid_size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn angles(&self) -> Vec<f64> {
        grid_angles(self.grid_size())
    }

    /// Trapezoid weight `2π/M`.
    pub fn weight(&self) -> f64 {
        TAU / self.grid_size() as f64
    }

    /// `A = S̃ − I`.
    pub fn a_matrix(&self) -> ComplexMatrix<f64> {
        self.matrix.minus_identity()
    }

    /// Amplitude samples `a(θ_j, θ_l)` recovered from `S̃`.
    pub fn amplitude(&self, j: usize, l: usize) -> Complex64 {
        let d = if j == l {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        (self.matrix[(j, l)] - d) / self.weight()
    }

    /// An operator given directly by its matrix (tests, experiments).
    pub fn from_matrix(k: f64, matrix: ComplexMatrix<f64>, provenance: Provenance) -> Self {
        let unitarity_defect = matrix.unitarity_defect();
        Self {
            k,
            matrix,
            provenance,
            nodes: 0,
            unitarity_defect,
            modes: None,
            obstacle_hash: [0; 32],
        }
    }
}

/// `θ_j = 2πj/M`.
pub fn grid_angles(m: usize) -> Vec<f64> {
    (0..m).map(|j| TAU * j as f64 / m as f64).collect()
}

/// Smallest even grid resolving the partial-wave bandwidth of a body of
/// circumradius `radius`: `2(⌈e·k·R/2⌉ + 40)`.
pub fn default_grid_size(k: f64, radius: f64) -> usize {
    2 * ((E * k * radius / 2.0).ceil() as usize + 40)
}

/// Ten points per wavelength on a boundary of length `perimeter`, even.
pub fn min_nodes(k: f64, perimeter: f64) -> usize {
    let n = (10.0 * k * perimeter / TAU).ceil() as usize;
    (n + n % 2).max(16)
}

/// Node count used when none is requested: twelve points per wavelength.
/// The log-split quadrature is already at roundoff at ten.
pub fn default_nodes(k: f64, perimeter: f64) -> usize {
    let n = (12.0 * k * perimeter / TAU).ceil() as usize;
    (n + n % 2).max(min_nodes(k, perimeter))
}

/// SHA-256 of a canonical obstacle description.
pub fn obstacle_hash(obstacle: &ConvexObstacle<f64>) -> [u8; 32] {
    let mut h = Sha256::new();
    match obstacle.shape() {
        Shape::Circle { radius } => {
            h.update(b"circle");
            h.update(radius.to_le_bytes());
        }
        Shape::Ellipse { a, b } => {
            h.update(b"ellipse");
            h.update(a.to_le_bytes());
            h.update(b.to_le_bytes());
        }
        Shape::Support { c0, harmonics } => {
            h.update(b"support");
            h.update(c0.to_le_bytes());
            for hm in harmonics {
                h.update(hm.order.to_le_bytes());
                h.update(hm.amplitude.to_le_bytes());
                h.update(hm.phase.to_le_bytes());
            }
        }
    }
    h.finalize().into()
}

/// Partial-wave eigenvalues `S_n = 1 − 2J_n(ka)/H⁽¹⁾_n(ka)` for `n = 0..=nmax`
/// (`S_{−n} = S_n`). Orders whose `Y_n` overflows are set to their limit 1.
pub fn disk_modes(a: f64, k: f64, nmax: usize) -> Vec<Complex64> {
    let x = k * a;
    let cyl = cylinder_array(nmax, x);
    let mut flushed = 0;
    let out = cyl
        .iter()
        .map(|c| {
            if c.y_overflow || c.j_underflow {
                flushed += 1;
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0) - 2.0 * c.j / c.h1()
            }
        })
        .collect();
    if flushed > 0 {
        log::debug!("disk_modes: {flushed} orders at ka = {x} flushed to S_n = 1");
    }
    out
}

/// Mode numbers carried by an `M`-point grid: `−M/2+1, …, M/2`.
pub fn grid_modes(m: usize) -> std::ops::RangeInclusive<i64> {
    let h = (m / 2) as i64;
    (1 - h)..=h
}

/// Exact disk operator: the circulant matrix with eigenvalues `S_n` on the
/// grid modes.
pub fn disk_smatrix(a: f64, k: f64, m: usize) -> Result<ScatteringOperator> {
    if !(a > 0.0 && k > 0.0) {
        return Err(Error::InvalidArgument(format!("disk_smatrix: a = {a}, k = {k}")));
    }
    let need = default_grid_size(k, a);
    if m < need || m % 2 == 1 {
        return Err(Error::Resolution(format!(
            "grid size {m} below the even partial-wave bound {need} at k = {k}"
        )));
    }
    let nmax = (m / 2) as usize;
    let s = disk_modes(a, k, nmax);
    let modes: Vec<Complex64> = grid_modes(m).map(|n| s[n.unsigned_abs() as usize]).collect();
    // c[q] = (1/M) Σ_n S_n e^{2πi n q / M}
    let c: Vec<Complex64> = (0..m)
        .map(|q| {
            modes
                .iter()
                .zip(grid_modes(m))
                .map(|(&sn, n)| {
                    sn * Complex64::from_polar(1.0, TAU * ((n * q as i64).rem_euclid(m as i64)) as f64 / m as f64)
                })
                .sum::<Complex64>()
                / m as f64
        })
        .collect();
    let matrix = ComplexMatrix::from_fn(m, m, |j, l| c[(j + m - l) % m]);
    let ob = ConvexObstacle::circle(a)?;
    Ok(ScatteringOperator {
        k,
        unitarity_defect: matrix.unitarity_defect(),
        matrix,
        provenance: Provenance::DiskOracle,
        nodes: 0,
        modes: Some(modes),
        obstacle_hash: obstacle_hash(&ob),
    })
}

/// Boundary samples at the Nyström nodes `t_i = πi/n`, `i < 2n`.
struct Nodes {
    x: Vec<Vec2<f64>>,
    d1: Vec<Vec2<f64>>,
    d2: Vec<Vec2<f64>>,
    t: Vec<f64>,
}

impl Nodes {
    fn new(obstacle: &ConvexObstacle<f64>, count: usize) -> Self {
        let t: Vec<f64> = (0..count).map(|i| TAU * i as f64 / count as f64).collect();
        Self {
            x: t.iter().map(|&s| obstacle.point(s)).collect(),
            d1: t.iter().map(|&s| obstacle.tangent(s)).collect(),
            d2: t.iter().map(|&s| obstacle.second_derivative(s)).collect(),
            t,
        }
    }
}

/// Weights of the product quadrature for `ln(4 sin²((t−τ)/2))`, indexed by
/// node offset.
fn log_weights(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (0..2 * n)
        .map(|d| {
            let s = PI * d as f64 / nf;
            let mut acc = 0.0;
            for m in 1..n {
                acc += (m as f64 * s).cos() / m as f64;
            }
            let alt = if d % 2 == 0 { 1.0 } else { -1.0 };
            -TAU / nf * acc - PI / (nf * nf) * alt
        })
        .collect()
}

/// System matrix of the combined-field equation
/// `φ − ∫(L + iηM)φ = −2u^i` with coupling `η = k`.
fn nystrom_system(nodes: &Nodes, k: f64) -> ComplexMatrix<f64> {
    let count = nodes.t.len();
    let n = count / 2;
    let w = PI / n as f64;
    let r = log_weights(n);
    let eta = k;
    ComplexMatrix::from_fn(count, count, |i, j| {
        let (l1, l2, m1, m2);
        let dp = nodes.d1[j];
        let speed = dp.norm();
        if i == j {
            let dd = nodes.d2[i];
            l1 = 0.0;
            l2 = Complex64::new((dp.x * dd.y - dp.y * dd.x) / (TAU * speed * speed), 0.0);
            m1 = -speed / TAU;
            m2 = Complex64::new(-EULER_GAMMA / PI - (k * speed / 2.0).ln() / PI, 0.5) * speed;
        } else {
            let diff = nodes.x[j] - nodes.x[i];
            let dist = diff.norm();
            let [j0, j1, y0, y1] = bessel_01(k * dist);
            // n(τ)·(x(τ) − x(t)) with n = (x₂', −x₁')
            let bracket = dp.y * diff.x - dp.x * diff.y;
            let l = I * (k / 2.0) * bracket * Complex64::new(j1, y1) / dist;
            l1 = -(k / TAU) * bracket * j1 / dist;
            let m = I * 0.5 * Complex64::new(j0, y0) * speed;
            m1 = -j0 * speed / TAU;
            let half = 0.5 * (nodes.t[i] - nodes.t[j]);
            let lg = (4.0 * half.sin().powi(2)).ln();
            l2 = l - l1 * lg;
            m2 = m - m1 * lg;
        }
        let k1 = Complex64::new(l1, eta * m1);
        let k2 = l2 + I * eta * m2;
        let delta = if i == j { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) - r[(i + count - j) % count] * k1 - w * k2
    })
}

/// Solve for all grid directions and assemble `S̃`.
fn nystrom_operator(obstacle: &ConvexObstacle<f64>, k: f64, count: usize, m: usize) -> Result<ComplexMatrix<f64>> {
    let nodes = Nodes::new(obstacle, count);
    let sys = nystrom_system(&nodes, k);
    let angles = grid_angles(m);
    let dirs: Vec<Vec2<f64>> = angles.iter().map(|&a| Vec2::from_angle(a)).collect();
    let rhs = ComplexMatrix::from_fn(count, m, |i, l| {
        -2.0 * Complex64::from_polar(1.0, k * dirs[l].dot(nodes.x[i]))
    });
    let phi = lu_solve(&sys, &rhs)?;
    let n = count / 2;
    let w = PI / n as f64 / (4.0 * PI);
    let far = ComplexMatrix::from_fn(m, count, |j, i| {
        let dp = nodes.d1[i];
        // ν|x'| = (x₂', −x₁')
        let nu_theta = dp.y * dirs[j].x - dp.x * dirs[j].y;
        Complex64::from_polar(w * k * (nu_theta + dp.norm()), -k * dirs[j].dot(nodes.x[i]))
    });
    let amp = far.matmul(&phi);
    let wt = TAU / m as f64;
    let mut s = amp.scale(Complex64::new(wt, 0.0));
    for j in 0..m {
        s[(j, j)] += Complex64::new(1.0, 0.0);
    }
    Ok(s)
}

/// Nyström discretisation of the combined-field boundary integral equation
/// on `nodes` boundary points; `grid` far-field directions.
pub fn nystrom_smatrix(
    obstacle: &ConvexObstacle<f64>,
    k: f64,
    nodes: usize,
    grid: usize,
) -> Result<ScatteringOperator> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("wavenumber must be positive, got {k}")));
    }
    let floor = min_nodes(k, obstacle.perimeter());
    if nodes < floor || nodes % 2 == 1 {
        return Err(Error::Resolution(format!(
            "{nodes} boundary nodes at k = {k}: need an even count ≥ {floor}"
        )));
    }
    let need = default_grid_size(k, obstacle.max_radius());
    if grid < need || grid % 2 == 1 {
        return Err(Error::Resolution(format!(
            "grid size {grid} below the even partial-wave bound {need} at k = {k}"
        )));
    }
    let matrix = nystrom_operator(obstacle, k, nodes, grid)?;
    Ok(ScatteringOperator {
        k,
        unitarity_defect: matrix.unitarity_defect(),
        matrix,
        provenance: Provenance::Nystrom,
        nodes,
        modes: None,
        obstacle_hash: obstacle_hash(obstacle),
    })
}

/// [`nystrom_smatrix`] plus a solve on 5/4 as many nodes; fails when the
/// two operators differ by more than `tol` in any entry.
pub fn nystrom_smatrix_checked(
    obstacle: &ConvexObstacle<f64>,
    k: f64,
    nodes: usize,
    grid: usize,
    tol: f64,
) -> Result<ScatteringOperator> {
    let op = nystrom_smatrix(obstacle, k, nodes, grid)?;
    let mut fine_n = (nodes * 5).div_ceil(4);
    fine_n += fine_n % 2;
    let fine = nystrom_operator(obstacle, k, fine_n, grid)?;
    let gap = op.matrix.sub(&fine).max_abs();
    if gap > tol {
        return Err(Error::Refinement(format!(
            "S̃ changes by {gap:.3e} between {nodes} and {fine_n} nodes at k = {k}; raise the node count"
        )));
    }
    Ok(op)
}

/// Kirchhoff weight `−ν·θ + |ν·ω|`.
pub fn kirchhoff_weight(nu: Vec2<f64>, omega: Vec2<f64>, theta: Vec2<f64>) -> f64 {
    -nu.dot(theta) + nu.dot(omega).abs()
}

/// Kirchhoff (physical optics) amplitude with the boundary-layer correction
/// set to zero, sampled by the trapezoid rule on the boundary.
#[derive(Clone, Debug)]
pub struct FarFieldKernel {
    pub k: f64,
    points: Vec<Vec2<f64>>,
    normals: Vec<Vec2<f64>>,
    /// `|γ'(t_i)|·2π/N`.
    ds: Vec<f64>,
    pub convention: &'static str,
}

/// Normalisation record carried by every Kirchhoff kernel.
pub const KIRCHHOFF_CONVENTION: &str = "a_K(theta_out, d) = -(1/2)(k/2pi) * sum e^{ik(d - theta_out).y} \
    w(nu; -d, -theta_out) ds with w(nu; omega, theta) = -nu.theta + |nu.omega|; \
    S = I + A, (Af)(theta) = int a(theta, d) f(d) dd, fixed by the disk partial-wave oracle";

impl FarFieldKernel {
    /// `a_K(θ_out, d)` for outgoing angle `theta_out` and incident angle `d`.
    pub fn amplitude(&self, theta_out: f64, d: f64) -> Complex64 {
        let th = Vec2::from_angle(theta_out);
        let dv = Vec2::from_angle(d);
        let q = dv - th;
        let mut acc = Complex64::new(0.0, 0.0);
        for ((&y, &nu), &ds) in self.points.iter().zip(&self.normals).zip(&self.ds) {
            let w = kirchhoff_weight(nu, -dv, -th);
            if w != 0.0 {
                acc += Complex64::from_polar(w * ds, self.k * q.dot(y));
            }
        }
        -0.5 * (self.k / TAU) * acc
    }

    /// Kirchhoff operator `I + (2π/M)[a_K(θ_j, θ_l)]`; its unitarity defect is
    /// reported, not enforced.
    pub fn operator(&self, grid: usize, hash: [u8; 32]) -> ScatteringOperator {
        let angles = grid_angles(grid);
        let wt = TAU / grid as f64;
        let matrix = ComplexMatrix::from_fn(grid, grid, |j, l| {
            let d = if j == l { 1.0 } else { 0.0 };
            Complex64::new(d, 0.0) + wt * self.amplitude(angles[j], angles[l])
        });
        ScatteringOperator {
            k: self.k,
            unitarity_defect: matrix.unitarity_defect(),
            matrix,
            provenance: Provenance::Kirchhoff,
            nodes: self.points.len(),
            modes: None,
            obstacle_hash: hash,
        }
    }

    pub fn nodes(&self) -> usize {
        self.points.len()
    }
}

/// Kirchhoff kernel at twenty points per wavelength (at least 256 nodes).
pub fn kirchhoff_amplitude(obstacle: &ConvexObstacle<f64>, k: f64) -> FarFieldKernel {
    let n = ((20.0 * k * obstacle.perimeter() / TAU).ceil() as usize).max(256);
    kirchhoff_amplitude_with(obstacle, k, n)
}

pub fn kirchhoff_amplitude_with(obstacle: &ConvexObstacle<f64>, k: f64, n: usize) -> FarFieldKernel {
    let h = TAU / n as f64;
    let ts = (0..n).map(|i| h * i as f64);
    FarFieldKernel {
        k,
        points: ts.clone().map(|t| obstacle.point(t)).collect(),
        normals: ts.clone().map(|t| obstacle.normal(t)).collect(),
        ds: ts.map(|t| obstacle.tangent(t).norm() * h).collect(),
        convention: KIRCHHOFF_CONVENTION,
    }
}

/// `sup |a_K − a| / max |a|` over the incident direction `θ_l` and the
/// outgoing grid angles at least `min_angle` away from forward scattering,
/// where the specular point approaches glancing.
pub fn kirchhoff_gap(reference: &ScatteringOperator, kernel: &FarFieldKernel, l: usize, min_angle: f64) -> f64 {
    let angles = reference.angles();
    let m = angles.len();
    let scale = (0..m).map(|j| reference.amplitude(j, l).norm()).fold(0.0, f64::max);
    (0..m)
        .filter(|&j| crate::scalar::angle_diff(angles[j], angles[l]).abs() > min_angle)
        .map(|j| (kernel.amplitude(angles[j], angles[l]) - reference.amplitude(j, l)).norm())
        .fold(0.0, f64::max)
        / scale
}

/// Binary container: magic, version, header, little-endian `f64` entries and
/// a trailing SHA-256 of everything before it.
pub mod container {
    use super::*;

    pub const MAGIC: &[u8; 8] = b"PSHIFTOP";
    pub const VERSION: u32 = 1;

    pub fn encode(op: &ScatteringOperator) -> Vec<u8> {
        let m = op.grid_size();
        let mut out = Vec::with_capacity(96 + 16 * m * (m + 1));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&op.k.to_le_bytes());
        out.extend_from_slice(&(m as u64).to_le_bytes());
        out.push(op.provenance.tag());
        out.extend_from_slice(&op.obstacle_hash);
        out.extend_from_slice(&(op.nodes as u64).to_le_bytes());
        out.extend_from_slice(&op.unitarity_defect.to_le_bytes());
        out.push(op.modes.is_some() as u8);
        for z in op.matrix.as_slice() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        if let Some(modes) = &op.modes {
            for z in modes {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        let digest: [u8; 32] = Sha256::digest(&out).into();
        out.extend_from_slice(&digest);
        out
    }

    struct Reader<'a> {
        buf: &'a [u8],
        pos: usize,
    }

    impl<'a> Reader<'a> {
        fn take(&mut self, n: usize) -> Result<&'a [u8]> {
            let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
            let end = end.ok_or_else(|| Error::Corrupt("truncated operator container".into()))?;
            let s = &self.buf[self.pos..end];
            self.pos = end;
            Ok(s)
        }
        fn u8(&mut self) -> Result<u8> {
            Ok(self.take(1)?[0])
        }
        fn u32(&mut self) -> Result<u32> {
            Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
        }
        fn u64(&mut self) -> Result<u64> {
            Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
        }
        fn f64(&mut self) -> Result<f64> {
            Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
        }
        fn complex(&mut self) -> Result<Complex64> {
            Ok(Complex64::new(self.f64()?, self.f64()?))
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<ScatteringOperator> {
        if bytes.len() < 32 + MAGIC.len() {
            return Err(Error::Corrupt("operator container too short".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        let actual: [u8; 32] = Sha256::digest(body).into();
        if actual.as_slice() != digest {
            return Err(Error::Corrupt("operator container checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Corrupt("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Corrupt(format!("unsupported container version {version}")));
        }
        let k = r.f64()?;
        let m = r.u64()? as usize;
        let provenance = Provenance::from_tag(r.u8()?).ok_or_else(|| Error::Corrupt("unknown provenance".into()))?;
        let obstacle_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
        let nodes = r.u64()? as usize;
        let unitarity_defect = r.f64()?;
        let has_modes = r.u8()? != 0;
        let expected = m
            .checked_mul(m)
            .and_then(|e| e.checked_add(if has_modes { m } else { 0 }))
            .and_then(|e| e.checked_mul(16))
            .ok_or_else(|| Error::Corrupt("grid size overflow".into()))?;
        if body.len() - r.pos != expected {
            return Err(Error::Corrupt("payload length does not match the header".into()));
        }
        let data = (0..m * m).map(|_| r.complex()).collect::<Result<Vec<_>>>()?;
        let modes = if has_modes {
            Some((0..m).map(|_| r.complex()).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        let matrix = ComplexMatrix::new(m, m, data).map_err(|e| Error::Corrupt(e.to_string()))?;
        Ok(ScatteringOperator {
            k,
            matrix,
            provenance,
            nodes,
            unitarity_defect,
            modes,
            obstacle_hash,
        })
    }
}
