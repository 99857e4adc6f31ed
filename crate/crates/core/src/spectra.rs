//! Phase shifts and everything computed from them: sector counts, the
//! measure `μ_k`, traces of `Aᵖ`, scattering phases, inside–outside duality,
//! tail counts and Gaussian coherent states.

use std::f64::consts::{E, PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, trace_power, ComplexMatrix};
use crate::scattering::{disk_modes, grid_modes, ScatteringOperator};
use crate::specfun::{cylinder_array, dirichlet_disk_eigenvalues, DiskEigenvalue};

/// Operators with a larger unitarity defect are refused.
pub const MAX_UNITARITY_DEFECT: f64 = 1e-6;
/// Sector endpoints are widened by this much (half-open `(φ₀, φ₁]`).
pub const SECTOR_SNAP: f64 = 1e-12;
/// Eigenvalues of a computed operator closer than this to `1` sit inside the
/// eigensolver's noise, where the branch cut of `(−2π, 0]` would assign them
/// `0` or `−2π` at random; they get `β = 0`, the side every branch leaves
/// through after crossing `1`.
pub const BRANCH_FLOOR: f64 = 1e-9;

/// Argument of `z` in the branch `(−2π, 0]`.
pub fn branch(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a > 0.0 {
        a - TAU
    } else {
        a
    }
}

/// Eigenvalue arguments `β ∈ (−2π, 0]`, sorted so that `|e^{iβ} − 1|` is
/// non-increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseShiftSet {
    pub k: f64,
    betas: Vec<f64>,
    /// `|e^{iβ_n} − 1|`, evaluated from the eigenvalue itself so that
    /// exponentially small values keep full relative precision.
    gaps: Vec<f64>,
    pub unitarity_defect: f64,
    /// Sum of the radial distances `||λ| − 1|` removed by projection.
    pub projection_defect: f64,
}

impl PhaseShiftSet {
    /// From points on (or projected onto) the unit circle.
    pub fn from_unit_values(k: f64, values: &[Complex64], unitarity_defect: f64) -> Self {
        let mut projection_defect = 0.0;
        let mut pairs: Vec<(f64, f64)> = values
            .iter()
            .map(|&z| {
                let r = z.norm();
                projection_defect += (r - 1.0).abs();
                let u = if r > 0.0 { z / r } else { Complex64::new(1.0, 0.0) };
                let gap = (u - 1.0).norm();
                (if gap < BRANCH_FLOOR { 0.0 } else { branch(u) }, gap)
            })
            .collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
        let (betas, gaps) = pairs.into_iter().unzip();
        Self {
            k,
            betas,
            gaps,
            unitarity_defect,
            projection_defect,
        }
    }

    /// Disk phase shifts straight from the partial waves, all orders
    /// `|n| ≤ nmax`. Gaps are `2|J_n|/|H⁽¹⁾_n|`, which keeps them accurate
    /// far below machine epsilon.
    pub fn disk(a: f64, k: f64, nmax: usize) -> Self {
        let cyl = cylinder_array(nmax, k * a);
        let mut pairs = Vec::with_capacity(2 * nmax + 1);
        for c in &cyl {
            let (beta, gap) = if c.j_underflow || c.y_overflow {
                (0.0, 0.0)
            } else {
                let r = 2.0 * c.j / c.h1();
                (branch(Complex64::new(1.0, 0.0) - r), r.norm())
            };
            pairs.push((beta, gap));
            if c.order > 0 {
                pairs.push((beta, gap));
            }
        }
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
        let (betas, gaps) = pairs.into_iter().unzip();
        Self {
            k,
            betas,
            gaps,
            unitarity_defect: 0.0,
            projection_defect: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `|e^{iβ_n} − 1|` in the same order as [`betas`](Self::betas).
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.betas.iter().map(|&b| Complex64::from_polar(1.0, b))
    }

    /// `#{n : β_n mod 2π ∈ (φ₀, φ₁]}`.
    pub fn sector_count(&self, phi0: f64, phi1: f64) -> Result<usize> {
        if !(0.0 < phi0 && phi0 < phi1 && phi1 < TAU) {
            return Err(Error::InvalidArgument(format!(
                "degenerate sector ({phi0}, {phi1}]: need 0 < φ₀ < φ₁ < 2π"
            )));
        }
        Ok(self
            .betas
            .iter()
            .map(|&b| if b < 0.0 { b + TAU } else { b })
            .filter(|&x| x > phi0 + SECTOR_SNAP && x <= phi1 + SECTOR_SNAP)
            .count())
    }

    /// `⟨μ_k, f⟩ = (2π/k)·Σ f(e^{iβ_n})`.
    pub fn mu_pairing<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Complex64 {
        let one = f(Complex64::new(1.0, 0.0));
        if one.norm() > 1e-12 {
            log::warn!("mu_pairing: f(1) = {one} ≠ 0; the sum only converges because the spectrum is truncated");
        }
        self.eigenvalues().map(f).sum::<Complex64>() * (TAU / self.k)
    }

    /// `s_{2π}(k) = −Σ β_n`.
    pub fn reduced_phase(&self) -> f64 {
        -self.betas.iter().sum::<f64>()
    }

    /// `N_{L,k} = #{n : |e^{iβ_n} − 1| ≥ e^{−Lk}}`.
    pub fn tail_count(&self, l: f64) -> usize {
        let thr = (-l * self.k).exp();
        self.gaps.iter().filter(|&&g| g >= thr).count()
    }
}

/// Phase shifts of an operator: eigenvalues projected radially onto the
/// circle.
pub fn phase_shifts(op: &ScatteringOperator) -> Result<PhaseShiftSet> {
    if !(op.unitarity_defect <= MAX_UNITARITY_DEFECT) {
        return Err(Error::UnitarityDefect {
            defect: op.unitarity_defect,
            limit: MAX_UNITARITY_DEFECT,
        });
    }
    let eig = eigenvalues(&op.matrix)?;
    Ok(PhaseShiftSet::from_unit_values(
        op.k,
        &eig.eigenvalues,
        op.unitarity_defect,
    ))
}

/// Leading-order sector count `(φ₁ − φ₀)·L·k/(2π²)`.
pub fn sector_prediction(phi0: f64, phi1: f64, perimeter: f64, k: f64) -> f64 {
    (phi1 - phi0) * perimeter * k / (2.0 * PI * PI)
}

/// Limit of `⟨μ_k, f⟩`: `(L/π)·∫₀^{2π} f(e^{iθ}) dθ`, by the trapezoid rule.
pub fn mu_target<F: Fn(Complex64) -> Complex64>(perimeter: f64, f: F) -> Complex64 {
    let n = 8192;
    let h = TAU / n as f64;
    let integral: Complex64 = (0..n)
        .map(|i| f(Complex64::from_polar(1.0, h * i as f64)))
        .sum::<Complex64>()
        * h;
    integral * (perimeter / PI)
}

/// Measured and predicted `Tr Aᵖ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceCheck {
    pub p: i32,
    pub measured: Complex64,
    pub predicted: f64,
    /// `|measured − predicted| / |predicted|`.
    pub gap: f64,
}

/// `Tr((S̃ − I)ᵖ)` against `(−1)ᵖ·L·k/π`. Negative `p` stands for
/// `(S̃⁻¹ − I)^{|p|} = (A†)^{|p|}` on a unitary operator, whose trace is the
/// conjugate.
pub fn trace_formula_check(op: &ScatteringOperator, p: i32, perimeter: f64) -> Result<TraceCheck> {
    if p == 0 {
        return Err(Error::InvalidArgument("trace formula needs p ≠ 0".into()));
    }
    let t = trace_power(&op.a_matrix(), p.unsigned_abs())?;
    let measured = if p < 0 { t.conj() } else { t };
    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
    let predicted = sign * perimeter * op.k / PI;
    Ok(TraceCheck {
        p,
        measured,
        predicted,
        gap: (measured - predicted).norm() / predicted.abs(),
    })
}

/// Anything with a wavenumber and a determinant `det S(k)`.
pub trait DeterminantSource: Sync {
    fn wavenumber(&self) -> f64;
    fn determinant(&self) -> Result<Complex64>;
}

impl DeterminantSource for ScatteringOperator {
    fn wavenumber(&self) -> f64 {
        self.k
    }

    fn determinant(&self) -> Result<Complex64> {
        crate::linalg::determinant(&self.matrix)
    }
}

/// The disk's `S(k)` in its eigenbasis: all orders up to the partial-wave
/// cutoff, `S_n = S_{−n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialWaves {
    pub a: f64,
    pub k: f64,
    pub modes: Vec<Complex64>,
}

impl PartialWaves {
    pub fn new(a: f64, k: f64) -> Self {
        Self::with_orders(a, k, partial_wave_cutoff(a, k))
    }

    pub fn with_orders(a: f64, k: f64, nmax: usize) -> Self {
        Self {
            a,
            k,
            modes: disk_modes(a, k, nmax),
        }
    }

    /// `Σ_n arg S_n` over `|n| ≤ nmax` with principal arguments.
    pub fn phase_sum(&self) -> f64 {
        self.modes
            .iter()
            .enumerate()
            .map(|(n, s)| if n == 0 { s.arg() } else { 2.0 * s.arg() })
            .sum()
    }
}

impl DeterminantSource for PartialWaves {
    fn wavenumber(&self) -> f64 {
        self.k
    }

    fn determinant(&self) -> Result<Complex64> {
        Ok(Complex64::from_polar(1.0, self.phase_sum()))
    }
}

/// Orders past which `S_n = 1` to double precision.
pub fn partial_wave_cutoff(a: f64, k: f64) -> usize {
    (E * k * a / 2.0).ceil() as usize + 40
}

/// Sample of the scattering phase `s(k) = i log det S(k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSample {
    pub k: f64,
    pub s: f64,
}

/// `s(k)` along a ladder ordered by increasing `k`, with the branch fixed by
/// continuity from the first rung (principal value there). Determinants are
/// evaluated in parallel; the unwrapping pass is sequential.
pub fn scattering_phase<S: DeterminantSource>(ladder: &[S]) -> Result<Vec<PhaseSample>> {
    let dets = ladder
        .par_iter()
        .map(|op| op.determinant().map(|d| (op.wavenumber(), d)))
        .collect::<Result<Vec<_>>>()?;
    unwrap_phase(&dets)
}

/// Continuous `−arg det` along `(k, det)` pairs; a jump beyond `0.9π`
/// between rungs is ambiguous and rejected.
pub fn unwrap_phase(dets: &[(f64, Complex64)]) -> Result<Vec<PhaseSample>> {
    let mut out = Vec::with_capacity(dets.len());
    let mut prev: Option<(f64, f64)> = None;
    for &(k, d) in dets {
        let raw = -d.arg();
        let s = match prev {
            None => raw,
            Some((k0, s0)) => {
                let step = crate::scalar::angle_diff(raw, s0);
                if step.abs() > 0.9 * PI {
                    return Err(Error::BranchAmbiguity { k0, k1: k });
                }
                s0 + step
            }
        };
        prev = Some((k, s));
        out.push(PhaseSample { k, s });
    }
    Ok(out)
}

/// Ladder from `k_min` to `k_max` with `Δk ≤ π/(2(A·k + L))`, geometric
/// (`Δk ≤ k`) near zero.
pub fn phase_ladder(k_min: f64, k_max: f64, area: f64, perimeter: f64) -> Vec<f64> {
    let mut ks = vec![k_min];
    let mut k = k_min;
    while k < k_max {
        let dk = (PI / (2.0 * (area * k + perimeter))).min(k);
        k = (k + dk).min(k_max);
        ks.push(k);
    }
    ks
}

/// Disk scattering phase on a ladder ending exactly at each requested `k`.
pub fn disk_scattering_phase(a: f64, targets: &[f64]) -> Result<Vec<PhaseSample>> {
    let mut targets = targets.to_vec();
    targets.sort_by(f64::total_cmp);
    let kmax = *targets
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty k list".into()))?;
    let mut ks = phase_ladder(1e-3 / a, kmax, PI * a * a, TAU * a);
    ks.extend_from_slice(&targets);
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    let waves: Vec<PartialWaves> = ks.par_iter().map(|&k| PartialWaves::new(a, k)).collect();
    let samples = scattering_phase(&waves)?;
    Ok(targets
        .iter()
        .map(|&t| *samples.iter().find(|s| s.k == t).unwrap())
        .collect())
}

/// A crossing of `1` by one partial-wave eigenvalue branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub order: u32,
    /// Interpolated crossing wavenumber.
    pub k: f64,
    pub multiplicity: u32,
    /// `true` when the branch passes `1` clockwise (upper to lower half).
    pub clockwise: bool,
}

/// Outcome of the inside–outside duality check on the disk.
#[derive(Clone, Debug, PartialEq)]
pub struct DualityReport {
    pub radius: f64,
    pub k_max: f64,
    pub step: f64,
    pub crossings: Vec<Crossing>,
    pub eigenvalues: Vec<DiskEigenvalue>,
    /// Eigenvalues without a crossing within one ladder step, and crossings
    /// without an eigenvalue.
    pub unmatched_eigenvalues: Vec<DiskEigenvalue>,
    pub unmatched_crossings: Vec<Crossing>,
    pub counterclockwise_crossings: usize,
    /// `max |s − 2πN_D − s_{2π}| / k` over the ladder (`k ≥ 1`).
    pub identity_gap: f64,
}

impl DualityReport {
    pub fn matched(&self) -> bool {
        self.unmatched_eigenvalues.is_empty()
            && self.unmatched_crossings.is_empty()
            && self.counterclockwise_crossings == 0
    }
}

/// Track every partial-wave eigenvalue on a ladder of step `step` over
/// `(0, k_max]`, record the crossings of `1`, match them against the zeros
/// of `J_n(ka)` and check `s = 2πN_D + s_{2π}` rung by rung.
pub fn duality_check(a: f64, k_max: f64, step: f64) -> Result<DualityReport> {
    if !(a > 0.0 && k_max > 0.0 && step > 0.0) {
        return Err(Error::InvalidArgument("duality_check needs positive a, K, step".into()));
    }
    let nmax = partial_wave_cutoff(a, k_max);
    let rungs = (k_max / step).ceil() as usize;
    let ks: Vec<f64> = (1..=rungs).map(|i| (i as f64 * step).min(k_max)).collect();
    let waves: Vec<PartialWaves> = ks.par_iter().map(|&k| PartialWaves::with_orders(a, k, nmax)).collect();
    let eigenvalues = dirichlet_disk_eigenvalues(a, k_max);

    let mut crossings = Vec::new();
    let mut counterclockwise = 0;
    for w in waves.windows(2) {
        for n in 0..=nmax {
            let (z0, z1) = (w[0].modes[n], w[1].modes[n]);
            if z0.re <= 0.0 || z1.re <= 0.0 {
                continue;
            }
            let down = z0.im > 0.0 && z1.im <= 0.0;
            let up = z0.im <= 0.0 && z1.im > 0.0;
            if down || up {
                let f = z0.im / (z0.im - z1.im);
                crossings.push(Crossing {
                    order: n as u32,
                    k: w[0].k + f * (w[1].k - w[0].k),
                    multiplicity: if n == 0 { 1 } else { 2 },
                    clockwise: down,
                });
                if up {
                    counterclockwise += 1;
                }
            }
        }
    }
    crossings.sort_by(|p, q| p.k.total_cmp(&q.k));

    let mut used = vec![false; crossings.len()];
    let mut unmatched_eigenvalues = Vec::new();
    for e in &eigenvalues {
        let hit = crossings
            .iter()
            .enumerate()
            .find(|(i, c)| !used[*i] && c.order == e.order && c.clockwise && (c.k - e.k).abs() <= step);
        match hit {
            Some((i, _)) => used[i] = true,
            None => unmatched_eigenvalues.push(*e),
        }
    }
    let unmatched_crossings = crossings
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(c, _)| *c)
        .collect();

    // s from the unwrapped determinant, N_D from the zero oracle
    let dets: Vec<(f64, Complex64)> = waves
        .iter()
        .map(|w| (w.k, Complex64::from_polar(1.0, w.phase_sum())))
        .collect();
    let phase = unwrap_phase(&dets)?;
    let mut identity_gap: f64 = 0.0;
    let mut next_eig = 0;
    let mut nd = 0u32;
    for (w, ps) in waves.iter().zip(&phase) {
        while next_eig < eigenvalues.len() && eigenvalues[next_eig].k <= w.k {
            nd += eigenvalues[next_eig].multiplicity;
            next_eig += 1;
        }
        let reduced: f64 = w
            .modes
            .iter()
            .enumerate()
            .map(|(n, &s)| if n == 0 { -branch(s) } else { -2.0 * branch(s) })
            .sum();
        let gap = (ps.s - TAU * nd as f64 - reduced).abs() / w.k.max(1.0);
        identity_gap = identity_gap.max(gap);
    }

    Ok(DualityReport {
        radius: a,
        k_max,
        step,
        crossings,
        eigenvalues,
        unmatched_eigenvalues,
        unmatched_crossings,
        counterclockwise_crossings: counterclockwise,
        identity_gap,
    })
}

/// `N_{L,k}` for every `(L, k)` pair on the disk.
#[derive(Clone, Debug, PartialEq)]
pub struct TailTable {
    pub rows: Vec<TailRow>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailRow {
    pub l: f64,
    pub k: f64,
    pub count: usize,
    /// `N_{L,k}/(L·k)`.
    pub ratio: f64,
}

impl TailTable {
    /// `max ratio / min ratio`.
    pub fn spread(&self) -> f64 {
        let lo = self.rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let hi = self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        hi / lo
    }
}

/// Tail counts of the disk from exact partial waves; the order cutoff is
/// raised until `|S_n − 1|` is far below every threshold.
pub fn tail_bound_check(a: f64, ls: &[f64], ks: &[f64]) -> TailTable {
    let mut rows = Vec::new();
    for &k in ks {
        let lmax = ls.iter().cloned().fold(0.0, f64::max);
        let mut nmax = partial_wave_cutoff(a, k);
        let mut set = PhaseShiftSet::disk(a, k, nmax);
        // extend until the smallest gap clears the deepest threshold
        while set.gaps().last().map_or(false, |&g| g >= (-lmax * k).exp() * 1e-3) {
            nmax *= 2;
            set = PhaseShiftSet::disk(a, k, nmax);
        }
        for &l in ls {
            let count = set.tail_count(l);
            rows.push(TailRow {
                l,
                k,
                count,
                ratio: count as f64 / (l * k),
            });
        }
    }
    TailTable { rows }
}

/// Smooth cutoff: 1 on `[0, 1]`, 0 on `[2, ∞)`.
pub fn cutoff(s: f64) -> f64 {
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let a = psi(2.0 - s);
        a / (a + psi(s - 1.0))
    }
}

/// Leading constant of the resolution of identity on `S¹`:
/// `c_k = 2^{1/2}(k/2π)^{3/2}`, the inverse of
/// `(2π/k)·∫ e^{−kθ²} dθ`.
pub fn coherent_constant(k: f64) -> f64 {
    2f64.sqrt() * (k / TAU).powf(1.5)
}

/// Gaussian state `φ_{ω₀,η₀}` localised at direction `ω₀` and impact
/// parameter `η₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherentState {
    pub omega0: f64,
    pub eta0: f64,
    pub k: f64,
}

impl CoherentState {
    /// `χ(k^{1/3}|ω−ω₀|)·e^{−ikη₀·ω}·e^{−k|ω−ω₀|²/2}` with the chordal
    /// distance and `η₀·ω = η₀ sin(θ − ω₀)` for the fixed point `η₀·ω₀⊥`.
    pub fn eval(&self, theta: f64) -> Complex64 {
        let d = theta - self.omega0;
        let chord = 2.0 * (0.5 * d).sin().abs();
        let env = cutoff(self.k.cbrt() * chord) * (-0.5 * self.k * chord * chord).exp();
        if env == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(env, -self.k * self.eta0 * d.sin())
    }

    pub fn sample(&self, angles: &[f64]) -> Vec<Complex64> {
        angles.iter().map(|&t| self.eval(t)).collect()
    }
}

fn check_coherent_grid(m: usize, k: f64) -> Result<()> {
    if k < 10.0 {
        return Err(Error::Resolution(format!("coherent states need k ≥ 10, got {k}")));
    }
    let h = TAU / m as f64;
    if h > 0.5 / k.sqrt() {
        return Err(Error::Resolution(format!(
            "grid spacing {h:.4} does not resolve Gaussian width {:.4} at k = {k}",
            1.0 / k.sqrt()
        )));
    }
    Ok(())
}

/// Impact-parameter nodes `|η₀| ≤ eta_max` with spacing at most `0.3/√k`.
fn eta_nodes(k: f64, eta_max: f64) -> (Vec<f64>, f64) {
    let n = ((2.0 * eta_max) / (0.3 / k.sqrt())).ceil() as usize + 1;
    let h = 2.0 * eta_max / (n - 1) as f64;
    ((0..n).map(|i| -eta_max + h * i as f64).collect(), h)
}

/// `c_k ∬ φ_{ω₀,η₀}⟨φ_{ω₀,η₀}, f⟩ dω₀dη₀` on the grid of `f`, over
/// `|η₀| ≤ eta_max`; returns the relative `L²` reconstruction error.
pub fn resolution_check(f: &[Complex64], k: f64, eta_max: f64) -> Result<f64> {
    let m = f.len();
    check_coherent_grid(m, k)?;
    let angles: Vec<f64> = (0..m).map(|j| TAU * j as f64 / m as f64).collect();
    let w = TAU / m as f64;
    let (etas, he) = eta_nodes(k, eta_max);
    let ck = coherent_constant(k);
    let g = (0..m)
        .into_par_iter()
        .map(|i0| {
            let mut acc = vec![Complex64::new(0.0, 0.0); m];
            for &e in &etas {
                let phi = CoherentState {
                    omega0: angles[i0],
                    eta0: e,
                    k,
                }
                .sample(&angles);
                let c: Complex64 = phi.iter().zip(f).map(|(p, v)| p.conj() * v).sum::<Complex64>() * w;
                for (a, p) in acc.iter_mut().zip(&phi) {
                    *a += c * p;
                }
            }
            acc
        })
        .reduce(
            || vec![Complex64::new(0.0, 0.0); m],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let scale = ck * w * he;
    let err: f64 = g.iter().zip(f).map(|(a, b)| (a * scale - b).norm_sqr()).sum();
    let norm: f64 = f.iter().map(|b| b.norm_sqr()).sum();
    Ok((err / norm).sqrt())
}

/// `c_k ∬ ⟨φ, Aφ⟩ dω₀dη₀` with `A = S̃ − I`, `ω₀` on the operator grid and
/// `|η₀| ≤ width_max + 5k^{−1/2}`.
pub fn coherent_trace(op: &ScatteringOperator, width_max: f64) -> Result<Complex64> {
    let m = op.grid_size();
    let k = op.k;
    check_coherent_grid(m, k)?;
    coherent_trace_of(&op.a_matrix(), k, width_max + 5.0 / k.sqrt())
}

fn coherent_trace_of(a: &ComplexMatrix<f64>, k: f64, eta_max: f64) -> Result<Complex64> {
    let m = a.rows();
    let angles: Vec<f64> = (0..m).map(|j| TAU * j as f64 / m as f64).collect();
    let w = TAU / m as f64;
    let (etas, he) = eta_nodes(k, eta_max);
    let total: Complex64 = (0..m)
        .into_par_iter()
        .map(|i0| {
            let mut s = Complex64::new(0.0, 0.0);
            for &e in &etas {
                let phi = CoherentState {
                    omega0: angles[i0],
                    eta0: e,
                    k,
                }
                .sample(&angles);
                let aphi = a.mul_vec(&phi);
                s += phi.iter().zip(&aphi).map(|(p, q)| p.conj() * q).sum::<Complex64>();
            }
            s
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(total * (coherent_constant(k) * w * w * he))
}

/// Grid-mode list used by the disk operator, for callers pairing modes with
/// eigenvalues.
pub fn disk_grid_orders(m: usize) -> Vec<i64> {
    grid_modes(m).collect()
}

/// Per-`k` results gathered by the experiment runner.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpectralSummary {
    pub k: f64,
    pub sector_counts: Vec<((f64, f64), usize)>,
    pub mu_values: Vec<(String, Complex64)>,
    pub traces: Vec<(i32, Complex64)>,
    pub scattering_phase: Option<f64>,
    pub reduced_phase: Option<f64>,
    pub dirichlet_count: Option<u32>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_arithmetic() {
        assert!((branch(Complex64::from_polar(1.0, -0.1)) + 0.1).abs() < 1e-15);
        assert!((branch(Complex64::from_polar(1.0, 0.1)) - (0.1 - TAU)).abs() < 1e-15);
        assert_eq!(branch(Complex64::new(1.0, 0.0)), 0.0);
        assert!((branch(Complex64::new(-1.0, 0.0)) + PI).abs() < 1e-15);
    }

    #[test]
    fn identity_spectrum() {
        let ps = PhaseShiftSet::from_unit_values(5.0, &vec![Complex64::new(1.0, 0.0); 8], 0.0);
        assert!(ps.betas().iter().all(|&b| b == 0.0));
        assert_eq!(ps.reduced_phase(), 0.0);
        assert_eq!(ps.sector_count(0.1, 6.0).unwrap(), 0);
        assert!(ps.sector_count(1.0, 1.0).is_err());
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(1.0), 1.0);
        assert_eq!(cutoff(2.0), 0.0);
        assert!((cutoff(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = cutoff(1.0 + i as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }
}
