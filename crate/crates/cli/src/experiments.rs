//! One function per experiment kind. Each returns CSV rows, acceptance
//! checks, plots and a free-form JSON payload; nothing here touches the
//! output directory.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::time::Instant;

use phaseshift_core::dynamics::{
    conjugacy_check, near_periodic_volume, scatter_map, scatter_map_inverse, tau_branch, ScatterBranch, Sign,
};
use phaseshift_core::geometry::project;
use phaseshift_core::linalg::{eigenvalues, ladder_determinant_check};
use phaseshift_core::montecarlo::{stream, uniform_ray};
use phaseshift_core::scalar::angle_diff;
use phaseshift_core::scattering::{
    default_grid_size, default_nodes, disk_smatrix, kirchhoff_amplitude, kirchhoff_gap, kirchhoff_weight, min_nodes,
    nystrom_smatrix, nystrom_smatrix_checked, obstacle_hash,
};
use phaseshift_core::spectra::{
    coherent_trace, disk_scattering_phase, duality_check, phase_ladder, phase_shifts, resolution_check,
    scattering_phase, sector_prediction, tail_bound_check, trace_formula_check,
};
use phaseshift_core::{
    ChordHit, Complex64, ComplexMatrix, ConvexObstacle, PhaseRay, Provenance, ScatteringOperator, Vec2,
};
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::cache::{Cache, CacheKey};
use crate::config::{Experiment, ExperimentConfig, ObstacleSpec};
use crate::plots::{Figure, Series, Style};
use crate::report::{Check, Row};
use crate::CliError;

pub const ORACLE_TOLERANCE: f64 = 1e-6;
pub const ORACLE_RUNTIME_LIMIT: f64 = 30.0;
pub const UNITARITY_TOLERANCE: f64 = 1e-8;
/// Trace gaps are held to a tolerance at this wavenumber.
pub const TRACE_REFERENCE_K: f64 = 40.0;
pub const TRACE_TOLERANCE: f64 = 0.2;
pub const SECTOR_TOLERANCE_CIRCLE: f64 = 0.10;
pub const SECTOR_TOLERANCE: f64 = 0.15;
pub const PHASE_RESIDUAL_TOLERANCE: f64 = 0.3;
pub const REDUCED_PHASE_TOLERANCE: f64 = 0.15;
pub const DUALITY_STEP: f64 = 1e-4;
pub const DUALITY_IDENTITY_TOLERANCE: f64 = 1e-4;
pub const KIRCHHOFF_MIN_ANGLE: f64 = 0.3;
pub const DYNAMICS_TOLERANCE: f64 = 1e-9;
pub const VOLUME_SIGMAS: f64 = 3.0;
pub const HALVING_TOLERANCE: f64 = 0.25;
pub const DETERMINANT_TOLERANCE: f64 = 1e-8;
pub const COHERENT_REFERENCE_K: f64 = 40.0;
pub const COHERENT_TOLERANCE: f64 = 0.10;
pub const TAIL_SPREAD_LIMIT: f64 = 3.0;

/// What a single experiment produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
    /// `(file stem, svg)`.
    pub plots: Vec<(String, String)>,
    pub details: serde_json::Value,
    pub timings: Vec<(String, f64)>,
}

pub fn run(cfg: &ExperimentConfig, cache: &Cache) -> Result<Outcome, CliError> {
    let ctx = Ctx { cfg, cache };
    match cfg.experiment {
        Experiment::Oracle => oracle(&ctx),
        Experiment::Trace => trace(&ctx),
        Experiment::Sectors => sectors(&ctx),
        Experiment::Phase => phase(&ctx),
        Experiment::Duality => duality(&ctx),
        Experiment::Kirchhoff => kirchhoff(&ctx),
        Experiment::Dynamics => dynamics(&ctx),
        Experiment::Determinant => determinant(&ctx),
        Experiment::Coherent => coherent(&ctx),
        Experiment::Tail => tail(&ctx),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Solver {
    /// Partial waves for circles, Nyström otherwise.
    Auto,
    Nystrom,
    /// Nyström plus the refinement check.
    NystromChecked,
}

struct Obstacle<'a> {
    index: usize,
    spec: &'a ObstacleSpec,
    body: ConvexObstacle,
    label: String,
}

impl Obstacle<'_> {
    fn key(&self) -> String {
        format!("obstacle[{}]", self.index)
    }

    fn radius(&self) -> Option<f64> {
        self.spec.radius()
    }

    fn circle(&self, experiment: &str) -> Result<f64, CliError> {
        self.radius().ok_or_else(|| CliError::Config {
            key: self.key(),
            message: format!("the {experiment} experiment needs a circle"),
        })
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    cache: &'a Cache,
}

impl Ctx<'_> {
    fn name(&self) -> &'static str {
        self.cfg.experiment.name()
    }

    fn obstacles(&self) -> Result<Vec<Obstacle<'_>>, CliError> {
        self.cfg
            .obstacles
            .iter()
            .enumerate()
            .map(|(index, spec)| {
                let body = spec.build().map_err(|e| CliError::Config {
                    key: format!("obstacle[{index}]"),
                    message: e.to_string(),
                })?;
                Ok(Obstacle {
                    index,
                    spec,
                    body,
                    label: spec.label(),
                })
            })
            .collect()
    }

    fn ks(&self, ob: &Obstacle) -> &[f64] {
        self.cfg.ks_for(ob.index)
    }

    /// Requested grid, raised to the bandwidth bound when it falls short.
    fn grid(&self, k: f64, radius: f64) -> usize {
        let need = default_grid_size(k, radius);
        match self.cfg.resolution.grid {
            Some(g) if g >= need => g + g % 2,
            Some(g) => {
                log::warn!("resolution.grid = {g} is below the bandwidth bound {need} at k = {k}; using {need}");
                need
            }
            None => need,
        }
    }

    fn nodes(&self, k: f64, perimeter: f64) -> usize {
        match self.cfg.resolution.nodes_per_wavelength {
            Some(ppw) => {
                let n = (ppw * k * perimeter / TAU).ceil() as usize;
                (n + n % 2).max(min_nodes(k, perimeter))
            }
            None => default_nodes(k, perimeter),
        }
    }

    fn operator(&self, ob: &Obstacle, k: f64, solver: Solver) -> Result<ScatteringOperator, CliError> {
        let wrap = |e| CliError::Run {
            key: format!("{}.k = {k}", ob.key()),
            source: e,
        };
        let m = self.grid(k, ob.body.max_radius());
        let hash = obstacle_hash(&ob.body);
        match (solver, ob.radius()) {
            (Solver::Auto, Some(a)) => {
                let key = CacheKey::new(hash, k, 0, m, Provenance::DiskOracle);
                self.cache
                    .get_or_compute(&key, || disk_smatrix(a, k, m))
                    .map_err(|e| rewrap(e, wrap))
            }
            _ => {
                let n = self.nodes(k, ob.body.perimeter());
                let key = CacheKey::new(hash, k, n, m, Provenance::Nystrom);
                let checked = solver == Solver::NystromChecked;
                self.cache
                    .get_or_compute(&key, || {
                        log::info!("Nyström solve: {} at k = {k}, {n} nodes, {m} directions", ob.label);
                        if checked {
                            nystrom_smatrix_checked(&ob.body, k, n, m, UNITARITY_TOLERANCE)
                        } else {
                            nystrom_smatrix(&ob.body, k, n, m)
                        }
                    })
                    .map_err(|e| rewrap(e, wrap))
            }
        }
    }

    fn row(&self, ob: &Obstacle, k: Option<f64>, quantity: impl Into<String>, measured: f64) -> Row {
        Row::new(self.name(), &ob.label, k, quantity, measured)
    }
}

/// Core errors from a computation get the config key attached; cache
/// errors pass through.
fn rewrap(e: CliError, wrap: impl FnOnce(phaseshift_core::Error) -> CliError) -> CliError {
    match e {
        CliError::Core(c) if !matches!(c, phaseshift_core::Error::Corrupt(_)) => wrap(c),
        other => other,
    }
}

fn run_err(key: String) -> impl FnOnce(phaseshift_core::Error) -> CliError {
    move |source| CliError::Run { key, source }
}

/// Greedy one-to-one matching distance between two eigenvalue lists of
/// equal length; adequate when they agree far better than their spacing.
pub fn matching_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let best = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1));
        if let Some((i, d)) = best {
            used[i] = true;
            worst = worst.max(d);
        }
    }
    worst
}

fn oracle(ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    for ob in ctx.obstacles()? {
        let per_k = ctx
            .ks(&ob)
            .par_iter()
            .map(|&k| {
                let t0 = Instant::now();
                let ny = ctx.operator(&ob, k, Solver::NystromChecked)?;
                let eig = eigenvalues(&ny.matrix).map_err(run_err(format!("{}.k = {k}", ob.key())))?;
                let seconds = t0.elapsed().as_secs_f64();
                let matching = match ob.radius() {
                    Some(a) => {
                        let exact = disk_smatrix(a, k, ny.grid_size()).map_err(run_err(ob.key()))?;
                        Some(matching_distance(
                            &eig.eigenvalues,
                            exact.modes.as_deref().unwrap_or(&[]),
                        ))
                    }
                    None => None,
                };
                Ok((k, ny.unitarity_defect, matching, seconds, ny.nodes, ny.grid_size()))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        for (k, defect, matching, seconds, nodes, grid) in per_k {
            out.rows.push(
                ctx.row(&ob, Some(k), "unitarity_defect", defect)
                    .predicted(0.0)
                    .gap(defect)
                    .tolerance(UNITARITY_TOLERANCE),
            );
            out.checks.push(Check::at_most(
                format!("unitarity {} k={k}", ob.label),
                defect,
                UNITARITY_TOLERANCE,
            ));
            if let Some(d) = matching {
                out.rows.push(
                    ctx.row(&ob, Some(k), "oracle_matching_distance", d)
                        .predicted(0.0)
                        .gap(d)
                        .tolerance(ORACLE_TOLERANCE),
                );
                out.checks.push(
                    Check::at_most(format!("partial-wave matching {} k={k}", ob.label), d, ORACLE_TOLERANCE)
                        .note(format!("{nodes} nodes, {grid} directions")),
                );
                out.checks.push(Check::at_most(
                    format!("runtime {} k={k} (s)", ob.label),
                    seconds,
                    ORACLE_RUNTIME_LIMIT,
                ));
            }
            out.timings.push((format!("{} k={k}", ob.label), seconds));
        }
    }
    Ok(out)
}

fn trace(ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let mut fig = Figure::new("Trace formula gap", "k", "|Tr A^p - (-1)^p Lk/pi| / (Lk/pi)").log_log();
    for ob in ctx.obstacles()? {
        let perimeter = ob.body.perimeter();
        let per_k = ctx
            .ks(&ob)
            .par_iter()
            .map(|&k| {
                let op = ctx.operator(&ob, k, Solver::Auto)?;
                ctx.cfg
                    .p
                    .iter()
                    .map(|&p| trace_formula_check(&op, p, perimeter).map_err(run_err(format!("p = {p}"))))
                    .collect::<Result<Vec<_>, CliError>>()
                    .map(|v| (k, v))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        for (pi, &p) in ctx.cfg.p.iter().enumerate() {
            let mut gaps = Vec::new();
            for (k, checks) in &per_k {
                let tc = &checks[pi];
                let tol = (*k == TRACE_REFERENCE_K).then_some(TRACE_TOLERANCE);
                out.rows.push(
                    ctx.row(&ob, Some(*k), format!("trace_gap_p{p}"), tc.measured.re)
                        .predicted(tc.predicted)
                        .gap(tc.gap)
                        .maybe_tolerance(tol),
                );
                if let Some(t) = tol {
                    out.checks
                        .push(Check::at_most(format!("trace p={p} {} k={k}", ob.label), tc.gap, t));
                }
                gaps.push((*k, tc.gap));
            }
            if gaps.len() >= 2 {
                let (first, last) = (gaps[0].1, gaps[gaps.len() - 1].1);
                out.checks.push(
                    Check::flag(
                        format!(
                            "trace p={p} {}: gap at k={} below gap at k={}",
                            ob.label,
                            gaps[gaps.len() - 1].0,
                            gaps[0].0
                        ),
                        last < first,
                        format!("{first:.4e} -> {last:.4e}"),
                    )
                    .note(
                        gaps.iter()
                            .map(|(_, g)| format!("{g:.4e}"))
                            .collect::<Vec<_>>()
                            .join(" "),
                    ),
                );
            }
            fig = fig.with(Series::new(format!("{} p={p}", ob.label), gaps, Style::Line));
        }
    }
    out.plots.push(("trace_gap".into(), fig.render()));
    Ok(out)
}

fn sectors(ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let [phi0, phi1] = ctx.cfg.sector.unwrap_or([FRAC_PI_2, 3.0 * FRAC_PI_2]);
    let mut details = Vec::new();
    for ob in ctx.obstacles()? {
        let perimeter = ob.body.perimeter();
        let tol = if ob.radius().is_some() {
            SECTOR_TOLERANCE_CIRCLE
        } else {
            SECTOR_TOLERANCE
        };
        let per_k = ctx
            .ks(&ob)
            .par_iter()
            .map(|&k| {
                let op = ctx.operator(&ob, k, Solver::Auto)?;
                let ps = phase_shifts(&op).map_err(run_err(format!("{}.k = {k}", ob.key())))?;
                let n = ps.sector_count(phi0, phi1).map_err(run_err("sector".into()))?;
                Ok((k, n, ps))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        for (k, n, ps) in &per_k {
            let pred = sector_prediction(phi0, phi1, perimeter, *k);
            let gap = (*n as f64 / pred - 1.0).abs();
            out.rows.push(
                ctx.row(&ob, Some(*k), "sector_count", *n as f64)
                    .predicted(pred)
                    .gap(gap)
                    .tolerance(tol),
            );
            out.rows.push(
                ctx.row(&ob, Some(*k), "projection_defect", ps.projection_defect)
                    .predicted(0.0)
                    .gap(ps.projection_defect),
            );
            out.checks.push(
                Check::at_most(format!("sector count {} k={k}", ob.label), gap, tol)
                    .note(format!("N = {n}, predicted {pred:.3}")),
            );
            details.push(json!({ "obstacle": ob.label, "k": k, "count": n, "predicted": pred }));
        }
        if let Some((k, _, ps)) = per_k.last() {
            let pts: Vec<(f64, f64)> = ps.eigenvalues().map(|z| (z.re, z.im)).collect();
            let circle: Vec<(f64, f64)> = (0..=256)
                .map(|i| {
                    let t = TAU * i as f64 / 256.0;
                    (t.cos(), t.sin())
                })
                .collect();
            let scatter = Figure::new(format!("Phase shifts e^(i beta), {} k={k}", ob.label), "Re", "Im")
                .square(1.2)
                .with(Series::new("unit circle", circle, Style::Dashed))
                .with(Series::new("eigenvalues", pts, Style::Markers));
            out.plots.push((format!("phase_circle_{}", ob.index), scatter.render()));

            let lo = PI / 8.0;
            let phis: Vec<f64> = (1..=240).map(|i| lo + (TAU - 2.0 * lo) * i as f64 / 240.0).collect();
            let stairs: Vec<(f64, f64)> = phis
                .iter()
                .map(|&p| (p, ps.sector_count(lo, p).map(|n| n as f64).unwrap_or(f64::NAN)))
                .collect();
            let line: Vec<(f64, f64)> = phis
                .iter()
                .map(|&p| (p, sector_prediction(lo, p, perimeter, *k)))
                .collect();
            let staircase = Figure::new(format!("Sector counts from pi/8, {} k={k}", ob.label), "phi", "N")
                .with(Series::new("count", stairs, Style::Steps))
                .with(Series::new("L k (phi - pi/8) / (2 pi^2)", line, Style::Dashed));
            out.plots.push((format!("staircase_{}", ob.index), staircase.render()));
        }
    }
    out.details = json!({ "sector": [phi0, phi1], "counts": details });
    Ok(out)
}

fn phase(ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    for ob in ctx.obstacles()? {
        let ks = ctx.ks(&ob);
        let area = ob.body.area();
        let perimeter = ob.body.perimeter();
        let kmax = ks[ks.len() - 1];
        let weyl = |k: f64| area * k * k / 2.0 + perimeter * k / 2.0;
        let plot_ks: Vec<f64> = (1..=40).map(|i| kmax * i as f64 / 40.0).collect();

        let (samples, reduced) = match ob.radius() {
            Some(a) => {
                let mut targets: Vec<f64> = ks.iter().chain(&plot_ks).copied().collect();
                targets.sort_by(f64::total_cmp);
                targets.dedup();
                let s = disk_scattering_phase(a, &targets).map_err(run_err(ob.key()))?;
                let reduced = ks
                    .par_iter()
                    .map(|&k| {
                        let op = ctx.operator(&ob, k, Solver::Auto)?;
                        phase_shifts(&op)
                            .map(|ps| ps.reduced_phase())
                            .map_err(run_err(format!("{}.k = {k}", ob.key())))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                (s, reduced)
            }
            None => {
                log::warn!("{}: Nyström phase ladder up to k = {kmax}; this is slow", ob.label);
                let mut ladder = phase_ladder(1e-3, kmax, area, perimeter);
                ladder.extend_from_slice(ks);
                ladder.sort_by(f64::total_cmp);
                ladder.dedup();
                let ops = ladder
                    .par_iter()
                    .map(|&k| {
                        let m = ctx.grid(k, ob.body.max_radius());
                        nystrom_smatrix(&ob.body, k, ctx.nodes(k, perimeter), m)
                            .map_err(run_err(format!("{}.k = {k}", ob.key())))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                let s = scattering_phase(&ops).map_err(run_err(ob.key()))?;
                let reduced = ks
                    .iter()
                    .map(|&k| {
                        let op = ops.iter().find(|o| o.k == k).expect("target on ladder");
                        phase_shifts(op)
                            .map(|ps| ps.reduced_phase())
                            .map_err(run_err(format!("{}.k = {k}", ob.key())))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                (s, reduced)
            }
        };

        let mut residuals = Vec::new();
        for (&k, &red) in ks.iter().zip(&reduced) {
            let s = samples.iter().find(|p| p.k == k).map(|p| p.s).unwrap_or(f64::NAN);
            let r = (s - weyl(k)).abs() / k;
            residuals.push(r);
            out.rows.push(
                ctx.row(&ob, Some(k), "scattering_phase", s)
                    .predicted(weyl(k))
                    .gap(r)
                    .tolerance(PHASE_RESIDUAL_TOLERANCE),
            );
            let target = perimeter * k;
            let g = (red / target - 1.0).abs();
            out.rows.push(
                ctx.row(&ob, Some(k), "reduced_phase", red)
                    .predicted(target)
                    .gap(g)
                    .tolerance(REDUCED_PHASE_TOLERANCE),
            );
            if k == kmax {
                out.checks.push(Check::at_most(
                    format!("phase residual/k {} k={k}", ob.label),
                    r,
                    PHASE_RESIDUAL_TOLERANCE,
                ));
                out.checks.push(Check::at_most(
                    format!("reduced phase |s_2pi/(Lk) - 1| {} k={k}", ob.label),
                    g,
                    REDUCED_PHASE_TOLERANCE,
                ));
            }
        }
        out.checks.push(Check::decreasing(
            format!("phase residual/k decreasing {}", ob.label),
            &residuals,
        ));

        let curve: Vec<(f64, f64)> = samples
            .iter()
            .filter(|p| plot_ks.contains(&p.k))
            .map(|p| (p.k, p.s))
            .collect();
        let pred: Vec<(f64, f64)> = plot_ks.iter().map(|&k| (k, weyl(k))).collect();
        let fig = Figure::new(format!("Scattering phase, {}", ob.label), "k", "s(k)")
            .with(Series::new("s(k)", curve, Style::Markers))
            .with(Series::new("A k^2/2 + L k/2", pred, Style::Line));
        out.plots.push((format!("scattering_phase_{}", ob.index), fig.render()));
    }
    Ok(out)
}

fn duality(ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let k_max = ctx.cfg.k_max.unwrap_or(6.0);
    let step = ctx.cfg.step.unwrap_or(DUALITY_STEP);
    let mut details = Vec::new();
    for ob in ctx.obstacles()? {
        let a = ob.circle("duality")?;
        let rep = duality_check(a, k_max, step).map_err(run_err(ob.key()))?;
        let mut matched = Vec::new();
        for e in &rep.eigenvalues {
            let hit = rep
                .crossings
                .iter()
                .filter(|c| c.order == e.order && c.clockwise)
                .min_by(|p, q| (p.k - e.k).abs().total_cmp(&(q.k - e.k).abs()));
            let row = ctx.row(
                &ob,
                Some(e.k),
                format!("crossing_n{}_x{}", e.order, e.multiplicity),
                hit.map_or(f64::NAN, |c| c.k),
            );
            out.rows.push(match hit {
                Some(c) => row.predicted(e.k).gap((c.k - e.k).abs()).tolerance(step),
                None => row.predicted(e.k).fail(),
            });
            matched.push(json!({
                "order": e.order,
                "multiplicity": e.multiplicity,
                "zero": e.k,
                "crossing": hit.map(|c| c.k),
            }));
        }
        for c in &rep.unmatched_crossings {
            out.rows.push(
                ctx.row(&ob, Some(c.k), format!("unmatched_crossing_n{}", c.order), c.k)
                    .fail(),
            );
        }
        out.rows.push(
            ctx.row(
                &ob,
                None,
                "counterclockwise_crossings",
                rep.counterclockwise_crossings as f64,
            )
            .predicted(0.0)
            .gap(rep.counterclockwise_crossings as f64)
            .tolerance(0.0),
        );
        out.rows.push(
            ctx.row(&ob, None, "identity_gap_over_k", rep.identity_gap)
                .predicted(0.0)
                .gap(rep.identity_gap)
                .tolerance(DUALITY_IDENTITY_TOLERANCE),
        );
        let crossing_mult: u32 = rep.crossings.iter().map(|c| c.multiplicity).sum();
        let zero_mult: u32 = rep.eigenvalues.iter().map(|e| e.multiplicity).sum();
        out.checks.push(Check::flag(
            format!("crossings match Dirichlet zeros one-to-one {} K={k_max}", ob.label),
            rep.matched() && crossing_mult == zero_mult,
            format!(
                "{} zeros (multiplicity {zero_mult}), {} crossings (multiplicity {crossing_mult}), {} unmatched zeros, {} unmatched crossings, {} counterclockwise",
                rep.eigenvalues.len(),
                rep.crossings.len(),
                rep.unmatched_eigenvalues.len(),
                rep.unmatched_crossings.len(),
                rep.counterclockwise_crossings
            ),
        ));
        out.checks.push(Check::at_most(
            format!("s = 2 pi N_D + s_2pi along the ladder, max gap / k {}", ob.label),
            rep.identity_gap,
            DUALITY_IDENTITY_TOLERANCE,
        ));
        details.push(json!({ "obstacle": ob.label, "k_max": k_max, "step": step, "matched": matched }));
    }
    out.details = json!(details);
    Ok(out)
}

/// Largest `|w(ν, ω, ω)|` over boundary normals and directions with
/// `ν·ω > 0`.
fn shadow_weight(ob: &ConvexObstacle, samples: usize, directions: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let nu = ob.normal(TAU * i as f64 / samples as f64);
        for j in 0..directions {
            let w = Vec2::from_angle(TAU * j as f64 / directions as f64);
            if nu.dot(w) > 0.0 {
                worst = worst.max(kirchhoff_weight(nu, w, w).abs());
            }
        }
    }
    worst
}

fn kirchhoff(ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let mut fig = Figure::new("Kirchhoff vs Nyström", "k", "sup relative amplitude error").log_log();
    for ob in ctx.obstacles()? {
        let per_k = ctx
            .ks(&ob)
            .par_iter()
            .map(|&k| {
                let op = ctx.operator(&ob, k, Solver::Nystrom)?;
                let kernel = kirchhoff_amplitude(&ob.body, k);
                Ok((k, kirchhoff_gap(&op, &kernel, 0, KIRCHHOFF_MIN_ANGLE)))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        for &(k, g) in &per_k {
            out.rows
                .push(ctx.row(&ob, Some(k), "kirchhoff_gap", g).predicted(0.0).gap(g));
        }
        let gaps: Vec<f64> = per_k.iter().map(|p| p.1).collect();
        out.checks.push(Check::decreasing(
            format!("Kirchhoff gap decreasing {}", ob.label),
            &gaps,
        ));
        let shadow = shadow_weight(&ob.body, 720, 360);
        out.rows.push(
            ctx.row(&ob, None, "shadow_weight", shadow)
                .predicted(0.0)
                .gap(shadow)
                .tolerance(0.0),
        );
        out.checks.push(Check::at_most(
            format!("shadow-side weight vanishes {}", ob.label),
            shadow,
            0.0,
        ));
        fig = fig.with(Series::new(ob.label.clone(), per_k, Style::Line));
    }
    out.plots.push(("kirchhoff_gap".into(), fig.render()));
    Ok(out)
}

/// `n` rays whose impact parameter is at least `margin` inside the impact
/// interval.
fn interacting_rays(ob: &ConvexObstacle, n: usize, margin: f64, seed: u64) -> Vec<PhaseRay> {
    let mut rng = stream(seed, 0);
    let r = ob.max_radius();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (w, e) = uniform_ray(&mut rng, r);
        let (lo, hi) = ob.impact_interval(w);
        if e > lo + margin && e < hi - margin {
            out.push(PhaseRay::new(w, e));
        }
    }
    out
}

fn ray_distance(a: &PhaseRay, b: &PhaseRay) -> f64 {
    angle_diff(a.omega, b.omega).abs().max((a.eta - b.eta).abs())
}

/// Worst deviation over the single-reflection branch identities on `ray`.
fn branch_residual(ob: &ConvexObstacle, ray: &PhaseRay) -> phaseshift_core::Result<f64> {
    let mm = ScatterBranch::new(Sign::Minus, Sign::Minus);
    let mp = ScatterBranch::new(Sign::Minus, Sign::Plus);
    let pp = ScatterBranch::new(Sign::Plus, Sign::Plus);
    let entry = match ob.chord(ray)? {
        ChordHit::Crossing { entry, .. } => entry.point,
        _ => return Err(phaseshift_core::Error::Domain(ray.eta)),
    };
    let mut worst: f64 = 0.0;
    let b = tau_branch(ob, ray, mm)?;
    worst = worst
        .max(angle_diff(b.alpha, ray.omega).abs())
        .max((b.point - entry).norm());
    let k = scatter_map(ob, ray)?;
    worst = worst.max(ray_distance(&tau_branch(ob, ray, mp)?.ray, &k));
    let back = tau_branch(ob, ray, pp)?.ray;
    worst = worst.max(ray_distance(&scatter_map(ob, &back)?, ray));
    worst = worst.max(ray_distance(&scatter_map_inverse(ob, &k)?, ray));
    for br in ScatterBranch::ALL {
        let b = tau_branch(ob, ray, br)?;
        let a0 = ray.direction().dot(b.normal).abs();
        let a1 = Vec2::from_angle(b.alpha).dot(b.normal).abs();
        worst = worst
            .max((a0 - a1).abs())
            .max((project(b.alpha, b.point) - b.ray.eta).abs());
    }
    Ok(worst)
}

fn dynamics(ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let cfg = ctx.cfg;
    let n_rays = cfg.rays.unwrap_or(10_000);
    let samples = cfg.samples.unwrap_or(1_000_000);
    let p = match cfg.p.first() {
        None => 2,
        Some(&p) if p > 0 => p as usize,
        Some(&p) => {
            return Err(CliError::Config {
                key: "p".into(),
                message: format!("the dynamics experiment needs a positive period, got {p}"),
            })
        }
    };
    let mut eps = cfg.eps.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    for ob in ctx.obstacles()? {
        let rays = interacting_rays(&ob.body, n_rays, 1e-6, cfg.seed);
        let conj = rays
            .par_iter()
            .map(|r| conjugacy_check(&ob.body, r))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(run_err(format!("{}.conjugacy", ob.key())))?
            .into_iter()
            .fold(0.0, f64::max);
        let branch = rays
            .par_iter()
            .map(|r| branch_residual(&ob.body, r))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(run_err(format!("{}.branches", ob.key())))?
            .into_iter()
            .fold(0.0, f64::max);
        out.rows.push(
            ctx.row(&ob, None, "conjugacy_residual", conj)
                .predicted(0.0)
                .gap(conj)
                .tolerance(DYNAMICS_TOLERANCE),
        );
        out.rows.push(
            ctx.row(&ob, None, "branch_identity_residual", branch)
                .predicted(0.0)
                .gap(branch)
                .tolerance(DYNAMICS_TOLERANCE),
        );
        out.checks.push(Check::at_most(
            format!("conjugacy on {n_rays} rays {}", ob.label),
            conj,
            DYNAMICS_TOLERANCE,
        ));
        out.checks.push(Check::at_most(
            format!("branch identities on {n_rays} rays {}", ob.label),
            branch,
            DYNAMICS_TOLERANCE,
        ));

        let vol = ob.body.interaction_volume(samples, cfg.seed.wrapping_add(1));
        let target = 2.0 * ob.body.perimeter();
        let miss = (vol.value - target).abs();
        // the disk fills its sampling box, so every draw hits and σ = 0
        let sigmas = if vol.stderr > 0.0 {
            miss / vol.stderr
        } else if miss <= 1e-12 * target {
            0.0
        } else {
            f64::INFINITY
        };
        out.rows.push(
            ctx.row(&ob, None, "interaction_volume", vol.value)
                .predicted(target)
                .gap(sigmas)
                .tolerance(VOLUME_SIGMAS),
        );
        out.checks.push(
            Check::at_most(
                format!("interaction volume = 2L within 3 sigma {}", ob.label),
                sigmas,
                VOLUME_SIGMAS,
            )
            .note(format!("{:.5} +- {:.5} vs {target:.5}", vol.value, vol.stderr)),
        );

        let vols: Vec<f64> = eps
            .iter()
            .map(|&e| near_periodic_volume(&ob.body, p, e, samples, cfg.seed.wrapping_add(2)).value)
            .collect();
        for (&e, &v) in eps.iter().zip(&vols) {
            out.rows
                .push(ctx.row(&ob, None, format!("near_periodic_volume_p{p}_eps{e}"), v));
        }
        for i in 1..eps.len() {
            let ratio = vols[i - 1] / vols[i];
            let want = eps[i - 1] / eps[i];
            let g = (ratio / want - 1.0).abs();
            out.rows.push(
                ctx.row(
                    &ob,
                    None,
                    format!("volume_ratio_p{p}_eps{}_over_eps{}", eps[i - 1], eps[i]),
                    ratio,
                )
                .predicted(want)
                .gap(g)
                .tolerance(HALVING_TOLERANCE),
            );
            out.checks.push(
                Check::at_most(
                    format!(
                        "near-periodic volume ratio p={p} eps {} -> {} {}",
                        eps[i - 1],
                        eps[i],
                        ob.label
                    ),
                    g,
                    HALVING_TOLERANCE,
                )
                .note(format!("ratio {ratio:.4} vs {want}")),
            );
        }
    }
    Ok(out)
}

fn random_matrix<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let data = (0..n * n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ComplexMatrix::new(n, n, data).expect("finite entries")
}

fn determinant(ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let trials = ctx.cfg.trials.unwrap_or(100);
    let mut rng = stream(ctx.cfg.seed, 0);
    let mut worst: f64 = 0.0;
    let mut absolute = 0;
    for t in 0..trials {
        let n = rng.gen_range(1..=4);
        let p = rng.gen_range(1..=4);
        let a = random_matrix(&mut rng, n);
        let b = random_matrix(&mut rng, n);
        let r = ladder_determinant_check(&a, &b, p).map_err(run_err(format!("trial {t}")))?;
        absolute += r.absolute as usize;
        worst = worst.max(r.residual);
    }
    out.rows.push(
        Row::new(ctx.name(), "-", None, "ladder_determinant_residual", worst)
            .predicted(0.0)
            .gap(worst)
            .tolerance(DETERMINANT_TOLERANCE),
    );
    out.checks.push(
        Check::at_most(
            format!("ladder determinant over {trials} random pairs"),
            worst,
            DETERMINANT_TOLERANCE,
        )
        .note(format!("{absolute} trials fell back to the absolute residual")),
    );
    Ok(out)
}

fn coherent(ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let width = ctx.cfg.width_max.unwrap_or(1.0);
    for ob in ctx.obstacles()? {
        let per_k = ctx
            .ks(&ob)
            .par_iter()
            .map(|&k| {
                let key = format!("{}.k = {k}", ob.key());
                let op = ctx.operator(&ob, k, Solver::Auto)?;
                let direct = op.a_matrix().trace();
                let ct = coherent_trace(&op, width).map_err(run_err(key.clone()))?;
                let ones = vec![Complex64::new(1.0, 0.0); op.grid_size()];
                let res = resolution_check(&ones, k, 8.0 / k.sqrt()).map_err(run_err(key))?;
                Ok((k, direct, ct, res))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let mut errs = Vec::new();
        for &(k, direct, ct, res) in &per_k {
            let g = (ct - direct).norm() / direct.norm();
            let tol = (k == COHERENT_REFERENCE_K).then_some(COHERENT_TOLERANCE);
            out.rows.push(
                ctx.row(&ob, Some(k), "coherent_trace_re", ct.re)
                    .predicted(direct.re)
                    .gap(g)
                    .maybe_tolerance(tol),
            );
            out.rows
                .push(ctx.row(&ob, Some(k), "coherent_trace_im", ct.im).predicted(direct.im));
            out.rows
                .push(ctx.row(&ob, Some(k), "resolution_error", res).predicted(0.0).gap(res));
            if let Some(t) = tol {
                out.checks.push(Check::at_most(
                    format!("coherent trace vs Tr A {} k={k}", ob.label),
                    g,
                    t,
                ));
            }
            errs.push(res);
        }
        out.checks
            .push(Check::decreasing("resolution-of-identity error decreasing", &errs));
    }
    Ok(out)
}

fn tail(ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    for ob in ctx.obstacles()? {
        let a = ob.circle("tail")?;
        let table = tail_bound_check(a, &ctx.cfg.l, ctx.ks(&ob));
        for r in &table.rows {
            out.rows
                .push(ctx.row(&ob, Some(r.k), format!("tail_count_L{}", r.l), r.count as f64));
            out.rows
                .push(ctx.row(&ob, Some(r.k), format!("tail_ratio_L{}", r.l), r.ratio));
        }
        let spread = table.spread();
        out.rows.push(
            ctx.row(&ob, None, "tail_ratio_spread", spread)
                .predicted(1.0)
                .gap(spread)
                .tolerance(TAIL_SPREAD_LIMIT),
        );
        out.checks.push(Check::at_most(
            format!("N_Lk/(Lk) max/min over the table {}", ob.label),
            spread,
            TAIL_SPREAD_LIMIT,
        ));
        let mut ls = ctx.cfg.l.clone();
        ls.sort_by(f64::total_cmp);
        let monotone = ctx.ks(&ob).iter().all(|&k| {
            let counts: Vec<usize> = ls
                .iter()
                .filter_map(|&l| table.rows.iter().find(|r| r.k == k && r.l == l).map(|r| r.count))
                .collect();
            counts.windows(2).all(|w| w[0] <= w[1])
        });
        out.checks.push(Check::flag(
            format!("N_Lk nondecreasing in L {}", ob.label),
            monotone,
            "",
        ));
        out.details = json!(table
            .rows
            .iter()
            .map(|r| json!({ "L": r.l, "k": r.k, "count": r.count, "ratio": r.ratio }))
            .collect::<Vec<_>>());
    }
    Ok(out)
}
