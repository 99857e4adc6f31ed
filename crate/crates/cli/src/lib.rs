//! Experiment runner: config parsing, operator cache, experiments, CSV and
//! JSON reports, SVG plots.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod cache;
pub mod config;
pub mod experiments;
pub mod plots;
pub mod report;

use cache::Cache;
use config::{ExperimentConfig, BUILTIN_NAMES};
use report::{Row, RunReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{key}: {source}")]
    Run {
        key: String,
        #[source]
        source: phaseshift_core::Error,
    },

    #[error(transparent)]
    Core(#[from] phaseshift_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            _ => EXIT_FAIL,
        }
    }
}

/// Output directory of `cfg`: its `output` key, else `out/<name>`.
pub fn default_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| Path::new("out").join(&cfg.name))
}

/// Runs one experiment and writes `results.csv`, `summary.json` and
/// `plots/*.svg` under `out_dir`.
pub fn run_config(cfg: &ExperimentConfig, out_dir: &Path, cache: &Cache) -> Result<RunReport, CliError> {
    log::info!("running {} ({})", cfg.name, cfg.experiment.name());
    let started = std::time::Instant::now();
    let outcome = experiments::run(cfg, cache)?;
    let mut timings = outcome.timings;
    timings.push(("total".into(), started.elapsed().as_secs_f64()));
    let pass = outcome.checks.iter().all(|c| c.pass) && outcome.rows.iter().all(|r| r.pass != Some(false));
    let report = RunReport {
        name: cfg.name.clone(),
        experiment: cfg.experiment.name().into(),
        pass,
        checks: outcome.checks,
        rows: outcome.rows,
        details: outcome.details,
        runtime_seconds: timings,
    };

    let plot_dir = out_dir.join("plots");
    fs::create_dir_all(&plot_dir).map_err(|e| CliError::io(&plot_dir, e))?;
    report::write_csv(&out_dir.join("results.csv"), &report.rows)?;
    report::write_json(&out_dir.join("summary.json"), &report)?;
    for (stem, svg) in &outcome.plots {
        let path = plot_dir.join(format!("{stem}.svg"));
        fs::write(&path, svg).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(report)
}

/// Runs every built-in config into `out_dir/<name>` and writes the combined
/// `results.csv` and `summary.json` at the top.
pub fn check(out_dir: &Path, cache: &Cache) -> Result<Vec<RunReport>, CliError> {
    let mut reports = Vec::new();
    for name in BUILTIN_NAMES {
        let cfg = ExperimentConfig::load(name)?;
        reports.push(run_config(&cfg, &out_dir.join(name), cache)?);
    }
    let rows: Vec<Row> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    report::write_csv(&out_dir.join("results.csv"), &rows)?;
    let summary: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| {
            serde_json::json!({
                "name": r.name,
                "pass": r.pass,
                "failed": r.failed_checks().map(|c| &c.name).collect::<Vec<_>>(),
            })
        })
        .collect();
    report::write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(reports)
}

/// One line per check, for the terminal.
pub fn describe(report: &RunReport) -> String {
    let mut s = format!(
        "{} [{}]: {}\n",
        report.name,
        report.experiment,
        if report.pass { "PASS" } else { "FAIL" }
    );
    for c in &report.checks {
        s.push_str(&format!(
            "  {} {} (measured {:.4e}, limit {:.4e}){}\n",
            if c.pass { "ok  " } else { "FAIL" },
            c.name,
            c.measured,
            c.limit,
            if c.note.is_empty() {
                String::new()
            } else {
                format!(" {}", c.note)
            }
        ));
    }
    s
}
