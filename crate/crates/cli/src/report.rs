//! Result rows, acceptance checks and their on-disk forms.
//!
//! Floats go to the CSV as `{:.12e}` so that reruns compare byte for byte;
//! wall-clock times are kept out of it and only appear in `summary.json`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

pub const CSV_HEADER: [&str; 9] = [
    "experiment",
    "obstacle",
    "k",
    "quantity",
    "measured",
    "predicted",
    "gap",
    "tolerance",
    "pass",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub obstacle: String,
    pub k: Option<f64>,
    pub quantity: String,
    pub measured: f64,
    pub predicted: Option<f64>,
    pub gap: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

impl Row {
    pub fn new(experiment: &str, obstacle: &str, k: Option<f64>, quantity: impl Into<String>, measured: f64) -> Self {
        Self {
            experiment: experiment.into(),
            obstacle: obstacle.into(),
            k,
            quantity: quantity.into(),
            measured,
            predicted: None,
            gap: None,
            tolerance: None,
            pass: None,
        }
    }

    pub fn predicted(mut self, p: f64) -> Self {
        self.predicted = Some(p);
        self
    }

    pub fn gap(mut self, g: f64) -> Self {
        self.gap = Some(g);
        self
    }

    /// Sets the tolerance; the row passes when its gap is within it.
    pub fn tolerance(mut self, t: f64) -> Self {
        self.tolerance = Some(t);
        self.pass = Some(self.gap.is_some_and(|g| g <= t));
        self
    }

    pub fn maybe_tolerance(self, t: Option<f64>) -> Self {
        match t {
            Some(t) => self.tolerance(t),
            None => self,
        }
    }

    pub fn fail(mut self) -> Self {
        self.pass = Some(false);
        self
    }

    fn record(&self) -> [String; 9] {
        let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
        [
            self.experiment.clone(),
            self.obstacle.clone(),
            opt(self.k),
            self.quantity.clone(),
            fmt_float(self.measured),
            opt(self.predicted),
            opt(self.gap),
            opt(self.tolerance),
            self.pass.map(|p| p.to_string()).unwrap_or_default(),
        ]
    }
}

pub fn fmt_float(x: f64) -> String {
    format!("{x:.12e}")
}

/// One acceptance check with the number it was decided on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub limit: f64,
    pub note: String,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            pass: measured <= limit,
            measured,
            limit,
            note: String::new(),
        }
    }

    /// Passes when `values` is strictly decreasing; `measured` is the ratio
    /// of the last value to the first.
    pub fn decreasing(name: impl Into<String>, values: &[f64]) -> Self {
        let pass = values.len() >= 2 && values.windows(2).all(|w| w[1] < w[0]);
        let ratio = match (values.first(), values.last()) {
            (Some(&a), Some(&b)) if a != 0.0 => b / a,
            _ => f64::NAN,
        };
        Self {
            name: name.into(),
            pass,
            measured: ratio,
            limit: 1.0,
            note: values.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>().join(" "),
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            measured: if pass { 1.0 } else { 0.0 },
            limit: 1.0,
            note: note.into(),
        }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// Everything one experiment run produced.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub name: String,
    pub experiment: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub rows: Vec<Row>,
    pub details: serde_json::Value,
    /// Wall-clock seconds per labelled stage.
    pub runtime_seconds: Vec<(String, f64)>,
}

impl RunReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

pub fn csv_bytes(rows: &[Row]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.into_inner().map_err(|e| CliError::Io {
        path: "<csv buffer>".into(),
        source: e.into_error(),
    })
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    fs::write(path, csv_bytes(rows)?).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
