//! Experiment configuration: a small TOML document, either read from disk
//! or taken from the built-in table.

use std::path::{Path, PathBuf};

use phaseshift_core::geometry::Harmonic;
use phaseshift_core::ConvexObstacle;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Oracle,
    Trace,
    Sectors,
    Phase,
    Duality,
    Kirchhoff,
    Dynamics,
    Determinant,
    Coherent,
    Tail,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Oracle => "oracle",
            Experiment::Trace => "trace",
            Experiment::Sectors => "sectors",
            Experiment::Phase => "phase",
            Experiment::Duality => "duality",
            Experiment::Kirchhoff => "kirchhoff",
            Experiment::Dynamics => "dynamics",
            Experiment::Determinant => "determinant",
            Experiment::Coherent => "coherent",
            Experiment::Tail => "tail",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicSpec {
    pub order: u32,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObstacleKind {
    Circle {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    Support {
        c0: f64,
        #[serde(default)]
        harmonics: Vec<HarmonicSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    #[serde(flatten)]
    pub kind: ObstacleKind,
    /// Per-obstacle wavenumbers, replacing the top-level list.
    #[serde(default)]
    pub k: Option<Vec<f64>>,
}

impl ObstacleSpec {
    pub fn label(&self) -> String {
        match &self.kind {
            ObstacleKind::Circle { radius } => format!("circle(r={radius})"),
            ObstacleKind::Ellipse { a, b } => format!("ellipse(a={a};b={b})"),
            ObstacleKind::Support { c0, harmonics } => {
                let mut s = format!("support(c0={c0}");
                for h in harmonics {
                    s.push_str(&format!(";{}:{}@{}", h.order, h.amplitude, h.phase));
                }
                s.push(')');
                s
            }
        }
    }

    pub fn build(&self) -> phaseshift_core::Result<ConvexObstacle> {
        match &self.kind {
            ObstacleKind::Circle { radius } => ConvexObstacle::circle(*radius),
            ObstacleKind::Ellipse { a, b } => ConvexObstacle::ellipse(*a, *b),
            ObstacleKind::Support { c0, harmonics } => ConvexObstacle::support(
                *c0,
                harmonics
                    .iter()
                    .map(|h| Harmonic {
                        order: h.order,
                        amplitude: h.amplitude,
                        phase: h.phase,
                    })
                    .collect(),
            ),
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            ObstacleKind::Circle { radius } => Some(radius),
            _ => None,
        }
    }
}

/// Resolution overrides; unset values follow the module defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    /// Boundary points per wavelength for the Nyström solver.
    pub nodes_per_wavelength: Option<f64>,
    /// Far-field grid size.
    pub grid: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub experiment: Experiment,
    #[serde(default, rename = "obstacle")]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub k: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub resolution: Resolution,
    /// Trace powers.
    #[serde(default)]
    pub p: Vec<i32>,
    /// Sector `(φ₀, φ₁]`.
    #[serde(default)]
    pub sector: Option<[f64; 2]>,
    /// Upper end of the duality ladder.
    #[serde(default)]
    pub k_max: Option<f64>,
    /// Ladder step for the duality check.
    #[serde(default)]
    pub step: Option<f64>,
    /// Tail thresholds `L`.
    #[serde(default)]
    pub l: Vec<f64>,
    /// Near-periodic radii.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Monte Carlo samples.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Random rays for pointwise identities.
    #[serde(default)]
    pub rays: Option<usize>,
    /// Random trials for the determinant identity.
    #[serde(default)]
    pub trials: Option<usize>,
    /// Largest impact parameter of interest for coherent traces.
    #[serde(default)]
    pub width_max: Option<f64>,
}

fn default_seed() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config {
            key: "<document>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A file path, or the name of a built-in config.
    pub fn load(source: &str) -> Result<Self, CliError> {
        let path = Path::new(source);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
                key: "<file>".into(),
                message: format!("{}: {e}", path.display()),
            })?;
            return Self::parse(&text);
        }
        match builtin(source) {
            Some(text) => Self::parse(text),
            None => Err(CliError::Config {
                key: "<config>".into(),
                message: format!(
                    "{source} is neither a file nor a built-in config ({})",
                    BUILTIN_NAMES.join(", ")
                ),
            }),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, message: String| {
            Err(CliError::Config {
                key: key.into(),
                message,
            })
        };
        let needs_obstacle = !matches!(self.experiment, Experiment::Determinant);
        if needs_obstacle && self.obstacles.is_empty() {
            return bad("obstacle", "at least one [[obstacle]] table is required".into());
        }
        for (i, ob) in self.obstacles.iter().enumerate() {
            if let Err(e) = ob.build() {
                return bad(&format!("obstacle[{i}]"), e.to_string());
            }
            if let Some(ks) = &ob.k {
                check_k_list(ks, &format!("obstacle[{i}].k"))?;
            }
        }
        let uses_k = matches!(
            self.experiment,
            Experiment::Oracle
                | Experiment::Trace
                | Experiment::Sectors
                | Experiment::Phase
                | Experiment::Kirchhoff
                | Experiment::Coherent
                | Experiment::Tail
        );
        if uses_k && self.obstacles.iter().any(|o| o.k.is_none()) {
            check_k_list(&self.k, "k")?;
        }
        if matches!(self.experiment, Experiment::Trace) && (self.p.is_empty() || self.p.contains(&0)) {
            return bad("p", "trace powers must be a non-empty list of nonzero integers".into());
        }
        if let Some([a, b]) = self.sector {
            if !(0.0 < a && a < b && b < std::f64::consts::TAU) {
                return bad("sector", format!("need 0 < φ₀ < φ₁ < 2π, got ({a}, {b}]"));
            }
        }
        if matches!(self.experiment, Experiment::Duality) && !self.k_max.is_some_and(|k| k > 0.0) {
            return bad("k_max", "duality needs a positive k_max".into());
        }
        if matches!(self.experiment, Experiment::Tail) && (self.l.is_empty() || self.l.iter().any(|&l| !(l > 0.0))) {
            return bad("l", "tail thresholds must be positive".into());
        }
        if matches!(self.experiment, Experiment::Dynamics)
            && (self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0)))
        {
            return bad("eps", "near-periodic radii must be positive".into());
        }
        if let Some(n) = self.resolution.nodes_per_wavelength {
            if !(n >= 10.0) {
                return bad(
                    "resolution.nodes_per_wavelength",
                    format!("{n} is below the floor of 10"),
                );
            }
        }
        Ok(())
    }

    /// Wavenumbers for obstacle `i`.
    pub fn ks_for(&self, i: usize) -> &[f64] {
        self.obstacles[i].k.as_deref().unwrap_or(&self.k)
    }
}

fn check_k_list(ks: &[f64], key: &str) -> Result<(), CliError> {
    let err = |message: String| {
        Err(CliError::Config {
            key: key.into(),
            message,
        })
    };
    if ks.is_empty() {
        return err("empty k list".into());
    }
    if ks.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return err(format!("wavenumbers must be positive, got {ks:?}"));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return err(format!("wavenumbers must be strictly increasing, got {ks:?}"));
    }
    Ok(())
}

pub const BUILTIN_NAMES: [&str; 11] = [
    "oracle",
    "unitarity",
    "trace",
    "sectors",
    "phase",
    "duality",
    "kirchhoff",
    "dynamics",
    "determinant",
    "coherent",
    "tail",
];

/// Built-in configs; `phaseshift check` runs all of them.
pub fn builtin(name: &str) -> Option<&'static str> {
    Some(match name {
        "oracle" => include_str!("../configs/oracle.toml"),
        "unitarity" => include_str!("../configs/unitarity.toml"),
        "trace" => include_str!("../configs/trace.toml"),
        "sectors" => include_str!("../configs/sectors.toml"),
        "phase" => include_str!("../configs/phase.toml"),
        "duality" => include_str!("../configs/duality.toml"),
        "kirchhoff" => include_str!("../configs/kirchhoff.toml"),
        "dynamics" => include_str!("../configs/dynamics.toml"),
        "determinant" => include_str!("../configs/determinant.toml"),
        "coherent" => include_str!("../configs/coherent.toml"),
        "tail" => include_str!("../configs/tail.toml"),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        for name in BUILTIN_NAMES {
            let cfg = ExperimentConfig::load(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, name);
        }
    }

    #[test]
    fn empty_k_list_is_a_config_error() {
        let text =
            "name = \"x\"\nexperiment = \"trace\"\nk = []\np = [1]\n[[obstacle]]\nkind = \"circle\"\nradius = 1.0\n";
        match ExperimentConfig::parse(text) {
            Err(CliError::Config { key, .. }) => assert_eq!(key, "k"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsorted_k_and_bad_obstacle_are_rejected() {
        let text =
            "name = \"x\"\nexperiment = \"sectors\"\nk = [40.0, 20.0]\n[[obstacle]]\nkind = \"circle\"\nradius = 1.0\n";
        assert!(ExperimentConfig::parse(text).is_err());
        let text =
            "name = \"x\"\nexperiment = \"sectors\"\nk = [20.0]\n[[obstacle]]\nkind = \"ellipse\"\na = 2.0\nb = -1.0\n";
        assert!(matches!(ExperimentConfig::parse(text), Err(CliError::Config { key, .. }) if key == "obstacle[0]"));
    }

    #[test]
    fn support_obstacles_parse_with_harmonics() {
        let text = "name = \"s\"\nexperiment = \"sectors\"\nk = [10.0]\n[[obstacle]]\nkind = \"support\"\nc0 = 1.0\n[[obstacle.harmonics]]\norder = 3\namplitude = 0.02\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.obstacles[0].label(), "support(c0=1;3:0.02@0)");
        assert!(cfg.obstacles[0].build().is_ok());
    }
}
