//! Experiment configuration files.

use std::path::Path;

use geoseek_core::es::{parse_rational, validate_frequencies};
use geoseek_core::flow::IntegratorConfig;
use geoseek_core::{DitherSpec, GroupTag};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    R1,
    S1,
    SO3,
    SE3,
}

impl SpaceKind {
    pub fn dim(self) -> usize {
        match self {
            SpaceKind::R1 | SpaceKind::S1 => 1,
            SpaceKind::SO3 => 3,
            SpaceKind::SE3 => 6,
        }
    }

    pub fn group(self) -> Option<GroupTag> {
        match self {
            SpaceKind::SO3 => Some(GroupTag::SO3),
            SpaceKind::SE3 => Some(GroupTag::SE3),
            _ => None,
        }
    }
}

/// Cost selector. Each cost has a known minimizer, used as the default target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    /// `(x − center)²` on R1.
    Quadratic {
        #[serde(default)]
        center: f64,
    },
    /// `1 − cos(θ − θ*)` on S1.
    Cosine { theta_star: f64 },
    /// `3 − tr(g)` on SO3.
    Trace,
    /// `3 − tr(R) + ½‖p‖²` on SE3.
    Se3Pose,
}

/// A point of the configured space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpec {
    Coords(Vec<f64>),
    /// Rotation about z, with an optional translation on SE3.
    Rz {
        angle: f64,
        #[serde(default)]
        translation: Option<[f64; 3]>,
    },
    /// Full matrix given row by row.
    Matrix(Vec<Vec<f64>>),
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DitherConfig {
    pub amplitudes: Vec<f64>,
    /// Decimal (or `p/q`) strings, parsed exactly.
    pub multipliers: Vec<String>,
    pub omega: f64,
}

/// Sampling window for corrector-flow distances in omega sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorWindow {
    pub horizon: f64,
    pub sample_stride: usize,
}

impl Default for CorrectorWindow {
    fn default() -> Self {
        Self { horizon: 10.0, sample_stride: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub space: SpaceKind,
    pub cost: CostSpec,
    pub initial: StateSpec,
    /// Defaults to the minimizer of the cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<StateSpec>,
    pub dither: DitherConfig,
    pub integrator: IntegratorConfig,
    /// Enter-and-remain radius around the target.
    pub radius: f64,
    /// CSV path, relative to the output directory.
    pub output: String,
    #[serde(default = "default_quadrature")]
    pub quadrature: usize,
    #[serde(default)]
    pub corrector: CorrectorWindow,
}

fn default_quadrature() -> usize {
    geoseek_core::averaging::DEFAULT_QUADRATURE
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("parse error at line {} column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dither_spec(&self) -> Result<DitherSpec, CliError> {
        DitherSpec::from_text(self.dither.amplitudes.clone(), &self.dither.multipliers, self.dither.omega)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks everything that can be checked before a run and reports all problems at once.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        let d = &self.dither;
        match d.multipliers.iter().map(|m| parse_rational(m)).collect::<Result<Vec<_>, _>>() {
            Ok(ms) => match validate_frequencies(&ms) {
                Ok(v) => problems.extend(v.iter().map(|v| format!("frequency condition violated: {v}"))),
                Err(e) => problems.push(e.to_string()),
            },
            Err(e) => problems.push(e.to_string()),
        }
        let dim = self.space.dim();
        if d.amplitudes.len() != dim || d.multipliers.len() != dim {
            problems.push(format!(
                "{:?} needs {dim} amplitudes and multipliers, got {} and {}",
                self.space,
                d.amplitudes.len(),
                d.multipliers.len()
            ));
        }
        if d.amplitudes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            problems.push("amplitudes must be positive".into());
        }
        if !(d.omega.is_finite() && d.omega > 0.0) {
            problems.push(format!("base frequency {} is not positive", d.omega));
        }
        if let Err(e) = self.integrator.steps() {
            problems.push(e.to_string());
        }
        if !(self.radius > 0.0) {
            problems.push(format!("radius {} is not positive", self.radius));
        }
        if self.quadrature < 8 || self.quadrature % 2 != 0 {
            problems.push(format!("quadrature {} must be even and at least 8", self.quadrature));
        }
        let window = IntegratorConfig {
            horizon: self.integrator.t0 + self.corrector.horizon,
            sample_stride: self.corrector.sample_stride,
            ..self.integrator.clone()
        };
        if let Err(e) = window.steps() {
            problems.push(format!("corrector window: {e}"));
        }
        if self.output.trim().is_empty() {
            problems.push("output path is empty".into());
        }
        if problems.is_empty() {
            if let Err(e) = Problem::build(self).and_then(|p| p.check_amplitudes(&d.amplitudes)) {
                problems.push(e.to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems.join("; ")))
        }
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::parse(&text)
}

pub struct Builtin {
    pub name: &'static str,
    pub description: &'static str,
    pub json: &'static str,
}

pub const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "r1_classic",
        description: "J = x^2 on the real line, single dither",
        json: include_str!("../experiments/r1_classic.json"),
    },
    Builtin {
        name: "s1_benchmark",
        description: "J = 1 - cos(theta - theta*) on the circle",
        json: include_str!("../experiments/s1_benchmark.json"),
    },
    Builtin {
        name: "so3_paper",
        description: "J = 3 - tr(g) on SO(3) from Rz(pi/4)",
        json: include_str!("../experiments/so3_paper.json"),
    },
    Builtin {
        name: "se3_paper",
        description: "rotation trace plus squared translation on SE(3)",
        json: include_str!("../experiments/se3_paper.json"),
    },
];

pub fn builtin(name: &str) -> Option<ExperimentConfig> {
    BUILTINS
        .iter()
        .find(|b| b.name == name)
        .map(|b| ExperimentConfig::parse(b.json).expect("built-in experiments are valid"))
}

/// A built-in name or a path to a JSON file.
pub fn resolve(arg: &str) -> Result<ExperimentConfig, CliError> {
    match builtin(arg) {
        Some(cfg) => Ok(cfg),
        None => load_config(Path::new(arg)),
    }
}
