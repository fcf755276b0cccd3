//! Parameter sweeps over amplitude scale, base frequency or step size.

use std::fmt;
use std::path::Path;

use geoseek_core::averaging::{corrector_profile, residual_slope, sup_distance, SlopeReport};
use geoseek_core::flow::IntegratorConfig;
use geoseek_core::{CostOracle, EsField, Space};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::problem::{Problem, Visitor};
use crate::run::{run_experiment, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Rescale the amplitudes so the largest equals the value.
    Amplitude,
    /// Base frequency.
    Omega,
    /// Integrator step.
    Step,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Amplitude => "amplitude",
            Axis::Omega => "omega",
            Axis::Step => "step",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectorSweep {
    pub omegas: Vec<f64>,
    pub sup_distances: Vec<f64>,
    /// `sup(ω_{k+1}) / sup(ω_k)` for consecutive values.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub name: String,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub records: Vec<RunRecord>,
    pub slope: Option<SlopeReport>,
    pub corrector: Option<CorrectorSweep>,
    pub notes: Vec<String>,
}

/// Thread pool honoring `GEOSEEK_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = std::env::var("GEOSEEK_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))
}

fn variant(base: &ExperimentConfig, axis: Axis, value: f64) -> Result<ExperimentConfig, CliError> {
    let mut cfg = base.clone();
    match axis {
        Axis::Amplitude => {
            let spec = base.dither_spec()?.with_max_amplitude(value).map_err(|e| CliError::Config(e.to_string()))?;
            cfg.dither.amplitudes = spec.amplitudes().to_vec();
        }
        Axis::Omega => cfg.dither.omega = value,
        Axis::Step => cfg.integrator.step = value,
    }
    let stem = Path::new(&base.output)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| base.name.clone());
    let file = format!("{stem}_{axis}_{value}.csv");
    cfg.output = match Path::new(&base.output).parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(file).display().to_string(),
        _ => file,
    };
    Ok(cfg)
}

fn error_record(cfg: &ExperimentConfig, err: &CliError) -> RunRecord {
    RunRecord {
        name: cfg.name.clone(),
        axis: None,
        value: None,
        status: format!("error: {err}"),
        initial_cost: f64::NAN,
        final_cost: f64::NAN,
        final_distance: f64::NAN,
        final_distance_to_identity: None,
        t_enter: None,
        samples: 0,
        max_defect: f64::NAN,
        wall_seconds: 0.0,
        csv: String::new(),
        config: cfg.clone(),
    }
}

struct SlopeVisitor<'a> {
    cfg: &'a ExperimentConfig,
    scales: &'a [f64],
}

impl Visitor for SlopeVisitor<'_> {
    type Out = Result<SlopeReport, CliError>;

    fn visit<S: Space, C: CostOracle<S::Point> + Sync>(self, space: &S, cost: &C, x0: &S::Point, _: &S::Point) -> Self::Out {
        let es = EsField::new(space, cost, self.cfg.dither_spec()?).map_err(|e| CliError::Config(e.to_string()))?;
        residual_slope(&es, x0, self.scales, self.cfg.quadrature).map_err(|e| CliError::Integration(e.to_string()))
    }
}

struct CorrectorVisitor<'a> {
    cfg: &'a ExperimentConfig,
    omegas: &'a [f64],
    pool: &'a rayon::ThreadPool,
}

impl Visitor for CorrectorVisitor<'_> {
    type Out = Result<Vec<f64>, CliError>;

    fn visit<S: Space, C: CostOracle<S::Point> + Sync>(self, space: &S, cost: &C, x0: &S::Point, _: &S::Point) -> Self::Out {
        let base = self.cfg.dither_spec()?;
        let window = IntegratorConfig {
            horizon: self.cfg.integrator.t0 + self.cfg.corrector.horizon,
            sample_stride: self.cfg.corrector.sample_stride,
            ..self.cfg.integrator.clone()
        };
        self.pool.install(|| {
            self.omegas
                .par_iter()
                .map(|&w| {
                    let spec = base.with_omega(w).map_err(|e| CliError::Config(e.to_string()))?;
                    let es = EsField::new(space, cost, spec).map_err(|e| CliError::Config(e.to_string()))?;
                    let profile = corrector_profile(&es, x0, &window, self.cfg.quadrature)
                        .map_err(|e| CliError::Integration(e.to_string()))?;
                    Ok(sup_distance(&profile))
                })
                .collect()
        })
    }
}

/// Runs one experiment per value (concurrently), plus the axis-specific analysis:
/// the residual slope for amplitude sweeps, corrector-distance ratios for omega sweeps.
/// A failing run is recorded and does not stop the sweep.
pub fn run_sweep(base: &ExperimentConfig, axis: Axis, values: &[f64], out_dir: &Path) -> Result<SweepReport, CliError> {
    base.validate()?;
    if values.is_empty() {
        return Err(CliError::Config("a sweep needs at least one value".into()));
    }
    let pool = thread_pool()?;
    let records: Vec<RunRecord> = pool.install(|| {
        values
            .par_iter()
            .map(|&v| {
                let mut rec = match variant(base, axis, v) {
                    Ok(cfg) => run_experiment(&cfg, out_dir).unwrap_or_else(|e| error_record(&cfg, &e)),
                    Err(e) => error_record(base, &e),
                };
                rec.axis = Some(axis.to_string());
                rec.value = Some(v);
                rec
            })
            .collect()
    });
    let mut notes = Vec::new();
    let mut slope = None;
    let mut corrector = None;
    let problem = Problem::build(base)?;
    match axis {
        Axis::Amplitude if values.len() < 3 => {
            notes.push(format!("insufficient points for a residual slope: {} value(s), need 3", values.len()))
        }
        Axis::Amplitude => match problem.accept(SlopeVisitor { cfg: base, scales: values }) {
            Ok(s) => slope = Some(s),
            Err(e) => notes.push(format!("residual slope unavailable: {e}")),
        },
        Axis::Omega if values.len() < 2 => {
            notes.push(format!("insufficient points for corrector ratios: {} value(s), need 2", values.len()))
        }
        Axis::Omega if matches!(problem, Problem::Group { .. }) => {
            notes.push("corrector distances are computed on chart spaces only".into())
        }
        Axis::Omega => match problem.accept(CorrectorVisitor { cfg: base, omegas: values, pool: &pool }) {
            Ok(sups) => {
                let ratios = sups.windows(2).map(|w| w[1] / w[0]).collect();
                corrector = Some(CorrectorSweep { omegas: values.to_vec(), sup_distances: sups, ratios });
            }
            Err(e) => notes.push(format!("corrector distances unavailable: {e}")),
        },
        Axis::Step if values.len() < 2 => notes.push("insufficient points: a single step size".into()),
        Axis::Step => {}
    }
    Ok(SweepReport {
        name: base.name.clone(),
        axis,
        values: values.to_vec(),
        records,
        slope,
        corrector,
        notes,
    })
}
