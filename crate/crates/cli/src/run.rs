//! Single experiment runs: CSV trajectory, summary JSON and a plot script.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use geoseek_core::averaging::enter_and_remain;
use geoseek_core::flow::{integrate_es, Trajectory};
use geoseek_core::{CostOracle, EsField, Error, Space};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::problem::{Problem, Visitor};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub name: String,
    /// Sweep axis and value, if the run is part of a sweep.
    pub axis: Option<String>,
    pub value: Option<f64>,
    pub status: String,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub final_distance: f64,
    /// Group runs only.
    pub final_distance_to_identity: Option<f64>,
    pub t_enter: Option<f64>,
    pub samples: usize,
    pub max_defect: f64,
    pub wall_seconds: f64,
    pub csv: String,
    pub config: ExperimentConfig,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Row formatting shared by every CSV: 17 significant digits.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<S: Space>(path: &Path, space: &S, traj: &Trajectory<S::Point>, failure: Option<&Error>) -> Result<(), CliError> {
    let mut out = String::new();
    let mut header = vec!["t".to_string(), "cost".into(), "dist_to_target".into()];
    header.extend(space.column_names());
    out.push_str(&header.join(","));
    out.push('\n');
    for s in &traj.samples {
        let mut row = vec![fmt_value(s.t), fmt_value(s.cost), fmt_value(s.dist_to_target)];
        row.extend(space.flatten(&s.state).into_iter().map(fmt_value));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    if let Some(e) = failure {
        let _ = writeln!(out, "# incomplete: {e}");
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    fs::write(path, out).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn plot_script(csv_name: &str, columns: &[String]) -> String {
    let state: Vec<String> = columns.iter().map(|c| format!("\"{c}\"")).collect();
    format!(
        "import sys\n\
         import pandas as pd\n\
         import matplotlib.pyplot as plt\n\
         \n\
         csv = sys.argv[1] if len(sys.argv) > 1 else \"{csv_name}\"\n\
         df = pd.read_csv(csv, comment=\"#\")\n\
         fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))\n\
         ax1.semilogy(df[\"t\"], df[\"cost\"].clip(lower=1e-16), label=\"cost\")\n\
         ax1.semilogy(df[\"t\"], df[\"dist_to_target\"].clip(lower=1e-16), label=\"distance to target\")\n\
         ax1.legend()\n\
         for c in [{}]:\n\
         \x20   ax2.plot(df[\"t\"], df[c], label=c)\n\
         ax2.set_xlabel(\"t\")\n\
         ax2.legend(ncol=4, fontsize=\"small\")\n\
         fig.tight_layout()\n\
         fig.savefig(csv.rsplit(\".\", 1)[0] + \".png\", dpi=120)\n",
        state.join(", ")
    )
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

struct RunVisitor<'a> {
    cfg: &'a ExperimentConfig,
    csv: &'a Path,
}

impl Visitor for RunVisitor<'_> {
    type Out = Result<RunRecord, CliError>;

    fn visit<S: Space, C: CostOracle<S::Point> + Sync>(self, space: &S, cost: &C, x0: &S::Point, target: &S::Point) -> Self::Out {
        let cfg = self.cfg;
        let es = EsField::new(space, cost, cfg.dither_spec()?).map_err(|e| CliError::Config(e.to_string()))?;
        let start = Instant::now();
        let (traj, failure) = match integrate_es(&es, x0, &cfg.integrator, target) {
            Ok(t) => (t, None),
            Err(f) => (f.partial, Some(f.error)),
        };
        let wall_seconds = start.elapsed().as_secs_f64();
        write_csv(self.csv, space, &traj, failure.as_ref())?;
        let first = traj.samples.first();
        let last = traj.samples.last();
        let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        let dists: Vec<f64> = traj.samples.iter().map(|s| s.dist_to_target).collect();
        let to_identity = match (space.identity(), last) {
            (Some(id), Some(s)) => Some(space.distance(&s.state, &id).map_err(|e| CliError::Integration(e.to_string()))?),
            _ => None,
        };
        Ok(RunRecord {
            name: cfg.name.clone(),
            axis: None,
            value: None,
            status: match &failure {
                None => "ok".into(),
                Some(e) => format!("failed: {e}"),
            },
            initial_cost: first.map_or(f64::NAN, |s| s.cost),
            final_cost: last.map_or(f64::NAN, |s| s.cost),
            final_distance: last.map_or(f64::NAN, |s| s.dist_to_target),
            final_distance_to_identity: to_identity,
            t_enter: if failure.is_none() { enter_and_remain(&times, &dists, cfg.radius) } else { None },
            samples: traj.samples.len(),
            max_defect: traj.max_defect,
            wall_seconds,
            csv: self.csv.display().to_string(),
            config: cfg.clone(),
        })
    }
}

/// Runs the experiment, writing `<output>` (CSV), `<stem>.summary.json` and
/// `<stem>.plot.py` under `out_dir`. Integration failures still return a record, with
/// a `failed: ...` status and the partial CSV marked as incomplete.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunRecord, CliError> {
    cfg.validate()?;
    let csv = out_dir.join(&cfg.output);
    let problem = Problem::build(cfg)?;
    let record = problem.accept(RunVisitor { cfg, csv: &csv })?;
    let summary = serde_json::to_string_pretty(&record).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(with_suffix(&csv, ".summary.json"), summary + "\n")?;
    let columns = match &problem {
        Problem::Chart { space, .. } => space.column_names(),
        Problem::Group { space, .. } => space.column_names(),
    };
    let csv_name = csv.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    fs::write(with_suffix(&csv, ".plot.py"), plot_script(&csv_name, &columns))?;
    Ok(record)
}
