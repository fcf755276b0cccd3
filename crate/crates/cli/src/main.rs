use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geoseek_cli::{emit_summary, resolve, run_experiment, run_sweep, Axis, CliError, BUILTINS};

#[derive(Parser)]
#[command(name = "geoseek", version, about = "Extremum seeking with geodesic dithers on manifolds and Lie groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (a JSON file or a built-in name).
    Run {
        config: String,
        /// Directory for the CSV, summary and plot script.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one experiment per value along an axis.
    Sweep {
        config: String,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a configuration without running it.
    Validate { config: String },
    /// List the built-in experiments.
    ListExperiments,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Run { config, out } => {
            let cfg = resolve(&config)?;
            let rec = run_experiment(&cfg, &out)?;
            let (table, _) = emit_summary(std::slice::from_ref(&rec));
            print!("{table}");
            println!("wrote {}", rec.csv);
            if rec.ok() {
                Ok(0)
            } else {
                eprintln!("{}", rec.status);
                Ok(2)
            }
        }
        Command::Sweep { config, axis, values, out } => {
            let cfg = resolve(&config)?;
            let report = run_sweep(&cfg, axis, &values, &out)?;
            let (table, _) = emit_summary(&report.records);
            print!("{table}");
            if let Some(s) = &report.slope {
                println!("residual log-log slope: {:.4}", s.slope);
            }
            if let Some(c) = &report.corrector {
                for (w, r) in c.omegas.windows(2).zip(&c.ratios) {
                    println!("corrector distance ratio {} -> {}: {:.4}", w[0], w[1], r);
                }
            }
            for n in &report.notes {
                println!("note: {n}");
            }
            let path = out.join(format!("{}_{}.sweep.json", cfg.name, axis));
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
            std::fs::write(&path, text + "\n")?;
            println!("wrote {}", path.display());
            Ok(if report.records.iter().all(|r| r.ok()) { 0 } else { 2 })
        }
        Command::Validate { config } => {
            let cfg = resolve(&config)?;
            let spec = cfg.dither_spec()?;
            println!("{}: ok (common dither period {:.6} in t)", cfg.name, spec.period());
            Ok(0)
        }
        Command::ListExperiments => {
            for b in BUILTINS {
                println!("{:<14} {}", b.name, b.description);
            }
            Ok(0)
        }
    }
}
