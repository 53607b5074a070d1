use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use cavint_cli::config::{self, ScenarioConfig};
use cavint_cli::report::{write_table, RunReport, Status};
use cavint_cli::{exit, scenario, CliError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cavint", version, about = "Vacuum-field induced couplings: scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV tables plus report.json
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config)
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Worker threads
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a configuration and print its canonical form
    Validate { config: PathBuf },
}

const DEFAULT_OUTPUT_DIR: &str = "cavint-output";

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Run { config, output_dir, threads } => match run(&config, output_dir, threads) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e:#}");
                e.downcast_ref::<CliError>().map_or(exit::IO, CliError::exit_code)
            }
        },
    };
    ExitCode::from(code as u8)
}

fn report_error(err: &CliError) {
    eprintln!("error: {err}");
    if let CliError::Invalid(list) = err {
        for e in list {
            eprintln!("  {e}");
        }
    }
}

fn validate(path: &Path) -> i32 {
    let cfg = match config::load(path) {
        Ok(c) => c,
        Err(e) => {
            report_error(&e);
            return e.exit_code();
        }
    };
    match cfg.prepare() {
        Ok(_) => {
            println!("OK: {}", cfg.kind.as_str());
            print!("{}", cfg.canonical());
            exit::OK
        }
        Err(errors) => {
            let e = CliError::Invalid(errors);
            report_error(&e);
            e.exit_code()
        }
    }
}

fn run(path: &Path, output_dir: Option<PathBuf>, threads: Option<usize>) -> anyhow::Result<i32> {
    let t0 = Instant::now();
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring thread pool")?;
    }
    let mut report = RunReport::new(rayon::current_num_threads());

    let cfg: ScenarioConfig = match config::load(path) {
        Ok(c) => c,
        Err(e) => {
            report_error(&e);
            if let Some(dir) = &output_dir {
                report.status = Status::ConfigError;
                report.errors.push(e.to_string());
                report.write(dir)?;
            }
            return Ok(e.exit_code());
        }
    };
    let dir = output_dir
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    report.set_config(cfg.kind.as_str(), cfg.canonical());

    let prep = match cfg.prepare() {
        Ok(p) => p,
        Err(errors) => {
            report.status = Status::ConfigError;
            report.add_field_errors(&errors);
            report.write(&dir)?;
            let e = CliError::Invalid(errors);
            report_error(&e);
            return Ok(e.exit_code());
        }
    };
    report.timings_s.insert("validate".into(), t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let outcome = scenario::run(&cfg, &prep);
    report.timings_s.insert("compute".into(), t1.elapsed().as_secs_f64());

    for (k, table) in outcome.tables.iter().enumerate() {
        let entry = write_table(&dir, table, outcome.partial == Some(k))?;
        println!("wrote {} ({} rows)", dir.join(&entry.file).display(), entry.rows);
        report.outputs.push(entry);
    }
    report.error_estimates = outcome.estimates;

    let code = match &outcome.failure {
        None => exit::OK,
        Some(e) => {
            eprintln!("error: {e}");
            report.errors.push(e.to_string());
            if is_numerical(e) {
                report.status = Status::ConvergenceFailure;
                exit::CONVERGENCE
            } else {
                report.status = Status::ComputationError;
                exit::CONFIG
            }
        }
    };
    report.timings_s.insert("total".into(), t0.elapsed().as_secs_f64());
    report.write(&dir)?;
    println!("wrote {}", dir.join(cavint_cli::report::REPORT_FILE).display());
    Ok(code)
}

/// Failures of the numerics rather than of the input.
fn is_numerical(e: &cavint::Error) -> bool {
    e.is_convergence()
        || matches!(
            e,
            cavint::Error::Instability { .. } | cavint::Error::SingularMatrix(_) | cavint::Error::StaticLimit(_)
        )
}
