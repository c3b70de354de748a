//! Command-line front end: run a single simulation, a full work-precision
//! study, or just the validated reference, all driven by a JSON config file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use carfollow::{compute_reference, convergence_study, run, SchemeKind, SimError, H_REF};
use carfollow_cli::config::{self, ResolvedConfig, StudyConfig};
use carfollow_cli::output;

/// Car-following scenarios under four explicit integration schemes.
#[derive(Debug, Parser)]
#[command(name = "carfollow", version, about)]
struct Cli {
    /// JSON study configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario once and write a trajectory CSV.
    Simulate {
        /// Integration scheme (euler, ballistic, trapezoidal, rk4);
        /// defaults to the first scheme in the config.
        #[arg(long)]
        scheme: Option<String>,
        /// Step size in seconds; must divide the 2.4 s recording interval.
        /// Defaults to the first step in the config.
        #[arg(long)]
        h: Option<f64>,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run every (scheme, step) cell against a validated reference and
    /// write the work-precision table plus a gnuplot script.
    Converge {
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Compute only the reference solution and write it with its accuracy
    /// estimate.
    Reference {
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

/// Exit codes: 0 success, 2 configuration problem, 3 crashed run.
enum Failure {
    Config(String),
    Crash(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Crash(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Crash(m) => m,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

/// Honors CARFOLLOW_WORKERS for the study thread pool; unset means one
/// thread per core.
fn init_workers() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("CARFOLLOW_WORKERS") else {
        return Ok(());
    };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| config_err(format!("CARFOLLOW_WORKERS must be a positive integer, got `{raw}`")))?;
    // A pool may already exist (e.g. under a test harness); that is fine.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    Ok(())
}

fn load_config(cli: &Cli) -> Result<ResolvedConfig, Failure> {
    let Some(path) = &cli.config else {
        return Err(config_err("--config <FILE> is required"));
    };
    let study: StudyConfig = config::load(path).map_err(|e| config_err(e.to_string()))?;
    study.resolve().map_err(|e| config_err(e.to_string()))
}

fn prepare_out_dir(resolved: &ResolvedConfig, flag: &Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = flag.clone().unwrap_or_else(|| resolved.output_dir.clone());
    std::fs::create_dir_all(&dir)
        .map_err(|e| config_err(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| config_err(format!("cannot write {}: {e}", path.display())))
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    init_workers()?;
    match &cli.command {
        Command::Simulate { scheme, h, out } => cmd_simulate(cli, scheme, h, out),
        Command::Converge { out } => cmd_converge(cli, out),
        Command::Reference { out } => cmd_reference(cli, out),
    }
}

fn cmd_simulate(
    cli: &Cli,
    scheme: &Option<String>,
    h: &Option<f64>,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let resolved = load_config(cli)?;
    let scheme = match scheme {
        Some(name) => SchemeKind::from_str(name).map_err(config_err)?,
        None => resolved.schemes[0],
    };
    let h = h.unwrap_or(resolved.h_list[0]);
    config::validate_step(h).map_err(|e| config_err(e.to_string()))?;
    let dir = prepare_out_dir(&resolved, out)?;

    let record = match run(&resolved.spec, scheme, h) {
        Ok(record) => record,
        Err(e @ SimError::Crash { .. }) => return Err(Failure::Crash(format!("CRASH: {e}"))),
        Err(e) => return Err(config_err(e.to_string())),
    };

    let path = dir.join(format!("{}_{}_h{}.csv", resolved.spec.label, scheme, h));
    write_file(&path, &output::trajectory_csv(&resolved.spec, &record))?;

    if let Some(info) = record.crash {
        return Err(Failure::Crash(format!(
            "CRASH: {}; partial trajectory written to {}",
            info.to_error(),
            path.display()
        )));
    }
    println!(
        "wrote {} ({} samples x {} vehicles)",
        path.display(),
        record.n_samples(),
        record.n_vehicles()
    );
    Ok(())
}

fn cmd_converge(cli: &Cli, out: &Option<PathBuf>) -> Result<(), Failure> {
    let resolved = load_config(cli)?;
    let dir = prepare_out_dir(&resolved, out)?;

    let study = match convergence_study(&resolved.spec, &resolved.schemes, &resolved.h_list) {
        Ok(study) => study,
        // A crashed reference invalidates the whole study: nothing to
        // measure errors against.
        Err(e @ SimError::Crash { .. }) => {
            return Err(Failure::Crash(format!("CRASH in reference run: {e}")))
        }
        Err(e) => return Err(config_err(e.to_string())),
    };

    let label = &resolved.spec.label;
    let csv_name = format!("{label}_convergence.csv");
    let csv_path = dir.join(&csv_name);
    let plot_path = dir.join(format!("{label}_plot.gp"));
    write_file(&csv_path, &output::convergence_csv(label, &study))?;
    write_file(&plot_path, &output::plot_script(label, &csv_name))?;

    print!("{}", output::converge_report(&study, H_REF));
    println!("wrote {} and {}", csv_path.display(), plot_path.display());
    Ok(())
}

fn cmd_reference(cli: &Cli, out: &Option<PathBuf>) -> Result<(), Failure> {
    let resolved = load_config(cli)?;
    let dir = prepare_out_dir(&resolved, out)?;

    let reference = match compute_reference(&resolved.spec) {
        Ok(reference) => reference,
        Err(e @ SimError::Crash { .. }) => {
            return Err(Failure::Crash(format!("CRASH in reference run: {e}")))
        }
        Err(e) => return Err(config_err(e.to_string())),
    };

    let path = dir.join(format!("{}_reference.csv", resolved.spec.label));
    write_file(&path, &output::reference_csv(&resolved.spec, &reference))?;
    println!(
        "wrote {} (comparator error = {:.3e} m/s)",
        path.display(),
        reference.comparator_error
    );
    Ok(())
}
