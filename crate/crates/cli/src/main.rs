use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qrobust_cli::report::SimInputs;
use qrobust_cli::{render, run, CliError, Command, Failure, Format, RunConfig};
use qrobust_core::Tolerances;

#[derive(Parser, Debug)]
#[command(name = "qrobust", version)]
#[command(about = "Worst-case quadratic cost bounds for open quantum harmonic oscillators")]
struct Args {
    /// Pipeline stage to run; earlier stages run first.
    #[arg(value_enum)]
    command: Command,

    /// JSON model file with n, m, Theta, K, M, Pi.
    #[arg(long)]
    model: PathBuf,

    /// Comma-separated relative-entropy thresholds.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    eps: Vec<f64>,

    /// Decay rate for the certificate; optimized over a grid when omitted.
    #[arg(long)]
    mu: Option<f64>,

    /// Number of decay rates tried when optimizing mu.
    #[arg(long)]
    grid: Option<usize>,

    #[arg(long, value_enum, default_value = "json")]
    format: Format,

    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// JSON file overriding any of the default tolerances.
    #[arg(long)]
    tolerances: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Risk-sensitivity for the Monte Carlo exponential moment.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,

    /// Monte Carlo trajectories.
    #[arg(long, default_value_t = 2000)]
    paths: usize,

    /// Euler-Maruyama step; 1e-3 min(1, 1/|A|) if omitted.
    #[arg(long)]
    dt: Option<f64>,

    #[arg(long, default_value_t = 50.0)]
    horizon: f64,
}

fn load_tolerances(path: Option<&PathBuf>) -> Result<Tolerances, CliError> {
    let Some(path) = path else {
        return Ok(Tolerances::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("tolerances file {}: {e}", path.display())))
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(args: &Args) -> Result<String, Failure> {
    let cfg = RunConfig {
        command: args.command,
        model_path: args.model.clone(),
        eps: args.eps.clone(),
        mu: args.mu,
        mu_grid: args.grid,
        tolerances: load_tolerances(args.tolerances.as_ref())?,
        sim: SimInputs {
            horizon: args.horizon,
            dt: args.dt,
            paths: args.paths,
            seed: args.seed,
            theta: args.theta,
        },
        format: args.format,
    };
    let report = run(&cfg)?;
    Ok(render(&report, cfg.format)?)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let failure = match execute(&args) {
        Ok(text) => match emit(args.out.as_ref(), &text) {
            Ok(()) => return ExitCode::SUCCESS,
            Err(e) => Failure::from(e),
        },
        Err(f) => f,
    };
    eprintln!("qrobust: {}", failure.error);
    let body = serde_json::to_string_pretty(&failure.to_json()).expect("error object serializes") + "\n";
    if emit(args.out.as_ref(), &body).is_err() {
        print!("{body}");
    }
    ExitCode::from(failure.error.exit_code() as u8)
}
