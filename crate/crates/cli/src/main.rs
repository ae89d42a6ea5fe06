mod run;
mod scenario;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use run::CliError;
use scenario::{parse_config, preset, RunMode, Scenario, PRESETS};

/// Cavity QED simulator: steady states, QRT spectra, quantum trajectories.
#[derive(Parser, Debug)]
#[command(name = "cqed", version)]
struct Args {
    /// Preset name (fig5, fig7, fig8, fig9, fig10, fig12, fig13) or a scenario file.
    #[arg(long)]
    scenario: String,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Trajectory windows (correlate) or trajectories (trajectory-dump).
    #[arg(long)]
    starts: Option<u64>,
    /// µs.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    nmax: Option<usize>,
    /// qrt, correlate, trajectory-dump, fwhm-scan or params.
    #[arg(long)]
    mode: Option<RunMode>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

fn load(args: &Args) -> Result<Scenario, String> {
    let mut s = match preset(&args.scenario) {
        Some(s) => s,
        None => {
            let path = PathBuf::from(&args.scenario);
            let text = fs::read_to_string(&path).map_err(|e| {
                format!("'{}' is neither a preset ({}) nor a readable file: {e}", args.scenario, PRESETS.join(", "))
            })?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
            parse_config(&text, stem)?
        }
    };
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = args.starts {
        s.starts = v;
    }
    if let Some(v) = args.duration {
        s.duration = v;
    }
    if let Some(v) = args.nmax {
        s.n_max = Some(v);
    }
    if let Some(v) = args.mode {
        s.mode = v;
    }
    s.validate()?;
    Ok(s)
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    if let Some(n) = args.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let s = match load(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run::run(&s, &args.out, args.force) {
        Ok(()) => {
            println!("{} ({}) written to {}", s.name, s.mode, args.out.display());
            ExitCode::SUCCESS
        }
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}\nhint: {}", run::hint(&e));
            ExitCode::from(3)
        }
    }
}
