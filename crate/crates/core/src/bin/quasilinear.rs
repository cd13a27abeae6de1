use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use quasilinear::cli::{self, Mode, EXIT_CONVERGED, EXIT_SPEC};

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Solve,
    Oracle,
    Sphere,
    Halfspace,
    Gradcheck,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Solve => Mode::Solve,
            ModeArg::Oracle => Mode::Oracle,
            ModeArg::Sphere => Mode::Sphere,
            ModeArg::Halfspace => Mode::Halfspace,
            ModeArg::Gradcheck => Mode::Gradcheck,
        }
    }
}

/// Bounded weak solutions of weighted quasi-linear elliptic systems.
///
/// Exit status: 0 converged, 2 not converged, 3 spec error, 4 I/O error.
/// The worker thread count is read from QUASILINEAR_THREADS.
#[derive(Parser)]
#[command(version)]
struct Args {
    mode: ModeArg,
    /// Problem file.
    #[arg(long)]
    spec: PathBuf,
    /// Directory for dumps and summaries.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Seed for randomized modes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_SPEC as u8
            } else {
                EXIT_CONVERGED as u8
            });
        }
    };
    if let Err(msg) = cli::configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_SPEC as u8);
    }
    match cli::run(args.mode.into(), &args.spec, &args.out_dir, args.seed) {
        Ok(outcome) => {
            println!("{}", outcome.message);
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
