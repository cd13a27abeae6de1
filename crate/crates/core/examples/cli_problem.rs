//! Parses a problem file from `problems/` and runs it the way the binary
//! does, printing the files written.
//!
//! Run: `cargo run --release --example cli_problem -- problems/solve_gaussian.spec`

use std::path::PathBuf;

use quasilinear::cli::{parse_problem, run, Mode};

fn main() {
    let path: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| {
            concat!(env!("CARGO_MANIFEST_DIR"), "/problems/solve_gaussian.spec").into()
        })
        .into();
    let text = std::fs::read_to_string(&path).expect("readable problem file");
    let mode = text
        .lines()
        .find_map(|l| {
            l.strip_prefix("mode")
                .and_then(|r| r.trim().strip_prefix('='))
        })
        .map(|m| m.trim().parse::<Mode>().expect("known mode"))
        .unwrap_or(Mode::Solve);
    match parse_problem(&text, mode) {
        Ok(spec) => println!(
            "{} problem with {} component(s)",
            spec.mode,
            spec.components()
        ),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(3);
        }
    }
    let out = std::env::temp_dir().join("quasilinear-example");
    match run(mode, &path, &out, 0) {
        Ok(outcome) => {
            println!("{}", outcome.message);
            for f in &outcome.files {
                println!("  wrote {}", f.display());
            }
        }
        Err(e) => eprintln!("{e}"),
    }
}
