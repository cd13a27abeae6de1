//! Batch front end: problem files in, field dumps and summaries out.
//!
//! `run` executes one mode on one problem file and writes, into the output
//! directory, `<stem>.summary.json` (deterministic), `<stem>.timings.json`
//! (wall-clock data, kept apart so summaries stay byte-identical across
//! runs), field dumps and convergence histories.

pub mod expr;
pub mod io;
pub mod problem;
mod run;

pub use expr::{Expr, ParseError};
pub use io::{
    format_field, parse_field, read_field, write_field, write_history, write_summary, FieldDump,
    SolveSummary,
};
pub use problem::{parse_problem, Diagnostic, Mode, ProblemSpec, SpecError};
pub use run::{
    configure_threads, run, CliError, RunOutcome, EXIT_CONVERGED, EXIT_IO, EXIT_NOT_CONVERGED,
    EXIT_SPEC, THREADS_ENV,
};
