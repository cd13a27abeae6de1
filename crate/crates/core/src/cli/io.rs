//! Field dumps, summaries and convergence histories.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::grid::{Field, NodeClass};
use crate::optimizer::SolveReport;

/// Contents of a field dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub components: usize,
    pub classes: Vec<NodeClass>,
    /// Node-major values, `components` per node.
    pub values: Vec<f64>,
}

impl FieldDump {
    pub fn from_field(field: &Field) -> Self {
        let g = field.grid();
        Self {
            dims: g.dims().to_vec(),
            spacing: g.spacing().to_vec(),
            origin: g.origin().to_vec(),
            components: field.components(),
            classes: g.classes().to_vec(),
            values: field.values().to_vec(),
        }
    }
}

fn join(values: impl Iterator<Item = String>) -> String {
    values.collect::<Vec<_>>().join(" ")
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Text form of a field: four header lines, then one line per node in
/// row-major order with its indices, class and values.
pub fn format_field(field: &Field) -> String {
    let g = field.grid();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dims: {}",
        join(g.dims().iter().map(|d| d.to_string()))
    );
    let _ = writeln!(
        out,
        "spacing: {}",
        join(g.spacing().iter().map(|&h| float(h)))
    );
    let _ = writeln!(out, "components: {}", field.components());
    let _ = writeln!(
        out,
        "origin: {}",
        join(g.origin().iter().map(|&o| float(o)))
    );
    for node in 0..g.node_count() {
        let idx = join(g.multi_index(node).into_iter().map(|i| i.to_string()));
        let vals = join(field.node(node).iter().map(|&v| float(v)));
        let _ = writeln!(out, "{idx} {} {vals}", g.class(node).as_str());
    }
    out
}

pub fn write_field(field: &Field, path: &Path) -> io::Result<()> {
    fs::write(path, format_field(field))
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn header<'a>(line: Option<&'a str>, key: &str) -> io::Result<&'a str> {
    line.and_then(|l| l.strip_prefix(key))
        .and_then(|l| l.strip_prefix(':'))
        .map(str::trim)
        .ok_or_else(|| bad(format!("expected '{key}:' header")))
}

fn numbers<T: std::str::FromStr>(s: &str, what: &str) -> io::Result<Vec<T>> {
    s.split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| bad(format!("bad {what} '{t}'"))))
        .collect()
}

pub fn parse_field(text: &str) -> io::Result<FieldDump> {
    let mut lines = text.lines();
    let dims: Vec<usize> = numbers(header(lines.next(), "dims")?, "dimension")?;
    let spacing: Vec<f64> = numbers(header(lines.next(), "spacing")?, "spacing")?;
    let components: usize = header(lines.next(), "components")?
        .parse()
        .map_err(|_| bad("bad component count"))?;
    let origin: Vec<f64> = numbers(header(lines.next(), "origin")?, "origin")?;
    let n = dims.len();
    if spacing.len() != n || origin.len() != n {
        return Err(bad("header lengths disagree"));
    }
    let count: usize = dims.iter().product();
    let mut classes = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count * components);
    for (node, line) in lines.enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != n + 1 + components {
            return Err(bad(format!("node line {node} has {} fields", toks.len())));
        }
        let class = match toks[n] {
            "interior" => NodeClass::Interior,
            "boundary" => NodeClass::Boundary,
            "exterior" => NodeClass::Exterior,
            other => return Err(bad(format!("unknown node class '{other}'"))),
        };
        classes.push(class);
        for t in &toks[n + 1..] {
            values.push(
                t.parse::<f64>()
                    .map_err(|_| bad(format!("bad value '{t}'")))?,
            );
        }
    }
    if classes.len() != count {
        return Err(bad(format!(
            "expected {count} node lines, found {}",
            classes.len()
        )));
    }
    Ok(FieldDump {
        dims,
        spacing,
        origin,
        components,
        classes,
        values,
    })
}

pub fn read_field(path: &Path) -> io::Result<FieldDump> {
    parse_field(&fs::read_to_string(path)?)
}

/// Summary of one minimization, in a fixed key order.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub stop_reason: String,
    pub iterations: usize,
    pub final_energy: f64,
    pub initial_energy: f64,
    pub pg_norm: f64,
    pub tol_pg: f64,
    pub el_residual_norm: f64,
    pub kkt_residual: f64,
    pub active_constraints: usize,
    pub line_search_failures: usize,
    pub q_norms: Vec<QNorm>,
    pub symmetrization_delta: f64,
    pub sup_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QNorm {
    pub q: f64,
    pub value: f64,
}

impl SolveSummary {
    pub fn from_report(report: &SolveReport) -> Self {
        Self {
            converged: report.converged,
            stop_reason: format!("{:?}", report.stop_reason),
            iterations: report.iterations,
            final_energy: report.final_energy(),
            initial_energy: report.energy_history[0],
            pg_norm: report.final_pg(),
            tol_pg: report.tol_pg,
            el_residual_norm: 0.0,
            kkt_residual: report.final_pg(),
            active_constraints: report.active_constraints,
            line_search_failures: report.line_search_failures,
            q_norms: Vec::new(),
            symmetrization_delta: 0.0,
            sup_norm: 0.0,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_summary<T: Serialize>(summary: &T, path: &Path) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(summary).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// `iteration,energy,pg_norm` per iterate, no header.
pub fn format_history(report: &SolveReport) -> String {
    let mut out = String::new();
    for (k, (e, pg)) in report
        .energy_history
        .iter()
        .zip(&report.pg_history)
        .enumerate()
    {
        let _ = writeln!(out, "{k},{},{}", float(*e), float(*pg));
    }
    out
}

pub fn write_history(report: &SolveReport, path: &Path) -> io::Result<()> {
    fs::write(path, format_history(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec, Mask};
    use std::sync::Arc;

    #[test]
    fn field_round_trip_is_bit_exact() {
        let dom = DomainSpec::masked_box(
            vec![(-1.0, 1.0), (0.0, 0.7)],
            Arc::new(|x: &[f64]| x[0] * x[0] + x[1] < 0.9) as Mask,
        );
        let g = Arc::new(build_grid(&dom, &[13, 7]).unwrap());
        let f = Field::from_fn(g, 2, |x| {
            vec![(x[0] * 7.1).sin() / 3.0, -1e-300 * x[1] + 0.1]
        })
        .unwrap();
        let text = format_field(&f);
        let back = parse_field(&text).unwrap();
        assert_eq!(back, FieldDump::from_field(&f));
        for (a, b) in back.values.iter().zip(f.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(text.lines().count(), 4 + 13 * 7);
    }

    #[test]
    fn constant_field_has_identical_columns() {
        let g = Arc::new(build_grid(&DomainSpec::unit_box(2), &[4, 5]).unwrap());
        let f = Field::from_fn(g, 1, |_| vec![0.25]).unwrap();
        let text = format_field(&f);
        let cols: Vec<&str> = text
            .lines()
            .skip(4)
            .map(|l| l.rsplit(' ').next().unwrap())
            .collect();
        assert!(cols.iter().all(|c| *c == cols[0]));
        assert_eq!(cols.len(), 20);
    }

    #[test]
    fn malformed_dumps_are_rejected() {
        assert!(parse_field("dims: 2\n").is_err());
        assert!(
            parse_field("dims: 2\nspacing: 1\ncomponents: 1\norigin: 0\n0 interior 1\n").is_err()
        );
        assert!(
            parse_field("dims: 1\nspacing: 1\ncomponents: 1\norigin: 0\n0 inside 1\n").is_err()
        );
    }
}
