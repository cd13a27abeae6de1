//! Problem files: `[section]` headers, `key = value` lines, `#` comments.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::expr::Expr;
use crate::energy::CoefficientTensor;
use crate::grid::{build_grid, DomainSpec, Grid, Mask};
use crate::optimizer::{Init, SolveOptions, StepRule};
use crate::oracle::PicardOptions;
use crate::weights::{make_weight, ScalarFn, Weight, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Oracle,
    Sphere,
    Halfspace,
    Gradcheck,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Solve,
        Mode::Oracle,
        Mode::Sphere,
        Mode::Halfspace,
        Mode::Gradcheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Oracle => "oracle",
            Mode::Sphere => "sphere",
            Mode::Halfspace => "halfspace",
            Mode::Gradcheck => "gradcheck",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode '{s}'"))
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One problem with the file, located by 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for SpecError {}

/// Valid keys per section; the unnamed section holds top-level keys.
const KEYS: &[(&str, &[&str])] = &[
    ("", &["mode"]),
    (
        "domain",
        &["kind", "lower", "upper", "mask", "radius", "resolution"],
    ),
    ("weight", &["kind", "alpha", "beta", "c", "shift"]),
    (
        "boundary",
        &["u1", "u2", "u3", "u4", "u5", "u6", "u7", "u8", "bound"],
    ),
    (
        "tensor",
        &[
            "diag1", "diag2", "diag3", "diag4", "diag5", "diag6", "diag7", "diag8",
        ],
    ),
    ("solver", &["tol", "max_iters", "step", "step_size", "init"]),
    (
        "oracle",
        &["source", "tol", "max_iters", "damping", "compare"],
    ),
    ("sphere", &["candidates", "pole"]),
    (
        "halfspace",
        &["radii", "spacing", "window_lower", "window_upper"],
    ),
    ("gradcheck", &["step"]),
    ("output", &["stem"]),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    column: usize,
}

#[derive(Debug, Clone)]
pub enum DomainShape {
    Box,
    MaskedBox(Expr),
    HalfBall(f64),
}

#[derive(Debug, Clone)]
pub struct DomainSection {
    pub shape: DomainShape,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct HalfspaceSection {
    pub radii: Vec<f64>,
    pub spacing: f64,
    pub window: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct OracleSection {
    pub source: Option<Expr>,
    pub picard: PicardOptions,
    /// Also run the variational solver and report the discrepancy.
    pub compare: bool,
}

#[derive(Debug, Clone)]
pub struct SphereSection {
    pub candidates: usize,
    pub pole: Option<Vec<f64>>,
}

/// A validated problem file.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mode: Mode,
    pub domain: Option<DomainSection>,
    pub weight: WeightSpec,
    pub shift: f64,
    pub boundary: Vec<Expr>,
    pub bound: Option<Vec<f64>>,
    pub tensor: Option<Vec<Expr>>,
    pub solver: SolveOptions,
    pub oracle: OracleSection,
    pub sphere: SphereSection,
    pub halfspace: Option<HalfspaceSection>,
    pub gradcheck_step: f64,
    pub stem: String,
}

struct Reader {
    entries: BTreeMap<(String, String), Entry>,
    sections: BTreeMap<String, usize>,
    diags: Vec<Diagnostic>,
}

fn suggest(word: &str, candidates: impl Iterator<Item = String>) -> Option<String> {
    candidates
        .map(|c| (strsim::levenshtein(word, &c), c))
        .filter(|(d, _)| *d <= 3)
        .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .map(|(_, c)| c)
}

fn section_keys(section: &str) -> Option<&'static [&'static str]> {
    KEYS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k)
}

impl Reader {
    fn read(text: &str) -> Reader {
        let mut r = Reader {
            entries: BTreeMap::new(),
            sections: BTreeMap::new(),
            diags: Vec::new(),
        };
        let mut section = String::new();
        let mut section_ok = true;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            let trimmed = content.trim();
            if trimmed.is_empty() {
                continue;
            }
            let lead = content.len() - content.trim_start().len();
            if let Some(rest) = trimmed.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    r.diag(line, lead + 1, "section header is missing ']'");
                    section_ok = false;
                    continue;
                };
                let name = name.trim().to_string();
                if section_keys(&name).is_none() || name.is_empty() {
                    let hint = suggest(
                        &name,
                        KEYS.iter()
                            .filter(|(s, _)| !s.is_empty())
                            .map(|(s, _)| s.to_string()),
                    )
                    .map(|s| format!("; did you mean [{s}]?"))
                    .unwrap_or_default();
                    r.diag(line, lead + 2, &format!("unknown section [{name}]{hint}"));
                    section_ok = false;
                    continue;
                }
                if r.sections.insert(name.clone(), line).is_some() {
                    r.diag(line, lead + 1, &format!("section [{name}] appears twice"));
                }
                section = name;
                section_ok = true;
                continue;
            }
            if !section_ok {
                continue;
            }
            let Some(eq) = content.find('=') else {
                r.diag(line, lead + 1, "expected 'key = value'");
                continue;
            };
            let key = content[..eq].trim().to_string();
            let value_raw = &content[eq + 1..];
            let value = value_raw.trim().to_string();
            let value_col = eq + 2 + (value_raw.len() - value_raw.trim_start().len());
            let keys = section_keys(&section).unwrap_or(&[]);
            if !keys.contains(&key.as_str()) {
                let hint = suggest(&key, keys.iter().map(|k| k.to_string()))
                    .map(|k| format!("; did you mean '{k}'?"))
                    .unwrap_or_default();
                let place = if section.is_empty() {
                    "at top level".to_string()
                } else {
                    format!("in [{section}]")
                };
                r.diag(
                    line,
                    lead + 1,
                    &format!("unknown key '{key}' {place}{hint}"),
                );
                continue;
            }
            if value.is_empty() {
                r.diag(line, value_col, &format!("key '{key}' has no value"));
                continue;
            }
            let slot = (section.clone(), key.clone());
            if let Some(prev) = r.entries.get(&slot) {
                let msg = format!("key '{key}' already set on line {}", prev.line);
                r.diag(line, lead + 1, &msg);
                continue;
            }
            r.entries.insert(
                slot,
                Entry {
                    value,
                    line,
                    column: value_col,
                },
            );
        }
        r
    }

    fn diag(&mut self, line: usize, column: usize, message: &str) {
        self.diags.push(Diagnostic {
            line: Some(line),
            column: Some(column),
            message: message.to_string(),
        });
    }

    fn get(&self, section: &str, key: &str) -> Option<Entry> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .cloned()
    }

    fn missing(&mut self, section: &str, key: &str, why: &str) {
        let line = self.sections.get(section).copied();
        self.diags.push(Diagnostic {
            line,
            column: None,
            message: format!("missing required key '{key}' in [{section}] ({why})"),
        });
    }

    fn require(&mut self, section: &str, key: &str, why: &str) -> Option<Entry> {
        let e = self.get(section, key);
        if e.is_none() {
            self.missing(section, key, why);
        }
        e
    }

    fn parse<T: FromStr>(&mut self, e: &Entry, what: &str) -> Option<T> {
        match e.value.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.diag(
                    e.line,
                    e.column,
                    &format!("'{}' is not a valid {what}", e.value),
                );
                None
            }
        }
    }

    fn number(&mut self, section: &str, key: &str) -> Option<f64> {
        let e = self.get(section, key)?;
        let v: f64 = self.parse(&e, "number")?;
        if !v.is_finite() {
            self.diag(e.line, e.column, "value must be finite");
            return None;
        }
        Some(v)
    }

    fn list<T: FromStr>(&mut self, e: &Entry, what: &str) -> Option<Vec<T>> {
        let mut out = Vec::new();
        for tok in e
            .value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            match tok.parse::<T>() {
                Ok(v) => out.push(v),
                Err(_) => {
                    let col = e.column + e.value.find(tok).unwrap_or(0);
                    self.diag(e.line, col, &format!("'{tok}' is not a valid {what}"));
                    return None;
                }
            }
        }
        if out.is_empty() {
            self.diag(e.line, e.column, &format!("expected a list of {what}s"));
            return None;
        }
        Some(out)
    }

    fn expr(&mut self, e: &Entry) -> Option<Expr> {
        match Expr::parse(&e.value) {
            Ok(x) => Some(x),
            Err(err) => {
                self.diag(
                    e.line,
                    e.column + err.column - 1,
                    &format!("expression error: {}", err.message),
                );
                None
            }
        }
    }
}

/// Parses and validates a problem file for `mode`.
///
/// Validation builds the grid and evaluates the boundary expressions at
/// every boundary node, so non-finite data is reported before any solve.
pub fn parse_problem(text: &str, mode: Mode) -> Result<ProblemSpec, SpecError> {
    let mut r = Reader::read(text);
    if let Some(e) = r.get("", "mode") {
        match e.value.parse::<Mode>() {
            Ok(m) if m == mode => {}
            Ok(m) => r.diag(
                e.line,
                e.column,
                &format!("file is for mode '{m}', run as '{mode}'"),
            ),
            Err(msg) => r.diag(e.line, e.column, &msg),
        }
    }

    let domain = if mode == Mode::Halfspace {
        None
    } else {
        domain_section(&mut r)
    };
    let halfspace = if mode == Mode::Halfspace {
        halfspace_section(&mut r)
    } else {
        None
    };
    let (weight, shift) = weight_section(&mut r, mode);

    let mut boundary = Vec::new();
    for k in 1..=8 {
        if let Some(e) = r.get("boundary", &format!("u{k}")) {
            if boundary.len() != k - 1 {
                r.diag(
                    e.line,
                    1,
                    &format!("u{k} given without u{}", boundary.len() + 1),
                );
            }
            if let Some(x) = r.expr(&e) {
                boundary.push((x, e));
            }
        }
    }
    if boundary.is_empty() && r.get("boundary", "u1").is_none() {
        r.missing("boundary", "u1", "boundary data");
    }
    let nc = boundary.len();
    match mode {
        Mode::Oracle if nc > 1 => {
            r.diag(boundary[1].1.line, 1, "oracle mode is scalar; give only u1")
        }
        Mode::Sphere if nc == 1 => r.diag(
            boundary[0].1.line,
            1,
            "sphere mode needs u1 .. u(N+1) with N >= 1",
        ),
        _ => {}
    }
    let bound = match r.get("boundary", "bound") {
        Some(e) => r.list::<f64>(&e, "number").and_then(|b| {
            if b.len() != nc && nc > 0 {
                r.diag(
                    e.line,
                    e.column,
                    &format!("bound has {} entries for {nc} components", b.len()),
                );
                None
            } else if b.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                r.diag(e.line, e.column, "bound entries must be positive");
                None
            } else {
                Some(b)
            }
        }),
        None => None,
    };

    let space_dim = domain
        .as_ref()
        .map(|d| d.lower.len())
        .or_else(|| halfspace.as_ref().map(|h| h.window.len()));
    let mut tensor = Vec::new();
    for k in 1..=8 {
        if let Some(e) = r.get("tensor", &format!("diag{k}")) {
            if let Some(x) = r.expr(&e) {
                tensor.push((x, e));
            }
        }
    }
    if let (Some(n), false) = (space_dim, tensor.is_empty()) {
        if tensor.len() != n {
            let line = tensor[0].1.line;
            r.diag(line, 1, &format!("tensor needs diag1 .. diag{n}"));
        }
    }

    let solver = solver_section(&mut r);
    let oracle = oracle_section(&mut r);
    let sphere = SphereSection {
        candidates: match r.get("sphere", "candidates") {
            Some(e) => r.parse::<usize>(&e, "count").unwrap_or(0),
            None => crate::sphere::DEFAULT_CANDIDATES,
        },
        pole: r
            .get("sphere", "pole")
            .and_then(|e| r.list::<f64>(&e, "number")),
    };
    let gradcheck_step = r.number("gradcheck", "step").unwrap_or(1e-5);
    let stem = r
        .get("output", "stem")
        .map(|e| e.value)
        .unwrap_or_else(|| mode.as_str().to_string());

    let mut spec = ProblemSpec {
        mode,
        domain,
        weight: weight.unwrap_or(WeightSpec::Constant { c: 0.0 }),
        shift,
        boundary: boundary.iter().map(|(x, _)| x.clone()).collect(),
        bound,
        tensor: if tensor.is_empty() {
            None
        } else {
            Some(tensor.iter().map(|(x, _)| x.clone()).collect())
        },
        solver,
        oracle,
        sphere,
        halfspace,
        gradcheck_step,
        stem,
    };
    if r.diags.is_empty() {
        validate_values(&mut r, &mut spec, &boundary, &tensor);
    }
    if r.diags.is_empty() {
        Ok(spec)
    } else {
        r.diags
            .sort_by_key(|d| (d.line.unwrap_or(usize::MAX), d.column.unwrap_or(0)));
        Err(SpecError {
            diagnostics: r.diags,
        })
    }
}

fn domain_section(r: &mut Reader) -> Option<DomainSection> {
    let kind = r.get("domain", "kind").map(|e| (e.value.clone(), e));
    let res = r
        .require("domain", "resolution", "nodes per axis")
        .and_then(|e| r.list::<usize>(&e, "node count").map(|v| (v, e)));
    let shape = match kind.as_ref().map(|(k, e)| (k.as_str(), e.clone())) {
        None | Some(("box", _)) => Some(DomainShape::Box),
        Some(("masked_box", e)) => {
            match r.require("domain", "mask", "masked_box selects nodes where mask >= 0") {
                Some(m) => r.expr(&m).map(DomainShape::MaskedBox),
                None => {
                    let _ = e;
                    None
                }
            }
        }
        Some(("half_ball", _)) => match r.require("domain", "radius", "half_ball radius") {
            Some(e) => r.parse::<f64>(&e, "radius").map(DomainShape::HalfBall),
            None => None,
        },
        Some((other, e)) => {
            let hint = suggest(
                other,
                ["box", "masked_box", "half_ball"]
                    .iter()
                    .map(|s| s.to_string()),
            )
            .map(|s| format!("; did you mean '{s}'?"))
            .unwrap_or_default();
            r.diag(
                e.line,
                e.column,
                &format!("unknown domain kind '{other}'{hint}"),
            );
            None
        }
    };
    let (res, res_entry) = res?;
    let shape = shape?;
    let dim = res.len();
    let (lower, upper) = match &shape {
        DomainShape::HalfBall(rad) => {
            let mut lo = vec![-rad; dim];
            let mut hi = vec![*rad; dim];
            lo[dim - 1] = 0.0;
            hi[dim - 1] = *rad;
            (lo, hi)
        }
        _ => {
            let lo = match r.get("domain", "lower") {
                Some(e) => r.list::<f64>(&e, "number")?,
                None => vec![0.0; dim],
            };
            let hi = match r.get("domain", "upper") {
                Some(e) => r.list::<f64>(&e, "number")?,
                None => vec![1.0; dim],
            };
            (lo, hi)
        }
    };
    if lower.len() != dim || upper.len() != dim {
        r.diag(
            res_entry.line,
            res_entry.column,
            "resolution, lower and upper must have the same length",
        );
        return None;
    }
    Some(DomainSection {
        shape,
        lower,
        upper,
        resolution: res,
    })
}

fn halfspace_section(r: &mut Reader) -> Option<HalfspaceSection> {
    let radii = r
        .require("halfspace", "radii", "half-ball radii")
        .and_then(|e| r.list::<f64>(&e, "radius"));
    let spacing = r
        .require("halfspace", "spacing", "grid spacing")
        .and_then(|e| r.parse::<f64>(&e, "spacing"));
    let lo = r
        .require("halfspace", "window_lower", "window corner")
        .and_then(|e| r.list::<f64>(&e, "number"));
    let hi = r
        .require("halfspace", "window_upper", "window corner")
        .and_then(|e| r.list::<f64>(&e, "number").map(|v| (v, e)));
    let (lo, (hi, e)) = (lo?, hi?);
    if lo.len() != hi.len() {
        r.diag(e.line, e.column, "window corners have different lengths");
        return None;
    }
    Some(HalfspaceSection {
        radii: radii?,
        spacing: spacing?,
        window: lo.into_iter().zip(hi).collect(),
    })
}

fn weight_section(r: &mut Reader, mode: Mode) -> (Option<WeightSpec>, f64) {
    let shift = r.number("weight", "shift").unwrap_or(0.0);
    if mode == Mode::Sphere {
        if let Some(e) = r.get("weight", "kind") {
            if e.value != "sphere_chart" {
                r.diag(
                    e.line,
                    e.column,
                    "sphere mode always uses sphere_chart with beta = 2",
                );
            }
        }
        return (Some(WeightSpec::SphereChart { beta: 2.0 }), 0.0);
    }
    let Some(e) = r.require("weight", "kind", "gaussian, sphere_chart or constant") else {
        return (None, shift);
    };
    let spec = match e.value.as_str() {
        "gaussian" => r
            .require("weight", "alpha", "gaussian parameter")
            .and_then(|_| r.number("weight", "alpha"))
            .map(|alpha| WeightSpec::Gaussian { alpha }),
        "sphere_chart" => r
            .require("weight", "beta", "sphere_chart parameter")
            .and_then(|_| r.number("weight", "beta"))
            .map(|beta| WeightSpec::SphereChart { beta }),
        "constant" => Some(WeightSpec::Constant {
            c: r.number("weight", "c").unwrap_or(0.0),
        }),
        other => {
            let hint = suggest(
                other,
                ["gaussian", "sphere_chart", "constant"]
                    .iter()
                    .map(|s| s.to_string()),
            )
            .map(|s| format!("; did you mean '{s}'?"))
            .unwrap_or_default();
            r.diag(
                e.line,
                e.column,
                &format!("unknown weight kind '{other}'{hint}"),
            );
            None
        }
    };
    if let Some(s) = &spec {
        if let Err(err) = make_weight(s.clone()) {
            r.diag(e.line, e.column, &err.to_string());
            return (None, shift);
        }
    }
    (spec, shift)
}

fn solver_section(r: &mut Reader) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(e) = r.get("solver", "tol") {
        opts.tol_pg = r.parse::<f64>(&e, "tolerance").filter(|t| {
            
            *t > 0.0 && t.is_finite()
        });
        if opts.tol_pg.is_none() {
            r.diag(e.line, e.column, "tol must be a positive number");
        }
    }
    if let Some(e) = r.get("solver", "max_iters") {
        match r.parse::<usize>(&e, "iteration count") {
            Some(0) => r.diag(e.line, e.column, "max_iters must be at least 1"),
            Some(n) => opts.max_iters = n,
            None => {}
        }
    }
    if let Some(e) = r.get("solver", "step") {
        match e.value.as_str() {
            "bb" => {}
            "fixed" => if let Some(s) = r.require("solver", "step_size", "fixed step length") { match r.parse::<f64>(&s, "step length") {
                Some(t) if t > 0.0 && t.is_finite() => opts.step = StepRule::Fixed(t),
                Some(_) => r.diag(s.line, s.column, "step_size must be positive"),
                None => {}
            } },
            other => r.diag(
                e.line,
                e.column,
                &format!("step must be 'bb' or 'fixed', got '{other}'"),
            ),
        }
    }
    if let Some(e) = r.get("solver", "init") {
        match e.value.as_str() {
            "harmonic" => opts.init = Init::HarmonicExtension,
            "constant" => opts.init = Init::BoundaryConstant,
            other => r.diag(
                e.line,
                e.column,
                &format!("init must be 'harmonic' or 'constant', got '{other}'"),
            ),
        }
    }
    opts
}

fn oracle_section(r: &mut Reader) -> OracleSection {
    let mut picard = PicardOptions::default();
    if let Some(t) = r.number("oracle", "tol") {
        picard.tolerance = t;
    }
    if let Some(e) = r.get("oracle", "max_iters") {
        if let Some(n) = r.parse::<usize>(&e, "iteration count") {
            picard.max_iters = n;
        }
    }
    if let Some(d) = r.number("oracle", "damping") {
        picard.damping = d;
    }
    let compare = match r.get("oracle", "compare") {
        Some(e) => r
            .parse::<bool>(&e, "boolean (true or false)")
            .unwrap_or(false),
        None => true,
    };
    let source = r.get("oracle", "source").and_then(|e| r.expr(&e));
    OracleSection {
        source,
        picard,
        compare,
    }
}

/// Builds the grid and evaluates every expression where it will be used.
fn validate_values(
    r: &mut Reader,
    spec: &mut ProblemSpec,
    boundary: &[(Expr, Entry)],
    tensor: &[(Expr, Entry)],
) {
    let grids: Vec<Grid> = match spec.grids() {
        Ok(g) => g,
        Err(err) => {
            let line = r
                .sections
                .get(if spec.mode == Mode::Halfspace {
                    "halfspace"
                } else {
                    "domain"
                })
                .copied();
            r.diags.push(Diagnostic {
                line,
                column: None,
                message: err.to_string(),
            });
            return;
        }
    };
    for (expr, e) in boundary.iter().chain(tensor) {
        let dim = grids[0].dim();
        if expr.max_variable() > dim {
            r.diag(
                e.line,
                e.column,
                &format!(
                    "x{} used in a {dim}-dimensional problem",
                    expr.max_variable()
                ),
            );
            continue;
        }
    }
    if !r.diags.is_empty() {
        return;
    }
    for grid in &grids {
        for &node in grid.boundary_nodes() {
            let x = grid.coords(node);
            for (expr, e) in boundary {
                let v = expr.eval(&x).unwrap_or(f64::NAN);
                if !v.is_finite() {
                    r.diag(
                        e.line,
                        e.column,
                        &format!(
                            "'{}' evaluates to {v} at boundary node {x:?}; solve refused",
                            expr.source()
                        ),
                    );
                    return;
                }
            }
        }
        for &cell in grid.cells() {
            let x = grid.cell_center(cell);
            for (expr, e) in tensor {
                let v = expr.eval(&x).unwrap_or(f64::NAN);
                if !v.is_finite() {
                    r.diag(
                        e.line,
                        e.column,
                        &format!("'{}' evaluates to {v} at {x:?}", expr.source()),
                    );
                    return;
                }
            }
        }
    }
    if let Some(src) = &spec.oracle.source {
        if spec.mode == Mode::Oracle {
            let grid = &grids[0];
            for node in 0..grid.node_count() {
                if grid.class(node).in_domain() {
                    let x = grid.coords(node);
                    let v = src.eval(&x).unwrap_or(f64::NAN);
                    if !v.is_finite() {
                        let e = r.get("oracle", "source").expect("source entry exists");
                        r.diag(
                            e.line,
                            e.column,
                            &format!("source evaluates to {v} at {x:?}"),
                        );
                        return;
                    }
                }
            }
        }
    }
}

fn expr_fn(e: &Expr) -> ScalarFn {
    let e = e.clone();
    Arc::new(move |x: &[f64]| e.eval(x).unwrap_or(f64::NAN))
}

impl ProblemSpec {
    pub fn components(&self) -> usize {
        self.boundary.len()
    }

    pub fn domain_spec(&self) -> Option<DomainSpec> {
        let d = self.domain.as_ref()?;
        let extents: Vec<(f64, f64)> = d
            .lower
            .iter()
            .copied()
            .zip(d.upper.iter().copied())
            .collect();
        Some(match &d.shape {
            DomainShape::Box => DomainSpec::new_box(extents),
            DomainShape::MaskedBox(m) => {
                let m = m.clone();
                let mask: Mask = Arc::new(move |x: &[f64]| m.eval(x).is_ok_and(|v| v >= 0.0));
                DomainSpec::masked_box(extents, mask)
            }
            DomainShape::HalfBall(r) => DomainSpec::half_ball(d.resolution.len(), *r),
        })
    }

    /// The problem grid, or one grid per radius in half-space mode.
    pub fn grids(&self) -> crate::Result<Vec<Grid>> {
        if let Some(h) = &self.halfspace {
            let dim = h.window.len();
            return h
                .radii
                .iter()
                .map(|&rad| {
                    let per_side = (rad / h.spacing).round() as usize;
                    let mut res = vec![2 * per_side + 1; dim];
                    res[dim - 1] = per_side + 1;
                    build_grid(&DomainSpec::half_ball(dim, rad), &res)
                })
                .collect();
        }
        let d = self
            .domain
            .as_ref()
            .expect("non-halfspace specs have a domain");
        Ok(vec![build_grid(
            &self.domain_spec().expect("domain present"),
            &d.resolution,
        )?])
    }

    pub fn grid(&self) -> crate::Result<Arc<Grid>> {
        Ok(Arc::new(self.grids()?.swap_remove(0)))
    }

    pub fn weight(&self) -> crate::Result<Weight> {
        Ok(make_weight(self.weight.clone())?.shifted(self.shift))
    }

    /// Boundary data as a point function.
    pub fn boundary_fn(&self) -> crate::halfspace::PointFn {
        let exprs = self.boundary.clone();
        Arc::new(move |x: &[f64]| {
            exprs
                .iter()
                .map(|e| e.eval(x).unwrap_or(f64::NAN))
                .collect()
        })
    }

    pub fn tensor(&self) -> Option<CoefficientTensor> {
        let diag = self.tensor.as_ref()?;
        Some(CoefficientTensor::spatial_diagonal(
            self.components(),
            diag.iter().map(expr_fn).collect(),
        ))
    }

    pub fn source_fn(&self) -> Option<ScalarFn> {
        self.oracle.source.as_ref().map(expr_fn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[domain]
resolution = 9 9

[weight]
kind = gaussian
alpha = 1

[boundary]
u1 = x1
";

    #[test]
    fn minimal_spec_gets_defaults() {
        let s = parse_problem(MINIMAL, Mode::Solve).unwrap();
        assert_eq!(s.components(), 1);
        assert_eq!(s.solver, SolveOptions::default());
        let d = s.domain.as_ref().unwrap();
        assert_eq!(d.lower, vec![0.0, 0.0]);
        assert_eq!(d.upper, vec![1.0, 1.0]);
        assert_eq!(s.stem, "solve");
        assert!(s.tensor.is_none() && s.bound.is_none());
        assert_eq!(s.grid().unwrap().dims(), &[9, 9]);
    }

    #[test]
    fn misspelled_key_names_line_and_suggestion() {
        let text = MINIMAL.replace("[weight]\nkind", "[weight]\nwieght = 1\nkind");
        let err = parse_problem(&text, Mode::Solve).unwrap_err();
        let d = &err.diagnostics[0];
        assert_eq!(d.line, Some(5));
        assert!(d.message.contains("wieght"), "{}", d.message);
        let text = MINIMAL.replace("kind = gaussian", "knid = gaussian");
        let err = parse_problem(&text, Mode::Solve).unwrap_err();
        assert!(
            err.diagnostics
                .iter()
                .any(|d| d.line == Some(5) && d.message.contains("did you mean 'kind'")),
            "{err}"
        );
    }

    #[test]
    fn unknown_top_level_key_suggests_nearest() {
        let err = parse_problem(&format!("wieght = 2\n{MINIMAL}"), Mode::Solve).unwrap_err();
        assert_eq!(err.diagnostics[0].line, Some(1));
        let err =
            parse_problem(&format!("{MINIMAL}[wieght]\nalpha = 1\n"), Mode::Solve).unwrap_err();
        assert!(err.to_string().contains("did you mean [weight]"), "{err}");
    }

    #[test]
    fn failing_boundary_expression_refuses_solve() {
        let text = MINIMAL.replace("u1 = x1", "u1 = 1/ (x1 - x1)");
        let err = parse_problem(&text, Mode::Solve).unwrap_err();
        let d = &err.diagnostics[0];
        assert_eq!(d.line, Some(9));
        assert!(
            d.message.contains("boundary node [0.0, 0.0]"),
            "{}",
            d.message
        );
    }

    #[test]
    fn expression_errors_have_columns() {
        let text = MINIMAL.replace("u1 = x1", "u1 = x1 + * 2");
        let err = parse_problem(&text, Mode::Solve).unwrap_err();
        let d = &err.diagnostics[0];
        assert_eq!((d.line, d.column), (Some(9), Some(11)));
    }

    #[test]
    fn missing_keys_are_listed() {
        let err = parse_problem("[boundary]\nu1 = 0\n", Mode::Solve).unwrap_err();
        let text = err.to_string();
        assert!(
            text.contains("'resolution'") && text.contains("'kind'"),
            "{text}"
        );
        let err = parse_problem("", Mode::Halfspace).unwrap_err();
        assert!(err.to_string().contains("'radii'"));
    }

    #[test]
    fn mode_mismatch_is_reported() {
        let err = parse_problem(&format!("mode = sphere\n{MINIMAL}"), Mode::Solve).unwrap_err();
        assert_eq!(err.diagnostics[0].line, Some(1));
        assert!(parse_problem(&format!("mode = solve\n{MINIMAL}"), Mode::Solve).is_ok());
    }

    #[test]
    fn full_spec() {
        let text = "\
mode = solve   # trailing comment
[domain]
kind = masked_box
lower = -1, -1
upper = 1, 1
mask = 1 - x1^2 - x2^2
resolution = 17 17
[weight]
kind = constant
c = 0.5
shift = 1
[boundary]
u1 = x1
u2 = x2
bound = 2 2
[tensor]
diag1 = 1
diag2 = 2 + x1
[solver]
tol = 1e-9
max_iters = 100
step = fixed
step_size = 0.1
init = constant
[output]
stem = run1
";
        let s = parse_problem(text, Mode::Solve).unwrap();
        assert_eq!(s.components(), 2);
        assert_eq!(s.bound, Some(vec![2.0, 2.0]));
        assert_eq!(s.solver.tol_pg, Some(1e-9));
        assert_eq!(s.solver.step, StepRule::Fixed(0.1));
        assert_eq!(s.solver.init, Init::BoundaryConstant);
        assert_eq!(s.stem, "run1");
        assert_eq!(s.weight().unwrap().shift(), 1.0);
        let g = s.grid().unwrap();
        assert!(g.interior_nodes().len() < 15 * 15);
        assert!(s.tensor().is_some());
    }

    #[test]
    fn halfspace_spec() {
        let text = "\
[weight]
kind = gaussian
alpha = 1
[boundary]
u1 = exp(-(x1^2 + x2^2))
[halfspace]
radii = 1 2
spacing = 0.25
window_lower = 0 0
window_upper = 0.5 0.5
";
        let s = parse_problem(text, Mode::Halfspace).unwrap();
        assert_eq!(s.grids().unwrap().len(), 2);
        assert!(s.domain.is_none());
    }
}
