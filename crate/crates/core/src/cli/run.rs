use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::io::{write_field, write_history, write_summary, QNorm, SolveSummary};
use super::problem::{parse_problem, Mode, ProblemSpec, SpecError};
use crate::energy::{el_residual, energy, gradient_check, CoefficientTensor, EnergyFunctional};
use crate::error::Error;
use crate::grid::{sample_boundary, BoundaryData, Field, Grid};
use crate::halfspace::solve_exhaustion;
use crate::optimizer::{kkt_residual, minimize, AdmissibleSet, SolveReport};
use crate::oracle::{solve_scalar_exact, solve_scalar_source, SourceField};
use crate::sphere::{
    boundary_points, choose_poles, pair_pole, solve_harmonic_pair_with_pole, ChartPole,
    SphereMapResult, SpherePoint,
};
use crate::weights::Weight;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_SPEC: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "QUASILINEAR_THREADS";

/// Gradient checks pass below this relative error.
const GRADCHECK_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Spec(#[from] SpecError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) => EXIT_SPEC,
            CliError::Io { .. } => EXIT_IO,
            CliError::Solver(Error::LinearSolve { .. } | Error::Picard { .. }) => {
                EXIT_NOT_CONVERGED
            }
            CliError::Solver(_) => EXIT_SPEC,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Result of a run that produced its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub converged: bool,
    /// Files written, in order.
    pub files: Vec<PathBuf>,
    /// One-line human-readable result.
    pub message: String,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.converged {
            EXIT_CONVERGED
        } else {
            EXIT_NOT_CONVERGED
        }
    }
}

/// Reads the thread count from [`THREADS_ENV`] and sizes the global pool.
/// Results do not depend on the count.
pub fn configure_threads() -> Result<Option<usize>, String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    Ok(Some(n))
}

struct Output {
    dir: PathBuf,
    stem: String,
    files: Vec<PathBuf>,
}

impl Output {
    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}.{suffix}", self.stem))
    }

    fn field(&mut self, suffix: &str, field: &Field) -> Result<(), CliError> {
        let p = self.path(suffix);
        write_field(field, &p).map_err(io_err(&p))?;
        self.files.push(p);
        Ok(())
    }

    fn history(&mut self, suffix: &str, report: &SolveReport) -> Result<(), CliError> {
        let p = self.path(suffix);
        write_history(report, &p).map_err(io_err(&p))?;
        self.files.push(p);
        Ok(())
    }

    fn summary<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<(), CliError> {
        let p = self.path(suffix);
        write_summary(value, &p).map_err(io_err(&p))?;
        self.files.push(p);
        Ok(())
    }
}

#[derive(Serialize)]
struct Timings {
    wall_time_s: f64,
    solver_time_s: Vec<f64>,
    threads: usize,
}

#[derive(Serialize)]
struct ProblemInfo {
    mode: String,
    weight: String,
    weight_shift: f64,
    dims: Vec<usize>,
    spacing: Vec<f64>,
    interior_nodes: usize,
    components: usize,
    bound: Vec<f64>,
    anisotropic: bool,
    seed: u64,
}

/// Parses `spec_path`, runs `mode` and writes outputs into `out_dir`.
pub fn run(
    mode: Mode,
    spec_path: &Path,
    out_dir: &Path,
    seed: u64,
) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let text = fs::read_to_string(spec_path).map_err(io_err(spec_path))?;
    let spec = parse_problem(&text, mode)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut out = Output {
        dir: out_dir.to_path_buf(),
        stem: spec.stem.clone(),
        files: Vec::new(),
    };
    let (converged, message, solver_times) = match mode {
        Mode::Solve => run_solve(&spec, seed, &mut out)?,
        Mode::Oracle => run_oracle(&spec, seed, &mut out)?,
        Mode::Sphere => run_sphere(&spec, seed, &mut out)?,
        Mode::Halfspace => run_halfspace(&spec, seed, &mut out)?,
        Mode::Gradcheck => run_gradcheck(&spec, seed, &mut out)?,
    };
    let timings = Timings {
        wall_time_s: start.elapsed().as_secs_f64(),
        solver_time_s: solver_times,
        threads: rayon::current_num_threads(),
    };
    out.summary("timings.json", &timings)?;
    Ok(RunOutcome {
        converged,
        files: out.files,
        message,
    })
}

type ModeResult = Result<(bool, String, Vec<f64>), CliError>;

fn admissible(spec: &ProblemSpec, data: BoundaryData) -> Result<AdmissibleSet, Error> {
    match &spec.bound {
        Some(b) => AdmissibleSet::new(b.clone(), data),
        None => AdmissibleSet::tight(data),
    }
}

fn info(spec: &ProblemSpec, grid: &Grid, w: &Weight, bound: &[f64], seed: u64) -> ProblemInfo {
    ProblemInfo {
        mode: spec.mode.to_string(),
        weight: w.label().to_string(),
        weight_shift: w.shift(),
        dims: grid.dims().to_vec(),
        spacing: grid.spacing().to_vec(),
        interior_nodes: grid.interior_nodes().len(),
        components: spec.components(),
        bound: bound.to_vec(),
        anisotropic: spec.tensor.is_some(),
        seed,
    }
}

fn interior_sup(field: &Field) -> f64 {
    let nc = field.components();
    field
        .grid()
        .interior_nodes()
        .iter()
        .flat_map(|&n| field.values()[n * nc..(n + 1) * nc].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Full diagnostics for a minimizer.
fn solve_summary(
    u: &Field,
    report: &SolveReport,
    w: &Weight,
    adm: &AdmissibleSet,
    tensor: Option<&CoefficientTensor>,
) -> Result<SolveSummary, Error> {
    let mut s = SolveSummary::from_report(report);
    let e = energy(u, w, tensor)?;
    s.el_residual_norm = interior_sup(&el_residual(u, w, tensor)?);
    s.kkt_residual = kkt_residual(u, w, adm, tensor)?;
    s.q_norms = e
        .q_norms
        .iter()
        .map(|&(q, value)| QNorm { q, value })
        .collect();
    s.symmetrization_delta = e.symmetrization_delta;
    s.sup_norm = u.sup_norm();
    Ok(s)
}

fn run_solve(spec: &ProblemSpec, seed: u64, out: &mut Output) -> ModeResult {
    #[derive(Serialize)]
    struct Summary {
        problem: ProblemInfo,
        solve: SolveSummary,
    }
    let grid = spec.grid()?;
    let w = spec.weight()?;
    let tensor = spec.tensor();
    let adm = admissible(spec, sample_boundary(&grid, |x| (spec.boundary_fn())(x))?)?;
    let (u, report) = minimize(&grid, &w, &adm, tensor.as_ref(), &spec.solver)?;
    let summary = Summary {
        problem: info(spec, &grid, &w, adm.bound(), seed),
        solve: solve_summary(&u, &report, &w, &adm, tensor.as_ref())?,
    };
    out.field("field", &u)?;
    out.history("history.csv", &report)?;
    out.summary("summary.json", &summary)?;
    let msg = format!(
        "{} after {} iterations: energy {:.12e}, projected gradient {:.3e}",
        if report.converged {
            "converged"
        } else {
            "not converged"
        },
        report.iterations,
        report.final_energy(),
        report.final_pg()
    );
    Ok((report.converged, msg, vec![report.wall_time.as_secs_f64()]))
}

fn run_oracle(spec: &ProblemSpec, seed: u64, out: &mut Output) -> ModeResult {
    #[derive(Serialize)]
    struct Comparison {
        sup_difference: f64,
        solve: SolveSummary,
    }
    #[derive(Serialize)]
    struct Summary {
        problem: ProblemInfo,
        converged: bool,
        picard_sweeps: usize,
        failure: Option<String>,
        el_residual_norm: f64,
        sup_norm: f64,
        energy: f64,
        comparison: Option<Comparison>,
    }
    let grid = spec.grid()?;
    let w = spec.weight()?;
    let data = sample_boundary(&grid, |x| (spec.boundary_fn())(x))?;
    let adm = admissible(spec, data.clone())?;
    let problem = info(spec, &grid, &w, adm.bound(), seed);
    let source = match spec.source_fn() {
        Some(h) => Some(SourceField::from_fn(&grid, |x| h(x))?),
        None => None,
    };
    let timer = Instant::now();
    let solved = match &source {
        Some(src) => {
            solve_scalar_source(&grid, &w, &data, src, spec.oracle.picard)
        }
        None => solve_scalar_exact(&grid, &w, &data).map(|u| (u, 0)),
    };
    let mut times = vec![timer.elapsed().as_secs_f64()];
    let (u, sweeps) = match solved {
        Ok(v) => v,
        Err(Error::Picard {
            iterations,
            residual,
        }) => {
            let summary = Summary {
                problem,
                converged: false,
                picard_sweeps: iterations,
                failure: Some(format!(
                    "fixed-point iteration stopped at change {residual:e}"
                )),
                el_residual_norm: f64::MAX,
                sup_norm: 0.0,
                energy: 0.0,
                comparison: None,
            };
            out.summary("summary.json", &summary)?;
            return Ok((
                false,
                format!("fixed-point iteration did not converge in {iterations} sweeps"),
                times,
            ));
        }
        Err(e) => return Err(e.into()),
    };
    let mut residual = el_residual(&u, &w, None)?;
    if let Some(src) = &source {
        for &node in grid.interior_nodes() {
            residual.values_mut()[node] -= src.0[node];
        }
    }
    let mut converged = true;
    let comparison = if spec.oracle.compare && source.is_none() {
        let (v, report) = minimize(&grid, &w, &adm, None, &spec.solver)?;
        times.push(report.wall_time.as_secs_f64());
        converged = report.converged;
        out.field("minimize.field", &v)?;
        out.history("history.csv", &report)?;
        Some(Comparison {
            sup_difference: v.sup_distance(&u)?,
            solve: solve_summary(&v, &report, &w, &adm, None)?,
        })
    } else {
        None
    };
    let summary = Summary {
        problem,
        converged,
        picard_sweeps: sweeps,
        failure: None,
        el_residual_norm: interior_sup(&residual),
        sup_norm: u.sup_norm(),
        energy: energy(&u, &w, None)?.value,
        comparison,
    };
    out.field("field", &u)?;
    out.summary("summary.json", &summary)?;
    let mut msg = format!(
        "oracle solution written; residual {:.3e}",
        summary.el_residual_norm
    );
    if let Some(c) = &summary.comparison {
        msg.push_str(&format!(
            "; variational solution differs by {:.3e}",
            c.sup_difference
        ));
    }
    Ok((converged, msg, times))
}

fn run_sphere(spec: &ProblemSpec, seed: u64, out: &mut Output) -> ModeResult {
    #[derive(Serialize)]
    struct MapSummary {
        pole: Vec<f64>,
        chart_energy: f64,
        dirichlet_energy: f64,
        harmonic_residual: f64,
        solve: SolveSummary,
    }
    #[derive(Serialize)]
    struct Summary {
        problem: ProblemInfo,
        converged: bool,
        pole_margin: f64,
        energies: [f64; 2],
        sup_distance: f64,
        maps: [MapSummary; 2],
    }
    let grid = spec.grid()?;
    let data = sample_boundary(&grid, |x| (spec.boundary_fn())(x))?;
    let points = boundary_points(&data)?;
    let choice = match &spec.sphere.pole {
        Some(p) => {
            let pole = ChartPole::new(SpherePoint::normalized(p.clone())?);
            let margin = points.iter().fold(f64::INFINITY, |m, s| {
                let d = |sign: f64| {
                    s.coords()
                        .iter()
                        .zip(pole.pole().coords())
                        .map(|(a, b)| (a - sign * b).powi(2))
                        .sum::<f64>()
                        .sqrt()
                };
                m.min(d(1.0).min(d(-1.0)))
            });
            crate::sphere::PoleChoice { pole, margin }
        }
        None if spec.sphere.candidates > 0 => pair_pole(&points, spec.sphere.candidates)?,
        None => choose_poles(&points, spec.sphere.candidates)?,
    };
    let (a, b) = solve_harmonic_pair_with_pole(&grid, &data, &choice.pole, &spec.solver)?;
    let w = crate::weights::make_weight(spec.weight.clone())?;
    let map_summary = |r: &SphereMapResult| -> Result<MapSummary, Error> {
        let adm = chart_admissible(r)?;
        Ok(MapSummary {
            pole: r.pole.pole().coords().to_vec(),
            chart_energy: r.chart_energy,
            dirichlet_energy: r.dirichlet_energy,
            harmonic_residual: r.residual,
            solve: solve_summary(&r.chart, &r.report, &w, &adm, None)?,
        })
    };
    let converged = a.report.converged && b.report.converged;
    let summary = Summary {
        problem: info(spec, &grid, &w, &[], seed),
        converged,
        pole_margin: choice.margin,
        energies: [a.dirichlet_energy, b.dirichlet_energy],
        sup_distance: a.sup_distance(&b)?,
        maps: [map_summary(&a)?, map_summary(&b)?],
    };
    out.field("pole.field", &a.sphere)?;
    out.field("antipole.field", &b.sphere)?;
    out.history("pole.history.csv", &a.report)?;
    out.history("antipole.history.csv", &b.report)?;
    out.summary("summary.json", &summary)?;
    let msg = format!(
        "Dirichlet energies {:.6} and {:.6}; sup distance {:.4}",
        a.dirichlet_energy, b.dirichlet_energy, summary.sup_distance
    );
    Ok((
        converged,
        msg,
        vec![
            a.report.wall_time.as_secs_f64(),
            b.report.wall_time.as_secs_f64(),
        ],
    ))
}

/// Rebuilds the chart's admissible set from the solved field.
fn chart_admissible(r: &SphereMapResult) -> Result<AdmissibleSet, Error> {
    let data = BoundaryData::from_field(&r.chart);
    let bound = data
        .abs_max()
        .into_iter()
        .map(|c| c + crate::sphere::CHART_MARGIN)
        .collect();
    AdmissibleSet::new(bound, data)
}

fn run_halfspace(spec: &ProblemSpec, seed: u64, out: &mut Output) -> ModeResult {
    #[derive(Serialize)]
    struct Radius {
        radius: f64,
        nodes: Vec<usize>,
        converged: bool,
        iterations: usize,
        pg_norm: f64,
        sup_norm: f64,
        energy: f64,
        competitor_energy: f64,
        window_energy: f64,
        window_difference: Option<f64>,
    }
    #[derive(Serialize)]
    struct Summary {
        mode: String,
        weight: String,
        seed: u64,
        spacing: f64,
        window: Vec<(f64, f64)>,
        bound: Vec<f64>,
        converged: bool,
        uniform_bound: bool,
        energy_bounded: bool,
        window_differences: Vec<f64>,
        radii: Vec<Radius>,
    }
    let h = spec
        .halfspace
        .as_ref()
        .expect("halfspace specs have the section");
    let w = spec.weight()?;
    let report = solve_exhaustion(
        spec.boundary_fn(),
        spec.components(),
        &w,
        &h.radii,
        h.spacing,
        &h.window,
        &spec.solver,
    )?;
    for (i, rec) in report.records.iter().enumerate() {
        out.field(&format!("window{i}.field"), &rec.window_field)?;
    }
    let converged = report.converged();
    let summary = Summary {
        mode: spec.mode.to_string(),
        weight: w.label().to_string(),
        seed,
        spacing: report.spacing,
        window: report.window.clone(),
        bound: report.bound.clone(),
        converged,
        uniform_bound: report.uniform_bound,
        energy_bounded: report.energy_bounded,
        window_differences: report.window_differences(),
        radii: report
            .records
            .iter()
            .map(|r| Radius {
                radius: r.radius,
                nodes: r.nodes.clone(),
                converged: r.converged,
                iterations: r.iterations,
                pg_norm: r.final_pg,
                sup_norm: r.sup_norm,
                energy: r.energy,
                competitor_energy: r.competitor_energy,
                window_energy: r.window_energy,
                window_difference: r.window_difference,
            })
            .collect(),
    };
    out.summary("summary.json", &summary)?;
    let msg = format!(
        "window differences {:?}; uniform bound {}",
        summary.window_differences, summary.uniform_bound
    );
    Ok((converged, msg, Vec::new()))
}

fn run_gradcheck(spec: &ProblemSpec, seed: u64, out: &mut Output) -> ModeResult {
    #[derive(Serialize)]
    struct Summary {
        problem: ProblemInfo,
        step: f64,
        checked: usize,
        max_abs_error: f64,
        scale: f64,
        max_rel_error: f64,
        tolerance: f64,
        passed: bool,
    }
    let grid = spec.grid()?;
    let w = spec.weight()?;
    let tensor = spec.tensor();
    let adm = admissible(spec, sample_boundary(&grid, |x| (spec.boundary_fn())(x))?)?;
    let u = random_admissible(&grid, &adm, seed)?;
    let timer = Instant::now();
    let check = gradient_check(&u, &w, tensor.as_ref(), spec.gradcheck_step)?;
    let passed = check.max_rel_error <= GRADCHECK_TOL;
    // the functional must accept the sampled field
    EnergyFunctional::new(grid.clone(), w.clone(), adm.components(), tensor.as_ref())?;
    let summary = Summary {
        problem: info(spec, &grid, &w, adm.bound(), seed),
        step: spec.gradcheck_step,
        checked: check.checked,
        max_abs_error: check.max_abs_error,
        scale: check.scale,
        max_rel_error: check.max_rel_error,
        tolerance: GRADCHECK_TOL,
        passed,
    };
    out.field("field", &u)?;
    out.summary("summary.json", &summary)?;
    let msg = format!("max relative error {:.3e}", check.max_rel_error);
    Ok((passed, msg, vec![timer.elapsed().as_secs_f64()]))
}

/// Interior values uniform in `[-C, C]`, boundary values from the data.
pub(crate) fn random_admissible(
    grid: &Arc<Grid>,
    adm: &AdmissibleSet,
    seed: u64,
) -> Result<Field, Error> {
    let n = adm.components();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = Field::zeros(grid.clone(), n);
    for &node in grid.interior_nodes() {
        for (a, &c) in adm.bound().iter().enumerate() {
            u.node_mut(node)[a] = rng.gen_range(-c..=c);
        }
    }
    u.set_boundary(adm.boundary())?;
    Ok(u)
}
