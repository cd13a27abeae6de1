//! Exhaustion of the half-space `{x_n > 0}` by half-balls `B_R^+`.
//!
//! For each radius the Dirichlet problem is solved on `B_R^+` with the
//! data `φ` on the whole boundary (flat and curved parts). All radii share
//! the spacing `h`, so restrictions to a fixed window compare nodewise.

use std::sync::Arc;

use rayon::prelude::*;

use crate::energy::energy;
use crate::error::{Error, Result};
use crate::grid::{build_grid, restrict, sample_boundary, DomainSpec, Field, Grid};
use crate::optimizer::{minimize, AdmissibleSet, SolveOptions};
use crate::weights::Weight;

/// Tolerance for `2R / h` being an integer.
const ALIGN_TOL: f64 = 1e-9;

pub type PointFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Results for one radius.
#[derive(Debug, Clone)]
pub struct RadiusRecord {
    pub radius: f64,
    pub nodes: Vec<usize>,
    pub sup_norm: f64,
    /// Energy of the solution on the whole half-ball.
    pub energy: f64,
    /// Energy of `φ` itself on the half-ball, an upper bound for `energy`.
    pub competitor_energy: f64,
    /// Energy of the solution restricted to the window.
    pub window_energy: f64,
    /// Sup distance on the window to the previous radius' solution.
    pub window_difference: Option<f64>,
    pub iterations: usize,
    pub final_pg: f64,
    pub converged: bool,
    /// Solution restricted to the window.
    pub window_field: Field,
}

#[derive(Debug, Clone)]
pub struct ExhaustionReport {
    pub spacing: f64,
    pub window: Vec<(f64, f64)>,
    /// Box bound `C`, the componentwise sup of `|φ|` over the largest
    /// half-ball's nodes.
    pub bound: Vec<f64>,
    pub records: Vec<RadiusRecord>,
    /// Every `|u_R|_∞ <= |C|_∞`.
    pub uniform_bound: bool,
    /// Every window energy and full energy is at most the energy of `φ`.
    pub energy_bounded: bool,
}

impl ExhaustionReport {
    pub fn radii(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.radius).collect()
    }

    /// Window differences between consecutive radii.
    pub fn window_differences(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| r.window_difference)
            .collect()
    }

    /// Largest-radius solution on the window.
    pub fn limit(&self) -> &Field {
        &self
            .records
            .last()
            .expect("at least one radius")
            .window_field
    }

    pub fn converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }
}

fn half_ball_grid(dim: usize, radius: f64, h: f64) -> Result<Arc<Grid>> {
    let cells = radius / h;
    let rounded = cells.round();
    if (cells - rounded).abs() > ALIGN_TOL * cells.max(1.0) || rounded < 1.0 {
        return Err(Error::Window(format!(
            "radius {radius} is not a multiple of the spacing {h}"
        )));
    }
    let per_side = rounded as usize;
    let mut resolution = vec![2 * per_side + 1; dim];
    resolution[dim - 1] = per_side + 1;
    Ok(Arc::new(build_grid(
        &DomainSpec::half_ball(dim, radius),
        &resolution,
    )?))
}

fn check_window(window: &[(f64, f64)], radius: f64) -> Result<()> {
    let n = window.len();
    if window
        .iter()
        .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
    {
        return Err(Error::Window(format!("degenerate window {window:?}")));
    }
    if window[n - 1].0 < 0.0 {
        return Err(Error::Window("window leaves the half-space".into()));
    }
    let far2: f64 = window
        .iter()
        .map(|&(lo, hi)| lo.abs().max(hi.abs()).powi(2))
        .sum();
    if far2.sqrt() > radius * (1.0 + ALIGN_TOL) {
        return Err(Error::Window(format!(
            "window {window:?} is not inside the half-ball of radius {radius}"
        )));
    }
    Ok(())
}

/// Solves on `B_R^+` for each radius and reports stabilization on `window`.
pub fn solve_exhaustion(
    phi: PointFn,
    components: usize,
    w: &Weight,
    radii: &[f64],
    h: f64,
    window: &[(f64, f64)],
    opts: &SolveOptions,
) -> Result<ExhaustionReport> {
    if radii.is_empty() {
        return Err(Error::Options("no radii given".into()));
    }
    if radii.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::Options(format!(
            "radii must increase strictly, got {radii:?}"
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Options(format!("spacing must be positive, got {h}")));
    }
    if components == 0 {
        return Err(Error::Shape("need at least one component".into()));
    }
    let dim = window.len();
    if dim == 0 {
        return Err(Error::Window("empty window".into()));
    }
    check_window(window, radii[0])?;

    let grids: Vec<Arc<Grid>> = radii
        .iter()
        .map(|&r| half_ball_grid(dim, r, h))
        .collect::<Result<_>>()?;
    let sampled: Vec<Field> = grids
        .iter()
        .map(|g| Field::from_fn(g.clone(), components, |x| phi(x)))
        .collect::<Result<_>>()?;
    let largest = sampled.last().expect("at least one radius");
    let mut bound = vec![0.0f64; components];
    for node in 0..largest.grid().node_count() {
        for (c, v) in bound.iter_mut().zip(largest.node(node)) {
            *c = c.max(v.abs());
        }
    }
    for c in bound.iter_mut() {
        if *c == 0.0 {
            *c = 1.0;
        }
    }

    let solved: Vec<(Field, f64, f64, usize, f64, bool)> = grids
        .par_iter()
        .zip(sampled.par_iter())
        .map(|(g, phi_field)| -> Result<_> {
            let data = sample_boundary(g, |x| phi(x))?;
            let adm = AdmissibleSet::new(bound.clone(), data)?;
            let (u, report) = minimize(g, w, &adm, None, opts)?;
            let competitor = energy(phi_field, w, None)?.value;
            Ok((
                u,
                report.final_energy(),
                competitor,
                report.iterations,
                report.final_pg(),
                report.converged,
            ))
        })
        .collect::<Result<_>>()?;

    let cmax = bound.iter().fold(0.0f64, |m, &c| m.max(c));
    let mut records: Vec<RadiusRecord> = Vec::with_capacity(radii.len());
    for ((u, e, competitor, iterations, final_pg, converged), (&radius, g)) in
        solved.into_iter().zip(radii.iter().zip(&grids))
    {
        let window_field = restrict(&u, window)?;
        let window_energy = energy(&window_field, w, None)?.value;
        let window_difference = match records.last() {
            Some(prev) => Some(window_field.sup_distance(&prev.window_field)?),
            None => None,
        };
        records.push(RadiusRecord {
            radius,
            nodes: g.dims().to_vec(),
            sup_norm: u.sup_norm(),
            energy: e,
            competitor_energy: competitor,
            window_energy,
            window_difference,
            iterations,
            final_pg,
            converged,
            window_field,
        });
    }
    let uniform_bound = records.iter().all(|r| r.sup_norm <= cmax);
    let energy_bounded = records
        .iter()
        .all(|r| r.energy <= r.competitor_energy && r.window_energy <= r.competitor_energy);
    Ok(ExhaustionReport {
        spacing: h,
        window: window.to_vec(),
        bound,
        records,
        uniform_bound,
        energy_bounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{make_weight, WeightSpec};

    fn gauss() -> Weight {
        make_weight(WeightSpec::Gaussian { alpha: 1.0 }).unwrap()
    }

    #[test]
    fn constant_data_is_reproduced() {
        let phi: PointFn = Arc::new(|_| vec![0.3]);
        let r = solve_exhaustion(
            phi,
            1,
            &gauss(),
            &[1.0, 2.0],
            0.25,
            &[(0.0, 0.5), (0.0, 0.5)],
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(r.window_differences().iter().all(|&d| d == 0.0));
        for rec in &r.records {
            assert!(rec.window_field.values().iter().all(|&v| v == 0.3));
            assert_eq!(rec.energy, 0.0);
        }
        assert!(r.uniform_bound && r.energy_bounded);
    }

    #[test]
    fn gaussian_bump_stabilizes() {
        let phi: PointFn = Arc::new(|x| vec![(-x.iter().map(|v| v * v).sum::<f64>()).exp()]);
        let r = solve_exhaustion(
            phi,
            1,
            &gauss(),
            &[1.0, 2.0, 4.0],
            0.125,
            &[(0.0, 0.5), (0.0, 0.5)],
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(r.converged());
        assert!(r.uniform_bound && r.energy_bounded);
        let d = r.window_differences();
        assert_eq!(d.len(), 2);
        assert!(d[1] <= d[0], "{d:?}");
        assert_eq!(r.radii(), vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn invalid_inputs() {
        let phi: PointFn = Arc::new(|_| vec![0.0]);
        let opts = SolveOptions::default();
        let win = [(0.0, 0.5), (0.0, 0.5)];
        assert!(
            solve_exhaustion(phi.clone(), 1, &gauss(), &[2.0, 1.0], 0.25, &win, &opts).is_err()
        );
        assert!(solve_exhaustion(phi.clone(), 1, &gauss(), &[1.0, 2.0], 0.3, &win, &opts).is_err());
        assert!(matches!(
            solve_exhaustion(
                phi.clone(),
                1,
                &gauss(),
                &[1.0],
                0.25,
                &[(0.0, 1.0), (0.0, 1.0)],
                &opts
            ),
            Err(Error::Window(_))
        ));
        assert!(solve_exhaustion(
            phi,
            1,
            &gauss(),
            &[1.0],
            0.25,
            &[(0.0, 0.3), (0.0, 0.5)],
            &opts
        )
        .is_err());
    }
}
