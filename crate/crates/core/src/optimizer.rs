//! Projected descent over the admissible set
//! `{ -C <= U <= C componentwise, U = φ on boundary nodes }`.
//!
//! Each iteration takes a Barzilai-Borwein trial step along the negative
//! gradient, projects it onto the box and backtracks until the Armijo
//! condition holds along the projected path, so the energy never
//! increases. Optimality is measured by the projected gradient.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::energy::{CoefficientTensor, EnergyFunctional};
use crate::error::{Error, Result};
use crate::grid::{BoundaryData, Field, Grid, NodeClass};
use crate::oracle::harmonic_extension;
use crate::weights::Weight;

pub const BB_MIN_STEP: f64 = 1e-12;
pub const BB_MAX_STEP: f64 = 1e6;
pub const ARMIJO_C1: f64 = 1e-4;
pub const MAX_BACKTRACKS: usize = 60;
/// Energy changes within this many ulps of the current energy are judged by
/// quadrature of the directional derivative rather than by differencing.
pub const ROUNDOFF_BAND: f64 = 1e3;

/// Box bound `C` and Dirichlet data `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleSet {
    bound: Vec<f64>,
    boundary: BoundaryData,
}

impl AdmissibleSet {
    pub fn new(bound: Vec<f64>, boundary: BoundaryData) -> Result<Self> {
        if bound.len() != boundary.components() {
            return Err(Error::Shape(format!(
                "bound has {} components, boundary data has {}",
                bound.len(),
                boundary.components()
            )));
        }
        if let Some(c) = bound.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::Inadmissible(format!(
                "box bound must be positive, got {c}"
            )));
        }
        let n = bound.len();
        for (slot, v) in boundary.values().chunks(n).enumerate() {
            for (a, (&x, &c)) in v.iter().zip(&bound).enumerate() {
                if x.abs() > c {
                    return Err(Error::Inadmissible(format!(
                        "boundary value {x} (node slot {slot}, component {a}) exceeds bound {c}"
                    )));
                }
            }
        }
        Ok(Self { bound, boundary })
    }

    /// Tightest box containing the data: `C_a = max |φ_a|`, or 1 for a
    /// component that vanishes on the whole boundary.
    pub fn tight(boundary: BoundaryData) -> Result<Self> {
        let bound = boundary
            .abs_max()
            .into_iter()
            .map(|c| if c > 0.0 { c } else { 1.0 })
            .collect();
        Self::new(bound, boundary)
    }

    pub fn bound(&self) -> &[f64] {
        &self.bound
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    pub fn components(&self) -> usize {
        self.bound.len()
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        self.boundary.check_against(grid, self.components())
    }

    /// Clamps interior values and writes boundary data, in place.
    fn project_values(&self, grid: &Grid, u: &mut [f64]) {
        let n = self.components();
        for &node in grid.interior_nodes() {
            for a in 0..n {
                let c = self.bound[a];
                let v = &mut u[node * n + a];
                *v = v.clamp(-c, c);
            }
        }
        for (slot, &node) in grid.boundary_nodes().iter().enumerate() {
            u[node * n..(node + 1) * n].copy_from_slice(self.boundary.at(slot));
        }
    }

    /// Projected gradient: components pushing outward through an active
    /// bound are zeroed. Returns its sup norm and the active count.
    fn projected_gradient(&self, grid: &Grid, u: &[f64], grad: &[f64]) -> (f64, usize) {
        let n = self.components();
        let mut norm = 0.0f64;
        let mut active = 0;
        for &node in grid.interior_nodes() {
            for a in 0..n {
                let i = node * n + a;
                let c = self.bound[a];
                let at_upper = u[i] >= c;
                let at_lower = u[i] <= -c;
                if at_upper || at_lower {
                    active += 1;
                }
                let blocked = (at_upper && grad[i] < 0.0) || (at_lower && grad[i] > 0.0);
                if !blocked {
                    norm = norm.max(grad[i].abs());
                }
            }
        }
        (norm, active)
    }

    fn contains(&self, grid: &Grid, u: &[f64]) -> Result<()> {
        let n = self.components();
        for &node in grid.interior_nodes() {
            for a in 0..n {
                let v = u[node * n + a];
                if !(v.abs() <= self.bound[a]) {
                    return Err(Error::Inadmissible(format!(
                        "interior node {node} component {a} = {v} outside the box"
                    )));
                }
            }
        }
        for (slot, &node) in grid.boundary_nodes().iter().enumerate() {
            if u[node * n..(node + 1) * n] != *self.boundary.at(slot) {
                return Err(Error::Inadmissible(format!(
                    "boundary node {node} does not carry its Dirichlet value"
                )));
            }
        }
        Ok(())
    }
}

/// Step-length rule for the trial step of each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    BbArmijo,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    HarmonicExtension,
    /// Interior filled with the componentwise mean of the boundary data.
    BoundaryConstant,
    Given(Field),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Projected-gradient sup-norm threshold; `None` means
    /// `1e-8 * (1 + initial energy)`.
    pub tol_pg: Option<f64>,
    pub max_iters: usize,
    pub step: StepRule,
    pub init: Init,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_pg: None,
            max_iters: 50_000,
            step: StepRule::BbArmijo,
            init: Init::HarmonicExtension,
        }
    }
}

impl SolveOptions {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol_pg = Some(tol);
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol_pg {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Options(format!("tol_pg must be positive, got {t}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Options("max_iters must be at least 1".into()));
        }
        if let StepRule::Fixed(tau) = self.step {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::Options(format!(
                    "fixed step must be positive, got {tau}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// No step along the projected path decreased the energy.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Energy at every iterate, starting with the initial field.
    pub energy_history: Vec<f64>,
    /// Projected-gradient sup norm at every iterate.
    pub pg_history: Vec<f64>,
    /// Interior node components sitting on the box at the final iterate.
    pub active_constraints: usize,
    /// Iterations whose Armijo search needed the fallback step.
    pub line_search_failures: usize,
    pub tol_pg: f64,
    pub wall_time: Duration,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl SolveReport {
    pub fn final_energy(&self) -> f64 {
        *self
            .energy_history
            .last()
            .expect("history holds the initial energy")
    }

    pub fn final_pg(&self) -> f64 {
        *self
            .pg_history
            .last()
            .expect("history holds the initial norm")
    }
}

/// Clamps interior values into the box and overwrites boundary nodes
/// with `φ`.
pub fn project_admissible(field: &Field, adm: &AdmissibleSet) -> Result<Field> {
    adm.check_grid(field.grid())?;
    if field.components() != adm.components() {
        return Err(Error::Shape(
            "field and admissible set disagree on components".into(),
        ));
    }
    let mut out = field.clone();
    adm.project_values(field.grid(), out.values_mut());
    Ok(out)
}

/// Sup norm of the projected gradient of the energy at `field`, which must
/// lie in the admissible set.
pub fn kkt_residual(
    field: &Field,
    w: &Weight,
    adm: &AdmissibleSet,
    tensor: Option<&CoefficientTensor>,
) -> Result<f64> {
    adm.check_grid(field.grid())?;
    adm.contains(field.grid(), field.values())?;
    let functional =
        EnergyFunctional::new(field.grid().clone(), w.clone(), field.components(), tensor)?;
    let mut grad = vec![0.0; field.values().len()];
    functional.value_and_gradient(field.values(), &mut grad)?;
    Ok(adm
        .projected_gradient(field.grid(), field.values(), &grad)
        .0)
}

fn initial_field(grid: &Arc<Grid>, adm: &AdmissibleSet, init: &Init) -> Result<Vec<f64>> {
    let n = adm.components();
    let mut u = match init {
        Init::HarmonicExtension => harmonic_extension(grid, adm.boundary())?.into_values(),
        Init::BoundaryConstant => {
            let b = adm.boundary();
            let mut mean = vec![0.0; n];
            for v in b.values().chunks(n) {
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x;
                }
            }
            let count = b.len().max(1) as f64;
            for (a, m) in mean.iter_mut().enumerate() {
                *m /= count;
                // keep constant data exact
                if let Some(first) = b.values().get(a) {
                    if b.values().iter().skip(a).step_by(n).all(|x| x == first) {
                        *m = *first;
                    }
                }
            }
            let mut u = vec![0.0; grid.node_count() * n];
            for &node in grid.interior_nodes() {
                u[node * n..(node + 1) * n].copy_from_slice(&mean);
            }
            u
        }
        Init::Given(field) => {
            if **field.grid() != **grid || field.components() != n {
                return Err(Error::Shape(
                    "initial field does not match the problem".into(),
                ));
            }
            field.values().to_vec()
        }
    };
    adm.project_values(grid, &mut u);
    Ok(u)
}

/// Minimizes the discrete energy over the admissible set.
pub fn minimize(
    grid: &Arc<Grid>,
    w: &Weight,
    adm: &AdmissibleSet,
    tensor: Option<&CoefficientTensor>,
    opts: &SolveOptions,
) -> Result<(Field, SolveReport)> {
    let start = Instant::now();
    opts.validate()?;
    adm.check_grid(grid)?;
    let n = adm.components();
    let functional = EnergyFunctional::new(grid.clone(), w.clone(), n, tensor)?;

    let mut u = initial_field(grid, adm, &opts.init)?;
    let mut grad = vec![0.0; u.len()];
    let mut energy = functional.value_and_gradient(&u, &mut grad)?;
    let tol = opts.tol_pg.unwrap_or(1e-8 * (1.0 + energy));
    let (mut pg, mut active) = adm.projected_gradient(grid, &u, &grad);

    let mut energy_history = vec![energy];
    let mut pg_history = vec![pg];
    let mut failures = 0;
    let mut iterations = 0;
    let mut step = match opts.step {
        StepRule::Fixed(tau) => tau,
        StepRule::BbArmijo => (1.0 / pg.max(f64::MIN_POSITIVE)).clamp(BB_MIN_STEP, BB_MAX_STEP),
    };

    let mut trial = vec![0.0; u.len()];
    let mut trial_grad = vec![0.0; u.len()];
    let mut mid = vec![0.0; u.len()];
    let mut mid_grad = vec![0.0; u.len()];
    let stop_reason = loop {
        if pg <= tol {
            break StopReason::Converged;
        }
        if iterations >= opts.max_iters {
            break StopReason::MaxIterations;
        }

        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..u.len() {
                trial[i] = u[i] - t * grad[i];
            }
            adm.project_values(grid, &mut trial);
            let mut gd = 0.0;
            for i in 0..u.len() {
                gd += grad[i] * (trial[i] - u[i]);
            }
            if !(gd < 0.0) {
                t *= 0.5;
                continue;
            }
            let e_trial = functional.value_and_gradient(&trial, &mut trial_grad)?;
            if e_trial <= energy + ARMIJO_C1 * gd {
                accepted = Some(e_trial);
                break;
            }
            if (e_trial - energy).abs() <= ROUNDOFF_BAND * f64::EPSILON * energy.abs() {
                // the change is below the resolution of the energy: integrate
                // the directional derivative along the step instead
                for i in 0..u.len() {
                    mid[i] = 0.5 * (u[i] + trial[i]);
                }
                functional.value_and_gradient(&mid, &mut mid_grad)?;
                let mut change = 0.0;
                for i in 0..u.len() {
                    change += (grad[i] + 4.0 * mid_grad[i] + trial_grad[i]) * (trial[i] - u[i]);
                }
                if change / 6.0 <= ARMIJO_C1 * gd {
                    accepted = Some(e_trial.min(energy));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(e_new) = accepted else {
            failures += 1;
            break StopReason::LineSearchStalled;
        };

        step = match opts.step {
            StepRule::Fixed(tau) => tau,
            StepRule::BbArmijo => {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..u.len() {
                    let s = trial[i] - u[i];
                    ss += s * s;
                    sy += s * (trial_grad[i] - grad[i]);
                }
                if sy > 0.0 {
                    (ss / sy).clamp(BB_MIN_STEP, BB_MAX_STEP)
                } else {
                    BB_MAX_STEP
                }
            }
        };
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        energy = e_new;
        iterations += 1;
        (pg, active) = adm.projected_gradient(grid, &u, &grad);
        energy_history.push(energy);
        pg_history.push(pg);
    };

    let report = SolveReport {
        iterations,
        energy_history,
        pg_history,
        active_constraints: active,
        line_search_failures: failures,
        tol_pg: tol,
        wall_time: start.elapsed(),
        converged: stop_reason == StopReason::Converged,
        stop_reason,
    };
    debug_assert!(grid
        .classes()
        .iter()
        .enumerate()
        .all(|(node, c)| *c != NodeClass::Exterior
            || u[node * n..(node + 1) * n].iter().all(|&v| v == 0.0)));
    Ok((Field::from_values(grid.clone(), n, u)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{energy, grad_energy};
    use crate::grid::{build_grid, sample_boundary, DomainSpec, Mask};
    use crate::oracle::solve_scalar_exact;
    use crate::weights::{make_weight, WeightSpec};

    fn grid(dims: &[usize]) -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::unit_box(dims.len()), dims).unwrap())
    }

    fn gauss(alpha: f64) -> Weight {
        make_weight(WeightSpec::Gaussian { alpha }).unwrap()
    }

    fn assert_feasible(u: &Field, adm: &AdmissibleSet) {
        let g = u.grid();
        let n = adm.components();
        for &node in g.interior_nodes() {
            for a in 0..n {
                assert!(u.node(node)[a].abs() <= adm.bound()[a]);
            }
        }
        for (slot, &node) in g.boundary_nodes().iter().enumerate() {
            assert_eq!(u.node(node), adm.boundary().at(slot));
        }
        let cmax = adm.bound().iter().fold(0.0f64, |m, &c| m.max(c));
        assert!(u.sup_norm() <= cmax);
    }

    fn assert_monotone(r: &SolveReport) {
        for pair in r.energy_history.windows(2) {
            assert!(
                pair[1] <= pair[0],
                "energy increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn projection_examples() {
        let g = grid(&[3, 3]);
        let b = sample_boundary(&g, |_| vec![0.3, 0.0]).unwrap();
        let adm = AdmissibleSet::new(vec![1.0, 1.0], b).unwrap();
        let mut u = Field::zeros(g.clone(), 2);
        u.node_mut(4).copy_from_slice(&[5.0, -5.0]);
        u.node_mut(0).copy_from_slice(&[7.0, 7.0]);
        let p = project_admissible(&u, &adm).unwrap();
        assert_eq!(p.node(4), &[1.0, -1.0]);
        assert_eq!(p.node(0), &[0.3, 0.0]);
        assert_eq!(project_admissible(&p, &adm).unwrap(), p);
    }

    #[test]
    fn rejects_inadmissible_boundary() {
        let g = grid(&[3]);
        let b = sample_boundary(&g, |x| vec![2.0 * x[0]]).unwrap();
        assert!(matches!(
            AdmissibleSet::new(vec![1.0], b.clone()),
            Err(Error::Inadmissible(_))
        ));
        assert!(AdmissibleSet::new(vec![0.0], b.clone()).is_err());
        assert_eq!(AdmissibleSet::tight(b).unwrap().bound(), &[2.0]);
    }

    #[test]
    fn constant_data_converges_immediately() {
        let g = grid(&[9, 9]);
        let b = sample_boundary(&g, |_| vec![0.4, -0.1]).unwrap();
        let adm = AdmissibleSet::new(vec![0.5, 0.5], b).unwrap();
        let opts = SolveOptions::default().with_init(Init::BoundaryConstant);
        let (u, r) = minimize(&g, &gauss(1.0), &adm, None, &opts).unwrap();
        assert!(r.converged && r.iterations <= 2);
        assert_eq!(r.final_energy(), 0.0);
        assert!(u
            .grid()
            .interior_nodes()
            .iter()
            .all(|&n| u.node(n) == [0.4, -0.1]));
    }

    #[test]
    fn flat_weight_gives_harmonic_extension() {
        let g = grid(&[33, 33]);
        let b =
            sample_boundary(&g, |x| vec![(3.0 * x[0]).sin() * x[1], x[0] * x[0] - x[1]]).unwrap();
        let adm = AdmissibleSet::tight(b.clone()).unwrap();
        let w = make_weight(WeightSpec::Constant { c: 0.0 }).unwrap();
        // start away from the answer
        let opts = SolveOptions::default()
            .with_init(Init::BoundaryConstant)
            .with_tolerance(1e-11);
        let (u, r) = minimize(&g, &w, &adm, None, &opts).unwrap();
        assert!(r.converged);
        assert_monotone(&r);
        assert_feasible(&u, &adm);
        let h = harmonic_extension(&g, &b).unwrap();
        assert!(u.sup_distance(&h).unwrap() <= 1e-6);
    }

    #[test]
    fn one_dimensional_transform_case() {
        let g = grid(&[257]);
        let b = sample_boundary(&g, |x| vec![x[0]]).unwrap();
        let adm = AdmissibleSet::tight(b.clone()).unwrap();
        let w = gauss(1.0);
        let (u, r) = minimize(&g, &w, &adm, None, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert_monotone(&r);
        let exact = solve_scalar_exact(&g, &w, &b).unwrap();
        assert!(u.sup_distance(&exact).unwrap() <= 1e-4);
    }

    #[test]
    fn kkt_residual_examples() {
        let g = grid(&[17, 17]);
        let b = sample_boundary(&g, |_| vec![0.2]).unwrap();
        let adm = AdmissibleSet::tight(b.clone()).unwrap();
        let w = gauss(1.0);
        let c = Field::from_fn(g.clone(), 1, |_| vec![0.2]).unwrap();
        assert_eq!(kkt_residual(&c, &w, &adm, None).unwrap(), 0.0);

        let b = sample_boundary(&g, |x| vec![x[0] * x[1]]).unwrap();
        let adm = AdmissibleSet::tight(b).unwrap();
        let (u, r) = minimize(&g, &w, &adm, None, &SolveOptions::default()).unwrap();
        assert!(kkt_residual(&u, &w, &adm, None).unwrap() <= r.tol_pg);
        let mut bumped = u.clone();
        let mid = g.interior_nodes()[g.interior_nodes().len() / 2];
        bumped.node_mut(mid)[0] += 0.1;
        assert!(kkt_residual(&bumped, &w, &adm, None).unwrap() > 0.0);
        bumped.node_mut(mid)[0] = 5.0;
        assert!(kkt_residual(&bumped, &w, &adm, None).is_err());
    }

    #[test]
    fn active_constraints_are_reported() {
        // tight box on a non-monotone weight; constraints may bind
        let g = grid(&[17, 17]);
        let b = sample_boundary(&g, |x| vec![if x[0] < 0.5 { 1.0 } else { -1.0 }]).unwrap();
        let adm = AdmissibleSet::new(vec![1.0], b).unwrap();
        let init = Field::from_fn(g.clone(), 1, |_| vec![1.0]).unwrap();
        let opts = SolveOptions::default().with_init(Init::Given(init));
        let w = gauss(1.0);
        let (u, r) = minimize(&g, &w, &adm, None, &opts).unwrap();
        assert_monotone(&r);
        assert_feasible(&u, &adm);
        assert!(r.converged);
        assert!(kkt_residual(&u, &w, &adm, None).unwrap() <= r.tol_pg);
    }

    #[test]
    fn first_step_decreases_energy() {
        let g = grid(&[12, 10]);
        let b = sample_boundary(&g, |x| vec![x[0].cos(), x[1] - 0.5]).unwrap();
        let adm = AdmissibleSet::new(vec![1.0, 1.0], b).unwrap();
        let opts = SolveOptions {
            max_iters: 1,
            init: Init::BoundaryConstant,
            ..Default::default()
        };
        let (_, r) = minimize(&g, &gauss(0.5), &adm, None, &opts).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.energy_history[1] < r.energy_history[0]);
        assert!(!r.converged);
        assert_eq!(r.stop_reason, StopReason::MaxIterations);
    }

    #[test]
    fn fixed_step_rule() {
        let g = grid(&[9, 9]);
        let b = sample_boundary(&g, |x| vec![x[0]]).unwrap();
        let adm = AdmissibleSet::tight(b).unwrap();
        let opts = SolveOptions {
            step: StepRule::Fixed(0.1),
            ..Default::default()
        };
        let (_, r) = minimize(&g, &gauss(1.0), &adm, None, &opts).unwrap();
        assert!(r.converged);
        assert_monotone(&r);
    }

    #[test]
    fn deterministic_iterates() {
        let g = grid(&[15, 13]);
        let b = sample_boundary(&g, |x| vec![x[0] * x[1], (x[0] + x[1]).sin()]).unwrap();
        let adm = AdmissibleSet::tight(b).unwrap();
        let w = make_weight(WeightSpec::SphereChart { beta: 2.0 }).unwrap();
        let a = minimize(&g, &w, &adm, None, &SolveOptions::default()).unwrap();
        let b = minimize(&g, &w, &adm, None, &SolveOptions::default()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.energy_history, b.1.energy_history);
    }

    #[test]
    fn masked_domain_solve() {
        let mask: Mask = Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1] <= 1.0);
        let g = Arc::new(
            build_grid(
                &DomainSpec::masked_box(vec![(-1.0, 1.0); 2], mask),
                &[25, 25],
            )
            .unwrap(),
        );
        let b = sample_boundary(&g, |x| vec![x[0], x[1]]).unwrap();
        let adm = AdmissibleSet::tight(b).unwrap();
        let (u, r) = minimize(&g, &gauss(1.0), &adm, None, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert_feasible(&u, &adm);
        let e = energy(&u, &gauss(1.0), None).unwrap();
        assert!((e.value - r.final_energy()).abs() <= 1e-12 * e.value);
        let gr = grad_energy(&u, &gauss(1.0), None).unwrap();
        assert!(gr.sup_norm() <= r.tol_pg);
    }

    #[test]
    fn options_are_validated() {
        let g = grid(&[5]);
        let b = sample_boundary(&g, |x| vec![x[0]]).unwrap();
        let adm = AdmissibleSet::tight(b).unwrap();
        let w = gauss(1.0);
        let bad = SolveOptions {
            max_iters: 0,
            ..Default::default()
        };
        assert!(minimize(&g, &w, &adm, None, &bad).is_err());
        assert!(minimize(
            &g,
            &w,
            &adm,
            None,
            &SolveOptions::default().with_tolerance(-1.0)
        )
        .is_err());
    }
}
