//! Independent solvers for the scalar problem.
//!
//! For one component the Euler-Lagrange equation of `∫ e^{f(u)} |Du|^2` is
//! `Δu + ½ f'(u) |Du|^2 = 0`. With `W(u) = ∫_0^u e^{f(s)/2} ds` one has
//! `ΔW(u) = e^{f/2} (Δu + ½ f'(u) |Du|^2)`, so `w = W(u)` is harmonic and
//! the nonlinear problem reduces to a linear Dirichlet problem followed by
//! a pointwise inversion. A source term `h` turns into `-Δw = e^{f(u)/2} h`,
//! which is solved by damped fixed-point iteration.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{BoundaryData, Field, Grid, NodeClass};
use crate::weights::Weight;

/// Relative residual reached by the conjugate-gradient solves.
pub const CG_TOLERANCE: f64 = 1e-12;

/// Per-node source values `h(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceField(pub Vec<f64>);

impl SourceField {
    pub fn zeros(grid: &Grid) -> Self {
        SourceField(vec![0.0; grid.node_count()])
    }

    pub fn from_fn(grid: &Grid, h: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut values = vec![0.0; grid.node_count()];
        for (node, v) in values.iter_mut().enumerate() {
            if grid.class(node).in_domain() {
                *v = h(&grid.coords(node));
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "source at {:?}",
                        grid.coords(node)
                    )));
                }
            }
        }
        Ok(SourceField(values))
    }
}

/// Solves `-Δ_h v = rhs` with Dirichlet `boundary` values using the
/// standard cross stencil and conjugate gradients.
pub fn poisson_dirichlet(
    grid: &Arc<Grid>,
    rhs: &SourceField,
    boundary: &BoundaryData,
) -> Result<Field> {
    if boundary.components() != 1 {
        return Err(Error::Shape(
            "poisson_dirichlet works on scalar data".into(),
        ));
    }
    if rhs.0.len() != grid.node_count() {
        return Err(Error::Shape(format!(
            "source has {} values for {} nodes",
            rhs.0.len(),
            grid.node_count()
        )));
    }
    if rhs.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("source".into()));
    }
    let mut field = Field::zeros(grid.clone(), 1);
    field.set_boundary(boundary)?;
    let interior = grid.interior_nodes();
    if interior.is_empty() {
        return Ok(field);
    }
    let mut unknown = vec![usize::MAX; grid.node_count()];
    for (i, &node) in interior.iter().enumerate() {
        unknown[node] = i;
    }
    let n = grid.dim();
    let inv_h2: Vec<f64> = grid.spacing().iter().map(|h| 1.0 / (h * h)).collect();
    let diag: f64 = 2.0 * inv_h2.iter().sum::<f64>();

    // neighbour lists: (unknown index or usize::MAX, node, 1/h^2)
    let mut b = vec![0.0; interior.len()];
    for (i, &node) in interior.iter().enumerate() {
        b[i] = rhs.0[node];
        for k in 0..n {
            for off in [-1, 1] {
                let nb = grid
                    .neighbor(node, k, off)
                    .expect("interior node has neighbours");
                if grid.class(nb) == NodeClass::Boundary {
                    b[i] += field.values()[nb] * inv_h2[k];
                }
            }
        }
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        for (i, &node) in interior.iter().enumerate() {
            let mut acc = diag * x[i];
            for k in 0..n {
                for off in [-1, 1] {
                    let nb = grid
                        .neighbor(node, k, off)
                        .expect("interior node has neighbours");
                    let j = unknown[nb];
                    if j != usize::MAX {
                        acc -= inv_h2[k] * x[j];
                    }
                }
            }
            out[i] = acc;
        }
    };
    let x = conjugate_gradient(apply, &b, 4 * interior.len() + 1000)?;
    for (i, &node) in interior.iter().enumerate() {
        field.values_mut()[node] = x[i];
    }
    Ok(field)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conjugate_gradient<F>(apply: F, b: &[f64], max_iters: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut x = vec![0.0; b.len()];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; b.len()];
    let mut rr = dot(&r, &r);
    for _ in 0..max_iters {
        if rr.sqrt() <= CG_TOLERANCE * bnorm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    if rr.sqrt() <= CG_TOLERANCE * bnorm {
        return Ok(x);
    }
    Err(Error::LinearSolve {
        iterations: max_iters,
        residual: rr.sqrt() / bnorm,
    })
}

/// Componentwise discrete harmonic extension of `boundary`.
pub fn harmonic_extension(grid: &Arc<Grid>, boundary: &BoundaryData) -> Result<Field> {
    boundary.check_against(grid, boundary.components())?;
    let nc = boundary.components();
    let zero = SourceField::zeros(grid);
    let mut out = Field::zeros(grid.clone(), nc);
    for a in 0..nc {
        let comp: Vec<f64> = boundary
            .values()
            .iter()
            .skip(a)
            .step_by(nc)
            .copied()
            .collect();
        if let Some(&c) = comp.first().filter(|&&c| comp.iter().all(|&x| x == c)) {
            // constant data extends exactly
            for node in 0..grid.node_count() {
                if grid.class(node).in_domain() {
                    out.values_mut()[node * nc + a] = c;
                }
            }
            continue;
        }
        let v = poisson_dirichlet(grid, &zero, &BoundaryData::new(1, comp)?)?;
        for (node, &x) in v.values().iter().enumerate() {
            out.values_mut()[node * nc + a] = x;
        }
    }
    Ok(out)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// Tabulated half-weight transform `W(u) = ∫_0^u e^{f(s)/2} ds` on
/// `[-M, M]`, with its inverse.
#[derive(Debug, Clone)]
pub struct TransformTable {
    weight: Weight,
    range: f64,
    knots: Vec<f64>,
    values: Vec<f64>,
}

/// Intervals on each side of zero.
const TABLE_HALF_INTERVALS: usize = 1024;

pub fn halfweight_table(f: &Weight, range: f64) -> Result<TransformTable> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::Transform(format!(
            "range must be positive, got {range}"
        )));
    }
    let m = TABLE_HALF_INTERVALS;
    let step = range / m as f64;
    let knots: Vec<f64> = (0..=2 * m)
        .map(|i| {
            if i == m {
                0.0
            } else {
                (i as f64 - m as f64) * step
            }
        })
        .collect();
    let integrand = |s: f64| (0.5 * f.f(&[s])).exp();
    for &k in &knots {
        let v = integrand(k);
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Transform(format!("e^(f/2) = {v} at {k}")));
        }
    }
    let tol = 1e-12 / (2 * m) as f64;
    let mut values = vec![0.0; 2 * m + 1];
    for i in m + 1..=2 * m {
        values[i] = values[i - 1] + adaptive_simpson(&integrand, knots[i - 1], knots[i], tol);
    }
    for i in (0..m).rev() {
        values[i] = values[i + 1] - adaptive_simpson(&integrand, knots[i], knots[i + 1], tol);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Transform(
            "transform overflows on the table range".into(),
        ));
    }
    Ok(TransformTable {
        weight: f.clone(),
        range,
        knots,
        values,
    })
}

impl TransformTable {
    pub fn range(&self) -> f64 {
        self.range
    }

    /// `(W(-M), W(M))`.
    pub fn image(&self) -> (f64, f64) {
        (self.values[0], *self.values.last().unwrap())
    }

    fn density(&self, u: f64) -> f64 {
        (0.5 * self.weight.f(&[u])).exp()
    }

    /// `W(u)` for `u` in `[-M, M]`.
    pub fn forward(&self, u: f64) -> Result<f64> {
        if !(u.abs() <= self.range) {
            return Err(Error::Transform(format!(
                "{u} outside [-{0}, {0}]",
                self.range
            )));
        }
        let m = TABLE_HALF_INTERVALS;
        let step = self.range / m as f64;
        // integrate from the knot nearest to zero side of u
        let pos = u / step + m as f64;
        let i = if u >= 0.0 {
            pos.floor() as usize
        } else {
            pos.ceil() as usize
        };
        let i = i.min(2 * m);
        let density = |s: f64| self.density(s);
        let tol = 1e-12 / (2 * m) as f64;
        Ok(self.values[i] + adaptive_simpson(&density, self.knots[i], u, tol))
    }

    /// `W^{-1}(w)` for `w` in the image of `[-M, M]`.
    pub fn inverse(&self, w: f64) -> Result<f64> {
        let (lo_w, hi_w) = self.image();
        if !(w >= lo_w && w <= hi_w) {
            return Err(Error::Transform(format!(
                "value {w} outside the transform image [{lo_w}, {hi_w}]"
            )));
        }
        // bracket: values[i] <= w <= values[i+1]
        let i = match self.values.partition_point(|&v| v <= w) {
            0 => 0,
            p => (p - 1).min(self.values.len() - 2),
        };
        let (mut a, mut b) = (self.knots[i], self.knots[i + 1]);
        let (wa, wb) = (self.values[i], self.values[i + 1]);
        let mut u = if wb > wa {
            a + (b - a) * (w - wa) / (wb - wa)
        } else {
            a
        };
        for _ in 0..100 {
            let r = self.forward(u)? - w;
            if r == 0.0 {
                return Ok(u);
            }
            if r > 0.0 {
                b = u;
            } else {
                a = u;
            }
            let mut next = u - r / self.density(u);
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - u).abs() <= 4.0 * f64::EPSILON * (1.0 + u.abs()) {
                return Ok(next);
            }
            u = next;
        }
        Ok(u)
    }
}

fn default_range(boundary: &BoundaryData) -> f64 {
    2.0 * (1.0 + boundary.abs_max().iter().fold(0.0f64, |m, &v| m.max(v)))
}

fn check_scalar(grid: &Grid, boundary: &BoundaryData) -> Result<()> {
    if boundary.components() != 1 {
        return Err(Error::Shape("scalar oracle needs one component".into()));
    }
    boundary.check_against(grid, 1)
}

fn transformed_boundary(table: &TransformTable, boundary: &BoundaryData) -> Result<BoundaryData> {
    let values = boundary
        .values()
        .iter()
        .map(|&v| table.forward(v))
        .collect::<Result<Vec<_>>>()?;
    BoundaryData::new(1, values)
}

/// Maps a transformed field back with `W^{-1}`; boundary nodes get the
/// original data exactly.
fn invert_field(table: &TransformTable, v: &Field, boundary: &BoundaryData) -> Result<Field> {
    let grid = v.grid().clone();
    let mut u = Field::zeros(grid.clone(), 1);
    for &node in grid.interior_nodes() {
        u.values_mut()[node] = table.inverse(v.values()[node])?;
    }
    u.set_boundary(boundary)?;
    Ok(u)
}

/// Exact discrete solution of the scalar homogeneous problem: the
/// harmonic extension of `W(φ)` mapped back by `W^{-1}`.
pub fn solve_scalar_exact(grid: &Arc<Grid>, f: &Weight, boundary: &BoundaryData) -> Result<Field> {
    check_scalar(grid, boundary)?;
    let mut range = default_range(boundary);
    let mut last = None;
    for _ in 0..2 {
        let attempt = halfweight_table(f, range).and_then(|table| {
            let wb = transformed_boundary(&table, boundary)?;
            let v = harmonic_extension(grid, &wb)?;
            invert_field(&table, &v, boundary)
        });
        match attempt {
            Err(Error::Transform(msg)) => {
                last = Some(msg);
                range *= 2.0;
            }
            other => return other,
        }
    }
    Err(Error::Transform(last.unwrap_or_default()))
}

/// Options for [`solve_scalar_source`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            damping: 1.0,
            tolerance: 1e-10,
            max_iters: 500,
        }
    }
}

/// Solves `-e^{-f}div(e^{f}∇u) + ½f'(u)|∇u|^2 = h` through the transformed
/// equation `-Δv = e^{f(W^{-1}(v))/2} h`, `v = W(φ)` on the boundary, by
/// damped Picard iteration. Returns the solution and the number of sweeps.
pub fn solve_scalar_source(
    grid: &Arc<Grid>,
    f: &Weight,
    boundary: &BoundaryData,
    source: &SourceField,
    opts: PicardOptions,
) -> Result<(Field, usize)> {
    check_scalar(grid, boundary)?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Options(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    if source.0.len() != grid.node_count() {
        return Err(Error::Shape("source length does not match the grid".into()));
    }
    let mut range = default_range(boundary);
    let mut last = None;
    for _ in 0..2 {
        match picard(grid, f, boundary, source, opts, range) {
            Err(Error::Transform(msg)) => {
                last = Some(msg);
                range *= 2.0;
            }
            other => return other,
        }
    }
    Err(Error::Transform(last.unwrap_or_default()))
}

fn picard(
    grid: &Arc<Grid>,
    f: &Weight,
    boundary: &BoundaryData,
    source: &SourceField,
    opts: PicardOptions,
    range: f64,
) -> Result<(Field, usize)> {
    let table = halfweight_table(f, range)?;
    let wb = transformed_boundary(&table, boundary)?;
    let mut v = poisson_dirichlet(grid, &SourceField::zeros(grid), &wb)?;
    let mut theta = opts.damping;
    let mut prev = f64::INFINITY;
    let mut rhs = SourceField::zeros(grid);
    for sweep in 1..=opts.max_iters {
        for &node in grid.interior_nodes() {
            let u = table.inverse(v.values()[node])?;
            rhs.0[node] = (0.5 * f.f(&[u])).exp() * source.0[node];
        }
        let target = poisson_dirichlet(grid, &rhs, &wb)?;
        let mut change = 0.0f64;
        for &node in grid.interior_nodes() {
            let old = v.values()[node];
            let new = (1.0 - theta) * old + theta * target.values()[node];
            change = change.max((new - old).abs());
            v.values_mut()[node] = new;
        }
        if change <= opts.tolerance {
            return Ok((invert_field(&table, &v, boundary)?, sweep));
        }
        if change > prev {
            theta *= 0.5;
        }
        prev = change;
    }
    Err(Error::Picard {
        iterations: opts.max_iters,
        residual: prev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::el_residual;
    use crate::grid::{build_grid, sample_boundary, DomainSpec};
    use crate::weights::{make_weight, WeightSpec};

    fn grid(dims: &[usize]) -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::unit_box(dims.len()), dims).unwrap())
    }

    fn neg_square() -> Weight {
        make_weight(WeightSpec::Gaussian { alpha: 1.0 }).unwrap()
    }

    #[test]
    fn simpson_on_gaussian() {
        // reference from an independent high-order quadrature
        let v = adaptive_simpson(&|s: f64| (-0.5 * s * s).exp(), 0.0, 1.0, 1e-14);
        assert!((v - 0.855624391892149).abs() < 1e-13);
    }

    #[test]
    fn table_for_constant_weight_is_linear() {
        let c = 0.8;
        let t = halfweight_table(&make_weight(WeightSpec::Constant { c }).unwrap(), 3.0).unwrap();
        for u in [-2.9, -0.3, 0.0, 0.123, 2.5] {
            assert!((t.forward(u).unwrap() - (0.5 * c).exp() * u).abs() < 1e-12);
        }
    }

    #[test]
    fn table_for_gaussian() {
        let t = halfweight_table(&neg_square(), 4.0).unwrap();
        assert_eq!(t.forward(0.0).unwrap(), 0.0);
        assert!((t.forward(1.0).unwrap() - 0.855624391892149).abs() < 1e-12);
        assert!((t.inverse(t.forward(0.7).unwrap()).unwrap() - 0.7).abs() <= 1e-10);
        for i in 0..=400 {
            let u = -4.0 + 8.0 * i as f64 / 400.0;
            assert!(
                (t.inverse(t.forward(u).unwrap()).unwrap() - u).abs() <= 1e-10,
                "{u}"
            );
        }
        assert!(t.forward(4.5).is_err());
        assert!(t.inverse(10.0).is_err());
    }

    #[test]
    fn table_overflow_is_reported() {
        let w = make_weight(WeightSpec::Custom {
            label: "steep".into(),
            f: Arc::new(|u: &[f64]| 2000.0 * u[0]),
            g: Arc::new(|_: &[f64]| 1.0),
        })
        .unwrap();
        assert!(matches!(
            halfweight_table(&w, 1.0),
            Err(Error::Transform(_))
        ));
    }

    #[test]
    fn poisson_reproduces_polynomials() {
        let g = grid(&[9, 7]);
        let b = sample_boundary(&g, |x| vec![1.0 + 2.0 * x[0] - 3.0 * x[1]]).unwrap();
        let u = poisson_dirichlet(&g, &SourceField::zeros(&g), &b).unwrap();
        for node in 0..g.node_count() {
            let x = g.coords(node);
            assert!((u.values()[node] - (1.0 + 2.0 * x[0] - 3.0 * x[1])).abs() < 1e-11);
        }

        let g = grid(&[33]);
        let b = sample_boundary(&g, |_| vec![0.0]).unwrap();
        let rhs = SourceField::from_fn(&g, |_| 2.0).unwrap();
        let u = poisson_dirichlet(&g, &rhs, &b).unwrap();
        for node in 0..g.node_count() {
            let x = g.coords(node)[0];
            assert!((u.values()[node] - x * (1.0 - x)).abs() < 1e-13);
        }

        let g = grid(&[12, 12]);
        let b = sample_boundary(&g, |_| vec![-0.25]).unwrap();
        let u = poisson_dirichlet(&g, &SourceField::zeros(&g), &b).unwrap();
        assert!(u.values().iter().all(|&v| (v + 0.25).abs() < 1e-13));
    }

    #[test]
    fn exact_solution_midpoint() {
        let g = grid(&[257]);
        let b = sample_boundary(&g, |x| vec![x[0]]).unwrap();
        let u = solve_scalar_exact(&g, &neg_square(), &b).unwrap();
        // W(u(0.5)) = W(1)/2 exactly at the nodes in 1D
        assert!((u.values()[128] - 0.44177054668658144).abs() < 1e-10);
        let mut prev = f64::NEG_INFINITY;
        for &v in u.values() {
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn exact_solution_with_constant_weight_is_harmonic() {
        let g = grid(&[17, 17]);
        let b = sample_boundary(&g, |x| vec![x[0] * x[1] + x[0] * x[0]]).unwrap();
        let w = make_weight(WeightSpec::Constant { c: 0.3 }).unwrap();
        let u = solve_scalar_exact(&g, &w, &b).unwrap();
        let h = harmonic_extension(&g, &b).unwrap();
        assert!(u.sup_distance(&h).unwrap() < 1e-10);
    }

    #[test]
    fn exact_solution_residual_is_second_order() {
        let w = neg_square();
        let mut res = Vec::new();
        for nodes in [17, 33, 65] {
            let g = grid(&[nodes]);
            let b = sample_boundary(&g, |x| vec![x[0]]).unwrap();
            let u = solve_scalar_exact(&g, &w, &b).unwrap();
            res.push(el_residual(&u, &w, None).unwrap().sup_norm());
        }
        for pair in res.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((3.0..=5.0).contains(&ratio), "{res:?}");
        }
    }

    #[test]
    fn source_free_picard_matches_exact() {
        let g = grid(&[21, 21]);
        let b = sample_boundary(&g, |x| vec![x[0] * x[1]]).unwrap();
        let w = neg_square();
        let exact = solve_scalar_exact(&g, &w, &b).unwrap();
        let (u, sweeps) = solve_scalar_source(
            &g,
            &w,
            &b,
            &SourceField::zeros(&g),
            PicardOptions::default(),
        )
        .unwrap();
        assert_eq!(sweeps, 1);
        assert_eq!(u, exact);

        let b = sample_boundary(&g, |_| vec![0.6]).unwrap();
        let (u, _) = solve_scalar_source(
            &g,
            &w,
            &b,
            &SourceField::zeros(&g),
            PicardOptions::default(),
        )
        .unwrap();
        assert!(u.values().iter().all(|&v| (v - 0.6).abs() < 1e-12));
    }

    /// Strong residual of `-u'' + u u'^2 - 1` at interior nodes.
    fn bbm_residual(u: &Field) -> f64 {
        let g = u.grid();
        let h = g.spacing()[0];
        let v = u.values();
        g.interior_nodes()
            .iter()
            .map(|&i| {
                let lap = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
                let d = (v[i + 1] - v[i - 1]) / (2.0 * h);
                (-lap + v[i] * d * d - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn picard_with_unit_source() {
        let w = neg_square();
        let mut res = Vec::new();
        for nodes in [17, 33, 65] {
            let g = grid(&[nodes]);
            let b = sample_boundary(&g, |_| vec![0.0]).unwrap();
            let h = SourceField::from_fn(&g, |_| 1.0).unwrap();
            let (u, _) = solve_scalar_source(&g, &w, &b, &h, PicardOptions::default()).unwrap();
            res.push(bbm_residual(&u));
        }
        assert!(res[0] < 1e-2);
        for pair in res.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((3.0..=5.0).contains(&ratio), "{res:?}");
        }
    }

    #[test]
    fn two_scalar_forms_agree() {
        // -u'' + u|u'|^2 and the m-form with m = -u^2 are the same equation
        let w = neg_square();
        let mut errs = Vec::new();
        for nodes in [17, 33, 65] {
            let g = grid(&[nodes, nodes]);
            let u = Field::from_fn(g.clone(), 1, |x| vec![0.7 * x[0] * x[1] + 0.2 * x[0].sin()])
                .unwrap();
            let r = el_residual(&u, &w, None).unwrap();
            let h = g.spacing()[0];
            let s = g.strides()[0];
            let v = u.values();
            let mut worst = 0.0f64;
            for &p in g.interior_nodes() {
                let lap = (v[p + 1] + v[p - 1] + v[p + s] + v[p - s] - 4.0 * v[p]) / (h * h);
                let dx = (v[p + s] - v[p - s]) / (2.0 * h);
                let dy = (v[p + 1] - v[p - 1]) / (2.0 * h);
                let bbm = -lap + v[p] * (dx * dx + dy * dy);
                worst = worst.max((bbm - r.values()[p]).abs());
            }
            errs.push(worst);
        }
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
    }
}
