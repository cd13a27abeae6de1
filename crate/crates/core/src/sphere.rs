//! Harmonic maps into the unit sphere `S^N ⊂ R^{N+1}`.
//!
//! In stereographic coordinates from a pole `P` the round metric is
//! `4 / (1 + |Y|^2)^2 dY^2`, so a harmonic map is a critical point of the
//! weighted energy with the `sphere_chart(2)` weight. Solving in the chart
//! at `P` and again in the chart at `-P` gives two maps with the same
//! boundary values.

use std::sync::Arc;

use crate::energy::energy;
use crate::error::{Error, Result};
use crate::grid::{BoundaryData, Field, Grid};
use crate::lowdisc;
use crate::optimizer::{minimize, AdmissibleSet, SolveOptions, SolveReport};
use crate::weights::{make_weight, Weight, WeightSpec};

/// Allowed deviation from unit length for sphere points.
pub const UNIT_TOL: f64 = 1e-12;
/// Smallest admissible distance of a projected point from the pole.
pub const POLE_EXCLUSION: f64 = 1e-8;
/// Smallest acceptable pole margin.
pub const MIN_MARGIN: f64 = 1e-3;
/// Added to the projected boundary data to obtain the chart box bound.
pub const CHART_MARGIN: f64 = 0.5;
/// Candidate poles examined by default.
pub const DEFAULT_CANDIDATES: usize = 512;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Unit vector in `R^{N+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(Vec<f64>);

impl SpherePoint {
    /// Accepts `coords` if its length is within [`UNIT_TOL`] of one.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Sphere(
                "sphere points need at least two coordinates".into(),
            ));
        }
        let r = norm(&coords);
        if !((r - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::Sphere(format!("point {coords:?} has length {r}")));
        }
        Ok(Self(coords))
    }

    /// Scales `coords` to unit length.
    pub fn normalized(coords: Vec<f64>) -> Result<Self> {
        let r = norm(&coords);
        if coords.len() < 2 || !(r > 0.0 && r.is_finite()) {
            return Err(Error::Sphere(format!("cannot normalize {coords:?}")));
        }
        Ok(Self(coords.into_iter().map(|x| x / r).collect()))
    }

    /// Standard basis vector `e_axis` of `R^ambient`.
    pub fn basis(ambient: usize, axis: usize) -> Self {
        let mut v = vec![0.0; ambient];
        v[axis] = 1.0;
        Self(v)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Ambient dimension `N + 1`.
    pub fn ambient_dim(&self) -> usize {
        self.0.len()
    }

    pub fn antipode(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }
}

/// A pole `P` with an orthonormal frame `e_1 .. e_N` of its orthogonal
/// complement; `P` plays the role of the last axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPole {
    pole: SpherePoint,
    frame: Vec<Vec<f64>>,
}

impl ChartPole {
    /// Completes `pole` to a basis by Gram-Schmidt on the standard basis,
    /// skipping the axis where `|P|` is largest. `P` and `-P` share a frame.
    pub fn new(pole: SpherePoint) -> Self {
        let p = pole.coords();
        let d = p.len();
        let mut skip = 0;
        for k in 1..d {
            if p[k].abs() > p[skip].abs() {
                skip = k;
            }
        }
        let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
        for k in (0..d).filter(|&k| k != skip) {
            let mut v = vec![0.0; d];
            v[k] = 1.0;
            for _ in 0..2 {
                let c = dot(&v, p);
                for (x, q) in v.iter_mut().zip(p) {
                    *x -= c * q;
                }
                for e in &frame {
                    let c = dot(&v, e);
                    for (x, q) in v.iter_mut().zip(e) {
                        *x -= c * q;
                    }
                }
            }
            let r = norm(&v);
            frame.push(v.into_iter().map(|x| x / r).collect());
        }
        Self { pole, frame }
    }

    pub fn pole(&self) -> &SpherePoint {
        &self.pole
    }

    /// Frame vectors `e_1 .. e_N`.
    pub fn frame(&self) -> &[Vec<f64>] {
        &self.frame
    }

    /// Chart dimension `N`.
    pub fn chart_dim(&self) -> usize {
        self.frame.len()
    }

    /// Same frame, opposite pole.
    pub fn opposite(&self) -> Self {
        Self {
            pole: self.pole.antipode(),
            frame: self.frame.clone(),
        }
    }
}

/// Stereographic coordinates of `p` from `pole`.
pub fn stereo_project(pole: &ChartPole, p: &SpherePoint) -> Result<Vec<f64>> {
    project_coords(pole, p.coords())
}

fn project_coords(pole: &ChartPole, p: &[f64]) -> Result<Vec<f64>> {
    if p.len() != pole.pole.ambient_dim() {
        return Err(Error::Shape(format!(
            "point has {} coordinates, chart expects {}",
            p.len(),
            pole.pole.ambient_dim()
        )));
    }
    let gap = distance(p, pole.pole.coords());
    if !(gap >= POLE_EXCLUSION) {
        return Err(Error::Sphere(format!(
            "point lies at the pole (distance {gap:e})"
        )));
    }
    let denom = 1.0 - dot(p, pole.pole.coords());
    Ok(pole.frame.iter().map(|e| dot(e, p) / denom).collect())
}

/// Point of the sphere with stereographic coordinates `y`.
pub fn stereo_inverse(pole: &ChartPole, y: &[f64]) -> Result<SpherePoint> {
    if y.len() != pole.chart_dim() {
        return Err(Error::Shape(format!(
            "chart vector has {} entries, chart dimension is {}",
            y.len(),
            pole.chart_dim()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("chart vector {y:?}")));
    }
    let mut out = vec![0.0; pole.pole.ambient_dim()];
    inverse_into(pole, y, &mut out);
    Ok(SpherePoint(out))
}

fn inverse_into(pole: &ChartPole, y: &[f64], out: &mut [f64]) {
    let r2: f64 = y.iter().map(|v| v * v).sum();
    let s = 1.0 / (1.0 + r2);
    let last = (r2 - 1.0) * s;
    for (o, p) in out.iter_mut().zip(pole.pole.coords()) {
        *o = last * p;
    }
    for (yi, e) in y.iter().zip(&pole.frame) {
        let c = 2.0 * yi * s;
        for (o, q) in out.iter_mut().zip(e) {
            *o += c * q;
        }
    }
    let r = norm(out);
    for o in out.iter_mut() {
        *o /= r;
    }
}

/// Pole together with its distance to the boundary data.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleChoice {
    pub pole: ChartPole,
    /// `min_s min(|P - s|, |P + s|)` over the samples.
    pub margin: f64,
}

fn margin(pole: &[f64], samples: &[SpherePoint]) -> f64 {
    samples.iter().fold(f64::INFINITY, |m, s| {
        let plus = distance(pole, s.coords());
        let minus = s
            .coords()
            .iter()
            .zip(pole)
            .map(|(x, p)| (x + p) * (x + p))
            .sum::<f64>()
            .sqrt();
        m.min(plus.min(minus))
    })
}

/// Deterministic, roughly uniform candidate poles on `S^{ambient-1}`.
fn candidate_poles(ambient: usize, count: usize) -> Vec<Vec<f64>> {
    match ambient {
        2 => (0..count)
            .map(|k| {
                let t = std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => lowdisc::unit_vectors(ambient, count),
    }
}

/// Pole maximizing the distance of `{P, -P}` to the boundary samples over a
/// fixed candidate set.
pub fn choose_poles(boundary: &[SpherePoint], candidates: usize) -> Result<PoleChoice> {
    if candidates < 16 {
        return Err(Error::Options(format!(
            "need at least 16 candidate poles, got {candidates}"
        )));
    }
    let ambient = ambient_of(boundary)?;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for c in candidate_poles(ambient, candidates) {
        let m = margin(&c, boundary);
        if best.as_ref().is_none_or(|(_, b)| m > *b) {
            best = Some((c, m));
        }
    }
    let (p, m) = best.expect("candidate set is non-empty");
    if m < MIN_MARGIN {
        return Err(Error::NoPole {
            margin: m,
            threshold: MIN_MARGIN,
        });
    }
    Ok(PoleChoice {
        pole: ChartPole::new(SpherePoint::normalized(p)?),
        margin: m,
    })
}

fn ambient_of(samples: &[SpherePoint]) -> Result<usize> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Sphere("no boundary samples".into()))?;
    let d = first.ambient_dim();
    if samples.iter().any(|s| s.ambient_dim() != d) {
        return Err(Error::Shape(
            "boundary samples have mixed dimensions".into(),
        ));
    }
    Ok(d)
}

/// Pole used by [`solve_harmonic_pair`]: the normalized mean of the
/// boundary samples when it clears them by [`MIN_MARGIN`], otherwise the
/// result of [`choose_poles`].
///
/// The mean direction keeps data that is symmetric about it symmetric in
/// both charts, so the solve at `-P` stays near the data and the solve at
/// `P` wraps around the far side of the sphere.
pub fn pair_pole(boundary: &[SpherePoint], candidates: usize) -> Result<PoleChoice> {
    let ambient = ambient_of(boundary)?;
    let mut mean = vec![0.0; ambient];
    for s in boundary {
        for (m, x) in mean.iter_mut().zip(s.coords()) {
            *m += x;
        }
    }
    if norm(&mean) > 1e-8 * boundary.len() as f64 {
        let p = SpherePoint::normalized(mean)?;
        let m = margin(p.coords(), boundary);
        if m >= MIN_MARGIN {
            return Ok(PoleChoice {
                pole: ChartPole::new(p),
                margin: m,
            });
        }
    }
    choose_poles(boundary, candidates)
}

/// One chart solve mapped back to the sphere.
#[derive(Debug, Clone)]
pub struct SphereMapResult {
    pub pole: ChartPole,
    /// Stereographic coordinates `U` (N components).
    pub chart: Field,
    /// Mapped-back map `V` (N + 1 components, unit at in-domain nodes).
    pub sphere: Field,
    /// Weighted chart energy `E(U)`.
    pub chart_energy: f64,
    /// Dirichlet energy `∫|DV|^2`.
    pub dirichlet_energy: f64,
    pub residual: f64,
    pub report: SolveReport,
}

impl SphereMapResult {
    /// Largest nodewise distance to another result on the same grid.
    pub fn sup_distance(&self, other: &SphereMapResult) -> Result<f64> {
        let (a, b) = (&self.sphere, &other.sphere);
        if a.components() != b.components() || **a.grid() != **b.grid() {
            return Err(Error::Shape("results live on different grids".into()));
        }
        let d = a.components();
        Ok(a.values()
            .chunks(d)
            .zip(b.values().chunks(d))
            .map(|(x, y)| distance(x, y))
            .fold(0.0, f64::max))
    }
}

fn chart_weight() -> Weight {
    make_weight(WeightSpec::SphereChart { beta: 2.0 }).expect("valid weight")
}

/// Splits sphere-valued boundary data into points, checking unit length.
pub fn boundary_points(boundary: &BoundaryData) -> Result<Vec<SpherePoint>> {
    boundary
        .values()
        .chunks(boundary.components())
        .map(|v| SpherePoint::new(v.to_vec()))
        .collect()
}

/// Solves in the chart at `pole` and maps the result back.
pub fn solve_in_chart(
    grid: &Arc<Grid>,
    boundary: &BoundaryData,
    pole: &ChartPole,
    opts: &SolveOptions,
) -> Result<SphereMapResult> {
    let points = boundary_points(boundary)?;
    if points.first().map(|p| p.ambient_dim()) != Some(pole.pole.ambient_dim()) {
        return Err(Error::Shape(
            "boundary data and pole disagree on dimension".into(),
        ));
    }
    let n = pole.chart_dim();
    let mut projected = Vec::with_capacity(points.len() * n);
    for p in &points {
        projected.extend(stereo_project(pole, p)?);
    }
    let chart_data = BoundaryData::new(n, projected)?;
    let bound = chart_data
        .abs_max()
        .into_iter()
        .map(|c| c + CHART_MARGIN)
        .collect();
    let adm = AdmissibleSet::new(bound, chart_data)?;
    let w = chart_weight();
    let (chart, report) = minimize(grid, &w, &adm, None, opts)?;
    let sphere = map_back(&chart, pole)?;
    Ok(SphereMapResult {
        pole: pole.clone(),
        chart_energy: report.final_energy(),
        dirichlet_energy: dirichlet_energy(&sphere)?,
        residual: harmonic_residual(&sphere)?,
        chart,
        sphere,
        report,
    })
}

/// `V = stereo_inverse(U)` at in-domain nodes; exterior nodes stay zero.
pub fn map_back(chart: &Field, pole: &ChartPole) -> Result<Field> {
    let n = pole.chart_dim();
    if chart.components() != n {
        return Err(Error::Shape("chart field does not match the pole".into()));
    }
    let grid = chart.grid();
    let d = n + 1;
    let mut out = Field::zeros(grid.clone(), d);
    for node in 0..grid.node_count() {
        if grid.class(node).in_domain() {
            inverse_into(pole, chart.node(node), out.node_mut(node));
        }
    }
    Ok(out)
}

/// `∫|DV|^2` with the unweighted discrete energy.
pub fn dirichlet_energy(field: &Field) -> Result<f64> {
    let flat = make_weight(WeightSpec::Constant { c: 0.0 }).expect("valid weight");
    Ok(energy(field, &flat, None)?.value)
}

/// Both harmonic maps: chart at the pole from [`pair_pole`] and chart at
/// its antipode. The first result is the solve at `P`, the second at `-P`.
pub fn solve_harmonic_pair(
    grid: &Arc<Grid>,
    boundary: &BoundaryData,
    opts: &SolveOptions,
) -> Result<(SphereMapResult, SphereMapResult)> {
    let points = boundary_points(boundary)?;
    let choice = pair_pole(&points, DEFAULT_CANDIDATES)?;
    solve_harmonic_pair_with_pole(grid, boundary, &choice.pole, opts)
}

/// As [`solve_harmonic_pair`] with a caller-chosen pole.
pub fn solve_harmonic_pair_with_pole(
    grid: &Arc<Grid>,
    boundary: &BoundaryData,
    pole: &ChartPole,
    opts: &SolveOptions,
) -> Result<(SphereMapResult, SphereMapResult)> {
    if grid.dim() > pole.chart_dim() {
        log::warn!(
            "domain dimension {} exceeds target dimension {}; a valid pole is not guaranteed",
            grid.dim(),
            pole.chart_dim()
        );
    }
    let opposite = pole.opposite();
    let (a, b) = rayon::join(
        || solve_in_chart(grid, boundary, pole, opts),
        || solve_in_chart(grid, boundary, &opposite, opts),
    );
    Ok((a?, b?))
}

/// `max |Δ_h V + |D_h V|^2 V|` over interior nodes, with central stencils.
pub fn harmonic_residual(field: &Field) -> Result<f64> {
    let grid = field.grid();
    let d = field.components();
    for node in 0..grid.node_count() {
        if grid.class(node).in_domain() {
            let r = norm(field.node(node));
            if !((r - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::Sphere(format!("node {node} has length {r}")));
            }
        }
    }
    let h = grid.spacing();
    let mut lap = vec![0.0; d];
    let mut worst = 0.0f64;
    for &p in grid.interior_nodes() {
        let v = field.node(p);
        lap.fill(0.0);
        let mut grad2 = 0.0;
        for k in 0..grid.dim() {
            let plus = field.node(
                grid.neighbor(p, k, 1)
                    .expect("interior node has neighbours"),
            );
            let minus = field.node(
                grid.neighbor(p, k, -1)
                    .expect("interior node has neighbours"),
            );
            for a in 0..d {
                lap[a] += (plus[a] - 2.0 * v[a] + minus[a]) / (h[k] * h[k]);
                let c = (plus[a] - minus[a]) / (2.0 * h[k]);
                grad2 += c * c;
            }
        }
        let r = lap
            .iter()
            .zip(v)
            .map(|(l, x)| (l + grad2 * x) * (l + grad2 * x))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(r);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, sample_boundary, DomainSpec, Mask};
    use std::f64::consts::PI;

    fn line(nodes: usize) -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::unit_box(1), &[nodes]).unwrap())
    }

    fn geodesic_data(g: &Grid) -> BoundaryData {
        sample_boundary(g, |x| {
            if x[0] < 0.5 {
                vec![1.0, 0.0, 0.0]
            } else {
                vec![0.0, 1.0, 0.0]
            }
        })
        .unwrap()
    }

    #[test]
    fn frame_is_orthonormal() {
        for p in [
            vec![0.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![0.3, -0.4, 0.5, 0.7],
            vec![-1.0, 2.0],
        ] {
            let c = ChartPole::new(SpherePoint::normalized(p).unwrap());
            let mut all = c.frame().to_vec();
            all.push(c.pole().coords().to_vec());
            for (i, a) in all.iter().enumerate() {
                for (j, b) in all.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(a, b) - want).abs() <= 1e-12);
                }
            }
            assert_eq!(c.opposite().frame(), c.frame());
        }
    }

    #[test]
    fn projection_examples() {
        let pole = ChartPole::new(SpherePoint::basis(3, 2));
        let y = stereo_project(&pole, &SpherePoint::basis(3, 2).antipode()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        let e = &pole.frame()[0];
        let y = stereo_project(&pole, &SpherePoint::new(e.clone()).unwrap()).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-15 && y[1].abs() < 1e-15);
        assert!(matches!(
            stereo_project(&pole, &SpherePoint::basis(3, 2)),
            Err(Error::Sphere(_))
        ));
        assert_eq!(
            stereo_inverse(&pole, &[0.0, 0.0]).unwrap(),
            SpherePoint::basis(3, 2).antipode()
        );
    }

    #[test]
    fn chart_round_trip_and_far_field() {
        let pole = ChartPole::new(SpherePoint::normalized(vec![0.2, -0.5, 0.8, 0.1]).unwrap());
        for v in lowdisc::unit_vectors(4, 200) {
            let p = SpherePoint::new(v).unwrap();
            if distance(p.coords(), pole.pole().coords()) < 1e-3 {
                continue;
            }
            let back = stereo_inverse(&pole, &stereo_project(&pole, &p).unwrap()).unwrap();
            assert!(distance(back.coords(), p.coords()) <= 1e-12);
        }
        for y in [[10.0, 0.0, 0.0], [30.0, -40.0, 5.0], [0.0, 0.0, -1e4]] {
            let p = stereo_inverse(&pole, &y).unwrap();
            assert!(distance(p.coords(), pole.pole().coords()) <= 2.0 / norm(&y));
            assert!((norm(p.coords()) - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn pullback_metric_matches_chart_weight() {
        // |d/dt inverse(Y + t v)|^2 = 4 / (1 + |Y|^2)^2 |v|^2
        let pole = ChartPole::new(SpherePoint::basis(3, 2));
        let w = chart_weight();
        let y = [0.7, -1.3];
        let v = [0.6, 0.8];
        let t = 1e-6;
        let a = stereo_inverse(&pole, &[y[0] + t * v[0], y[1] + t * v[1]]).unwrap();
        let b = stereo_inverse(&pole, &[y[0] - t * v[0], y[1] - t * v[1]]).unwrap();
        let speed2 = distance(a.coords(), b.coords()).powi(2) / (4.0 * t * t);
        assert!((speed2 - w.f(&y).exp()).abs() <= 1e-8);
    }

    #[test]
    fn pole_for_constant_data() {
        let data = vec![SpherePoint::basis(3, 0); 10];
        let c = choose_poles(&data, 256).unwrap();
        assert!(c.margin >= 1.0);
        assert!((margin(c.pole.pole().coords(), &data) - c.margin).abs() == 0.0);
    }

    #[test]
    fn pole_for_equator_data() {
        let data: Vec<_> = (0..64)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 64.0;
                SpherePoint::normalized(vec![t.cos(), t.sin(), 0.0]).unwrap()
            })
            .collect();
        let c = choose_poles(&data, 256).unwrap();
        assert!(c.pole.pole().coords()[2].abs() > 0.99);
        assert!((c.margin - 2f64.sqrt()).abs() < 0.1);
    }

    #[test]
    fn dense_circle_has_no_pole() {
        let data: Vec<_> = (0..20000)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 20000.0;
                SpherePoint::normalized(vec![t.cos(), t.sin()]).unwrap()
            })
            .collect();
        assert!(matches!(choose_poles(&data, 64), Err(Error::NoPole { .. })));
        assert!(choose_poles(&data, 8).is_err());
    }

    #[test]
    fn constant_boundary_gives_constant_maps() {
        let g = line(21);
        let b = sample_boundary(&g, |_| vec![1.0, 0.0, 0.0]).unwrap();
        let (a, c) = solve_harmonic_pair(&g, &b, &SolveOptions::default()).unwrap();
        for r in [&a, &c] {
            assert!(r.dirichlet_energy <= 1e-24);
            for v in r.sphere.values().chunks(3) {
                assert!(distance(v, &[1.0, 0.0, 0.0]) <= 1e-15);
            }
        }
    }

    #[test]
    fn geodesic_pair() {
        let g = line(201);
        let (long, short) =
            solve_harmonic_pair(&g, &geodesic_data(&g), &SolveOptions::default()).unwrap();
        assert!(long.report.converged && short.report.converged);
        let (e_short, e_long) = (PI * PI / 4.0, 9.0 * PI * PI / 4.0);
        assert!(
            (short.dirichlet_energy / e_short - 1.0).abs() <= 0.02,
            "{}",
            short.dirichlet_energy
        );
        assert!(
            (long.dirichlet_energy / e_long - 1.0).abs() <= 0.02,
            "{}",
            long.dirichlet_energy
        );
        assert!(long.sup_distance(&short).unwrap() >= 1.0);
        for r in [&long, &short] {
            for v in r.sphere.values().chunks(3) {
                assert!((norm(v) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn chart_consistency() {
        let g = line(41);
        let (a, _) = solve_harmonic_pair(&g, &geodesic_data(&g), &SolveOptions::default()).unwrap();
        for node in 0..g.node_count() {
            let p = SpherePoint::new(a.sphere.node(node).to_vec()).unwrap();
            let y = stereo_project(&a.pole, &p).unwrap();
            for (u, v) in y.iter().zip(a.chart.node(node)) {
                assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn antipodal_symmetry() {
        let g = line(41);
        let b = geodesic_data(&g);
        let neg = BoundaryData::new(3, b.values().iter().map(|v| -v).collect()).unwrap();
        let pole = pair_pole(&boundary_points(&b).unwrap(), DEFAULT_CANDIDATES)
            .unwrap()
            .pole;
        let opts = SolveOptions::default();
        let (a1, a2) = solve_harmonic_pair_with_pole(&g, &b, &pole, &opts).unwrap();
        let (b1, b2) = solve_harmonic_pair_with_pole(&g, &neg, &pole.opposite(), &opts).unwrap();
        // the solve at -P with data -φ is the negated solve at P with data φ
        for (x, y) in [(&a1, &b1), (&a2, &b2)] {
            let flipped: Vec<f64> = y.sphere.values().iter().map(|v| -v).collect();
            let d = x
                .sphere
                .values()
                .iter()
                .zip(&flipped)
                .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            assert!(d <= 1e-10);
            assert!((x.dirichlet_energy - y.dirichlet_energy).abs() <= 1e-10);
        }
    }

    fn geodesic_field(nodes: usize) -> Field {
        let g = line(nodes);
        Field::from_fn(g, 3, |x| {
            let t = 0.5 * PI * x[0];
            vec![t.cos(), t.sin(), 0.0]
        })
        .unwrap()
    }

    #[test]
    fn residual_of_sampled_geodesic_is_second_order() {
        let r: Vec<f64> = [17, 33, 65, 129]
            .iter()
            .map(|&n| harmonic_residual(&geodesic_field(n)).unwrap())
            .collect();
        for pair in r.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((3.0..=5.0).contains(&ratio), "{r:?}");
        }
    }

    #[test]
    fn residual_detects_bump() {
        let g = line(21);
        let mut v = Field::from_fn(g.clone(), 3, |_| vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(harmonic_residual(&v).unwrap(), 0.0);
        let bumped = SpherePoint::normalized(vec![0.1, 0.0, 1.0]).unwrap();
        v.node_mut(10).copy_from_slice(bumped.coords());
        let h = g.spacing()[0];
        assert!(harmonic_residual(&v).unwrap() >= 0.05 / (h * h));
        v.node_mut(10)[0] = 0.5;
        assert!(matches!(harmonic_residual(&v), Err(Error::Sphere(_))));
    }

    #[test]
    fn chart_energy_matches_dirichlet_energy() {
        let mut gaps = Vec::new();
        for nodes in [17, 33, 65] {
            let g = line(nodes);
            let (a, _) =
                solve_harmonic_pair(&g, &geodesic_data(&g), &SolveOptions::default()).unwrap();
            gaps.push((a.chart_energy - a.dirichlet_energy).abs());
        }
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
    }

    #[test]
    fn latitude_circle_gives_two_maps() {
        let dom = DomainSpec::masked_box(
            vec![(-1.0, 1.0), (-1.0, 1.0)],
            Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1] <= 1.0 + 1e-12) as Mask,
        );
        let g = Arc::new(build_grid(&dom, &[21, 21]).unwrap());
        let z: f64 = 0.3;
        let rho = (1.0 - z * z).sqrt();
        let b = sample_boundary(&g, |x| {
            let t = x[1].atan2(x[0]);
            vec![rho * t.cos(), rho * t.sin(), z]
        })
        .unwrap();
        let (a, c) = solve_harmonic_pair(&g, &b, &SolveOptions::default()).unwrap();
        assert!(a.sup_distance(&c).unwrap() >= 0.5);
        assert!((a.dirichlet_energy - c.dirichlet_energy).abs() > 1e-3);
    }
}
