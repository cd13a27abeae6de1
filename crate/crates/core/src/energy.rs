//! Discrete weighted Dirichlet energy, its exact gradient and the strong
//! Euler-Lagrange residual.
//!
//! The energy is assembled cell by cell over the active cells of the grid.
//! In each cell the squared derivative along axis `k` is the mean of the
//! squared first differences over the cell's `2^(n-1)` edges parallel to
//! `k`; the weight `e^{f}` is evaluated at the average of the `2^n` corner
//! values. For a constant weight this reproduces the standard cross-stencil
//! Laplacian exactly. Mixed spatial terms of an anisotropic tensor use the
//! edge-averaged difference quotients.
//!
//! Assembly runs in parallel over cells with a fixed-order reduction, so
//! results do not depend on the thread count.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::weights::{ScalarFn, Weight};

/// Cells per parallel task; smaller problems are assembled on one thread.
const PAR_CHUNK: usize = 1024;

/// Exponents reported by the `∫|DU|^q` diagnostic.
pub const Q_EXPONENTS: [f64; 3] = [2.0, 2.5, 3.0];

pub type TensorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum TensorKind {
    Identity,
    Function(TensorFn),
}

/// Position-dependent coefficients `A_{ij}^{ab}(x)`.
///
/// Entries are laid out as `((i * n + j) * N + a) * N + b` for spatial
/// indices `i, j < n` and component indices `a, b < N`.
#[derive(Clone)]
pub struct CoefficientTensor {
    space_dim: usize,
    components: usize,
    kind: TensorKind,
}

impl fmt::Debug for CoefficientTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientTensor")
            .field("space_dim", &self.space_dim)
            .field("components", &self.components)
            .field("identity", &self.is_identity())
            .finish()
    }
}

impl CoefficientTensor {
    /// `A_{ij}^{ab} = δ_{ij} δ^{ab}`.
    pub fn identity(space_dim: usize, components: usize) -> Self {
        Self {
            space_dim,
            components,
            kind: TensorKind::Identity,
        }
    }

    /// General tensor; `entries(x, out)` fills all `n^2 N^2` entries at `x`.
    pub fn from_fn(space_dim: usize, components: usize, entries: TensorFn) -> Self {
        Self {
            space_dim,
            components,
            kind: TensorKind::Function(entries),
        }
    }

    /// `s · identity`.
    pub fn scaled_identity(space_dim: usize, components: usize, s: f64) -> Self {
        let diag = vec![Arc::new(move |_: &[f64]| s) as ScalarFn; space_dim];
        Self::spatial_diagonal(components, diag)
    }

    /// `A_{ij}^{ab} = δ_{ij} δ^{ab} d_i(x)`.
    pub fn spatial_diagonal(components: usize, diag: Vec<ScalarFn>) -> Self {
        let n = diag.len();
        let nc = components;
        let entries: TensorFn = Arc::new(move |x: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            for (i, d) in diag.iter().enumerate() {
                let v = d(x);
                for a in 0..nc {
                    out[((i * n + i) * nc + a) * nc + a] = v;
                }
            }
        });
        Self::from_fn(n, components, entries)
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, TensorKind::Identity)
    }

    pub fn entry_count(&self) -> usize {
        let (n, nc) = (self.space_dim, self.components);
        n * n * nc * nc
    }

    /// Raw entries at `x`.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            TensorKind::Identity => {
                let (n, nc) = (self.space_dim, self.components);
                out.fill(0.0);
                for i in 0..n {
                    for a in 0..nc {
                        out[((i * n + i) * nc + a) * nc + a] = 1.0;
                    }
                }
            }
            TensorKind::Function(f) => f(x, out),
        }
    }

    /// Entries symmetrized under `(i,a) <-> (j,b)`; returns the largest
    /// absolute change made.
    pub fn eval_symmetric(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.eval(x, out);
        let (n, nc) = (self.space_dim, self.components);
        let mut delta = 0.0f64;
        for i in 0..n {
            for j in i..n {
                for a in 0..nc {
                    for b in 0..nc {
                        let p = ((i * n + j) * nc + a) * nc + b;
                        let q = ((j * n + i) * nc + b) * nc + a;
                        if q <= p {
                            continue;
                        }
                        let m = 0.5 * (out[p] + out[q]);
                        delta = delta.max((out[p] - m).abs());
                        out[p] = m;
                        out[q] = m;
                    }
                }
            }
        }
        delta
    }

    fn check(&self, grid: &Grid, components: usize) -> Result<()> {
        if self.space_dim != grid.dim() || self.components != components {
            return Err(Error::Shape(format!(
                "tensor is {}x{}, problem is {}x{}",
                self.space_dim,
                self.components,
                grid.dim(),
                components
            )));
        }
        Ok(())
    }
}

/// Discrete energy with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyValue {
    pub value: f64,
    /// Contribution of each active cell, in [`Grid::cells`] order.
    pub per_cell: Vec<f64>,
    /// `(q, ∫|DU|^q)` for each exponent in [`Q_EXPONENTS`].
    pub q_norms: Vec<(f64, f64)>,
    /// Largest change made when symmetrizing the coefficient tensor.
    pub symmetrization_delta: f64,
}

/// Precomputed cell assembly for one grid, weight and (optional) tensor.
///
/// Works on raw node-major value slices so the optimizer can evaluate it
/// without building [`Field`]s.
pub struct EnergyFunctional {
    grid: Arc<Grid>,
    weight: Weight,
    components: usize,
    volume: f64,
    inv_h: Vec<f64>,
    inv_h2: Vec<f64>,
    inv_edges: f64,
    inv_corners: f64,
    /// Symmetrized tensor entries per active cell.
    tensors: Option<Vec<f64>>,
    entry_count: usize,
    symmetrization_delta: f64,
}

impl fmt::Debug for EnergyFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnergyFunctional")
            .field("weight", &self.weight)
            .field("components", &self.components)
            .field("anisotropic", &self.tensors.is_some())
            .finish()
    }
}

/// Scratch space for one cell.
struct CellScratch {
    mean: Vec<f64>,
    fprime: Vec<f64>,
    /// First differences per (axis, edge, component).
    diffs: Vec<f64>,
    /// Edge-averaged difference quotients per (axis, component).
    dbar: Vec<f64>,
}

impl EnergyFunctional {
    pub fn new(
        grid: Arc<Grid>,
        weight: Weight,
        components: usize,
        tensor: Option<&CoefficientTensor>,
    ) -> Result<Self> {
        if components == 0 {
            return Err(Error::Shape("energy needs at least one component".into()));
        }
        let n = grid.dim();
        let inv_h: Vec<f64> = grid.spacing().iter().map(|h| 1.0 / h).collect();
        let inv_h2: Vec<f64> = grid.spacing().iter().map(|h| 1.0 / (h * h)).collect();
        let mut symmetrization_delta = 0.0f64;
        let mut entry_count = 0;
        let tensors = match tensor {
            None => None,
            Some(t) => {
                t.check(&grid, components)?;
                entry_count = t.entry_count();
                let mut all = vec![0.0; grid.cells().len() * entry_count];
                for (slot, &cell) in all.chunks_mut(entry_count).zip(grid.cells()) {
                    let x = grid.cell_center(cell);
                    symmetrization_delta = symmetrization_delta.max(t.eval_symmetric(&x, slot));
                }
                if let Some(i) = all.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "tensor entry {} at cell {}",
                        i % entry_count,
                        i / entry_count
                    )));
                }
                Some(all)
            }
        };
        Ok(Self {
            volume: grid.cell_volume(),
            inv_edges: 1.0 / (1usize << (n - 1)) as f64,
            inv_corners: 1.0 / (1usize << n) as f64,
            grid,
            weight,
            components,
            inv_h,
            inv_h2,
            tensors,
            entry_count,
            symmetrization_delta,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn symmetrization_delta(&self) -> f64 {
        self.symmetrization_delta
    }

    fn scratch(&self) -> CellScratch {
        let n = self.grid.dim();
        let nc = self.components;
        let edges = 1usize << (n - 1);
        CellScratch {
            mean: vec![0.0; nc],
            fprime: vec![0.0; nc],
            diffs: vec![0.0; n * edges * nc],
            dbar: vec![0.0; n * nc],
        }
    }

    /// Fills mean, differences and edge averages for the cell at `lower`.
    fn load_cell(&self, lower: usize, u: &[f64], s: &mut CellScratch) {
        let n = self.grid.dim();
        let nc = self.components;
        let offsets = self.grid.corner_offsets();
        let edges = 1usize << (n - 1);
        s.mean.fill(0.0);
        for &off in offsets {
            let node = lower + off;
            for a in 0..nc {
                s.mean[a] += u[node * nc + a];
            }
        }
        for m in s.mean.iter_mut() {
            *m *= self.inv_corners;
        }
        for k in 0..n {
            let mut e = 0;
            for c in 0..offsets.len() {
                if c & (1 << k) != 0 {
                    continue;
                }
                let lo = lower + offsets[c];
                let hi = lower + offsets[c | (1 << k)];
                for a in 0..nc {
                    s.diffs[(k * edges + e) * nc + a] = u[hi * nc + a] - u[lo * nc + a];
                }
                e += 1;
            }
            for a in 0..nc {
                let sum: f64 = (0..edges).map(|e| s.diffs[(k * edges + e) * nc + a]).sum();
                s.dbar[k * nc + a] = sum * self.inv_h[k] * self.inv_edges;
            }
        }
    }

    /// Mean over the `k`-edges of `d^a d^b / h_k^2`.
    #[inline]
    fn edge_product(&self, s: &CellScratch, k: usize, a: usize, b: usize) -> f64 {
        let nc = self.components;
        let edges = 1usize << (self.grid.dim() - 1);
        let sum: f64 = (0..edges)
            .map(|e| s.diffs[(k * edges + e) * nc + a] * s.diffs[(k * edges + e) * nc + b])
            .sum();
        sum * self.inv_h2[k] * self.inv_edges
    }

    /// Unweighted `|DU|^2` of the loaded cell.
    fn plain_gradient_sq(&self, s: &CellScratch) -> f64 {
        let mut q = 0.0;
        for k in 0..self.grid.dim() {
            for a in 0..self.components {
                q += self.edge_product(s, k, a, a);
            }
        }
        q
    }

    /// Quadratic form of the loaded cell (tensor slot `cell_slot`).
    fn quadratic_form(&self, s: &CellScratch, cell_slot: usize) -> f64 {
        let n = self.grid.dim();
        let nc = self.components;
        let Some(tensors) = &self.tensors else {
            return self.plain_gradient_sq(s);
        };
        let t = &tensors[cell_slot * self.entry_count..(cell_slot + 1) * self.entry_count];
        let at = |i: usize, j: usize, a: usize, b: usize| t[((i * n + j) * nc + a) * nc + b];
        let mut q = 0.0;
        for k in 0..n {
            for a in 0..nc {
                q += at(k, k, a, a) * self.edge_product(s, k, a, a);
            }
        }
        for i in 0..n {
            for j in 0..n {
                for a in 0..nc {
                    for b in 0..nc {
                        if i == j && a == b {
                            continue;
                        }
                        let c = at(i, j, a, b);
                        if c == 0.0 {
                            continue;
                        }
                        q += if i == j {
                            c * self.edge_product(s, i, a, b)
                        } else {
                            c * s.dbar[i * nc + a] * s.dbar[j * nc + b]
                        };
                    }
                }
            }
        }
        q
    }

    /// Weighted contribution of one cell.
    fn cell_energy(&self, cell_slot: usize, u: &[f64], s: &mut CellScratch) -> f64 {
        let lower = self.grid.cells()[cell_slot];
        self.load_cell(lower, u, s);
        let q = self.quadratic_form(s, cell_slot);
        self.volume * self.weight.f(&s.mean).exp() * q
    }

    /// Cell contribution and its derivative with respect to every corner
    /// value, written corner-major into `out`.
    fn cell_gradient(
        &self,
        cell_slot: usize,
        u: &[f64],
        s: &mut CellScratch,
        out: &mut [f64],
    ) -> f64 {
        let n = self.grid.dim();
        let nc = self.components;
        let lower = self.grid.cells()[cell_slot];
        let corners = 1usize << n;
        let edges = 1usize << (n - 1);
        self.load_cell(lower, u, s);
        let q = self.quadratic_form(s, cell_slot);
        let (f, _) = self.weight.eval_into(&s.mean, &mut s.fprime);
        let ef = f.exp();
        let scale = self.volume * ef;
        let tensors = self
            .tensors
            .as_ref()
            .map(|t| &t[cell_slot * self.entry_count..(cell_slot + 1) * self.entry_count]);
        let at =
            |t: &[f64], i: usize, j: usize, a: usize, b: usize| t[((i * n + j) * nc + a) * nc + b];

        for c in 0..corners {
            for a in 0..nc {
                let mut dq = 0.0;
                for k in 0..n {
                    let e = edge_ordinal(c & !(1 << k), k);
                    let sign = if c & (1 << k) != 0 { 1.0 } else { -1.0 };
                    let d = s.diffs[(k * edges + e) * nc + a];
                    let two_d = match tensors {
                        None => 2.0 * d,
                        Some(t) => (at(t, k, k, a, a) + at(t, k, k, a, a)) * d,
                    };
                    dq += sign * two_d * self.inv_h2[k] * self.inv_edges;
                }
                if let Some(t) = tensors {
                    let mut extra: Option<f64> = None;
                    let mut add = |v: f64| *extra.get_or_insert(0.0) += v;
                    for k in 0..n {
                        let e = edge_ordinal(c & !(1 << k), k);
                        let sign = if c & (1 << k) != 0 { 1.0 } else { -1.0 };
                        for b in 0..nc {
                            if b == a {
                                continue;
                            }
                            let coef = at(t, k, k, a, b) + at(t, k, k, b, a);
                            if coef != 0.0 {
                                let d = s.diffs[(k * edges + e) * nc + b];
                                add(sign * coef * d * self.inv_h2[k] * self.inv_edges);
                            }
                        }
                    }
                    for i in 0..n {
                        let si = if c & (1 << i) != 0 { 1.0 } else { -1.0 };
                        for j in 0..n {
                            if i == j {
                                continue;
                            }
                            let sj = if c & (1 << j) != 0 { 1.0 } else { -1.0 };
                            for b in 0..nc {
                                let c1 = at(t, i, j, a, b);
                                if c1 != 0.0 {
                                    add(c1
                                        * si
                                        * self.inv_h[i]
                                        * self.inv_edges
                                        * s.dbar[j * nc + b]);
                                }
                                let c2 = at(t, i, j, b, a);
                                if c2 != 0.0 {
                                    add(c2
                                        * s.dbar[i * nc + b]
                                        * sj
                                        * self.inv_h[j]
                                        * self.inv_edges);
                                }
                            }
                        }
                    }
                    if let Some(x) = extra {
                        dq += x;
                    }
                }
                out[c * nc + a] = scale * (s.fprime[a] * self.inv_corners * q + dq);
            }
        }
        scale * q
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.grid.node_count() * self.components {
            return Err(Error::Shape(format!(
                "{} values for {} nodes x {} components",
                u.len(),
                self.grid.node_count(),
                self.components
            )));
        }
        Ok(())
    }

    /// Per-cell contributions in cell order.
    pub fn per_cell(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        let ncell = self.grid.cells().len();
        let mut out = vec![0.0; ncell];
        out.par_chunks_mut(PAR_CHUNK)
            .with_min_len(1)
            .enumerate()
            .for_each(|(chunk, slots)| {
                let mut s = self.scratch();
                for (i, slot) in slots.iter_mut().enumerate() {
                    *slot = self.cell_energy(chunk * PAR_CHUNK + i, u, &mut s);
                }
            });
        Ok(out)
    }

    pub fn value(&self, u: &[f64]) -> Result<f64> {
        let value: f64 = self.per_cell(u)?.iter().sum();
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("energy = {value}")));
        }
        Ok(value)
    }

    /// Energy and its gradient with respect to interior values; boundary
    /// and exterior entries of `grad` are zero.
    pub fn value_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(grad)?;
        let nc = self.components;
        let stride = self.grid.corner_offsets().len() * nc;
        let ncell = self.grid.cells().len();
        let mut local = vec![0.0; ncell * stride];
        let mut energies = vec![0.0; ncell];
        local
            .par_chunks_mut(PAR_CHUNK * stride)
            .zip(energies.par_chunks_mut(PAR_CHUNK))
            .enumerate()
            .for_each(|(chunk, (block, es))| {
                let mut s = self.scratch();
                for (i, (out, e)) in block.chunks_mut(stride).zip(es.iter_mut()).enumerate() {
                    *e = self.cell_gradient(chunk * PAR_CHUNK + i, u, &mut s, out);
                }
            });

        grad.fill(0.0);
        let classes = self.grid.classes();
        let offsets = self.grid.corner_offsets();
        for (&lower, block) in self.grid.cells().iter().zip(local.chunks(stride)) {
            for (c, &off) in offsets.iter().enumerate() {
                let node = lower + off;
                if classes[node] != crate::grid::NodeClass::Interior {
                    continue;
                }
                for a in 0..nc {
                    grad[node * nc + a] += block[c * nc + a];
                }
            }
        }
        let value: f64 = energies.iter().sum();
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "energy = {value} or its gradient"
            )));
        }
        Ok(value)
    }

    /// `(q, Σ_cells vol |DU|^q)` for the exponents in [`Q_EXPONENTS`].
    pub fn q_norms(&self, u: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.check_len(u)?;
        let mut s = self.scratch();
        let mut sums = [0.0; Q_EXPONENTS.len()];
        for &lower in self.grid.cells() {
            self.load_cell(lower, u, &mut s);
            let g2 = self.plain_gradient_sq(&s);
            for (acc, q) in sums.iter_mut().zip(Q_EXPONENTS) {
                *acc += self.volume * g2.powf(0.5 * q);
            }
        }
        Ok(Q_EXPONENTS.iter().copied().zip(sums).collect())
    }
}

/// Index of the `k`-edge whose lower corner is `c` among the cell's
/// `k`-edges, in increasing corner order.
#[inline]
fn edge_ordinal(c: usize, k: usize) -> usize {
    // drop bit k from c
    let low = c & ((1 << k) - 1);
    let high = (c >> (k + 1)) << k;
    low | high
}

fn check_field(field: &Field, tensor: Option<&CoefficientTensor>) -> Result<()> {
    if let Some(i) = field.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("field slot {i}")));
    }
    if let Some(t) = tensor {
        t.check(field.grid(), field.components())?;
    }
    Ok(())
}

/// Discrete energy `Σ_cells vol e^{f(Ū)} A(DU, DU)`, with `A` the identity
/// when no tensor is given.
pub fn energy(
    field: &Field,
    w: &Weight,
    tensor: Option<&CoefficientTensor>,
) -> Result<EnergyValue> {
    check_field(field, tensor)?;
    let functional =
        EnergyFunctional::new(field.grid().clone(), w.clone(), field.components(), tensor)?;
    let per_cell = functional.per_cell(field.values())?;
    let value: f64 = per_cell.iter().sum();
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("energy = {value}")));
    }
    Ok(EnergyValue {
        value,
        q_norms: functional.q_norms(field.values())?,
        per_cell,
        symmetrization_delta: functional.symmetrization_delta(),
    })
}

/// Exact gradient of [`energy`] with respect to the interior nodal values.
pub fn grad_energy(field: &Field, w: &Weight, tensor: Option<&CoefficientTensor>) -> Result<Field> {
    check_field(field, tensor)?;
    let functional =
        EnergyFunctional::new(field.grid().clone(), w.clone(), field.components(), tensor)?;
    let mut grad = Field::zeros(field.grid().clone(), field.components());
    functional.value_and_gradient(field.values(), grad.values_mut())?;
    Ok(grad)
}

/// Strong-form residual
/// `-e^{-f(U)} div(e^{f(U)} A ∇U) + ½ f'(U) A(∇U, ∇U)` at interior nodes,
/// using flux differencing with edge-midpoint weights and central
/// differences for the quadratic term. Non-interior entries are zero.
pub fn el_residual(field: &Field, w: &Weight, tensor: Option<&CoefficientTensor>) -> Result<Field> {
    check_field(field, tensor)?;
    let grid = field.grid();
    let n = grid.dim();
    let nc = field.components();
    let h = grid.spacing();
    let mut out = Field::zeros(grid.clone(), nc);
    let mut fprime = vec![0.0; nc];
    let mut mid = vec![0.0; nc];

    match tensor {
        None => {
            for &p in grid.interior_nodes() {
                let up = field.node(p).to_vec();
                let (fp, _) = w.eval_into(&up, &mut fprime);
                let mut div = vec![0.0; nc];
                let mut grad2 = 0.0;
                for k in 0..n {
                    let plus = grid
                        .neighbor(p, k, 1)
                        .expect("interior node has neighbours");
                    let minus = grid
                        .neighbor(p, k, -1)
                        .expect("interior node has neighbours");
                    let (ua, ub) = (field.node(plus), field.node(minus));
                    for a in 0..nc {
                        mid[a] = 0.5 * (up[a] + ua[a]);
                    }
                    let wp = w.f(&mid).exp();
                    for a in 0..nc {
                        mid[a] = 0.5 * (up[a] + ub[a]);
                    }
                    let wm = w.f(&mid).exp();
                    let inv_h2 = 1.0 / (h[k] * h[k]);
                    for a in 0..nc {
                        div[a] += (wp * (ua[a] - up[a]) - wm * (up[a] - ub[a])) * inv_h2;
                        let c = (ua[a] - ub[a]) / (2.0 * h[k]);
                        grad2 += c * c;
                    }
                }
                let inv_w = (-fp).exp();
                let r = out.node_mut(p);
                for a in 0..nc {
                    r[a] = -inv_w * div[a] + 0.5 * fprime[a] * grad2;
                }
            }
        }
        Some(t) => anisotropic_residual(field, w, t, &mut out)?,
    }
    if out.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("residual".into()));
    }
    Ok(out)
}

/// Central derivative along `axis` at node `q`, one-sided where a
/// neighbour is missing.
fn node_derivative(field: &Field, q: usize, axis: usize, a: usize) -> f64 {
    let grid = field.grid();
    let h = grid.spacing()[axis];
    let inside = |m: Option<usize>| m.filter(|&m| grid.class(m).in_domain());
    match (
        inside(grid.neighbor(q, axis, 1)),
        inside(grid.neighbor(q, axis, -1)),
    ) {
        (Some(p), Some(m)) => (field.node(p)[a] - field.node(m)[a]) / (2.0 * h),
        (Some(p), None) => (field.node(p)[a] - field.node(q)[a]) / h,
        (None, Some(m)) => (field.node(q)[a] - field.node(m)[a]) / h,
        (None, None) => 0.0,
    }
}

fn anisotropic_residual(
    field: &Field,
    w: &Weight,
    t: &CoefficientTensor,
    out: &mut Field,
) -> Result<()> {
    let grid = field.grid();
    let n = grid.dim();
    let nc = field.components();
    let h = grid.spacing();
    let idx = |i: usize, j: usize, a: usize, b: usize| ((i * n + j) * nc + a) * nc + b;
    let mut coef = vec![0.0; t.entry_count()];
    let mut fprime = vec![0.0; nc];
    let mut mid = vec![0.0; nc];
    let mut xm = vec![0.0; n];

    for &p in grid.interior_nodes() {
        let up = field.node(p).to_vec();
        let xp = grid.coords(p);
        let (fp, _) = w.eval_into(&up, &mut fprime);
        let mut div = vec![0.0; nc];

        for i in 0..n {
            // diagonal spatial block: flux differencing at edge midpoints
            for dir in [1isize, -1] {
                let q = grid
                    .neighbor(p, i, dir)
                    .expect("interior node has neighbours");
                let uq = field.node(q);
                for a in 0..nc {
                    mid[a] = 0.5 * (up[a] + uq[a]);
                }
                xm.copy_from_slice(&xp);
                xm[i] += 0.5 * dir as f64 * h[i];
                t.eval_symmetric(&xm, &mut coef);
                let wt = w.f(&mid).exp();
                for a in 0..nc {
                    let mut flux = 0.0;
                    for b in 0..nc {
                        flux += coef[idx(i, i, a, b)] * (uq[b] - up[b]);
                    }
                    div[a] += wt * flux / (h[i] * h[i]);
                }
            }
            // mixed spatial terms: central difference of the flux
            for j in 0..n {
                if i == j {
                    continue;
                }
                for (dir, sign) in [(1isize, 1.0), (-1, -1.0)] {
                    let q = grid
                        .neighbor(p, i, dir)
                        .expect("interior node has neighbours");
                    let xq = grid.coords(q);
                    t.eval_symmetric(&xq, &mut coef);
                    let wt = w.f(field.node(q)).exp();
                    for a in 0..nc {
                        let mut flux = 0.0;
                        for b in 0..nc {
                            flux += coef[idx(i, j, a, b)] * node_derivative(field, q, j, b);
                        }
                        div[a] += sign * wt * flux / (2.0 * h[i]);
                    }
                }
            }
        }

        t.eval_symmetric(&xp, &mut coef);
        let mut form = 0.0;
        for i in 0..n {
            for j in 0..n {
                for b in 0..nc {
                    let di = node_derivative(field, p, i, b);
                    for c in 0..nc {
                        let a_ij = coef[idx(i, j, b, c)];
                        if a_ij != 0.0 {
                            form += a_ij * di * node_derivative(field, p, j, c);
                        }
                    }
                }
            }
        }
        let inv_w = (-fp).exp();
        let r = out.node_mut(p);
        for a in 0..nc {
            r[a] = -inv_w * div[a] + 0.5 * fprime[a] * form;
        }
    }
    Ok(())
}

/// Extremes of the Rayleigh quotient `A(x)ξξ / |ξ|^2` over the given
/// points and a deterministic direction set: every coordinate axis of
/// `R^{n×N}`, all normalized pairwise sums and differences of axes, and
/// `sample_dirs` quasi-random directions.
pub fn ellipticity_bounds(
    tensor: &CoefficientTensor,
    points: &[Vec<f64>],
    sample_dirs: usize,
) -> Result<(f64, f64)> {
    if sample_dirs == 0 {
        return Err(Error::Options("need at least one sample direction".into()));
    }
    if points.is_empty() {
        return Err(Error::Options("need at least one sample point".into()));
    }
    let n = tensor.space_dim();
    let nc = tensor.components();
    let dim = n * nc;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for p in 0..dim {
        let mut e = vec![0.0; dim];
        e[p] = 1.0;
        dirs.push(e);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for p in 0..dim {
        for q in p + 1..dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[p] = r;
                e[q] = s * r;
                dirs.push(e);
            }
        }
    }
    dirs.extend(crate::lowdisc::unit_vectors(dim, sample_dirs));

    let mut coef = vec![0.0; tensor.entry_count()];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in points {
        tensor.eval(x, &mut coef);
        if coef.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tensor entry at {x:?}")));
        }
        for xi in &dirs {
            // xi is indexed (i, a) -> i * nc + a
            let mut num = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for a in 0..nc {
                        for b in 0..nc {
                            num += coef[((i * n + j) * nc + a) * nc + b]
                                * xi[i * nc + a]
                                * xi[j * nc + b];
                        }
                    }
                }
            }
            let den: f64 = xi.iter().map(|v| v * v).sum();
            let rq = num / den;
            lo = lo.min(rq);
            hi = hi.max(rq);
        }
    }
    Ok((lo, hi))
}

/// Analytic gradient compared with central differences of the energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// Interior values perturbed.
    pub checked: usize,
    pub max_abs_error: f64,
    /// Largest finite-difference entry, the normalization of the relative
    /// error.
    pub scale: f64,
    pub max_rel_error: f64,
}

/// Perturbs every interior value of `field` by `±step` and compares the
/// central difference quotient with [`grad_energy`].
pub fn gradient_check(
    field: &Field,
    w: &Weight,
    tensor: Option<&CoefficientTensor>,
    step: f64,
) -> Result<GradientCheck> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Options(format!("step must be positive, got {step}")));
    }
    check_field(field, tensor)?;
    let nc = field.components();
    let functional = EnergyFunctional::new(field.grid().clone(), w.clone(), nc, tensor)?;
    let mut analytic = vec![0.0; field.values().len()];
    functional.value_and_gradient(field.values(), &mut analytic)?;
    let mut u = field.values().to_vec();
    let mut checked = 0;
    let mut max_abs_error = 0.0f64;
    let mut scale = 0.0f64;
    for &node in field.grid().interior_nodes() {
        for a in 0..nc {
            let i = node * nc + a;
            let orig = u[i];
            u[i] = orig + step;
            let ep = functional.value(&u)?;
            u[i] = orig - step;
            let em = functional.value(&u)?;
            u[i] = orig;
            let fd = (ep - em) / (2.0 * step);
            max_abs_error = max_abs_error.max((fd - analytic[i]).abs());
            scale = scale.max(fd.abs());
            checked += 1;
        }
    }
    let max_rel_error = if scale > 0.0 {
        max_abs_error / scale
    } else {
        max_abs_error
    };
    Ok(GradientCheck {
        checked,
        max_abs_error,
        scale,
        max_rel_error,
    })
}
