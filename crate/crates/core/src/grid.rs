//! Uniform tensor-product lattices, node classification and nodal fields.
//!
//! A [`Grid`] covers the bounding box of a [`DomainSpec`] with a uniform
//! lattice. Each node is classified as interior, boundary or exterior.
//! Nodes on the faces of the bounding box and in-domain nodes with an
//! out-of-domain axis neighbor are boundary nodes; they carry Dirichlet
//! data. Curved boundaries are staircase-approximated.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative tolerance used for membership tests and window alignment.
const ALIGN_TOL: f64 = 1e-9;

/// Indicator predicate selecting in-domain points of a masked box.
pub type Mask = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Box,
    MaskedBox,
    HalfBall,
}

/// Geometric description of the computational domain.
#[derive(Clone)]
pub struct DomainSpec {
    kind: DomainKind,
    extents: Vec<(f64, f64)>,
    mask: Option<Mask>,
    radius: Option<f64>,
}

impl fmt::Debug for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DomainSpec")
            .field("kind", &self.kind)
            .field("extents", &self.extents)
            .field("mask", &self.mask.as_ref().map(|_| "<predicate>"))
            .field("radius", &self.radius)
            .finish()
    }
}

impl DomainSpec {
    /// Axis-aligned box with the given per-axis intervals.
    pub fn new_box(extents: Vec<(f64, f64)>) -> Self {
        Self {
            kind: DomainKind::Box,
            extents,
            mask: None,
            radius: None,
        }
    }

    /// The unit cube `[0,1]^n`.
    pub fn unit_box(dim: usize) -> Self {
        Self::new_box(vec![(0.0, 1.0); dim])
    }

    /// Box whose in-domain nodes are selected by `mask`.
    pub fn masked_box(extents: Vec<(f64, f64)>, mask: Mask) -> Self {
        Self {
            kind: DomainKind::MaskedBox,
            extents,
            mask: Some(mask),
            radius: None,
        }
    }

    /// Half-ball `{x_n >= 0, |x| <= radius}` in `dim` dimensions. The
    /// bounding box is `[-R, R]^(n-1) x [0, R]`.
    pub fn half_ball(dim: usize, radius: f64) -> Self {
        let mut extents = vec![(-radius, radius); dim];
        if let Some(last) = extents.last_mut() {
            *last = (0.0, radius);
        }
        Self {
            kind: DomainKind::HalfBall,
            extents,
            mask: None,
            radius: Some(radius),
        }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self.kind {
            DomainKind::Box => true,
            DomainKind::MaskedBox => self.mask.as_ref().is_none_or(|m| m(x)),
            DomainKind::HalfBall => {
                let r = self.radius.unwrap_or(0.0);
                let r2: f64 = x.iter().map(|v| v * v).sum();
                x.last().is_some_and(|&t| t >= -ALIGN_TOL * r)
                    && r2.sqrt() <= r * (1.0 + ALIGN_TOL)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.extents.is_empty() {
            return Err(Error::Domain("domain needs at least one axis".into()));
        }
        for (axis, &(lo, hi)) in self.extents.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Domain(format!(
                    "degenerate extent [{lo}, {hi}] on axis {axis}"
                )));
            }
        }
        if self.kind == DomainKind::HalfBall {
            match self.radius {
                Some(r) if r > 0.0 && r.is_finite() => {}
                _ => return Err(Error::Domain("half-ball radius must be positive".into())),
            }
        }
        if self.kind == DomainKind::MaskedBox && self.mask.is_none() {
            return Err(Error::Domain("masked box without a mask".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::Boundary => "boundary",
            NodeClass::Exterior => "exterior",
        }
    }

    pub fn in_domain(self) -> bool {
        self != NodeClass::Exterior
    }
}

/// Uniform lattice with node classification and the list of active cells
/// (cells whose corners are all in-domain).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    strides: Vec<usize>,
    classes: Vec<NodeClass>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    boundary_slot: Vec<Option<usize>>,
    cells: Vec<usize>,
    corner_offsets: Vec<usize>,
}

/// Builds the lattice covering `domain` with `resolution` nodes per axis.
pub fn build_grid(domain: &DomainSpec, resolution: &[usize]) -> Result<Grid> {
    domain.validate()?;
    if resolution.len() != domain.dim() {
        return Err(Error::Shape(format!(
            "resolution has {} axes, domain has {}",
            resolution.len(),
            domain.dim()
        )));
    }
    if let Some((axis, &nodes)) = resolution.iter().enumerate().find(|(_, &r)| r < 3) {
        return Err(Error::Resolution { axis, nodes });
    }
    let origin: Vec<f64> = domain.extents.iter().map(|e| e.0).collect();
    let spacing: Vec<f64> = domain
        .extents
        .iter()
        .zip(resolution)
        .map(|(&(lo, hi), &r)| (hi - lo) / (r - 1) as f64)
        .collect();
    let strides = strides_for(resolution);
    let total: usize = resolution.iter().product();
    let mut member = Vec::with_capacity(total);
    let mut x = vec![0.0; resolution.len()];
    for node in 0..total {
        coords_into(node, resolution, &strides, &origin, &spacing, &mut x);
        member.push(domain.contains(&x));
    }
    let grid = Grid::from_membership(resolution.to_vec(), spacing, origin, &member);
    if grid.interior.is_empty() {
        return Err(Error::EmptyInterior);
    }
    Ok(grid)
}

fn strides_for(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

fn coords_into(
    node: usize,
    dims: &[usize],
    strides: &[usize],
    origin: &[f64],
    spacing: &[f64],
    out: &mut [f64],
) {
    for k in 0..dims.len() {
        let i = (node / strides[k]) % dims[k];
        out[k] = origin[k] + i as f64 * spacing[k];
    }
}

impl Grid {
    /// Classifies a lattice given per-node domain membership.
    fn from_membership(
        dims: Vec<usize>,
        spacing: Vec<f64>,
        origin: Vec<f64>,
        member: &[bool],
    ) -> Grid {
        let n = dims.len();
        let strides = strides_for(&dims);
        let total = member.len();
        let mut classes = vec![NodeClass::Exterior; total];
        let mut idx = vec![0usize; n];
        for node in 0..total {
            if !member[node] {
                continue;
            }
            for k in 0..n {
                idx[k] = (node / strides[k]) % dims[k];
            }
            let mut boundary = false;
            for k in 0..n {
                if idx[k] == 0 || idx[k] + 1 == dims[k] {
                    boundary = true;
                    break;
                }
                if !member[node - strides[k]] || !member[node + strides[k]] {
                    boundary = true;
                    break;
                }
            }
            classes[node] = if boundary {
                NodeClass::Boundary
            } else {
                NodeClass::Interior
            };
        }

        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        let mut boundary_slot = vec![None; total];
        for (node, class) in classes.iter().enumerate() {
            match class {
                NodeClass::Interior => interior.push(node),
                NodeClass::Boundary => {
                    boundary_slot[node] = Some(boundary.len());
                    boundary.push(node);
                }
                NodeClass::Exterior => {}
            }
        }

        let corner_offsets: Vec<usize> = (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .filter(|k| mask & (1 << k) != 0)
                    .map(|k| strides[k])
                    .sum()
            })
            .collect();
        let mut cells = Vec::new();
        if dims.iter().all(|&d| d >= 2) {
            'node: for node in 0..total {
                for k in 0..n {
                    if (node / strides[k]) % dims[k] + 1 == dims[k] {
                        continue 'node;
                    }
                }
                if corner_offsets.iter().all(|&o| member[node + o]) {
                    cells.push(node);
                }
            }
        }

        Grid {
            dims,
            spacing,
            origin,
            strides,
            classes,
            interior,
            boundary,
            boundary_slot,
            cells,
            corner_offsets,
        }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn node_count(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    pub fn class(&self, node: usize) -> NodeClass {
        self.classes[node]
    }

    /// Interior nodes in increasing index order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    /// Boundary nodes in increasing index order. [`BoundaryData`] values are
    /// stored in this order.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    /// Position of `node` within [`Grid::boundary_nodes`].
    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.boundary_slot[node]
    }

    /// Lower-corner node index of every active cell.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Node offsets of the `2^n` cell corners; bit `k` of the corner number
    /// selects the upper node along axis `k`.
    pub fn corner_offsets(&self) -> &[usize] {
        &self.corner_offsets
    }

    /// Volume of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|k| (node / self.strides[k]) % self.dims[k])
            .collect()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.coords_into(node, &mut x);
        x
    }

    pub fn coords_into(&self, node: usize, out: &mut [f64]) {
        coords_into(
            node,
            &self.dims,
            &self.strides,
            &self.origin,
            &self.spacing,
            out,
        );
    }

    /// Axis neighbor of `node` at `offset` (-1 or +1), if it lies on the lattice.
    pub fn neighbor(&self, node: usize, axis: usize, offset: isize) -> Option<usize> {
        let i = (node / self.strides[axis]) % self.dims[axis];
        match offset {
            -1 if i > 0 => Some(node - self.strides[axis]),
            1 if i + 1 < self.dims[axis] => Some(node + self.strides[axis]),
            _ => None,
        }
    }

    /// Midpoint of the active cell with lower corner `cell`.
    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let mut x = self.coords(cell);
        for (v, h) in x.iter_mut().zip(&self.spacing) {
            *v += 0.5 * h;
        }
        x
    }

    /// Lattice index range covered by a window, checking alignment.
    fn window_range(&self, window: &[(f64, f64)]) -> Result<Vec<(usize, usize)>> {
        if window.len() != self.dim() {
            return Err(Error::Window(format!(
                "window has {} axes, grid has {}",
                window.len(),
                self.dim()
            )));
        }
        let mut ranges = Vec::with_capacity(self.dim());
        for (k, &(lo, hi)) in window.iter().enumerate() {
            let h = self.spacing[k];
            let a = (lo - self.origin[k]) / h;
            let b = (hi - self.origin[k]) / h;
            let (ia, ib) = (a.round(), b.round());
            if (a - ia).abs() > ALIGN_TOL * (1.0 + a.abs())
                || (b - ib).abs() > ALIGN_TOL * (1.0 + b.abs())
            {
                return Err(Error::Window(format!(
                    "[{lo}, {hi}] on axis {k} does not fall on nodes (spacing {h})"
                )));
            }
            if ia < 0.0 || ib > (self.dims[k] - 1) as f64 || ib < ia {
                return Err(Error::Window(format!(
                    "[{lo}, {hi}] on axis {k} leaves the grid"
                )));
            }
            ranges.push((ia as usize, ib as usize));
        }
        Ok(ranges)
    }

    /// Sub-lattice of the nodes inside `window`, reclassified against the
    /// window faces; exterior membership is inherited. Returns the sub-grid
    /// and, for each of its nodes, the parent node index.
    pub fn sub_grid(&self, window: &[(f64, f64)]) -> Result<(Grid, Vec<usize>)> {
        let ranges = self.window_range(window)?;
        let dims: Vec<usize> = ranges.iter().map(|&(a, b)| b - a + 1).collect();
        let origin: Vec<f64> = ranges
            .iter()
            .enumerate()
            .map(|(k, &(a, _))| self.origin[k] + a as f64 * self.spacing[k])
            .collect();
        let sub_strides = strides_for(&dims);
        let total: usize = dims.iter().product();
        let mut parent = Vec::with_capacity(total);
        for node in 0..total {
            let p: usize = (0..dims.len())
                .map(|k| ((node / sub_strides[k]) % dims[k] + ranges[k].0) * self.strides[k])
                .sum();
            parent.push(p);
        }
        let member: Vec<bool> = parent
            .iter()
            .map(|&p| self.classes[p].in_domain())
            .collect();
        let grid = Grid::from_membership(dims, self.spacing.clone(), origin, &member);
        Ok((grid, parent))
    }
}

/// Vector-valued nodal function on a grid. Values are stored node-major:
/// component `a` of node `i` lives at `i * components + a`. Exterior nodes
/// hold zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    components: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Arc<Grid>, components: usize) -> Self {
        let len = grid.node_count() * components;
        Self {
            grid,
            components,
            values: vec![0.0; len],
        }
    }

    pub fn from_values(grid: Arc<Grid>, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::Shape("field needs at least one component".into()));
        }
        if values.len() != grid.node_count() * components {
            return Err(Error::Shape(format!(
                "{} values for {} nodes x {} components",
                values.len(),
                grid.node_count(),
                components
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at slot {i}")));
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    /// Samples `expr` at every in-domain node.
    pub fn from_fn<F>(grid: Arc<Grid>, components: usize, expr: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let mut field = Field::zeros(grid, components);
        let mut x = vec![0.0; field.grid.dim()];
        for node in 0..field.grid.node_count() {
            if !field.grid.class(node).in_domain() {
                continue;
            }
            field.grid.coords_into(node, &mut x);
            let v = expr(&x);
            if v.len() != components {
                return Err(Error::Shape(format!(
                    "expression returned {} components, expected {components}",
                    v.len()
                )));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(format!("expression at {x:?}")));
            }
            field.node_mut(node).copy_from_slice(&v);
        }
        Ok(field)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, node: usize) -> &[f64] {
        let n = self.components;
        &self.values[node * n..(node + 1) * n]
    }

    pub fn node_mut(&mut self, node: usize) -> &mut [f64] {
        let n = self.components;
        &mut self.values[node * n..(node + 1) * n]
    }

    /// Max absolute value over in-domain nodes.
    pub fn sup_norm(&self) -> f64 {
        self.in_domain_nodes()
            .flat_map(|i| self.node(i).iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max absolute nodewise difference over in-domain nodes.
    pub fn sup_distance(&self, other: &Field) -> Result<f64> {
        if self.components != other.components || *self.grid != *other.grid {
            return Err(Error::Shape("fields live on different grids".into()));
        }
        Ok(self
            .in_domain_nodes()
            .flat_map(|i| self.node(i).iter().zip(other.node(i)))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    fn in_domain_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.node_count()).filter(move |&i| self.grid.class(i).in_domain())
    }

    /// Copies boundary values into the boundary nodes of this field.
    pub fn set_boundary(&mut self, data: &BoundaryData) -> Result<()> {
        data.check_against(&self.grid, self.components)?;
        let n = self.components;
        for (slot, &node) in self.grid.boundary_nodes().iter().enumerate() {
            self.values[node * n..(node + 1) * n]
                .copy_from_slice(&data.values[slot * n..(slot + 1) * n]);
        }
        Ok(())
    }
}

/// Dirichlet values on the boundary nodes of a grid, in
/// [`Grid::boundary_nodes`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    components: usize,
    values: Vec<f64>,
}

impl BoundaryData {
    pub fn new(components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || !values.len().is_multiple_of(components) {
            return Err(Error::Shape(format!(
                "{} boundary values do not split into {components} components",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary value".into()));
        }
        Ok(Self { components, values })
    }

    /// Boundary values read off an existing field.
    pub fn from_field(field: &Field) -> Self {
        let n = field.components();
        let mut values = Vec::with_capacity(field.grid().boundary_nodes().len() * n);
        for &node in field.grid().boundary_nodes() {
            values.extend_from_slice(field.node(node));
        }
        Self {
            components: n,
            values,
        }
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the `slot`-th boundary node.
    pub fn at(&self, slot: usize) -> &[f64] {
        &self.values[slot * self.components..(slot + 1) * self.components]
    }

    /// Componentwise max of `|value|` over all boundary nodes.
    pub fn abs_max(&self) -> Vec<f64> {
        let mut m = vec![0.0f64; self.components];
        for chunk in self.values.chunks(self.components) {
            for (a, v) in m.iter_mut().zip(chunk) {
                *a = a.max(v.abs());
            }
        }
        m
    }

    pub(crate) fn check_against(&self, grid: &Grid, components: usize) -> Result<()> {
        if self.components != components || self.len() != grid.boundary_nodes().len() {
            return Err(Error::Shape(format!(
                "boundary data has {} nodes x {} components, grid has {} boundary nodes x {components}",
                self.len(),
                self.components,
                grid.boundary_nodes().len()
            )));
        }
        Ok(())
    }
}

/// Evaluates `expr` at every boundary node.
pub fn sample_boundary<F>(grid: &Grid, expr: F) -> Result<BoundaryData>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut values = Vec::new();
    let mut components = None;
    let mut x = vec![0.0; grid.dim()];
    for &node in grid.boundary_nodes() {
        grid.coords_into(node, &mut x);
        let v = expr(&x);
        match components {
            None => components = Some(v.len()),
            Some(n) if n != v.len() => {
                return Err(Error::Shape(format!(
                    "boundary expression returned {} components at {x:?}, expected {n}",
                    v.len()
                )))
            }
            _ => {}
        }
        if let Some(bad) = v.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!(
                "boundary expression gave {bad} at {x:?}"
            )));
        }
        values.extend(v);
    }
    let components = components.unwrap_or(1);
    if components == 0 {
        return Err(Error::Shape(
            "boundary expression returned no components".into(),
        ));
    }
    BoundaryData::new(components, values)
}

/// Restricts `field` to the nodes inside an axis-aligned `window`.
pub fn restrict(field: &Field, window: &[(f64, f64)]) -> Result<Field> {
    let (sub, parent) = field.grid().sub_grid(window)?;
    let n = field.components();
    let mut values = Vec::with_capacity(parent.len() * n);
    for &p in &parent {
        if field.grid().class(p).in_domain() {
            values.extend_from_slice(field.node(p));
        } else {
            values.extend(std::iter::repeat_n(0.0, n));
        }
    }
    Ok(Field {
        grid: Arc::new(sub),
        components: n,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(grid: &Grid, class: NodeClass) -> usize {
        grid.classes().iter().filter(|&&c| c == class).count()
    }

    #[test]
    fn unit_square_five_by_five() {
        let g = build_grid(&DomainSpec::unit_box(2), &[5, 5]).unwrap();
        assert_eq!(count(&g, NodeClass::Interior), 9);
        assert_eq!(count(&g, NodeClass::Boundary), 16);
        assert_eq!(g.cells().len(), 16);
        assert_eq!(g.spacing(), &[0.25, 0.25]);
    }

    #[test]
    fn unit_interval_three_nodes() {
        let g = build_grid(&DomainSpec::unit_box(1), &[3]).unwrap();
        assert_eq!(g.interior_nodes(), &[1]);
        assert_eq!(g.boundary_nodes(), &[0, 2]);
    }

    #[test]
    fn half_disk_classification() {
        let g = build_grid(&DomainSpec::half_ball(2, 1.0), &[5, 3]).unwrap();
        // only (0, 0.5) has all four axis neighbours inside the half disk
        assert_eq!(g.interior_nodes().len(), 1);
        assert_eq!(g.coords(g.interior_nodes()[0]), vec![0.0, 0.5]);
        for node in 0..g.node_count() {
            let x = g.coords(node);
            let inside = x[1] >= 0.0 && (x[0] * x[0] + x[1] * x[1]).sqrt() <= 1.0 + 1e-12;
            assert_eq!(g.class(node).in_domain(), inside, "node at {x:?}");
            if x[1] == 0.0 && inside {
                assert_eq!(g.class(node), NodeClass::Boundary);
            }
        }
    }

    #[test]
    fn interior_neighbours_are_in_domain() {
        let mask: Mask = Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1] <= 0.8);
        let g = build_grid(
            &DomainSpec::masked_box(vec![(-1.0, 1.0), (-1.0, 1.0)], mask),
            &[21, 21],
        )
        .unwrap();
        for &node in g.interior_nodes() {
            for k in 0..2 {
                for off in [-1, 1] {
                    let nb = g.neighbor(node, k, off).unwrap();
                    assert!(g.class(nb).in_domain());
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            build_grid(&DomainSpec::unit_box(2), &[2, 5]),
            Err(Error::Resolution { axis: 0, nodes: 2 })
        ));
        assert!(matches!(
            build_grid(&DomainSpec::new_box(vec![(1.0, 1.0)]), &[5]),
            Err(Error::Domain(_))
        ));
        let empty: Mask = Arc::new(|_: &[f64]| false);
        assert!(matches!(
            build_grid(&DomainSpec::masked_box(vec![(0.0, 1.0)], empty), &[5]),
            Err(Error::EmptyInterior)
        ));
        assert!(build_grid(&DomainSpec::half_ball(2, -1.0), &[5, 3]).is_err());
    }

    #[test]
    fn rebuild_is_identical() {
        let d = DomainSpec::half_ball(2, 2.0);
        assert_eq!(
            build_grid(&d, &[17, 9]).unwrap(),
            build_grid(&d, &[17, 9]).unwrap()
        );
    }

    #[test]
    fn boundary_sampling() {
        let g = build_grid(&DomainSpec::unit_box(1), &[3]).unwrap();
        let b = sample_boundary(&g, |x| vec![x[0]]).unwrap();
        assert_eq!(b.values(), &[0.0, 1.0]);

        let g = build_grid(&DomainSpec::unit_box(2), &[9, 9]).unwrap();
        let b = sample_boundary(&g, |_| vec![1.0, 0.0]).unwrap();
        assert!(b.values().chunks(2).all(|v| v == [1.0, 0.0]));

        let b = sample_boundary(&g, |x| {
            let t = (x[1] - 0.5).atan2(x[0] - 0.5);
            vec![t.cos(), t.sin()]
        })
        .unwrap();
        for v in b.values().chunks(2) {
            assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-15);
        }

        assert!(matches!(
            sample_boundary(&g, |x| vec![1.0 / (x[0] - x[0])]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn restriction() {
        let g = Arc::new(build_grid(&DomainSpec::unit_box(1), &[5]).unwrap());
        let u = Field::from_fn(g.clone(), 1, |x| vec![x[0]]).unwrap();
        let r = restrict(&u, &[(0.0, 0.5)]).unwrap();
        assert_eq!(r.values(), &[0.0, 0.25, 0.5]);
        assert_eq!(restrict(&u, &[(0.0, 1.0)]).unwrap(), u);
        assert!(matches!(restrict(&u, &[(0.1, 0.5)]), Err(Error::Window(_))));
        assert!(matches!(
            restrict(&u, &[(0.0, 1.25)]),
            Err(Error::Window(_))
        ));
    }

    #[test]
    fn nested_restriction() {
        let g = Arc::new(build_grid(&DomainSpec::half_ball(2, 2.0), &[17, 9]).unwrap());
        let u = Field::from_fn(g, 2, |x| vec![x[0] * x[1], x[0] - x[1]]).unwrap();
        let outer = restrict(&u, &[(-1.0, 1.5), (0.0, 1.5)]).unwrap();
        let inner = [(0.0, 1.0), (0.25, 1.0)];
        assert_eq!(
            restrict(&outer, &inner).unwrap(),
            restrict(&u, &inner).unwrap()
        );

        let c = Field::from_fn(u.grid().clone(), 2, |_| vec![0.3, -0.7]).unwrap();
        let rc = restrict(&c, &inner).unwrap();
        assert!(rc.values().chunks(2).all(|v| v == [0.3, -0.7]));
    }
}
