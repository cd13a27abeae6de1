//! Scalar problem with a right-hand side, solved by Picard iteration on
//! the transformed Poisson equation.
//!
//! Run: `cargo run --release --example source_term`

use std::sync::Arc;

use quasilinear::oracle::PicardOptions;
use quasilinear::{
    build_grid, make_weight, sample_boundary, solve_scalar_source, DomainSpec, SourceField,
    WeightSpec,
};

fn main() -> quasilinear::Result<()> {
    let grid = Arc::new(build_grid(&DomainSpec::unit_box(2), &[65, 65])?);
    let data = sample_boundary(&grid, |x| vec![0.5 * x[0]])?;
    let w = make_weight(WeightSpec::Gaussian { alpha: 1.0 })?;
    for amplitude in [0.0, 1.0, 4.0] {
        let h = SourceField::from_fn(&grid, |_| amplitude)?;
        let (u, sweeps) = solve_scalar_source(&grid, &w, &data, &h, PicardOptions::default())?;
        let centre = grid.node_count() / 2;
        println!(
            "source {amplitude}: u(centre) = {:.6} after {sweeps} sweeps",
            u.node(centre)[0]
        );
    }
    Ok(())
}
