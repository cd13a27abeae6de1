//! Scalar problem on [0, 1]: the exact transform solution against the
//! direct minimizer, and the midpoint value `u(1/2)`.
//!
//! Run: `cargo run --release --example scalar_transform`

use std::sync::Arc;

use quasilinear::{
    build_grid, halfweight_table, make_weight, minimize, sample_boundary, solve_scalar_exact,
    AdmissibleSet, DomainSpec, SolveOptions, WeightSpec,
};

fn main() -> quasilinear::Result<()> {
    let w = make_weight(WeightSpec::Gaussian { alpha: 1.0 })?;
    let table = halfweight_table(&w, 1.0)?;
    println!("W(1) = {:.15}", table.forward(1.0)?);

    for nodes in [65, 129, 257] {
        let grid = Arc::new(build_grid(&DomainSpec::unit_box(1), &[nodes])?);
        let data = sample_boundary(&grid, |x| vec![x[0]])?;
        let exact = solve_scalar_exact(&grid, &w, &data)?;
        let adm = AdmissibleSet::tight(data)?;
        let (u, report) = minimize(&grid, &w, &adm, None, &SolveOptions::default())?;
        println!(
            "{nodes:>4} nodes: u(1/2) = {:.8}, transform gap {:.2e}, {} iterations",
            u.values()[nodes / 2],
            u.sup_distance(&exact)?,
            report.iterations
        );
    }
    Ok(())
}
