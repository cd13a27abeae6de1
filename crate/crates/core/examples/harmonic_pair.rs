//! Two distinct harmonic maps [0, 1] -> S^2 with the same endpoints, one in
//! each stereographic chart. They trace the short and the long great-circle
//! arc between `e1` and `e2`.
//!
//! Run: `cargo run --release --example harmonic_pair`

use std::f64::consts::PI;
use std::sync::Arc;

use quasilinear::sphere::{harmonic_residual, solve_harmonic_pair};
use quasilinear::{build_grid, sample_boundary, DomainSpec, SolveOptions};

fn main() -> quasilinear::Result<()> {
    let grid = Arc::new(build_grid(&DomainSpec::unit_box(1), &[201])?);
    let data = sample_boundary(&grid, |x| {
        if x[0] < 0.5 {
            vec![1.0, 0.0, 0.0]
        } else {
            vec![0.0, 1.0, 0.0]
        }
    })?;
    let (first, second) = solve_harmonic_pair(&grid, &data, &SolveOptions::default())?;
    for (name, map) in [("first", &first), ("second", &second)] {
        println!(
            "{name}: pole {:?}, Dirichlet energy {:.6}, residual {:.2e}, {} iterations",
            map.pole.pole().coords(),
            map.dirichlet_energy,
            harmonic_residual(&map.sphere)?,
            map.report.iterations
        );
    }
    println!(
        "short arc pi^2/4 = {:.6}, long arc 9 pi^2/4 = {:.6}",
        PI * PI / 4.0,
        9.0 * PI * PI / 4.0
    );
    println!(
        "sup distance between the maps: {:.4}",
        first.sup_distance(&second)?
    );
    Ok(())
}
