//! Spatially varying diagonal coefficient tensor: ellipticity bounds, and
//! how the minimizer moves away from the isotropic one.
//!
//! Run: `cargo run --release --example anisotropic`

use std::f64::consts::PI;
use std::sync::Arc;

use quasilinear::weights::ScalarFn;
use quasilinear::{
    build_grid, ellipticity_bounds, make_weight, minimize, sample_boundary, AdmissibleSet,
    CoefficientTensor, DomainSpec, SolveOptions, WeightSpec,
};

fn main() -> quasilinear::Result<()> {
    let grid = Arc::new(build_grid(&DomainSpec::unit_box(2), &[33, 33])?);
    let diag: Vec<ScalarFn> = vec![
        Arc::new(|_: &[f64]| 1.0),
        Arc::new(|x: &[f64]| 2.0 + (PI * x[0]).sin()),
    ];
    let tensor = CoefficientTensor::spatial_diagonal(1, diag);
    let centres: Vec<Vec<f64>> = grid.cells().iter().map(|&c| grid.cell_center(c)).collect();
    let (lambda, big_lambda) = ellipticity_bounds(&tensor, &centres, 64)?;
    println!("ellipticity over cell centres: [{lambda:.4}, {big_lambda:.4}]");

    let w = make_weight(WeightSpec::Gaussian { alpha: 0.5 })?;
    let adm = AdmissibleSet::tight(sample_boundary(&grid, |x| vec![x[0] * x[1]])?)?;
    let opts = SolveOptions::default();
    let (iso, r0) = minimize(&grid, &w, &adm, None, &opts)?;
    let (ani, r1) = minimize(&grid, &w, &adm, Some(&tensor), &opts)?;
    println!(
        "isotropic energy {:.6} ({} iterations)",
        r0.final_energy(),
        r0.iterations
    );
    println!(
        "anisotropic energy {:.6} ({} iterations)",
        r1.final_energy(),
        r1.iterations
    );
    println!(
        "sup distance between minimizers {:.4e}",
        iso.sup_distance(&ani)?
    );
    Ok(())
}
