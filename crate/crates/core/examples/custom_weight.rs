//! A user-supplied weight `f(U) = -log(1 + |U|^2)`, `g = 2 / (1 + |U|^2)`,
//! checked for positivity and used in a solve.
//!
//! Run: `cargo run --release --example custom_weight`

use std::sync::Arc;

use quasilinear::{
    build_grid, gradient_check, make_weight, minimize, sample_boundary, validate_weight,
    AdmissibleSet, DomainSpec, SolveOptions, WeightSpec,
};

fn main() -> quasilinear::Result<()> {
    let spec = WeightSpec::Custom {
        label: "log".into(),
        f: Arc::new(|u: &[f64]| -(1.0 + u.iter().map(|v| v * v).sum::<f64>()).ln()),
        g: Arc::new(|u: &[f64]| 2.0 / (1.0 + u.iter().map(|v| v * v).sum::<f64>())),
    };
    let w = make_weight(spec)?;
    let positivity = validate_weight(&w, &[2.0, 2.0], 21);
    println!(
        "min g over [-2, 2]^2: {:.4} (ok: {})",
        positivity.min_g, positivity.ok
    );

    let grid = Arc::new(build_grid(&DomainSpec::unit_box(2), &[33, 33])?);
    let data = sample_boundary(&grid, |x| vec![2.0 * x[0] - 1.0, (x[0] * x[1]).cos()])?;
    let adm = AdmissibleSet::tight(data)?;
    let (u, r) = minimize(&grid, &w, &adm, None, &SolveOptions::default())?;
    let check = gradient_check(&u, &w, None, 1e-5)?;
    println!(
        "energy {:.6} after {} iterations, gradient relative error at the minimizer {:.2e}",
        r.final_energy(),
        r.iterations,
        check.max_rel_error
    );
    Ok(())
}
