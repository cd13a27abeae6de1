//! Box-constrained two-component map on a disk. The bound is tight enough
//! to become active in the interior; the projected gradient and KKT
//! residual certify the constrained minimizer.
//!
//! Run: `cargo run --release --example box_constraints`

use std::sync::Arc;

use quasilinear::grid::Mask;
use quasilinear::{
    build_grid, kkt_residual, make_weight, minimize, sample_boundary, AdmissibleSet, DomainSpec,
    SolveOptions, WeightSpec,
};

fn main() -> quasilinear::Result<()> {
    let mask: Mask = Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1] <= 1.0);
    let grid = Arc::new(build_grid(
        &DomainSpec::masked_box(vec![(-1.0, 1.0), (-1.0, 1.0)], mask),
        &[41, 41],
    )?);
    // u1 is constant on the boundary; the oscillating u2 pushes it upward
    let data = sample_boundary(&grid, |x| vec![0.5, 0.5 * (6.0 * x[1].atan2(x[0])).sin()])?;
    let w = make_weight(WeightSpec::Gaussian { alpha: 2.0 })?;
    for bound in [2.0, 0.55, 0.5] {
        let adm = AdmissibleSet::new(vec![bound, bound], data.clone())?;
        let (u, r) = minimize(&grid, &w, &adm, None, &SolveOptions::default())?;
        println!(
            "bound {bound}: energy {:.6}, sup {:.4}, active {}, kkt {:.2e}, {:?}",
            r.final_energy(),
            u.sup_norm(),
            r.active_constraints,
            kkt_residual(&u, &w, &adm, None)?,
            r.stop_reason
        );
    }
    Ok(())
}
