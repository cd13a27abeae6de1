//! Dirichlet problem on the half-plane approximated by half-discs of
//! radius 2, 4, 8, watching the solution settle on a fixed window.
//!
//! Run: `cargo run --release --example halfspace_exhaustion`

use std::sync::Arc;

use quasilinear::halfspace::{solve_exhaustion, PointFn};
use quasilinear::{make_weight, SolveOptions, WeightSpec};

fn main() -> quasilinear::Result<()> {
    let phi: PointFn = Arc::new(|x: &[f64]| vec![(-x.iter().map(|v| v * v).sum::<f64>()).exp()]);
    let w = make_weight(WeightSpec::Gaussian { alpha: 1.0 })?;
    let report = solve_exhaustion(
        phi,
        1,
        &w,
        &[2.0, 4.0, 8.0],
        0.125,
        &[(0.0, 1.0), (0.0, 1.0)],
        &SolveOptions::default(),
    )?;
    for r in &report.records {
        println!(
            "R = {:>3}: grid {:?}, sup {:.4}, energy {:.5} (competitor {:.5}), window change {}",
            r.radius,
            r.nodes,
            r.sup_norm,
            r.energy,
            r.competitor_energy,
            r.window_difference
                .map_or("-".into(), |d| format!("{d:.3e}"))
        );
    }
    println!(
        "uniform bound: {}, energies bounded: {}",
        report.uniform_bound, report.energy_bounded
    );
    Ok(())
}
