//! Analytic energy gradient against central differences on a random
//! two-component field.
//!
//! Run: `cargo run --release --example gradcheck`

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasilinear::{
    build_grid, gradient_check, make_weight, sample_boundary, DomainSpec, Field, WeightSpec,
};

fn main() -> quasilinear::Result<()> {
    let grid = Arc::new(build_grid(&DomainSpec::unit_box(2), &[8, 8])?);
    let data = sample_boundary(&grid, |x| vec![x[0], x[1] * x[1]])?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut u = Field::zeros(grid.clone(), 2);
    u.values_mut()
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(-1.0..1.0));
    u.set_boundary(&data)?;
    for spec in [
        WeightSpec::Gaussian { alpha: 1.0 },
        WeightSpec::SphereChart { beta: 2.0 },
        WeightSpec::Constant { c: 0.3 },
    ] {
        let label = format!("{spec:?}");
        let check = gradient_check(&u, &make_weight(spec)?, None, 1e-5)?;
        println!(
            "{label:<28} {} entries, max abs error {:.2e}, relative {:.2e}",
            check.checked, check.max_abs_error, check.max_rel_error
        );
    }
    Ok(())
}
