//! Deterministic low-discrepancy point sets.

/// Additive recurrence generator for `dim` dimensions (Roberts' `R_d`
/// sequence): `x_i = frac(0.5 + i * alpha)` with `alpha_k = phi_d^{-k}`,
/// where `phi_d` is the positive root of `x^{d+1} = x + 1`.
pub fn kronecker(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=dim).map(|k| phi.powi(-(k as i32))).collect();
    (1..=count)
        .map(|i| alpha.iter().map(|a| (0.5 + i as f64 * a).fract()).collect())
        .collect()
}

/// `count` deterministic, roughly uniform unit vectors in `R^dim`.
///
/// Points of the `R_d` sequence are mapped to `[-1, 1]^dim`, kept when
/// they fall inside the unit ball (and away from the origin), and
/// normalized.
pub fn unit_vectors(dim: usize, count: usize) -> Vec<Vec<f64>> {
    if dim == 0 || count == 0 {
        return Vec::new();
    }
    if dim == 1 {
        return (0..count)
            .map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }])
            .collect();
    }
    let mut out = Vec::with_capacity(count);
    let mut batch = 4 * count + 16;
    let mut skip = 0;
    while out.len() < count {
        for p in kronecker(dim, skip + batch).into_iter().skip(skip) {
            let v: Vec<f64> = p.iter().map(|x| 2.0 * x - 1.0).collect();
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r > 1e-3 && r <= 1.0 {
                out.push(v.iter().map(|x| x / r).collect());
                if out.len() == count {
                    break;
                }
            }
        }
        skip += batch;
        batch *= 2;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_in_unit_cube() {
        for d in 1..5 {
            let pts = kronecker(d, 500);
            assert!(pts.iter().flatten().all(|&x| (0.0..1.0).contains(&x)));
        }
    }

    #[test]
    fn unit_vectors_are_unit_and_deterministic() {
        let a = unit_vectors(4, 100);
        assert_eq!(a.len(), 100);
        assert!(a
            .iter()
            .all(|v| (v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14));
        assert_eq!(a, unit_vectors(4, 100));
    }
}
