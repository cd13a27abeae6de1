//! Weight functions `f` entering the energy through `e^{f(U)}`.
//!
//! A weight is given by `f` together with `g`, where the gradient of `f`
//! is `f'(U) = -U g(U)`. Custom weights supply `g` directly, so the
//! structural identity holds by construction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Parameterized description of a weight.
#[derive(Clone)]
pub enum WeightSpec {
    /// `f(U) = -alpha |U|^2`, `g = 2 alpha`.
    Gaussian { alpha: f64 },
    /// `f(U) = -beta log((1 + |U|^2) / 2)`, `g = 2 beta / (1 + |U|^2)`.
    /// `beta = 2` is the round metric in stereographic coordinates.
    SphereChart { beta: f64 },
    /// `f = c`, `g = 0`.
    Constant { c: f64 },
    Custom {
        label: String,
        f: ScalarFn,
        g: ScalarFn,
    },
}

impl fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Gaussian { alpha } => write!(f, "Gaussian {{ alpha: {alpha} }}"),
            WeightSpec::SphereChart { beta } => write!(f, "SphereChart {{ beta: {beta} }}"),
            WeightSpec::Constant { c } => write!(f, "Constant {{ c: {c} }}"),
            WeightSpec::Custom { label, .. } => write!(f, "Custom {{ label: {label:?} }}"),
        }
    }
}

#[derive(Clone)]
enum Kind {
    Gaussian(f64),
    SphereChart(f64),
    Constant(f64),
    Custom { f: ScalarFn, g: ScalarFn },
}

/// An evaluable weight with an additive shift on `f`.
#[derive(Clone)]
pub struct Weight {
    kind: Kind,
    shift: f64,
    label: String,
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight")
            .field("label", &self.label)
            .field("shift", &self.shift)
            .finish()
    }
}

pub fn make_weight(spec: WeightSpec) -> Result<Weight> {
    let (kind, label) = match spec {
        WeightSpec::Gaussian { alpha } => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::Weight(format!(
                    "gaussian alpha must be positive, got {alpha}"
                )));
            }
            (Kind::Gaussian(alpha), format!("gaussian(alpha={alpha})"))
        }
        WeightSpec::SphereChart { beta } => {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::Weight(format!(
                    "sphere_chart beta must be positive, got {beta}"
                )));
            }
            (
                Kind::SphereChart(beta),
                format!("sphere_chart(beta={beta})"),
            )
        }
        WeightSpec::Constant { c } => {
            if !c.is_finite() {
                return Err(Error::Weight(format!(
                    "constant weight must be finite, got {c}"
                )));
            }
            (Kind::Constant(c), format!("constant(c={c})"))
        }
        WeightSpec::Custom { label, f, g } => (Kind::Custom { f, g }, label),
    };
    Ok(Weight {
        kind,
        shift: 0.0,
        label,
    })
}

impl Weight {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// The same weight with `delta` added to its shift.
    pub fn shifted(&self, delta: f64) -> Weight {
        Weight {
            kind: self.kind.clone(),
            shift: self.shift + delta,
            label: self.label.clone(),
        }
    }

    /// True when `g` vanishes identically, i.e. `f` is constant.
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, Kind::Constant(_))
    }

    /// `f(U)`, including the shift.
    #[inline]
    pub fn f(&self, u: &[f64]) -> f64 {
        let base = match &self.kind {
            Kind::Gaussian(alpha) => -alpha * norm2(u),
            Kind::SphereChart(beta) => -beta * ((1.0 + norm2(u)) / 2.0).ln(),
            Kind::Constant(c) => *c,
            Kind::Custom { f, .. } => f(u),
        };
        base + self.shift
    }

    #[inline]
    pub fn g(&self, u: &[f64]) -> f64 {
        match &self.kind {
            Kind::Gaussian(alpha) => 2.0 * alpha,
            Kind::SphereChart(beta) => 2.0 * beta / (1.0 + norm2(u)),
            Kind::Constant(_) => 0.0,
            Kind::Custom { g, .. } => g(u),
        }
    }

    /// Returns `(f(U), g(U))` and writes `f'(U) = -U g(U)` into `fprime`.
    #[inline]
    pub fn eval_into(&self, u: &[f64], fprime: &mut [f64]) -> (f64, f64) {
        let g = self.g(u);
        for (d, &x) in fprime.iter_mut().zip(u) {
            *d = -(x * g);
        }
        (self.f(u), g)
    }
}

#[inline]
fn norm2(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum()
}

/// Value, gradient and `g` of a weight at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEval {
    pub f: f64,
    pub fprime: Vec<f64>,
    pub g: f64,
}

pub fn eval_weight(w: &Weight, u: &[f64]) -> Result<WeightEval> {
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("weight argument {u:?}")));
    }
    let mut fprime = vec![0.0; u.len()];
    let (f, g) = w.eval_into(u, &mut fprime);
    if !f.is_finite() || !g.is_finite() {
        return Err(Error::NonFinite(format!(
            "weight {} at {u:?}: f = {f}, g = {g}",
            w.label
        )));
    }
    Ok(WeightEval { f, fprime, g })
}

/// Result of sampling `g` over the box `[-C, C]^N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub min_g: f64,
    pub ok: bool,
}

/// Minimum of `g` over a lattice of `samples` points per axis spanning
/// `[-C, C]^N` (endpoints included; one sample means the centre).
pub fn validate_weight(w: &Weight, bound: &[f64], samples: usize) -> PositivityReport {
    let samples = samples.max(1);
    let n = bound.len();
    let total = samples.checked_pow(n as u32).unwrap_or(usize::MAX);
    let coord = |a: usize, i: usize| -> f64 {
        if samples == 1 {
            0.0
        } else {
            -bound[a] + 2.0 * bound[a] * i as f64 / (samples - 1) as f64
        }
    };
    let mut u = vec![0.0; n];
    let mut min_g = f64::INFINITY;
    for flat in 0..total {
        let mut rest = flat;
        for (a, slot) in u.iter_mut().enumerate() {
            *slot = coord(a, rest % samples);
            rest /= samples;
        }
        let g = w.g(&u);
        // NaN counts as a violation
        min_g = if g.is_nan() {
            f64::NEG_INFINITY
        } else {
            min_g.min(g)
        };
    }
    PositivityReport {
        min_g,
        ok: min_g > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(spec: WeightSpec) -> Weight {
        make_weight(spec).unwrap()
    }

    #[test]
    fn gaussian_at_unit_vector() {
        let e = eval_weight(&w(WeightSpec::Gaussian { alpha: 1.0 }), &[1.0, 0.0]).unwrap();
        assert_eq!(e.f, -1.0);
        assert_eq!(e.fprime, vec![-2.0, -0.0]);
        assert_eq!(e.g, 2.0);
    }

    #[test]
    fn sphere_chart_at_unit_vector() {
        let e = eval_weight(&w(WeightSpec::SphereChart { beta: 2.0 }), &[1.0, 0.0]).unwrap();
        assert_eq!(e.f, 0.0);
        assert_eq!(e.g, 2.0);
        assert_eq!(e.fprime, vec![-2.0, -0.0]);
    }

    #[test]
    fn constant_weight_is_flat() {
        let c = w(WeightSpec::Constant { c: 0.0 });
        let e = eval_weight(&c, &[0.3, -2.0]).unwrap();
        assert_eq!(e.f, 0.0);
        assert!(e.fprime.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn gradient_vanishes_at_origin() {
        for spec in [
            WeightSpec::Gaussian { alpha: 3.0 },
            WeightSpec::SphereChart { beta: 0.5 },
            WeightSpec::Constant { c: 4.0 },
        ] {
            let e = eval_weight(&w(spec), &[0.0, 0.0, 0.0]).unwrap();
            assert!(e.fprime.iter().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(make_weight(WeightSpec::Gaussian { alpha: 0.0 }).is_err());
        assert!(make_weight(WeightSpec::SphereChart { beta: -1.0 }).is_err());
        assert!(make_weight(WeightSpec::Gaussian { alpha: f64::NAN }).is_err());
    }

    #[test]
    fn custom_non_finite_is_an_error() {
        let bad = w(WeightSpec::Custom {
            label: "log".into(),
            f: Arc::new(|u: &[f64]| u[0].ln()),
            g: Arc::new(|_: &[f64]| 1.0),
        });
        assert!(matches!(
            eval_weight(&bad, &[-1.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(eval_weight(&bad, &[f64::INFINITY]).is_err());
    }

    #[test]
    fn positivity_reports() {
        let r = validate_weight(&w(WeightSpec::Gaussian { alpha: 1.0 }), &[3.0, 3.0], 7);
        assert_eq!(
            r,
            PositivityReport {
                min_g: 2.0,
                ok: true
            }
        );
        let r = validate_weight(&w(WeightSpec::Constant { c: 0.0 }), &[1.0], 5);
        assert_eq!(
            r,
            PositivityReport {
                min_g: 0.0,
                ok: false
            }
        );
        let r = validate_weight(&w(WeightSpec::SphereChart { beta: 2.0 }), &[1.0, 1.0], 41);
        assert!((r.min_g - 4.0 / 3.0).abs() < 1e-15);
        assert!(r.ok);
    }

    #[test]
    fn closed_form_gradients_at_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let alpha = 0.75;
        let gauss = w(WeightSpec::Gaussian { alpha });
        let sphere = w(WeightSpec::SphereChart { beta: 2.0 });
        let mut fp = [0.0; 3];
        let mut worst = 0.0f64;
        for _ in 0..1_000_000 {
            let y: [f64; 3] = [
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            ];
            let r2 = y.iter().map(|v| v * v).sum::<f64>();
            gauss.eval_into(&y, &mut fp);
            for a in 0..3 {
                let exact = -2.0 * alpha * y[a];
                worst = worst.max((fp[a] - exact).abs() / exact.abs().max(1e-300));
            }
            sphere.eval_into(&y, &mut fp);
            for a in 0..3 {
                let exact = -4.0 * y[a] / (1.0 + r2);
                worst = worst.max((fp[a] - exact).abs() / exact.abs().max(1e-300));
            }
        }
        assert!(worst <= 1e-12, "worst relative error {worst:e}");
    }

    proptest! {
        #[test]
        fn structural_identity(u in proptest::collection::vec(-10.0f64..10.0, 1..5), which in 0usize..3) {
            let weight = match which {
                0 => w(WeightSpec::Gaussian { alpha: 0.4 }),
                1 => w(WeightSpec::SphereChart { beta: 3.0 }),
                _ => w(WeightSpec::Constant { c: -1.5 }),
            };
            let e = eval_weight(&weight, &u).unwrap();
            for (d, x) in e.fprime.iter().zip(&u) {
                prop_assert_eq!(d + x * e.g, 0.0);
            }
        }

        #[test]
        fn shift_moves_only_f(u in proptest::collection::vec(-3.0f64..3.0, 2), delta in -2.0f64..2.0) {
            let base = w(WeightSpec::SphereChart { beta: 2.0 });
            let a = eval_weight(&base, &u).unwrap();
            let b = eval_weight(&base.shifted(delta), &u).unwrap();
            prop_assert!(((b.f - a.f) - delta).abs() <= 4.0 * f64::EPSILON * (1.0 + a.f.abs() + delta.abs()));
            prop_assert_eq!(a.fprime, b.fprime);
            prop_assert_eq!(a.g, b.g);
        }
    }
}
