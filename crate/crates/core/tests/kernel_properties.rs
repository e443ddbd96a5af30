mod common;

use common::{corpus, geometric_grid};
use glefield_core::cm_kernel::{eval_kernel, k_cos, k_sin, KernelMeasure};
use proptest::prelude::*;

fn atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.01f64..10.0, 0.01f64..50.0), 1..6)
}

/// Decrease of more than a few ulps.
fn drops(prev: f64, next: f64) -> bool {
    next < prev - 1e-13 * prev.abs()
}

#[test]
fn monotonicity_suite_on_corpus() {
    let grid = geometric_grid(1e-3, 1e6, 10_000);
    for (name, m) in corpus() {
        let k0 = m.total_mass();
        let m2 = m.second_moment();
        // summation error bound for the cancelling difference
        let rounding = (m.atoms().len() + 4) as f64 * f64::EPSILON * k0;
        let mut violations = Vec::new();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(m.cos_transform(b) < m.cos_transform(a)) {
                violations.push(("K_cos decreasing", b));
            }
            if drops(a * a * m.cos_transform(a), b * b * m.cos_transform(b)) {
                violations.push(("w² K_cos nondecreasing", b));
            }
            if drops(a * m.sin_transform(a), b * m.sin_transform(b)) {
                violations.push(("w K_sin nondecreasing", b));
            }
            if !(m.sin_over_omega(b) < m.sin_over_omega(a)) {
                violations.push(("K_sin/w decreasing", b));
            }
        }
        for &w in &grid {
            if w * m.cos_transform(w) > 0.5 * k0 * (1.0 + 1e-14) {
                violations.push(("w K_cos <= K(0)/2", w));
            }
            if (k0 - w * m.sin_transform(w)).abs() > m2 / (w * w) * (1.0 + 1e-12) + rounding {
                violations.push(("w K_sin -> K(0)", w));
            }
        }
        assert!(violations.is_empty(), "{name}: {:?}", &violations[..violations.len().min(5)]);
    }
}

#[test]
fn single_atom_sine_limit_rate() {
    let m = KernelMeasure::exponential(1.0, 1.0).unwrap();
    for w in geometric_grid(1.0, 1e6, 200) {
        // rounding in the subtraction is allowed a few ulps
        assert!((w * m.sin_transform(w) - 1.0).abs() <= 1.0 / (w * w) + 4.0 * f64::EPSILON);
    }
}

proptest! {
    #[test]
    fn canonical_form_merges_and_sorts(mut raw in atoms()) {
        let a = KernelMeasure::new(raw.clone()).unwrap();
        raw.reverse();
        let dup = raw[0];
        raw.push((dup.0, dup.1));
        let b = KernelMeasure::new(raw.clone()).unwrap();
        prop_assert!(a.atoms().windows(2).all(|w| w[0].rate < w[1].rate));
        prop_assert!((b.total_mass() - a.total_mass() - dup.0).abs() < 1e-12 * b.total_mass());
        prop_assert_eq!(b.atoms().len(), a.atoms().len());
    }

    #[test]
    fn transforms_have_the_right_parity(raw in atoms(), w in -1e3f64..1e3) {
        let m = KernelMeasure::new(raw).unwrap();
        prop_assert_eq!(k_cos(&m, w).unwrap(), k_cos(&m, -w).unwrap());
        prop_assert_eq!(k_sin(&m, w).unwrap(), -k_sin(&m, -w).unwrap());
        prop_assert!(k_cos(&m, w).unwrap() > 0.0);
        prop_assert!(k_sin(&m, w).unwrap() * w >= 0.0);
    }

    #[test]
    fn kernel_is_completely_monotone(raw in atoms(), t in 0.0f64..5.0) {
        let m = KernelMeasure::new(raw).unwrap();
        let h = 1e-3;
        let (k0, k1, k2) = (eval_kernel(&m, t).unwrap(), eval_kernel(&m, t + h).unwrap(), eval_kernel(&m, t + 2.0 * h).unwrap());
        prop_assert!(k1 < k0);
        prop_assert!(k2 - 2.0 * k1 + k0 >= -1e-14 * k0);
        prop_assert!((eval_kernel(&m, 0.0).unwrap() - m.total_mass()).abs() <= 1e-12 * m.total_mass());
    }

    #[test]
    fn kernel_rejects_bad_arguments(raw in atoms(), t in -10.0f64..-1e-9) {
        let m = KernelMeasure::new(raw).unwrap();
        prop_assert!(eval_kernel(&m, t).is_err());
        prop_assert!(eval_kernel(&m, f64::NAN).is_err());
        prop_assert!(k_cos(&m, f64::INFINITY).is_err());
    }
}
