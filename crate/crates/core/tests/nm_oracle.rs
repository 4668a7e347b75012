mod common;

use autotune::{NelderMead, NumericalOptimizer};
use common::{batch_nelder_mead, sphere, staged_trace};
use proptest::prelude::*;

fn assert_same_trace(staged: &[Vec<f64>], batch: &[Vec<f64>]) {
    assert_eq!(staged.len(), batch.len(), "trace lengths differ");
    for (k, (s, b)) in staged.iter().zip(batch).enumerate() {
        for (x, y) in s.iter().zip(b) {
            assert!((x - y).abs() <= 1e-12, "eval {k}: {s:?} vs {b:?}");
        }
    }
}

fn compare(dim: usize, tol: f64, cap: usize, seed: u64, f: impl Fn(&[f64]) -> f64 + Copy) {
    let mut nm = NelderMead::new(dim, tol, cap, seed).unwrap();
    let staged = staged_trace(&mut nm, f);
    assert!(staged.len() > dim, "seed {seed}: too few evaluations");
    let batch = batch_nelder_mead(f, staged[..=dim].to_vec(), tol, cap);
    assert_same_trace(&staged, &batch);
}

#[test]
fn sphere_2d_matches_batch_reference() {
    for seed in 0..50 {
        compare(2, 1e-10, 0, seed, sphere);
    }
}

#[test]
fn capped_runs_match_batch_reference() {
    for seed in 0..20 {
        compare(3, 1e-300, 37, seed, sphere);
    }
}

#[test]
fn bounded_minimum_on_the_edge() {
    // Minimum outside the box: exercises the clipping of reflections.
    let f = |x: &[f64]| (x[0] - 1.7).powi(2) + (x[1] + 0.2).powi(2);
    for seed in 0..20 {
        compare(2, 1e-9, 400, seed, f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shifted_quadratics_match(
        seed in any::<u64>(),
        dim in 1usize..4,
        cx in -0.9f64..0.9,
        cy in -0.9f64..0.9,
    ) {
        let f = move |x: &[f64]| {
            x.iter().enumerate().map(|(d, v)| {
                let c = if d % 2 == 0 { cx } else { cy };
                (d + 1) as f64 * (v - c).powi(2)
            }).sum::<f64>()
        };
        compare(dim, 1e-9, 500, seed, f);
    }

    #[test]
    fn staged_final_point_is_best_evaluated(seed in any::<u64>(), cap in 3usize..60) {
        let mut nm = NelderMead::new(2, 1e-12, cap, seed).unwrap();
        let trace = staged_trace(&mut nm, sphere);
        prop_assert_eq!(trace.len(), cap);
        let best = trace.iter().map(|p| sphere(p)).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(nm.best_cost(), Some(best));
    }
}
