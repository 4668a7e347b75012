//! The staged (ask/tell) optimizer contract.
//!
//! An optimizer never calls a cost function. Each [`NumericalOptimizer::run`]
//! call hands over the cost of the candidate returned by the previous call and
//! receives the next candidate. The cost given to the first call after
//! construction or reset is discarded, since no candidate was outstanding.

use crate::domain::CandidatePoint;

/// A derivative-free minimizer driven one evaluation at a time.
pub trait NumericalOptimizer: Send {
    /// Consumes the cost of the last returned candidate and returns the next
    /// one. Once [`is_end`](Self::is_end) is true, returns the final (best
    /// found) solution on every call.
    fn run(&mut self, cost: f64) -> CandidatePoint;

    /// Number of solutions the method maintains internally.
    fn num_points(&self) -> usize;

    fn dimension(&self) -> usize;

    fn is_end(&self) -> bool;

    /// Resets the optimization. Level 0 is the lightest reset and keeps the
    /// solutions found; higher levels discard progressively more state.
    fn reset(&mut self, _level: u32) {}

    /// One-line (or short) human-readable state summary.
    fn describe(&self) -> String {
        String::new()
    }

    /// Lowest finite cost observed so far, if any.
    fn best_cost(&self) -> Option<f64>;
}

impl<T: NumericalOptimizer + ?Sized> NumericalOptimizer for Box<T> {
    fn run(&mut self, cost: f64) -> CandidatePoint {
        (**self).run(cost)
    }
    fn num_points(&self) -> usize {
        (**self).num_points()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn is_end(&self) -> bool {
        (**self).is_end()
    }
    fn reset(&mut self, level: u32) {
        (**self).reset(level)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
    fn best_cost(&self) -> Option<f64> {
        (**self).best_cost()
    }
}

/// Non-finite costs are treated as the worst possible value.
pub(crate) fn sanitize_cost(cost: f64) -> f64 {
    if cost.is_finite() {
        cost
    } else {
        f64::INFINITY
    }
}

/// Folds `v` into `[-1, 1]` by repeated reflection at the box faces.
pub(crate) fn reflect_into_box(v: f64) -> f64 {
    if (-1.0..=1.0).contains(&v) {
        return v;
    }
    // Triangle wave with period 4.
    let mut y = (v + 1.0).rem_euclid(4.0);
    if y > 2.0 {
        y = 4.0 - y;
    }
    (y - 1.0).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_folds_back() {
        assert_eq!(reflect_into_box(0.3), 0.3);
        assert!((reflect_into_box(1.25) - 0.75).abs() < 1e-15);
        assert!((reflect_into_box(-1.5) - (-0.5)).abs() < 1e-15);
        assert!((reflect_into_box(3.5) - (-0.5)).abs() < 1e-15);
        assert!((reflect_into_box(5.2) - 1.0 + 0.2).abs() < 1e-12);
        for v in [1e17, -1e17, 123.456, -98.7] {
            let r = reflect_into_box(v);
            assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn sanitize() {
        assert_eq!(sanitize_cost(2.0), 2.0);
        assert_eq!(sanitize_cost(f64::NAN), f64::INFINITY);
        assert_eq!(sanitize_cost(f64::NEG_INFINITY), f64::INFINITY);
    }
}
