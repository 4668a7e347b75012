//! Analytic test functions for benchmarking optimizers.

use std::f64::consts::PI;

/// Sphere: `sum x_i^2`. Minimum 0 at the origin.
pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Rosenbrock: `sum 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2`. Minimum 0 at
/// `(1, ..., 1)`. For one dimension this reduces to `(1 - x)^2`.
pub fn rosenbrock(x: &[f64]) -> f64 {
    if x.len() == 1 {
        return (1.0 - x[0]).powi(2);
    }
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

/// Rastrigin: `10 n + sum x_i^2 - 10 cos(2 pi x_i)`. Minimum 0 at the origin.
pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_minima() {
        assert_eq!(sphere(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(rosenbrock(&[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(rosenbrock(&[1.0]), 0.0);
        assert!(rastrigin(&[0.0, 0.0]).abs() < 1e-12);
    }

    #[test]
    fn known_values() {
        assert_eq!(sphere(&[1.0, 2.0]), 5.0);
        assert_eq!(rosenbrock(&[0.0, 0.0]), 1.0);
        assert!((rastrigin(&[1.0]) - 1.0).abs() < 1e-12);
        assert!((rastrigin(&[0.5]) - 20.25).abs() < 1e-12);
    }
}
