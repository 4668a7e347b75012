//! Nelder–Mead downhill simplex as a staged state machine.
//!
//! Every cost evaluation is one `run` call: the `dim + 1` initial vertices,
//! each reflection, expansion and contraction probe, and each vertex
//! re-evaluated during a shrink. `max_iter` counts those evaluations.

use std::fmt::Write as _;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::CandidatePoint;
use crate::error::{Error, Result};
use crate::optimizer::{sanitize_cost, NumericalOptimizer};

pub const REFLECT: f64 = 1.0;
pub const EXPAND: f64 = 2.0;
pub const CONTRACT: f64 = 0.5;
pub const SHRINK: f64 = 0.5;

/// Offset of the initial simplex vertices from the first vertex.
pub const INITIAL_STEP: f64 = 0.5;

/// Cost spread below which the simplex is considered degenerate.
const DEGENERATE_SPREAD: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NmStage {
    /// Evaluating initial vertex `k`.
    EvalInitial(usize),
    AwaitReflect,
    AwaitExpand {
        reflected_cost: f64,
    },
    AwaitContract {
        reflected_cost: f64,
        outside: bool,
    },
    /// Re-evaluating shrunk vertex `k` (sorted order, `k >= 1`).
    AwaitShrink(usize),
    Finished,
}

#[derive(Debug, Clone)]
pub struct NelderMead {
    dim: usize,
    error_tol: f64,
    max_iter: usize,
    vertices: Vec<Vec<f64>>,
    costs: Vec<f64>,
    centroid: Vec<f64>,
    reflected: Vec<f64>,
    pending: Vec<f64>,
    stage: NmStage,
    evals: usize,
    best_point: Vec<f64>,
    best_cost: Option<f64>,
    awaiting_cost: bool,
    rng: ChaCha8Rng,
}

impl NelderMead {
    /// `max_iter == 0` disables the evaluation cap.
    pub fn new(dim: usize, error_tol: f64, max_iter: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("Nelder-Mead needs dim >= 1".into()));
        }
        if !(error_tol > 0.0) {
            return Err(Error::Config(format!(
                "Nelder-Mead error tolerance must be positive, got {error_tol}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Uniform::new_inclusive(-1.0, 1.0);
        let origin: Vec<f64> = (0..dim).map(|_| unit.sample(&mut rng)).collect();
        let vertices = initial_simplex(&origin);
        Ok(Self {
            dim,
            error_tol,
            max_iter,
            pending: vertices[0].clone(),
            best_point: vertices[0].clone(),
            vertices,
            costs: vec![f64::INFINITY; dim + 1],
            centroid: vec![0.0; dim],
            reflected: vec![0.0; dim],
            stage: NmStage::EvalInitial(0),
            evals: 0,
            best_cost: None,
            awaiting_cost: false,
            rng,
        })
    }

    pub fn stage(&self) -> NmStage {
        self.stage
    }

    pub fn evals(&self) -> usize {
        self.evals
    }

    pub fn vertices(&self) -> Vec<CandidatePoint> {
        self.vertices
            .iter()
            .map(|v| CandidatePoint::from_coords_unchecked(v.clone()))
            .collect()
    }

    pub fn vertex_costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn best_point(&self) -> CandidatePoint {
        CandidatePoint::from_coords_unchecked(self.best_point.clone())
    }

    /// Sample standard deviation of the vertex costs.
    pub fn cost_spread(&self) -> f64 {
        sample_std(&self.costs)
    }

    fn record(&mut self, cost: f64) {
        self.evals += 1;
        if cost.is_finite() && self.best_cost.is_none_or(|b| cost < b) {
            self.best_cost = Some(cost);
            self.best_point.clone_from(&self.pending);
        }
    }

    fn finish(&mut self) {
        self.stage = NmStage::Finished;
        self.pending.clone_from(&self.best_point);
    }

    fn sort_simplex(&mut self) {
        let mut order: Vec<usize> = (0..=self.dim).collect();
        order.sort_by(|&a, &b| self.costs[a].total_cmp(&self.costs[b]));
        self.vertices = order.iter().map(|&i| self.vertices[i].clone()).collect();
        self.costs = order.iter().map(|&i| self.costs[i]).collect();
    }

    /// Top of the loop: order, test convergence, propose a reflection.
    fn begin_iteration(&mut self) {
        self.sort_simplex();
        let n = self.dim;
        if sample_std(&self.costs) < self.error_tol {
            self.finish();
            return;
        }
        if (self.costs[n] - self.costs[0]).abs() <= DEGENERATE_SPREAD {
            self.begin_shrink();
            return;
        }
        for d in 0..n {
            let mut sum = 0.0;
            for v in &self.vertices[..n] {
                sum += v[d];
            }
            self.centroid[d] = sum / n as f64;
        }
        for d in 0..n {
            let c = self.centroid[d];
            self.reflected[d] = (c + REFLECT * (c - self.vertices[n][d])).clamp(-1.0, 1.0);
        }
        self.pending.clone_from(&self.reflected);
        self.stage = NmStage::AwaitReflect;
    }

    fn replace_worst_with_pending(&mut self, cost: f64) {
        let n = self.dim;
        self.vertices[n].clone_from(&self.pending);
        self.costs[n] = cost;
    }

    fn begin_shrink(&mut self) {
        let best = self.vertices[0].clone();
        for v in &mut self.vertices[1..] {
            for (x, b) in v.iter_mut().zip(&best) {
                *x = b + SHRINK * (*x - b);
            }
        }
        self.pending.clone_from(&self.vertices[1]);
        self.stage = NmStage::AwaitShrink(1);
    }

    fn absorb(&mut self, cost: f64) {
        let cost = sanitize_cost(cost);
        self.record(cost);
        let n = self.dim;
        match self.stage {
            NmStage::EvalInitial(k) => {
                self.costs[k] = cost;
                if self.cap_reached() {
                    return self.finish();
                }
                if k < n {
                    self.stage = NmStage::EvalInitial(k + 1);
                    self.pending.clone_from(&self.vertices[k + 1]);
                } else {
                    self.begin_iteration();
                }
            }
            NmStage::AwaitReflect => {
                if cost < self.costs[0] {
                    if self.cap_reached() {
                        return self.finish();
                    }
                    for d in 0..n {
                        let c = self.centroid[d];
                        self.pending[d] = (c + EXPAND * (self.reflected[d] - c)).clamp(-1.0, 1.0);
                    }
                    self.stage = NmStage::AwaitExpand {
                        reflected_cost: cost,
                    };
                } else if cost < self.costs[n - 1] {
                    self.replace_worst_with_pending(cost);
                    if self.cap_reached() {
                        return self.finish();
                    }
                    self.begin_iteration();
                } else {
                    if self.cap_reached() {
                        return self.finish();
                    }
                    let outside = cost < self.costs[n];
                    for d in 0..n {
                        let c = self.centroid[d];
                        let toward = if outside {
                            self.reflected[d]
                        } else {
                            self.vertices[n][d]
                        };
                        self.pending[d] = c + CONTRACT * (toward - c);
                    }
                    self.stage = NmStage::AwaitContract {
                        reflected_cost: cost,
                        outside,
                    };
                }
            }
            NmStage::AwaitExpand { reflected_cost } => {
                if cost < reflected_cost {
                    self.replace_worst_with_pending(cost);
                } else {
                    let n = self.dim;
                    self.vertices[n].clone_from(&self.reflected);
                    self.costs[n] = reflected_cost;
                }
                if self.cap_reached() {
                    return self.finish();
                }
                self.begin_iteration();
            }
            NmStage::AwaitContract {
                reflected_cost,
                outside,
            } => {
                let accept = if outside {
                    cost <= reflected_cost
                } else {
                    cost < self.costs[n]
                };
                if accept {
                    self.replace_worst_with_pending(cost);
                    if self.cap_reached() {
                        return self.finish();
                    }
                    self.begin_iteration();
                } else {
                    if self.cap_reached() {
                        return self.finish();
                    }
                    self.begin_shrink();
                }
            }
            NmStage::AwaitShrink(k) => {
                self.costs[k] = cost;
                if self.cap_reached() {
                    return self.finish();
                }
                if k < n {
                    self.stage = NmStage::AwaitShrink(k + 1);
                    self.pending.clone_from(&self.vertices[k + 1]);
                } else {
                    self.begin_iteration();
                }
            }
            NmStage::Finished => {}
        }
    }

    fn cap_reached(&self) -> bool {
        self.max_iter > 0 && self.evals >= self.max_iter
    }

    fn restart_from(&mut self, vertices: Vec<Vec<f64>>) {
        self.vertices = vertices;
        self.costs.fill(f64::INFINITY);
        self.pending.clone_from(&self.vertices[0]);
        self.stage = NmStage::EvalInitial(0);
    }
}

/// Vertex 0 plus one vertex per axis displaced by [`INITIAL_STEP`], flipped
/// to the other side when the displacement would leave the box.
fn initial_simplex(origin: &[f64]) -> Vec<Vec<f64>> {
    let mut vertices = vec![origin.to_vec()];
    for k in 0..origin.len() {
        let mut v = origin.to_vec();
        v[k] = if v[k] + INITIAL_STEP <= 1.0 {
            v[k] + INITIAL_STEP
        } else {
            v[k] - INITIAL_STEP
        };
        vertices.push(v);
    }
    vertices
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

impl NumericalOptimizer for NelderMead {
    fn run(&mut self, cost: f64) -> CandidatePoint {
        if self.stage != NmStage::Finished {
            if self.awaiting_cost {
                self.absorb(cost);
            }
            self.awaiting_cost = self.stage != NmStage::Finished;
        }
        CandidatePoint::from_coords_unchecked(self.pending.clone())
    }

    fn num_points(&self) -> usize {
        self.dim + 1
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn is_end(&self) -> bool {
        self.stage == NmStage::Finished
    }

    /// * 0: re-measure the current simplex and run `max_iter` more
    ///   evaluations, keeping the best solution.
    /// * 1: rebuild the initial simplex around the best solution.
    /// * 2+: draw a fresh simplex and forget the best solution.
    fn reset(&mut self, level: u32) {
        self.evals = 0;
        self.awaiting_cost = false;
        match level {
            0 => {
                let vertices = self.vertices.clone();
                self.restart_from(vertices);
            }
            1 => {
                let vertices = initial_simplex(&self.best_point);
                self.restart_from(vertices);
            }
            _ => {
                let unit = Uniform::new_inclusive(-1.0, 1.0);
                let origin: Vec<f64> = (0..self.dim).map(|_| unit.sample(&mut self.rng)).collect();
                self.restart_from(initial_simplex(&origin));
                self.best_cost = None;
                self.best_point = origin;
            }
        }
    }

    fn describe(&self) -> String {
        let mut s = format!("nm stage={:?} evals={}", self.stage, self.evals);
        if self.max_iter > 0 {
            let _ = write!(s, "/{}", self.max_iter);
        }
        match self.best_cost {
            Some(c) => {
                let _ = write!(s, " best_cost={c:.6e}");
            }
            None => s.push_str(" best_cost=unset"),
        }
        for (v, c) in self.vertices.iter().zip(&self.costs) {
            let _ = write!(s, " {v:?}:{c:.6e}");
        }
        s
    }

    fn best_cost(&self) -> Option<f64> {
        self.best_cost
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(nm: &mut NelderMead, f: impl Fn(&[f64]) -> f64) -> (usize, Vec<Vec<f64>>) {
        let mut trace = Vec::new();
        let mut p = nm.run(f64::NAN);
        while !nm.is_end() {
            trace.push(p.coords().to_vec());
            p = nm.run(f(p.coords()));
        }
        (trace.len(), trace)
    }

    #[test]
    fn construction() {
        let nm = NelderMead::new(1, 1e-6, 0, 3).unwrap();
        assert_eq!(nm.vertices().len(), 2);
        assert_eq!(nm.num_points(), 2);
        assert_eq!(nm.stage(), NmStage::EvalInitial(0));
        assert!(NelderMead::new(0, 1e-6, 0, 0).is_err());
        assert!(NelderMead::new(2, 0.0, 0, 0).is_err());
        assert!(NelderMead::new(2, -1.0, 0, 0).is_err());
        let a = NelderMead::new(4, 1e-3, 10, 17).unwrap();
        let b = NelderMead::new(4, 1e-3, 10, 17).unwrap();
        assert_eq!(a.vertices(), b.vertices());
    }

    #[test]
    fn initial_simplex_stays_in_box() {
        let s = initial_simplex(&[0.9, -0.2]);
        assert_eq!(s[1], vec![0.4, -0.2]);
        assert_eq!(s[2], vec![0.9, 0.3]);
    }

    #[test]
    fn shifted_quadratic_1d() {
        let mut nm = NelderMead::new(1, 1e-6, 0, 8).unwrap();
        drive(&mut nm, |x| (x[0] - 0.3).powi(2));
        assert!((nm.best_point().coords()[0] - 0.3).abs() <= 1e-3);
    }

    #[test]
    fn sphere_2d_unlimited() {
        let mut nm = NelderMead::new(2, 1e-8, 0, 8).unwrap();
        drive(&mut nm, |x| x.iter().map(|v| v * v).sum());
        assert!(nm.best_cost().unwrap() < 1e-6);
    }

    #[test]
    fn max_iter_caps_evaluations() {
        for m in [1, 2, 3, 7, 25] {
            let mut nm = NelderMead::new(2, 1e-300, m, 1).unwrap();
            let (evals, _) = drive(&mut nm, |x| x.iter().map(|v| v * v).sum());
            assert_eq!(evals, m);
            assert_eq!(nm.evals(), m);
        }
    }

    #[test]
    fn finished_point_is_best_vertex() {
        let mut nm = NelderMead::new(2, 1e-4, 0, 5).unwrap();
        let f = |x: &[f64]| (x[0] - 0.1).powi(2) + 2.0 * (x[1] + 0.2).powi(2);
        let (_, trace) = drive(&mut nm, f);
        let best = trace
            .iter()
            .min_by(|a, b| f(a).total_cmp(&f(b)))
            .unwrap()
            .clone();
        for _ in 0..3 {
            assert_eq!(nm.run(0.0).coords(), best.as_slice());
        }
    }

    #[test]
    fn shrink_contracts_toward_best() {
        // A cost that rejects every reflection and contraction forces shrinks.
        let mut nm = NelderMead::new(2, 1e-300, 0, 4).unwrap();
        let mut p = nm.run(0.0);
        // Initial vertices get costs 0, 1, 2.
        for c in [0.0, 1.0, 2.0] {
            assert!(matches!(nm.stage(), NmStage::EvalInitial(_)));
            p = nm.run(c);
        }
        let _ = p;
        assert_eq!(nm.stage(), NmStage::AwaitReflect);
        let before = nm.vertices();
        nm.run(10.0); // reflection worse than worst -> inside contraction
        assert!(matches!(
            nm.stage(),
            NmStage::AwaitContract { outside: false, .. }
        ));
        nm.run(10.0); // contraction rejected -> shrink
        assert_eq!(nm.stage(), NmStage::AwaitShrink(1));
        let after = nm.vertices();
        let best = before[0].coords();
        for k in 1..3 {
            for d in 0..2 {
                let expect = best[d] + SHRINK * (before[k].coords()[d] - best[d]);
                assert!((after[k].coords()[d] - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn nonfinite_cost_counts_as_worst() {
        let mut nm = NelderMead::new(1, 1e-9, 60, 2).unwrap();
        let mut p = nm.run(0.0);
        let mut k = 0;
        while !nm.is_end() {
            let c = if k == 3 {
                f64::NAN
            } else {
                (p.coords()[0] - 0.3).powi(2)
            };
            p = nm.run(c);
            k += 1;
        }
        assert!(nm.best_cost().unwrap().is_finite());
    }

    #[test]
    fn reset_levels() {
        let mut nm = NelderMead::new(2, 1e-6, 30, 9).unwrap();
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        drive(&mut nm, f);
        let best = nm.best_cost();
        nm.reset(0);
        assert!(!nm.is_end());
        assert_eq!(nm.best_cost(), best);
        let (evals, _) = drive(&mut nm, f);
        assert!(evals <= 30);
        nm.reset(1);
        assert_eq!(nm.vertices()[0], nm.best_point());
        nm.reset(2);
        assert!(nm.best_cost().is_none());
        assert!(nm.describe().contains("best_cost=unset"));
    }
}
