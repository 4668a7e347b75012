//! Coupled Simulated Annealing.
//!
//! `num_opt` annealers run side by side. Each iteration every annealer
//! proposes a Cauchy-distributed move; a worse probe is accepted with a
//! probability coupled across the ensemble through a shared normalization,
//! so annealers sitting on high costs explore while the others refine. The
//! acceptance temperature is steered so the variance of those probabilities
//! tracks a target.
//!
//! Probes are issued one per [`NumericalOptimizer::run`] call. The initial
//! seeding of the ensemble counts as the first iteration, so a finished run
//! has consumed exactly `max_iter * num_opt` costs.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::distributions::{Distribution, Open01, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::CandidatePoint;
use crate::error::{Error, Result};
use crate::optimizer::{reflect_into_box, sanitize_cost, NumericalOptimizer};

/// Initial generation temperature (Cauchy step scale in the normalized box).
pub const T_GEN_0: f64 = 0.1;
/// Initial acceptance temperature.
pub const T_ACC_0: f64 = 0.9;
/// Multiplicative step applied to the acceptance temperature each iteration.
pub const T_ACC_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsaPhase {
    /// Awaiting costs for the initial ensemble.
    SeedingInitial,
    /// Awaiting costs for this iteration's probes.
    AwaitingProbeCost,
    Finished,
}

/// Coupled acceptance probabilities for the current ensemble costs.
///
/// `A_i = exp((E_i - E_max) / t_acc) / sum_j exp((E_j - E_max) / t_acc)`.
/// Requires at least two annealers; a single annealer uses Metropolis
/// acceptance instead.
pub fn accept_probabilities(costs: &[f64], t_acc: f64) -> Result<Vec<f64>> {
    if costs.len() < 2 {
        return Err(Error::Contract(
            "coupled acceptance needs at least two annealers".into(),
        ));
    }
    if !(t_acc > 0.0 && t_acc.is_finite()) {
        return Err(Error::Contract(format!(
            "acceptance temperature must be positive, got {t_acc}"
        )));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Contract("costs must be finite".into()));
    }
    Ok(coupled_probabilities(costs, t_acc))
}

fn coupled_probabilities(costs: &[f64], t_acc: f64) -> Vec<f64> {
    let e_max = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = costs.iter().map(|&e| ((e - e_max) / t_acc).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Variance of the acceptance probabilities, `mean(A^2) - 1/m^2`.
fn probability_variance(probs: &[f64]) -> f64 {
    let m = probs.len() as f64;
    let mean_sq = probs.iter().map(|a| a * a).sum::<f64>() / m;
    (mean_sq - 1.0 / (m * m)).max(0.0)
}

/// Target variance `0.99 * (m - 1) / m^2`.
fn target_variance(m: usize) -> f64 {
    let m = m as f64;
    0.99 * (m - 1.0) / (m * m)
}

#[derive(Debug, Clone)]
pub struct Csa {
    dim: usize,
    num_opt: usize,
    max_iter: usize,
    current: Vec<Vec<f64>>,
    current_cost: Vec<f64>,
    probes: Vec<Vec<f64>>,
    probe_cost: Vec<f64>,
    t_gen: f64,
    t_acc: f64,
    /// Number of acceptance steps since the last temperature reset.
    step: usize,
    iter: usize,
    cursor: usize,
    best_point: Vec<f64>,
    best_cost: Option<f64>,
    awaiting_cost: bool,
    phase: CsaPhase,
    rng: ChaCha8Rng,
}

impl Csa {
    pub fn new(dim: usize, num_opt: usize, max_iter: usize, seed: u64) -> Result<Self> {
        if dim == 0 || num_opt == 0 || max_iter == 0 {
            return Err(Error::Config(format!(
                "CSA needs dim, num_opt and max_iter >= 1 (got {dim}, {num_opt}, {max_iter})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let current = Self::draw_points(&mut rng, num_opt, dim);
        let best_point = current[0].clone();
        Ok(Self {
            dim,
            num_opt,
            max_iter,
            current,
            current_cost: vec![f64::INFINITY; num_opt],
            probes: vec![vec![0.0; dim]; num_opt],
            probe_cost: vec![f64::INFINITY; num_opt],
            t_gen: T_GEN_0,
            t_acc: T_ACC_0,
            step: 0,
            iter: 0,
            cursor: 0,
            best_point,
            best_cost: None,
            awaiting_cost: false,
            phase: CsaPhase::SeedingInitial,
            rng,
        })
    }

    fn draw_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
        let unit = Uniform::new_inclusive(-1.0, 1.0);
        (0..n)
            .map(|_| (0..dim).map(|_| unit.sample(rng)).collect())
            .collect()
    }

    pub fn phase(&self) -> CsaPhase {
        self.phase
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn t_gen(&self) -> f64 {
        self.t_gen
    }

    pub fn t_acc(&self) -> f64 {
        self.t_acc
    }

    pub fn best_point(&self) -> CandidatePoint {
        CandidatePoint::from_coords_unchecked(self.best_point.clone())
    }

    /// The ensemble's current solutions.
    pub fn current_points(&self) -> Vec<CandidatePoint> {
        self.current
            .iter()
            .map(|p| CandidatePoint::from_coords_unchecked(p.clone()))
            .collect()
    }

    pub fn current_costs(&self) -> &[f64] {
        &self.current_cost
    }

    fn record_best(&mut self, point: &[f64], cost: f64) {
        if cost.is_finite() && self.best_cost.is_none_or(|b| cost < b) {
            self.best_cost = Some(cost);
            self.best_point.copy_from_slice(point);
        }
    }

    fn generate_probes(&mut self) {
        let t_gen = self.t_gen;
        for i in 0..self.num_opt {
            for d in 0..self.dim {
                let r: f64 = Open01.sample(&mut self.rng);
                let step = t_gen * (PI * (r - 0.5)).tan();
                self.probes[i][d] = reflect_into_box(self.current[i][d] + step);
            }
        }
        self.cursor = 0;
    }

    fn accept_step(&mut self) {
        // Infinite costs stand in as the largest finite value so the coupling
        // term stays well defined.
        let energies: Vec<f64> = self
            .current_cost
            .iter()
            .map(|&c| if c.is_finite() { c } else { f64::MAX })
            .collect();

        if self.num_opt == 1 {
            let delta = self.probe_cost[0] - self.current_cost[0];
            let accept = if self.probe_cost[0] <= self.current_cost[0] {
                true
            } else {
                let p = (-delta / self.t_acc).exp();
                let r: f64 = Open01.sample(&mut self.rng);
                r < p
            };
            if accept {
                self.current[0].clone_from(&self.probes[0]);
                self.current_cost[0] = self.probe_cost[0];
            }
            self.t_acc *= 1.0 - T_ACC_STEP;
        } else {
            let probs = coupled_probabilities(&energies, self.t_acc);
            for i in 0..self.num_opt {
                let accept = if self.probe_cost[i] <= self.current_cost[i] {
                    true
                } else {
                    let r: f64 = Open01.sample(&mut self.rng);
                    r < probs[i]
                };
                if accept {
                    self.current[i].clone_from(&self.probes[i]);
                    self.current_cost[i] = self.probe_cost[i];
                }
            }
            if probability_variance(&probs) > target_variance(self.num_opt) {
                self.t_acc *= 1.0 + T_ACC_STEP;
            } else {
                self.t_acc *= 1.0 - T_ACC_STEP;
            }
        }
        if !(self.t_acc > 0.0) {
            self.t_acc = f64::MIN_POSITIVE;
        }
        self.t_acc = self.t_acc.min(f64::MAX);

        self.step += 1;
        self.t_gen = T_GEN_0 / (self.step as f64 + 1.0);
    }

    /// Books `cost` against the outstanding candidate and advances the phase.
    fn absorb(&mut self, cost: f64) {
        let cost = sanitize_cost(cost);
        match self.phase {
            CsaPhase::SeedingInitial => {
                let i = self.cursor;
                self.current_cost[i] = cost;
                let p = self.current[i].clone();
                self.record_best(&p, cost);
                self.cursor += 1;
                if self.cursor == self.num_opt {
                    self.iter += 1;
                    self.end_iteration();
                }
            }
            CsaPhase::AwaitingProbeCost => {
                let i = self.cursor;
                self.probe_cost[i] = cost;
                let p = self.probes[i].clone();
                self.record_best(&p, cost);
                self.cursor += 1;
                if self.cursor == self.num_opt {
                    self.accept_step();
                    self.iter += 1;
                    self.end_iteration();
                }
            }
            CsaPhase::Finished => {}
        }
    }

    fn end_iteration(&mut self) {
        if self.iter >= self.max_iter {
            self.phase = CsaPhase::Finished;
        } else {
            self.phase = CsaPhase::AwaitingProbeCost;
            self.generate_probes();
        }
    }

    fn outstanding(&self) -> &[f64] {
        match self.phase {
            CsaPhase::SeedingInitial => &self.current[self.cursor],
            CsaPhase::AwaitingProbeCost => &self.probes[self.cursor],
            CsaPhase::Finished => &self.best_point,
        }
    }
}

impl NumericalOptimizer for Csa {
    fn run(&mut self, cost: f64) -> CandidatePoint {
        if self.phase != CsaPhase::Finished {
            if self.awaiting_cost {
                self.absorb(cost);
            }
            self.awaiting_cost = self.phase != CsaPhase::Finished;
        }
        CandidatePoint::from_coords_unchecked(self.outstanding().to_vec())
    }

    fn num_points(&self) -> usize {
        self.num_opt
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn is_end(&self) -> bool {
        self.phase == CsaPhase::Finished
    }

    /// * 0: restore temperatures and allow `max_iter` more iterations from
    ///   the current ensemble, keeping its costs and the best solution.
    /// * 1: redraw the ensemble and restart, keeping the best solution.
    /// * 2+: start over as if freshly built (the random stream continues).
    fn reset(&mut self, level: u32) {
        self.t_gen = T_GEN_0;
        self.t_acc = T_ACC_0;
        self.step = 0;
        self.iter = 0;
        self.cursor = 0;
        self.awaiting_cost = false;
        if level == 0 {
            if self.current_cost.iter().all(|c| c.is_infinite()) {
                // Nothing was ever measured; seed again instead.
                self.phase = CsaPhase::SeedingInitial;
            } else {
                self.phase = CsaPhase::AwaitingProbeCost;
                self.generate_probes();
            }
            return;
        }
        self.current = Self::draw_points(&mut self.rng, self.num_opt, self.dim);
        self.current_cost.fill(f64::INFINITY);
        self.phase = CsaPhase::SeedingInitial;
        if level >= 2 {
            self.best_cost = None;
            self.best_point.clone_from(&self.current[0]);
        }
    }

    fn describe(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "csa iter={}/{} t_gen={:.6e} t_acc={:.6e} best_cost=",
            self.iter, self.max_iter, self.t_gen, self.t_acc
        );
        match self.best_cost {
            Some(c) => {
                let _ = write!(s, "{c:.6e}");
            }
            None => s.push_str("unset"),
        }
        s
    }

    fn best_cost(&self) -> Option<f64> {
        self.best_cost
    }
}
