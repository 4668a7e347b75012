//! Tuning sessions.
//!
//! A [`TuningSession`] sits between a numerical optimizer and the code being
//! tuned. It renders each candidate into user units, repeats it for `ignore`
//! warm-up executions whose measurements are thrown away, then feeds the next
//! measurement to the optimizer as that candidate's cost. Once the optimizer
//! ends, the session latches the final solution and hands it out forever.
//!
//! Costs come from three places:
//!
//! * wall-clock time between [`TuningSession::start`] and
//!   [`TuningSession::end`] (also used by the `*_runtime` helpers),
//! * a value passed to [`TuningSession::exec`],
//! * the return value of the target in [`TuningSession::entire_exec`] and
//!   [`TuningSession::single_exec`].
//!
//! With CSA the number of measured target executions is exactly
//! `max_iter * (ignore + 1) * num_opt`; with Nelder–Mead it is at most
//! `max_iter * (ignore + 1)`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use crate::csa::Csa;
use crate::domain::{CandidatePoint, SearchDomain};
use crate::error::{Error, ExecError, Result};
use crate::optimizer::NumericalOptimizer;

/// How candidates are rendered for the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointKind {
    /// Rounded half-away-from-zero and clamped to the integer range.
    #[default]
    Integer,
    Real,
}

/// Element types a session can write candidates into.
pub trait PointValue: Copy {
    const INTEGRAL: bool;
    fn from_rendered(v: f64) -> Self;
}

macro_rules! point_value {
    ($integral:expr => $($t:ty),*) => {
        $(impl PointValue for $t {
            const INTEGRAL: bool = $integral;
            fn from_rendered(v: f64) -> Self {
                v as $t
            }
        })*
    };
}

point_value!(true => i8, i16, i32, i64, isize, u8, u16, u32, u64, usize);
point_value!(false => f32, f64);

/// Monotonic time source, in seconds.
pub trait Clock: Send {
    fn now(&mut self) -> f64;
}

/// Wall clock backed by [`Instant`].
#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Clock for MonotonicClock {
    fn now(&mut self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// A clock that only moves when told to. Clones share the same time, so a
/// target can advance the clock the session reads.
#[derive(Debug, Clone, Default)]
pub struct ManualClock {
    bits: Arc<AtomicU64>,
}

impl ManualClock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Moves time forward by `secs` (negative values are ignored).
    pub fn advance(&self, secs: f64) {
        if !(secs > 0.0) {
            return;
        }
        let _ = self
            .bits
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |b| {
                Some((f64::from_bits(b) + secs).to_bits())
            });
    }

    pub fn get(&self) -> f64 {
        f64::from_bits(self.bits.load(Ordering::SeqCst))
    }
}

impl Clock for ManualClock {
    fn now(&mut self) -> f64 {
        self.get()
    }
}

/// One cost fed to the optimizer.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TraceRecord {
    pub eval_index: u64,
    /// The candidate, in user units.
    pub point: Vec<f64>,
    pub cost: f64,
    /// Best finite cost fed so far (`inf` if none).
    pub best_cost: f64,
}

type TraceSink = Box<dyn FnMut(&TraceRecord) + Send>;

pub struct TuningSession {
    domain: SearchDomain,
    kind: PointKind,
    optimizer: Box<dyn NumericalOptimizer>,
    ignore: usize,
    reps_done: usize,
    pending_point: CandidatePoint,
    pending: Vec<f64>,
    presented: bool,
    timer_start: Option<f64>,
    finished: bool,
    final_values: Option<Vec<f64>>,
    target_execs: u64,
    fed: u64,
    best_cost: f64,
    clock: Box<dyn Clock>,
    trace: Option<TraceSink>,
}

impl std::fmt::Debug for TuningSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TuningSession")
            .field("domain", &self.domain)
            .field("kind", &self.kind)
            .field("ignore", &self.ignore)
            .field("reps_done", &self.reps_done)
            .field("pending", &self.pending)
            .field("finished", &self.finished)
            .field("target_execs", &self.target_execs)
            .field("fed", &self.fed)
            .field("optimizer", &self.optimizer.describe())
            .finish()
    }
}

impl TuningSession {
    /// Session driven by a fresh CSA optimizer, rendering integer points.
    pub fn new(
        lower: f64,
        upper: f64,
        ignore: usize,
        dim: usize,
        num_opt: usize,
        max_iter: usize,
        seed: u64,
    ) -> Result<Self> {
        SearchDomain::new(lower, upper, dim)?;
        let csa = Csa::new(dim, num_opt, max_iter, seed)?;
        Self::with_optimizer(lower, upper, ignore, Box::new(csa))
    }

    /// Session adopting `optimizer`, rendering integer points. The
    /// dimension is taken from the optimizer.
    pub fn with_optimizer(
        lower: f64,
        upper: f64,
        ignore: usize,
        optimizer: Box<dyn NumericalOptimizer>,
    ) -> Result<Self> {
        Self::with_optimizer_kind(lower, upper, ignore, optimizer, PointKind::Integer)
    }

    /// Session adopting `optimizer` with an explicit rendering kind.
    pub fn with_optimizer_kind(
        lower: f64,
        upper: f64,
        ignore: usize,
        mut optimizer: Box<dyn NumericalOptimizer>,
        kind: PointKind,
    ) -> Result<Self> {
        if optimizer.is_end() {
            return Err(Error::Config("optimizer has already finished".into()));
        }
        let domain = SearchDomain::new(lower, upper, optimizer.dimension())?;
        if kind == PointKind::Integer {
            domain.integer_range()?;
        }
        let first = optimizer.run(f64::NAN);
        let mut session = Self {
            domain,
            kind,
            optimizer,
            ignore,
            reps_done: 0,
            pending: Vec::new(),
            pending_point: first,
            presented: false,
            timer_start: None,
            finished: false,
            final_values: None,
            target_execs: 0,
            fed: 0,
            best_cost: f64::INFINITY,
            clock: Box::new(MonotonicClock::default()),
            trace: None,
        };
        session.pending = session.render(&session.pending_point)?;
        Ok(session)
    }

    /// Switches how points are rendered. Meant to be called right after
    /// construction.
    pub fn with_point_kind(mut self, kind: PointKind) -> Result<Self> {
        if kind == PointKind::Integer {
            self.domain.integer_range()?;
        }
        self.kind = kind;
        self.pending = self.render(&self.pending_point)?;
        if let Some(fin) = self.final_values.as_mut() {
            *fin = self.pending.clone();
        }
        Ok(self)
    }

    pub fn with_clock(mut self, clock: impl Clock + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    /// Registers a callback receiving every cost fed to the optimizer.
    pub fn with_trace(mut self, sink: impl FnMut(&TraceRecord) + Send + 'static) -> Self {
        self.trace = Some(Box::new(sink));
        self
    }

    pub fn domain(&self) -> &SearchDomain {
        &self.domain
    }

    pub fn point_kind(&self) -> PointKind {
        self.kind
    }

    pub fn ignore(&self) -> usize {
        self.ignore
    }

    pub fn optimizer(&self) -> &dyn NumericalOptimizer {
        self.optimizer.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Target executions measured while tuning (warm-ups included).
    pub fn target_execs(&self) -> u64 {
        self.target_execs
    }

    /// Number of costs handed to the optimizer.
    pub fn costs_fed(&self) -> u64 {
        self.fed
    }

    /// Best finite cost fed so far.
    pub fn best_cost(&self) -> Option<f64> {
        self.best_cost.is_finite().then_some(self.best_cost)
    }

    pub fn final_values(&self) -> Option<&[f64]> {
        self.final_values.as_deref()
    }

    /// The point the next execution will use, in user units.
    pub fn current_values(&self) -> &[f64] {
        self.final_values.as_deref().unwrap_or(&self.pending)
    }

    pub fn section_open(&self) -> bool {
        self.timer_start.is_some()
    }

    fn render(&self, point: &CandidatePoint) -> Result<Vec<f64>> {
        let user = self.domain.to_user(point)?;
        Ok(match self.kind {
            PointKind::Real => user,
            PointKind::Integer => self
                .domain
                .to_integer_values(&user)?
                .into_iter()
                .map(|v| v as f64)
                .collect(),
        })
    }

    fn check_buffer<P: PointValue>(&self, out: &[P]) -> Result<()> {
        if out.len() != self.domain.dim() {
            return Err(Error::Dimension {
                expected: self.domain.dim(),
                got: out.len(),
            });
        }
        if P::INTEGRAL && self.kind == PointKind::Real {
            return Err(Error::Usage(
                "session renders real points; use a floating-point buffer".into(),
            ));
        }
        Ok(())
    }

    fn write_current<P: PointValue>(&mut self, out: &mut [P]) -> Result<()> {
        self.check_buffer(out)?;
        for (o, &v) in out.iter_mut().zip(self.current_values()) {
            *o = P::from_rendered(v);
        }
        self.presented = true;
        Ok(())
    }

    /// Books one target execution whose cost is `cost`.
    fn record_sample(&mut self, cost: f64) {
        if self.finished {
            return;
        }
        self.target_execs += 1;
        if self.reps_done < self.ignore {
            self.reps_done += 1;
            return;
        }
        self.feed(cost);
    }

    fn feed(&mut self, cost: f64) {
        let next = self.optimizer.run(cost);
        if cost.is_finite() && cost < self.best_cost {
            self.best_cost = cost;
        }
        if let Some(sink) = self.trace.as_mut() {
            sink(&TraceRecord {
                eval_index: self.fed,
                point: self.pending.clone(),
                cost,
                best_cost: self.best_cost,
            });
        }
        self.fed += 1;
        self.reps_done = 0;
        // The optimizer only hands out points inside the box, so rendering
        // cannot fail once the session has been built.
        self.pending = self.render(&next).expect("optimizer point outside domain");
        self.pending_point = next;
        if self.optimizer.is_end() {
            self.finished = true;
            self.final_values = Some(self.pending.clone());
        }
    }

    /// Opens a measured section and writes the point to use into `out`.
    pub fn start<P: PointValue>(&mut self, out: &mut [P]) -> Result<()> {
        if self.timer_start.is_some() {
            return Err(Error::Usage("start called twice without end".into()));
        }
        self.write_current(out)?;
        self.timer_start = Some(self.clock.now());
        Ok(())
    }

    /// Closes the measured section and uses the elapsed time as cost.
    pub fn end(&mut self) -> Result<()> {
        let Some(t0) = self.timer_start.take() else {
            return Err(Error::Usage("end called without start".into()));
        };
        let elapsed = (self.clock.now() - t0).max(0.0);
        self.record_sample(elapsed);
        Ok(())
    }

    /// Closes an open section without recording anything.
    fn abort_section(&mut self) {
        self.timer_start = None;
    }

    /// Feeds a caller-computed cost for the previously returned point and
    /// writes the next one into `out`. The cost passed to the first call is
    /// discarded since no point had been handed out yet.
    pub fn exec<P: PointValue>(&mut self, out: &mut [P], cost: f64) -> Result<()> {
        self.check_buffer(out)?;
        if self.timer_start.is_some() {
            return Err(Error::Usage("exec called inside an open section".into()));
        }
        if self.presented {
            self.record_sample(cost);
        }
        self.write_current(out)
    }

    /// Runs `target` under timing until tuning finishes, then writes the
    /// final point into `out`.
    pub fn entire_exec_runtime<P, R>(
        &mut self,
        out: &mut [P],
        mut target: impl FnMut(&[P]) -> R,
    ) -> Result<()>
    where
        P: PointValue,
    {
        self.try_entire_exec_runtime(out, |p| Ok::<R, std::convert::Infallible>(target(p)))
            .map_err(ExecError::into_tuning)
    }

    pub fn try_entire_exec_runtime<P, R, E>(
        &mut self,
        out: &mut [P],
        mut target: impl FnMut(&[P]) -> std::result::Result<R, E>,
    ) -> std::result::Result<(), ExecError<E>>
    where
        P: PointValue,
    {
        while !self.finished {
            self.start(out)?;
            if let Err(e) = target(out) {
                self.abort_section();
                return Err(ExecError::Target(e));
            }
            self.end()?;
        }
        self.write_current(out)?;
        Ok(())
    }

    /// One timed tuning step per call. After tuning ends the target runs
    /// with the final point and nothing is measured.
    pub fn single_exec_runtime<P, R>(
        &mut self,
        out: &mut [P],
        mut target: impl FnMut(&[P]) -> R,
    ) -> Result<R>
    where
        P: PointValue,
    {
        self.try_single_exec_runtime(out, |p| Ok::<R, std::convert::Infallible>(target(p)))
            .map_err(ExecError::into_tuning)
    }

    pub fn try_single_exec_runtime<P, R, E>(
        &mut self,
        out: &mut [P],
        mut target: impl FnMut(&[P]) -> std::result::Result<R, E>,
    ) -> std::result::Result<R, ExecError<E>>
    where
        P: PointValue,
    {
        if self.finished {
            self.write_current(out)?;
            return target(out).map_err(ExecError::Target);
        }
        self.start(out)?;
        let r = match target(out) {
            Ok(r) => r,
            Err(e) => {
                self.abort_section();
                return Err(ExecError::Target(e));
            }
        };
        self.end()?;
        self.write_current(out)?;
        Ok(r)
    }

    /// Like [`entire_exec_runtime`](Self::entire_exec_runtime) but the
    /// target returns its own cost.
    pub fn entire_exec<P: PointValue>(
        &mut self,
        out: &mut [P],
        mut target: impl FnMut(&[P]) -> f64,
    ) -> Result<()> {
        self.try_entire_exec(out, |p| Ok::<f64, std::convert::Infallible>(target(p)))
            .map_err(ExecError::into_tuning)
    }

    pub fn try_entire_exec<P: PointValue, E>(
        &mut self,
        out: &mut [P],
        mut target: impl FnMut(&[P]) -> std::result::Result<f64, E>,
    ) -> std::result::Result<(), ExecError<E>> {
        if self.timer_start.is_some() {
            return Err(Error::Usage("entire_exec called inside an open section".into()).into());
        }
        while !self.finished {
            self.write_current(out)?;
            let cost = target(out).map_err(ExecError::Target)?;
            self.record_sample(cost);
        }
        self.write_current(out)?;
        Ok(())
    }

    /// Like [`single_exec_runtime`](Self::single_exec_runtime) but the
    /// target returns its own cost, which is passed back to the caller.
    pub fn single_exec<P: PointValue>(
        &mut self,
        out: &mut [P],
        mut target: impl FnMut(&[P]) -> f64,
    ) -> Result<f64> {
        self.try_single_exec(out, |p| Ok::<f64, std::convert::Infallible>(target(p)))
            .map_err(ExecError::into_tuning)
    }

    pub fn try_single_exec<P: PointValue, E>(
        &mut self,
        out: &mut [P],
        mut target: impl FnMut(&[P]) -> std::result::Result<f64, E>,
    ) -> std::result::Result<f64, ExecError<E>> {
        if self.timer_start.is_some() {
            return Err(Error::Usage("single_exec called inside an open section".into()).into());
        }
        self.write_current(out)?;
        let cost = target(out).map_err(ExecError::Target)?;
        self.record_sample(cost);
        self.write_current(out)?;
        Ok(cost)
    }

    /// Resets the optimizer (see [`NumericalOptimizer::reset`]) and reopens
    /// tuning.
    pub fn reset(&mut self, level: u32) {
        self.optimizer.reset(level);
        self.timer_start = None;
        self.finished = false;
        self.final_values = None;
        self.reps_done = 0;
        self.presented = false;
        let first = self.optimizer.run(f64::NAN);
        self.pending = self.render(&first).expect("optimizer point outside domain");
        self.pending_point = first;
    }
}

impl ExecError<std::convert::Infallible> {
    fn into_tuning(self) -> Error {
        match self {
            ExecError::Tuning(e) => e,
            ExecError::Target(never) => match never {},
        }
    }
}
