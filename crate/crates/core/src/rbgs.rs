//! Parallel red-black Gauss–Seidel for the 2-D Laplace problem.
//!
//! Each sweep updates the black cells (`(i + j)` odd) and then the red cells
//! (`(i + j)` even), replacing every interior cell with the mean of its four
//! neighbours. Within a colour phase rows are handed to workers in
//! dynamically claimed batches of `chunk` rows, which is the knob the tuner
//! adjusts. Same-colour updates never read each other, so the result is the
//! same for every thread count and chunk size.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::csa::Csa;
use crate::error::{Error, Result};
use crate::nelder_mead::NelderMead;
use crate::optimizer::NumericalOptimizer;
use crate::session::TuningSession;

/// `(n + 2) x (n + 2)` grid with a fixed boundary ring.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    values: Vec<f64>,
}

impl Grid {
    /// Interior cells set to `interior`, boundary cells to `boundary`.
    pub fn new(n: usize, interior: f64, boundary: f64) -> Result<Self> {
        Self::with_boundary(n, interior, |_, _| boundary)
    }

    /// Boundary cells take `boundary(i, j)`; interior cells `interior`.
    pub fn with_boundary(
        n: usize,
        interior: f64,
        boundary: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("grid needs at least one interior row".into()));
        }
        let side = n + 2;
        let mut values = vec![interior; side * side];
        for i in 0..side {
            for j in 0..side {
                if i == 0 || j == 0 || i == side - 1 || j == side - 1 {
                    values[i * side + j] = boundary(i, j);
                }
            }
        }
        Ok(Self { n, values })
    }

    /// Interior size per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> usize {
        self.n + 2
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.side() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let side = self.side();
        self.values[i * side + j] = v;
    }

    /// Row-major values including the boundary.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Color {
    /// `(i + j)` odd; updated first.
    Black,
    /// `(i + j)` even.
    Red,
}

impl Color {
    fn parity(self) -> usize {
        match self {
            Color::Black => 1,
            Color::Red => 0,
        }
    }
}

/// Rows per dynamically claimed batch, for the black and red phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkConfig {
    pub black: usize,
    pub red: usize,
}

impl ChunkConfig {
    /// One chunk size for both phases.
    pub fn single(chunk: usize) -> Self {
        Self {
            black: chunk,
            red: chunk,
        }
    }

    pub fn dual(black: usize, red: usize) -> Self {
        Self { black, red }
    }

    /// One value applies to both loops, two values to black then red.
    pub fn from_slice(chunks: &[usize]) -> Result<Self> {
        match *chunks {
            [c] => Ok(Self::single(c)),
            [b, r] => Ok(Self::dual(b, r)),
            _ => Err(Error::Dimension {
                expected: 2,
                got: chunks.len(),
            }),
        }
    }

    /// Clamps both sizes into `[1, n]`; the flag reports whether anything
    /// changed.
    pub fn clamped(self, n: usize) -> (Self, bool) {
        let c = Self {
            black: self.black.clamp(1, n),
            red: self.red.clamp(1, n),
        };
        (c, c != self)
    }
}

/// Raw view of a buffer shared by the workers of one colour phase.
#[derive(Clone, Copy)]
struct SharedBuf(*mut f64);

// SAFETY: within a phase each row is claimed by exactly one worker, which
// writes only active-colour cells of that row (and its own slot in the row
// diff buffer). Reads touch only inactive-colour cells, which nobody writes
// during the phase.
unsafe impl Send for SharedBuf {}
unsafe impl Sync for SharedBuf {}

impl SharedBuf {
    fn get(self) -> *mut f64 {
        self.0
    }
}

/// Updates the `color` cells of row `i`; returns the sum of absolute changes.
///
/// # Safety
/// `cells` must point to an `(n + 2)^2` grid and no other thread may access
/// the `color` cells of row `i` or write any cell of the other colour.
unsafe fn update_row(cells: SharedBuf, n: usize, i: usize, color: Color) -> f64 {
    let side = n + 2;
    let j0 = if (i + 1) % 2 == color.parity() { 1 } else { 2 };
    let p = cells.get();
    let mut diff = 0.0;
    let mut j = j0;
    while j <= n {
        let idx = i * side + j;
        let old = p.add(idx).read();
        let new = 0.25
            * (p.add(idx - side).read()
                + p.add(idx + side).read()
                + p.add(idx - 1).read()
                + p.add(idx + 1).read());
        p.add(idx).write(new);
        diff += (new - old).abs();
        j += 2;
    }
    diff
}

/// Runs sweeps on a fixed pool of worker threads.
pub struct Sweeper {
    pool: Option<ThreadPool>,
    threads: usize,
    clamp_warnings: AtomicUsize,
}

impl std::fmt::Debug for Sweeper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sweeper")
            .field("threads", &self.threads)
            .field("clamp_warnings", &self.clamp_warnings())
            .finish()
    }
}

impl Sweeper {
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let pool = if threads > 1 {
            Some(
                ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .thread_name(|i| format!("rbgs-{i}"))
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            pool,
            threads,
            clamp_warnings: AtomicUsize::new(0),
        })
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Number of sweeps whose chunk sizes had to be clamped into `[1, n]`.
    pub fn clamp_warnings(&self) -> usize {
        self.clamp_warnings.load(Ordering::Relaxed)
    }

    fn phase(&self, grid: &mut Grid, color: Color, chunk: usize, row_diff: &mut [f64]) {
        let n = grid.n;
        let cells = SharedBuf(grid.values.as_mut_ptr());
        let diffs = SharedBuf(row_diff.as_mut_ptr());
        let next = AtomicUsize::new(1);
        let work = || loop {
            let start = next.fetch_add(chunk, Ordering::Relaxed);
            if start > n {
                break;
            }
            let end = (start + chunk - 1).min(n);
            for i in start..=end {
                // SAFETY: row `i` was claimed exclusively by this worker.
                unsafe {
                    let d = update_row(cells, n, i, color);
                    diffs.get().add(i - 1).write(d);
                }
            }
        };
        match &self.pool {
            Some(pool) => {
                pool.broadcast(|_| work());
            }
            None => work(),
        }
    }

    /// One black phase then one red phase. Returns the sum of absolute cell
    /// changes, accumulated row by row in order.
    pub fn sweep(&self, grid: &mut Grid, chunks: ChunkConfig) -> f64 {
        let n = grid.n;
        let (chunks, clamped) = chunks.clamped(n);
        if clamped {
            self.clamp_warnings.fetch_add(1, Ordering::Relaxed);
        }
        let mut black = vec![0.0; n];
        let mut red = vec![0.0; n];
        self.phase(grid, Color::Black, chunks.black, &mut black);
        self.phase(grid, Color::Red, chunks.red, &mut red);
        black.iter().sum::<f64>() + red.iter().sum::<f64>()
    }

    /// Sweeps until `diff / n^2 < tol` or `max_sweeps` sweeps have run.
    pub fn solve(
        &self,
        grid: &mut Grid,
        chunks: ChunkConfig,
        tol: f64,
        max_sweeps: usize,
    ) -> Result<SolveStats> {
        check_solve_args(tol, max_sweeps)?;
        let cells = (grid.n * grid.n) as f64;
        let mut stats = SolveStats::default();
        while stats.sweeps < max_sweeps {
            stats.diff = self.sweep(grid, chunks);
            stats.sweeps += 1;
            if stats.diff / cells < tol {
                stats.converged = true;
                break;
            }
        }
        Ok(stats)
    }
}

fn check_solve_args(tol: f64, max_sweeps: usize) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_sweeps == 0 {
        return Err(Error::Config("max_sweeps must be at least 1".into()));
    }
    Ok(())
}

/// One sweep on a temporary pool of `threads` workers.
pub fn sweep(grid: &mut Grid, threads: usize, chunks: ChunkConfig) -> Result<f64> {
    Ok(Sweeper::new(threads)?.sweep(grid, chunks))
}

pub fn solve(
    grid: &mut Grid,
    threads: usize,
    chunks: ChunkConfig,
    tol: f64,
    max_sweeps: usize,
) -> Result<SolveStats> {
    Sweeper::new(threads)?.solve(grid, chunks, tol, max_sweeps)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub sweeps: usize,
    pub diff: f64,
    pub converged: bool,
}

/// Optimizer used to tune the chunk sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerChoice {
    Csa { num_opt: usize, max_iter: usize },
    NelderMead { error: f64, max_iter: usize },
}

/// Everything needed to build a chunk-tuning session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningParams {
    pub lower: f64,
    pub upper: f64,
    pub ignore: usize,
    pub optimizer: OptimizerChoice,
    pub seed: u64,
    /// Tune separate black and red chunks.
    pub dual: bool,
}

impl TuningParams {
    pub fn dim(&self) -> usize {
        if self.dual {
            2
        } else {
            1
        }
    }

    /// Integer-point session over `[lower, upper]^dim`.
    pub fn session(&self) -> Result<TuningSession> {
        let dim = self.dim();
        let optimizer: Box<dyn NumericalOptimizer> = match self.optimizer {
            OptimizerChoice::Csa { num_opt, max_iter } => {
                Box::new(Csa::new(dim, num_opt, max_iter, self.seed)?)
            }
            OptimizerChoice::NelderMead { error, max_iter } => {
                Box::new(NelderMead::new(dim, error, max_iter, self.seed)?)
            }
        };
        TuningSession::with_optimizer(self.lower, self.upper, self.ignore, optimizer)
    }
}

/// Result of a tuned solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedSolve {
    pub stats: SolveStats,
    /// Chunks in use when the solve ended (the final solution if tuning
    /// finished).
    pub chunks: ChunkConfig,
    pub tuning_finished: bool,
    /// Sweeps run on the replica grid before the main loop.
    pub tuning_sweeps: usize,
    pub target_execs: u64,
}

fn session_chunks(session: &TuningSession) -> Result<Vec<usize>> {
    let dim = session.domain().dim();
    if !(1..=2).contains(&dim) {
        return Err(Error::Config(format!(
            "chunk tuning needs a 1- or 2-dimensional session, got {dim}"
        )));
    }
    Ok(vec![0; dim])
}

/// Tunes the chunks to completion on a replica of `grid`, then solves
/// `grid` with the chosen chunks.
pub fn solve_tuned_entire(
    sweeper: &Sweeper,
    grid: &mut Grid,
    session: &mut TuningSession,
    tol: f64,
    max_sweeps: usize,
) -> Result<TunedSolve> {
    check_solve_args(tol, max_sweeps)?;
    let mut chunk = session_chunks(session)?;
    let mut replica = grid.clone();
    let mut tuning_sweeps = 0;
    session.entire_exec_runtime(&mut chunk, |c| {
        tuning_sweeps += 1;
        // from_slice cannot fail: the buffer has one or two entries.
        let cfg = ChunkConfig::from_slice(c).unwrap_or(ChunkConfig::single(1));
        sweeper.sweep(&mut replica, cfg)
    })?;
    let chunks = ChunkConfig::from_slice(&chunk)?;
    let stats = sweeper.solve(grid, chunks, tol, max_sweeps)?;
    Ok(TunedSolve {
        stats,
        chunks,
        tuning_finished: session.is_finished(),
        tuning_sweeps,
        target_execs: session.target_execs(),
    })
}

/// Solves `grid` with one tuning step per sweep; once tuning finishes the
/// remaining sweeps use the final chunks with no measurement.
pub fn solve_tuned_single(
    sweeper: &Sweeper,
    grid: &mut Grid,
    session: &mut TuningSession,
    tol: f64,
    max_sweeps: usize,
) -> Result<TunedSolve> {
    check_solve_args(tol, max_sweeps)?;
    let mut chunk = session_chunks(session)?;
    let cells = (grid.n * grid.n) as f64;
    let mut stats = SolveStats::default();
    while stats.sweeps < max_sweeps {
        stats.diff = session.single_exec_runtime(&mut chunk, |c| {
            let cfg = ChunkConfig::from_slice(c).unwrap_or(ChunkConfig::single(1));
            sweeper.sweep(grid, cfg)
        })?;
        stats.sweeps += 1;
        if stats.diff / cells < tol {
            stats.converged = true;
            break;
        }
    }
    Ok(TunedSolve {
        stats,
        chunks: ChunkConfig::from_slice(&chunk)?,
        tuning_finished: session.is_finished(),
        tuning_sweeps: 0,
        target_execs: session.target_execs(),
    })
}
