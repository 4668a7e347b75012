//! Runtime parameter auto-tuning for shared-memory algorithms.
//!
//! The crate provides:
//!
//! * a staged optimizer contract ([`NumericalOptimizer`]) where each call
//!   takes the previous candidate's cost and returns the next candidate,
//! * two optimizers implementing it: Coupled Simulated Annealing ([`Csa`])
//!   and Nelder–Mead ([`NelderMead`]),
//! * [`TuningSession`], which measures the execution time of a code section
//!   (or accepts a caller-supplied cost) and drives an optimizer with it,
//! * a parallel red-black Gauss–Seidel solver ([`rbgs`]) whose loop
//!   scheduling chunk size can be tuned while it runs.
//!
//! ```
//! use autotune::TuningSession;
//!
//! // Tune one integer parameter in [1, 9]: CSA with 4 annealers, 10 iterations.
//! let mut session = TuningSession::new(1.0, 9.0, 0, 1, 4, 10, 1).unwrap();
//! let mut chunk = [0i32];
//! session
//!     .entire_exec(&mut chunk, |c| ((c[0] - 3) as f64).powi(2))
//!     .unwrap();
//! assert_eq!(chunk, [3]);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod csa;
pub mod domain;
pub mod error;
pub mod functions;
pub mod nelder_mead;
pub mod optimizer;
pub mod rbgs;
pub mod session;

pub use csa::Csa;
pub use domain::{CandidatePoint, SearchDomain};
pub use error::{Error, ExecError, Result};
pub use nelder_mead::NelderMead;
pub use optimizer::NumericalOptimizer;
pub use session::{
    Clock, ManualClock, MonotonicClock, PointKind, PointValue, TraceRecord, TuningSession,
};
