//! Learning-based computation of winning regions in CNF: a QBF-style variant
//! driven by the ∃∀ engine and a variant built on two competing incremental
//! SAT sessions.

pub mod hst;
mod learn_qbf;
mod learn_sat;

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::formula::{Clause, Cnf, Cube};
use crate::game::SafetySpec;
use crate::qesolve::{EaConfig, QeError, DEFAULT_ROUNDS};
use crate::sat::{SatError, SolverFactory};

pub use learn_qbf::{all_min_generalizations, learn_qbf};
pub use learn_sat::learn_sat;
pub(crate) use learn_sat::SatLearner;

/// Progress notifications.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LearnEvent {
    ClauseAdded { len: usize, total: usize },
    Restart,
    Verdict { realizable: bool },
}

pub type Observer = Arc<dyn Fn(&LearnEvent) + Send + Sync>;

#[derive(Clone)]
pub struct LearnOptions {
    /// Lazy `F̂` in the SAT variant; `G = F ∧ ¬xg` during generalization.
    pub optimize: bool,
    pub use_rg: bool,
    pub use_rc: bool,
    /// Add every minimal generalization of each counterexample.
    pub all_generalizations: bool,
    /// Compress `F` after this many clause additions; 0 disables.
    pub compress_every: usize,
    pub hst_node_limit: usize,
    pub factory: SolverFactory,
    pub time_limit: Option<Duration>,
    pub max_iterations: Option<u64>,
    pub cancel: Option<Arc<AtomicBool>>,
    pub observer: Option<Observer>,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            optimize: true,
            use_rg: false,
            use_rc: false,
            all_generalizations: false,
            compress_every: 50,
            hst_node_limit: 64,
            factory: SolverFactory::default(),
            time_limit: None,
            max_iterations: None,
            cancel: None,
            observer: None,
        }
    }
}

impl fmt::Debug for LearnOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LearnOptions")
            .field("optimize", &self.optimize)
            .field("use_rg", &self.use_rg)
            .field("use_rc", &self.use_rc)
            .field("all_generalizations", &self.all_generalizations)
            .field("compress_every", &self.compress_every)
            .field("factory", &self.factory)
            .field("time_limit", &self.time_limit)
            .field("max_iterations", &self.max_iterations)
            .finish_non_exhaustive()
    }
}

impl LearnOptions {
    pub(crate) fn notify(&self, e: LearnEvent) {
        if let Some(o) = &self.observer {
            o(&e);
        }
    }

    pub(crate) fn ea_config(&self) -> EaConfig {
        EaConfig {
            rounds: DEFAULT_ROUNDS,
            factory: self.factory.clone(),
            cancel: self.cancel.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LearnStats {
    pub iterations: u64,
    pub counterexamples: u64,
    pub clauses_learned: u64,
    pub u_clauses: u64,
    pub restarts: u64,
    pub solver_queries: u64,
    pub compressions: u64,
    /// Sum of the sizes of all learned cubes.
    pub cube_literals: u64,
    pub final_clauses: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Realizable(Cnf),
    Unrealizable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthesisVerdict {
    pub status: Status,
    pub stats: LearnStats,
}

impl SynthesisVerdict {
    pub fn is_realizable(&self) -> bool {
        matches!(self.status, Status::Realizable(_))
    }

    pub fn region(&self) -> Option<&Cnf> {
        match &self.status {
            Status::Realizable(f) => Some(f),
            Status::Unrealizable => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("resource budget exhausted")]
    Budget,
    #[error("cancelled")]
    Cancelled,
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error("quantified query failed: {0}")]
    Qe(QeError),
}

impl From<QeError> for LearnError {
    fn from(e: QeError) -> Self {
        match e {
            QeError::BudgetExceeded => LearnError::Budget,
            QeError::Cancelled => LearnError::Cancelled,
            QeError::Sat(s) => LearnError::Sat(s),
        }
    }
}

/// A counterexample minterm with the input that witnessed it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub state: Cube,
    pub input: Cube,
}

/// Mutable state of one learning run.
#[derive(Clone, Debug, Default)]
pub struct LearnState {
    /// Over-approximation of the winning region.
    pub f: Cnf,
    /// Lazily updated copy of `F`; `F ⇒ F̂`.
    pub f_hat: Cnf,
    /// Excluded state-input pairs.
    pub u: Cnf,
    pub precise: bool,
    pub cex_db: Vec<Counterexample>,
    pub stats: LearnStats,
}

impl LearnState {
    pub fn new(spec: &SafetySpec) -> LearnState {
        LearnState {
            f: spec.safe.clone(),
            f_hat: spec.safe.clone(),
            u: Cnf::new(),
            precise: true,
            cex_db: Vec::new(),
            stats: LearnStats::default(),
        }
    }
}

/// Deadline, iteration cap and cancellation, checked at loop heads.
#[derive(Clone, Debug)]
pub(crate) struct Limits {
    deadline: Option<Instant>,
    max_iterations: Option<u64>,
    cancel: Option<Arc<AtomicBool>>,
}

impl Limits {
    pub(crate) fn new(opts: &LearnOptions) -> Limits {
        Limits {
            deadline: opts.time_limit.map(|d| Instant::now() + d),
            max_iterations: opts.max_iterations,
            cancel: opts.cancel.clone(),
        }
    }

    pub(crate) fn check(&self, iterations: u64) -> Result<(), LearnError> {
        if self.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Err(LearnError::Cancelled);
        }
        if self.max_iterations.is_some_and(|m| iterations >= m) {
            return Err(LearnError::Budget);
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(LearnError::Budget);
        }
        Ok(())
    }
}

/// Whether a cube contains the all-zero initial state.
pub(crate) fn touches_initial(cube: &Cube) -> bool {
    cube.lits().iter().all(|l| !l.sign())
}

/// Whether the initial state lies in `P`.
pub(crate) fn initial_is_safe(spec: &SafetySpec) -> bool {
    spec.safe.eval(|_| false)
}

/// Cross-thread hooks used by the parallel driver. The defaults describe a
/// lone worker.
pub(crate) trait Hooks {
    /// Clauses learned elsewhere, U-clauses of the current epoch, and whether
    /// a restart was requested.
    fn pull(&mut self) -> Pulled {
        Pulled::default()
    }
    fn clause_learned(&mut self, _c: &Clause) {}
    fn u_learned(&mut self, _c: &Clause) {}
    fn counterexample(&mut self, _cex: &Counterexample) {}
    /// The loop query went Unsat with an imprecise `F̂`. A returned snapshot
    /// becomes the new `F̂`; `None` means `F̂ := F`.
    fn restarting(&mut self) -> Option<Vec<Clause>> {
        None
    }
}

#[derive(Debug, Default)]
pub(crate) struct Pulled {
    pub clauses: Vec<Clause>,
    pub u_clauses: Vec<Clause>,
    /// Restart with `F̂` set to the safe set plus these clauses.
    pub restart: Option<Vec<Clause>>,
}

pub(crate) struct Lone;

impl Hooks for Lone {}
