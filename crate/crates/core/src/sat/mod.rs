//! Incremental SAT sessions over a pluggable backend.

mod cdcl;
mod external;

use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use serde::Serialize;

use crate::formula::{Clause, Cnf, Cube, Lit, Var};

pub use cdcl::Cdcl;
pub use external::{serve, ExternalSolver};

/// Environment variable naming an external solver command.
pub const SOLVER_ENV: &str = "SAFETYSYNTH_SOLVER";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SatError {
    #[error("session was discarded")]
    Consumed,
    #[error("conflict budget exceeded")]
    BudgetExceeded,
    #[error("solver interrupted")]
    Interrupted,
    #[error("external solver: {0}")]
    External(String),
}

/// What a concrete solver has to provide. Cores are subsets of the
/// assumptions passed to the last unsatisfiable `solve`.
pub trait SatBackend: Send {
    fn add_clause(&mut self, lits: &[Lit]) -> Result<(), SatError>;
    fn solve(&mut self, assumptions: &[Lit]) -> Result<bool, SatError>;
    /// Model value after a satisfiable `solve`; unknown variables read false.
    fn value(&self, v: Var) -> bool;
    fn core(&self) -> Vec<Lit>;
    fn conflicts(&self) -> u64;
    fn set_interrupt(&mut self, _flag: Arc<AtomicBool>) {}
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    /// Assignment to the requested variables.
    Sat(Cube),
    /// Sub-cube of the assumptions that is inconsistent with the theory.
    Unsat(Cube),
}

impl SolveOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveOutcome::Sat(_))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SessionStats {
    pub queries: u64,
    pub conflicts: u64,
    pub additions: u64,
}

/// Add-only clause set plus a solver. Discarding a session is final.
pub struct Session {
    backend: Option<Box<dyn SatBackend>>,
    stats: SessionStats,
    #[cfg(debug_assertions)]
    theory: Vec<Vec<Lit>>,
}

impl Session {
    pub fn new(backend: Box<dyn SatBackend>) -> Session {
        Session {
            backend: Some(backend),
            stats: SessionStats::default(),
            #[cfg(debug_assertions)]
            theory: Vec::new(),
        }
    }

    /// Session on the bundled solver with default settings.
    pub fn bundled() -> Session {
        Session::new(Box::new(Cdcl::default()))
    }

    fn backend(&mut self) -> Result<&mut Box<dyn SatBackend>, SatError> {
        self.backend.as_mut().ok_or(SatError::Consumed)
    }

    pub fn add_lits(&mut self, lits: &[Lit]) -> Result<(), SatError> {
        self.backend()?.add_clause(lits)?;
        self.stats.additions += 1;
        #[cfg(debug_assertions)]
        self.theory.push(lits.to_vec());
        Ok(())
    }

    pub fn add_clause(&mut self, c: &Clause) -> Result<(), SatError> {
        self.add_lits(c.lits())
    }

    pub fn add_cnf(&mut self, f: &Cnf) -> Result<(), SatError> {
        for c in f.clauses() {
            self.add_lits(c.lits())?;
        }
        Ok(())
    }

    /// Solves under assumptions.
    pub fn solve(&mut self, assumptions: &[Lit]) -> Result<bool, SatError> {
        let backend = self.backend()?;
        let before = backend.conflicts();
        let result = backend.solve(assumptions);
        let after = backend.conflicts();
        self.stats.queries += 1;
        self.stats.conflicts += after - before;
        let sat = result?;
        #[cfg(debug_assertions)]
        self.check_answer(sat, assumptions);
        Ok(sat)
    }

    #[cfg(debug_assertions)]
    fn check_answer(&self, sat: bool, assumptions: &[Lit]) {
        let b = self.backend.as_ref().expect("open session");
        if sat {
            for c in &self.theory {
                assert!(
                    c.iter().any(|l| l.eval(b.value(l.var()))),
                    "model violates a clause"
                );
            }
            for l in assumptions {
                assert!(l.eval(b.value(l.var())), "model violates an assumption");
            }
        } else {
            for l in b.core() {
                assert!(assumptions.contains(&l), "core literal {l} is not an assumption");
            }
        }
    }

    /// Model value of `v` after a satisfiable solve.
    pub fn value(&self, v: Var) -> bool {
        self.backend.as_ref().map(|b| b.value(v)).unwrap_or(false)
    }

    /// The last model restricted to `vars`.
    pub fn model(&self, vars: &[Var]) -> Cube {
        Cube::new(vars.iter().map(|&v| v.lit(self.value(v)))).expect("distinct variables")
    }

    /// The last core as a cube.
    pub fn core(&self) -> Vec<Lit> {
        self.backend.as_ref().map(|b| b.core()).unwrap_or_default()
    }

    pub fn solve_assume(&mut self, a: &Cube, model_vars: &[Var]) -> Result<SolveOutcome, SatError> {
        if self.solve(a.lits())? {
            Ok(SolveOutcome::Sat(self.model(model_vars)))
        } else {
            Ok(SolveOutcome::Unsat(
                Cube::new(self.core()).expect("core is a sub-cube of the assumptions"),
            ))
        }
    }

    /// Shrinks an unsatisfiable assumption cube to a locally minimal one.
    pub fn shrink_core(&mut self, core: &Cube) -> Result<Cube, SatError> {
        self.shrink_core_with(&[], core)
    }

    /// Like [`Session::shrink_core`], with `fixed` assumed throughout and never
    /// dropped. Each deletion attempt that stays unsatisfiable also shrinks the
    /// candidate to the solver's reported core.
    pub fn shrink_core_with(&mut self, fixed: &[Lit], core: &Cube) -> Result<Cube, SatError> {
        let mut current: Vec<Lit> = core.lits().to_vec();
        let mut k = 0;
        while k < current.len() {
            let mut trial: Vec<Lit> = fixed.to_vec();
            trial.extend(current.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &l)| l));
            if self.solve(&trial)? {
                k += 1;
            } else {
                let reported = self.core();
                let dropped = current[k];
                // Literals before `k` were necessary for a superset, so they
                // are necessary here too and survive in any core.
                current.retain(|l| *l != dropped && reported.contains(l));
            }
        }
        Ok(Cube::new(current).expect("sub-cube"))
    }

    pub fn set_interrupt(&mut self, flag: Arc<AtomicBool>) {
        if let Some(b) = self.backend.as_mut() {
            b.set_interrupt(flag);
        }
    }

    /// Drops the solver; any later use reports [`SatError::Consumed`].
    pub fn discard(&mut self) {
        self.backend = None;
    }

    pub fn is_open(&self) -> bool {
        self.backend.is_some()
    }

    pub fn stats(&self) -> SessionStats {
        self.stats
    }
}

/// Settings for the bundled solver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BundledConfig {
    pub seed: Option<u64>,
    pub conflict_budget: Option<u64>,
}

/// Creates sessions. Cheap to clone and share between threads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolverFactory {
    Bundled(BundledConfig),
    External { command: String },
}

impl Default for SolverFactory {
    fn default() -> Self {
        SolverFactory::Bundled(BundledConfig::default())
    }
}

impl SolverFactory {
    /// The external command in `SAFETYSYNTH_SOLVER` if set, else the bundled solver.
    pub fn from_env() -> SolverFactory {
        match std::env::var(SOLVER_ENV) {
            Ok(cmd) if !cmd.trim().is_empty() => SolverFactory::External { command: cmd },
            _ => SolverFactory::default(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> SolverFactory {
        match self {
            SolverFactory::Bundled(c) => SolverFactory::Bundled(BundledConfig {
                seed: Some(seed),
                ..*c
            }),
            other => other.clone(),
        }
    }

    pub fn session(&self) -> Result<Session, SatError> {
        Ok(match self {
            SolverFactory::Bundled(c) => {
                Session::new(Box::new(Cdcl::new(c.seed, c.conflict_budget)))
            }
            SolverFactory::External { command } => {
                Session::new(Box::new(ExternalSolver::spawn(command)?))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(xs: &[i64]) -> Cube {
        Cube::new(xs.iter().map(|&x| Lit::from_dimacs(x))).unwrap()
    }

    fn session(clauses: &[&[i64]]) -> Session {
        let mut s = Session::bundled();
        s.add_cnf(&Cnf::from_dimacs(clauses)).unwrap();
        s
    }

    #[test]
    fn empty_theory_is_sat() {
        let mut s = Session::bundled();
        assert_eq!(s.solve_assume(&Cube::empty(), &[]).unwrap(), SolveOutcome::Sat(Cube::empty()));
    }

    #[test]
    fn contradiction_is_unsat() {
        let mut s = session(&[&[1], &[-1]]);
        assert!(!s.solve(&[]).unwrap());
    }

    #[test]
    fn unit_propagation_under_assumption() {
        let mut s = session(&[&[1, 2]]);
        let out = s.solve_assume(&cube(&[-1]), &[Var(2)]).unwrap();
        assert_eq!(out, SolveOutcome::Sat(cube(&[2])));
    }

    #[test]
    fn add_clause_examples() {
        let mut s = session(&[&[1]]);
        match s.solve_assume(&cube(&[-1]), &[]).unwrap() {
            SolveOutcome::Unsat(core) => assert!(core.lits().iter().all(|l| *l == Lit::from_dimacs(-1))),
            other => panic!("{other:?}"),
        }
        let mut s = Session::bundled();
        s.add_clause(&Clause::empty()).unwrap();
        assert_eq!(s.solve_assume(&cube(&[1]), &[]).unwrap(), SolveOutcome::Unsat(Cube::empty()));
        assert_eq!(s.solve_assume(&Cube::empty(), &[]).unwrap(), SolveOutcome::Unsat(Cube::empty()));
        let mut once = session(&[&[1, 2]]);
        let mut twice = session(&[&[1, 2], &[1, 2]]);
        for a in [cube(&[-1]), cube(&[-1, -2]), cube(&[2])] {
            assert_eq!(
                once.solve_assume(&a, &[Var(1), Var(2)]).unwrap().is_sat(),
                twice.solve_assume(&a, &[Var(1), Var(2)]).unwrap().is_sat()
            );
        }
    }

    #[test]
    fn solve_assume_examples() {
        let mut s = session(&[&[-1, 2]]);
        assert_eq!(
            s.solve_assume(&cube(&[1]), &[Var(1), Var(2)]).unwrap(),
            SolveOutcome::Sat(cube(&[1, 2]))
        );
        let mut s = session(&[&[-1]]);
        assert_eq!(s.solve_assume(&cube(&[1]), &[]).unwrap(), SolveOutcome::Unsat(cube(&[1])));
        let mut s = session(&[&[-1, -2]]);
        match s.solve_assume(&cube(&[1, 2, 3]), &[]).unwrap() {
            SolveOutcome::Unsat(core) => {
                assert!(!core.contains(Lit::from_dimacs(3)));
                assert!(!s.solve(core.lits()).unwrap());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shrink_core_examples() {
        let mut s = session(&[&[-1]]);
        assert_eq!(s.shrink_core(&cube(&[1, 2])).unwrap(), cube(&[1]));
        let mut s = session(&[&[-1, -2]]);
        assert_eq!(s.shrink_core(&cube(&[1, 2])).unwrap(), cube(&[1, 2]));
        let mut s = session(&[&[-1, -2], &[-3]]);
        let c = s.shrink_core(&cube(&[1, 2, 3])).unwrap();
        assert!(c == cube(&[3]) || c == cube(&[1, 2]), "{c}");
    }

    #[test]
    fn discarded_session_rejects_use() {
        let mut s = Session::bundled();
        s.discard();
        assert_eq!(s.add_lits(&[Lit::from_dimacs(1)]), Err(SatError::Consumed));
        assert_eq!(s.solve(&[]), Err(SatError::Consumed));
    }

    #[test]
    fn stats_count_queries_and_additions() {
        let mut s = session(&[&[1, 2], &[-1]]);
        s.solve(&[]).unwrap();
        s.solve(&[Lit::from_dimacs(2)]).unwrap();
        let st = s.stats();
        assert_eq!(st.queries, 2);
        assert_eq!(st.additions, 2);
    }
}
