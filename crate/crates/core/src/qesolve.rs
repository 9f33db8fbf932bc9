//! ∃∀∃ problems solved by counterexample-guided refinement over two SAT
//! sessions.
//!
//! A problem denotes `∃E. outer ∧ ∀A. ∃C, aux. defs ∧ matrix`, where `C` is the
//! (possibly empty) inner existential block and every remaining variable of
//! `defs`/`matrix` is an auxiliary that is either functionally defined by
//! `defs` or introduced by clausification. Under `defs`, `∃aux. negated` must be
//! equivalent to `¬∃aux. matrix` for every assignment to `E ∪ A ∪ C`; the
//! condition is symmetric, which lets nested checks swap the two.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::formula::{cnf_negate, Cnf, Cube, Lit, Var, VarManager};
use crate::sat::{SatError, Session, SolverFactory};

pub const DEFAULT_ROUNDS: u64 = 1_000_000;

#[derive(Clone, Debug, Default)]
pub struct EAProblem {
    pub exists: Vec<Var>,
    pub forall: Vec<Var>,
    pub inner: Vec<Var>,
    pub outer: Cnf,
    pub defs: Cnf,
    pub matrix: Cnf,
    pub negated: Cnf,
}

impl EAProblem {
    /// `∃exists ∀forall. matrix`, deriving the negation with fresh temporaries.
    /// `matrix` must not contain clausification auxiliaries of its own.
    pub fn new(exists: Vec<Var>, forall: Vec<Var>, matrix: Cnf, vm: &mut VarManager) -> EAProblem {
        let negated = cnf_negate(&matrix, vm);
        EAProblem {
            exists,
            forall,
            matrix,
            negated,
            ..Default::default()
        }
    }

    /// A problem whose matrix and negation are supplied together.
    pub fn from_pair(exists: Vec<Var>, forall: Vec<Var>, matrix: Cnf, negated: Cnf) -> EAProblem {
        EAProblem {
            exists,
            forall,
            matrix,
            negated,
            ..Default::default()
        }
    }

    pub fn with_defs(mut self, defs: Cnf) -> EAProblem {
        self.defs = defs;
        self
    }

    pub fn with_outer(mut self, outer: Cnf) -> EAProblem {
        self.outer = outer;
        self
    }

    pub fn with_inner(mut self, inner: Vec<Var>) -> EAProblem {
        self.inner = inner;
        self
    }

    fn max_var(&self) -> u32 {
        [&self.outer, &self.defs, &self.matrix, &self.negated]
            .iter()
            .map(|f| f.max_var())
            .chain(self.exists.iter().chain(&self.forall).chain(&self.inner).map(|v| v.0))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EaOutcome {
    /// Witness assignment to the existential block.
    Sat(Cube),
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QeError {
    #[error("refinement budget exceeded")]
    BudgetExceeded,
    #[error("cancelled")]
    Cancelled,
    #[error(transparent)]
    Sat(#[from] SatError),
}

#[derive(Clone, Debug)]
pub struct EaConfig {
    pub rounds: u64,
    pub factory: SolverFactory,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for EaConfig {
    fn default() -> Self {
        EaConfig {
            rounds: DEFAULT_ROUNDS,
            factory: SolverFactory::default(),
            cancel: None,
        }
    }
}

impl EaConfig {
    fn cancelled(&self) -> bool {
        self.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EaStats {
    pub rounds: u64,
    pub queries: u64,
}

/// Solves an ∃∀∃ problem.
pub fn solve_ea(p: &EAProblem, cfg: &EaConfig) -> Result<EaOutcome, QeError> {
    let mut stats = EaStats::default();
    solve_ea_stats(p, cfg, &mut stats)
}

/// [`solve_ea`] accumulating round and query counts into `stats`.
pub fn solve_ea_stats(
    p: &EAProblem,
    cfg: &EaConfig,
    stats: &mut EaStats,
) -> Result<EaOutcome, QeError> {
    let mut engine = Engine::new(p, cfg)?;
    let out = engine.run(stats);
    stats.queries += engine.queries();
    out
}

struct Engine<'a> {
    p: &'a EAProblem,
    cfg: &'a EaConfig,
    exists: HashSet<Var>,
    candidates: Session,
    verifier: Option<Session>,
    refuter: Session,
    next_var: u32,
}

impl<'a> Engine<'a> {
    fn new(p: &'a EAProblem, cfg: &'a EaConfig) -> Result<Engine<'a>, QeError> {
        let mut candidates = cfg.factory.session()?;
        candidates.add_cnf(&p.outer)?;
        let verifier = if p.inner.is_empty() {
            let mut s = cfg.factory.session()?;
            s.add_cnf(&p.defs)?;
            s.add_cnf(&p.negated)?;
            Some(s)
        } else {
            None
        };
        let mut refuter = cfg.factory.session()?;
        refuter.add_cnf(&p.defs)?;
        refuter.add_cnf(&p.matrix)?;
        Ok(Engine {
            p,
            cfg,
            exists: p.exists.iter().copied().collect(),
            candidates,
            verifier,
            refuter,
            next_var: p.max_var() + 1,
        })
    }

    fn queries(&self) -> u64 {
        self.candidates.stats().queries
            + self.refuter.stats().queries
            + self.verifier.as_ref().map_or(0, |s| s.stats().queries)
    }

    fn run(&mut self, stats: &mut EaStats) -> Result<EaOutcome, QeError> {
        let mut rounds = 0;
        loop {
            if self.cfg.cancelled() {
                return Err(QeError::Cancelled);
            }
            if rounds >= self.cfg.rounds {
                return Err(QeError::BudgetExceeded);
            }
            rounds += 1;
            stats.rounds += 1;
            if !self.candidates.solve(&[])? {
                return Ok(EaOutcome::Unsat);
            }
            let e = self.candidates.model(&self.p.exists);
            let Some(a) = self.refute(&e, stats)? else {
                return Ok(EaOutcome::Sat(e));
            };
            let core = self.refuter.shrink_core_with(e.lits(), &a)?;
            self.instantiate(&core)?;
        }
    }

    /// A universal assignment under which no inner completion satisfies the
    /// matrix, or `None` if the candidate is a witness.
    fn refute(&mut self, e: &Cube, stats: &mut EaStats) -> Result<Option<Cube>, QeError> {
        if let Some(v) = self.verifier.as_mut() {
            if !v.solve(e.lits())? {
                return Ok(None);
            }
            return Ok(Some(v.model(&self.p.forall)));
        }
        // ∃A ∀C. ¬matrix with the candidate fixed.
        let mut exists = self.p.forall.clone();
        exists.extend(self.p.exists.iter().copied());
        let sub = EAProblem {
            exists,
            forall: self.p.inner.clone(),
            inner: Vec::new(),
            outer: e.to_cnf(),
            defs: self.p.defs.clone(),
            matrix: self.p.negated.clone(),
            negated: self.p.matrix.clone(),
        };
        match solve_ea_stats(&sub, self.cfg, stats)? {
            EaOutcome::Unsat => Ok(None),
            EaOutcome::Sat(w) => {
                let forall: HashSet<Var> = self.p.forall.iter().copied().collect();
                Ok(Some(w.restrict(|v| forall.contains(&v))))
            }
        }
    }

    /// Adds `defs ∧ matrix` with the universal literals of `a` substituted and
    /// every non-existential variable renamed apart.
    fn instantiate(&mut self, a: &Cube) -> Result<(), QeError> {
        let fixed: HashMap<Var, bool> = a.lits().iter().map(|l| (l.var(), l.sign())).collect();
        let mut fresh: HashMap<Var, Var> = HashMap::new();
        for f in [&self.p.defs, &self.p.matrix] {
            'clauses: for c in f.clauses() {
                let mut lits = Vec::with_capacity(c.len());
                for &l in c.lits() {
                    let v = l.var();
                    if let Some(&b) = fixed.get(&v) {
                        if l.eval(b) {
                            continue 'clauses;
                        }
                        continue;
                    }
                    let target = if self.exists.contains(&v) {
                        v
                    } else {
                        *fresh.entry(v).or_insert_with(|| {
                            self.next_var += 1;
                            Var(self.next_var - 1)
                        })
                    };
                    lits.push(Lit::new(target, l.sign()));
                }
                self.candidates.add_lits(&lits)?;
            }
        }
        Ok(())
    }
}

/// QDIMACS rendering of a problem for external QBF solvers.
pub fn write_qdimacs(p: &EAProblem) -> String {
    let mut out = String::new();
    let mut seen: HashSet<Var> = HashSet::new();
    let mut outer_block: Vec<Var> = p.exists.clone();
    seen.extend(outer_block.iter().copied());
    for v in p.outer.vars() {
        if seen.insert(v) {
            outer_block.push(v);
        }
    }
    let forall: Vec<Var> = p.forall.iter().copied().filter(|v| seen.insert(*v)).collect();
    let mut inner_block: Vec<Var> = p.inner.iter().copied().filter(|v| seen.insert(*v)).collect();
    for f in [&p.defs, &p.matrix] {
        for v in f.vars() {
            if seen.insert(v) {
                inner_block.push(v);
            }
        }
    }
    let clauses = p.outer.len() + p.defs.len() + p.matrix.len();
    let _ = writeln!(out, "p cnf {} {}", p.max_var(), clauses);
    for (tag, block) in [("e", &outer_block), ("a", &forall), ("e", &inner_block)] {
        if block.is_empty() {
            continue;
        }
        out.push_str(tag);
        for v in block {
            let _ = write!(out, " {}", v.0);
        }
        out.push_str(" 0\n");
    }
    for f in [&p.outer, &p.defs, &p.matrix] {
        for c in f.clauses() {
            for l in c.lits() {
                let _ = write!(out, "{} ", l.to_dimacs());
            }
            out.push_str("0\n");
        }
    }
    out
}
