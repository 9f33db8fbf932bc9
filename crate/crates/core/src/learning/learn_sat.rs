use std::collections::HashSet;

use crate::formula::{cnf_negate, compress_with, negate_cube, prime, Clause, Cnf, Cube, Lit, VarGroup, VarManager};
use crate::game::SafetySpec;
use crate::reachopt::ReachEncoding;
use crate::sat::{Session, SolverFactory};

use super::hst::{all_minimal, drop_literals};
use super::{
    initial_is_safe, touches_initial, Counterexample, Hooks, LearnError, LearnEvent, LearnOptions, LearnState,
    Limits, Lone, Status, SynthesisVerdict,
};

/// Learns a winning region with two SAT sessions: `s∃` looks for a
/// state-input pair from which some control leaves `F̂`, `s∀` for a control
/// keeping the pair inside `F`.
pub fn learn_sat(spec: &SafetySpec, opts: &LearnOptions) -> Result<SynthesisVerdict, LearnError> {
    SatLearner::new(spec, opts, opts.factory.clone())?.run(&mut Lone)
}

/// Session for the reachability-strengthened generalization: `F(x) ∧ T ∧
/// F(x')` plus the predecessor disjunct over `F(x*)`.
struct RgSession {
    s: Session,
    enc: ReachEncoding,
}

pub(crate) struct SatLearner<'a> {
    spec: &'a SafetySpec,
    opts: &'a LearnOptions,
    factory: SolverFactory,
    vm: VarManager,
    pub(crate) state: LearnState,
    limits: Limits,
    trans: Cnf,
    s_all: Session,
    s_ex: Session,
    rc: Option<ReachEncoding>,
    rg: Option<RgSession>,
    known: HashSet<Clause>,
    since_compress: usize,
    retired_queries: u64,
}

impl<'a> SatLearner<'a> {
    pub(crate) fn new(
        spec: &'a SafetySpec,
        opts: &'a LearnOptions,
        factory: SolverFactory,
    ) -> Result<SatLearner<'a>, LearnError> {
        let mut vm = spec.vars.clone();
        let state = LearnState::new(spec);
        let trans = spec.transition();
        let mut s_all = factory.session()?;
        s_all.add_cnf(&trans)?;
        s_all.add_cnf(&state.f)?;
        s_all.add_cnf(&prime(&state.f, &spec.vars).expect("safe set over state variables"))?;
        let rg = if opts.use_rg {
            let mut s = factory.session()?;
            s.add_cnf(&trans)?;
            s.add_cnf(&state.f)?;
            s.add_cnf(&prime(&state.f, &spec.vars).expect("state cnf"))?;
            let enc = ReachEncoding::new(spec, &state.f, false, &mut vm);
            s.add_cnf(&enc.cnf)?;
            Some(RgSession { s, enc })
        } else {
            None
        };
        let known = state.f.clauses().iter().cloned().collect();
        let mut learner = SatLearner {
            spec,
            opts,
            factory: factory.clone(),
            vm,
            state,
            limits: Limits::new(opts),
            trans,
            s_all,
            s_ex: factory.session()?,
            rc: None,
            rg,
            known,
            since_compress: 0,
            retired_queries: 0,
        };
        learner.open_exists()?;
        Ok(learner)
    }

    /// Fresh `s∃` over `F ∧ U ∧ T ∧ ¬F̂'`.
    fn open_exists(&mut self) -> Result<(), LearnError> {
        self.retired_queries += self.s_ex.stats().queries;
        let mut s = self.factory.session()?;
        s.add_cnf(&self.trans)?;
        s.add_cnf(&self.state.f)?;
        s.add_cnf(&self.state.u)?;
        let next = prime(&self.state.f_hat, &self.spec.vars).expect("state cnf");
        s.add_cnf(&cnf_negate(&next, &mut self.vm))?;
        self.rc = None;
        if self.opts.use_rc {
            let enc = ReachEncoding::new(self.spec, &self.state.f, true, &mut self.vm);
            s.add_cnf(&enc.cnf)?;
            self.rc = Some(enc);
        }
        self.s_ex = s;
        Ok(())
    }

    /// `F̂ := snapshot` (or `F`), `U := true`, new `s∃`.
    fn restart(&mut self, snapshot: Option<Vec<Clause>>) -> Result<(), LearnError> {
        match snapshot {
            None => {
                self.state.f_hat = self.state.f.clone();
                self.state.precise = true;
            }
            Some(clauses) => {
                for c in &clauses {
                    self.add_f_clause(c.clone())?;
                }
                let mut f_hat = self.spec.safe.clone();
                f_hat.extend(&Cnf::from_clauses(clauses));
                let hat: HashSet<&Clause> = f_hat.clauses().iter().collect();
                self.state.precise = self.state.f.clauses().iter().all(|c| hat.contains(c));
                self.state.f_hat = f_hat;
            }
        }
        self.state.u = Cnf::new();
        self.state.stats.restarts += 1;
        self.opts.notify(LearnEvent::Restart);
        self.open_exists()
    }

    /// Adds a clause to `F` and to every session that mirrors it. Returns
    /// false for clauses already present.
    fn add_f_clause(&mut self, c: Clause) -> Result<bool, LearnError> {
        if !self.known.insert(c.clone()) {
            return Ok(false);
        }
        let one = Cnf::from_clauses([c.clone()]);
        let primed = prime(&one, &self.spec.vars).expect("state clause");
        self.s_all.add_cnf(&one)?;
        self.s_all.add_cnf(&primed)?;
        self.s_ex.add_cnf(&one)?;
        if let Some(enc) = &self.rc {
            self.s_ex.add_cnf(&enc.region_clauses(self.spec, &one))?;
        }
        if let Some(rg) = &mut self.rg {
            rg.s.add_cnf(&one)?;
            rg.s.add_cnf(&primed)?;
            rg.s.add_cnf(&rg.enc.region_clauses(self.spec, &one))?;
        }
        self.state.f.push(c);
        Ok(true)
    }

    fn maybe_compress(&mut self) -> Result<(), LearnError> {
        self.since_compress += 1;
        if self.opts.compress_every == 0 || self.since_compress < self.opts.compress_every {
            return Ok(());
        }
        self.since_compress = 0;
        self.state.f = compress_with(&self.state.f, self.state.f.len(), &self.factory)?;
        self.state.stats.compressions += 1;
        Ok(())
    }

    fn queries(&self) -> u64 {
        self.retired_queries
            + self.s_ex.stats().queries
            + self.s_all.stats().queries
            + self.rg.as_ref().map_or(0, |r| r.s.stats().queries)
    }

    fn finish(&mut self, status: Status) -> SynthesisVerdict {
        self.state.stats.solver_queries = self.queries();
        self.state.stats.final_clauses = match &status {
            Status::Realizable(f) => f.len(),
            Status::Unrealizable => self.state.f.len(),
        };
        self.opts.notify(LearnEvent::Verdict {
            realizable: matches!(status, Status::Realizable(_)),
        });
        SynthesisVerdict {
            status,
            stats: self.state.stats.clone(),
        }
    }

    pub(crate) fn run(&mut self, hooks: &mut dyn Hooks) -> Result<SynthesisVerdict, LearnError> {
        if !initial_is_safe(self.spec) {
            return Ok(self.finish(Status::Unrealizable));
        }
        let state_vars = self.spec.state.clone();
        let input_vars = self.spec.inputs.clone();
        let control_vars = self.spec.controls.clone();
        loop {
            self.limits.check(self.state.stats.iterations)?;
            self.state.stats.iterations += 1;

            let pulled = hooks.pull();
            let mut changed = false;
            for c in pulled.clauses {
                changed |= self.add_f_clause(c)?;
            }
            if let Some(snapshot) = pulled.restart {
                self.restart(Some(snapshot))?;
            } else if changed {
                if self.opts.optimize {
                    self.state.precise = false;
                } else {
                    self.restart(None)?;
                }
            }
            for c in pulled.u_clauses {
                self.s_ex.add_clause(&c)?;
                self.state.u.push(c);
            }

            if !self.s_ex.solve(&[])? {
                if self.state.precise {
                    let f = self.state.f.without_subsumed();
                    return Ok(self.finish(Status::Realizable(f)));
                }
                let snapshot = hooks.restarting();
                self.restart(snapshot)?;
                continue;
            }
            let x = self.s_ex.model(&state_vars);
            let i = self.s_ex.model(&input_vars);
            let cex = Counterexample { state: x.clone(), input: i.clone() };
            hooks.counterexample(&cex);
            self.state.cex_db.push(cex);
            self.state.stats.counterexamples += 1;

            let mut assume: Vec<Lit> = x.lits().to_vec();
            assume.extend_from_slice(i.lits());
            if self.s_all.solve(&assume)? {
                let c = self.s_all.model(&control_vars);
                // state literals first, with the input held fixed: a U-clause
                // over few state literals covers many more pairs
                let mut fixed: Vec<Lit> = c.lits().to_vec();
                fixed.extend_from_slice(i.lits());
                let xs = self.s_ex.shrink_core_with(&fixed, &x)?;
                fixed.truncate(c.len());
                fixed.extend_from_slice(xs.lits());
                let is = self.s_ex.shrink_core_with(&fixed, &i)?;
                let core = xs.conjoin(&is).expect("disjoint variables");
                let u = negate_cube(&core);
                self.s_ex.add_clause(&u)?;
                hooks.u_learned(&u);
                self.state.u.push(u);
                self.state.stats.u_clauses += 1;
                continue;
            }

            let mut xg = self.s_all.shrink_core_with(i.lits(), &x)?;
            if self.rg.is_some() {
                xg = self.rg_drop(&xg, &i)?;
            }
            let mut cubes = vec![xg.clone()];
            if self.opts.all_generalizations {
                cubes = self.all_generalizations(&x, &i, xg)?;
            }
            for g in cubes {
                if touches_initial(&g) {
                    return Ok(self.finish(Status::Unrealizable));
                }
                let clause = negate_cube(&g);
                if self.add_f_clause(clause.clone())? {
                    hooks.clause_learned(&clause);
                    self.state.stats.clauses_learned += 1;
                    self.state.stats.cube_literals += g.len() as u64;
                    self.opts.notify(LearnEvent::ClauseAdded {
                        len: clause.len(),
                        total: self.state.f.len(),
                    });
                    self.maybe_compress()?;
                }
            }
            if self.opts.optimize {
                self.state.precise = false;
            } else {
                self.restart(None)?;
            }
        }
    }

    /// Further literal dropping: a candidate `xt` may be removed if no state of
    /// `xt ∧ G` that is initial or has a predecessor in `G ∧ ¬xt` can answer
    /// input `i` by staying in `G`.
    fn rg_drop(&mut self, xg: &Cube, i: &Cube) -> Result<Cube, LearnError> {
        let spec = self.spec;
        let optimize = self.opts.optimize;
        let vm = &mut self.vm;
        let rg = self.rg.as_mut().expect("rg session");
        let mut current = xg.clone();
        for &l in xg.lits() {
            let xt = current.without(l);
            let act = vm.fresh(VarGroup::Temp);
            let prev_cube = Cube::new(xt.lits().iter().map(|l| {
                let k = spec.state.iter().position(|&v| v == l.var()).expect("state literal");
                Lit::new(rg.enc.prev.state[k], l.sign())
            }))
            .expect("sub-cube");
            let mut pred: Vec<Lit> = vec![act.neg(), rg.enc.q.pos()];
            pred.extend(negate_cube(&prev_cube).lits().iter().copied());
            rg.s.add_lits(&pred)?;
            if optimize {
                let block = negate_cube(&current);
                let mut now: Vec<Lit> = vec![act.neg()];
                now.extend(block.lits().iter().copied());
                rg.s.add_lits(&now)?;
                let next = prime(&Cnf::from_clauses([block]), &spec.vars).expect("state clause");
                let mut later: Vec<Lit> = vec![act.neg()];
                later.extend(next.clauses()[0].lits().iter().copied());
                rg.s.add_lits(&later)?;
            }
            let mut assume = vec![act.pos()];
            assume.extend_from_slice(xt.lits());
            assume.extend_from_slice(i.lits());
            let sat = rg.s.solve(&assume)?;
            rg.s.add_lits(&[act.neg()])?;
            if !sat {
                current = xt;
            }
        }
        Ok(current)
    }

    /// Every minimal sub-cube of `x` from which input `i` forces leaving `F`.
    fn all_generalizations(&mut self, x: &Cube, i: &Cube, first: Cube) -> Result<Vec<Cube>, LearnError> {
        let limit = self.opts.hst_node_limit;
        let s = &mut self.s_all;
        let fixed: Vec<Lit> = i.lits().to_vec();
        let losing = |c: &Cube, s: &mut Session| -> Result<bool, LearnError> {
            let mut a = fixed.clone();
            a.extend_from_slice(c.lits());
            Ok(!s.solve(&a)?)
        };
        let cell = std::cell::RefCell::new(s);
        all_minimal(
            x,
            Some(first),
            limit,
            |c| losing(c, &mut cell.borrow_mut()),
            |c| drop_literals(c, |t| losing(t, &mut cell.borrow_mut())),
        )
    }
}
