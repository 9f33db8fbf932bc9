use crate::formula::{cnf_negate, compress_with, negate_cube, prime, Cnf, Cube, VarManager};
use crate::game::SafetySpec;
use crate::qesolve::{solve_ea_stats, EAProblem, EaConfig, EaOutcome, EaStats};
use crate::reachopt::{rc_counterexample_query, rg_generalization_query};

use super::hst::{all_minimal, drop_literals};
use super::{
    initial_is_safe, touches_initial, Counterexample, LearnError, LearnEvent, LearnOptions, LearnState, Limits,
    Status, SynthesisVerdict,
};

struct QbfLearner<'a> {
    spec: &'a SafetySpec,
    opts: &'a LearnOptions,
    cfg: EaConfig,
    vm: VarManager,
    ea: EaStats,
}

impl QbfLearner<'_> {
    fn solve(&mut self, p: &EAProblem) -> Result<EaOutcome, LearnError> {
        Ok(solve_ea_stats(p, &self.cfg, &mut self.ea)?)
    }

    /// `∃x, i ∀c ∃x'. F ∧ T ∧ ¬F'`, or its reachability-restricted form.
    fn counterexample(&mut self, f: &Cnf) -> Result<Option<Counterexample>, LearnError> {
        let p = if self.opts.use_rc {
            rc_counterexample_query(f, self.spec, &mut self.vm).problem
        } else {
            let next = prime(f, &self.spec.vars).expect("state cnf");
            let leave = cnf_negate(&next, &mut self.vm);
            let mut exists = self.spec.state.clone();
            exists.extend(self.spec.inputs.iter().copied());
            EAProblem::from_pair(exists, self.spec.controls.clone(), leave, next)
                .with_defs(self.spec.transition())
                .with_outer(f.clone())
        };
        Ok(match self.solve(&p)? {
            EaOutcome::Unsat => None,
            EaOutcome::Sat(w) => Some(Counterexample {
                state: w.restrict(|v| self.spec.is_state(v)),
                input: w.restrict(|v| self.spec.is_input(v)),
            }),
        })
    }

    /// Whether no state of `xt ∧ G` can be kept inside `G` by the protagonist
    /// (restricted to possibly reachable states under RG).
    fn losing(&mut self, g: &Cnf, xt: &Cube) -> Result<bool, LearnError> {
        let p = if self.opts.use_rg {
            rg_generalization_query(g, xt, self.spec, &mut self.vm).problem
        } else {
            let next = prime(g, &self.spec.vars).expect("state cnf");
            let leave = cnf_negate(&next, &mut self.vm);
            let mut outer = g.clone();
            outer.extend(&xt.to_cnf());
            EAProblem::from_pair(self.spec.state.clone(), self.spec.inputs.clone(), next, leave)
                .with_inner(self.spec.controls.clone())
                .with_defs(self.spec.transition())
                .with_outer(outer)
        };
        Ok(matches!(self.solve(&p)?, EaOutcome::Unsat))
    }

    /// Drops literals of `x` in ascending variable order.
    fn generalize(&mut self, f: &Cnf, x: &Cube) -> Result<Cube, LearnError> {
        let mut xg = x.clone();
        for &l in x.lits() {
            let xt = xg.without(l);
            let mut g = f.clone();
            if self.opts.optimize {
                g.push(negate_cube(&xg));
            }
            if self.losing(&g, &xt)? {
                xg = xt;
            }
        }
        Ok(xg)
    }

    fn all_generalizations(&mut self, f: &Cnf, x: &Cube, first: Cube) -> Result<Vec<Cube>, LearnError> {
        let limit = self.opts.hst_node_limit;
        let cell = std::cell::RefCell::new(self);
        all_minimal(
            x,
            Some(first),
            limit,
            |c| cell.borrow_mut().losing(f, c),
            |c| drop_literals(c, |t| cell.borrow_mut().losing(f, t)),
        )
    }
}

/// Learns a winning region with quantified queries: counterexample states
/// from the antagonist's one-step escape, generalized by dropping literals.
pub fn learn_qbf(spec: &SafetySpec, opts: &LearnOptions) -> Result<SynthesisVerdict, LearnError> {
    let mut state = LearnState::new(spec);
    let finish = |state: &mut LearnState, ea: &EaStats, status: Status| {
        state.stats.solver_queries = ea.queries;
        state.stats.final_clauses = match &status {
            Status::Realizable(f) => f.len(),
            Status::Unrealizable => state.f.len(),
        };
        opts.notify(LearnEvent::Verdict {
            realizable: matches!(status, Status::Realizable(_)),
        });
        SynthesisVerdict {
            status,
            stats: state.stats.clone(),
        }
    };
    let mut learner = QbfLearner {
        spec,
        opts,
        cfg: opts.ea_config(),
        vm: spec.vars.clone(),
        ea: EaStats::default(),
    };
    if !initial_is_safe(spec) {
        return Ok(finish(&mut state, &learner.ea, Status::Unrealizable));
    }
    let limits = Limits::new(opts);
    let mut since_compress = 0;
    loop {
        limits.check(state.stats.iterations)?;
        state.stats.iterations += 1;
        let Some(cex) = learner.counterexample(&state.f)? else {
            let f = state.f.without_subsumed();
            return Ok(finish(&mut state, &learner.ea, Status::Realizable(f)));
        };
        state.stats.counterexamples += 1;
        let xg = learner.generalize(&state.f, &cex.state)?;
        let cubes = if opts.all_generalizations {
            let f = state.f.clone();
            learner.all_generalizations(&f, &cex.state, xg)?
        } else {
            vec![xg]
        };
        state.cex_db.push(cex);
        for g in cubes {
            if touches_initial(&g) {
                return Ok(finish(&mut state, &learner.ea, Status::Unrealizable));
            }
            state.f.push(negate_cube(&g));
            state.stats.clauses_learned += 1;
            state.stats.cube_literals += g.len() as u64;
            opts.notify(LearnEvent::ClauseAdded {
                len: g.len(),
                total: state.f.len(),
            });
            since_compress += 1;
            if opts.compress_every > 0 && since_compress >= opts.compress_every {
                since_compress = 0;
                state.f = compress_with(&state.f, state.f.len(), &opts.factory)?;
                state.stats.compressions += 1;
            }
        }
        state.f_hat = state.f.clone();
    }
}

/// Every locally minimal sub-cube of `cex` whose states (within `F`) the
/// antagonist can force out of `F`, up to the hitting-set tree node limit.
pub fn all_min_generalizations(
    spec: &SafetySpec,
    f: &Cnf,
    cex: &Cube,
    opts: &LearnOptions,
) -> Result<Vec<Cube>, LearnError> {
    let mut learner = QbfLearner {
        spec,
        opts,
        cfg: opts.ea_config(),
        vm: spec.vars.clone(),
        ea: EaStats::default(),
    };
    let limit = opts.hst_node_limit;
    let cell = std::cell::RefCell::new(&mut learner);
    all_minimal(
        cex,
        None,
        limit,
        |c| cell.borrow_mut().losing(f, c),
        |c| drop_literals(c, |t| cell.borrow_mut().losing(f, t)),
    )
}
