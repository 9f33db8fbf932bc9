//! One-step reachability strengthenings of the learning queries: a state only
//! matters if it is initial or has a predecessor in a given region.

use std::collections::HashMap;

use crate::formula::{cnf_negate, negate_cube, prime, Cnf, Cube, Lit, Var, VarGroup, VarManager};
use crate::game::{QuerySkeleton, SafetySpec, StepVars};
use crate::qesolve::EAProblem;

/// Previous-step copies `x*, i*, c*` of the spec's variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrevBlock {
    pub state: Vec<Var>,
    pub inputs: Vec<Var>,
    pub controls: Vec<Var>,
}

impl PrevBlock {
    pub fn new(spec: &SafetySpec, vm: &mut VarManager) -> PrevBlock {
        PrevBlock {
            state: spec.state.iter().map(|&v| vm.prev(v)).collect(),
            inputs: spec.inputs.iter().map(|&v| vm.prev(v)).collect(),
            controls: spec.controls.iter().map(|&v| vm.prev(v)).collect(),
        }
    }

    /// A transition copy from this block into the current state.
    pub fn step(&self, spec: &SafetySpec, vm: &mut VarManager) -> StepVars {
        StepVars {
            state: self.state.clone(),
            inputs: self.inputs.clone(),
            controls: self.controls.clone(),
            next: spec.state.clone(),
            gates: vm.fresh_n(VarGroup::Temp, spec.gates.len()),
        }
    }

    pub fn map_cnf(&self, spec: &SafetySpec, f: &Cnf) -> Cnf {
        let map: HashMap<Var, Var> = spec.state.iter().copied().zip(self.state.iter().copied()).collect();
        crate::formula::rename(f, |v| map.get(&v).copied().unwrap_or(v))
    }
}

/// The reachability disjunct as CNF, selected by a fresh literal `q`:
/// `q` forces `I(x)`; `¬q` forces `R(x*) ∧ T(x*, i*, c*, x)` and, with
/// `distinct`, `x* ≠ x`. Returns the encoding and `q`.
#[derive(Clone, Debug)]
pub struct ReachEncoding {
    pub cnf: Cnf,
    pub q: Var,
    pub prev: PrevBlock,
}

impl ReachEncoding {
    pub fn new(spec: &SafetySpec, region: &Cnf, distinct: bool, vm: &mut VarManager) -> ReachEncoding {
        let prev = PrevBlock::new(spec, vm);
        let q = vm.fresh(VarGroup::Temp);
        let step = prev.step(spec, vm);
        let mut cnf = Cnf::new();
        for &x in &spec.state {
            cnf.add([q.neg(), x.neg()]);
        }
        cnf.extend(&spec.gate_clauses(&step));
        cnf.extend(&spec.link_clauses(&step, Some(q.pos())));
        if distinct {
            cnf.extend(&disequality(&spec.state, &prev.state, Some(q.pos()), vm));
        }
        let mut enc = ReachEncoding { cnf, q, prev };
        let guarded = enc.region_clauses(spec, region);
        enc.cnf.extend(&guarded);
        enc
    }

    /// `q ∨ C(x*)` for every clause of a region over `x`.
    pub fn region_clauses(&self, spec: &SafetySpec, region: &Cnf) -> Cnf {
        let mut out = Cnf::new();
        for c in self.prev.map_cnf(spec, region).clauses() {
            out.add(std::iter::once(self.q.pos()).chain(c.lits().iter().copied()));
        }
        out
    }
}

/// `a ≠ b` bitwise through one selector per bit, weakened by `guard`.
pub fn disequality(a: &[Var], b: &[Var], guard: Option<Lit>, vm: &mut VarManager) -> Cnf {
    let mut f = Cnf::new();
    let mut any: Vec<Lit> = guard.into_iter().collect();
    for (&x, &y) in a.iter().zip(b) {
        let d = vm.fresh(VarGroup::Temp);
        f.add([d.neg(), x.pos(), y.pos()]);
        f.add([d.neg(), x.neg(), y.neg()]);
        any.push(d.pos());
    }
    f.add(any);
    f
}

/// `(I(x) ∨ G(x*) ∧ ¬xg(x*) ∧ T*) ∧ xg(x) ∧ G(x) ∧ T ∧ G(x')` with blocks
/// `∃x*, i*, c* ∃x ∀i ∃c, x'`. Unsat means the states of `xg` may be removed.
pub fn rg_generalization_query(g: &Cnf, xg: &Cube, spec: &SafetySpec, vm: &mut VarManager) -> QuerySkeleton {
    let mut pred = g.clone();
    pred.push(negate_cube(xg));
    let reach = ReachEncoding::new(spec, &pred, false, vm);
    let next = prime(g, &spec.vars).expect("region over state variables");
    let leave = cnf_negate(&next, vm);
    let mut outer = reach.cnf;
    outer.extend(&xg.to_cnf());
    outer.extend(g);
    let problem = EAProblem::from_pair(spec.state.clone(), spec.inputs.clone(), next, leave)
        .with_inner(spec.controls.clone())
        .with_defs(spec.transition())
        .with_outer(outer);
    QuerySkeleton {
        tag: "rg-generalization",
        free: spec.state.clone(),
        problem,
        member_if_sat: true,
    }
}

/// `(I(x) ∨ (x* ≠ x) ∧ F(x*) ∧ T*) ∧ F(x) ∧ T ∧ ¬F(x')` with blocks
/// `∃x*, i*, c* ∃x, i ∀c ∃x'`. Sat yields a counterexample state.
pub fn rc_counterexample_query(f: &Cnf, spec: &SafetySpec, vm: &mut VarManager) -> QuerySkeleton {
    let reach = ReachEncoding::new(spec, f, true, vm);
    let next = prime(f, &spec.vars).expect("region over state variables");
    let leave = cnf_negate(&next, vm);
    let mut outer = reach.cnf;
    outer.extend(f);
    let mut exists = spec.state.clone();
    exists.extend(spec.inputs.iter().copied());
    let problem = EAProblem::from_pair(exists, spec.controls.clone(), leave, next)
        .with_defs(spec.transition())
        .with_outer(outer);
    QuerySkeleton {
        tag: "rc-counterexample",
        free: spec.state.clone(),
        problem,
        member_if_sat: true,
    }
}
