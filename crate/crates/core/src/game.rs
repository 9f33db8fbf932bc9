//! Safety games: the transition system `(x, i, c, I, T)` with safe set `P`, and
//! the one-step pre-image queries shared by the backends.

use std::collections::HashMap;
use std::ops::Not;

use crate::formula::{cnf_negate, prime, Clause, Cnf, Cube, Lit, Var, VarGroup, VarManager};
use crate::qesolve::{solve_ea, EAProblem, EaConfig, EaOutcome, QeError};

/// A gate input or next-state function: a constant or a literal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Signal {
    Const(bool),
    Lit(Lit),
}

impl Not for Signal {
    type Output = Signal;

    fn not(self) -> Signal {
        match self {
            Signal::Const(b) => Signal::Const(!b),
            Signal::Lit(l) => Signal::Lit(!l),
        }
    }
}

impl From<Lit> for Signal {
    fn from(l: Lit) -> Signal {
        Signal::Lit(l)
    }
}

/// `out ↔ a ∧ b`
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AndGate {
    pub out: Var,
    pub a: Signal,
    pub b: Signal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    State(usize),
    Input(usize),
    Control(usize),
    Gate(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("{0} next-state functions for {1} state variables")]
    NextArity(usize, usize),
    #[error("gate {0} reads {1} before it is defined")]
    Order(Var, Var),
    #[error("safe set mentions non-state variable {0}")]
    SafeSupport(Var),
    #[error("variable {0} is used with two roles")]
    Duplicate(Var),
}

/// The variables of one copy of the transition relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepVars {
    pub state: Vec<Var>,
    pub inputs: Vec<Var>,
    pub controls: Vec<Var>,
    pub next: Vec<Var>,
    pub gates: Vec<Var>,
}

/// A controllable finite-state transition system with a safety objective.
#[derive(Clone, Debug)]
pub struct SafetySpec {
    pub name: String,
    pub vars: VarManager,
    pub state: Vec<Var>,
    pub inputs: Vec<Var>,
    pub controls: Vec<Var>,
    pub gates: Vec<AndGate>,
    pub next_fns: Vec<Signal>,
    pub init: Cube,
    pub safe: Cnf,
    /// AIGER literal of each latch; `None` for a synthetic error latch.
    pub latch_origin: Vec<Option<u32>>,
    roles: HashMap<Var, Role>,
}

impl SafetySpec {
    /// Checks well-formedness. State variables must have been allocated with
    /// [`VarManager::fresh_state`]; the initial state is all-zero.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        vars: VarManager,
        state: Vec<Var>,
        inputs: Vec<Var>,
        controls: Vec<Var>,
        gates: Vec<AndGate>,
        next_fns: Vec<Signal>,
        safe: Cnf,
    ) -> Result<SafetySpec, SpecError> {
        if next_fns.len() != state.len() {
            return Err(SpecError::NextArity(next_fns.len(), state.len()));
        }
        let mut roles = HashMap::new();
        let all = state
            .iter()
            .enumerate()
            .map(|(k, &v)| (v, Role::State(k)))
            .chain(inputs.iter().enumerate().map(|(k, &v)| (v, Role::Input(k))))
            .chain(controls.iter().enumerate().map(|(k, &v)| (v, Role::Control(k))));
        for (v, r) in all {
            if roles.insert(v, r).is_some() {
                return Err(SpecError::Duplicate(v));
            }
        }
        for (k, g) in gates.iter().enumerate() {
            for s in [g.a, g.b] {
                if let Signal::Lit(l) = s {
                    if !roles.contains_key(&l.var()) {
                        return Err(SpecError::Order(g.out, l.var()));
                    }
                }
            }
            if roles.insert(g.out, Role::Gate(k)).is_some() {
                return Err(SpecError::Duplicate(g.out));
            }
        }
        for s in &next_fns {
            if let Signal::Lit(l) = s {
                if !roles.contains_key(&l.var()) {
                    return Err(SpecError::Order(l.var(), l.var()));
                }
            }
        }
        for v in safe.vars() {
            if !matches!(roles.get(&v), Some(Role::State(_))) {
                return Err(SpecError::SafeSupport(v));
            }
        }
        let init = Cube::new(state.iter().map(|v| v.neg())).expect("distinct state vars");
        let latch_origin = vec![None; state.len()];
        Ok(SafetySpec {
            name: name.into(),
            vars,
            state,
            inputs,
            controls,
            gates,
            next_fns,
            init,
            safe,
            latch_origin,
            roles,
        })
    }

    pub fn num_state(&self) -> usize {
        self.state.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn next_vars(&self) -> Vec<Var> {
        self.state
            .iter()
            .map(|&x| self.vars.next(x).expect("state var has a next-state partner"))
            .collect()
    }

    /// The spec's own variables.
    pub fn canonical_step(&self) -> StepVars {
        StepVars {
            state: self.state.clone(),
            inputs: self.inputs.clone(),
            controls: self.controls.clone(),
            next: self.next_vars(),
            gates: self.gates.iter().map(|g| g.out).collect(),
        }
    }

    /// A copy leading from previous-step variables `x*, i*, c*` into `x`.
    pub fn prev_step(&self, vm: &mut VarManager) -> StepVars {
        StepVars {
            state: self.state.iter().map(|&v| vm.prev(v)).collect(),
            inputs: self.inputs.iter().map(|&v| vm.prev(v)).collect(),
            controls: self.controls.iter().map(|&v| vm.prev(v)).collect(),
            next: self.state.clone(),
            gates: vm.fresh_n(VarGroup::Temp, self.gates.len()),
        }
    }

    /// A copy with fresh inputs, controls and gates over the given state and
    /// next-state variables.
    pub fn fresh_step(&self, vm: &mut VarManager, state: Vec<Var>, next: Vec<Var>) -> StepVars {
        StepVars {
            state,
            inputs: vm.fresh_n(VarGroup::Temp, self.inputs.len()),
            controls: vm.fresh_n(VarGroup::Temp, self.controls.len()),
            next,
            gates: vm.fresh_n(VarGroup::Temp, self.gates.len()),
        }
    }

    fn map_signal(&self, s: Signal, step: &StepVars) -> Signal {
        match s {
            Signal::Const(_) => s,
            Signal::Lit(l) => {
                let v = match self.roles[&l.var()] {
                    Role::State(k) => step.state[k],
                    Role::Input(k) => step.inputs[k],
                    Role::Control(k) => step.controls[k],
                    Role::Gate(k) => step.gates[k],
                };
                Signal::Lit(Lit::new(v, l.sign()))
            }
        }
    }

    /// Gate definitions of one copy.
    pub fn gate_clauses(&self, step: &StepVars) -> Cnf {
        let mut f = Cnf::new();
        for (k, g) in self.gates.iter().enumerate() {
            let out = step.gates[k];
            let a = self.map_signal(g.a, step);
            let b = self.map_signal(g.b, step);
            match (a, b) {
                (Signal::Const(false), _) | (_, Signal::Const(false)) => f.add([out.neg()]),
                (Signal::Const(true), Signal::Const(true)) => f.add([out.pos()]),
                (Signal::Const(true), Signal::Lit(l)) | (Signal::Lit(l), Signal::Const(true)) => {
                    f.add([out.neg(), l]);
                    f.add([out.pos(), !l]);
                }
                (Signal::Lit(a), Signal::Lit(b)) => {
                    f.add([out.neg(), a]);
                    f.add([out.neg(), b]);
                    f.add([out.pos(), !a, !b]);
                }
            }
        }
        f
    }

    /// `next_j ↔ f_j` for every state bit, each clause weakened by `guard`.
    pub fn link_clauses(&self, step: &StepVars, guard: Option<Lit>) -> Cnf {
        let mut f = Cnf::new();
        let g: Vec<Lit> = guard.into_iter().collect();
        for (k, s) in self.next_fns.iter().enumerate() {
            let n = step.next[k];
            match self.map_signal(*s, step) {
                Signal::Const(b) => f.add(g.iter().copied().chain([n.lit(b)])),
                Signal::Lit(l) => {
                    f.add(g.iter().copied().chain([n.neg(), l]));
                    f.add(g.iter().copied().chain([n.pos(), !l]));
                }
            }
        }
        f
    }

    pub fn encode_step(&self, step: &StepVars) -> Cnf {
        let mut f = self.gate_clauses(step);
        f.extend(&self.link_clauses(step, None));
        f
    }

    /// `T(x, i, c, x')` over the spec's own variables.
    pub fn transition(&self) -> Cnf {
        self.encode_step(&self.canonical_step())
    }

    /// Evaluates the next state functionally.
    pub fn step(&self, state: &[bool], inputs: &[bool], controls: &[bool]) -> Vec<bool> {
        let mut gates = vec![false; self.gates.len()];
        let val = |s: Signal, gates: &[bool]| -> bool {
            match s {
                Signal::Const(b) => b,
                Signal::Lit(l) => {
                    let v = match self.roles[&l.var()] {
                        Role::State(k) => state[k],
                        Role::Input(k) => inputs[k],
                        Role::Control(k) => controls[k],
                        Role::Gate(k) => gates[k],
                    };
                    l.eval(v)
                }
            }
        };
        for k in 0..self.gates.len() {
            let g = &self.gates[k];
            gates[k] = val(g.a, &gates) && val(g.b, &gates);
        }
        self.next_fns.iter().map(|&s| val(s, &gates)).collect()
    }

    fn state_value(&self, state: &[bool]) -> impl Fn(Var) -> bool + '_ {
        let index: HashMap<Var, usize> = self.state.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let state = state.to_vec();
        move |v| state[index[&v]]
    }

    pub fn is_safe(&self, state: &[bool]) -> bool {
        self.safe.eval(self.state_value(state))
    }

    pub fn is_initial(&self, state: &[bool]) -> bool {
        state.iter().all(|b| !b)
    }

    /// Cube over the state variables for a bit-vector.
    pub fn state_cube(&self, state: &[bool]) -> Cube {
        Cube::new(self.state.iter().zip(state).map(|(v, &b)| v.lit(b))).expect("distinct")
    }

    /// Bit-vector of a cube that assigns every state variable (missing ones read false).
    pub fn state_bits(&self, cube: &Cube) -> Vec<bool> {
        self.state.iter().map(|v| cube.contains(v.pos())).collect()
    }

    pub fn is_state(&self, v: Var) -> bool {
        matches!(self.roles.get(&v), Some(Role::State(_)))
    }

    pub fn is_input(&self, v: Var) -> bool {
        matches!(self.roles.get(&v), Some(Role::Input(_)))
    }

    pub fn is_control(&self, v: Var) -> bool {
        matches!(self.roles.get(&v), Some(Role::Control(_)))
    }
}

/// A one-step pre-image of a target set, as a quantified query whose free
/// variables are the current state.
#[derive(Clone, Debug)]
pub struct QuerySkeleton {
    pub tag: &'static str,
    pub free: Vec<Var>,
    /// Membership holds iff the problem's answer equals `member_if_sat`.
    pub problem: EAProblem,
    pub member_if_sat: bool,
}

impl QuerySkeleton {
    /// Whether the full state cube lies in the pre-image.
    pub fn contains(&self, state: &Cube, cfg: &EaConfig) -> Result<bool, QeError> {
        let mut p = self.problem.clone();
        p.outer.extend(&state.to_cnf());
        let sat = matches!(solve_ea(&p, cfg)?, EaOutcome::Sat(_));
        Ok(sat == self.member_if_sat)
    }
}

/// States from which the protagonist forces a step into `target`:
/// `∀i ∃c, x'. T ∧ target'`. Evaluated through its dual `∃i ∀c. T ∧ ¬target'`.
pub fn force1_protagonist(spec: &SafetySpec, target: &Cnf, vm: &mut VarManager) -> QuerySkeleton {
    let next = prime(target, &spec.vars).expect("target over state variables");
    let mut exists = spec.state.clone();
    exists.extend(spec.inputs.iter().copied());
    let escape = cnf_negate(&next, vm);
    let problem =
        EAProblem::from_pair(exists, spec.controls.clone(), escape, next).with_defs(spec.transition());
    QuerySkeleton {
        tag: "force1-protagonist",
        free: spec.state.clone(),
        problem,
        member_if_sat: false,
    }
}

/// States from which the antagonist forces a step into `target`:
/// `∃i ∀c ∃x'. T ∧ target'`.
pub fn force1_antagonist(spec: &SafetySpec, target: &Cnf, vm: &mut VarManager) -> QuerySkeleton {
    let next = prime(target, &spec.vars).expect("target over state variables");
    let mut exists = spec.state.clone();
    exists.extend(spec.inputs.iter().copied());
    let problem =
        EAProblem::new(exists, spec.controls.clone(), next, vm).with_defs(spec.transition());
    QuerySkeleton {
        tag: "force1-antagonist",
        free: spec.state.clone(),
        problem,
        member_if_sat: true,
    }
}

/// The negation of a state cube as a one-clause CNF.
pub fn block(cube: &Cube) -> Cnf {
    Cnf::from_clauses([crate::formula::negate_cube(cube)])
}

/// Unit clauses of a cube, as a CNF.
pub fn cube_cnf(cube: &Cube) -> Cnf {
    Cnf::from_clauses(cube.lits().iter().map(|&l| Clause::unit(l)))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// One latch `x0' = s`, error when `x0` is set. `s` is a control when
    /// `controllable`, otherwise an uncontrollable input.
    pub fn one_latch(controllable: bool) -> SafetySpec {
        let mut vm = VarManager::new();
        let x = vm.fresh_state();
        let s = vm.fresh(if controllable { VarGroup::Control } else { VarGroup::Input });
        let (inputs, controls) = if controllable { (vec![], vec![s]) } else { (vec![s], vec![]) };
        SafetySpec::new(
            "one-latch",
            vm,
            vec![x],
            inputs,
            controls,
            vec![],
            vec![Signal::Lit(s.pos())],
            Cnf::from_clauses([Clause::unit(x.neg())]),
        )
        .unwrap()
    }
}
