//! Certification of winning regions, and an explicit-state attractor used as a
//! reference on small games.

use serde::Serialize;

use crate::formula::{cnf_negate, negate_cube, prime, Clause, Cnf, Cube, Lit, Var, VarManager};
use crate::game::SafetySpec;
use crate::reachopt::ReachEncoding;
use crate::qesolve::{solve_ea, EAProblem, EaConfig, EaOutcome, QeError};
use crate::sat::{SatError, SolverFactory};

/// Default bound on `|x| + |i| + |c|` for explicit enumeration.
pub const DEFAULT_EXPLICIT_LIMIT: usize = 20;

/// Which states must satisfy the one-step condition `W ⇒ Force1_P(W)`.
///
/// `Strict` checks every state of `W`. `Rg` only states of `W` that are initial
/// or have a predecessor in `W`. `Rc` only states that are initial or have a
/// *different* predecessor in `W`. Each mode accepts every region the
/// previous one accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    Strict,
    Rg,
    Rc,
}

impl VerifyMode {
    pub fn name(self) -> &'static str {
        match self {
            VerifyMode::Strict => "strict",
            VerifyMode::Rg => "rg",
            VerifyMode::Rc => "rc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RegionReport {
    pub mode: VerifyMode,
    /// `I ⇒ W`
    pub initial: bool,
    /// `W ⇒ P`
    pub safe: bool,
    /// `W ⇒ Force1_P(W)`, restricted according to the mode.
    pub inductive: bool,
    /// A state violating the first failing condition.
    pub counterexample: Option<Vec<bool>>,
}

impl RegionReport {
    pub fn passed(&self) -> bool {
        self.initial && self.safe && self.inductive
    }

    /// `PASS PASS FAIL`-style summary of the three conditions.
    pub fn summary(&self) -> String {
        let w = |b: bool| if b { "PASS" } else { "FAIL" };
        format!("{} {} {}", w(self.initial), w(self.safe), w(self.inductive))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("region mentions non-state variable {0}")]
    Support(Var),
    #[error("game too large for explicit enumeration ({0} variables, limit {1})")]
    TooLarge(usize, usize),
    #[error(transparent)]
    Qe(#[from] QeError),
}

impl From<SatError> for VerifyError {
    fn from(e: SatError) -> Self {
        VerifyError::Qe(QeError::Sat(e))
    }
}

fn check_support(spec: &SafetySpec, region: &Cnf) -> Result<(), VerifyError> {
    match region.vars().into_iter().find(|&v| !spec.is_state(v)) {
        Some(v) => Err(VerifyError::Support(v)),
        None => Ok(()),
    }
}

/// Checks the three winning-region conditions with SAT and ∃∀ queries.
pub fn check_winning_region(
    spec: &SafetySpec,
    region: &Cnf,
    mode: VerifyMode,
    cfg: &EaConfig,
) -> Result<RegionReport, VerifyError> {
    check_support(spec, region)?;
    let mut report = RegionReport {
        mode,
        initial: true,
        safe: true,
        inductive: true,
        counterexample: None,
    };
    let zero = vec![false; spec.num_state()];
    if !region.eval(|_| false) {
        report.initial = false;
        report.counterexample = Some(zero);
        return Ok(report);
    }

    let mut s = cfg.factory.session()?;
    s.add_cnf(region)?;
    for c in spec.safe.clauses() {
        let assume: Vec<Lit> = c.lits().iter().map(|&l| !l).collect();
        if s.solve(&assume)? {
            report.safe = false;
            report.counterexample = Some(spec.state.iter().map(|&v| s.value(v)).collect());
            return Ok(report);
        }
    }

    let mut vm = spec.vars.clone();
    let p = escape_query(spec, region, mode, &mut vm);
    if let EaOutcome::Sat(w) = solve_ea(&p, cfg)? {
        report.inductive = false;
        report.counterexample = Some(spec.state_bits(&w));
    }
    Ok(report)
}

/// `∃x, i ∀c. W(x) ∧ reach(x) ∧ T ∧ ¬W(x')`: a state of the region from which
/// the antagonist leaves it.
fn escape_query(spec: &SafetySpec, region: &Cnf, mode: VerifyMode, vm: &mut VarManager) -> EAProblem {
    let next = prime(region, &spec.vars).expect("region over state variables");
    let escape = cnf_negate(&next, vm);
    let mut exists = spec.state.clone();
    exists.extend(spec.inputs.iter().copied());
    let mut outer = region.clone();
    if mode != VerifyMode::Strict {
        outer.extend(&ReachEncoding::new(spec, region, mode == VerifyMode::Rc, vm).cnf);
    }
    EAProblem::from_pair(exists, spec.controls.clone(), escape, next)
        .with_defs(spec.transition())
        .with_outer(outer)
}

/// Successor table and winning region computed by enumeration.
#[derive(Clone, Debug)]
pub struct ExplicitGame {
    pub state_bits: usize,
    pub moves: usize,
    pub controls: usize,
    /// `succ[(s << moves) | (i << controls) | c]`
    succ: Vec<u32>,
    pub safe: Vec<bool>,
}

fn bits_of(m: usize, n: usize) -> Vec<bool> {
    (0..n).map(|k| m >> k & 1 == 1).collect()
}

fn index_of(bits: &[bool]) -> usize {
    bits.iter().enumerate().fold(0, |acc, (k, &b)| acc | (b as usize) << k)
}

impl ExplicitGame {
    pub fn new(spec: &SafetySpec, limit: usize) -> Result<ExplicitGame, VerifyError> {
        let (n, ni, nc) = (spec.num_state(), spec.num_inputs(), spec.num_controls());
        if n + ni + nc > limit {
            return Err(VerifyError::TooLarge(n + ni + nc, limit));
        }
        let moves = ni + nc;
        let mut succ = Vec::with_capacity(1 << (n + moves));
        let mut safe = Vec::with_capacity(1 << n);
        for s in 0..1usize << n {
            let sb = bits_of(s, n);
            safe.push(spec.is_safe(&sb));
            for i in 0..1usize << ni {
                let ib = bits_of(i, ni);
                for c in 0..1usize << nc {
                    succ.push(index_of(&spec.step(&sb, &ib, &bits_of(c, nc))) as u32);
                }
            }
        }
        Ok(ExplicitGame {
            state_bits: n,
            moves,
            controls: nc,
            succ,
            safe,
        })
    }

    pub fn num_states(&self) -> usize {
        1 << self.state_bits
    }

    pub fn successor(&self, s: usize, i: usize, c: usize) -> usize {
        self.succ[(s << self.moves) | (i << self.controls) | c] as usize
    }

    /// Whether every input admits a control keeping the successor in `target`.
    pub fn forces(&self, s: usize, target: &[bool]) -> bool {
        let ni = self.moves - self.controls;
        (0..1usize << ni).all(|i| (0..1usize << self.controls).any(|c| target[self.successor(s, i, c)]))
    }

    /// Greatest fixpoint `W = P ∧ Force1(W)`.
    pub fn winning_region(&self) -> Vec<bool> {
        self.attractor(false).0
    }

    /// The fixpoint iteration; with `early`, stops once the initial state drops out.
    fn attractor(&self, early: bool) -> (Vec<bool>, usize) {
        let mut w = self.safe.clone();
        let mut iterations = 0;
        loop {
            if early && !w[0] {
                return (w, iterations);
            }
            let next: Vec<bool> = (0..self.num_states()).map(|s| w[s] && self.forces(s, &w)).collect();
            if next == w {
                return (w, iterations);
            }
            iterations += 1;
            w = next;
        }
    }

    /// The three conditions evaluated state by state.
    pub fn check(&self, region: &[bool], mode: VerifyMode) -> RegionReport {
        let n = self.state_bits;
        let mut report = RegionReport {
            mode,
            initial: region[0],
            safe: true,
            inductive: true,
            counterexample: None,
        };
        if !report.initial {
            report.counterexample = Some(bits_of(0, n));
            return report;
        }
        if let Some(s) = (0..self.num_states()).find(|&s| region[s] && !self.safe[s]) {
            report.safe = false;
            report.counterexample = Some(bits_of(s, n));
            return report;
        }
        let mut reached = vec![mode == VerifyMode::Strict; self.num_states()];
        reached[0] = true;
        if mode != VerifyMode::Strict {
            for p in (0..self.num_states()).filter(|&p| region[p]) {
                for m in 0..1usize << self.moves {
                    let s = self.succ[(p << self.moves) | m] as usize;
                    if mode == VerifyMode::Rg || s != p {
                        reached[s] = true;
                    }
                }
            }
        }
        if let Some(s) = (0..self.num_states()).find(|&s| region[s] && reached[s] && !self.forces(s, region)) {
            report.inductive = false;
            report.counterexample = Some(bits_of(s, n));
        }
        report
    }
}

/// Membership of every state in a CNF region.
pub fn region_states(spec: &SafetySpec, region: &Cnf) -> Vec<bool> {
    let n = spec.num_state();
    (0..1usize << n)
        .map(|s| region.eval(|v| spec.state.iter().position(|&x| x == v).is_some_and(|k| s >> k & 1 == 1)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExactVerdict {
    Realizable { region: Vec<bool>, iterations: usize },
    Unrealizable { iterations: usize },
}

impl ExactVerdict {
    pub fn is_realizable(&self) -> bool {
        matches!(self, ExactVerdict::Realizable { .. })
    }
}

/// Explicit-state fixpoint over the functional transition relation. States
/// are indexed by their bits, state variable `k` being bit `k`.
pub fn explicit_attractor(spec: &SafetySpec, limit: usize) -> Result<ExactVerdict, VerifyError> {
    let game = ExplicitGame::new(spec, limit)?;
    let (region, iterations) = game.attractor(true);
    Ok(if region[0] {
        ExactVerdict::Realizable { region, iterations }
    } else {
        ExactVerdict::Unrealizable { iterations }
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RegionEquivalence {
    Equivalent,
    /// An assignment to the compared variables on which the two regions differ.
    Witness(Cube),
}

/// SAT-checks `a ∧ ¬b` and `b ∧ ¬a`.
pub fn compare_regions(a: &Cnf, b: &Cnf, factory: &SolverFactory) -> Result<RegionEquivalence, SatError> {
    let mut vars = a.vars();
    vars.extend(b.vars());
    vars.sort_unstable();
    vars.dedup();
    for (f, g) in [(a, b), (b, a)] {
        let mut s = factory.session()?;
        s.add_cnf(f)?;
        for c in g.clauses() {
            let assume: Vec<Lit> = c.lits().iter().map(|&l| !l).collect();
            if s.solve(&assume)? {
                return Ok(RegionEquivalence::Witness(s.model(&vars)));
            }
        }
    }
    Ok(RegionEquivalence::Equivalent)
}

/// The explicit region as a CNF with one blocking clause per losing state.
pub fn region_cnf(spec: &SafetySpec, region: &[bool]) -> Cnf {
    let n = spec.num_state();
    let mut f = Cnf::new();
    for (s, &w) in region.iter().enumerate() {
        if !w {
            let cube = Cube::new(spec.state.iter().enumerate().map(|(k, v)| v.lit(s >> k & 1 == 1)))
                .expect("distinct");
            f.push(negate_cube(&cube));
        }
    }
    debug_assert!(f.clauses().iter().all(|c: &Clause| c.len() == n));
    f
}
