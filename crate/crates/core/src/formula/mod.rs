//! Propositional core: variables grouped by role, literals, cubes, clauses and
//! CNF formulas.

mod dimacs;
mod transform;

use std::collections::HashMap;
use std::fmt;
use std::ops::Not;

use serde::Serialize;

pub use dimacs::{parse_dimacs, write_dimacs, DimacsError, DimacsFile};
pub use transform::{
    cnf_negate, cnf_or, compress, compress_with, is_subcube, negate_cube, prime, rename,
    substitute, unprime, Negation, Unpaired,
};

/// A propositional variable. Ids start at 1 so they map directly onto DIMACS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn pos(self) -> Lit {
        Lit::new(self, true)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Lit {
        Lit::new(self, false)
    }

    pub fn lit(self, sign: bool) -> Lit {
        Lit::new(self, sign)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// A literal, packed as `var << 1 | negated`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, sign: bool) -> Lit {
        Lit(var.0 << 1 | (!sign) as u32)
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    /// `true` for the unnegated literal.
    pub fn sign(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn code(self) -> usize {
        self.0 as usize
    }

    pub fn from_code(code: usize) -> Lit {
        Lit(code as u32)
    }

    pub fn to_dimacs(self) -> i64 {
        if self.sign() {
            self.var().0 as i64
        } else {
            -(self.var().0 as i64)
        }
    }

    pub fn from_dimacs(x: i64) -> Lit {
        assert!(x != 0, "0 is not a DIMACS literal");
        Lit::new(Var(x.unsigned_abs() as u32), x > 0)
    }

    /// Value of this literal under a variable assignment.
    pub fn eval(self, value: bool) -> bool {
        value == self.sign()
    }
}

impl Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Sorts by variable and removes duplicates. Returns `None` if both polarities
/// of some variable occur.
fn normalize(mut lits: Vec<Lit>) -> Option<Vec<Lit>> {
    lits.sort_unstable();
    lits.dedup();
    if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
        return None;
    }
    Some(lits)
}

/// A conjunction of literals over distinct variables. The empty cube is `true`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    lits: Vec<Lit>,
}

impl Cube {
    /// Builds a cube; `None` if the literals are contradictory.
    pub fn new(lits: impl IntoIterator<Item = Lit>) -> Option<Cube> {
        normalize(lits.into_iter().collect()).map(|lits| Cube { lits })
    }

    pub fn empty() -> Cube {
        Cube::default()
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn contains(&self, lit: Lit) -> bool {
        self.lits.binary_search(&lit).is_ok()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.lits.iter().map(|l| l.var())
    }

    /// The cube with `lit` removed.
    pub fn without(&self, lit: Lit) -> Cube {
        Cube {
            lits: self.lits.iter().copied().filter(|&l| l != lit).collect(),
        }
    }

    /// Conjunction of two cubes, `None` if they conflict.
    pub fn conjoin(&self, other: &Cube) -> Option<Cube> {
        Cube::new(self.lits.iter().chain(other.lits.iter()).copied())
    }

    /// Whether the two cubes share a satisfying assignment.
    pub fn intersects(&self, other: &Cube) -> bool {
        self.conjoin(other).is_some()
    }

    /// Literals of this cube whose variable satisfies the predicate.
    pub fn restrict(&self, keep: impl Fn(Var) -> bool) -> Cube {
        Cube {
            lits: self.lits.iter().copied().filter(|l| keep(l.var())).collect(),
        }
    }

    pub fn eval(&self, value: impl Fn(Var) -> bool) -> bool {
        self.lits.iter().all(|l| l.eval(value(l.var())))
    }

    /// One unit clause per literal.
    pub fn to_cnf(&self) -> Cnf {
        Cnf::from_clauses(self.lits.iter().map(|&l| Clause::unit(l)))
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, l) in self.lits.iter().enumerate() {
            if k > 0 {
                write!(f, " & ")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "]")
    }
}

/// A disjunction of literals over distinct variables. The empty clause is `false`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    lits: Vec<Lit>,
}

impl Clause {
    /// Builds a clause; `None` if it is a tautology.
    pub fn new(lits: impl IntoIterator<Item = Lit>) -> Option<Clause> {
        normalize(lits.into_iter().collect()).map(|lits| Clause { lits })
    }

    pub fn empty() -> Clause {
        Clause::default()
    }

    pub fn unit(lit: Lit) -> Clause {
        Clause { lits: vec![lit] }
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn contains(&self, lit: Lit) -> bool {
        self.lits.binary_search(&lit).is_ok()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.lits.iter().map(|l| l.var())
    }

    pub fn eval(&self, value: impl Fn(Var) -> bool) -> bool {
        self.lits.iter().any(|l| l.eval(value(l.var())))
    }

    /// Every literal of `self` occurs in `other`.
    pub fn subsumes(&self, other: &Clause) -> bool {
        self.lits.iter().all(|l| other.contains(*l))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, l) in self.lits.iter().enumerate() {
            if k > 0 {
                write!(f, " | ")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}

/// A conjunction of clauses. The empty CNF is `true`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cnf {
    clauses: Vec<Clause>,
}

impl Cnf {
    pub fn new() -> Cnf {
        Cnf::default()
    }

    /// The unsatisfiable CNF consisting of the empty clause.
    pub fn falsum() -> Cnf {
        Cnf {
            clauses: vec![Clause::empty()],
        }
    }

    pub fn from_clauses(clauses: impl IntoIterator<Item = Clause>) -> Cnf {
        Cnf {
            clauses: clauses.into_iter().collect(),
        }
    }

    /// Parses `[[1, -2], [3]]`-style DIMACS integer lists. Tautologies are dropped.
    pub fn from_dimacs(clauses: &[&[i64]]) -> Cnf {
        let mut f = Cnf::new();
        for c in clauses {
            f.add(c.iter().map(|&x| Lit::from_dimacs(x)));
        }
        f
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn push(&mut self, c: Clause) {
        self.clauses.push(c);
    }

    /// Adds a clause from raw literals; tautologies are silently dropped.
    pub fn add(&mut self, lits: impl IntoIterator<Item = Lit>) {
        if let Some(c) = Clause::new(lits) {
            self.clauses.push(c);
        }
    }

    pub fn extend(&mut self, other: &Cnf) {
        self.clauses.extend(other.clauses.iter().cloned());
    }

    pub fn retain(&mut self, keep: impl FnMut(&Clause) -> bool) {
        self.clauses.retain(keep);
    }

    /// Drops duplicate clauses and clauses subsumed by a shorter one. The
    /// result is equivalent.
    pub fn without_subsumed(&self) -> Cnf {
        let mut sorted: Vec<&Clause> = self.clauses.iter().collect();
        sorted.sort_by_key(|c| c.len());
        let mut kept: Vec<Clause> = Vec::new();
        for c in sorted {
            if !kept.iter().any(|k| k.subsumes(c)) {
                kept.push(c.clone());
            }
        }
        Cnf { clauses: kept }
    }

    pub fn eval(&self, value: impl Fn(Var) -> bool) -> bool {
        self.clauses.iter().all(|c| c.eval(&value))
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = self.clauses.iter().flat_map(|c| c.vars()).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    pub fn max_var(&self) -> u32 {
        self.clauses
            .iter()
            .flat_map(|c| c.vars())
            .map(|v| v.0)
            .max()
            .unwrap_or(0)
    }

    pub fn num_literals(&self) -> usize {
        self.clauses.iter().map(|c| c.len()).sum()
    }

    /// Indices of clauses that repeat an earlier clause.
    pub fn duplicates(&self) -> Vec<usize> {
        let mut seen = std::collections::HashSet::new();
        self.clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| !seen.insert(*c))
            .map(|(k, _)| k)
            .collect()
    }

    /// Drops repeated clauses, keeping first occurrences.
    pub fn dedup(&mut self) {
        let mut seen = std::collections::HashSet::new();
        self.clauses.retain(|c| seen.insert(c.clone()));
    }
}

impl fmt::Display for Cnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() {
            return write!(f, "true");
        }
        for (k, c) in self.clauses.iter().enumerate() {
            if k > 0 {
                write!(f, " & ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromIterator<Clause> for Cnf {
    fn from_iter<T: IntoIterator<Item = Clause>>(iter: T) -> Self {
        Cnf::from_clauses(iter)
    }
}

/// Semantic role of a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum VarGroup {
    State,
    Input,
    Control,
    NextState,
    Temp,
    PrevState,
    PrevInput,
    PrevControl,
    TemplateParam,
}

impl VarGroup {
    pub fn name(self) -> &'static str {
        match self {
            VarGroup::State => "State",
            VarGroup::Input => "Input",
            VarGroup::Control => "Control",
            VarGroup::NextState => "NextState",
            VarGroup::Temp => "Temp",
            VarGroup::PrevState => "PrevState",
            VarGroup::PrevInput => "PrevInput",
            VarGroup::PrevControl => "PrevControl",
            VarGroup::TemplateParam => "TemplateParam",
        }
    }

    pub fn from_name(s: &str) -> Option<VarGroup> {
        Some(match s {
            "State" => VarGroup::State,
            "Input" => VarGroup::Input,
            "Control" => VarGroup::Control,
            "NextState" => VarGroup::NextState,
            "Temp" => VarGroup::Temp,
            "PrevState" => VarGroup::PrevState,
            "PrevInput" => VarGroup::PrevInput,
            "PrevControl" => VarGroup::PrevControl,
            "TemplateParam" => VarGroup::TemplateParam,
            _ => return None,
        })
    }

    fn prev_group(self) -> Option<VarGroup> {
        match self {
            VarGroup::State => Some(VarGroup::PrevState),
            VarGroup::Input => Some(VarGroup::PrevInput),
            VarGroup::Control => Some(VarGroup::PrevControl),
            _ => None,
        }
    }
}

/// Registry of variables with their groups and the next-state / previous-state
/// pairings.
#[derive(Clone, Debug, Default)]
pub struct VarManager {
    groups: Vec<Option<VarGroup>>,
    next_of: HashMap<Var, Var>,
    state_of: HashMap<Var, Var>,
    prev_of: HashMap<Var, Var>,
    unprev_of: HashMap<Var, Var>,
}

impl VarManager {
    pub fn new() -> VarManager {
        VarManager {
            groups: vec![None],
            ..Default::default()
        }
    }

    /// Number of allocated ids; the largest id in use.
    pub fn max_var(&self) -> u32 {
        (self.groups.len() - 1) as u32
    }

    pub fn fresh(&mut self, group: VarGroup) -> Var {
        if self.groups.is_empty() {
            self.groups.push(None);
        }
        self.groups.push(Some(group));
        Var(self.max_var())
    }

    pub fn fresh_n(&mut self, group: VarGroup, n: usize) -> Vec<Var> {
        (0..n).map(|_| self.fresh(group)).collect()
    }

    /// Allocates a state variable together with its next-state partner.
    pub fn fresh_state(&mut self) -> Var {
        let x = self.fresh(VarGroup::State);
        let nx = self.fresh(VarGroup::NextState);
        self.next_of.insert(x, nx);
        self.state_of.insert(nx, x);
        x
    }

    pub fn group(&self, v: Var) -> Option<VarGroup> {
        self.groups.get(v.index()).copied().flatten()
    }

    pub fn next(&self, state: Var) -> Option<Var> {
        self.next_of.get(&state).copied()
    }

    pub fn current(&self, next: Var) -> Option<Var> {
        self.state_of.get(&next).copied()
    }

    /// Previous-step copy of a State/Input/Control variable, created on first use.
    pub fn prev(&mut self, v: Var) -> Var {
        if let Some(&p) = self.prev_of.get(&v) {
            return p;
        }
        let group = self
            .group(v)
            .and_then(VarGroup::prev_group)
            .unwrap_or_else(|| panic!("{v} has no previous-step group"));
        let p = self.fresh(group);
        self.prev_of.insert(v, p);
        self.unprev_of.insert(p, v);
        p
    }

    pub fn prev_partner(&self, v: Var) -> Option<Var> {
        self.prev_of.get(&v).copied()
    }

    pub fn unprev(&self, p: Var) -> Option<Var> {
        self.unprev_of.get(&p).copied()
    }

    /// All variables of a group in id order.
    pub fn vars_in(&self, group: VarGroup) -> Vec<Var> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| **g == Some(group))
            .map(|(k, _)| Var(k as u32))
            .collect()
    }
}
