use std::collections::HashMap;

use super::{Clause, Cnf, Cube, Lit, Var, VarGroup, VarManager};
use crate::sat::{SatError, SolverFactory};

/// Error raised by [`prime`] / [`unprime`] for variables outside their domain.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("variable {0} has no partner for this substitution")]
pub struct Unpaired(pub Var);

/// `¬(l1 ∧ … ∧ ln)` as the clause `(¬l1 ∨ … ∨ ¬ln)`.
pub fn negate_cube(c: &Cube) -> Clause {
    Clause::new(c.lits().iter().map(|&l| !l)).expect("a cube has no complementary literals")
}

/// Whether every literal of `a` occurs in `b`.
pub fn is_subcube(a: &Cube, b: &Cube) -> bool {
    a.lits().iter().all(|&l| b.contains(l))
}

/// Applies a variable renaming, keeping polarities.
pub fn rename(f: &Cnf, map: impl Fn(Var) -> Var) -> Cnf {
    let mut out = Cnf::new();
    for c in f.clauses() {
        out.add(c.lits().iter().map(|&l| Lit::new(map(l.var()), l.sign())));
    }
    out
}

fn try_rename(f: &Cnf, map: impl Fn(Var) -> Option<Var>) -> Result<Cnf, Unpaired> {
    let mut out = Cnf::new();
    for c in f.clauses() {
        let mut lits = Vec::with_capacity(c.len());
        for &l in c.lits() {
            let v = map(l.var()).ok_or(Unpaired(l.var()))?;
            lits.push(Lit::new(v, l.sign()));
        }
        out.add(lits);
    }
    Ok(out)
}

/// Replaces every State variable by its NextState partner.
pub fn prime(f: &Cnf, vm: &VarManager) -> Result<Cnf, Unpaired> {
    try_rename(f, |v| vm.next(v))
}

/// Inverse of [`prime`].
pub fn unprime(f: &Cnf, vm: &VarManager) -> Result<Cnf, Unpaired> {
    try_rename(f, |v| vm.current(v))
}

/// Simplifies `f` under the partial assignment `fixed`: satisfied clauses are
/// dropped, falsified literals removed.
pub fn substitute(f: &Cnf, fixed: &Cube) -> Cnf {
    let value: HashMap<Var, bool> = fixed.lits().iter().map(|l| (l.var(), l.sign())).collect();
    let mut out = Cnf::new();
    'clauses: for c in f.clauses() {
        let mut lits = Vec::with_capacity(c.len());
        for &l in c.lits() {
            match value.get(&l.var()) {
                Some(&b) if l.eval(b) => continue 'clauses,
                Some(_) => {}
                None => lits.push(l),
            }
        }
        out.add(lits);
    }
    out
}

/// Result of the one-sided negation: the CNF and the temporaries it introduced.
#[derive(Clone, Debug)]
pub struct Negation {
    pub cnf: Cnf,
    pub temps: Vec<Var>,
}

/// One-sided (Plaisted-Greenbaum) CNF of `¬f`.
///
/// Each non-unit clause `C` gets a fresh temporary `t` with `t → ¬C`, and the
/// result demands that some `t` (or the negation of some unit clause) holds.
/// Projected onto `f`'s variables the models are exactly the assignments
/// falsifying `f`.
pub fn cnf_negate(f: &Cnf, vm: &mut VarManager) -> Cnf {
    negate_tracked(f, vm).cnf
}

fn negate_tracked(f: &Cnf, vm: &mut VarManager) -> Negation {
    if f.clauses().iter().any(|c| c.is_empty()) {
        return Negation {
            cnf: Cnf::new(),
            temps: Vec::new(),
        };
    }
    let mut out = Cnf::new();
    let mut temps = Vec::new();
    let mut big = Vec::with_capacity(f.len());
    for c in f.clauses() {
        if c.len() == 1 {
            big.push(!c.lits()[0]);
            continue;
        }
        let t = vm.fresh(VarGroup::Temp);
        temps.push(t);
        for &l in c.lits() {
            out.add([t.neg(), !l]);
        }
        big.push(t.pos());
    }
    // Duplicate units may turn `big` into a tautology, which is fine: the
    // negation is then trivially satisfiable, and so is `big`.
    if let Some(c) = Clause::new(big) {
        out.push(c);
    }
    Negation { cnf: out, temps }
}

/// CNF of `a ∨ b` using one fresh selector.
pub fn cnf_or(a: &Cnf, b: &Cnf, vm: &mut VarManager) -> Cnf {
    let s = vm.fresh(VarGroup::Temp);
    let mut out = Cnf::new();
    for c in a.clauses() {
        out.add(c.lits().iter().copied().chain([s.pos()]));
    }
    for c in b.clauses() {
        out.add(c.lits().iter().copied().chain([s.neg()]));
    }
    out
}

/// Removes clauses implied by the remaining ones, longest first, issuing at
/// most `budget` satisfiability queries. The result is a sub-list of `f`
/// (original order preserved) with the same models.
pub fn compress(f: &Cnf, budget: usize) -> Cnf {
    compress_with(f, budget, &SolverFactory::default()).expect("bundled solver does not fail")
}

pub fn compress_with(f: &Cnf, budget: usize, factory: &SolverFactory) -> Result<Cnf, SatError> {
    if f.len() < 2 || budget == 0 {
        return Ok(f.clone());
    }
    let mut session = factory.session()?;
    let base = f.max_var();
    let selector = |k: usize| Var(base + 1 + k as u32);
    for (k, c) in f.clauses().iter().enumerate() {
        let lits: Vec<Lit> = c.lits().iter().copied().chain([selector(k).neg()]).collect();
        session.add_lits(&lits)?;
    }
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by_key(|&k| std::cmp::Reverse(f.clauses()[k].len()));
    let mut removed = vec![false; f.len()];
    for &k in order.iter().take(budget) {
        let mut assumptions: Vec<Lit> = (0..f.len())
            .filter(|&j| j != k && !removed[j])
            .map(|j| selector(j).pos())
            .collect();
        assumptions.extend(f.clauses()[k].lits().iter().map(|&l| !l));
        if !session.solve(&assumptions)? {
            removed[k] = true;
        }
    }
    Ok(Cnf::from_clauses(
        f.clauses()
            .iter()
            .zip(&removed)
            .filter(|(_, &r)| !r)
            .map(|(c, _)| c.clone()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(n: u32) -> Vec<Var> {
        (1..=n).map(Var).collect()
    }

    /// Models of `f` projected to `over`, as bitmasks.
    fn models(f: &Cnf, over: &[Var]) -> Vec<u32> {
        let extra: Vec<Var> = f.vars().into_iter().filter(|v| !over.contains(v)).collect();
        let mut out = Vec::new();
        for m in 0..1u32 << over.len() {
            let found = (0..1u64 << extra.len()).any(|e| {
                f.eval(|v| {
                    if let Some(k) = over.iter().position(|&o| o == v) {
                        m >> k & 1 == 1
                    } else {
                        let k = extra.iter().position(|&o| o == v).unwrap();
                        e >> k & 1 == 1
                    }
                })
            });
            if found {
                out.push(m);
            }
        }
        out
    }

    #[test]
    fn negate_cube_examples() {
        let c = Cube::new([Var(1).pos(), Var(2).neg()]).unwrap();
        assert_eq!(negate_cube(&c), Clause::new([Var(1).neg(), Var(2).pos()]).unwrap());
        assert_eq!(negate_cube(&Cube::empty()), Clause::empty());
        let c = Cube::new([Var(3).neg()]).unwrap();
        assert_eq!(negate_cube(&c), Clause::unit(Var(3).pos()));
    }

    #[test]
    fn subcube_examples() {
        let b = Cube::new([Var(1).pos(), Var(2).neg()]).unwrap();
        assert!(is_subcube(&Cube::new([Var(1).pos()]).unwrap(), &b));
        assert!(!is_subcube(&Cube::new([Var(1).neg()]).unwrap(), &b));
        assert!(is_subcube(&Cube::empty(), &b));
    }

    #[test]
    fn prime_examples() {
        let mut vm = VarManager::new();
        let x1 = vm.fresh_state();
        let x2 = vm.fresh_state();
        let n1 = vm.next(x1).unwrap();
        let n2 = vm.next(x2).unwrap();
        let mut f = Cnf::new();
        f.add([x1.pos(), x2.neg()]);
        let mut g = Cnf::new();
        g.add([n1.pos(), n2.neg()]);
        assert_eq!(prime(&f, &vm).unwrap(), g);
        assert_eq!(prime(&Cnf::new(), &vm).unwrap(), Cnf::new());
        let mut f = Cnf::new();
        f.add([x1.pos()]);
        f.add([x1.neg(), x2.pos()]);
        let p = prime(&f, &vm).unwrap();
        assert_eq!(p.clauses()[0].lits(), &[n1.pos()]);
        assert_eq!(unprime(&p, &vm).unwrap(), f);
        let i = vm.fresh(VarGroup::Input);
        let mut bad = Cnf::new();
        bad.add([i.pos()]);
        assert_eq!(prime(&bad, &vm), Err(Unpaired(i)));
    }

    #[test]
    fn negation_examples() {
        let mut vm = VarManager::new();
        let _ = vm.fresh_n(VarGroup::State, 2);
        let f = Cnf::from_dimacs(&[&[1]]);
        let g = cnf_negate(&f, &mut vm);
        assert_eq!(models(&g, &vars(1)), vec![0]);
        assert_eq!(cnf_negate(&Cnf::new(), &mut vm), Cnf::falsum());
        let f = Cnf::from_dimacs(&[&[1], &[2]]);
        let g = cnf_negate(&f, &mut vm);
        assert_eq!(models(&g, &vars(2)), vec![0, 1, 2]);
    }

    #[test]
    fn negation_uses_fresh_temps_per_call() {
        let mut vm = VarManager::new();
        let _ = vm.fresh_n(VarGroup::State, 3);
        let f = Cnf::from_dimacs(&[&[1, 2], &[-2, 3]]);
        let a = negate_tracked(&f, &mut vm);
        let b = negate_tracked(&f, &mut vm);
        assert_eq!(a.temps.len(), 2);
        assert!(a.temps.iter().all(|t| !b.temps.contains(t)));
    }

    #[test]
    fn or_examples() {
        let mut vm = VarManager::new();
        let _ = vm.fresh_n(VarGroup::State, 2);
        let a = Cnf::from_dimacs(&[&[1]]);
        let b = Cnf::from_dimacs(&[&[2]]);
        let f = cnf_or(&a, &b, &mut vm);
        assert_eq!(models(&f, &vars(2)), vec![1, 2, 3]);
    }

    #[test]
    fn compress_examples() {
        let f = Cnf::from_dimacs(&[&[1], &[1, 2]]);
        assert_eq!(compress(&f, 100), Cnf::from_dimacs(&[&[1]]));
        let f = Cnf::from_dimacs(&[&[1, 2], &[-1, 2], &[2]]);
        let g = compress(&f, 100);
        assert_eq!(g, Cnf::from_dimacs(&[&[2]]));
        assert_eq!(models(&g, &vars(2)), models(&f, &vars(2)));
        let f = Cnf::from_dimacs(&[&[1], &[2]]);
        assert_eq!(compress(&f, 100), f);
    }

    #[test]
    fn compress_respects_budget() {
        let f = Cnf::from_dimacs(&[&[1], &[1, 2], &[1, 3]]);
        let g = compress(&f, 1);
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn substitute_simplifies() {
        let f = Cnf::from_dimacs(&[&[1, 2], &[-1, 3]]);
        let g = substitute(&f, &Cube::new([Var(1).pos()]).unwrap());
        assert_eq!(g, Cnf::from_dimacs(&[&[3]]));
    }
}
