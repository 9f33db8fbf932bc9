use std::collections::HashMap;

use super::{Const, EprProblem, Term};
use crate::formula::{Lit, Var};
use crate::sat::{SatError, SolverFactory};

pub const DEFAULT_ATOM_LIMIT: u64 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroundVerdict {
    Realizable,
    Unrealizable,
    /// The number of possible ground atoms exceeds the limit.
    TooLarge { atoms: u64 },
}

/// Possible ground atoms: `Σ 2^arity`, saturating.
fn atom_count(p: &EprProblem) -> u64 {
    p.predicates
        .iter()
        .map(|q| 1u64.checked_shl(q.arity as u32).unwrap_or(u64::MAX))
        .fold(0u64, |a, b| a.saturating_add(b))
}

/// Instantiates every clause over `{top, bot}` and decides the result with
/// the SAT solver. The Herbrand universe has exactly these two elements, so
/// the answer is exact.
pub fn ground_check(p: &EprProblem, limit: u64, factory: &SolverFactory) -> Result<GroundVerdict, SatError> {
    let atoms = atom_count(p);
    if atoms > limit {
        return Ok(GroundVerdict::TooLarge { atoms });
    }
    let instances: u64 = p
        .clauses
        .iter()
        .map(|c| 1u64.checked_shl(c.vars().len() as u32).unwrap_or(u64::MAX))
        .fold(0u64, |a, b| a.saturating_add(b));
    if instances > limit.saturating_mul(8) {
        return Ok(GroundVerdict::TooLarge { atoms });
    }
    let mut ids: HashMap<(String, Vec<bool>), Var> = HashMap::new();
    let mut s = factory.session()?;
    let mut lits = Vec::new();
    for c in &p.clauses {
        let vars = c.vars();
        let index: HashMap<&str, usize> = vars.iter().enumerate().map(|(k, v)| (v.as_str(), k)).collect();
        for a in 0..1u64 << vars.len() {
            lits.clear();
            for l in &c.lits {
                let args: Vec<bool> = l
                    .atom
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Const(k) => *k == Const::Top,
                        Term::Var(v) => a >> index[v.as_str()] & 1 == 1,
                    })
                    .collect();
                let next = Var(ids.len() as u32 + 1);
                let v = *ids.entry((l.atom.pred.clone(), args)).or_insert(next);
                lits.push(Lit::new(v, l.positive));
            }
            s.add_lits(&lits)?;
        }
    }
    Ok(if s.solve(&[])? {
        GroundVerdict::Realizable
    } else {
        GroundVerdict::Unrealizable
    })
}
