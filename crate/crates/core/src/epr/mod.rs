//! Encoding of the existence of a winning region as a function-free
//! first-order problem over the two constants `top` and `bot`.
//!
//! A Boolean value `b` is represented by a domain element `e` with `p(e) = b`.
//! The winning region becomes a predicate `w` over the state arguments, each
//! control becomes a Skolem predicate `c_j` over state and input arguments, and
//! the transition relation appears on the left of an implication, so the
//! next-state arguments are universally quantified as well.

mod ground;
mod tptp;

use std::collections::BTreeSet;
use std::fmt;

use crate::game::{SafetySpec, Signal};

pub use ground::{ground_check, GroundVerdict, DEFAULT_ATOM_LIMIT};
pub use tptp::{parse_tptp, write_tptp, TptpError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Const {
    Top,
    Bot,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(Const),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(Const::Top) => f.write_str("top"),
            Term::Const(Const::Bot) => f.write_str("bot"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FoLit {
    pub positive: bool,
    pub atom: Atom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Axiom,
    /// `I ⇒ W`
    Init,
    /// `W ⇒ P`
    Safe,
    /// `W ∧ T ⇒ W'` and the definitions it uses.
    Trans,
}

impl Family {
    pub fn prefix(self) -> &'static str {
        match self {
            Family::Axiom => "p",
            Family::Init => "init",
            Family::Safe => "safe",
            Family::Trans => "trans",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoClause {
    pub name: String,
    pub family: Family,
    pub lits: Vec<FoLit>,
}

impl FoClause {
    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for l in &self.lits {
            for t in &l.atom.args {
                if let Term::Var(v) = t {
                    if seen.insert(v.clone()) {
                        out.push(v.clone());
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredKind {
    /// The value predicate `p`.
    Value,
    Region,
    /// Skolem predicate of a control.
    Control,
    /// Skolemized temporary of the clausification.
    Temp,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
    pub kind: PredKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EprProblem {
    pub name: String,
    pub sizes: (usize, usize, usize),
    pub predicates: Vec<Predicate>,
    /// Axioms, then the init, safe and transition families.
    pub clauses: Vec<FoClause>,
}

impl EprProblem {
    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn family(&self, f: Family) -> impl Iterator<Item = &FoClause> {
        self.clauses.iter().filter(move |c| c.family == f)
    }
}

pub fn kind_of(pred: &str) -> PredKind {
    match pred {
        "p" => PredKind::Value,
        "w" => PredKind::Region,
        _ if pred.starts_with("c_") => PredKind::Control,
        _ => PredKind::Temp,
    }
}

fn var(name: String) -> Term {
    Term::Var(name)
}

fn lit(positive: bool, pred: &str, args: Vec<Term>) -> FoLit {
    FoLit {
        positive,
        atom: Atom {
            pred: pred.to_string(),
            args,
        },
    }
}

struct Builder {
    clauses: Vec<FoClause>,
    counts: [usize; 4],
}

impl Builder {
    fn push(&mut self, family: Family, lits: Vec<FoLit>) {
        let k = family as usize;
        self.counts[k] += 1;
        let name = match family {
            Family::Axiom => unreachable!("axioms are fixed"),
            _ => format!("{}_{}", family.prefix(), self.counts[k]),
        };
        self.clauses.push(FoClause { name, family, lits });
    }
}

pub fn encode_epr(spec: &SafetySpec) -> EprProblem {
    let (nx, ni, nc) = (spec.num_state(), spec.num_inputs(), spec.num_controls());
    let xs: Vec<Term> = (0..nx).map(|k| var(format!("X{k}"))).collect();
    let is: Vec<Term> = (0..ni).map(|k| var(format!("I{k}"))).collect();
    let ys: Vec<Term> = (0..nx).map(|k| var(format!("Y{k}"))).collect();
    let xi: Vec<Term> = xs.iter().chain(&is).cloned().collect();
    let xiy: Vec<Term> = xi.iter().chain(&ys).cloned().collect();

    // Literal of a current-step signal; `None` for a constant.
    let signal = |s: Signal| -> Result<FoLit, bool> {
        match s {
            Signal::Const(b) => Err(b),
            Signal::Lit(l) => {
                let v = l.var();
                let mut out = if let Some(k) = spec.state.iter().position(|&x| x == v) {
                    lit(true, "p", vec![xs[k].clone()])
                } else if let Some(k) = spec.inputs.iter().position(|&x| x == v) {
                    lit(true, "p", vec![is[k].clone()])
                } else if let Some(k) = spec.controls.iter().position(|&x| x == v) {
                    lit(true, &format!("c_{}", k + 1), xi.clone())
                } else {
                    let k = spec.gates.iter().position(|g| g.out == v).expect("signal names a spec variable");
                    lit(true, &format!("g_{}", k + 1), xi.clone())
                };
                out.positive = l.sign();
                Ok(out)
            }
        }
    };

    let mut b = Builder {
        clauses: vec![
            FoClause {
                name: "p_top".into(),
                family: Family::Axiom,
                lits: vec![lit(true, "p", vec![Term::Const(Const::Top)])],
            },
            FoClause {
                name: "p_bot".into(),
                family: Family::Axiom,
                lits: vec![lit(false, "p", vec![Term::Const(Const::Bot)])],
            },
        ],
        counts: [0; 4],
    };

    // I(X) ⇒ W(X), with I the all-false state.
    let mut init: Vec<FoLit> = xs.iter().map(|x| lit(true, "p", vec![x.clone()])).collect();
    init.push(lit(true, "w", xs.clone()));
    b.push(Family::Init, init);

    // W(X) ⇒ P(X)
    for c in spec.safe.clauses() {
        let mut lits = vec![lit(false, "w", xs.clone())];
        for l in c.lits() {
            let k = spec.state.iter().position(|&x| x == l.var()).expect("safe set over state");
            lits.push(lit(l.sign(), "p", vec![xs[k].clone()]));
        }
        b.push(Family::Safe, lits);
    }

    // W(X) ∧ T(X, I, C(X,I), Y) ⇒ W(Y). ¬T is the disjunction of the
    // mismatches d_j between Y_j and the next-state function of bit j.
    let mut main = vec![lit(false, "w", xs.clone())];
    for j in 0..nx {
        main.push(lit(true, &format!("d_{}", j + 1), xiy.clone()));
    }
    main.push(lit(true, "w", ys.clone()));
    b.push(Family::Trans, main);
    for (j, f) in spec.next_fns.iter().enumerate() {
        let d = format!("d_{}", j + 1);
        let y = |pos: bool| lit(pos, "p", vec![ys[j].clone()]);
        match signal(*f) {
            // d_j → (y_j ⊕ f_j)
            Ok(fl) => {
                let mut nf = fl.clone();
                nf.positive = !nf.positive;
                b.push(Family::Trans, vec![lit(false, &d, xiy.clone()), y(true), fl]);
                b.push(Family::Trans, vec![lit(false, &d, xiy.clone()), y(false), nf]);
            }
            Err(v) => b.push(Family::Trans, vec![lit(false, &d, xiy.clone()), y(!v)]),
        }
    }
    for (k, g) in spec.gates.iter().enumerate() {
        let name = format!("g_{}", k + 1);
        let out = |pos: bool| lit(pos, &name, xi.clone());
        let neg = |l: &FoLit| FoLit {
            positive: !l.positive,
            atom: l.atom.clone(),
        };
        // g ↔ a ∧ b, with constants folded.
        let ins: Vec<Result<FoLit, bool>> = vec![signal(g.a), signal(g.b)];
        if ins.iter().any(|s| matches!(s, Err(false))) {
            b.push(Family::Trans, vec![out(false)]);
            continue;
        }
        let lits: Vec<FoLit> = ins.into_iter().filter_map(Result::ok).collect();
        for l in &lits {
            b.push(Family::Trans, vec![out(false), l.clone()]);
        }
        let mut back = vec![out(true)];
        back.extend(lits.iter().map(neg));
        b.push(Family::Trans, back);
    }

    let mut predicates = vec![
        Predicate {
            name: "p".into(),
            arity: 1,
            kind: PredKind::Value,
        },
        Predicate {
            name: "w".into(),
            arity: nx,
            kind: PredKind::Region,
        },
    ];
    for k in 0..nc {
        predicates.push(Predicate {
            name: format!("c_{}", k + 1),
            arity: nx + ni,
            kind: PredKind::Control,
        });
    }
    for j in 0..nx {
        predicates.push(Predicate {
            name: format!("d_{}", j + 1),
            arity: 2 * nx + ni,
            kind: PredKind::Temp,
        });
    }
    for k in 0..spec.gates.len() {
        predicates.push(Predicate {
            name: format!("g_{}", k + 1),
            arity: nx + ni,
            kind: PredKind::Temp,
        });
    }
    EprProblem {
        name: spec.name.clone(),
        sizes: (nx, ni, nc),
        predicates,
        clauses: b.clauses,
    }
}
