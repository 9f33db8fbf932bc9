//! ASCII AIGER (`aag`) circuits and their lowering to safety games.
//!
//! Inputs whose symbol starts with `controllable_` belong to the protagonist;
//! all others are uncontrollable. The single output is the error signal.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::formula::{Cnf, Lit, Var, VarGroup, VarManager};
use crate::game::{AndGate, SafetySpec, Signal, SpecError};

pub const CONTROLLABLE_PREFIX: &str = "controllable_";

/// Largest CNF accepted when expanding a latch-only error cone into the safe set.
const MAX_SAFE_CLAUSES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AigInput {
    pub lit: u32,
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AigLatch {
    pub lit: u32,
    pub next: u32,
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AigOutput {
    pub lit: u32,
    pub name: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AigAnd {
    pub lhs: u32,
    pub rhs0: u32,
    pub rhs1: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AigerCircuit {
    pub max_index: u32,
    pub inputs: Vec<AigInput>,
    pub latches: Vec<AigLatch>,
    pub outputs: Vec<AigOutput>,
    pub ands: Vec<AigAnd>,
    pub comments: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputPartition {
    pub controllable: Vec<u32>,
    pub uncontrollable: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AigerError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("binary AIGER ('aig') is not supported; convert to ASCII 'aag' first")]
    Binary,
    #[error("expected exactly one output, found {0}")]
    OutputCount(usize),
    #[error("combinational loop through literal {0}")]
    Loop(u32),
    #[error("undefined literal {0}")]
    Dangling(u32),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> AigerError {
    AigerError::Parse {
        line,
        msg: msg.into(),
    }
}

fn numbers(line: &str, n: usize, lineno: usize, what: &str) -> Result<Vec<u32>, AigerError> {
    let words: Vec<&str> = line.split_whitespace().collect();
    if words.len() != n {
        return Err(parse_err(lineno, format!("{what}: expected {n} numbers, found '{line}'")));
    }
    words
        .iter()
        .map(|w| w.parse().map_err(|_| parse_err(lineno, format!("{what}: bad number '{w}'"))))
        .collect()
}

pub fn parse_aag(text: &str) -> Result<AigerCircuit, AigerError> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let words: Vec<&str> = header.split_whitespace().collect();
    if words.first() == Some(&"aig") {
        return Err(AigerError::Binary);
    }
    if words.first() != Some(&"aag") || words.len() != 6 {
        return Err(parse_err(1, format!("malformed header '{header}'")));
    }
    let h = numbers(&words[1..].join(" "), 5, 1, "header")?;
    let (m, ni, nl, no, na) = (h[0], h[1] as usize, h[2] as usize, h[3] as usize, h[4] as usize);
    if (ni + nl + na) as u64 > m as u64 {
        return Err(parse_err(1, "M is smaller than I + L + A"));
    }
    let mut c = AigerCircuit {
        max_index: m,
        ..Default::default()
    };
    let mut defined: HashSet<u32> = HashSet::new();
    let mut take = |what: &str| -> Result<(usize, String), AigerError> {
        lines
            .next()
            .map(|(k, l)| (k, l.trim().to_string()))
            .ok_or_else(|| parse_err(0, format!("unexpected end of input while reading {what}")))
    };
    let mut last_line = 1;
    let define = |lit: u32, lineno: usize, defined: &mut HashSet<u32>| -> Result<(), AigerError> {
        if lit % 2 == 1 {
            return Err(parse_err(lineno, format!("odd literal {lit} cannot be defined")));
        }
        if lit < 2 || lit / 2 > m {
            return Err(parse_err(lineno, format!("literal {lit} out of range")));
        }
        if !defined.insert(lit / 2) {
            return Err(parse_err(lineno, format!("literal {lit} defined twice")));
        }
        Ok(())
    };
    let fix_line = |e: AigerError, at: usize| match e {
        AigerError::Parse { line: 0, msg } => parse_err(at, msg),
        other => other,
    };
    for _ in 0..ni {
        let (k, l) = take("inputs").map_err(|e| fix_line(e, last_line + 1))?;
        last_line = k;
        let v = numbers(&l, 1, k, "input")?;
        define(v[0], k, &mut defined)?;
        c.inputs.push(AigInput {
            lit: v[0],
            name: None,
        });
    }
    for _ in 0..nl {
        let (k, l) = take("latches").map_err(|e| fix_line(e, last_line + 1))?;
        last_line = k;
        let count = l.split_whitespace().count();
        if count == 3 {
            let v = numbers(&l, 3, k, "latch")?;
            if v[2] != 0 {
                return Err(parse_err(k, "only zero-initialized latches are supported"));
            }
        } else if count != 2 {
            return Err(parse_err(k, format!("latch: expected 2 numbers, found '{l}'")));
        }
        let v: Vec<u32> = numbers(&l.split_whitespace().take(2).collect::<Vec<_>>().join(" "), 2, k, "latch")?;
        define(v[0], k, &mut defined)?;
        c.latches.push(AigLatch {
            lit: v[0],
            next: v[1],
            name: None,
        });
    }
    for _ in 0..no {
        let (k, l) = take("outputs").map_err(|e| fix_line(e, last_line + 1))?;
        last_line = k;
        let v = numbers(&l, 1, k, "output")?;
        c.outputs.push(AigOutput {
            lit: v[0],
            name: None,
        });
    }
    for _ in 0..na {
        let (k, l) = take("and gates").map_err(|e| fix_line(e, last_line + 1))?;
        last_line = k;
        let v = numbers(&l, 3, k, "and gate")?;
        define(v[0], k, &mut defined)?;
        if v[1] >= v[0] || v[2] >= v[0] {
            return Err(parse_err(k, format!("and gate {} is not topologically ordered", v[0])));
        }
        c.ands.push(AigAnd {
            lhs: v[0],
            rhs0: v[1],
            rhs1: v[2],
        });
    }
    let check_ref = |lit: u32, k: usize| -> Result<(), AigerError> {
        if lit >= 2 && !defined.contains(&(lit / 2)) {
            return Err(parse_err(k, format!("dangling reference to literal {lit}")));
        }
        Ok(())
    };
    for l in &c.latches {
        check_ref(l.next, 0).map_err(|e| fix_line(e, 1 + ni + 1))?;
    }
    for o in &c.outputs {
        check_ref(o.lit, 0).map_err(|e| fix_line(e, 1 + ni + nl + 1))?;
    }
    for a in &c.ands {
        check_ref(a.rhs0, 0).map_err(|e| fix_line(e, 1 + ni + nl + no + 1))?;
        check_ref(a.rhs1, 0).map_err(|e| fix_line(e, 1 + ni + nl + no + 1))?;
    }
    let mut in_comments = false;
    for (k, l) in lines {
        if in_comments {
            c.comments.push(l.to_string());
            continue;
        }
        let t = l.trim();
        if t.is_empty() {
            continue;
        }
        if t == "c" {
            in_comments = true;
            continue;
        }
        let (kind, rest) = t.split_at(1);
        let (pos, name) = rest
            .split_once(' ')
            .ok_or_else(|| parse_err(k, format!("malformed symbol line '{t}'")))?;
        let pos: usize = pos
            .parse()
            .map_err(|_| parse_err(k, format!("malformed symbol line '{t}'")))?;
        let slot = match kind {
            "i" => c.inputs.get_mut(pos).map(|x| &mut x.name),
            "l" => c.latches.get_mut(pos).map(|x| &mut x.name),
            "o" => c.outputs.get_mut(pos).map(|x| &mut x.name),
            _ => return Err(parse_err(k, format!("unknown symbol kind in '{t}'"))),
        };
        *slot.ok_or_else(|| parse_err(k, format!("symbol position {pos} out of range")))? =
            Some(name.to_string());
    }
    if c.outputs.is_empty() {
        return Err(parse_err(1, "missing output"));
    }
    Ok(c)
}

pub fn write_aag(c: &AigerCircuit) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "aag {} {} {} {} {}",
        c.max_index,
        c.inputs.len(),
        c.latches.len(),
        c.outputs.len(),
        c.ands.len()
    );
    for i in &c.inputs {
        let _ = writeln!(out, "{}", i.lit);
    }
    for l in &c.latches {
        let _ = writeln!(out, "{} {}", l.lit, l.next);
    }
    for o in &c.outputs {
        let _ = writeln!(out, "{}", o.lit);
    }
    for a in &c.ands {
        let _ = writeln!(out, "{} {} {}", a.lhs, a.rhs0, a.rhs1);
    }
    let names = [
        ("i", c.inputs.iter().map(|x| &x.name).collect::<Vec<_>>()),
        ("l", c.latches.iter().map(|x| &x.name).collect()),
        ("o", c.outputs.iter().map(|x| &x.name).collect()),
    ];
    for (tag, list) in names {
        for (k, n) in list.iter().enumerate() {
            if let Some(n) = n {
                let _ = writeln!(out, "{tag}{k} {n}");
            }
        }
    }
    if !c.comments.is_empty() {
        out.push_str("c\n");
        for line in &c.comments {
            let _ = writeln!(out, "{line}");
        }
    }
    out
}

pub fn partition_inputs(c: &AigerCircuit) -> InputPartition {
    let (ctrl, unctrl): (Vec<&AigInput>, Vec<&AigInput>) = c
        .inputs
        .iter()
        .partition(|i| i.name.as_deref().is_some_and(|n| n.starts_with(CONTROLLABLE_PREFIX)));
    InputPartition {
        controllable: ctrl.iter().map(|i| i.lit).collect(),
        uncontrollable: unctrl.iter().map(|i| i.lit).collect(),
    }
}

/// CNF of an AIG literal over latch variables, by distribution. `None` once the
/// result would exceed the clause limit.
struct ConeExpander<'a> {
    ands: HashMap<u32, AigAnd>,
    var_of: &'a HashMap<u32, Var>,
    memo: HashMap<u32, Option<Vec<Vec<Lit>>>>,
}

impl ConeExpander<'_> {
    fn cnf(&mut self, lit: u32) -> Option<Vec<Vec<Lit>>> {
        if let Some(r) = self.memo.get(&lit) {
            return r.clone();
        }
        let r = self.compute(lit);
        self.memo.insert(lit, r.clone());
        r
    }

    fn compute(&mut self, lit: u32) -> Option<Vec<Vec<Lit>>> {
        match lit {
            0 => return Some(vec![vec![]]),
            1 => return Some(vec![]),
            _ => {}
        }
        let neg = lit % 2 == 1;
        let Some(g) = self.ands.get(&(lit & !1)).copied() else {
            let v = self.var_of[&(lit & !1)];
            return Some(vec![vec![v.lit(!neg)]]);
        };
        if !neg {
            let mut a = self.cnf(g.rhs0)?;
            a.extend(self.cnf(g.rhs1)?);
            return (a.len() <= MAX_SAFE_CLAUSES).then_some(a);
        }
        let a = self.cnf(g.rhs0 ^ 1)?;
        let b = self.cnf(g.rhs1 ^ 1)?;
        if a.len().saturating_mul(b.len()) > MAX_SAFE_CLAUSES {
            return None;
        }
        let mut out = Vec::with_capacity(a.len() * b.len());
        for x in &a {
            for y in &b {
                let mut c: Vec<Lit> = x.iter().chain(y).copied().collect();
                c.sort_unstable();
                c.dedup();
                if !c.windows(2).any(|w| w[0] == !w[1]) {
                    out.push(c);
                }
            }
        }
        Some(out)
    }
}

/// Lowers a circuit to a safety game. Latches become state variables
/// (initially false); the output is the error signal. When the output reads
/// inputs, or its latch-only expansion is too large, a sticky error latch
/// `err' = err ∨ output` is added and the safe set becomes `¬err`.
pub fn to_safety_spec(c: &AigerCircuit, name: &str) -> Result<SafetySpec, AigerError> {
    if c.outputs.len() != 1 {
        return Err(AigerError::OutputCount(c.outputs.len()));
    }
    let ands: HashMap<u32, AigAnd> = c.ands.iter().map(|a| (a.lhs, *a)).collect();
    let order = topological(c, &ands)?;
    let part = partition_inputs(c);
    let controllable: HashSet<u32> = part.controllable.iter().copied().collect();
    let input_lits: HashSet<u32> = c.inputs.iter().map(|i| i.lit).collect();
    let error = c.outputs[0].lit;
    let reads_inputs = cone(error, &ands).iter().any(|l| input_lits.contains(l));

    let mut vm = VarManager::new();
    let mut var_of: HashMap<u32, Var> = HashMap::new();
    let mut state = Vec::new();
    for l in &c.latches {
        let x = vm.fresh_state();
        var_of.insert(l.lit, x);
        state.push(x);
    }
    let mut safe = None;
    if !reads_inputs {
        let mut ex = ConeExpander {
            ands: ands.clone(),
            var_of: &var_of,
            memo: HashMap::new(),
        };
        safe = ex.cnf(error ^ 1);
    }
    let err_latch = safe.is_none().then(|| vm.fresh_state());
    let mut inputs = Vec::new();
    let mut controls = Vec::new();
    for i in &c.inputs {
        let v = if controllable.contains(&i.lit) {
            let v = vm.fresh(VarGroup::Control);
            controls.push(v);
            v
        } else {
            let v = vm.fresh(VarGroup::Input);
            inputs.push(v);
            v
        };
        var_of.insert(i.lit, v);
    }
    let mut gates = Vec::new();
    for lhs in order {
        let g = ands[&lhs];
        let out = vm.fresh(VarGroup::Temp);
        var_of.insert(lhs, out);
        gates.push(AndGate {
            out,
            a: signal(g.rhs0, &var_of),
            b: signal(g.rhs1, &var_of),
        });
    }
    let mut next_fns: Vec<Signal> = c.latches.iter().map(|l| signal(l.next, &var_of)).collect();
    let mut latch_origin: Vec<Option<u32>> = c.latches.iter().map(|l| Some(l.lit)).collect();
    let safe = match (safe, err_latch) {
        (Some(clauses), _) => {
            let mut f = Cnf::new();
            for cl in clauses {
                f.add(cl);
            }
            f
        }
        (None, Some(e)) => {
            // err' = ¬(¬err ∧ ¬output)
            let g = vm.fresh(VarGroup::Temp);
            gates.push(AndGate {
                out: g,
                a: Signal::Lit(e.neg()),
                b: !signal(error, &var_of),
            });
            state.push(e);
            next_fns.push(Signal::Lit(g.neg()));
            latch_origin.push(None);
            let mut f = Cnf::new();
            f.add([e.neg()]);
            f
        }
        (None, None) => unreachable!(),
    };
    let mut spec = SafetySpec::new(name, vm, state, inputs, controls, gates, next_fns, safe)?;
    spec.latch_origin = latch_origin;
    Ok(spec)
}

fn signal(lit: u32, var_of: &HashMap<u32, Var>) -> Signal {
    match lit {
        0 => Signal::Const(false),
        1 => Signal::Const(true),
        _ => Signal::Lit(var_of[&(lit & !1)].lit(lit.is_multiple_of(2))),
    }
}

/// Even literals of all nodes in the cone of `lit`.
fn cone(lit: u32, ands: &HashMap<u32, AigAnd>) -> HashSet<u32> {
    let mut seen = HashSet::new();
    let mut stack = vec![lit & !1];
    while let Some(l) = stack.pop() {
        if l < 2 || !seen.insert(l) {
            continue;
        }
        if let Some(g) = ands.get(&l) {
            stack.push(g.rhs0 & !1);
            stack.push(g.rhs1 & !1);
        }
    }
    seen
}

/// AND gates in dependency order; rejects loops and undefined references.
fn topological(c: &AigerCircuit, ands: &HashMap<u32, AigAnd>) -> Result<Vec<u32>, AigerError> {
    let leaves: HashSet<u32> = c
        .inputs
        .iter()
        .map(|i| i.lit)
        .chain(c.latches.iter().map(|l| l.lit))
        .collect();
    let mut state: HashMap<u32, u8> = HashMap::new();
    let mut order = Vec::new();
    for root in c.ands.iter().map(|a| a.lhs) {
        let mut stack = vec![(root, false)];
        while let Some((l, done)) = stack.pop() {
            if done {
                state.insert(l, 2);
                order.push(l);
                continue;
            }
            match state.get(&l) {
                Some(2) => continue,
                Some(1) => return Err(AigerError::Loop(l)),
                _ => {}
            }
            state.insert(l, 1);
            stack.push((l, true));
            let g = ands[&l];
            for r in [g.rhs0 & !1, g.rhs1 & !1] {
                if r < 2 || leaves.contains(&r) {
                    continue;
                }
                if !ands.contains_key(&r) {
                    return Err(AigerError::Dangling(r));
                }
                match state.get(&r) {
                    Some(2) => {}
                    Some(1) => return Err(AigerError::Loop(r)),
                    _ => stack.push((r, false)),
                }
            }
        }
    }
    for r in c.latches.iter().map(|l| l.next).chain(c.outputs.iter().map(|o| o.lit)) {
        let r = r & !1;
        if r >= 2 && !leaves.contains(&r) && !ands.contains_key(&r) {
            return Err(AigerError::Dangling(r));
        }
    }
    Ok(order)
}
