//! Brute-force oracles shared by the property and acceptance tests.
#![allow(dead_code)]

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use safesynth::formula::{cnf_negate, compress, Cnf, Lit, Var, VarGroup, VarManager};
use safesynth::qesolve::{solve_ea, EAProblem, EaConfig, EaOutcome};

pub fn bit(m: u64, k: usize) -> bool {
    m >> k & 1 == 1
}

pub fn random_clause(rng: &mut SmallRng, vars: &[Var], max_len: usize) -> Vec<Lit> {
    let k = rng.gen_range(1..=max_len);
    (0..k).map(|_| vars[rng.gen_range(0..vars.len())].lit(rng.gen())).collect()
}

pub fn random_cnf(rng: &mut SmallRng, vars: &[Var], max_clauses: usize, max_len: usize) -> Cnf {
    let mut f = Cnf::new();
    for _ in 0..rng.gen_range(0..=max_clauses) {
        f.add(random_clause(rng, vars, max_len));
    }
    f
}

/// Whether some extension of `m` (over `over`) to the other variables of `f` satisfies `f`.
pub fn extends(f: &Cnf, over: &[Var], m: u64) -> bool {
    let extra: Vec<Var> = f.vars().into_iter().filter(|v| !over.contains(v)).collect();
    (0..1u64 << extra.len()).any(|e| {
        f.eval(|v| match over.iter().position(|&o| o == v) {
            Some(k) => bit(m, k),
            None => bit(e, extra.iter().position(|&o| o == v).unwrap()),
        })
    })
}

/// `cnf_negate(f)` projected onto the variables of `f` is `¬f`.
pub fn check_negation(seed: u64, cases: usize) -> Result<(), String> {
    let mut rng = SmallRng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.gen_range(1..=10);
        let mut vm = VarManager::new();
        let vars = vm.fresh_n(VarGroup::State, n);
        let f = random_cnf(&mut rng, &vars, 6, 4);
        let g = cnf_negate(&f, &mut vm);
        for m in 0..1u64 << n {
            let fv = f.eval(|v| bit(m, vars.iter().position(|&o| o == v).unwrap()));
            if extends(&g, &vars, m) == fv {
                return Err(format!("case {case}: f = {f}, g = {g}, m = {m:b}"));
            }
        }
    }
    Ok(())
}

/// `compress` keeps a subset of the clauses and the same models.
pub fn check_compress(seed: u64, cases: usize) -> Result<(), String> {
    let mut rng = SmallRng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.gen_range(1..=12);
        let vars: Vec<Var> = (1..=n as u32).map(Var).collect();
        let f = random_cnf(&mut rng, &vars, 10, 4);
        let g = compress(&f, 1000);
        if !g.clauses().iter().all(|c| f.clauses().contains(c)) {
            return Err(format!("case {case}: {g} is not a subset of {f}"));
        }
        for m in 0..1u64 << n {
            let val = |v: Var| bit(m, v.index() - 1);
            if f.eval(val) != g.eval(val) {
                return Err(format!("case {case}: f = {f}, g = {g}, m = {m:b}"));
            }
        }
    }
    Ok(())
}

/// A random problem with an optional inner block and one functional gate.
struct Instance {
    e: Vec<Var>,
    a: Vec<Var>,
    c: Vec<Var>,
    gate: Option<(Var, Lit, Lit)>,
    matrix: Cnf,
}

impl Instance {
    fn eval(&self, e: u64, a: u64, c: u64) -> bool {
        let base = |v: Var| -> bool {
            if let Some(k) = self.e.iter().position(|&x| x == v) {
                bit(e, k)
            } else if let Some(k) = self.a.iter().position(|&x| x == v) {
                bit(a, k)
            } else {
                bit(c, self.c.iter().position(|&x| x == v).unwrap())
            }
        };
        self.matrix.eval(|v| match self.gate {
            Some((g, l, r)) if g == v => l.eval(base(l.var())) && r.eval(base(r.var())),
            _ => base(v),
        })
    }

    fn truth(&self, e: u64) -> bool {
        (0..1u64 << self.a.len()).all(|a| (0..1u64 << self.c.len()).any(|c| self.eval(e, a, c)))
    }
}

/// `solve_ea` against enumeration; returns the number of satisfiable cases.
pub fn check_solve_ea(seed: u64, cases: usize) -> Result<usize, String> {
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut sat_cases = 0;
    for case in 0..cases {
        let ne = rng.gen_range(1..=5);
        let na = rng.gen_range(1..=5);
        let nc = if case % 3 == 0 { rng.gen_range(1..=2) } else { 0 };
        let mut vm = VarManager::new();
        let e = vm.fresh_n(VarGroup::TemplateParam, ne);
        let a = vm.fresh_n(VarGroup::Input, na);
        let c = vm.fresh_n(VarGroup::Control, nc);
        let mut base: Vec<Var> = e.iter().chain(&a).chain(&c).copied().collect();
        let gate = if rng.gen_bool(0.5) {
            let g = vm.fresh(VarGroup::Temp);
            let l = base[rng.gen_range(0..base.len())].lit(rng.gen());
            let r = base[rng.gen_range(0..base.len())].lit(rng.gen());
            base.push(g);
            Some((g, l, r))
        } else {
            None
        };
        let matrix = random_cnf(&mut rng, &base, 7, 3);
        let mut defs = Cnf::new();
        if let Some((g, l, r)) = gate {
            defs.add([g.neg(), l]);
            defs.add([g.neg(), r]);
            defs.add([g.pos(), !l, !r]);
        }
        let inst = Instance {
            e: e.clone(),
            a: a.clone(),
            c: c.clone(),
            gate,
            matrix: matrix.clone(),
        };
        let p = EAProblem::new(e.clone(), a, matrix, &mut vm).with_defs(defs).with_inner(c);
        let expected = (0..1u64 << ne).any(|m| inst.truth(m));
        match solve_ea(&p, &EaConfig::default()).map_err(|err| format!("case {case}: {err}"))? {
            EaOutcome::Sat(w) => {
                if !expected {
                    return Err(format!("case {case}: spurious witness"));
                }
                let m = e
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| w.contains(v.pos()))
                    .fold(0u64, |acc, (k, _)| acc | 1 << k);
                if !inst.truth(m) {
                    return Err(format!("case {case}: witness {w} is wrong"));
                }
                sat_cases += 1;
            }
            EaOutcome::Unsat if expected => return Err(format!("case {case}: missed witness")),
            EaOutcome::Unsat => {}
        }
    }
    Ok(sat_cases)
}
