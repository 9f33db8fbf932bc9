//! Parametrized benchmark circuits and random small games.

use std::collections::HashMap;

use rand::Rng;

use crate::aiger::{to_safety_spec, AigAnd, AigInput, AigLatch, AigOutput, AigerCircuit, CONTROLLABLE_PREFIX};
use crate::formula::{Cnf, VarGroup, VarManager};
use crate::game::{AndGate, SafetySpec, Signal};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Constant propagation and structural hashing on every AND gate.
    Optimized,
    /// Every requested gate is emitted as-is.
    Plain,
}

/// Incremental AIGER construction. Latch next-state functions are set after
/// the latch is created.
pub struct AigBuilder {
    optimize: bool,
    next_index: u32,
    inputs: Vec<AigInput>,
    latches: Vec<AigLatch>,
    outputs: Vec<AigOutput>,
    ands: Vec<AigAnd>,
    strash: HashMap<(u32, u32), u32>,
}

impl AigBuilder {
    pub fn new(variant: Variant) -> AigBuilder {
        AigBuilder {
            optimize: variant == Variant::Optimized,
            next_index: 1,
            inputs: Vec::new(),
            latches: Vec::new(),
            outputs: Vec::new(),
            ands: Vec::new(),
            strash: HashMap::new(),
        }
    }

    fn fresh(&mut self) -> u32 {
        self.next_index += 1;
        2 * (self.next_index - 1)
    }

    pub fn input(&mut self, name: impl Into<String>) -> u32 {
        let lit = self.fresh();
        self.inputs.push(AigInput {
            lit,
            name: Some(name.into()),
        });
        lit
    }

    pub fn control(&mut self, name: &str) -> u32 {
        self.input(format!("{CONTROLLABLE_PREFIX}{name}"))
    }

    /// A zero-initialized latch whose next function is still unset.
    pub fn latch(&mut self, name: impl Into<String>) -> u32 {
        let lit = self.fresh();
        self.latches.push(AigLatch {
            lit,
            next: 0,
            name: Some(name.into()),
        });
        lit
    }

    pub fn set_next(&mut self, latch: u32, next: u32) {
        let l = self.latches.iter_mut().find(|l| l.lit == latch).expect("known latch");
        l.next = next;
    }

    pub fn output(&mut self, lit: u32, name: impl Into<String>) {
        self.outputs.push(AigOutput {
            lit,
            name: Some(name.into()),
        });
    }

    pub fn and(&mut self, a: u32, b: u32) -> u32 {
        let (a, b) = (a.min(b), a.max(b));
        if self.optimize {
            if a == 0 || a == b ^ 1 {
                return 0;
            }
            if a == 1 || a == b {
                return b;
            }
            if let Some(&g) = self.strash.get(&(a, b)) {
                return g;
            }
        }
        let lhs = self.fresh();
        self.ands.push(AigAnd { lhs, rhs0: b, rhs1: a });
        self.strash.insert((a, b), lhs);
        lhs
    }

    pub fn or(&mut self, a: u32, b: u32) -> u32 {
        self.and(a ^ 1, b ^ 1) ^ 1
    }

    pub fn xor(&mut self, a: u32, b: u32) -> u32 {
        let both = self.and(a, b);
        let neither = self.and(a ^ 1, b ^ 1);
        self.and(both ^ 1, neither ^ 1)
    }

    /// `s ? a : b`
    pub fn mux(&mut self, s: u32, a: u32, b: u32) -> u32 {
        let x = self.and(s, a);
        let y = self.and(s ^ 1, b);
        self.or(x, y)
    }

    pub fn and_all(&mut self, lits: &[u32]) -> u32 {
        lits.iter().fold(1, |acc, &l| self.and(acc, l))
    }

    pub fn or_all(&mut self, lits: &[u32]) -> u32 {
        lits.iter().fold(0, |acc, &l| self.or(acc, l))
    }

    /// Bitwise inequality of two equal-width words.
    pub fn differs(&mut self, a: &[u32], b: &[u32]) -> u32 {
        let diffs: Vec<u32> = a.iter().zip(b).map(|(&x, &y)| self.xor(x, y)).collect();
        self.or_all(&diffs)
    }

    /// Ripple-carry sum, truncated to the width of `a`.
    pub fn add(&mut self, a: &[u32], b: &[u32]) -> Vec<u32> {
        let mut carry = 0;
        let mut out = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            let t = self.xor(x, y);
            out.push(self.xor(t, carry));
            let g = self.and(x, y);
            let p = self.and(t, carry);
            carry = self.or(g, p);
        }
        out
    }

    /// Shift-and-add product of width `a.len() + b.len()`.
    pub fn mul(&mut self, a: &[u32], b: &[u32]) -> Vec<u32> {
        let width = a.len() + b.len();
        let mut acc = vec![0; width];
        for (k, &y) in b.iter().enumerate() {
            let mut row = vec![0; width];
            for (j, &x) in a.iter().enumerate() {
                row[j + k] = self.and(x, y);
            }
            acc = self.add(&acc, &row);
        }
        acc
    }

    pub fn finish(self, comments: Vec<String>) -> AigerCircuit {
        AigerCircuit {
            max_index: self.next_index - 1,
            inputs: self.inputs,
            latches: self.latches,
            outputs: self.outputs,
            ands: self.ands,
            comments,
        }
    }
}

fn counter(bits: usize, variant: Variant, connect_reset: bool) -> AigerCircuit {
    assert!((1..=30).contains(&bits), "counter width out of range");
    let mut b = AigBuilder::new(variant);
    let inc = b.input("inc");
    let reset = b.control("reset");
    let count: Vec<u32> = (0..bits).map(|k| b.latch(format!("count{k}"))).collect();
    let err = b.latch("err");
    let zeros: Vec<u32> = count.iter().map(|&l| l ^ 1).collect();
    let at_zero = b.and_all(&zeros);
    let hold = if connect_reset { b.and(reset, at_zero) } else { 0 };
    let full = b.and_all(&count);
    let mut carry = inc;
    for &l in &count {
        let sum = b.xor(l, carry);
        carry = b.and(l, carry);
        let next = b.and(hold ^ 1, sum);
        b.set_next(l, next);
    }
    let bad = b.or(err, full);
    b.set_next(err, bad);
    b.output(bad, "error");
    let kind = if connect_reset { "cnt" } else { "unreal" };
    b.finish(vec![format!("{kind}{bits}")])
}

/// Up-counter that must not reach all-ones. The controllable `reset` clears
/// it, but only while the counter reads zero; `inc` is uncontrollable.
pub fn gen_cnt(bits: usize, variant: Variant) -> AigerCircuit {
    counter(bits, variant, true)
}

/// The counter with its reset input left unconnected.
pub fn gen_unreal(bits: usize) -> AigerCircuit {
    counter(bits, Variant::Optimized, false)
}

/// Rotating register of `bits` bits, reseeded with a single one whenever it
/// is empty. The rotation amount has one controllable bit (the lowest) and
/// uncontrollable higher bits; no one may reach the top position. With
/// `controllable` false the lowest bit is uncontrollable too, which makes the
/// game unrealizable.
pub fn gen_bs_variant(bits: usize, controllable: bool) -> AigerCircuit {
    assert!(bits >= 4 && bits.is_power_of_two(), "bs width must be a power of two ≥ 4");
    let log = bits.trailing_zeros() as usize;
    let mut b = AigBuilder::new(Variant::Optimized);
    let mut amount = Vec::with_capacity(log);
    amount.push(if controllable { b.control("shift0") } else { b.input("shift0") });
    for k in 1..log {
        amount.push(b.input(format!("shift{k}")));
    }
    let reg: Vec<u32> = (0..bits).map(|k| b.latch(format!("r{k}"))).collect();
    let err = b.latch("err");
    let mut word = reg.clone();
    for (k, &s) in amount.iter().enumerate() {
        let d = 1 << k;
        word = (0..bits).map(|j| b.mux(s, word[(j + bits - d) % bits], word[j])).collect();
    }
    let zeros: Vec<u32> = reg.iter().map(|&l| l ^ 1).collect();
    let empty = b.and_all(&zeros);
    word[0] = b.or(word[0], empty);
    for (&l, &n) in reg.iter().zip(&word) {
        b.set_next(l, n);
    }
    let bad = b.or(err, reg[bits - 1]);
    b.set_next(err, bad);
    b.output(bad, "error");
    let tag = if controllable { "bs" } else { "bs-unreal" };
    b.finish(vec![format!("{tag}{bits}")])
}

pub fn gen_bs(bits: usize) -> AigerCircuit {
    gen_bs_variant(bits, true)
}

/// The controller supplies a word that must equal `f(a, b)`; a mismatch is
/// latched and then made sticky.
fn datapath(bits: usize, kind: &str) -> AigerCircuit {
    assert!(bits >= 1, "datapath width must be positive");
    let mut b = AigBuilder::new(Variant::Optimized);
    let a: Vec<u32> = (0..bits).map(|k| b.input(format!("a{k}"))).collect();
    let y: Vec<u32> = (0..bits).map(|k| b.input(format!("b{k}"))).collect();
    let (expected, latched) = match kind {
        "add" => (b.add(&a, &y), true),
        _ => (b.mul(&a, &y), false),
    };
    let out: Vec<u32> = (0..expected.len()).map(|k| b.control(&format!("o{k}"))).collect();
    let mismatch = b.differs(&out, &expected);
    let err = if latched {
        let m = b.latch("mismatch");
        let err = b.latch("err");
        b.set_next(m, mismatch);
        let bad = b.or(err, m);
        b.set_next(err, bad);
        err
    } else {
        let err = b.latch("err");
        let bad = b.or(err, mismatch);
        b.set_next(err, bad);
        err
    };
    b.output(err, "error");
    b.finish(vec![format!("{kind}{bits}")])
}

/// `bits`-bit adder: controls must produce `a + b mod 2^bits`.
pub fn gen_add(bits: usize) -> AigerCircuit {
    datapath(bits, "add")
}

/// `bits`-bit multiplier: controls must produce the full `2·bits`-bit product.
pub fn gen_mult(bits: usize) -> AigerCircuit {
    datapath(bits, "mult")
}

#[derive(Debug, thiserror::Error)]
#[error("unknown benchmark family '{0}' (expected cnt, bs, add, mult or unreal)")]
pub struct UnknownFamily(pub String);

/// A family instance by name.
pub fn generate(family: &str, bits: usize, variant: Variant) -> Result<AigerCircuit, UnknownFamily> {
    Ok(match family {
        "cnt" => gen_cnt(bits, variant),
        "bs" => gen_bs(bits),
        "add" => gen_add(bits),
        "mult" => gen_mult(bits),
        "unreal" => gen_unreal(bits),
        _ => return Err(UnknownFamily(family.to_string())),
    })
}

/// Shape of a random game.
#[derive(Clone, Copy, Debug)]
pub struct RandomShape {
    pub state: usize,
    pub inputs: usize,
    pub controls: usize,
    pub gates: usize,
    pub safe_clauses: usize,
}

/// A random game: AND gates over random earlier signals, random next-state
/// functions, and a small random safe set.
pub fn random_spec(rng: &mut impl Rng, shape: RandomShape, name: &str) -> SafetySpec {
    let mut vm = VarManager::new();
    let state: Vec<_> = (0..shape.state).map(|_| vm.fresh_state()).collect();
    let inputs = vm.fresh_n(VarGroup::Input, shape.inputs);
    let controls = vm.fresh_n(VarGroup::Control, shape.controls);
    let mut pool: Vec<_> = state.iter().chain(&inputs).chain(&controls).copied().collect();
    let pick = |rng: &mut dyn rand::RngCore, pool: &[crate::formula::Var]| {
        Signal::Lit(pool[rng.gen_range(0..pool.len())].lit(rng.gen()))
    };
    let mut gates = Vec::new();
    for _ in 0..shape.gates {
        let out = vm.fresh(VarGroup::Temp);
        let a = pick(rng, &pool);
        let b = pick(rng, &pool);
        gates.push(AndGate { out, a, b });
        pool.push(out);
    }
    let next_fns = (0..shape.state)
        .map(|_| {
            if rng.gen_ratio(1, 12) {
                Signal::Const(rng.gen())
            } else {
                pick(rng, &pool)
            }
        })
        .collect();
    let mut safe = Cnf::new();
    for _ in 0..shape.safe_clauses {
        let len = rng.gen_range(1..=shape.state.clamp(1, 3));
        safe.add((0..len).map(|_| state[rng.gen_range(0..state.len())].lit(rng.gen())));
    }
    SafetySpec::new(name, vm, state, inputs, controls, gates, next_fns, safe).expect("well-formed by construction")
}

/// Family instances with at most 16 variables plus random games, as used by
/// the oracle comparisons.
pub fn small_corpus(rng: &mut impl Rng, random: usize) -> Vec<SafetySpec> {
    let mut out = Vec::new();
    let mut push = |c: AigerCircuit, name: String| {
        out.push(to_safety_spec(&c, &name).expect("generated circuits lower cleanly"));
    };
    for bits in 1..=6 {
        push(gen_cnt(bits, Variant::Optimized), format!("cnt{bits}y"));
        push(gen_cnt(bits, Variant::Plain), format!("cnt{bits}n"));
        push(gen_unreal(bits), format!("unreal{bits}"));
    }
    push(gen_bs(4), "bs4".into());
    push(gen_bs(8), "bs8".into());
    push(gen_bs_variant(4, false), "bs4u".into());
    push(gen_bs_variant(8, false), "bs8u".into());
    for bits in 1..=3 {
        push(gen_add(bits), format!("add{bits}"));
    }
    for bits in 1..=2 {
        push(gen_mult(bits), format!("mult{bits}"));
    }
    for k in 0..random {
        let shape = RandomShape {
            state: rng.gen_range(1..=6),
            inputs: rng.gen_range(0..=3),
            controls: rng.gen_range(0..=3),
            gates: rng.gen_range(0..=8),
            safe_clauses: rng.gen_range(1..=3),
        };
        out.push(random_spec(rng, shape, &format!("random{k}")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aiger::{parse_aag, write_aag};

    fn sizes(c: &AigerCircuit) -> (usize, usize, usize) {
        let s = to_safety_spec(c, "t").unwrap();
        (s.num_state(), s.num_inputs(), s.num_controls())
    }

    #[test]
    fn pinned_sizes() {
        assert_eq!(sizes(&gen_cnt(4, Variant::Plain)), (5, 1, 1));
        assert_eq!(sizes(&gen_cnt(4, Variant::Optimized)), (5, 1, 1));
        assert_eq!(sizes(&gen_add(2)), (2, 4, 2));
        assert_eq!(sizes(&gen_mult(2)), (1, 4, 4));
        assert_eq!(sizes(&gen_bs(8)), (9, 2, 1));
        assert_eq!(gen_cnt(4, Variant::Plain).latches.len(), 5);
    }

    #[test]
    fn circuits_round_trip() {
        for c in [gen_cnt(3, Variant::Plain), gen_bs(8), gen_add(3), gen_mult(2), gen_unreal(2)] {
            assert_eq!(parse_aag(&write_aag(&c)).unwrap(), c);
        }
    }

    #[test]
    fn optimization_shrinks_plain_circuits() {
        assert!(gen_cnt(4, Variant::Optimized).ands.len() < gen_cnt(4, Variant::Plain).ands.len());
    }

    #[test]
    fn datapaths_compute() {
        let spec = to_safety_spec(&gen_mult(2), "m").unwrap();
        // a = 3, b = 2, product 6 = 0110
        let ins = [true, true, false, true];
        let good = [false, true, true, false];
        assert_eq!(spec.step(&[false], &ins, &good), vec![false]);
        assert_eq!(spec.step(&[false], &ins, &[true, true, true, false]), vec![true]);
    }
}
