//! A minisat-style CDCL solver: two watched literals with blockers, VSIDS,
//! phase saving, Luby restarts, first-UIP learning with local minimization and
//! assumption-based incremental solving.

use std::mem;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use super::{SatBackend, SatError};
use crate::formula::{Lit, Var};

const UNDEF: u8 = 2;
const RESTART_BASE: f64 = 100.0;
const VAR_DECAY: f64 = 0.95;
const CLAUSE_DECAY: f64 = 0.999;

type CRef = u32;

#[derive(Clone, Copy)]
struct Watcher {
    cref: CRef,
    blocker: Lit,
}

struct ClauseData {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

/// Indexed binary max-heap of variables keyed by activity.
#[derive(Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<i32>,
}

impl VarHeap {
    fn grow(&mut self, n: usize) {
        self.pos.resize(n, -1);
    }

    fn contains(&self, v: u32) -> bool {
        self.pos[v as usize] >= 0
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if act[self.heap[parent] as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.pos[self.heap[i] as usize] = i as i32;
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i as i32;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let child = if r < self.heap.len()
                && act[self.heap[r] as usize] > act[self.heap[l] as usize]
            {
                r
            } else {
                l
            };
            if act[self.heap[child] as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[child];
            self.pos[self.heap[i] as usize] = i as i32;
            i = child;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i as i32;
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        let i = self.heap.len() - 1;
        self.pos[v as usize] = i as i32;
        self.up(i, act);
    }

    fn bumped(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            self.up(self.pos[v as usize] as usize, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.pos[top as usize] = -1;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.down(0, act);
        }
        Some(top)
    }
}

/// Luby sequence value for restart `i` (0-based).
fn luby(y: f64, mut x: u64) -> f64 {
    let mut size = 1u64;
    let mut seq = 0i32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq)
}

enum Status {
    Sat,
    Unsat,
    Restart,
}

pub struct Cdcl {
    ok: bool,
    clauses: Vec<ClauseData>,
    learnts: Vec<CRef>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<Option<CRef>>,
    polarity: Vec<bool>,
    activity: Vec<f64>,
    seen: Vec<bool>,
    heap: VarHeap,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    var_inc: f64,
    cla_inc: f64,
    max_learnts: f64,
    model: Vec<bool>,
    core: Vec<Lit>,
    assumptions: Vec<Lit>,
    conflicts: u64,
    budget: Option<u64>,
    interrupt: Option<Arc<AtomicBool>>,
    rng: Option<SmallRng>,
}

impl Default for Cdcl {
    fn default() -> Self {
        Cdcl::new(None, None)
    }
}

impl Cdcl {
    /// `seed` randomizes initial activities and phases; `budget` bounds the
    /// conflicts of a single `solve` call.
    pub fn new(seed: Option<u64>, budget: Option<u64>) -> Cdcl {
        let mut s = Cdcl {
            ok: true,
            clauses: Vec::new(),
            learnts: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            polarity: Vec::new(),
            activity: Vec::new(),
            seen: Vec::new(),
            heap: VarHeap::default(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            var_inc: 1.0,
            cla_inc: 1.0,
            max_learnts: 0.0,
            model: Vec::new(),
            core: Vec::new(),
            assumptions: Vec::new(),
            conflicts: 0,
            budget,
            interrupt: None,
            rng: seed.map(SmallRng::seed_from_u64),
        };
        s.ensure_var(Var(0));
        s
    }

    pub fn set_interrupt(&mut self, flag: Arc<AtomicBool>) {
        self.interrupt = Some(flag);
    }

    fn num_vars(&self) -> usize {
        self.assigns.len()
    }

    fn ensure_var(&mut self, v: Var) {
        let n = v.index() + 1;
        if n <= self.num_vars() {
            return;
        }
        let old = self.num_vars();
        self.assigns.resize(n, UNDEF);
        self.level.resize(n, 0);
        self.reason.resize(n, None);
        self.seen.resize(n, false);
        self.watches.resize(2 * n, Vec::new());
        self.heap.grow(n);
        for x in old..n {
            let (act, phase) = match self.rng.as_mut() {
                Some(rng) => (rng.gen::<f64>() * 1e-5, rng.gen()),
                None => (0.0, false),
            };
            self.activity.push(act);
            self.polarity.push(phase);
            if x > 0 {
                self.heap.insert(x as u32, &self.activity);
            }
        }
    }

    fn lit_value(&self, l: Lit) -> u8 {
        let a = self.assigns[l.var().index()];
        if a == UNDEF {
            UNDEF
        } else {
            (a == 1) as u8 ^ (!l.sign()) as u8
        }
    }

    fn is_true(&self, l: Lit) -> bool {
        self.lit_value(l) == 1
    }

    fn is_false(&self, l: Lit) -> bool {
        self.lit_value(l) == 0
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, l: Lit, reason: Option<CRef>) {
        let v = l.var().index();
        self.assigns[v] = l.sign() as u8;
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn cancel_until(&mut self, lvl: usize) {
        if self.decision_level() <= lvl {
            return;
        }
        let start = self.trail_lim[lvl];
        for k in (start..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = l.var().index();
            self.assigns[v] = UNDEF;
            self.reason[v] = None;
            self.polarity[v] = l.sign();
            self.heap.insert(v as u32, &self.activity);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(lvl);
        self.qhead = start;
    }

    fn attach(&mut self, cref: CRef) {
        let c = &self.clauses[cref as usize].lits;
        let (a, b) = (c[0], c[1]);
        self.watches[a.code()].push(Watcher { cref, blocker: b });
        self.watches[b.code()].push(Watcher { cref, blocker: a });
    }

    fn alloc(&mut self, lits: Vec<Lit>, learnt: bool) -> CRef {
        let cref = self.clauses.len() as CRef;
        self.clauses.push(ClauseData {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        cref
    }

    /// Propagates the trail. Returns a conflicting clause, if any.
    ///
    /// `watches[l]` holds the clauses watching `l`; they are visited once `l`
    /// becomes false.
    fn propagate(&mut self) -> Option<CRef> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut ws = mem::take(&mut self.watches[false_lit.code()]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.clauses[w.cref as usize].deleted {
                    continue;
                }
                if self.is_true(w.blocker) {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref;
                let first = {
                    let c = &mut self.clauses[cref as usize].lits;
                    if c[0] == false_lit {
                        c.swap(0, 1);
                    }
                    c[0]
                };
                let nw = Watcher {
                    cref,
                    blocker: first,
                };
                if first != w.blocker && self.is_true(first) {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let len = self.clauses[cref as usize].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let l = self.clauses[cref as usize].lits[k];
                    if !self.is_false(l) {
                        let c = &mut self.clauses[cref as usize].lits;
                        c.swap(1, k);
                        self.watches[l.code()].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if self.is_false(first) {
                    conflict = Some(cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(cref));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.code()] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v as u32, &self.activity);
    }

    fn bump_clause(&mut self, cref: CRef) {
        let c = &mut self.clauses[cref as usize];
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &r in &self.learnts {
                self.clauses[r as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first, highest remaining level second) and the backjump level.
    fn analyze(&mut self, mut confl: CRef) -> (Vec<Lit>, usize) {
        let mut learnt = vec![Lit::from_code(0)];
        let mut path = 0;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        loop {
            if self.clauses[confl as usize].learnt {
                self.bump_clause(confl);
            }
            let skip = p.is_some() as usize;
            let len = self.clauses[confl as usize].lits.len();
            for k in skip..len {
                let q = self.clauses[confl as usize].lits[k];
                let v = q.var().index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] as usize >= self.decision_level() {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let pl = self.trail[index];
            p = Some(pl);
            self.seen[pl.var().index()] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[pl.var().index()].expect("implied literal has a reason");
        }
        learnt[0] = !p.unwrap();

        // Local minimization: drop literals implied by the rest of the clause.
        let all = learnt.clone();
        let mut keep = vec![learnt[0]];
        for &q in &learnt[1..] {
            let redundant = match self.reason[q.var().index()] {
                None => false,
                Some(r) => self.clauses[r as usize].lits[1..].iter().all(|l| {
                    let v = l.var().index();
                    self.seen[v] || self.level[v] == 0
                }),
            };
            if !redundant {
                keep.push(q);
            }
        }
        for l in &all {
            self.seen[l.var().index()] = false;
        }
        let mut learnt = keep;
        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max = 1;
            for k in 2..learnt.len() {
                if self.level[learnt[k].var().index()] > self.level[learnt[max].var().index()] {
                    max = k;
                }
            }
            learnt.swap(1, max);
            self.level[learnt[1].var().index()] as usize
        };
        (learnt, bt)
    }

    /// Collects the assumptions responsible for `p` (an assumption) being false.
    fn analyze_final(&mut self, p: Lit) {
        self.core.clear();
        self.core.push(p);
        if self.decision_level() == 0 || self.level[p.var().index()] == 0 {
            return;
        }
        self.seen[p.var().index()] = true;
        for k in (self.trail_lim[0]..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = l.var().index();
            if !self.seen[v] {
                continue;
            }
            match self.reason[v] {
                None => self.core.push(l),
                Some(r) => {
                    for q in &self.clauses[r as usize].lits[1..] {
                        if self.level[q.var().index()] > 0 {
                            self.seen[q.var().index()] = true;
                        }
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[p.var().index()] = false;
    }

    fn locked(&self, cref: CRef) -> bool {
        let c0 = self.clauses[cref as usize].lits[0];
        self.reason[c0.var().index()] == Some(cref) && self.is_true(c0)
    }

    fn reduce_db(&mut self) {
        let mut order = mem::take(&mut self.learnts);
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            (ca.lits.len() <= 2)
                .cmp(&(cb.lits.len() <= 2))
                .then(ca.activity.total_cmp(&cb.activity))
        });
        let half = order.len() / 2;
        let mut kept = Vec::with_capacity(order.len());
        for (k, cref) in order.into_iter().enumerate() {
            let c = &self.clauses[cref as usize];
            if k < half && c.lits.len() > 2 && !self.locked(cref) {
                let c = &mut self.clauses[cref as usize];
                c.deleted = true;
                c.lits = Vec::new();
            } else {
                kept.push(cref);
            }
        }
        self.learnts = kept;
        let clauses = &self.clauses;
        for ws in self.watches.iter_mut() {
            ws.retain(|w| !clauses[w.cref as usize].deleted);
        }
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v as usize] == UNDEF {
                return Some(Var(v).lit(self.polarity[v as usize]));
            }
        }
        None
    }

    fn search(&mut self, nof_conflicts: u64, start_conflicts: u64) -> Result<Status, SatError> {
        let mut local = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                local += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Ok(Status::Unsat);
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let first = learnt[0];
                    let cref = self.alloc(learnt, true);
                    self.learnts.push(cref);
                    self.attach(cref);
                    self.bump_clause(cref);
                    self.enqueue(first, Some(cref));
                }
                self.var_inc /= VAR_DECAY;
                self.cla_inc /= CLAUSE_DECAY;
                if let Some(b) = self.budget {
                    if self.conflicts - start_conflicts >= b {
                        return Err(SatError::BudgetExceeded);
                    }
                }
                if let Some(flag) = &self.interrupt {
                    if flag.load(Ordering::Relaxed) {
                        return Err(SatError::Interrupted);
                    }
                }
                continue;
            }
            if local >= nof_conflicts {
                self.cancel_until(0);
                return Ok(Status::Restart);
            }
            if self.learnts.len() as f64 - self.trail.len() as f64 >= self.max_learnts {
                self.reduce_db();
            }
            let mut next = None;
            while self.decision_level() < self.assumptions.len() {
                let a = self.assumptions[self.decision_level()];
                if self.is_true(a) {
                    self.trail_lim.push(self.trail.len());
                } else if self.is_false(a) {
                    self.analyze_final(a);
                    return Ok(Status::Unsat);
                } else {
                    next = Some(a);
                    break;
                }
            }
            let next = match next {
                Some(l) => l,
                None => match self.pick_branch() {
                    Some(l) => l,
                    None => return Ok(Status::Sat),
                },
            };
            self.trail_lim.push(self.trail.len());
            self.enqueue(next, None);
        }
    }
}

impl SatBackend for Cdcl {
    fn add_clause(&mut self, lits: &[Lit]) -> Result<(), SatError> {
        if !self.ok {
            return Ok(());
        }
        for l in lits {
            self.ensure_var(l.var());
        }
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_unstable();
        c.dedup();
        if c.windows(2).any(|w| w[0] == !w[1]) {
            return Ok(());
        }
        if c.iter().any(|&l| self.is_true(l)) {
            return Ok(());
        }
        c.retain(|&l| !self.is_false(l));
        match c.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                let cref = self.alloc(c, false);
                self.attach(cref);
            }
        }
        Ok(())
    }

    fn solve(&mut self, assumptions: &[Lit]) -> Result<bool, SatError> {
        self.model.clear();
        self.core.clear();
        if !self.ok {
            return Ok(false);
        }
        for l in assumptions {
            self.ensure_var(l.var());
        }
        self.assumptions = assumptions.to_vec();
        let originals = self.clauses.len() - self.learnts.len();
        self.max_learnts = self.max_learnts.max(originals as f64 / 3.0).max(2000.0);
        let start = self.conflicts;
        let mut restarts = 0;
        let result = loop {
            let limit = (luby(2.0, restarts) * RESTART_BASE) as u64;
            match self.search(limit, start) {
                Ok(Status::Restart) => {
                    restarts += 1;
                    self.max_learnts *= 1.05;
                }
                Ok(Status::Sat) => {
                    self.model = (0..self.num_vars()).map(|v| self.assigns[v] == 1).collect();
                    break Ok(true);
                }
                Ok(Status::Unsat) => break Ok(false),
                Err(e) => break Err(e),
            }
        };
        self.cancel_until(0);
        self.assumptions.clear();
        result
    }

    fn value(&self, v: Var) -> bool {
        self.model.get(v.index()).copied().unwrap_or(false)
    }

    fn core(&self) -> Vec<Lit> {
        self.core.clone()
    }

    fn conflicts(&self) -> u64 {
        self.conflicts
    }

    fn set_interrupt(&mut self, flag: Arc<AtomicBool>) {
        Cdcl::set_interrupt(self, flag);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lits(xs: &[i64]) -> Vec<Lit> {
        xs.iter().map(|&x| Lit::from_dimacs(x)).collect()
    }

    #[test]
    fn luby_prefix() {
        let seq: Vec<f64> = (0..15).map(|i| luby(2.0, i)).collect();
        assert_eq!(
            seq,
            vec![1., 1., 2., 1., 1., 2., 4., 1., 1., 2., 1., 1., 2., 4., 8.]
        );
    }

    #[test]
    fn pigeonhole_3_2_is_unsat() {
        // p(i, h): pigeon i in hole h, var = 2 * i + h + 1
        let mut s = Cdcl::default();
        for i in 0..3 {
            s.add_clause(&lits(&[2 * i + 1, 2 * i + 2])).unwrap();
        }
        for h in 0..2 {
            for a in 0..3 {
                for b in a + 1..3 {
                    s.add_clause(&lits(&[-(2 * a + h + 1), -(2 * b + h + 1)])).unwrap();
                }
            }
        }
        assert!(!s.solve(&[]).unwrap());
    }

    #[test]
    fn incremental_assumptions_and_core() {
        let mut s = Cdcl::default();
        s.add_clause(&lits(&[-1, -2])).unwrap();
        s.add_clause(&lits(&[-3, 4])).unwrap();
        assert!(!s.solve(&lits(&[3, 1, 2])).unwrap());
        let core = s.core();
        assert!(core.contains(&Lit::from_dimacs(1)));
        assert!(core.contains(&Lit::from_dimacs(2)));
        assert!(!core.contains(&Lit::from_dimacs(3)));
        assert!(s.solve(&lits(&[3, 1])).unwrap());
        assert!(s.value(Var(4)));
        assert!(!s.value(Var(2)));
    }

    #[test]
    fn budget_is_reported() {
        let mut s = Cdcl::new(None, Some(1));
        // pigeonhole 4 into 3 needs more than one conflict
        let var = |i: i64, h: i64| 3 * i + h + 1;
        for i in 0..4 {
            s.add_clause(&lits(&[var(i, 0), var(i, 1), var(i, 2)])).unwrap();
        }
        for h in 0..3 {
            for a in 0..4 {
                for b in a + 1..4 {
                    s.add_clause(&lits(&[-var(a, h), -var(b, h)])).unwrap();
                }
            }
        }
        assert_eq!(s.solve(&[]), Err(SatError::BudgetExceeded));
    }
}
