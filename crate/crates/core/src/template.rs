//! Winning-region synthesis with a parameterized CNF: one ∃∀∃ query per
//! clause count, escalating the count until a witness appears.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::formula::{Clause, Cnf, Cube, Lit, Var, VarGroup, VarManager};
use crate::game::SafetySpec;
use crate::learning::{LearnStats, Status, SynthesisVerdict};
use crate::qesolve::{solve_ea_stats, EAProblem, EaConfig, EaOutcome, EaStats, QeError, DEFAULT_ROUNDS};
use crate::sat::{SatError, SolverFactory};
use crate::verify::{check_winning_region, VerifyError, VerifyMode};
use crate::watch::Watch;

/// `N` clauses over `vars`. Clause `i` is used iff `kc[i]`; `vars[j]` occurs
/// in it iff `kv[i][j]`, negated iff `kn[i][j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfTemplate {
    pub vars: Vec<Var>,
    pub kc: Vec<Var>,
    pub kv: Vec<Vec<Var>>,
    pub kn: Vec<Vec<Var>>,
}

pub fn build_template(vars: &[Var], clauses: usize, vm: &mut VarManager) -> CnfTemplate {
    assert!(clauses >= 1, "a template needs at least one clause");
    let kc = vm.fresh_n(VarGroup::TemplateParam, clauses);
    let kv = (0..clauses).map(|_| vm.fresh_n(VarGroup::TemplateParam, vars.len())).collect();
    let kn = (0..clauses).map(|_| vm.fresh_n(VarGroup::TemplateParam, vars.len())).collect();
    CnfTemplate {
        vars: vars.to_vec(),
        kc,
        kv,
        kn,
    }
}

impl CnfTemplate {
    pub fn clauses(&self) -> usize {
        self.kc.len()
    }

    pub fn num_params(&self) -> usize {
        self.kc.len() * (1 + 2 * self.vars.len())
    }

    pub fn params(&self) -> Vec<Var> {
        let mut out = self.kc.clone();
        for i in 0..self.kc.len() {
            out.extend(&self.kv[i]);
            out.extend(&self.kn[i]);
        }
        out
    }

    /// The CNF selected by a parameter assignment; parameters missing from `k`
    /// read false.
    pub fn instantiate(&self, k: &Cube) -> Cnf {
        let on = |v: Var| k.contains(v.pos());
        let mut f = Cnf::new();
        for i in 0..self.kc.len() {
            if !on(self.kc[i]) {
                continue;
            }
            let lits = (0..self.vars.len())
                .filter(|&j| on(self.kv[i][j]))
                .map(|j| self.vars[j].lit(!on(self.kn[i][j])));
            f.add(lits);
        }
        f.dedup();
        f
    }

    /// Evaluates the template circuit directly.
    pub fn eval(&self, k: impl Fn(Var) -> bool, x: impl Fn(Var) -> bool) -> bool {
        (0..self.kc.len()).all(|i| {
            !k(self.kc[i])
                || (0..self.vars.len()).any(|j| k(self.kv[i][j]) && (x(self.vars[j]) != k(self.kn[i][j])))
        })
    }

    /// A literal equivalent to the template evaluated over `over` (in place of
    /// `vars`), with its defining clauses appended to `out`.
    pub fn encode(&self, over: &[Var], vm: &mut VarManager, out: &mut Cnf) -> Lit {
        assert_eq!(over.len(), self.vars.len());
        let mut cls = Vec::with_capacity(self.kc.len());
        for i in 0..self.kc.len() {
            let mut occ = Vec::with_capacity(over.len());
            for (j, &x) in over.iter().enumerate() {
                let (v, n) = (self.kv[i][j].pos(), self.kn[i][j].pos());
                let o = vm.fresh(VarGroup::Temp).pos();
                // o ↔ v ∧ (x ⊕ n)
                out.add([!o, v]);
                out.add([!o, x.pos(), n]);
                out.add([!o, x.neg(), !n]);
                out.add([o, !v, x.neg(), n]);
                out.add([o, !v, x.pos(), !n]);
                occ.push(o);
            }
            let c = self.kc[i].pos();
            let mut body = vec![!c];
            body.extend(&occ);
            cls.push(define_or(&body, vm, out));
        }
        define_and(&cls, vm, out)
    }

    /// [`CnfTemplate::encode`] at a fixed point `x`.
    pub fn encode_at(&self, x: &[bool], vm: &mut VarManager, out: &mut Cnf) -> Lit {
        let over = vm.fresh_n(VarGroup::Temp, x.len());
        for (&v, &b) in over.iter().zip(x) {
            out.add([v.lit(b)]);
        }
        self.encode(&over, vm, out)
    }
}

fn define_or(lits: &[Lit], vm: &mut VarManager, out: &mut Cnf) -> Lit {
    let t = vm.fresh(VarGroup::Temp).pos();
    out.add(std::iter::once(!t).chain(lits.iter().copied()));
    for &l in lits {
        out.add([t, !l]);
    }
    t
}

fn define_and(lits: &[Lit], vm: &mut VarManager, out: &mut Cnf) -> Lit {
    let t = vm.fresh(VarGroup::Temp).pos();
    out.add(std::iter::once(t).chain(lits.iter().map(|&l| !l)));
    for &l in lits {
        out.add([!t, l]);
    }
    t
}

/// A literal equivalent to a CNF.
fn define_cnf(f: &Cnf, vm: &mut VarManager, out: &mut Cnf) -> Lit {
    let cls: Vec<Lit> = f.clauses().iter().map(|c| define_or(c.lits(), vm, out)).collect();
    define_and(&cls, vm, out)
}

#[derive(Clone, Debug)]
pub struct TemplateOptions {
    /// Largest clause count tried before giving up.
    pub max_clauses: usize,
    /// Search for an antagonist trap on a second thread.
    pub dual: bool,
    /// Layers of the antagonist trap.
    pub dual_depth: usize,
    pub factory: SolverFactory,
    pub rounds: u64,
    pub time_limit: Option<Duration>,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for TemplateOptions {
    fn default() -> Self {
        TemplateOptions {
            max_clauses: 64,
            dual: false,
            dual_depth: 2,
            factory: SolverFactory::default(),
            rounds: DEFAULT_ROUNDS,
            time_limit: None,
            cancel: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cap {
    /// The configured clause limit.
    Practical,
    /// `2^|x|` clauses: every state set fits, so failure here means no
    /// winning region exists.
    Theoretical,
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("no region with at most {clauses} clauses ({cap:?} cap)")]
    Exhausted { clauses: usize, cap: Cap },
    #[error("resource budget exhausted")]
    Budget,
    #[error("cancelled")]
    Cancelled,
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error("instantiated region failed verification: {0}")]
    Rejected(String),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

impl From<QeError> for TemplateError {
    fn from(e: QeError) -> Self {
        match e {
            QeError::BudgetExceeded => TemplateError::Budget,
            QeError::Cancelled => TemplateError::Cancelled,
            QeError::Sat(s) => TemplateError::Sat(s),
        }
    }
}

/// Verdict plus the clause count of the template that produced it (0 when
/// the answer came from the antagonist side or the initial-state check).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateResult {
    pub verdict: SynthesisVerdict,
    pub clauses: usize,
}

/// `∃k. W(0,k) ∧ ∀x,i ∃c,x'. T → ((W(x,k) → P(x)) ∧ (W(x,k) → W(x',k)))`.
pub fn template_problem(spec: &SafetySpec, clauses: usize) -> (CnfTemplate, EAProblem) {
    let mut vm = spec.vars.clone();
    let t = build_template(&spec.state, clauses, &mut vm);
    let mut outer = Cnf::new();
    let w0 = t.encode_at(&vec![false; spec.num_state()], &mut vm, &mut outer);
    outer.add([w0]);
    let mut defs = spec.transition();
    let w = t.encode(&spec.state, &mut vm, &mut defs);
    let w1 = t.encode(&spec.next_vars(), &mut vm, &mut defs);
    let p = define_cnf(&spec.safe, &mut vm, &mut defs);
    let matrix = Cnf::from_clauses([clause(&[!w, p]), clause(&[!w, w1])]);
    let negated = Cnf::from_clauses([clause(&[w]), clause(&[!p, !w1])]);
    let mut forall = spec.state.clone();
    forall.extend(&spec.inputs);
    let problem = EAProblem::from_pair(t.params(), forall, matrix, negated)
        .with_inner(spec.controls.clone())
        .with_defs(defs)
        .with_outer(outer);
    (t, problem)
}

fn clause(lits: &[Lit]) -> Clause {
    Clause::new(lits.iter().copied()).expect("distinct literals")
}

fn theoretical_cap(state: usize) -> usize {
    if state >= usize::BITS as usize - 1 {
        usize::MAX
    } else {
        1 << state
    }
}

/// Runs the template search with `N = 1, 2, 4, …`.
pub fn synth_template(spec: &SafetySpec, opts: &TemplateOptions) -> Result<TemplateResult, TemplateError> {
    let mut stats = LearnStats::default();
    if !spec.safe.eval(|_| false) {
        return Ok(TemplateResult {
            verdict: SynthesisVerdict {
                status: Status::Unrealizable,
                stats,
            },
            clauses: 0,
        });
    }
    let deadline = opts.time_limit.map(|d| Instant::now() + d);
    std::thread::scope(|scope| {
        let watch = Watch::spawn(scope, opts.cancel.clone(), deadline, Arc::new(AtomicBool::new(false)));
        let cfg = EaConfig {
            rounds: opts.rounds,
            factory: opts.factory.clone(),
            cancel: Some(watch.stop.clone()),
        };
        let dual = opts.dual.then(|| {
            let (cfg, stop) = (cfg.clone(), watch.stop.clone());
            let (max, depth) = (opts.max_clauses, opts.dual_depth);
            scope.spawn(move || -> bool {
                let mut n = 1;
                while n <= max && !stop.load(Ordering::Relaxed) {
                    if let Ok(DualVerdict::Unrealizable) = antagonist_dual(spec, n, depth, &cfg) {
                        stop.store(true, Ordering::Relaxed);
                        return true;
                    }
                    n *= 2;
                }
                false
            })
        });
        let primal = primal_search(spec, opts, &cfg, &mut stats);
        watch.stop.store(true, Ordering::Relaxed);
        watch.done.store(true, Ordering::Relaxed);
        let dual_won = dual.map(|h| h.join().expect("dual thread panicked")).unwrap_or(false);
        match primal {
            Ok(r) => Ok(r),
            Err(TemplateError::Cancelled) if dual_won => Ok(TemplateResult {
                verdict: SynthesisVerdict {
                    status: Status::Unrealizable,
                    stats,
                },
                clauses: 0,
            }),
            Err(TemplateError::Cancelled)
                if deadline.is_some_and(|d| Instant::now() >= d)
                    && !opts.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed)) =>
            {
                Err(TemplateError::Budget)
            }
            Err(e) => Err(e),
        }
    })
}

fn primal_search(
    spec: &SafetySpec,
    opts: &TemplateOptions,
    cfg: &EaConfig,
    stats: &mut LearnStats,
) -> Result<TemplateResult, TemplateError> {
    let theoretical = theoretical_cap(spec.num_state());
    let mut ea = EaStats::default();
    let mut n = 1;
    loop {
        stats.iterations += 1;
        let (t, problem) = template_problem(spec, n);
        let outcome = solve_ea_stats(&problem, cfg, &mut ea);
        stats.solver_queries = ea.queries;
        match outcome? {
            EaOutcome::Sat(k) => {
                let region = t.instantiate(&k);
                let report = check_winning_region(spec, &region, VerifyMode::Strict, cfg)?;
                if !report.passed() {
                    return Err(TemplateError::Rejected(report.summary()));
                }
                stats.final_clauses = region.len();
                return Ok(TemplateResult {
                    verdict: SynthesisVerdict {
                        status: Status::Realizable(region),
                        stats: stats.clone(),
                    },
                    clauses: n,
                });
            }
            EaOutcome::Unsat => {
                if n >= theoretical {
                    return Err(TemplateError::Exhausted {
                        clauses: n,
                        cap: Cap::Theoretical,
                    });
                }
                if n * 2 > opts.max_clauses {
                    return Err(TemplateError::Exhausted {
                        clauses: n,
                        cap: Cap::Practical,
                    });
                }
                n *= 2;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualVerdict {
    Unrealizable,
    Unknown,
}

/// Template-shaped sets `L_1 … L_depth` with `I ∈ L_depth`, where from every
/// safe state of `L_l` the antagonist forces a step into `¬P ∨ L_(l-1)`
/// (`L_0` empty). Finding one proves the antagonist reaches `¬P`
/// within `depth` steps from the initial state.
pub fn antagonist_dual(
    spec: &SafetySpec,
    clauses: usize,
    depth: usize,
    cfg: &EaConfig,
) -> Result<DualVerdict, QeError> {
    const EXPANSION_LIMIT: usize = 256;
    if depth == 0 {
        return Ok(DualVerdict::Unknown);
    }
    let mut vm = spec.vars.clone();
    let layers: Vec<CnfTemplate> = (0..depth).map(|_| build_template(&spec.state, clauses, &mut vm)).collect();
    let params: Vec<Var> = layers.iter().flat_map(|l| l.params()).collect();
    let mut cand = cfg.factory.session()?;
    let mut defs = Cnf::new();
    let top = layers[depth - 1].encode_at(&vec![false; spec.num_state()], &mut vm, &mut defs);
    defs.add([top]);
    cand.add_cnf(&defs)?;
    let (ni, nc) = (spec.num_inputs(), spec.num_controls());
    let exact = ni + nc < usize::BITS as usize && 1usize << (ni + nc) <= EXPANSION_LIMIT;
    let mut at: HashMap<(usize, Vec<bool>), Lit> = HashMap::new();
    let mut lit_at = |layer: usize, x: &[bool], vm: &mut VarManager, out: &mut Cnf| -> Lit {
        *at.entry((layer, x.to_vec()))
            .or_insert_with(|| layers[layer].encode_at(x, vm, out))
    };
    let mut ea = EaStats::default();
    for _ in 0..cfg.rounds {
        if cfg.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Err(QeError::Cancelled);
        }
        if !cand.solve(&[])? {
            return Ok(DualVerdict::Unknown);
        }
        let k = cand.model(&params);
        let regions: Vec<Cnf> = layers.iter().map(|l| l.instantiate(&k)).collect();
        let mut refined = false;
        for l in 0..depth {
            let Some(x) = escape(spec, &regions[l], l.checked_sub(1).map(|p| &regions[p]), cfg, &mut ea)? else {
                continue;
            };
            let mut out = Cnf::new();
            let here = lit_at(l, &x, &mut vm, &mut out);
            let mut alts = vec![!here];
            if exact {
                for iv in 0..1usize << ni {
                    let ib = bits(iv, ni);
                    let d = vm.fresh(VarGroup::Temp).pos();
                    let mut possible = true;
                    for cv in 0..1usize << nc {
                        let y = spec.step(&x, &ib, &bits(cv, nc));
                        if !spec.is_safe(&y) {
                            continue;
                        }
                        if l == 0 {
                            possible = false;
                            break;
                        }
                        let below = lit_at(l - 1, &y, &mut vm, &mut out);
                        out.add([!d, below]);
                    }
                    if possible {
                        alts.push(d);
                    }
                }
            }
            out.add(alts);
            cand.add_cnf(&out)?;
            refined = true;
            break;
        }
        if !refined {
            return Ok(DualVerdict::Unrealizable);
        }
    }
    Err(QeError::BudgetExceeded)
}

/// A safe state of `layer` from which the protagonist keeps the next state
/// safe and outside `below`.
fn escape(
    spec: &SafetySpec,
    layer: &Cnf,
    below: Option<&Cnf>,
    cfg: &EaConfig,
    ea: &mut EaStats,
) -> Result<Option<Vec<bool>>, QeError> {
    let mut vm = spec.vars.clone();
    let mut defs = spec.transition();
    let next_safe = crate::formula::prime(&spec.safe, &spec.vars).expect("safe set over state variables");
    let p1 = define_cnf(&next_safe, &mut vm, &mut defs);
    let (matrix, negated) = match below {
        None => (Cnf::from_clauses([clause(&[p1])]), Cnf::from_clauses([clause(&[!p1])])),
        Some(b) => {
            let next_b = crate::formula::prime(b, &spec.vars).expect("layer over state variables");
            let b1 = define_cnf(&next_b, &mut vm, &mut defs);
            (
                Cnf::from_clauses([clause(&[p1]), clause(&[!b1])]),
                Cnf::from_clauses([Clause::new([!p1, b1]).expect("distinct")]),
            )
        }
    };
    let mut outer = layer.clone();
    outer.extend(&spec.safe);
    let p = EAProblem::from_pair(spec.state.clone(), spec.inputs.clone(), matrix, negated)
        .with_inner(spec.controls.clone())
        .with_defs(defs)
        .with_outer(outer);
    Ok(match solve_ea_stats(&p, cfg, ea)? {
        EaOutcome::Unsat => None,
        EaOutcome::Sat(w) => Some(spec.state_bits(&w)),
    })
}

fn bits(v: usize, n: usize) -> Vec<bool> {
    (0..n).map(|k| v >> k & 1 == 1).collect()
}
