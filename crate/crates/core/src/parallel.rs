//! Several SAT-based learners sharing one clause database, optionally with a
//! helper thread that turns their counterexamples into all minimal
//! generalizations.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use serde::Serialize;

use crate::formula::{negate_cube, prime, Clause, Cnf, Cube, Lit};
use crate::game::SafetySpec;
use crate::learning::hst::{all_minimal, drop_literals};
use crate::learning::{
    learn_sat, Counterexample, Hooks, LearnError, LearnOptions, LearnStats, Pulled, SatLearner, Status,
    SynthesisVerdict,
};
use crate::sat::SatError;
use crate::verify::{check_winning_region, VerifyError, VerifyMode};
use crate::watch::Watch;

#[derive(Debug, Default)]
struct DbInner {
    clauses: Vec<(usize, Clause)>,
    present: HashSet<Clause>,
    epoch: u64,
    /// Clauses of `F̂` for the current epoch, beyond the safe set.
    snapshot: Vec<Clause>,
    /// U-clauses learned in the current epoch.
    u: Vec<(usize, Clause)>,
}

/// Append-only store of learned clauses with `F̂` epochs.
#[derive(Debug, Default)]
pub struct SharedClauseDb {
    inner: Mutex<DbInner>,
}

impl SharedClauseDb {
    fn lock(&self) -> MutexGuard<'_, DbInner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Appends a clause; false if it is already present.
    pub fn push(&self, origin: usize, c: Clause) -> bool {
        let mut db = self.lock();
        if !db.present.insert(c.clone()) {
            return false;
        }
        db.clauses.push((origin, c));
        true
    }

    pub fn len(&self) -> usize {
        self.lock().clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn epoch(&self) -> u64 {
        self.lock().epoch
    }

    pub fn clauses(&self) -> Vec<Clause> {
        self.lock().clauses.iter().map(|(_, c)| c.clone()).collect()
    }

    /// Clauses from position `from` on, skipping those from `origin`.
    pub fn since(&self, from: usize, origin: usize) -> (Vec<Clause>, usize) {
        let db = self.lock();
        let out = db.clauses[from..].iter().filter(|(o, _)| *o != origin).map(|(_, c)| c.clone()).collect();
        (out, db.clauses.len())
    }

    /// Starts a new epoch whose `F̂` holds every clause stored so far.
    pub fn next_epoch(&self) -> (u64, Vec<Clause>) {
        let mut db = self.lock();
        db.epoch += 1;
        db.snapshot = db.clauses.iter().map(|(_, c)| c.clone()).collect();
        db.u.clear();
        (db.epoch, db.snapshot.clone())
    }

    fn push_u(&self, epoch: u64, origin: usize, c: Clause) {
        let mut db = self.lock();
        if db.epoch == epoch {
            db.u.push((origin, c));
        }
    }
}

/// Append-only list of counterexamples tagged with the finding thread.
#[derive(Debug, Default)]
pub struct CexDb {
    inner: Mutex<Vec<(usize, Counterexample)>>,
}

impl CexDb {
    pub fn push(&self, origin: usize, cex: Counterexample) {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).push((origin, cex));
    }

    pub fn since(&self, from: usize) -> Vec<(usize, Counterexample)> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())[from..].to_vec()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Shared {
    db: SharedClauseDb,
    cex: CexDb,
    /// Winning thread and its verdict; written once.
    verdict: Mutex<Option<(usize, SynthesisVerdict)>>,
    stop: Arc<AtomicBool>,
}

impl Shared {
    fn publish(&self, id: usize, v: SynthesisVerdict) {
        let mut slot = self.verdict.lock().unwrap_or_else(|e| e.into_inner());
        if slot.is_none() {
            *slot = Some((id, v));
            self.stop.store(true, Ordering::Relaxed);
        }
    }
}

/// Broadcasts shutdown when a worker unwinds.
struct StopOnPanic<'a>(&'a AtomicBool);

impl Drop for StopOnPanic<'_> {
    fn drop(&mut self) {
        if std::thread::panicking() {
            self.0.store(true, Ordering::Relaxed);
        }
    }
}

struct WorkerHooks<'a> {
    id: usize,
    shared: &'a Shared,
    cursor: usize,
    epoch: u64,
    u_cursor: usize,
}

impl Hooks for WorkerHooks<'_> {
    fn pull(&mut self) -> Pulled {
        let mut out = Pulled::default();
        {
            let db = self.shared.db.lock();
            if db.epoch != self.epoch {
                self.epoch = db.epoch;
                self.u_cursor = 0;
                out.restart = Some(db.snapshot.clone());
            }
            // U-clauses first: every clause stored before them is pulled below.
            out.u_clauses = db.u[self.u_cursor..]
                .iter()
                .filter(|(o, _)| *o != self.id)
                .map(|(_, c)| c.clone())
                .collect();
            self.u_cursor = db.u.len();
        }
        let (clauses, end) = self.shared.db.since(self.cursor, self.id);
        out.clauses = clauses;
        self.cursor = end;
        out
    }

    fn clause_learned(&mut self, c: &Clause) {
        self.shared.db.push(self.id, c.clone());
    }

    fn u_learned(&mut self, c: &Clause) {
        self.shared.db.push_u(self.epoch, self.id, c.clone());
    }

    fn counterexample(&mut self, cex: &Counterexample) {
        self.shared.cex.push(self.id, cex.clone());
    }

    fn restarting(&mut self) -> Option<Vec<Clause>> {
        let (epoch, snapshot) = self.shared.db.next_epoch();
        self.epoch = epoch;
        self.u_cursor = 0;
        Some(snapshot)
    }
}

#[derive(Clone, Debug)]
pub struct ParallelOptions {
    /// 1: a plain learner; 2: two sharing learners; 3: plus a generalizer.
    pub threads: usize,
    /// Worker `k` seeds its solver with `seed + k`.
    pub seed: u64,
    pub learn: LearnOptions,
}

impl Default for ParallelOptions {
    fn default() -> Self {
        ParallelOptions {
            threads: 2,
            seed: 0,
            learn: LearnOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkerRole {
    Learner,
    Generalizer,
}

#[derive(Clone, Debug, Serialize)]
pub struct WorkerReport {
    pub role: WorkerRole,
    pub seed: u64,
    pub stats: LearnStats,
}

#[derive(Clone, Debug)]
pub struct ParallelVerdict {
    pub verdict: SynthesisVerdict,
    pub winner: usize,
    pub workers: Vec<WorkerReport>,
    /// Contents of the shared clause database at shutdown.
    pub shared_clauses: Vec<Clause>,
}

#[derive(Debug, thiserror::Error)]
pub enum ParallelError {
    #[error("no worker threads requested")]
    NoThreads,
    #[error("worker {0} panicked")]
    WorkerPanic(usize),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("returned region failed verification: {0}")]
    Rejected(String),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

fn recheck(spec: &SafetySpec, opts: &LearnOptions, v: &SynthesisVerdict) -> Result<(), ParallelError> {
    if let Some(f) = v.region() {
        let mode = if opts.use_rc { VerifyMode::Rc } else { VerifyMode::Strict };
        let report = check_winning_region(spec, f, mode, &opts.ea_config())?;
        if !report.passed() {
            return Err(ParallelError::Rejected(report.summary()));
        }
    }
    Ok(())
}

pub fn synth_parallel(spec: &SafetySpec, opts: &ParallelOptions) -> Result<ParallelVerdict, ParallelError> {
    if opts.threads == 0 {
        return Err(ParallelError::NoThreads);
    }
    if opts.threads == 1 {
        let mut lopts = opts.learn.clone();
        lopts.factory = opts.learn.factory.with_seed(opts.seed);
        let verdict = learn_sat(spec, &lopts)?;
        recheck(spec, &opts.learn, &verdict)?;
        return Ok(ParallelVerdict {
            workers: vec![WorkerReport {
                role: WorkerRole::Learner,
                seed: opts.seed,
                stats: verdict.stats.clone(),
            }],
            verdict,
            winner: 0,
            shared_clauses: Vec::new(),
        });
    }
    let learners = opts.threads.min(2);
    let generalizer = opts.threads >= 3;
    let shared = Shared {
        db: SharedClauseDb::default(),
        cex: CexDb::default(),
        verdict: Mutex::new(None),
        stop: Arc::new(AtomicBool::new(false)),
    };
    let shared = &shared;
    let result = std::thread::scope(|scope| {
        let watch = Watch::spawn(scope, opts.learn.cancel.clone(), None, shared.stop.clone());
        let mut handles = Vec::new();
        for id in 0..learners {
            let seed = opts.seed.wrapping_add(id as u64);
            let mut wopts = opts.learn.clone();
            wopts.factory = opts.learn.factory.with_seed(seed);
            wopts.cancel = Some(shared.stop.clone());
            handles.push(scope.spawn(move || -> (Result<(), LearnError>, LearnStats) {
                let _guard = StopOnPanic(&shared.stop);
                let mut learner = match SatLearner::new(spec, &wopts, wopts.factory.clone()) {
                    Ok(l) => l,
                    Err(e) => return (Err(e), LearnStats::default()),
                };
                let mut hooks = WorkerHooks {
                    id,
                    shared,
                    cursor: 0,
                    epoch: 0,
                    u_cursor: 0,
                };
                let out = learner.run(&mut hooks);
                let stats = learner.state.stats.clone();
                match out {
                    Ok(v) => {
                        shared.publish(id, v);
                        (Ok(()), stats)
                    }
                    Err(e) => (Err(e), stats),
                }
            }));
        }
        if generalizer {
            let id = learners;
            let lopts = opts.learn.clone();
            handles.push(scope.spawn(move || {
                let _guard = StopOnPanic(&shared.stop);
                let mut stats = LearnStats::default();
                let out = generalize_loop(spec, &lopts, id, shared, &mut stats);
                (out, stats)
            }));
        }
        let mut outcomes = Vec::new();
        let mut panicked = None;
        for (id, h) in handles.into_iter().enumerate() {
            match h.join() {
                Ok(r) => outcomes.push(r),
                Err(_) => {
                    panicked.get_or_insert(id);
                    outcomes.push((Err(LearnError::Cancelled), LearnStats::default()));
                }
            }
        }
        drop(watch);
        if let Some(id) = panicked {
            return Err(ParallelError::WorkerPanic(id));
        }
        let winner = shared.verdict.lock().unwrap_or_else(|e| e.into_inner()).take();
        let workers = outcomes
            .iter()
            .enumerate()
            .map(|(id, (_, stats))| WorkerReport {
                role: if id < learners { WorkerRole::Learner } else { WorkerRole::Generalizer },
                seed: opts.seed.wrapping_add(id as u64),
                stats: stats.clone(),
            })
            .collect();
        match winner {
            Some((winner, verdict)) => Ok(ParallelVerdict {
                verdict,
                winner,
                workers,
                shared_clauses: shared.db.clauses(),
            }),
            None => {
                // Every worker stopped without a verdict: report the most
                // telling error.
                let errors: Vec<LearnError> = outcomes.into_iter().filter_map(|(r, _)| r.err()).collect();
                let pick = errors
                    .iter()
                    .position(|e| !matches!(e, LearnError::Cancelled))
                    .unwrap_or(0);
                Err(errors.into_iter().nth(pick).map(ParallelError::Learn).unwrap_or(ParallelError::NoThreads))
            }
        }
    })?;
    recheck(spec, &opts.learn, &result.verdict)?;
    Ok(result)
}

/// Drains the counterexample database and publishes every minimal
/// generalization with respect to the current global `F`.
fn generalize_loop(
    spec: &SafetySpec,
    opts: &LearnOptions,
    id: usize,
    shared: &Shared,
    stats: &mut LearnStats,
) -> Result<(), LearnError> {
    let mut s = opts.factory.session()?;
    s.add_cnf(&spec.transition())?;
    let mut f = spec.safe.clone();
    let add = |s: &mut crate::sat::Session, c: &Cnf| -> Result<(), SatError> {
        s.add_cnf(c)?;
        s.add_cnf(&prime(c, &spec.vars).expect("state clauses"))
    };
    add(&mut s, &f)?;
    let (mut cursor, mut cex_cursor) = (0, 0);
    let mut seen: HashSet<Cube> = HashSet::new();
    while !shared.stop.load(Ordering::Relaxed) {
        let (fresh, end) = shared.db.since(cursor, id);
        cursor = end;
        let fresh = Cnf::from_clauses(fresh);
        add(&mut s, &fresh)?;
        f.extend(&fresh);
        let batch = shared.cex.since(cex_cursor);
        cex_cursor += batch.len();
        if batch.is_empty() {
            std::thread::sleep(Duration::from_millis(1));
            continue;
        }
        for (_, cex) in batch {
            if shared.stop.load(Ordering::Relaxed) {
                break;
            }
            let full = cex.state.conjoin(&cex.input).expect("disjoint");
            if !seen.insert(full) || !f.eval(|v| cex.state.contains(v.pos())) {
                continue;
            }
            stats.iterations += 1;
            let fixed: Vec<Lit> = cex.input.lits().to_vec();
            let cell = std::cell::RefCell::new(&mut s);
            let losing = |c: &Cube| -> Result<bool, LearnError> {
                let mut a = fixed.clone();
                a.extend_from_slice(c.lits());
                Ok(!cell.borrow_mut().solve(&a)?)
            };
            // Other workers may have moved on; only still-losing states count.
            if !losing(&cex.state)? {
                continue;
            }
            stats.counterexamples += 1;
            let cubes = all_minimal(&cex.state, None, opts.hst_node_limit, &losing, |c| drop_literals(c, &losing))?;
            for g in cubes {
                let clause = negate_cube(&g);
                if g.lits().iter().all(|l| !l.sign()) {
                    // Under RG the global F need not over-approximate the
                    // winning region, so this is no proof.
                    if opts.use_rg {
                        continue;
                    }
                    shared.publish(
                        id,
                        SynthesisVerdict {
                            status: Status::Unrealizable,
                            stats: stats.clone(),
                        },
                    );
                    return Ok(());
                }
                if shared.db.push(id, clause.clone()) {
                    stats.clauses_learned += 1;
                    stats.cube_literals += g.len() as u64;
                    let one = Cnf::from_clauses([clause]);
                    add(&mut s, &one)?;
                    f.extend(&one);
                }
            }
        }
    }
    Ok(())
}
