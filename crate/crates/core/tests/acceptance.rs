//! End-to-end acceptance checks. Every criterion writes one
//! `criterion N: PASS|FAIL ...` line to stderr (uncaptured) and fails its test
//! on FAIL. Criteria run one at a time so the timed ones are not disturbed.

mod common;

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::rngs::SmallRng;
use rand::SeedableRng;
use safesynth::aiger::to_safety_spec;
use safesynth::epr::{encode_epr, ground_check, parse_tptp, write_tptp, GroundVerdict, DEFAULT_ATOM_LIMIT};
use safesynth::game::SafetySpec;
use safesynth::generators::{gen_add, gen_bs, gen_cnt, gen_mult, small_corpus, Variant};
use safesynth::learning::{learn_qbf, learn_sat, LearnError, LearnOptions, SynthesisVerdict};
use safesynth::parallel::{synth_parallel, ParallelOptions};
use safesynth::qesolve::EaConfig;
use safesynth::sat::SolverFactory;
use safesynth::template::{synth_template, TemplateError, TemplateOptions};
use safesynth::verify::{
    check_winning_region, compare_regions, explicit_attractor, region_cnf, ExactVerdict, RegionEquivalence,
    VerifyMode, DEFAULT_EXPLICIT_LIMIT,
};

const CORPUS_SEED: u64 = 2024;
const CORPUS_RANDOM: usize = 180;
const CORPUS_MIN: usize = 200;
const FAMILY_VARS_MAX: usize = 16;
const CORPUS_BUDGET: Duration = Duration::from_secs(300);
const TEMPLATE_BUDGET: Duration = Duration::from_secs(30);
const TEMPLATE_MAX_CLAUSES: usize = 2;
/// Per-spec limit for the template backend when it only contributes regions.
const TEMPLATE_CORPUS_LIMIT: Duration = Duration::from_secs(2);
const PARALLEL_SEEDS: u64 = 5;
const EPR_VARS_MAX: usize = 6;
const SCALE_BUDGET: Duration = Duration::from_secs(60);
const GROWTH_LIMIT: f64 = 10.0;
/// Each bs timing is the fastest of this many runs.
const TIMING_RUNS: usize = 3;
const PROPERTY_CASES: usize = 1000;

static SERIAL: Mutex<()> = Mutex::new(());

type Learner = fn(&SafetySpec, &LearnOptions) -> Result<SynthesisVerdict, LearnError>;

const LEARNERS: [(&str, Learner); 2] = [("learnsat", learn_sat), ("learnqbf", learn_qbf)];

fn criterion(n: u32, title: &str, body: impl FnOnce() -> Result<String, String>) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let outcome = body();
    let took = start.elapsed();
    let line = match &outcome {
        Ok(detail) => format!("criterion {n}: PASS {title} ({detail}; {took:.1?})"),
        Err(why) => format!("criterion {n}: FAIL {title} ({why}; {took:.1?})"),
    };
    let _ = writeln!(std::io::stderr().lock(), "{line}");
    if let Err(why) = outcome {
        panic!("criterion {n}: {why}");
    }
}

fn corpus() -> Vec<SafetySpec> {
    small_corpus(&mut SmallRng::seed_from_u64(CORPUS_SEED), CORPUS_RANDOM)
}

fn oracle(spec: &SafetySpec) -> Result<ExactVerdict, String> {
    explicit_attractor(spec, DEFAULT_EXPLICIT_LIMIT).map_err(|e| format!("{}: oracle: {e}", spec.name))
}

fn sizes(spec: &SafetySpec) -> (usize, usize, usize) {
    (spec.num_state(), spec.num_inputs(), spec.num_controls())
}

fn verify(spec: &SafetySpec, v: &SynthesisVerdict, mode: VerifyMode, who: &str) -> Result<bool, String> {
    let Some(f) = v.region() else { return Ok(false) };
    let report = check_winning_region(spec, f, mode, &EaConfig::default()).map_err(|e| format!("{who}: {e}"))?;
    if report.passed() {
        Ok(true)
    } else {
        Err(format!("{who} on {}: {mode:?} check {}", spec.name, report.summary()))
    }
}

#[test]
fn criterion_1_oracle_equivalence() {
    criterion(1, "learners match the explicit oracle", || {
        let specs = corpus();
        if specs.len() < CORPUS_MIN {
            return Err(format!("corpus has {} specs", specs.len()));
        }
        for s in specs.iter().filter(|s| !s.name.starts_with("random")) {
            let (x, i, c) = sizes(s);
            if x + i + c > FAMILY_VARS_MAX {
                return Err(format!("{} has {} variables", s.name, x + i + c));
            }
        }
        let factory = SolverFactory::default();
        let start = Instant::now();
        let mut regions = 0;
        for spec in &specs {
            let exact = oracle(spec)?;
            for (name, learn) in LEARNERS {
                let v = learn(spec, &LearnOptions::default()).map_err(|e| format!("{name} on {}: {e}", spec.name))?;
                if v.is_realizable() != exact.is_realizable() {
                    return Err(format!("{name} on {}: verdict differs", spec.name));
                }
                if let ExactVerdict::Realizable { region, .. } = &exact {
                    let eq = compare_regions(v.region().expect("realizable"), &region_cnf(spec, region), &factory)
                        .map_err(|e| e.to_string())?;
                    if eq != RegionEquivalence::Equivalent {
                        return Err(format!("{name} on {}: region {eq:?}", spec.name));
                    }
                    regions += 1;
                }
            }
        }
        let took = start.elapsed();
        if took > CORPUS_BUDGET {
            return Err(format!("corpus took {took:?}"));
        }
        Ok(format!("{} specs, {regions} regions equivalent", specs.len()))
    });
}

#[test]
fn criterion_2_condition_checks() {
    criterion(2, "every returned region passes its check", || {
        let mut checked = 0;
        for spec in &corpus() {
            for (name, learn) in LEARNERS {
                for (rg, rc) in [(false, false), (true, false), (false, true), (true, true)] {
                    let opts = LearnOptions { use_rg: rg, use_rc: rc, ..LearnOptions::default() };
                    let v = learn(spec, &opts).map_err(|e| format!("{name}: {e}"))?;
                    let mode = if rc { VerifyMode::Rc } else { VerifyMode::Strict };
                    checked += verify(spec, &v, mode, &format!("{name} rg={rg} rc={rc}"))? as usize;
                }
            }
            let opts = ParallelOptions { threads: 2, ..ParallelOptions::default() };
            let r = synth_parallel(spec, &opts).map_err(|e| format!("parallel: {e}"))?;
            checked += verify(spec, &r.verdict, VerifyMode::Strict, "parallel")? as usize;
            let opts = TemplateOptions { time_limit: Some(TEMPLATE_CORPUS_LIMIT), ..TemplateOptions::default() };
            match synth_template(spec, &opts) {
                Ok(r) => checked += verify(spec, &r.verdict, VerifyMode::Strict, "template")? as usize,
                Err(TemplateError::Exhausted { .. } | TemplateError::Budget) => {}
                Err(e) => return Err(format!("template on {}: {e}", spec.name)),
            }
        }
        Ok(format!("{checked} regions checked"))
    });
}

#[test]
fn criterion_3_relaxations_keep_verdicts() {
    criterion(3, "RG and RC keep every verdict", || {
        let specs = corpus();
        let mut runs = 0;
        for spec in &specs {
            let exact = oracle(spec)?;
            for (rg, rc) in [(false, false), (true, false), (false, true), (true, true)] {
                for (name, learn) in LEARNERS {
                    let opts = LearnOptions { use_rg: rg, use_rc: rc, ..LearnOptions::default() };
                    let v = learn(spec, &opts).map_err(|e| format!("{name}: {e}"))?;
                    if v.is_realizable() != exact.is_realizable() {
                        return Err(format!("{name} rg={rg} rc={rc} on {}: verdict differs", spec.name));
                    }
                    runs += 1;
                }
            }
        }
        Ok(format!("{} specs, {runs} runs", specs.len()))
    });
}

#[test]
fn criterion_4_template_clause_counts() {
    criterion(4, "add and mult need at most two template clauses", || {
        let mut found = Vec::new();
        for bits in 2..=4 {
            for (name, circuit) in [("add", gen_add(bits)), ("mult", gen_mult(bits))] {
                let spec = to_safety_spec(&circuit, &format!("{name}{bits}")).map_err(|e| e.to_string())?;
                let start = Instant::now();
                let r = synth_template(&spec, &TemplateOptions::default()).map_err(|e| format!("{name}{bits}: {e}"))?;
                let took = start.elapsed();
                if !r.verdict.is_realizable() || r.clauses > TEMPLATE_MAX_CLAUSES || took > TEMPLATE_BUDGET {
                    return Err(format!("{name}{bits}: N={} in {took:?}", r.clauses));
                }
                verify(&spec, &r.verdict, VerifyMode::Strict, "template")?;
                found.push(format!("{name}{bits}:N={}", r.clauses));
            }
        }
        Ok(found.join(" "))
    });
}

#[test]
fn criterion_5_generator_sizes() {
    criterion(5, "generator sizes", || {
        let cases = [
            ("cnt4", gen_cnt(4, Variant::Optimized), (5, 1, 1)),
            ("cnt4n", gen_cnt(4, Variant::Plain), (5, 1, 1)),
            ("add2", gen_add(2), (2, 4, 2)),
        ];
        let mut out = Vec::new();
        for (name, circuit, expected) in cases {
            let got = sizes(&to_safety_spec(&circuit, name).map_err(|e| e.to_string())?);
            if got != expected {
                return Err(format!("{name}: (x, i, c) = {got:?}, expected {expected:?}"));
            }
            out.push(format!("{name}={got:?}"));
        }
        let (_, i, c) = sizes(&to_safety_spec(&gen_mult(2), "mult2").map_err(|e| e.to_string())?);
        if (i, c) != (4, 4) {
            return Err(format!("mult2: (i, c) = {:?}", (i, c)));
        }
        out.push(format!("mult2=(_, {i}, {c})"));
        Ok(out.join(" "))
    });
}

#[test]
fn criterion_6_parallel_agreement() {
    criterion(6, "parallel verdicts agree across threads and seeds", || {
        let specs = corpus();
        let mut runs = 0;
        for spec in &specs {
            let exact = oracle(spec)?;
            for seed in 0..PARALLEL_SEEDS {
                for threads in 1..=3 {
                    let opts = ParallelOptions { threads, seed, ..ParallelOptions::default() };
                    let r = synth_parallel(spec, &opts).map_err(|e| format!("{} t={threads}: {e}", spec.name))?;
                    if r.verdict.is_realizable() != exact.is_realizable() {
                        return Err(format!("{} threads={threads} seed={seed}: verdict differs", spec.name));
                    }
                    verify(spec, &r.verdict, VerifyMode::Strict, &format!("threads={threads} seed={seed}"))?;
                    runs += 1;
                }
            }
        }
        Ok(format!("{} specs, {runs} runs", specs.len()))
    });
}

#[test]
fn criterion_7_epr_semantics() {
    criterion(7, "EPR grounding, round trip and size limit", || {
        let factory = SolverFactory::default();
        let mut grounded = 0;
        let specs = corpus();
        for spec in &specs {
            let p = encode_epr(spec);
            let back = parse_tptp(&write_tptp(&p)).map_err(|e| format!("{}: {e}", spec.name))?;
            if back != p {
                return Err(format!("{}: TPTP round trip changed the problem", spec.name));
            }
            if spec.num_state() + spec.num_inputs() > EPR_VARS_MAX {
                continue;
            }
            let g = ground_check(&p, DEFAULT_ATOM_LIMIT, &factory).map_err(|e| e.to_string())?;
            let expected =
                if oracle(spec)?.is_realizable() { GroundVerdict::Realizable } else { GroundVerdict::Unrealizable };
            if g != expected {
                return Err(format!("{}: ground {g:?}, oracle {expected:?}", spec.name));
            }
            grounded += 1;
        }
        let cnt8 = to_safety_spec(&gen_cnt(8, Variant::Optimized), "cnt8").map_err(|e| e.to_string())?;
        let g = ground_check(&encode_epr(&cnt8), DEFAULT_ATOM_LIMIT, &factory).map_err(|e| e.to_string())?;
        let GroundVerdict::TooLarge { atoms } = g else {
            return Err(format!("cnt8 grounding returned {g:?}"));
        };
        Ok(format!("{} round trips, {grounded} ground checks, cnt8 TooLarge at {atoms} atoms", specs.len()))
    });
}

fn timed_learn(spec: &SafetySpec, runs: usize) -> Result<Duration, String> {
    let mut best = Duration::MAX;
    for _ in 0..runs {
        let start = Instant::now();
        let v = learn_sat(spec, &LearnOptions::default()).map_err(|e| format!("{}: {e}", spec.name))?;
        best = best.min(start.elapsed());
        if !v.is_realizable() {
            return Err(format!("{}: not realizable", spec.name));
        }
    }
    Ok(best)
}

#[test]
fn criterion_8_scalability() {
    criterion(8, "learn_sat scalability", || {
        let spec = |c, name: &str| to_safety_spec(&c, name).map_err(|e| e.to_string());
        let cnt8 = timed_learn(&spec(gen_cnt(8, Variant::Optimized), "cnt8")?, 1)?;
        let mut bs = Vec::new();
        for bits in [8, 16, 32] {
            bs.push(timed_learn(&spec(gen_bs(bits), &format!("bs{bits}"))?, TIMING_RUNS)?);
        }
        let ratios: Vec<f64> = bs.windows(2).map(|w| w[1].as_secs_f64() / w[0].as_secs_f64()).collect();
        let detail = format!(
            "cnt8 {cnt8:.2?}, bs8 {:.2?}, bs16 {:.2?}, bs32 {:.2?}, growth {:.1}x then {:.1}x",
            bs[0], bs[1], bs[2], ratios[0], ratios[1]
        );
        if cnt8 > SCALE_BUDGET || bs[1] > SCALE_BUDGET {
            return Err(format!("over budget: {detail}"));
        }
        if ratios.iter().any(|&r| r >= GROWTH_LIMIT) {
            return Err(format!("bs growth not below {GROWTH_LIMIT}x per doubling: {detail}"));
        }
        Ok(detail)
    });
}

#[test]
fn criterion_9_formula_properties() {
    criterion(9, "formula layer against enumeration", || {
        common::check_negation(91, PROPERTY_CASES)?;
        common::check_compress(92, PROPERTY_CASES)?;
        let sat = common::check_solve_ea(93, PROPERTY_CASES)?;
        Ok(format!("{PROPERTY_CASES} cases each, {sat} satisfiable ∃∀ instances"))
    });
}
