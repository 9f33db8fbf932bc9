use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use log::info;
use safesynth::aiger::{parse_aag, to_safety_spec, write_aag};
use safesynth::epr::{encode_epr, ground_check, write_tptp, GroundVerdict, DEFAULT_ATOM_LIMIT};
use safesynth::formula::{parse_dimacs, write_dimacs, Cnf, DimacsFile, Lit, Var};
use safesynth::game::SafetySpec;
use safesynth::generators::{generate, Variant};
use safesynth::learning::{learn_qbf, learn_sat, LearnError, LearnOptions, LearnStats, SynthesisVerdict};
use safesynth::parallel::{synth_parallel, ParallelError, ParallelOptions, WorkerReport};
use safesynth::qesolve::EaConfig;
use safesynth::sat::{serve, SolverFactory};
use safesynth::template::{synth_template, Cap, TemplateError, TemplateOptions};
use safesynth::verify::{
    check_winning_region, explicit_attractor, region_cnf, ExactVerdict, VerifyMode, DEFAULT_EXPLICIT_LIMIT,
};
use serde::Serialize;

const EXIT_REALIZABLE: u8 = 10;
const EXIT_UNREALIZABLE: u8 = 20;
const EXIT_ERROR: u8 = 1;
const EXIT_BUDGET: u8 = 2;

const STATS_SCHEMA: u32 = 1;

/// Winning-region synthesis for AIGER safety games.
///
/// Exit codes: 10 realizable, 20 unrealizable, 0 for commands without a
/// verdict, 1 on errors (including a failed region check), 2 when a resource
/// budget runs out. Set SAFETYSYNTH_SOLVER to an external solver command to
/// replace the bundled SAT solver.
#[derive(Parser)]
#[command(name = "safesynth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide realizability and compute a winning region.
    Synth(SynthArgs),
    /// Check a region file against the three winning-region conditions.
    Check(CheckArgs),
    /// Solve a small game by explicit-state fixpoint iteration.
    Oracle(OracleArgs),
    /// Write a benchmark circuit.
    Gen(GenArgs),
    /// Export the first-order encoding as TPTP.
    EprExport(EprArgs),
    /// Answer solver requests on stdin with the bundled solver.
    #[command(hide = true)]
    SatServer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Backend {
    Learnsat,
    Learnqbf,
    Template,
    Parallel,
}

#[derive(clap::Args)]
struct SynthArgs {
    /// ASCII AIGER file.
    spec: PathBuf,
    #[arg(long, value_enum, default_value_t = Backend::Learnsat)]
    backend: Backend,
    /// Reachability-strengthened generalization.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = true, default_missing_value = "true")]
    rg: bool,
    /// Reachability-restricted counterexamples; regions then satisfy the relaxed check only.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    rc: bool,
    /// Worker threads of the parallel backend.
    #[arg(long, default_value_t = 2)]
    threads: usize,
    /// Solver seed; parallel workers use seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    budget: Option<f64>,
    /// Largest clause count tried by the template backend.
    #[arg(long, default_value_t = 64)]
    max_clauses: usize,
    /// Skip the unrealizability search running beside the template backend.
    #[arg(long)]
    no_dual: bool,
    /// Write the region as DIMACS.
    #[arg(long)]
    out_region: Option<PathBuf>,
    /// Write statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Strict,
    Rg,
    Rc,
}

impl From<Mode> for VerifyMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Strict => VerifyMode::Strict,
            Mode::Rg => VerifyMode::Rg,
            Mode::Rc => VerifyMode::Rc,
        }
    }
}

#[derive(clap::Args)]
struct CheckArgs {
    spec: PathBuf,
    /// DIMACS region as written by `synth --out-region`.
    region: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Strict)]
    mode: Mode,
}

#[derive(clap::Args)]
struct OracleArgs {
    spec: PathBuf,
    /// Largest number of state bits explored.
    #[arg(long, default_value_t = DEFAULT_EXPLICIT_LIMIT)]
    limit: usize,
    #[arg(long)]
    out_region: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GenVariant {
    Optimized,
    Plain,
}

#[derive(clap::Args)]
struct GenArgs {
    /// cnt, bs, add, mult or unreal.
    family: String,
    #[arg(long)]
    bits: usize,
    /// Gate construction of the counter families.
    #[arg(long, value_enum, default_value_t = GenVariant::Optimized)]
    variant: GenVariant,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EprArgs {
    spec: PathBuf,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Decide the problem by grounding over the two constants.
    #[arg(long)]
    ground: bool,
    /// Largest number of ground atoms before grounding is refused.
    #[arg(long, default_value_t = DEFAULT_ATOM_LIMIT)]
    limit: u64,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Done,
    Realizable,
    Unrealizable,
    Budget,
    Failed,
}

impl Outcome {
    fn code(&self) -> u8 {
        match self {
            Outcome::Done => 0,
            Outcome::Realizable => EXIT_REALIZABLE,
            Outcome::Unrealizable => EXIT_UNREALIZABLE,
            Outcome::Budget => EXIT_BUDGET,
            Outcome::Failed => EXIT_ERROR,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Check(a) => check(&a),
        Command::Oracle(a) => oracle(&a),
        Command::Gen(a) => gen(&a),
        Command::EprExport(a) => epr_export(&a),
        Command::SatServer => {
            let stdin = io::stdin();
            serve(BufReader::new(stdin.lock()), io::stdout().lock())
                .map(|_| Outcome::Done)
                .map_err(Into::into)
        }
    };
    match result {
        Ok(o) => ExitCode::from(o.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn load_spec(path: &Path) -> Result<SafetySpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let circuit = parse_aag(&text).with_context(|| format!("parsing {}", path.display()))?;
    let name = path.file_stem().map_or("spec".into(), |s| s.to_string_lossy().into_owned());
    to_safety_spec(&circuit, &name).with_context(|| format!("lowering {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(Into::into),
    }
}

/// DIMACS over `1..=|x|` in latch order, with `c latch <lit> var <n>` lines
/// naming the AIGER latch of every variable.
fn region_file(spec: &SafetySpec, region: &Cnf) -> String {
    let index = |v: Var| spec.state.iter().position(|&x| x == v).expect("region over state variables");
    let mut cnf = Cnf::new();
    for c in region.clauses() {
        cnf.add(c.lits().iter().map(|l| Lit::new(Var(index(l.var()) as u32 + 1), l.sign())));
    }
    let mut file = DimacsFile::new(cnf).comment(format!("region of {}", spec.name));
    file.num_vars = spec.num_state() as u32;
    for (k, origin) in spec.latch_origin.iter().enumerate() {
        file = match origin {
            Some(lit) => file.comment(format!("latch {lit} var {}", k + 1)),
            None => file.comment(format!("error-latch var {}", k + 1)),
        };
    }
    write_dimacs(&file)
}

fn read_region(spec: &SafetySpec, path: &Path) -> Result<Cnf> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file = parse_dimacs(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut map: Vec<Option<Var>> = vec![None; file.num_vars as usize + 1];
    let mut annotated = false;
    for c in &file.comments {
        let words: Vec<&str> = c.split_whitespace().collect();
        let (state, n) = match words.as_slice() {
            ["latch", lit, "var", n] => {
                let lit: u32 = lit.parse().with_context(|| format!("bad latch literal in '{c}'"))?;
                let k = spec
                    .latch_origin
                    .iter()
                    .position(|o| *o == Some(lit))
                    .ok_or_else(|| anyhow!("region names latch {lit}, which the spec lacks"))?;
                (spec.state[k], n)
            }
            ["error-latch", "var", n] => {
                let k = spec
                    .latch_origin
                    .iter()
                    .position(Option::is_none)
                    .ok_or_else(|| anyhow!("region names an error latch, which the spec lacks"))?;
                (spec.state[k], n)
            }
            _ => continue,
        };
        let n: usize = n.parse().with_context(|| format!("bad variable in '{c}'"))?;
        *map.get_mut(n).ok_or_else(|| anyhow!("variable {n} exceeds the header"))? = Some(state);
        annotated = true;
    }
    if !annotated {
        // plain files number the state bits in latch order
        for (k, &v) in spec.state.iter().enumerate() {
            if let Some(slot) = map.get_mut(k + 1) {
                *slot = Some(v);
            }
        }
    }
    let mut region = Cnf::new();
    for c in file.cnf.clauses() {
        let mut lits = Vec::new();
        for l in c.lits() {
            let v = map
                .get(l.var().index())
                .copied()
                .flatten()
                .ok_or_else(|| anyhow!("variable {} is not mapped to a latch", l.var().index()))?;
            lits.push(Lit::new(v, l.sign()));
        }
        region.add(lits);
    }
    Ok(region)
}

#[derive(Serialize)]
struct Stats<'a> {
    schema: u32,
    spec: &'a str,
    backend: &'a str,
    verdict: &'a str,
    wall_time_ms: f64,
    clauses_learned: u64,
    u_clauses: u64,
    restarts: u64,
    solver_queries: u64,
    final_clauses: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    template_clauses: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    threads: Vec<WorkerReport>,
}

enum Run {
    Verdict(SynthesisVerdict, Option<usize>, Vec<WorkerReport>),
    Budget(String),
}

fn learn_run(r: Result<SynthesisVerdict, LearnError>) -> Result<Run> {
    match r {
        Ok(v) => Ok(Run::Verdict(v, None, Vec::new())),
        Err(e @ (LearnError::Budget | LearnError::Cancelled)) => Ok(Run::Budget(e.to_string())),
        Err(e) => Err(e.into()),
    }
}

fn synth(a: &SynthArgs) -> Result<Outcome> {
    let spec = load_spec(&a.spec)?;
    let budget = a.budget.map(Duration::from_secs_f64);
    let factory = SolverFactory::from_env().with_seed(a.seed);
    let learn = LearnOptions {
        use_rg: a.rg,
        use_rc: a.rc,
        factory: factory.clone(),
        time_limit: budget,
        ..LearnOptions::default()
    };
    info!(
        "{}: {} latches, {} inputs, {} controls",
        spec.name,
        spec.num_state(),
        spec.num_inputs(),
        spec.num_controls()
    );
    let start = Instant::now();
    let run = match a.backend {
        Backend::Learnsat => learn_run(learn_sat(&spec, &learn))?,
        Backend::Learnqbf => learn_run(learn_qbf(&spec, &learn))?,
        Backend::Parallel => {
            let opts = ParallelOptions { threads: a.threads, seed: a.seed, learn: learn.clone() };
            match synth_parallel(&spec, &opts) {
                Ok(r) => Run::Verdict(r.verdict, None, r.workers),
                Err(ParallelError::Learn(e @ (LearnError::Budget | LearnError::Cancelled))) => {
                    Run::Budget(e.to_string())
                }
                Err(e) => return Err(e.into()),
            }
        }
        Backend::Template => {
            let opts = TemplateOptions {
                max_clauses: a.max_clauses,
                dual: !a.no_dual,
                factory,
                time_limit: budget,
                ..TemplateOptions::default()
            };
            match synth_template(&spec, &opts) {
                Ok(r) => Run::Verdict(r.verdict, Some(r.clauses), Vec::new()),
                // every state set fits the template at this size
                Err(TemplateError::Exhausted { cap: Cap::Theoretical, clauses }) => Run::Verdict(
                    SynthesisVerdict {
                        status: safesynth::learning::Status::Unrealizable,
                        stats: LearnStats::default(),
                    },
                    Some(clauses),
                    Vec::new(),
                ),
                Err(e @ (TemplateError::Exhausted { .. } | TemplateError::Budget | TemplateError::Cancelled)) => {
                    Run::Budget(e.to_string())
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    let took = start.elapsed();
    let backend = format!("{:?}", a.backend).to_lowercase();
    let (verdict, template_clauses, threads) = match run {
        Run::Budget(why) => {
            println!("UNKNOWN");
            eprintln!("{why}");
            return Ok(Outcome::Budget);
        }
        Run::Verdict(v, n, t) => (v, n, t),
    };
    let realizable = verdict.is_realizable();
    println!("{}", if realizable { "REALIZABLE" } else { "UNREALIZABLE" });
    info!("{backend} finished in {took:?}");
    if let (Some(path), Some(f)) = (&a.out_region, verdict.region()) {
        fs::write(path, region_file(&spec, f)).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.stats {
        let s = &verdict.stats;
        let stats = Stats {
            schema: STATS_SCHEMA,
            spec: &spec.name,
            backend: &backend,
            verdict: if realizable { "realizable" } else { "unrealizable" },
            wall_time_ms: took.as_secs_f64() * 1e3,
            clauses_learned: s.clauses_learned,
            u_clauses: s.u_clauses,
            restarts: s.restarts,
            solver_queries: s.solver_queries,
            final_clauses: s.final_clauses,
            template_clauses,
            threads,
        };
        let text = serde_json::to_string_pretty(&stats)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if realizable { Outcome::Realizable } else { Outcome::Unrealizable })
}

fn check(a: &CheckArgs) -> Result<Outcome> {
    let spec = load_spec(&a.spec)?;
    let region = read_region(&spec, &a.region)?;
    let cfg = EaConfig { factory: SolverFactory::from_env(), ..EaConfig::default() };
    let report = check_winning_region(&spec, &region, a.mode.into(), &cfg)?;
    println!("{}", report.summary());
    if let Some(w) = &report.counterexample {
        let bits: String = w.iter().map(|&b| if b { '1' } else { '0' }).collect();
        eprintln!("violating state (latch order): {bits}");
    }
    Ok(if report.passed() { Outcome::Done } else { Outcome::Failed })
}

fn oracle(a: &OracleArgs) -> Result<Outcome> {
    let spec = load_spec(&a.spec)?;
    match explicit_attractor(&spec, a.limit)? {
        ExactVerdict::Realizable { region, iterations } => {
            println!("REALIZABLE");
            info!("fixpoint after {iterations} iterations");
            if let Some(path) = &a.out_region {
                let f = region_file(&spec, &region_cnf(&spec, &region));
                fs::write(path, f).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(Outcome::Realizable)
        }
        ExactVerdict::Unrealizable { iterations } => {
            println!("UNREALIZABLE");
            info!("fixpoint after {iterations} iterations");
            Ok(Outcome::Unrealizable)
        }
    }
}

fn gen(a: &GenArgs) -> Result<Outcome> {
    if a.bits == 0 {
        bail!("--bits must be positive");
    }
    let variant = match a.variant {
        GenVariant::Optimized => Variant::Optimized,
        GenVariant::Plain => Variant::Plain,
    };
    if a.family == "bs" && (a.bits < 4 || !a.bits.is_power_of_two()) {
        bail!("bs needs a power of two ≥ 4 bits");
    }
    let circuit = generate(&a.family, a.bits, variant)?;
    write_out(a.out.as_deref(), &write_aag(&circuit))?;
    Ok(Outcome::Done)
}

fn epr_export(a: &EprArgs) -> Result<Outcome> {
    let spec = load_spec(&a.spec)?;
    let p = encode_epr(&spec);
    write_out(a.out.as_deref(), &write_tptp(&p))?;
    if !a.ground {
        return Ok(Outcome::Done);
    }
    // the verdict goes to stderr when the problem itself is on stdout
    let say = |s: &str| if a.out.is_some() { println!("{s}") } else { eprintln!("{s}") };
    Ok(match ground_check(&p, a.limit, &SolverFactory::from_env())? {
        GroundVerdict::Realizable => {
            say("REALIZABLE");
            Outcome::Realizable
        }
        GroundVerdict::Unrealizable => {
            say("UNREALIZABLE");
            Outcome::Unrealizable
        }
        GroundVerdict::TooLarge { atoms } => {
            say("UNKNOWN");
            eprintln!("grounding refused: {atoms} possible ground atoms exceed the limit of {}", a.limit);
            Outcome::Budget
        }
    })
}
