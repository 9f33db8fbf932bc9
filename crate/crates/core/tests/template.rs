use std::time::Instant;

use rand::rngs::SmallRng;
use rand::SeedableRng;
use safesynth::aiger::to_safety_spec;
use safesynth::generators::{gen_add, gen_mult, small_corpus};
use safesynth::qesolve::EaConfig;
use safesynth::template::{synth_template, Cap, TemplateError, TemplateOptions};
use safesynth::verify::{check_winning_region, explicit_attractor, VerifyMode, DEFAULT_EXPLICIT_LIMIT};

#[test]
fn arithmetic_families_need_at_most_two_clauses() {
    for bits in 2..=4 {
        for (name, circuit) in [("add", gen_add(bits)), ("mult", gen_mult(bits))] {
            let spec = to_safety_spec(&circuit, &format!("{name}{bits}")).unwrap();
            let start = Instant::now();
            let r = synth_template(&spec, &TemplateOptions::default()).unwrap();
            let took = start.elapsed();
            println!("{name}({bits}): N={} in {took:?}", r.clauses);
            assert!(r.verdict.is_realizable());
            assert!(r.clauses <= 2, "{name}({bits}) needed {} clauses", r.clauses);
        }
    }
}

#[test]
fn verdicts_match_oracle_on_tiny_games() {
    let cfg = EaConfig::default();
    for spec in small_corpus(&mut SmallRng::seed_from_u64(6), 40) {
        if spec.num_state() > 4 {
            continue;
        }
        let exact = explicit_attractor(&spec, DEFAULT_EXPLICIT_LIMIT).unwrap();
        let opts = TemplateOptions { dual: true, ..TemplateOptions::default() };
        match synth_template(&spec, &opts) {
            Ok(r) => {
                assert_eq!(r.verdict.is_realizable(), exact.is_realizable(), "{}", spec.name);
                if let Some(f) = r.verdict.region() {
                    assert!(check_winning_region(&spec, f, VerifyMode::Strict, &cfg).unwrap().passed());
                }
            }
            Err(TemplateError::Exhausted { cap: Cap::Theoretical, .. }) => {
                assert!(!exact.is_realizable(), "{}", spec.name)
            }
            Err(e) => panic!("{}: {e}", spec.name),
        }
    }
}
