use rand::rngs::SmallRng;
use rand::SeedableRng;
use safesynth::aiger::{parse_aag, to_safety_spec};
use safesynth::epr::{
    encode_epr, ground_check, parse_tptp, write_tptp, Family, GroundVerdict, PredKind, Term, DEFAULT_ATOM_LIMIT,
};
use safesynth::game::SafetySpec;
use safesynth::generators::{gen_cnt, small_corpus, Variant};
use safesynth::sat::SolverFactory;
use safesynth::verify::{explicit_attractor, DEFAULT_EXPLICIT_LIMIT};

const ONE_LATCH: &str = "aag 3 2 1 1 0\n2\n4\n6 4\n6\ni0 env\ni1 controllable_go\nl0 x\no0 err\n";

fn one_latch(controllable: bool) -> SafetySpec {
    let text = if controllable { ONE_LATCH.to_string() } else { ONE_LATCH.replace("controllable_go", "go") };
    to_safety_spec(&parse_aag(&text).unwrap(), "one-latch").unwrap()
}

#[test]
fn one_latch_golden_file() {
    let p = encode_epr(&one_latch(true));
    assert_eq!(p.predicate("w").unwrap().arity, 1);
    assert_eq!(p.predicate("c_1").unwrap().arity, 2);
    for f in [Family::Init, Family::Safe, Family::Trans] {
        assert!(p.family(f).next().is_some());
    }
    let text = write_tptp(&p);
    assert_eq!(text, write_tptp(&encode_epr(&one_latch(true))));
    let golden = include_str!("golden/one_latch.p");
    assert_eq!(text, golden);
}

#[test]
fn one_latch_ground_verdicts() {
    let f = SolverFactory::default();
    let g = |c| ground_check(&encode_epr(&one_latch(c)), DEFAULT_ATOM_LIMIT, &f).unwrap();
    assert_eq!(g(true), GroundVerdict::Realizable);
    assert_eq!(g(false), GroundVerdict::Unrealizable);
}

#[test]
fn fixed_axioms_and_empty_families() {
    let text = write_tptp(&encode_epr(&one_latch(true)));
    assert!(text.contains("cnf(p_top, axiom, p(top)).\n"));
    assert!(text.contains("cnf(p_bot, axiom, ~p(bot)).\n"));
    // no controls: no Skolem predicates; P = true: no safe family
    let spec = to_safety_spec(&parse_aag("aag 2 1 1 1 0\n2\n4 2\n0\n").unwrap(), "t").unwrap();
    let p = encode_epr(&spec);
    assert!(p.predicates.iter().all(|q| q.kind != PredKind::Control));
    assert!(p.family(Family::Safe).next().is_none());
    let text = write_tptp(&p);
    assert!(!text.contains("safe_"));
    assert_eq!(parse_tptp(&text).unwrap(), p);
}

#[test]
fn corpus_round_trip_arity_and_oracle() {
    let f = SolverFactory::default();
    let mut checked = 0;
    for spec in small_corpus(&mut SmallRng::seed_from_u64(8), 60) {
        let p = encode_epr(&spec);
        assert_eq!(parse_tptp(&write_tptp(&p)).unwrap(), p, "{}", spec.name);
        for c in &p.clauses {
            for l in &c.lits {
                let q = p.predicate(&l.atom.pred).unwrap();
                assert_eq!(q.arity, l.atom.args.len());
                if q.kind == PredKind::Temp {
                    // Skolem arguments are exactly the universal variables of the
                    // family they are defined in
                    let vars: Vec<&Term> = l.atom.args.iter().collect();
                    let expected = if q.name.starts_with("d_") {
                        2 * spec.num_state() + spec.num_inputs()
                    } else {
                        spec.num_state() + spec.num_inputs()
                    };
                    assert_eq!(vars.len(), expected);
                    assert!(vars.iter().all(|t| matches!(t, Term::Var(_))));
                }
            }
        }
        if spec.num_state() + spec.num_inputs() > 6 {
            continue;
        }
        checked += 1;
        let exact = explicit_attractor(&spec, DEFAULT_EXPLICIT_LIMIT).unwrap();
        let g = ground_check(&p, DEFAULT_ATOM_LIMIT, &f).unwrap();
        let expected = if exact.is_realizable() { GroundVerdict::Realizable } else { GroundVerdict::Unrealizable };
        assert_eq!(g, expected, "{}", spec.name);
    }
    assert!(checked >= 40, "only {checked} specs checked");
}

#[test]
fn large_counter_is_refused() {
    let spec = to_safety_spec(&gen_cnt(8, Variant::Optimized), "cnt8").unwrap();
    let g = ground_check(&encode_epr(&spec), DEFAULT_ATOM_LIMIT, &SolverFactory::default()).unwrap();
    assert!(matches!(g, GroundVerdict::TooLarge { .. }), "{g:?}");
}
