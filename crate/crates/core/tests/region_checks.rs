use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use safesynth::formula::Cnf;
use safesynth::generators::{random_spec, RandomShape};
use safesynth::qesolve::EaConfig;
use safesynth::verify::{
    check_winning_region, region_cnf, region_states, ExplicitGame, VerifyMode, DEFAULT_EXPLICIT_LIMIT,
};

fn random_region(rng: &mut SmallRng, spec: &safesynth::game::SafetySpec) -> Cnf {
    let mut f = Cnf::new();
    for _ in 0..rng.gen_range(0..=3) {
        let len = rng.gen_range(1..=spec.num_state().min(3));
        f.add((0..len).map(|_| spec.state[rng.gen_range(0..spec.num_state())].lit(rng.gen())));
    }
    f
}

#[test]
fn symbolic_checks_match_enumeration() {
    let mut rng = SmallRng::seed_from_u64(21);
    let cfg = EaConfig::default();
    let mut failures = [0usize; 3];
    for case in 0..400 {
        let shape = RandomShape {
            state: rng.gen_range(1..=5),
            inputs: rng.gen_range(0..=2),
            controls: rng.gen_range(0..=2),
            gates: rng.gen_range(0..=6),
            safe_clauses: rng.gen_range(1..=2),
        };
        let spec = random_spec(&mut rng, shape, "r");
        let game = ExplicitGame::new(&spec, DEFAULT_EXPLICIT_LIMIT).unwrap();
        let region = if case % 4 == 0 {
            region_cnf(&spec, &game.winning_region())
        } else {
            random_region(&mut rng, &spec)
        };
        let states = region_states(&spec, &region);
        for (k, mode) in [VerifyMode::Strict, VerifyMode::Rg, VerifyMode::Rc].into_iter().enumerate() {
            let symbolic = check_winning_region(&spec, &region, mode, &cfg).unwrap();
            let explicit = game.check(&states, mode);
            assert_eq!(
                (symbolic.initial, symbolic.safe, symbolic.inductive),
                (explicit.initial, explicit.safe, explicit.inductive),
                "case {case}, mode {mode:?}, region {region}"
            );
            if let Some(w) = &symbolic.counterexample {
                let s = w.iter().enumerate().fold(0usize, |acc, (k, &b)| acc | (b as usize) << k);
                assert!(states[s] || !symbolic.initial, "witness outside region");
            }
            failures[k] += !symbolic.passed() as usize;
        }
    }
    // each mode accepts at least what the stricter one accepts
    assert!(failures[0] >= failures[1] && failures[1] >= failures[2]);
    assert!(failures[2] > 0);
}

#[test]
fn oracle_regions_pass_strict() {
    let mut rng = SmallRng::seed_from_u64(5);
    let cfg = EaConfig::default();
    for _ in 0..150 {
        let shape = RandomShape {
            state: rng.gen_range(1..=6),
            inputs: rng.gen_range(0..=3),
            controls: rng.gen_range(0..=3),
            gates: rng.gen_range(0..=8),
            safe_clauses: rng.gen_range(1..=3),
        };
        let spec = random_spec(&mut rng, shape, "r");
        let w = ExplicitGame::new(&spec, DEFAULT_EXPLICIT_LIMIT).unwrap().winning_region();
        if !w[0] {
            continue;
        }
        let report = check_winning_region(&spec, &region_cnf(&spec, &w), VerifyMode::Strict, &cfg).unwrap();
        assert_eq!(report.summary(), "PASS PASS PASS");
    }
}
