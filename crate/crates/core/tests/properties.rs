//! Randomized checks of the formula layer and the ∃∀ engine against
//! exhaustive enumeration.

mod common;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use safesynth::formula::{is_subcube, prime, unprime, Clause, Cnf, Cube, Var, VarManager};

use common::bit;

#[test]
fn negation_projects_to_complement() {
    common::check_negation(1, 1000).unwrap();
}

#[test]
fn compress_preserves_models() {
    common::check_compress(2, 1000).unwrap();
}

#[test]
fn subsumption_removal_is_equivalent() {
    let mut rng = SmallRng::seed_from_u64(5);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let vars: Vec<Var> = (1..=n as u32).map(Var).collect();
        let f = common::random_cnf(&mut rng, &vars, 12, 3);
        let g = f.without_subsumed();
        assert!(g.len() <= f.len());
        for (a, b) in g.clauses().iter().enumerate().flat_map(|(k, a)| g.clauses()[k + 1..].iter().map(move |b| (a, b))) {
            assert!(!a.subsumes(b) && !b.subsumes(a), "{a} and {b} survive in {g}");
        }
        for m in 0..1u64 << n {
            let val = |v: Var| bit(m, v.index() - 1);
            assert_eq!(f.eval(val), g.eval(val), "{f} vs {g}");
        }
    }
}

#[test]
fn subcube_implies_entailment() {
    let mut rng = SmallRng::seed_from_u64(3);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=10);
        let vars: Vec<Var> = (1..=n as u32).map(Var).collect();
        let pick = |rng: &mut SmallRng| {
            let mut lits = Vec::new();
            for v in &vars {
                if rng.gen_bool(0.4) {
                    lits.push(v.lit(rng.gen()));
                }
            }
            Cube::new(lits).unwrap()
        };
        let a = pick(&mut rng);
        let b = pick(&mut rng);
        if is_subcube(&a, &b) {
            for m in 0..1u64 << n {
                let val = |v: Var| bit(m, v.index() - 1);
                assert!(!b.eval(val) || a.eval(val));
            }
        }
    }
}

#[test]
fn priming_round_trips() {
    let mut runner = TestRunner::new(Config::with_cases(1000));
    runner
        .run(
            &(1usize..8, prop::collection::vec((0usize..8, any::<bool>()), 0..20), 1usize..4),
            |(n, lits, width)| {
                let mut vm = VarManager::new();
                let xs: Vec<Var> = (0..n).map(|_| vm.fresh_state()).collect();
                let mut f = Cnf::new();
                for chunk in lits.chunks(width) {
                    f.add(chunk.iter().map(|&(k, s)| xs[k % n].lit(s)));
                }
                let p = prime(&f, &vm).unwrap();
                prop_assert_eq!(p.len(), f.len());
                prop_assert_eq!(unprime(&p, &vm).unwrap(), f);
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn solve_ea_matches_brute_force() {
    let sat_cases = common::check_solve_ea(4, 1200).unwrap();
    assert!(sat_cases > 100 && sat_cases < 1100);
}

#[test]
fn clause_and_cube_negation_are_dual() {
    let c = Cube::new([Var(1).pos(), Var(2).neg()]).unwrap();
    let k = safesynth::formula::negate_cube(&c);
    assert_eq!(k, Clause::new([Var(1).neg(), Var(2).pos()]).unwrap());
}
