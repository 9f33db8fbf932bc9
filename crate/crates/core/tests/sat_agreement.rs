use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use safesynth::formula::{Cnf, Cube, Lit, Var};
use safesynth::sat::{Session, SolveOutcome, SolverFactory, BundledConfig};

/// Plain recursive DPLL with unit propagation; independent of the CDCL engine.
fn dpll(clauses: &[Vec<i64>], assign: &mut Vec<i8>) -> bool {
    loop {
        let mut unit = None;
        for c in clauses {
            let mut open = None;
            let mut count = 0;
            let mut sat = false;
            for &x in c {
                let v = assign[x.unsigned_abs() as usize];
                if v == 0 {
                    count += 1;
                    open = Some(x);
                } else if (v > 0) == (x > 0) {
                    sat = true;
                    break;
                }
            }
            if sat {
                continue;
            }
            match count {
                0 => return false,
                1 => {
                    unit = open;
                    break;
                }
                _ => {}
            }
        }
        match unit {
            Some(x) => assign[x.unsigned_abs() as usize] = if x > 0 { 1 } else { -1 },
            None => break,
        }
    }
    let Some(v) = (1..assign.len()).find(|&v| assign[v] == 0) else {
        return true;
    };
    for val in [1, -1] {
        let mut copy = assign.clone();
        copy[v] = val;
        if dpll(clauses, &mut copy) {
            *assign = copy;
            return true;
        }
    }
    false
}

fn oracle_sat(n: usize, clauses: &[Vec<i64>], assumptions: &[i64]) -> bool {
    let mut all = clauses.to_vec();
    all.extend(assumptions.iter().map(|&a| vec![a]));
    dpll(&all, &mut vec![0; n + 1])
}

fn random_cnf(rng: &mut SmallRng, n: usize) -> Vec<Vec<i64>> {
    let m = rng.gen_range(1..=(n * 5).max(2));
    (0..m)
        .map(|_| {
            let k = rng.gen_range(1..=3);
            (0..k)
                .map(|_| {
                    let v = rng.gen_range(1..=n) as i64;
                    if rng.gen() {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect()
}

fn to_cnf(clauses: &[Vec<i64>]) -> Cnf {
    let refs: Vec<&[i64]> = clauses.iter().map(|c| c.as_slice()).collect();
    Cnf::from_dimacs(&refs)
}

#[test]
fn bundled_agrees_with_dpll_on_random_corpus() {
    let mut rng = SmallRng::seed_from_u64(7);
    for case in 0..1500 {
        let n = rng.gen_range(1..=20);
        let clauses = random_cnf(&mut rng, n);
        let f = to_cnf(&clauses);
        let seed = if case % 2 == 0 { Some(case as u64) } else { None };
        let mut s = SolverFactory::Bundled(BundledConfig { seed, conflict_budget: None })
            .session()
            .unwrap();
        s.add_cnf(&f).unwrap();
        for _ in 0..3 {
            let k = rng.gen_range(0..=n.min(4));
            let mut used = Vec::new();
            let assumptions: Vec<i64> = (0..k)
                .filter_map(|_| {
                    let v = rng.gen_range(1..=n) as i64;
                    if used.contains(&v) {
                        return None;
                    }
                    used.push(v);
                    Some(if rng.gen() { v } else { -v })
                })
                .collect();
            let cube = Cube::new(assumptions.iter().map(|&a| Lit::from_dimacs(a))).unwrap();
            let vars: Vec<Var> = (1..=n as u32).map(Var).collect();
            let expected = oracle_sat(n, &clauses, &assumptions);
            match s.solve_assume(&cube, &vars).unwrap() {
                SolveOutcome::Sat(model) => {
                    assert!(expected, "case {case}: solver says SAT, oracle UNSAT");
                    assert!(f.eval(|v| model.contains(v.pos())));
                    assert!(cube.lits().iter().all(|l| model.contains(*l)));
                }
                SolveOutcome::Unsat(core) => {
                    assert!(!expected, "case {case}: solver says UNSAT, oracle SAT");
                    let core_ints: Vec<i64> = core.lits().iter().map(|l| l.to_dimacs()).collect();
                    assert!(!oracle_sat(n, &clauses, &core_ints), "case {case}: core is satisfiable");
                }
            }
        }
    }
}

#[test]
fn shrunk_cores_are_locally_minimal() {
    let mut rng = SmallRng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.gen_range(3..=10);
        let clauses = random_cnf(&mut rng, n);
        let mut s = Session::bundled();
        s.add_cnf(&to_cnf(&clauses)).unwrap();
        let assumptions: Vec<i64> = (1..=n as i64).map(|v| if rng.gen() { v } else { -v }).collect();
        if oracle_sat(n, &clauses, &assumptions) || !oracle_sat(n, &clauses, &[]) {
            continue;
        }
        checked += 1;
        let cube = Cube::new(assumptions.iter().map(|&a| Lit::from_dimacs(a))).unwrap();
        let shrunk = s.shrink_core(&cube).unwrap();
        let ints: Vec<i64> = shrunk.lits().iter().map(|l| l.to_dimacs()).collect();
        assert!(!oracle_sat(n, &clauses, &ints));
        for k in 0..ints.len() {
            let mut fewer = ints.clone();
            fewer.remove(k);
            assert!(oracle_sat(n, &clauses, &fewer), "dropping {} keeps it unsat", ints[k]);
        }
    }
}

#[test]
fn hard_instances_are_solved() {
    // pigeonhole 7 into 6
    let (p, h) = (7i64, 6i64);
    let var = |i: i64, j: i64| i * h + j + 1;
    let mut f = Cnf::new();
    for i in 0..p {
        f.add((0..h).map(|j| Lit::from_dimacs(var(i, j))));
    }
    for j in 0..h {
        for a in 0..p {
            for b in a + 1..p {
                f.add([Lit::from_dimacs(-var(a, j)), Lit::from_dimacs(-var(b, j))]);
            }
        }
    }
    let mut s = Session::bundled();
    s.add_cnf(&f).unwrap();
    assert!(!s.solve(&[]).unwrap());
}

#[test]
fn larger_random_3sat_models_are_valid() {
    let mut rng = SmallRng::seed_from_u64(3);
    for _ in 0..20 {
        let n = 150;
        let clauses: Vec<Vec<i64>> = (0..(n as f64 * 4.2) as usize)
            .map(|_| {
                (0..3)
                    .map(|_| {
                        let v = rng.gen_range(1..=n) as i64;
                        if rng.gen() {
                            v
                        } else {
                            -v
                        }
                    })
                    .collect()
            })
            .collect();
        let f = to_cnf(&clauses);
        let mut s = Session::bundled();
        s.add_cnf(&f).unwrap();
        if s.solve(&[]).unwrap() {
            assert!(f.eval(|v| s.value(v)));
        }
    }
}
