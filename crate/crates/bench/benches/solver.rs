use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use safesynth::formula::{cnf_negate, compress, Var, VarGroup, VarManager};
use safesynth::sat::Session;
use safesynth_bench::random_3cnf;

fn random_3sat(c: &mut Criterion) {
    let mut g = c.benchmark_group("cdcl-3sat");
    g.sample_size(20);
    for n in [50u32, 100, 150] {
        let vars: Vec<Var> = (1..=n).map(Var).collect();
        // near the satisfiability threshold
        let instances: Vec<_> = (0..8).map(|k| random_3cnf(k, &vars, 4.26)).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &instances, |b, fs| {
            b.iter(|| {
                fs.iter()
                    .filter(|f| {
                        let mut s = Session::bundled();
                        s.add_cnf(f).unwrap();
                        s.solve(&[]).unwrap()
                    })
                    .count()
            })
        });
    }
    g.finish();
}

fn formula_ops(c: &mut Criterion) {
    let mut vm = VarManager::new();
    let vars = vm.fresh_n(VarGroup::State, 40);
    let f = random_3cnf(7, &vars, 3.0);
    c.bench_function("compress-120", |b| b.iter(|| compress(black_box(&f), 1000)));
    c.bench_function("negate-120", |b| b.iter(|| cnf_negate(black_box(&f), &mut vm.clone())));
}

criterion_group!(benches, random_3sat, formula_ops);
criterion_main!(benches);
