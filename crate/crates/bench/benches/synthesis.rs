use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use safesynth::learning::{learn_qbf, learn_sat, LearnOptions};
use safesynth::parallel::{synth_parallel, ParallelOptions};
use safesynth::template::{synth_template, TemplateOptions};
use safesynth_bench::family;

fn learners(c: &mut Criterion) {
    let mut g = c.benchmark_group("learn");
    g.sample_size(10).measurement_time(Duration::from_secs(5));
    for (name, bits) in [("cnt", 4), ("cnt", 6), ("cnt", 8), ("bs", 8), ("bs", 16), ("bs", 32)] {
        let spec = family(name, bits);
        let id = format!("{name}{bits}");
        g.bench_with_input(BenchmarkId::new("sat", &id), &spec, |b, s| {
            b.iter(|| learn_sat(s, &LearnOptions::default()).unwrap())
        });
        if bits <= 16 {
            g.bench_with_input(BenchmarkId::new("qbf", &id), &spec, |b, s| {
                b.iter(|| learn_qbf(s, &LearnOptions::default()).unwrap())
            });
        }
        let rg = LearnOptions { use_rg: true, ..LearnOptions::default() };
        g.bench_with_input(BenchmarkId::new("sat-rg", &id), &spec, |b, s| b.iter(|| learn_sat(s, &rg).unwrap()));
    }
    g.finish();
}

fn template(c: &mut Criterion) {
    let mut g = c.benchmark_group("template");
    g.sample_size(10);
    for (name, bits) in [("add", 2), ("add", 4), ("mult", 2), ("mult", 4)] {
        let spec = family(name, bits);
        g.bench_function(format!("{name}{bits}"), |b| {
            b.iter(|| synth_template(&spec, &TemplateOptions::default()).unwrap())
        });
    }
    g.finish();
}

// speedup is reported here, never asserted
fn threads(c: &mut Criterion) {
    let mut g = c.benchmark_group("parallel");
    g.sample_size(10).measurement_time(Duration::from_secs(5));
    let spec = family("bs", 16);
    for threads in 1..=3 {
        let opts = ParallelOptions { threads, ..ParallelOptions::default() };
        g.bench_with_input(BenchmarkId::new("bs16", threads), &opts, |b, o| {
            b.iter(|| synth_parallel(&spec, o).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, learners, template, threads);
criterion_main!(benches);
