//! Inputs shared by the benchmark harnesses under `benches/`.

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use safesynth::aiger::to_safety_spec;
use safesynth::formula::{Cnf, Var};
use safesynth::game::SafetySpec;
use safesynth::generators::{generate, Variant};

/// A generated family instance, lowered.
pub fn family(name: &str, bits: usize) -> SafetySpec {
    let circuit = generate(name, bits, Variant::Optimized).expect("known family");
    to_safety_spec(&circuit, &format!("{name}{bits}")).expect("generated circuits lower cleanly")
}

/// Uniform random 3-CNF over `vars` at the given clause ratio.
pub fn random_3cnf(seed: u64, vars: &[Var], ratio: f64) -> Cnf {
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut f = Cnf::new();
    for _ in 0..(vars.len() as f64 * ratio) as usize {
        f.add((0..3).map(|_| vars[rng.gen_range(0..vars.len())].lit(rng.gen())));
    }
    f
}
