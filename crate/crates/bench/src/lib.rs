//! Fixtures shared by the criterion benches.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrpsa::{build_instance, parse_cvrp, GenParams, VrpSaInstance};

/// A benchmark from the core crate's data directory on the default grid.
pub fn benchmark(name: &str, params: &GenParams) -> VrpSaInstance {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(format!("{name}.vrp"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    build_instance(&parse_cvrp(&text).expect("benchmark parses"), params).expect("instance builds")
}

/// `n` random closed intervals inside `[0, horizon]`.
pub fn random_intervals(n: usize, horizon: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = rng.gen_range(0.0..horizon);
            let len = rng.gen_range(0.0..horizon / 10.0);
            (a, (a + len).min(horizon))
        })
        .collect()
}
