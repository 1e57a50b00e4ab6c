//! Inputs shared by the criterion benchmarks in `benches/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavica::Sample;

/// `n` i.i.d. uniform points in `[0,1]^d`.
pub fn uniform_sample(n: usize, d: usize, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Sample::new(d, (0..n * d).map(|_| rng.gen::<f64>()).collect()).expect("values lie in [0,1]")
}
