//! Fixtures shared by the solver benchmarks.

use nsbundle::{Bundle, Cut};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bundle of `cuts` random affine pieces in dimension `n`, reproducible from
/// `seed`. Linearization points are spread over the box [-1, 1]^n.
pub fn random_bundle(n: usize, cuts: usize, seed: u64) -> Bundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bundle = Bundle::new(n);
    for _ in 0..cuts {
        let point: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let subgrad: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let fvalue = rng.gen_range(-1.0..1.0);
        bundle
            .add_cut(Cut::new(point, fvalue, subgrad).expect("finite cut"))
            .expect("matching dimension");
    }
    bundle
}
