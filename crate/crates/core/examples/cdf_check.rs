//! Closed-form CDFs of tests A and B against direct simulation of the
//! order statistics they describe.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use sparse_doa::stat_tests::{cdf_a, cdf_b};

fn ks(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

fn main() {
    let n = 7;
    let draws = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut a = Vec::with_capacity(draws);
    let mut b = Vec::with_capacity(draws);
    for _ in 0..draws {
        // |c|^2 / sigma^2 for n pure-noise knots.
        let mut e: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
        e.sort_by(|x, y| y.total_cmp(x));
        // Rayleigh scale one: sqrt(2 E).
        a.push((2.0 * e[0]).sqrt());
        b.push(e[0] - e[1]);
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    println!("A, n = {n}: KS = {:.4}", ks(&a, |x| cdf_a(x, n)));
    println!("B:        KS = {:.4}", ks(&b, cdf_b));
}
