//! Closed forms against direct simulation of the random variables they
//! describe.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use sparse_doa::lasso_path::orthogonal_knots;
use sparse_doa::signal_model::{build_array_model, ArrayConfig, GridMode};
use sparse_doa::stat_tests::{
    cdf_a, cdf_b, cdf_c, cdf_cov_exact, cdf_d, cdf_e, estimate_sigma2, marcum_q1,
};

const DRAWS: usize = 200_000;
// Well above the 1% critical value of the KS statistic at this sample size.
const KS_LIMIT: f64 = 0.006;

fn ks(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

fn exp1(rng: &mut ChaCha8Rng) -> f64 {
    Exp1.sample(rng)
}

fn exp_sorted(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e
}

#[test]
fn rayleigh_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1, 4, 7] {
        let d: Vec<f64> = (0..DRAWS).map(|_| (2.0 * exp_sorted(&mut rng, n)[0]).sqrt()).collect();
        let v = ks(d, |x| cdf_a(x, n));
        assert!(v < KS_LIMIT, "n = {n}: KS {v}");
    }
}

#[test]
fn top_exponential_spacing() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [2, 5, 8] {
        let d: Vec<f64> = (0..DRAWS)
            .map(|_| {
                let e = exp_sorted(&mut rng, n);
                e[0] - e[1]
            })
            .collect();
        let v = ks(d, cdf_b);
        assert!(v < KS_LIMIT, "n = {n}: KS {v}");
    }
}

#[test]
fn covariance_statistic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [1, 3, 7] {
        let d: Vec<f64> = (0..DRAWS / 4)
            .map(|_| {
                let e = exp_sorted(&mut rng, n);
                let t1 = e[0].sqrt();
                let t2 = e.get(1).map_or(0.0, |x| x.sqrt());
                2.0 * t1 * (t1 - t2)
            })
            .collect();
        let v = ks(d, |x| cdf_cov_exact(x, n).unwrap());
        assert!(v < 2.0 * KS_LIMIT, "n = {n}: KS {v}");
    }
}

#[test]
fn ratios_with_shared_independent_denominator() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for l in [1, 3, 6] {
        let d: Vec<f64> = (0..DRAWS)
            .map(|_| {
                let den: f64 = Exp1.sample(&mut rng);
                exp_sorted(&mut rng, l)[0] / den
            })
            .collect();
        let v = ks(d, |x| cdf_c(x, l).unwrap());
        assert!(v < KS_LIMIT, "l = {l}: KS {v}");
    }
}

#[test]
fn independent_scaled_exponential_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rho = [2.5, 1.3, 0.7, 0.2];
    let d: Vec<f64> = (0..DRAWS)
        .map(|_| rho.iter().map(|r| r * exp1(&mut rng)).fold(0.0, f64::max))
        .collect();
    let v = ks(d, |x| cdf_d(x, &rho));
    assert!(v < KS_LIMIT, "KS {v}");
}

#[test]
fn independent_two_term_hypoexponential_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pairs = [(1.0, 0.4), (0.9, 0.0), (0.6, 0.6), (1.2, 0.1)];
    let d: Vec<f64> = (0..DRAWS)
        .map(|_| {
            pairs
                .iter()
                .map(|&(r, e)| r * exp1(&mut rng) + e * exp1(&mut rng))
                .fold(0.0, f64::max)
        })
        .collect();
    let v = ks(d, |x| cdf_e(x, &pairs));
    assert!(v < KS_LIMIT, "KS {v}");
}

#[test]
fn marcum_q_is_a_rician_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (a, b) in [(0.5, 1.0), (2.0, 1.5), (3.0, 4.0)] {
        let hits = (0..DRAWS)
            .filter(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                ((a + x) * (a + x) + y * y).sqrt() > b
            })
            .count();
        let p = hits as f64 / DRAWS as f64;
        let q = marcum_q1(a, b, 1e-12);
        assert!((p - q).abs() < 4.0 * (q * (1.0 - q) / DRAWS as f64).sqrt() + 1e-4, "Q1({a}, {b}) = {q}, simulated {p}");
    }
}

#[test]
fn variance_estimate_is_smallest_noise_knot() {
    let model = build_array_model(&ArrayConfig::new(8, 8), GridMode::Orthogonal).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sigma2 = 0.3;
    let n = 20_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let b = DVector::from_fn(8, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * (sigma2 / 2.0f64).sqrt()
        });
        let path = orthogonal_knots(&model, &b).unwrap();
        let est = estimate_sigma2(&model, &b, &path).unwrap();
        let last = path.taus()[7];
        assert!((est - last * last).abs() <= 1e-9 * est.max(1e-12));
        sum += est;
    }
    // Minimum of 8 exponentials with mean sigma2.
    let mean = sum / n as f64;
    let expected = sigma2 / 8.0;
    assert!((mean - expected).abs() < 4.0 * expected / (n as f64).sqrt(), "mean {mean} vs {expected}");
}
