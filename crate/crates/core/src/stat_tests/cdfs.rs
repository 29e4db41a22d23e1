//! Null distributions of the knot statistics, conditional on the signal knots
//! coming first.

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

use super::quadrature::integrate;

/// Covariance statistic `tau_k (tau_k - tau_{k+1}) / sigma^2` when `n` noise
/// knots remain, from the joint law of the two largest of `n` Rayleigh
/// variables.
pub fn cdf_cov_exact(eta: f64, n: usize) -> Result<f64> {
    cdf_cov_exact_with(eta, n, &Tolerances::DEFAULT)
}

pub fn cdf_cov_exact_with(eta: f64, n: usize, tol: &Tolerances) -> Result<f64> {
    if n == 0 {
        return Err(Error::Contract("noise knot count must be at least 1".into()));
    }
    if eta <= 0.0 {
        return Ok(0.0);
    }
    if n == 1 {
        // No second noise knot: the statistic is tau^2 / sigma^2.
        return Ok(-(-eta / 2.0).exp_m1());
    }
    let lo = eta.sqrt();
    // Truncate where the Rayleigh density factor drops below the floor.
    let mut hi = lo.max(1.0);
    while hi * (-hi * hi / 2.0).exp() >= tol.quad_truncation {
        hi += 0.5;
    }
    if hi <= lo {
        return Ok(1.0);
    }
    let nf = n as f64;
    let m = (n - 1) as i32;
    let tail = integrate(
        |y| {
            let u = y - eta / y;
            let inner = -(-u * u / 2.0).exp_m1();
            nf * y * (-y * y / 2.0).exp() * inner.powi(m)
        },
        lo,
        hi,
        tol.quad_rel,
        tol.quad_truncation,
    )?;
    Ok((1.0 - tail).clamp(0.0, 1.0))
}

/// Exponential limit of the covariance statistic at position `l` past the
/// signal knots.
pub fn cdf_cov_asymptotic(eta: f64, l: usize) -> f64 {
    if eta <= 0.0 {
        return 0.0;
    }
    -(-(l as f64) * eta).exp_m1()
}

/// Largest of `n` standard Rayleigh variables.
pub fn cdf_a(eta: f64, n: usize) -> f64 {
    if eta <= 0.0 {
        return 0.0;
    }
    let single = -(-eta * eta / 2.0).exp_m1();
    single.powi(n as i32)
}

/// Top spacing of standard exponential order statistics; free of `n`.
pub fn cdf_b(eta: f64) -> f64 {
    if eta <= 0.0 {
        return 0.0;
    }
    -(-eta).exp_m1()
}

/// Largest of `l` equicorrelated `F` ratios sharing one exponential
/// denominator: `sum_r (-1)^r C(l, r) / (1 + r eta)`.
pub fn cdf_c(eta: f64, l: usize) -> Result<f64> {
    cdf_c_with(eta, l, &Tolerances::DEFAULT)
}

pub fn cdf_c_with(eta: f64, l: usize, tol: &Tolerances) -> Result<f64> {
    if eta <= 0.0 {
        return Ok(0.0);
    }
    // Alternating binomial sums lose roughly log10(max term) digits.
    let mut binom = 1.0f64;
    let mut sum = 0.0;
    let mut magnitude = 0.0;
    for r in 0..=l {
        if r > 0 {
            binom *= (l - r + 1) as f64 / r as f64;
        }
        let term = binom / (1.0 + r as f64 * eta);
        magnitude += term;
        if r % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if magnitude * f64::EPSILON <= 1e-13 && l <= 30 {
        return Ok(sum.clamp(0.0, 1.0));
    }
    // Equivalent integral: E[(1 - e^{-eta Y})^l] with Y ~ Exp(1).
    let hi = -(tol.quad_truncation.ln());
    let v = integrate(
        |y| (-y).exp() * (-(-eta * y).exp_m1()).powi(l as i32),
        0.0,
        hi,
        tol.quad_rel,
        tol.quad_truncation,
    )?;
    Ok(v.clamp(0.0, 1.0))
}

/// Product of exponential CDFs with means `rho`.
pub fn cdf_d(eta: f64, rho: &[f64]) -> f64 {
    if eta <= 0.0 {
        return 0.0;
    }
    rho.iter()
        .filter(|&&r| r > 0.0)
        .map(|&r| -(-eta / r).exp_m1())
        .product()
}

/// One factor of [`cdf_e`]: CDF of `rho E1 + eps E2` with `E1, E2` standard
/// exponential.
pub fn hypoexp2_cdf(eta: f64, rho: f64, eps: f64, gap: f64) -> f64 {
    if eta <= 0.0 || rho <= 0.0 {
        return if rho <= 0.0 { 1.0 } else { 0.0 };
    }
    if eps <= 0.0 {
        return -(-eta / rho).exp_m1();
    }
    if (rho - eps).abs() < gap {
        let x = eta / rho;
        return 1.0 - (-x).exp() * (1.0 + x);
    }
    let a = rho / (rho - eps) * -(-eta / rho).exp_m1();
    let b = eps / (rho - eps) * -(-eta / eps).exp_m1();
    (a - b).clamp(0.0, 1.0)
}

/// Product over inactive groups of two-term hypoexponential CDFs.
pub fn cdf_e(eta: f64, pairs: &[(f64, f64)]) -> f64 {
    cdf_e_with(eta, pairs, &Tolerances::DEFAULT)
}

pub fn cdf_e_with(eta: f64, pairs: &[(f64, f64)], tol: &Tolerances) -> f64 {
    if eta <= 0.0 {
        return 0.0;
    }
    pairs
        .iter()
        .map(|&(r, e)| hypoexp2_cdf(eta, r, e, tol.eigen_degenerate_gap))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_at_zero() {
        assert_eq!(cdf_cov_exact(0.0, 7).unwrap(), 0.0);
        assert_eq!(cdf_cov_asymptotic(0.0, 1), 0.0);
        assert_eq!(cdf_a(0.0, 7), 0.0);
        assert_eq!(cdf_b(0.0), 0.0);
        assert_eq!(cdf_c(0.0, 7).unwrap(), 0.0);
        assert_eq!(cdf_d(0.0, &[1.0, 2.0]), 0.0);
        assert_eq!(cdf_e(0.0, &[(1.0, 0.5)]), 0.0);
    }

    #[test]
    fn one_at_large_eta() {
        let eta = 1e3;
        assert!((cdf_cov_exact(eta, 7).unwrap() - 1.0).abs() <= 1e-6);
        assert!((cdf_cov_asymptotic(eta, 1) - 1.0).abs() <= 1e-6);
        assert!((cdf_a(eta, 7) - 1.0).abs() <= 1e-6);
        assert!((cdf_b(eta) - 1.0).abs() <= 1e-6);
        assert!((cdf_c(eta, 7).unwrap() - 1.0).abs() <= 1e-2);
        assert!((cdf_c(1e6, 7).unwrap() - 1.0).abs() <= 1e-4);
        assert!((cdf_d(eta, &[1.0, 3.0]) - 1.0).abs() <= 1e-6);
        assert!((cdf_e(eta, &[(2.0, 1.0), (1.0, 1.0)]) - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn closed_forms() {
        assert_relative_eq!(cdf_b(100f64.ln()), 0.99, epsilon = 1e-14);
        assert_relative_eq!(cdf_cov_asymptotic(100f64.ln(), 1), 0.99, epsilon = 1e-14);
        assert_relative_eq!(cdf_a(3.6186, 7), 0.99, epsilon = 1e-4);
        // Single Rayleigh.
        assert_relative_eq!(cdf_a(1.3, 1), 1.0 - (-0.845f64).exp(), epsilon = 1e-14);
        for eta in [0.1, 1.0, 7.5] {
            assert_relative_eq!(cdf_c(eta, 1).unwrap(), eta / (1.0 + eta), epsilon = 1e-14);
            assert_relative_eq!(cdf_d(eta, &[1.0; 7]), (1.0 - (-eta).exp()).powi(7), epsilon = 1e-14);
            assert_relative_eq!(cdf_e(eta, &[(1.0, 0.0); 7]), cdf_d(eta, &[1.0; 7]), epsilon = 1e-14);
        }
    }

    #[test]
    fn covariance_single_knot_is_chi_square_two() {
        for eta in [0.3, 2.0, 9.0] {
            assert_relative_eq!(cdf_cov_exact(eta, 1).unwrap(), 1.0 - (-eta / 2.0).exp(), epsilon = 1e-14);
        }
    }

    #[test]
    fn covariance_two_knots_closed_form() {
        // n = 2: P(T > eta) = 2 int_{sqrt eta}^inf y e^{-y^2/2} (1 - e^{-(y - eta/y)^2/2}) dy
        //      = 2 e^{-eta/2} - 2 int y e^{-y^2/2 - (y - eta/y)^2/2} dy.
        // The remaining integral has the substitution-free reference below.
        let eta: f64 = 1.7;
        let reference = integrate(
            |y: f64| y * (-(y * y) / 2.0 - (y - eta / y).powi(2) / 2.0).exp(),
            eta.sqrt(),
            40.0,
            1e-13,
            0.0,
        )
        .unwrap();
        let tail = 2.0 * (-eta / 2.0).exp() - 2.0 * reference;
        assert_relative_eq!(cdf_cov_exact(eta, 2).unwrap(), 1.0 - tail, epsilon = 1e-9);
    }

    #[test]
    fn c_sum_matches_integral_form() {
        for l in [2usize, 7, 20, 40] {
            for eta in [0.5, 4.0, 60.0] {
                let hi = 40.0;
                let direct = integrate(
                    |y: f64| (-y).exp() * (1.0 - (-eta * y).exp()).powi(l as i32),
                    0.0,
                    hi,
                    1e-12,
                    0.0,
                )
                .unwrap();
                assert_relative_eq!(cdf_c(eta, l).unwrap(), direct, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn erlang_limit() {
        let eta = 2.3;
        let deg = hypoexp2_cdf(eta, 1.5, 1.5, 1e-9);
        let near = hypoexp2_cdf(eta, 1.5 + 1e-5, 1.5 - 1e-5, 1e-9);
        assert_relative_eq!(deg, near, epsilon = 1e-8);
        let x = eta / 1.5;
        assert_relative_eq!(deg, 1.0 - (-x).exp() * (1.0 + x), epsilon = 1e-15);
    }

    #[test]
    fn monotone_in_eta() {
        let mut prev = [0.0f64; 6];
        for i in 1..200 {
            let eta = i as f64 * 0.1;
            let now = [
                cdf_cov_exact(eta, 5).unwrap(),
                cdf_a(eta, 5),
                cdf_b(eta),
                cdf_c(eta, 5).unwrap(),
                cdf_d(eta, &[0.5, 1.5, 2.0]),
                cdf_e(eta, &[(1.2, 0.3), (0.7, 0.7)]),
            ];
            for j in 0..6 {
                assert!(now[j] >= prev[j] - 1e-12, "cdf {j} at {eta}");
            }
            prev = now;
        }
    }
}
