//! Scalar real lasso under an orthogonal design: density of the estimate and
//! the two error terms. Diagnostic only.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

fn phi_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

fn phi_pdf(x: f64) -> f64 {
    (-x * x / 2.0).exp() / (2.0 * PI).sqrt()
}

/// Density of `xhat = soft(x_true + w, tau)`, `w ~ N(0, sigma^2)`, away from
/// zero. At `xhat == 0` the law has an atom of mass [`prob_error_real`]`.0`,
/// which this function returns in place of a density.
pub fn lasso_pdf_real_orthogonal(xhat: f64, x_true: f64, tau: f64, sigma: f64) -> f64 {
    if xhat > 0.0 {
        phi_pdf((xhat + tau - x_true) / sigma) / sigma
    } else if xhat < 0.0 {
        phi_pdf((xhat - tau - x_true) / sigma) / sigma
    } else {
        zero_mass(x_true, tau, sigma)
    }
}

fn zero_mass(x_true: f64, tau: f64, sigma: f64) -> f64 {
    phi_cdf((tau - x_true) / sigma) - phi_cdf((-tau - x_true) / sigma)
}

/// `(P(xhat = 0 | x_true), P(xhat != 0 | x_true = 0))`: the miss term for a
/// present source and the false-alarm term for an absent one.
pub fn prob_error_real(x_true: f64, tau: f64, sigma: f64) -> (f64, f64) {
    (zero_mass(x_true, tau, sigma), 2.0 * phi_cdf(-tau / sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stat_tests::quadrature::integrate;
    use approx::assert_relative_eq;

    #[test]
    fn tau_zero_is_gaussian() {
        for x in [-1.0, 0.3, 2.0] {
            assert_relative_eq!(lasso_pdf_real_orthogonal(x, 0.5, 0.0, 0.7), phi_pdf((x - 0.5) / 0.7) / 0.7);
        }
        assert_eq!(prob_error_real(0.5, 0.0, 0.7).0, 0.0);
    }

    #[test]
    fn density_plus_atom_is_one() {
        let (x, tau, s) = (0.8, 0.6, 0.5);
        let pos = integrate(|u| lasso_pdf_real_orthogonal(u, x, tau, s), 1e-300, 20.0, 1e-12, 0.0).unwrap();
        let neg = integrate(|u| lasso_pdf_real_orthogonal(u, x, tau, s), -20.0, -1e-300, 1e-12, 0.0).unwrap();
        let atom = prob_error_real(x, tau, s).0;
        assert!((pos + neg + atom - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn false_alarm_term() {
        let (_, pf) = prob_error_real(0.0, 1.96, 1.0);
        assert_relative_eq!(pf, 0.05, epsilon = 1e-4);
    }
}
