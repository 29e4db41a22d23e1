//! Knot statistics, their null distributions, and related diagnostics.
//!
//! Noise enters through [`NoiseLevel`], which holds the per-element complex
//! variance `sigma^2` (so `E|v_d|^2 = sigma^2`). The Rayleigh-type statistics
//! (covariance test and test A) are normalised by the per-quadrature variance
//! `sigma^2 / 2`, for which `|v_d|` has the standard Rayleigh law; the
//! squared-magnitude statistics (B, D, E) by `sigma^2` itself, which makes
//! `|v_d|^2 / sigma^2` standard exponential.

pub mod cdfs;
pub mod eigen;
pub mod lasso_pdf;
pub mod marcum;
pub mod quadrature;
pub mod statistics;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

pub use cdfs::{
    cdf_a, cdf_b, cdf_c, cdf_cov_asymptotic, cdf_cov_exact, cdf_d, cdf_e, hypoexp2_cdf,
};
pub use eigen::{residual_projector, testd_eigenvalues, teste_eigen_pairs, DSpectrum};
pub use lasso_pdf::{lasso_pdf_real_orthogonal, prob_error_real};
pub use marcum::{event_b_bound, event_b_bound_best, marcum_q1};
pub use statistics::{
    cov_statistic_general, estimate_sigma2, stat_a, stat_b, stat_c, stat_cov, stat_d, stat_e,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TestKind {
    CovExact,
    CovAsymptotic,
    A,
    B,
    C,
    D,
    E,
}

/// Model a test needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRequirement {
    Orthogonal,
    General,
    GridMatching,
}

impl TestKind {
    pub const ALL: [TestKind; 7] = [
        TestKind::CovExact,
        TestKind::CovAsymptotic,
        TestKind::A,
        TestKind::B,
        TestKind::C,
        TestKind::D,
        TestKind::E,
    ];

    /// Test C estimates the noise level from the path itself.
    pub fn needs_sigma(self) -> bool {
        self != TestKind::C
    }

    pub fn requirement(self) -> ModelRequirement {
        match self {
            TestKind::D => ModelRequirement::General,
            TestKind::E => ModelRequirement::GridMatching,
            _ => ModelRequirement::Orthogonal,
        }
    }

    /// Command-line spelling.
    pub fn name(self) -> &'static str {
        match self {
            TestKind::CovExact => "cov-exact",
            TestKind::CovAsymptotic => "cov-asymp",
            TestKind::A => "A",
            TestKind::B => "B",
            TestKind::C => "C",
            TestKind::D => "D",
            TestKind::E => "E",
        }
    }

    /// CDF of the statistic under `ctx` at `eta`.
    pub fn cdf(self, eta: f64, ctx: &NullContext) -> Result<f64> {
        self.cdf_with(eta, ctx, &Tolerances::DEFAULT)
    }

    pub fn cdf_with(self, eta: f64, ctx: &NullContext, tol: &Tolerances) -> Result<f64> {
        match self {
            TestKind::CovExact => cdfs::cdf_cov_exact_with(eta, ctx.n, tol),
            TestKind::CovAsymptotic => Ok(cdf_cov_asymptotic(eta, 1)),
            TestKind::A => Ok(cdf_a(eta, ctx.n)),
            TestKind::B => Ok(cdf_b(eta)),
            TestKind::C => cdfs::cdf_c_with(eta, ctx.c_order(), tol),
            TestKind::D => Ok(cdf_d(eta, &ctx.eigen_rho)),
            TestKind::E => Ok(cdfs::cdf_e_with(eta, &ctx.eigen_pairs, tol)),
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cov-exact" | "covexact" | "cov" => Ok(TestKind::CovExact),
            "cov-asymp" | "cov-asymptotic" | "covasymptotic" => Ok(TestKind::CovAsymptotic),
            "a" => Ok(TestKind::A),
            "b" => Ok(TestKind::B),
            "c" => Ok(TestKind::C),
            "d" => Ok(TestKind::D),
            "e" => Ok(TestKind::E),
            _ => Err(Error::InvalidConfig(format!("unknown test '{s}'"))),
        }
    }
}

impl From<TestKind> for String {
    fn from(t: TestKind) -> Self {
        t.name().to_string()
    }
}

impl TryFrom<String> for TestKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// What the null hypothesis at one knot looks like.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NullContext {
    /// Hypothesised number of noise knots, `M - S`.
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eigen_rho: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eigen_pairs: Vec<(f64, f64)>,
}

impl NullContext {
    pub fn count(n: usize) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    pub fn eigen(rho: Vec<f64>) -> Self {
        let rho: Vec<f64> = rho.into_iter().map(|r| r.max(0.0)).collect();
        Self {
            n: rho.len(),
            eigen_rho: rho,
            ..Self::default()
        }
    }

    pub fn pairs(pairs: Vec<(f64, f64)>) -> Self {
        let pairs: Vec<(f64, f64)> = pairs.into_iter().map(|(r, e)| (r.max(0.0), e.max(0.0))).collect();
        Self {
            n: pairs.len(),
            eigen_pairs: pairs,
            ..Self::default()
        }
    }

    /// Number of `F` ratios in test C: the knot used for the variance
    /// estimate is not counted.
    pub fn c_order(&self) -> usize {
        self.n.saturating_sub(1).max(1)
    }
}

/// Noise level of the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    variance: f64,
}

impl NoiseLevel {
    /// From the per-element complex variance `E|v_d|^2`.
    pub fn from_variance(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self { variance: sigma2 })
    }

    /// From the standard deviation of each real quadrature.
    pub fn from_quadrature_std(s: f64) -> Result<Self> {
        Self::from_variance(2.0 * s * s)
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn quadrature_variance(&self) -> f64 {
        self.variance / 2.0
    }

    pub fn quadrature_std(&self) -> f64 {
        self.quadrature_variance().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        for k in TestKind::ALL {
            assert_eq!(k.name().parse::<TestKind>().unwrap(), k);
        }
        assert!("F".parse::<TestKind>().is_err());
    }

    #[test]
    fn json_uses_names() {
        assert_eq!(serde_json::to_string(&TestKind::CovExact).unwrap(), "\"cov-exact\"");
        assert_eq!(serde_json::from_str::<TestKind>("\"B\"").unwrap(), TestKind::B);
    }

    #[test]
    fn only_c_is_sigma_free() {
        assert_eq!(
            TestKind::ALL.iter().filter(|k| !k.needs_sigma()).collect::<Vec<_>>(),
            vec![&TestKind::C]
        );
    }

    #[test]
    fn negative_eigenvalues_are_clipped() {
        let c = NullContext::eigen(vec![1.0, -1e-12]);
        assert_eq!(c.eigen_rho, vec![1.0, 0.0]);
    }
}
