//! Thresholds from CDF inversion at a target probability of correct detection.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group_lasso_path::GroupDesign;
use crate::signal_model::ArrayModel;
use crate::stat_tests::eigen::{teste_eigen_pairs_for, testd_eigenvalues_for, DSpectrum};
use crate::stat_tests::{ModelRequirement, NullContext, TestKind};
use crate::tolerance::Tolerances;

/// Smallest `eta` with `cdf(eta) >= pc`, by bracket doubling and bisection.
pub fn invert_cdf<F>(cdf: F, pc: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    invert_cdf_with(cdf, pc, &Tolerances::DEFAULT)
}

pub fn invert_cdf_with<F>(cdf: F, pc: f64, tol: &Tolerances) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(pc > 0.0 && pc < 1.0) {
        return Err(Error::InvalidConfig(format!("pc must lie in (0, 1), got {pc}")));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while cdf(hi)? <= pc {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > tol.invert_max_doublings || !hi.is_finite() {
            return Err(Error::Numeric(format!(
                "CDF did not reach {pc} within {} doublings",
                tol.invert_max_doublings
            )));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let v = cdf(mid)?;
        if (v - pc).abs() <= tol.invert_cdf {
            return Ok(mid);
        }
        if v < pc {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol.invert_eta {
            return Ok(0.5 * (lo + hi));
        }
    }
}

/// Threshold for `test` under `ctx`.
pub fn threshold(test: TestKind, ctx: &NullContext, pc: f64) -> Result<f64> {
    let tol = Tolerances::DEFAULT;
    invert_cdf_with(|eta| test.cdf_with(eta, ctx, &tol), pc, &tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    /// 1-based knot position the entry applies to.
    pub knot: usize,
    pub context: NullContext,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub test: TestKind,
    pub pc: f64,
    pub entries: Vec<ThresholdEntry>,
}

impl ThresholdTable {
    pub fn eta_at(&self, knot: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.knot == knot).map(|e| e.eta)
    }
}

/// Null context for testing knot `k` of an `m`-element orthogonal path:
/// knots `k..m` are noise.
pub fn count_context(m: usize, k: usize) -> NullContext {
    NullContext::count(m + 1 - k)
}

/// Per-knot thresholds for the orthogonal tests. For D and E only the first
/// knot (empty active set) is tabulated; the rest depend on the realised path
/// and come from [`ActiveSetThresholds`].
pub fn build_table(test: TestKind, model: &ArrayModel, pc: f64) -> Result<ThresholdTable> {
    let m = model.num_elements();
    let entries = match test.requirement() {
        ModelRequirement::Orthogonal => {
            if !model.is_orthogonal() {
                return Err(Error::Contract(format!(
                    "test {test} needs an orthogonal model"
                )));
            }
            // Test C has no statistic at the last knot: it supplies the
            // variance estimate.
            let last = if test == TestKind::C { m - 1 } else { m };
            (1..=last)
                .rev()
                .map(|k| {
                    let context = count_context(m, k);
                    threshold(test, &context, pc).map(|eta| ThresholdEntry { knot: k, context, eta })
                })
                .collect::<Result<Vec<_>>>()?
        }
        ModelRequirement::General | ModelRequirement::GridMatching => {
            let mut memo = ActiveSetThresholds::new(test, model, pc)?;
            let eta = memo.eta(&[])?;
            vec![ThresholdEntry {
                knot: 1,
                context: memo.context(&[])?,
                eta,
            }]
        }
    };
    Ok(ThresholdTable { test, pc, entries })
}

/// Lazily computed thresholds for D and E, keyed by active set.
pub struct ActiveSetThresholds {
    test: TestKind,
    pc: f64,
    source: EigenSource,
    spectrum: DSpectrum,
    memo: HashMap<Vec<usize>, f64>,
    tol: Tolerances,
}

enum EigenSource {
    Columns(nalgebra::DMatrix<num_complex::Complex64>),
    Groups(GroupDesign),
}

impl ActiveSetThresholds {
    pub fn new(test: TestKind, model: &ArrayModel, pc: f64) -> Result<Self> {
        let source = match test {
            TestKind::D => EigenSource::Columns(model.steering().clone()),
            TestKind::E => EigenSource::Groups(GroupDesign::from_model(model)?),
            other => {
                return Err(Error::Contract(format!(
                    "test {other} does not use active-set thresholds"
                )))
            }
        };
        Ok(Self {
            test,
            pc,
            source,
            spectrum: DSpectrum::default(),
            memo: HashMap::new(),
            tol: Tolerances::DEFAULT,
        })
    }

    /// Test-D spectrum; clears any cached thresholds.
    pub fn with_spectrum(mut self, spectrum: DSpectrum) -> Self {
        self.spectrum = spectrum;
        self.memo.clear();
        self
    }

    pub fn context(&self, active: &[usize]) -> Result<NullContext> {
        match &self.source {
            EigenSource::Columns(a) => Ok(NullContext::eigen(testd_eigenvalues_for(
                a,
                active,
                self.spectrum,
                &self.tol,
            )?)),
            EigenSource::Groups(d) => Ok(NullContext::pairs(teste_eigen_pairs_for(d, active, &self.tol)?)),
        }
    }

    pub fn eta(&mut self, active: &[usize]) -> Result<f64> {
        let mut key = active.to_vec();
        key.sort_unstable();
        if let Some(&eta) = self.memo.get(&key) {
            return Ok(eta);
        }
        let ctx = self.context(&key)?;
        let noise_free = ctx.eigen_rho.iter().all(|&r| r == 0.0) && ctx.eigen_pairs.iter().all(|&(r, _)| r == 0.0);
        // The active columns span the whole space: the null statistic is
        // identically zero and no knot can be tested.
        let eta = if noise_free {
            f64::INFINITY
        } else {
            invert_cdf_with(|e| self.test.cdf_with(e, &ctx, &self.tol), self.pc, &self.tol)?
        };
        self.memo.insert(key, eta);
        Ok(eta)
    }

    pub fn test(&self) -> TestKind {
        self.test
    }

    pub fn pc(&self) -> f64 {
        self.pc
    }

    pub fn len(&self) -> usize {
        self.memo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memo.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::{build_array_model, ArrayConfig, GridMode};
    use crate::stat_tests::{cdf_a, cdf_b};
    use approx::assert_relative_eq;

    fn orth() -> ArrayModel {
        build_array_model(&ArrayConfig::new(8, 8), GridMode::Orthogonal).unwrap()
    }

    #[test]
    fn b_threshold() {
        let eta = invert_cdf(|e| Ok(cdf_b(e)), 0.99).unwrap();
        assert_relative_eq!(eta, 100f64.ln(), epsilon = 1e-9);
        assert!((eta - 4.60517).abs() < 5e-6);
    }

    #[test]
    fn a_threshold() {
        let eta = invert_cdf(|e| Ok(cdf_a(e, 7)), 0.99).unwrap();
        assert!((eta - 3.6186).abs() < 1e-4, "{eta}");
    }

    #[test]
    fn median_round_trip() {
        for test in [TestKind::CovExact, TestKind::A, TestKind::B, TestKind::C] {
            let ctx = NullContext::count(5);
            let eta = threshold(test, &ctx, 0.5).unwrap();
            assert!((test.cdf(eta, &ctx).unwrap() - 0.5).abs() <= 1e-9);
        }
    }

    #[test]
    fn invalid_pc() {
        assert!(invert_cdf(|e| Ok(cdf_b(e)), 1.0).is_err());
        assert!(invert_cdf(|e| Ok(cdf_b(e)), 0.0).is_err());
    }

    #[test]
    fn unreachable_target() {
        assert!(matches!(invert_cdf(|_| Ok(0.5), 0.9), Err(Error::Numeric(_))));
    }

    #[test]
    fn b_table_is_flat() {
        let t = build_table(TestKind::B, &orth(), 0.99).unwrap();
        assert_eq!(t.entries.len(), 8);
        for e in &t.entries {
            assert!((e.eta - 4.60517).abs() < 1e-5);
        }
    }

    #[test]
    fn a_table_decreases_with_fewer_noise_knots() {
        let t = build_table(TestKind::A, &orth(), 0.99).unwrap();
        let mut by_n: Vec<(usize, f64)> = t.entries.iter().map(|e| (e.context.n, e.eta)).collect();
        by_n.sort_by_key(|x| x.0);
        assert!(by_n.windows(2).all(|w| w[0].1 < w[1].1));
    }

    #[test]
    fn d_empty_set_matches_a_squared() {
        let md = orth();
        let d = build_table(TestKind::D, &md, 0.99).unwrap();
        let a = build_table(TestKind::A, &md, 0.99).unwrap();
        let eta_a = a.eta_at(1).unwrap();
        // D uses the complex variance, A the per-quadrature one.
        assert_relative_eq!(d.entries[0].eta, eta_a * eta_a / 2.0, epsilon = 1e-8);
    }

    #[test]
    fn memo_reuses_sets() {
        let md = build_array_model(&ArrayConfig::new(8, 16), GridMode::Oversampled).unwrap();
        let mut m = ActiveSetThresholds::new(TestKind::D, &md, 0.99).unwrap();
        let a = m.eta(&[3, 9]).unwrap();
        let b = m.eta(&[9, 3]).unwrap();
        assert_eq!(a, b);
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn spanning_active_set_saturates() {
        let md = build_array_model(&ArrayConfig::new(8, 8), GridMode::Orthogonal).unwrap();
        let mut e = ActiveSetThresholds::new(TestKind::E, &md, 0.99).unwrap();
        assert_eq!(e.eta(&[0, 2, 4, 6]).unwrap(), f64::INFINITY);
        assert!(e.eta(&[0, 2]).unwrap().is_finite());
    }
}
