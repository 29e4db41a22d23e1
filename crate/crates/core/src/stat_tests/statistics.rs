//! Knot statistics. Knot positions `k` are 1-based and `tau_k = 0` past the
//! end of the path.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::homotopy::Homotopy;
use crate::lasso_path::{lasso_solve_at, KnotPath};
use crate::signal_model::ArrayModel;
use crate::tolerance::Tolerances;

use super::NoiseLevel;

fn tau_at(taus: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::OutOfRange { index: 0, len: taus.len() });
    }
    Ok(taus.get(k - 1).copied().unwrap_or(0.0))
}

/// `tau_k (tau_k - tau_{k+1}) / sigma_q^2`.
pub fn stat_cov(taus: &[f64], k: usize, noise: NoiseLevel) -> Result<f64> {
    if k > taus.len() {
        return Err(Error::OutOfRange { index: k, len: taus.len() });
    }
    let t = tau_at(taus, k)?;
    let next = tau_at(taus, k + 1)?;
    Ok(t * (t - next) / noise.quadrature_variance())
}

/// `tau_k / sigma_q`.
pub fn stat_a(taus: &[f64], k: usize, noise: NoiseLevel) -> Result<f64> {
    Ok(tau_at(taus, k)? / noise.quadrature_std())
}

/// `(tau_k^2 - tau_{k+1}^2) / sigma^2`.
pub fn stat_b(taus: &[f64], k: usize, noise: NoiseLevel) -> Result<f64> {
    let t = tau_at(taus, k)?;
    let next = tau_at(taus, k + 1)?;
    Ok((t * t - next * next) / noise.variance())
}

/// `tau_k^2 / sigma_hat^2`.
pub fn stat_c(taus: &[f64], k: usize, sigma_hat2: f64) -> Result<f64> {
    if !(sigma_hat2 > 0.0) {
        return Err(Error::Estimation(format!(
            "estimated noise variance {sigma_hat2} is not positive"
        )));
    }
    let t = tau_at(taus, k)?;
    Ok(t * t / sigma_hat2)
}

/// `tau^2 / sigma^2` for one knot of a general or group path.
pub fn stat_d(tau: f64, noise: NoiseLevel) -> f64 {
    tau * tau / noise.variance()
}

pub fn stat_e(tau: f64, noise: NoiseLevel) -> f64 {
    tau * tau / noise.variance()
}

/// Residual energy of the least-squares fit on the first `M - 1` entries of
/// the path.
pub fn estimate_sigma2(model: &ArrayModel, b: &DVector<Complex64>, path: &KnotPath) -> Result<f64> {
    let m = model.num_elements();
    let order = path.entry_order();
    if order.len() < m - 1 {
        return Err(Error::Estimation(format!(
            "path has {} entries, need {}",
            order.len(),
            m - 1
        )));
    }
    if model.is_orthogonal() {
        let t = path.entry_tau(m);
        return Ok(t * t);
    }
    let cols = model.steering().select_columns(order[..m - 1].iter());
    let svd = cols.clone().svd(true, true);
    let x = svd
        .solve(b, 1e-12)
        .map_err(|e| Error::Estimation(format!("least-squares fit failed: {e}")))?;
    Ok((b - cols * x).norm_squared())
}

fn inner(b: &DVector<Complex64>, v: &DVector<Complex64>) -> f64 {
    b.dotc(v).re
}

/// Covariance statistic from its definition: the drop in fitted correlation
/// at `tau_{k+1}` between the lasso with and without the `k`-th entrant.
pub fn cov_statistic_general(
    model: &ArrayModel,
    b: &DVector<Complex64>,
    path: &KnotPath,
    k: usize,
    noise: NoiseLevel,
) -> Result<f64> {
    let order = path.entry_order();
    if k == 0 || k > order.len() {
        return Err(Error::OutOfRange { index: k, len: order.len() });
    }
    let next = path.entry_tau(k + 1);
    let a = model.steering();
    let full = lasso_solve_at(model, b, next)?.to_dense();
    let fit_full = inner(b, &(a * full));
    let before = &order[..k - 1];
    let fit_restricted = if before.is_empty() {
        0.0
    } else {
        let sub = a.select_columns(before.iter());
        let h = Homotopy::new(&sub, b, 1, Tolerances::DEFAULT)?;
        let y = h.solve_at(next)?;
        inner(b, &(sub * y))
    };
    Ok((fit_full - fit_restricted) / noise.quadrature_variance())
}
