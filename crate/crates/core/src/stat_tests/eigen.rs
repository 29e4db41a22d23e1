//! Eigenvalue contexts for the tests on general and grid-matching models.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::group_lasso_path::GroupDesign;
use crate::signal_model::ArrayModel;
use crate::tolerance::Tolerances;

/// `I - X (X^H X)^{-1} X^H`; fails if `X` has dependent columns.
pub fn residual_projector(x: &DMatrix<Complex64>, cutoff: f64) -> Result<DMatrix<Complex64>> {
    let m = x.nrows();
    let mut q = DMatrix::<Complex64>::identity(m, m);
    if x.ncols() == 0 {
        return Ok(q);
    }
    let gram = x.adjoint() * x;
    let eig = SymmetricEigen::new(gram.clone());
    let scale = eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(1.0);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= cutoff * scale {
        return Err(Error::RankDeficient(format!(
            "{} active columns with smallest Gram eigenvalue {min:.3e}",
            x.ncols()
        )));
    }
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("active Gram matrix is singular".into()))?;
    q -= x * inv * x.adjoint();
    Ok(q)
}

fn hermitian_eigenvalues(h: DMatrix<Complex64>) -> Vec<f64> {
    let h = (&h + h.adjoint()) * Complex64::from(0.5);
    let mut v: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Which spectrum feeds the Test-D product CDF.
///
/// `InactiveGram` takes the nonzero eigenvalues of `R = A_I^H Q A_I` over the
/// inactive columns. `Projector` takes those of `Q` itself, all equal to one.
/// On an oversampled grid the Gram spectrum sums to the number of inactive
/// columns and its threshold is conservative (almost no false alarms). The
/// unit spectrum tracks the upper tail of `max |a_r^H Q v|^2` closely, but the
/// lasso knot exceeds that maximum once neighbours of active columns compete,
/// so it over-rejects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DSpectrum {
    #[default]
    InactiveGram,
    Projector,
}

/// Test-D eigenvalues for active set `J` with the default spectrum.
pub fn testd_eigenvalues(model: &ArrayModel, active: &[usize]) -> Result<Vec<f64>> {
    testd_eigenvalues_for(model.steering(), active, DSpectrum::default(), &Tolerances::DEFAULT)
}

/// At most `M - |J|` values; fails if the active columns are dependent.
pub fn testd_eigenvalues_for(
    a: &DMatrix<Complex64>,
    active: &[usize],
    spectrum: DSpectrum,
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    let m = a.nrows();
    let n = a.ncols();
    for &j in active {
        if j >= n {
            return Err(Error::OutOfRange { index: j, len: n });
        }
    }
    let aj = a.select_columns(active.iter());
    let q = residual_projector(&aj, tol.eigen_cutoff)?;
    let h = match spectrum {
        DSpectrum::Projector => q,
        DSpectrum::InactiveGram => {
            let inactive: Vec<usize> = (0..n).filter(|k| !active.contains(k)).collect();
            // Same nonzero spectrum as R, computed on the smaller M x M side.
            let qa = &q * a.select_columns(inactive.iter());
            &qa * qa.adjoint()
        }
    };
    let limit = m.saturating_sub(active.len());
    Ok(hermitian_eigenvalues(h)
        .into_iter()
        .filter(|&v| v >= tol.eigen_cutoff)
        .take(limit)
        .collect())
}

/// Per inactive group, the eigenvalues `(rho, eps)` of `P_g^H Q P_g`, where `Q`
/// projects out the active groups' columns.
pub fn teste_eigen_pairs(model: &ArrayModel, active: &[usize]) -> Result<Vec<(f64, f64)>> {
    let design = GroupDesign::from_model(model)?;
    teste_eigen_pairs_for(&design, active, &Tolerances::DEFAULT)
}

pub fn teste_eigen_pairs_for(design: &GroupDesign, active: &[usize], tol: &Tolerances) -> Result<Vec<(f64, f64)>> {
    let ng = design.num_groups();
    for &g in active {
        if g >= ng {
            return Err(Error::OutOfRange { index: g, len: ng });
        }
    }
    let q = residual_projector(&design.columns_of(active), tol.eigen_cutoff)?;
    let mut out = Vec::with_capacity(ng - active.len());
    for g in (0..ng).filter(|g| !active.contains(g)) {
        let pg = design.group(g);
        let ev = hermitian_eigenvalues(pg.adjoint() * &q * pg);
        let rho = ev[0].max(0.0);
        let eps = ev[1].max(0.0);
        let clip = |v: f64| if v < tol.eigen_cutoff { 0.0 } else { v };
        out.push((clip(rho), clip(eps)));
    }
    Ok(out)
}
