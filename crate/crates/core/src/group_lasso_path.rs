//! Group-lasso path for the grid-matching model `b_bar = [I | G] y + v`.
//!
//! Group `g` pairs the canonical vector `e_g` with column `g_g` of
//! `G = A^H D A`; the coefficients `(y_g1, y_g2)` stand for `(x_g, c_g x_g)`.
//! The coupling is not imposed while solving, only when offsets are read off.
//!
//! The second column of every group is scaled to unit norm. With the raw
//! columns the shrinkage residual of a single on-grid source already
//! correlates with neighbouring `g_j` strongly enough to open extra knots, so
//! even a noiseless on-grid source is over-counted. The scale is kept and
//! undone when the coupling is read off: `c_g = y_g2 / (||g_g|| y_g1)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homotopy::{kkt_violation, Event, Homotopy};
use crate::lasso_path::PathEvent;
use crate::signal_model::ArrayModel;
use crate::tolerance::Tolerances;

/// Dictionary `P` with interleaved columns `[e_0, g_0, e_1, g_1, ..]`.
#[derive(Debug, Clone)]
pub struct GroupDesign {
    matrix: DMatrix<Complex64>,
    num_groups: usize,
    scales: Vec<f64>,
}

impl GroupDesign {
    pub fn from_model(model: &ArrayModel) -> Result<Self> {
        let g = model.matching_operator().ok_or_else(|| {
            Error::Contract("grid matching requires an orthogonal model".into())
        })?;
        Ok(Self::from_matching(g))
    }

    /// Build from an arbitrary `N x N` second-column matrix. Zero columns
    /// stay zero.
    pub fn from_matching(g: &DMatrix<Complex64>) -> Self {
        let n = g.nrows();
        let mut matrix = DMatrix::zeros(n, 2 * n);
        let mut scales = Vec::with_capacity(n);
        for k in 0..n {
            matrix[(k, 2 * k)] = Complex64::new(1.0, 0.0);
            let norm = g.column(k).norm();
            if norm > 0.0 {
                matrix.set_column(2 * k + 1, &(g.column(k) / Complex64::from(norm)));
            }
            scales.push(norm);
        }
        Self {
            matrix,
            num_groups: n,
            scales,
        }
    }

    /// `||g_g||` before scaling.
    pub fn scale(&self, g: usize) -> f64 {
        self.scales[g]
    }

    /// Coupling `y_g2 / (||g_g|| y_g1)` in the units of the raw `G`, or
    /// `None` when the first coefficient or the column vanishes.
    pub fn coupling(&self, coef: &GroupCoef, min_magnitude: f64) -> Option<Complex64> {
        let s = self.scales[coef.group];
        if coef.first.norm() < min_magnitude || s < min_magnitude {
            return None;
        }
        Some(coef.second / (coef.first * s))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    /// `P_g = [e_g | g_g]`.
    pub fn group(&self, g: usize) -> DMatrix<Complex64> {
        self.matrix.columns(2 * g, 2).into_owned()
    }

    /// Columns of the groups in `set`, in the given order.
    pub fn columns_of(&self, set: &[usize]) -> DMatrix<Complex64> {
        let n = self.matrix.nrows();
        let mut out = DMatrix::zeros(n, 2 * set.len());
        for (j, &g) in set.iter().enumerate() {
            out.columns_mut(2 * j, 2).copy_from(&self.matrix.columns(2 * g, 2));
        }
        out
    }
}

/// Coefficients `(y_g1, y_g2)` of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCoef {
    pub group: usize,
    pub first: Complex64,
    pub second: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupKnot {
    pub tau: f64,
    pub event: PathEvent,
    pub entering_group: usize,
    pub active_groups: Vec<usize>,
    /// Nonzero groups of the solution at `tau`.
    pub solution: Vec<GroupCoef>,
    pub lambda_candidates: Vec<(usize, f64)>,
}

impl GroupKnot {
    pub fn coef(&self, g: usize) -> Option<&GroupCoef> {
        self.solution.iter().find(|c| c.group == g)
    }
}

pub(crate) fn coefs_from_dense(y: &DVector<Complex64>) -> Vec<GroupCoef> {
    (0..y.len() / 2)
        .filter(|&g| y[2 * g].norm() > 0.0 || y[2 * g + 1].norm() > 0.0)
        .map(|g| GroupCoef {
            group: g,
            first: y[2 * g],
            second: y[2 * g + 1],
        })
        .collect()
}

pub(crate) fn coefs_to_dense(coefs: &[GroupCoef], num_groups: usize) -> DVector<Complex64> {
    let mut y = DVector::zeros(2 * num_groups);
    for c in coefs {
        y[2 * c.group] = c.first;
        y[2 * c.group + 1] = c.second;
    }
    y
}

fn knot_from_event(ev: Event) -> GroupKnot {
    GroupKnot {
        tau: ev.tau,
        event: ev.kind.into(),
        entering_group: ev.block,
        active_groups: ev.active,
        solution: coefs_from_dense(&ev.solution),
        lambda_candidates: ev.candidates,
    }
}

/// Incremental group-lasso homotopy.
pub struct GroupHomotopy {
    engine: Homotopy,
}

impl GroupHomotopy {
    pub fn new(design: &GroupDesign, b_bar: &DVector<Complex64>, tol: Tolerances) -> Result<Self> {
        Ok(Self {
            engine: Homotopy::new(design.matrix(), b_bar, 2, tol)?,
        })
    }

    pub fn tau1(&self) -> f64 {
        self.engine.tau1()
    }

    pub fn next_knot(&mut self) -> Result<Option<GroupKnot>> {
        Ok(self.engine.next_event()?.map(knot_from_event))
    }
}

/// Group-lasso knots up to `max_knots` entry events.
pub fn group_knots(model: &ArrayModel, b_bar: &DVector<Complex64>, max_knots: usize) -> Result<Vec<GroupKnot>> {
    let design = GroupDesign::from_model(model)?;
    group_knots_for(&design, b_bar, max_knots, Tolerances::DEFAULT)
}

pub fn group_knots_for(
    design: &GroupDesign,
    b_bar: &DVector<Complex64>,
    max_knots: usize,
    tol: Tolerances,
) -> Result<Vec<GroupKnot>> {
    let mut h = GroupHomotopy::new(design, b_bar, tol)?;
    let mut out = Vec::new();
    let mut entries = 0;
    let cap = 4 * design.num_groups() + max_knots;
    while entries < max_knots && out.len() < cap {
        match h.next_knot()? {
            Some(k) => {
                if k.event == PathEvent::Enter {
                    entries += 1;
                }
                out.push(k);
            }
            None => break,
        }
    }
    Ok(out)
}

/// Minimiser of `1/2 ||b_bar - P y||^2 + tau sum_g ||y_g||`.
pub fn group_solve_at(model: &ArrayModel, b_bar: &DVector<Complex64>, tau: f64) -> Result<Vec<GroupCoef>> {
    let design = GroupDesign::from_model(model)?;
    group_solve_for(&design, b_bar, tau)
}

pub fn group_solve_for(design: &GroupDesign, b_bar: &DVector<Complex64>, tau: f64) -> Result<Vec<GroupCoef>> {
    if tau < 0.0 {
        return Err(Error::Contract(format!("tau must be non-negative, got {tau}")));
    }
    let h = Homotopy::new(design.matrix(), b_bar, 2, Tolerances::DEFAULT)?;
    Ok(coefs_from_dense(&h.solve_at(tau)?))
}

/// Largest deviation from the group optimality conditions.
pub fn group_kkt_violation(design: &GroupDesign, b_bar: &DVector<Complex64>, coefs: &[GroupCoef], tau: f64) -> f64 {
    let p = design.matrix();
    let y = coefs_to_dense(coefs, design.num_groups());
    kkt_violation(&(p.adjoint() * p), &(p.adjoint() * b_bar), 2, &y, tau)
}

/// Primal objective minus the value of the scaled-residual dual point.
pub fn group_duality_gap(design: &GroupDesign, b_bar: &DVector<Complex64>, coefs: &[GroupCoef], tau: f64) -> f64 {
    let p = design.matrix();
    let y = coefs_to_dense(coefs, design.num_groups());
    let r = b_bar - p * &y;
    let penalty: f64 = (0..design.num_groups())
        .map(|g| (y[2 * g].norm_sqr() + y[2 * g + 1].norm_sqr()).sqrt())
        .sum();
    let primal = 0.5 * r.norm_squared() + tau * penalty;
    let corr = p.adjoint() * &r;
    let worst = (0..design.num_groups())
        .map(|g| (corr[2 * g].norm_sqr() + corr[2 * g + 1].norm_sqr()).sqrt())
        .fold(0.0, f64::max);
    let s = if worst > tau { tau / worst } else { 1.0 };
    let u = r * Complex64::from(s);
    let dual = 0.5 * b_bar.norm_squared() - 0.5 * (b_bar - u).norm_squared();
    primal - dual
}
