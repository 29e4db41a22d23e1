//! Knot search by continuation, shared by the lasso (blocks of width 1) and the
//! group lasso (blocks of width 2).
//!
//! The problem is `min 1/2 ||b - Phi y||^2 + tau sum_g ||y_g||` with the columns
//! of block `g` at `g*w .. g*w+w`. Between knots the restricted problem on the
//! current active set is solved by block coordinate descent with warm starts;
//! a knot is the largest `tau` below the previous one at which an inactive
//! block violates `||Phi_g^H r|| <= tau` or an active block is driven to zero.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EventKind {
    Enter,
    Leave,
}

#[derive(Debug, Clone)]
pub(crate) struct Event {
    pub tau: f64,
    pub kind: EventKind,
    pub block: usize,
    /// Active blocks after the event, in entry order.
    pub active: Vec<usize>,
    /// Solution at `tau` on the active set before the event.
    pub solution: DVector<Complex64>,
    /// Crossing values of the blocks that violated the KKT bound inside the
    /// final bracket; the event block carries the knot itself.
    pub candidates: Vec<(usize, f64)>,
}

struct BlockEigen {
    values: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

pub(crate) struct Homotopy {
    width: usize,
    nblocks: usize,
    gram: DMatrix<Complex64>,
    corr0: DVector<Complex64>,
    blocks: Vec<BlockEigen>,
    tol: Tolerances,
    tau1: f64,
    tau: f64,
    active: Vec<usize>,
    y: DVector<Complex64>,
    /// `Phi^H (b - Phi y)` for the current `y`.
    z: DVector<Complex64>,
    /// Block touched by the last event and the knot it happened at; events on
    /// it are ignored in an `O(tol)` window below that knot so numerical noise
    /// cannot undo the event immediately.
    fresh: Option<(usize, f64)>,
    started: bool,
    finished: bool,
}

fn block_norm(v: &DVector<Complex64>, g: usize, w: usize) -> f64 {
    (0..w).map(|j| v[g * w + j].norm_sqr()).sum::<f64>().sqrt()
}

impl Homotopy {
    pub fn new(phi: &DMatrix<Complex64>, b: &DVector<Complex64>, width: usize, tol: Tolerances) -> Result<Self> {
        let p = phi.ncols();
        if width == 0 || !p.is_multiple_of(width) {
            return Err(Error::Contract(format!(
                "{p} columns cannot be split into blocks of width {width}"
            )));
        }
        if phi.nrows() != b.len() {
            return Err(Error::Contract(format!(
                "measurement has length {} but the dictionary has {} rows",
                b.len(),
                phi.nrows()
            )));
        }
        let gram = phi.adjoint() * phi;
        let corr0 = phi.adjoint() * b;
        Ok(Self::from_gram(gram, corr0, width, tol))
    }

    pub fn from_gram(gram: DMatrix<Complex64>, corr0: DVector<Complex64>, width: usize, tol: Tolerances) -> Self {
        let p = gram.ncols();
        let nblocks = p / width;
        let blocks = (0..nblocks)
            .map(|g| {
                let h = gram.view((g * width, g * width), (width, width)).into_owned();
                let eig = SymmetricEigen::new(h);
                BlockEigen {
                    values: eig.eigenvalues.iter().map(|v| v.max(0.0)).collect(),
                    vectors: eig.eigenvectors,
                }
            })
            .collect();
        let tau1 = (0..nblocks)
            .map(|g| block_norm(&corr0, g, width))
            .fold(0.0, f64::max);
        Self {
            width,
            nblocks,
            z: corr0.clone(),
            y: DVector::zeros(p),
            gram,
            corr0,
            blocks,
            tol,
            tau1,
            tau: tau1,
            active: Vec::new(),
            fresh: None,
            started: false,
            finished: false,
        }
    }

    pub fn tau1(&self) -> f64 {
        self.tau1
    }

    fn scale(&self) -> f64 {
        if self.tau1 > 0.0 {
            self.tau1
        } else {
            1.0
        }
    }

    fn margin(&self) -> f64 {
        self.tol.knot_bisection * self.scale()
    }

    /// Minimiser of the block problem given the correlation `q` of block `g`
    /// with its partial residual.
    fn block_update(&self, g: usize, q: &DVector<Complex64>, tau: f64) -> DVector<Complex64> {
        let w = self.width;
        let qn = q.norm();
        if qn <= tau {
            return DVector::zeros(w);
        }
        let be = &self.blocks[g];
        let pv = be.vectors.adjoint() * q;
        let dmax = be.values.iter().cloned().fold(0.0, f64::max);
        if dmax <= 0.0 {
            return DVector::zeros(w);
        }
        // ||y|| = t solves sum |p_i|^2 / (d_i t + tau)^2 = 1; the left side is
        // convex and decreasing in t and the start point lies left of the root,
        // so Newton increases monotonically to it.
        let mut t = (qn - tau) / dmax;
        if tau > 0.0 {
            for _ in 0..100 {
                let mut f = -1.0;
                let mut df = 0.0;
                for (i, d) in be.values.iter().enumerate() {
                    let den = d * t + tau;
                    let a = pv[i].norm_sqr();
                    f += a / (den * den);
                    df -= 2.0 * a * d / (den * den * den);
                }
                if df == 0.0 {
                    break;
                }
                let step = f / df;
                t -= step;
                if step.abs() <= 1e-15 * t.max(1e-300) {
                    break;
                }
            }
        }
        let mut coef = pv;
        for (i, d) in be.values.iter().enumerate() {
            let den = d * t + tau;
            coef[i] *= if den > 0.0 { t / den } else { 0.0 };
        }
        &be.vectors * coef
    }

    /// Block coordinate descent on `active` at `tau`, warm-started from `y`.
    fn solve_restricted(
        &self,
        active: &[usize],
        tau: f64,
        y: &mut DVector<Complex64>,
        z: &mut DVector<Complex64>,
    ) -> Result<()> {
        let w = self.width;
        let stop = self.tol.solver * self.scale();
        for _sweep in 0..self.tol.max_sweeps {
            let mut max_change: f64 = 0.0;
            for &g in active {
                let cols = g * w..g * w + w;
                let old = y.rows(g * w, w).into_owned();
                let hg = self.gram.view((g * w, g * w), (w, w));
                let q = z.rows(g * w, w).into_owned() + hg * &old;
                let new = self.block_update(g, &q, tau);
                let delta = &new - &old;
                let dn = delta.norm();
                if dn > 0.0 {
                    // z -= H[:, g] * delta
                    let hcol = self.gram.columns(cols.start, w);
                    *z -= hcol * &delta;
                    y.rows_mut(g * w, w).copy_from(&new);
                }
                max_change = max_change.max(dn);
            }
            if max_change <= stop {
                return Ok(());
            }
        }
        Err(Error::SolverFailure {
            tau,
            active: active.to_vec(),
            detail: format!("no convergence within {} sweeps", self.tol.max_sweeps),
        })
    }

    /// Signed KKT violation of each block at the given solution:
    /// `||z_g|| - tau` for inactive blocks, `-||y_g||` for active ones (zero
    /// means the block has been driven out).
    fn violations(&self, active: &[usize], tau: f64, y: &DVector<Complex64>, z: &DVector<Complex64>) -> Vec<(usize, f64, EventKind)> {
        let w = self.width;
        let mut out = Vec::new();
        for g in 0..self.nblocks {
            if active.contains(&g) {
                out.push((g, -block_norm(y, g, w), EventKind::Leave));
            } else {
                out.push((g, block_norm(z, g, w) - tau, EventKind::Enter));
            }
        }
        out
    }

    fn has_event(&self, active: &[usize], tau: f64, y: &DVector<Complex64>, z: &DVector<Complex64>) -> bool {
        let margin = self.margin();
        self.violations(active, tau, y, z).into_iter().any(|(g, v, kind)| {
            if self.is_shielded(g, tau) {
                return false;
            }
            match kind {
                EventKind::Enter => v > margin,
                EventKind::Leave => v == 0.0,
            }
        })
    }

    fn is_shielded(&self, g: usize, tau: f64) -> bool {
        match self.fresh {
            Some((f, t)) => f == g && tau > t - 1e3 * self.margin(),
            None => false,
        }
    }

    /// Next support change below the current knot, or `None` once the path
    /// has reached `tau = 0` without further events.
    pub fn next_event(&mut self) -> Result<Option<Event>> {
        self.next_event_above(0.0)
    }

    /// As [`Homotopy::next_event`], but gives up (returning `None` without
    /// ending the path) when no event occurs above `lower`.
    pub fn next_event_above(&mut self, lower: f64) -> Result<Option<Event>> {
        if self.finished {
            return Ok(None);
        }
        let w = self.width;
        if !self.started {
            self.started = true;
            if self.tau1 <= 0.0 {
                self.finished = true;
                return Ok(None);
            }
            let norms: Vec<(usize, f64)> = (0..self.nblocks)
                .map(|g| (g, block_norm(&self.corr0, g, w)))
                .collect();
            // Lowest index wins ties.
            let mut best = 0;
            for &(g, v) in &norms {
                if v > norms[best].1 {
                    best = g;
                }
            }
            self.active.push(best);
            self.fresh = Some((best, self.tau1));
            return Ok(Some(Event {
                tau: self.tau1,
                kind: EventKind::Enter,
                block: best,
                active: self.active.clone(),
                solution: self.y.clone(),
                candidates: norms,
            }));
        }

        let floor = (self.tol.knot_bisection * self.scale()).max(lower);
        let probes = self.tol.knot_probes.max(1);
        let start = self.tau;
        let mut hi = start;
        let mut y_hi = self.y.clone();
        let mut z_hi = self.z.clone();
        let mut bracket: Option<(f64, DVector<Complex64>, DVector<Complex64>)> = None;
        let active = self.active.clone();
        for j in 1..=probes {
            let t = (start * (1.0 - j as f64 / probes as f64)).max(floor);
            if t >= hi {
                continue;
            }
            let mut y = y_hi.clone();
            let mut z = z_hi.clone();
            match self.solve_restricted(&active, t, &mut y, &mut z) {
                Ok(()) => {}
                Err(Error::SolverFailure { .. }) if t <= self.tol.path_floor * self.scale() => break,
                Err(e) => return Err(e),
            }
            if self.has_event(&active, t, &y, &z) {
                bracket = Some((t, y, z));
                break;
            }
            hi = t;
            y_hi = y;
            z_hi = z;
        }
        let Some((mut lo, mut y_lo, mut z_lo)) = bracket else {
            if lower > 0.0 {
                return Ok(None);
            }
            self.finished = true;
            self.tau = hi;
            self.y = y_hi;
            self.z = z_hi;
            return Ok(None);
        };

        let width_stop = self.tol.knot_bisection * self.scale();
        while hi - lo > width_stop {
            let mid = 0.5 * (hi + lo);
            let mut y = y_hi.clone();
            let mut z = z_hi.clone();
            self.solve_restricted(&active, mid, &mut y, &mut z)?;
            if self.has_event(&active, mid, &y, &z) {
                lo = mid;
                y_lo = y;
                z_lo = z;
            } else {
                hi = mid;
                y_hi = y;
                z_hi = z;
            }
        }

        // Interpolate each violating block's crossing inside [lo, hi].
        let margin = self.margin();
        let v_hi = self.violations(&active, hi, &y_hi, &z_hi);
        let v_lo = self.violations(&active, lo, &y_lo, &z_lo);
        let mut candidates = Vec::new();
        let mut best: Option<(usize, f64, EventKind)> = None;
        for ((g, a, kind), (_, c, _)) in v_hi.into_iter().zip(v_lo) {
            if self.is_shielded(g, lo) {
                continue;
            }
            let fired = match kind {
                EventKind::Enter => c > margin,
                EventKind::Leave => c == 0.0,
            };
            if !fired {
                continue;
            }
            let cross = match kind {
                EventKind::Enter if c > a => (hi - a * (hi - lo) / (c - a)).clamp(lo, hi),
                EventKind::Enter => hi,
                EventKind::Leave => lo,
            };
            candidates.push((g, cross));
            let better = match best {
                None => true,
                Some((bg, bt, _)) => cross > bt || (cross == bt && g < bg),
            };
            if better {
                best = Some((g, cross, kind));
            }
        }
        let Some((block, tau, kind)) = best else {
            return Err(Error::SolverFailure {
                tau: lo,
                active,
                detail: "bisection bracket lost its event".into(),
            });
        };

        // Solution at the knot on the pre-event active set.
        let mut y = y_hi;
        let mut z = z_hi;
        self.solve_restricted(&active, tau, &mut y, &mut z)?;
        let solution = y.clone();

        match kind {
            EventKind::Enter => self.active.push(block),
            EventKind::Leave => {
                self.active.retain(|&g| g != block);
                y.rows_mut(block * w, w).fill(Complex64::new(0.0, 0.0));
                z = &self.corr0 - &self.gram * &y;
            }
        }
        self.fresh = Some((block, tau));
        self.tau = tau;
        self.y = y;
        self.z = z;
        Ok(Some(Event {
            tau,
            kind,
            block,
            active: self.active.clone(),
            solution,
            candidates,
        }))
    }

    /// Unrestricted solution at an arbitrary `tau >= 0`: follows the path down
    /// to `tau` and solves there with the active set in force.
    pub fn solve_at(mut self, tau: f64) -> Result<DVector<Complex64>> {
        if tau >= self.tau1 {
            return Ok(DVector::zeros(self.gram.ncols()));
        }
        let target = tau.max(0.0);
        loop {
            let before = self.active.clone();
            let (y0, z0) = (self.y.clone(), self.z.clone());
            match self.next_event_above(target)? {
                Some(ev) if ev.tau > target => continue,
                _ => {
                    // Event (if any) happened at or below the target: solve on
                    // the active set that was in force above it.
                    let mut y = y0;
                    let mut z = z0;
                    self.solve_restricted(&before, target, &mut y, &mut z)?;
                    return Ok(y);
                }
            }
        }
    }
}

/// Largest KKT violation of `y` for the block problem at `tau`, relative to
/// nothing (absolute units of the correlation).
pub(crate) fn kkt_violation(
    gram: &DMatrix<Complex64>,
    corr0: &DVector<Complex64>,
    width: usize,
    y: &DVector<Complex64>,
    tau: f64,
) -> f64 {
    let z = corr0 - gram * y;
    let nb = y.len() / width;
    let mut worst: f64 = 0.0;
    for g in 0..nb {
        let yn = block_norm(y, g, width);
        let zg = z.rows(g * width, width);
        if yn > 0.0 {
            // z_g must equal tau * y_g / ||y_g||.
            let target = y.rows(g * width, width) * Complex64::from(tau / yn);
            worst = worst.max((zg - target).norm());
        } else {
            worst = worst.max(zg.norm() - tau);
        }
    }
    worst
}
