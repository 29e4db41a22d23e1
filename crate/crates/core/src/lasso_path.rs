//! Knots of the complex lasso path.
//!
//! For a unitary steering matrix the knots are the sorted magnitudes of
//! `A^H b` and the path is soft thresholding. For a fat matrix the knots are
//! found by continuation (see the `homotopy` module).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homotopy::{kkt_violation, Event, EventKind, Homotopy};
use crate::serde_complex;
use crate::signal_model::ArrayModel;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathEvent {
    Enter,
    Leave,
}

impl From<EventKind> for PathEvent {
    fn from(k: EventKind) -> Self {
        match k {
            EventKind::Enter => PathEvent::Enter,
            EventKind::Leave => PathEvent::Leave,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Orthogonal,
    General,
}

/// Nonzero entries of a length-`len` complex vector, sorted by index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    pub len: usize,
    #[serde(with = "serde_complex::pairs")]
    pub entries: Vec<(usize, Complex64)>,
}

impl SparseVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            entries: Vec::new(),
        }
    }

    pub fn from_dense(v: &DVector<Complex64>) -> Self {
        let entries = v
            .iter()
            .enumerate()
            .filter(|(_, z)| **z != Complex64::new(0.0, 0.0))
            .map(|(i, z)| (i, *z))
            .collect();
        Self {
            len: v.len(),
            entries,
        }
    }

    pub fn to_dense(&self) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.len);
        for &(i, z) in &self.entries {
            v[i] = z;
        }
        v
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize) -> Complex64 {
        self.entries
            .iter()
            .find(|(j, _)| *j == i)
            .map(|(_, z)| *z)
            .unwrap_or_default()
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|(i, _)| *i).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub tau: f64,
    pub event: PathEvent,
    /// Index whose status changes at this knot (entering or leaving).
    pub entering_index: usize,
    /// Active set after the event, in entry order.
    pub active_set: Vec<usize>,
    /// Lasso solution at `tau`; the entering coefficient is still zero here.
    pub solution: SparseVector,
    /// `(index, Lambda)` pairs from the knot search.
    pub lambda_candidates: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotPath {
    pub knots: Vec<Knot>,
    pub model_kind: ModelKind,
}

impl KnotPath {
    /// Knots at which the active set grows, in path order.
    pub fn entries(&self) -> impl Iterator<Item = &Knot> {
        self.knots.iter().filter(|k| k.event == PathEvent::Enter)
    }

    /// `tau` of the `k`-th entry knot (1-based), zero past the end of the path.
    pub fn entry_tau(&self, k: usize) -> f64 {
        if k == 0 {
            return f64::INFINITY;
        }
        self.entries().nth(k - 1).map(|kn| kn.tau).unwrap_or(0.0)
    }

    /// Entry-knot `tau` values, largest first.
    pub fn taus(&self) -> Vec<f64> {
        self.entries().map(|k| k.tau).collect()
    }

    /// Indices in order of entry.
    pub fn entry_order(&self) -> Vec<usize> {
        self.entries().map(|k| k.entering_index).collect()
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }
}

fn soft_threshold(c: Complex64, tau: f64) -> Complex64 {
    let m = c.norm();
    if m > tau {
        c * ((m - tau) / m)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Closed-form path for a unitary steering matrix.
pub fn orthogonal_knots(model: &ArrayModel, b: &DVector<Complex64>) -> Result<KnotPath> {
    if !model.is_orthogonal() {
        return Err(Error::Contract(
            "orthogonal_knots requires a unitary steering matrix".into(),
        ));
    }
    Ok(orthogonal_knots_from_projection(&model.correlate(b)))
}

/// Path of `min 1/2 ||c - x||^2 + tau ||x||_1`, i.e. the lasso for `A^H A = I`
/// with `c = A^H b`.
pub fn orthogonal_knots_from_projection(c: &DVector<Complex64>) -> KnotPath {
    let n = c.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the lowest index first among equal magnitudes.
    order.sort_by(|&i, &j| c[j].norm().total_cmp(&c[i].norm()));
    let mut knots = Vec::with_capacity(n);
    for (k, &idx) in order.iter().enumerate() {
        let tau = c[idx].norm();
        let solution = SparseVector {
            len: n,
            entries: order[..k]
                .iter()
                .map(|&j| (j, soft_threshold(c[j], tau)))
                .filter(|(_, z)| z.norm() > 0.0)
                .collect::<Vec<_>>(),
        };
        let mut solution = solution;
        solution.entries.sort_by_key(|e| e.0);
        knots.push(Knot {
            tau,
            event: PathEvent::Enter,
            entering_index: idx,
            active_set: order[..=k].to_vec(),
            solution,
            lambda_candidates: vec![(idx, tau)],
        });
    }
    KnotPath {
        knots,
        model_kind: ModelKind::Orthogonal,
    }
}

/// Incremental lasso homotopy: yields one knot per call.
pub struct LassoHomotopy {
    engine: Homotopy,
    kind: ModelKind,
}

impl LassoHomotopy {
    pub fn new(model: &ArrayModel, b: &DVector<Complex64>, tol: Tolerances) -> Result<Self> {
        Self::from_dictionary(model.steering(), b, tol).map(|mut h| {
            h.kind = if model.is_orthogonal() {
                ModelKind::Orthogonal
            } else {
                ModelKind::General
            };
            h
        })
    }

    pub fn from_dictionary(a: &DMatrix<Complex64>, b: &DVector<Complex64>, tol: Tolerances) -> Result<Self> {
        for (k, col) in a.column_iter().enumerate() {
            let n = col.norm();
            if (n - 1.0).abs() > 1e-10 {
                return Err(Error::Contract(format!(
                    "column {k} has norm {n}, expected unit norm"
                )));
            }
        }
        Ok(Self {
            engine: Homotopy::new(a, b, 1, tol)?,
            kind: ModelKind::General,
        })
    }

    pub fn tau1(&self) -> f64 {
        self.engine.tau1()
    }

    pub fn next_knot(&mut self) -> Result<Option<Knot>> {
        Ok(self.engine.next_event()?.map(knot_from_event))
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }
}

fn knot_from_event(ev: Event) -> Knot {
    Knot {
        tau: ev.tau,
        event: ev.kind.into(),
        entering_index: ev.block,
        active_set: ev.active,
        solution: SparseVector::from_dense(&ev.solution),
        lambda_candidates: ev.candidates,
    }
}

/// Path of the lasso for a general steering matrix, up to `max_knots` entry
/// knots (removals are recorded but not counted).
pub fn general_knots(model: &ArrayModel, b: &DVector<Complex64>, max_knots: usize) -> Result<KnotPath> {
    general_knots_with(model, b, max_knots, Tolerances::DEFAULT)
}

pub fn general_knots_with(
    model: &ArrayModel,
    b: &DVector<Complex64>,
    max_knots: usize,
    tol: Tolerances,
) -> Result<KnotPath> {
    if max_knots > model.num_elements() {
        return Err(Error::Contract(format!(
            "max_knots {max_knots} exceeds the number of elements {}",
            model.num_elements()
        )));
    }
    let mut h = LassoHomotopy::new(model, b, tol)?;
    let mut knots = Vec::new();
    let mut entries = 0;
    // Removals can repeat in principle; bound total events generously.
    let cap = 4 * model.num_grid() + max_knots;
    while entries < max_knots && knots.len() < cap {
        match h.next_knot()? {
            Some(k) => {
                if k.event == PathEvent::Enter {
                    entries += 1;
                }
                knots.push(k);
            }
            None => break,
        }
    }
    Ok(KnotPath {
        knots,
        model_kind: ModelKind::General,
    })
}

/// Minimiser of `1/2 ||b - A x||^2 + tau ||x||_1`.
pub fn lasso_solve_at(model: &ArrayModel, b: &DVector<Complex64>, tau: f64) -> Result<SparseVector> {
    if tau < 0.0 {
        return Err(Error::Contract(format!("tau must be non-negative, got {tau}")));
    }
    if model.is_orthogonal() {
        let c = model.correlate(b);
        return Ok(SparseVector::from_dense(&c.map(|z| soft_threshold(z, tau))));
    }
    let h = Homotopy::new(model.steering(), b, 1, Tolerances::DEFAULT)?;
    Ok(SparseVector::from_dense(&h.solve_at(tau)?))
}

/// Largest deviation from the lasso optimality conditions at `tau`.
pub fn lasso_kkt_violation(model: &ArrayModel, b: &DVector<Complex64>, x: &SparseVector, tau: f64) -> f64 {
    kkt_violation(model.gram(), &model.correlate(b), 1, &x.to_dense(), tau)
}

/// `1/2 ||b - A x||^2 + tau ||x||_1`.
pub fn lasso_objective(a: &DMatrix<Complex64>, b: &DVector<Complex64>, x: &DVector<Complex64>, tau: f64) -> f64 {
    0.5 * (b - a * x).norm_squared() + tau * x.iter().map(|z| z.norm()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::{build_array_model, synthesize, ArrayConfig, GridMode, Scenario};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_steering_example() {
        let b = DVector::from_vec(vec![c(3.0, 0.0), c(0.0, 1.0), c(-2.0, 0.0)]);
        let path = orthogonal_knots_from_projection(&b);
        assert_eq!(path.taus(), vec![3.0, 2.0, 1.0]);
        assert_eq!(path.entry_order(), vec![0, 2, 1]);
        assert_eq!(path.knots[2].solution.get(0), c(2.0, 0.0));
        assert_eq!(path.knots[2].solution.get(2), c(-1.0, 0.0));
    }

    #[test]
    fn knot_k_has_k_minus_one_nonzeros() {
        let md = build_array_model(&ArrayConfig::new(8, 8), GridMode::Orthogonal).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let b = DVector::from_fn(8, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let path = orthogonal_knots(&md, &b).unwrap();
            for (k, kn) in path.knots.iter().enumerate() {
                assert_eq!(kn.solution.nnz(), k);
                assert!(lasso_kkt_violation(&md, &b, &kn.solution, kn.tau) <= 1e-8);
            }
        }
    }

    #[test]
    fn orthogonal_requires_unitary() {
        let md = build_array_model(&ArrayConfig::new(8, 16), GridMode::Oversampled).unwrap();
        let b = DVector::from_element(8, c(1.0, 0.0));
        assert!(matches!(orthogonal_knots(&md, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn general_matches_orthogonal() {
        let md = build_array_model(&ArrayConfig::new(8, 8), GridMode::Orthogonal).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let b = DVector::from_fn(8, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let o = orthogonal_knots(&md, &b).unwrap();
            let g = general_knots(&md, &b, 8).unwrap();
            assert_eq!(o.entry_order(), g.entry_order());
            for (a, b) in o.taus().iter().zip(g.taus()) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn oversampled_noiseless_two_sources() {
        let md = build_array_model(&ArrayConfig::new(8, 16), GridMode::Oversampled).unwrap();
        let scen = Scenario::on_grid(vec![6, 9], f64::INFINITY);
        let snap = synthesize(&md, &scen, 0).unwrap();
        let path = general_knots(&md, &snap.measurement(), 3).unwrap();
        let mut first: Vec<usize> = path.entry_order()[..2].to_vec();
        first.sort();
        assert_eq!(first, vec![6, 9]);
        for kn in &path.knots {
            assert!(lasso_kkt_violation(&md, &snap.measurement(), &kn.solution, kn.tau) <= 1e-8);
        }
        let taus = path.taus();
        assert!(taus.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn solve_at_limits() {
        let md = build_array_model(&ArrayConfig::new(8, 16), GridMode::Oversampled).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = DVector::from_fn(8, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let tau1 = md.correlate(&b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert_eq!(lasso_solve_at(&md, &b, tau1).unwrap().nnz(), 0);
        assert_eq!(lasso_solve_at(&md, &b, 2.0 * tau1).unwrap().nnz(), 0);
        for frac in [0.7, 0.3, 0.05] {
            let x = lasso_solve_at(&md, &b, frac * tau1).unwrap();
            assert!(lasso_kkt_violation(&md, &b, &x, frac * tau1) <= 1e-8);
        }
    }

    #[test]
    fn solve_at_zero_is_least_squares() {
        let md = build_array_model(&ArrayConfig::new(8, 8), GridMode::Orthogonal).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = DVector::from_fn(8, |_, _| c(rng.random::<f64>(), rng.random::<f64>()));
        let x = lasso_solve_at(&md, &b, 0.0).unwrap().to_dense();
        let r = md.correlate(&(&b - md.steering() * x));
        assert!(r.norm() < 1e-8);
    }
}
