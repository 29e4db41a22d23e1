//! Detection: walk the knots with a test, stop at the first decision, and
//! report the support, amplitudes and (grid matching) offsets.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group_lasso_path::{GroupCoef, GroupDesign, GroupHomotopy};
use crate::lasso_path::{orthogonal_knots, LassoHomotopy, PathEvent, SparseVector};
use crate::signal_model::{ArrayModel, Scenario};
use crate::stat_tests::{self, estimate_sigma2, DSpectrum, ModelRequirement, NoiseLevel, TestKind};
use crate::thresholds::{build_table, ActiveSetThresholds, ThresholdTable};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanDirection {
    /// From the smallest knot towards the largest; stop at the first
    /// rejection of the noise hypothesis.
    Upward,
    /// From the largest knot down; stop at the first knot that looks like
    /// noise.
    Forward,
}

impl ScanDirection {
    pub fn default_for(test: TestKind) -> Self {
        match test {
            TestKind::D | TestKind::E => ScanDirection::Forward,
            _ => ScanDirection::Upward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaSpec {
    Known(NoiseLevel),
    /// Residual of the least-squares fit on the first `M - 1` entries.
    Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectOptions {
    pub test: TestKind,
    pub pc: f64,
    pub sigma: Option<SigmaSpec>,
    pub scan: Option<ScanDirection>,
    /// Least-squares refit of the amplitudes on the detected support.
    pub refit: bool,
    /// Follow the path at least this many entries even after stopping, so
    /// that the entry order can be scored.
    pub min_path_entries: usize,
    /// Eigenvalues behind the Test-D threshold.
    pub d_spectrum: DSpectrum,
    pub tol: Tolerances,
}

impl DetectOptions {
    pub fn new(test: TestKind, pc: f64) -> Self {
        Self {
            test,
            pc,
            sigma: None,
            scan: None,
            refit: false,
            min_path_entries: 0,
            d_spectrum: DSpectrum::default(),
            tol: Tolerances::DEFAULT,
        }
    }

    pub fn with_noise(mut self, noise: NoiseLevel) -> Self {
        self.sigma = Some(SigmaSpec::Known(noise));
        self
    }

    pub fn with_sigma(mut self, sigma: SigmaSpec) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_scan(mut self, scan: ScanDirection) -> Self {
        self.scan = Some(scan);
        self
    }

    pub fn with_refit(mut self, refit: bool) -> Self {
        self.refit = refit;
        self
    }

    pub fn with_d_spectrum(mut self, spectrum: DSpectrum) -> Self {
        self.d_spectrum = spectrum;
        self
    }

    pub fn with_min_path_entries(mut self, n: usize) -> Self {
        self.min_path_entries = n;
        self
    }

    pub fn scan(&self) -> ScanDirection {
        self.scan.unwrap_or_else(|| ScanDirection::default_for(self.test))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1-based entry-knot position.
    pub knot: usize,
    pub tau: f64,
    pub statistic: f64,
    pub threshold: f64,
    /// The noise hypothesis was rejected at this knot.
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub s_hat: usize,
    pub tau_hat: f64,
    /// Detected grid indices in entry order.
    pub support: Vec<usize>,
    pub angles: Vec<f64>,
    /// Offset per detected source in grid-matching mode; `None` where the
    /// first group coefficient is too small to carry one.
    pub offsets: Vec<Option<f64>>,
    pub amplitudes: Vec<Complex64>,
    pub test_used: TestKind,
    pub trace: Vec<TraceEntry>,
    /// Path entries seen, in order.
    pub entry_order: Vec<usize>,
    /// Noise variance the statistics were normalised with.
    pub sigma2: f64,
}

/// Detector bound to a model and test; caches thresholds across calls.
pub struct Detector {
    model: ArrayModel,
    opts: DetectOptions,
    table: Option<ThresholdTable>,
    active_thresholds: Option<ActiveSetThresholds>,
    design: Option<GroupDesign>,
}

impl Clone for Detector {
    fn clone(&self) -> Self {
        // The active-set memo is per detector; a clone starts empty.
        Detector::new(self.model.clone(), self.opts.clone()).expect("options were validated")
    }
}

impl Detector {
    pub fn new(model: ArrayModel, opts: DetectOptions) -> Result<Self> {
        let test = opts.test;
        match test.requirement() {
            ModelRequirement::Orthogonal | ModelRequirement::GridMatching if !model.is_orthogonal() => {
                return Err(Error::Contract(format!("test {test} needs an orthogonal model")));
            }
            _ => {}
        }
        if test.needs_sigma() && opts.sigma.is_none() {
            return Err(Error::InvalidConfig(format!(
                "test {test} needs a noise level (known or estimated)"
            )));
        }
        let (table, active_thresholds) = match test.requirement() {
            ModelRequirement::Orthogonal => (Some(build_table(test, &model, opts.pc)?), None),
            _ => (
                None,
                Some(ActiveSetThresholds::new(test, &model, opts.pc)?.with_spectrum(opts.d_spectrum)),
            ),
        };
        let design = if test == TestKind::E {
            Some(GroupDesign::from_model(&model)?)
        } else {
            None
        };
        Ok(Self {
            model,
            opts,
            table,
            active_thresholds,
            design,
        })
    }

    pub fn model(&self) -> &ArrayModel {
        &self.model
    }

    pub fn options(&self) -> &DetectOptions {
        &self.opts
    }

    pub fn table(&self) -> Option<&ThresholdTable> {
        self.table.as_ref()
    }

    /// Run detection on the measurement `b` (element space).
    pub fn detect(&mut self, b: &DVector<Complex64>) -> Result<DetectionResult> {
        if b.len() != self.model.num_elements() {
            return Err(Error::Contract(format!(
                "snapshot has {} samples, model has {} elements",
                b.len(),
                self.model.num_elements()
            )));
        }
        match self.opts.test {
            TestKind::D => self.detect_general(b),
            TestKind::E => self.detect_grid_matching(b),
            _ => self.detect_orthogonal(b),
        }
    }

    fn noise(&self, estimate: impl FnOnce() -> Result<f64>) -> Result<NoiseLevel> {
        match self.opts.sigma {
            Some(SigmaSpec::Known(n)) => Ok(n),
            Some(SigmaSpec::Estimate) | None => {
                let s2 = estimate()?;
                NoiseLevel::from_variance(s2).map_err(|_| {
                    Error::Estimation(format!("estimated noise variance {s2} is not positive"))
                })
            }
        }
    }

    fn detect_orthogonal(&mut self, b: &DVector<Complex64>) -> Result<DetectionResult> {
        let test = self.opts.test;
        let m = self.model.num_elements();
        let path = orthogonal_knots(&self.model, b)?;
        let taus = path.taus();
        let order = path.entry_order();
        let table = self.table.as_ref().expect("orthogonal tests carry a table");

        let sigma_hat2 = if test == TestKind::C {
            let s = estimate_sigma2(&self.model, b, &path)?;
            if !(s > 0.0) {
                return Err(Error::Estimation(format!(
                    "estimated noise variance {s} is not positive"
                )));
            }
            s
        } else {
            0.0
        };
        let noise = if test == TestKind::C {
            NoiseLevel::from_variance(sigma_hat2)?
        } else {
            self.noise(|| estimate_sigma2(&self.model, b, &path))?
        };

        let statistic = |k: usize| -> Result<f64> {
            match test {
                TestKind::CovExact | TestKind::CovAsymptotic => stat_tests::stat_cov(&taus, k, noise),
                TestKind::A => stat_tests::stat_a(&taus, k, noise),
                TestKind::B => stat_tests::stat_b(&taus, k, noise),
                TestKind::C => stat_tests::stat_c(&taus, k, sigma_hat2),
                _ => unreachable!(),
            }
        };
        let last = if test == TestKind::C { m - 1 } else { m };
        let mut trace = Vec::new();
        let mut s_hat = None;
        let knots: Vec<usize> = match self.opts.scan() {
            ScanDirection::Upward => (1..=last).rev().collect(),
            ScanDirection::Forward => (1..=last).collect(),
        };
        for k in knots {
            let stat = statistic(k)?;
            let eta = table.eta_at(k).expect("table covers every knot");
            let reject = stat >= eta;
            trace.push(TraceEntry {
                knot: k,
                tau: taus[k - 1],
                statistic: stat,
                threshold: eta,
                reject,
            });
            match self.opts.scan() {
                ScanDirection::Upward if reject => {
                    s_hat = Some(k);
                    break;
                }
                ScanDirection::Forward if !reject => {
                    s_hat = Some(k - 1);
                    break;
                }
                _ => {}
            }
        }
        let s_hat = s_hat.unwrap_or(match self.opts.scan() {
            ScanDirection::Upward => 0,
            ScanDirection::Forward => last,
        });

        let support = order[..s_hat].to_vec();
        let c = self.model.correlate(b);
        // Amplitudes at the knot where the next entrant is about to join:
        // every detected coefficient is nonzero there.
        let below = path.entry_tau(s_hat + 1);
        let amplitudes = support
            .iter()
            .map(|&j| {
                if self.opts.refit {
                    c[j]
                } else {
                    let mag = c[j].norm();
                    c[j] * ((mag - below) / mag)
                }
            })
            .collect();
        Ok(self.finish(s_hat, &taus, support, amplitudes, Vec::new(), trace, order, noise.variance()))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        s_hat: usize,
        taus: &[f64],
        support: Vec<usize>,
        amplitudes: Vec<Complex64>,
        offsets: Vec<Option<f64>>,
        trace: Vec<TraceEntry>,
        entry_order: Vec<usize>,
        sigma2: f64,
    ) -> DetectionResult {
        let grid = self.model.grid();
        let angles = support
            .iter()
            .enumerate()
            .map(|(i, &j)| grid[j] + offsets.get(i).copied().flatten().unwrap_or(0.0))
            .collect();
        let tau_hat = if s_hat == 0 {
            taus.first().copied().unwrap_or(0.0)
        } else {
            taus[s_hat - 1]
        };
        DetectionResult {
            s_hat,
            tau_hat,
            support,
            angles,
            offsets,
            amplitudes,
            test_used: self.opts.test,
            trace,
            entry_order,
            sigma2,
        }
    }

    fn detect_general(&mut self, b: &DVector<Complex64>) -> Result<DetectionResult> {
        let noise = match self.opts.sigma {
            Some(SigmaSpec::Known(n)) => n,
            _ => {
                return Err(Error::InvalidConfig(
                    "test D needs a known noise level".into(),
                ))
            }
        };
        let m = self.model.num_elements();
        let mut h = LassoHomotopy::new(&self.model, b, self.opts.tol)?;
        let entries = collect_entries(m, self.opts.scan(), self.opts.min_path_entries, || {
            Ok(h.next_knot()?.map(|k| {
                let mut before = k.active_set.clone();
                if k.event == PathEvent::Enter {
                    before.retain(|&j| j != k.entering_index);
                }
                PathStep {
                    tau: k.tau,
                    enter: k.event == PathEvent::Enter,
                    index: k.entering_index,
                    before,
                    solution: k.solution.to_dense(),
                }
            }))
        }, &mut |active: &[usize], tau: f64| {
            let eta = saturated_eta(self.active_thresholds.as_mut().unwrap().eta(active))?;
            Ok((stat_tests::stat_d(tau, noise), eta))
        })?;
        let (s_hat, support, solution, trace, order, taus) = entries;
        let amplitudes: Vec<Complex64> = match solution.filter(|_| !self.opts.refit) {
            Some(y) => support.iter().map(|&j| y[j]).collect(),
            None => least_squares(&self.model.steering().select_columns(support.iter()), b)?
                .iter()
                .copied()
                .collect(),
        };
        Ok(self.finish(s_hat, &taus, support, amplitudes, Vec::new(), trace, order, noise.variance()))
    }

    fn detect_grid_matching(&mut self, b: &DVector<Complex64>) -> Result<DetectionResult> {
        let noise = match self.opts.sigma {
            Some(SigmaSpec::Known(n)) => n,
            _ => {
                return Err(Error::InvalidConfig(
                    "test E needs a known noise level".into(),
                ))
            }
        };
        let m = self.model.num_elements();
        let b_bar = self.model.project(b)?;
        let design = self.design.clone().expect("grid matching carries a design");
        let mut h = GroupHomotopy::new(&design, &b_bar, self.opts.tol)?;
        let entries = collect_entries(m, self.opts.scan(), self.opts.min_path_entries, || {
            Ok(h.next_knot()?.map(|k| {
                let mut before = k.active_groups.clone();
                if k.event == PathEvent::Enter {
                    before.retain(|&j| j != k.entering_group);
                }
                let mut y = DVector::zeros(2 * design.num_groups());
                for c in &k.solution {
                    y[2 * c.group] = c.first;
                    y[2 * c.group + 1] = c.second;
                }
                PathStep {
                    tau: k.tau,
                    enter: k.event == PathEvent::Enter,
                    index: k.entering_group,
                    before,
                    solution: y,
                }
            }))
        }, &mut |active: &[usize], tau: f64| {
            let eta = saturated_eta(self.active_thresholds.as_mut().unwrap().eta(active))?;
            Ok((stat_tests::stat_e(tau, noise), eta))
        })?;
        let (s_hat, support, solution, trace, order, taus) = entries;
        let coefs: Vec<GroupCoef> = if let Some(y) = solution.filter(|_| !self.opts.refit) {
            support
                .iter()
                .map(|&g| GroupCoef {
                    group: g,
                    first: y[2 * g],
                    second: y[2 * g + 1],
                })
                .collect()
        } else {
            let y = least_squares(&design.columns_of(&support), &b_bar)?;
            support
                .iter()
                .enumerate()
                .map(|(i, &g)| GroupCoef {
                    group: g,
                    first: y[2 * i],
                    second: y[2 * i + 1],
                })
                .collect()
        };
        let offsets = recover_offsets_with(&coefs, &self.model, &self.opts.tol);
        let amplitudes = coefs.iter().map(|c| c.first).collect();
        Ok(self.finish(s_hat, &taus, support, amplitudes, offsets, trace, order, noise.variance()))
    }
}

struct PathStep {
    tau: f64,
    enter: bool,
    index: usize,
    /// Active set in force just above this knot.
    before: Vec<usize>,
    /// Solution at this knot (on `before`).
    solution: DVector<Complex64>,
}

type Collected = (
    usize,
    Vec<usize>,
    Option<DVector<Complex64>>,
    Vec<TraceEntry>,
    Vec<usize>,
    Vec<f64>,
);

/// Shared scan over a lazily computed path for the active-set tests.
/// Returns `(s_hat, support, solution below the last detected knot, trace,
/// entry order, entry taus)`.
fn collect_entries<N, T>(
    max_entries: usize,
    scan: ScanDirection,
    min_entries: usize,
    mut next: N,
    test: &mut T,
) -> Result<Collected>
where
    N: FnMut() -> Result<Option<PathStep>>,
    T: FnMut(&[usize], f64) -> Result<(f64, f64)>,
{
    // Entry knots with the active set before each, plus the solution there.
    let mut steps: Vec<PathStep> = Vec::new();
    let mut trace = Vec::new();
    let mut decided: Option<usize> = None;
    let need_all = scan == ScanDirection::Upward;
    loop {
        let n_entries = steps.len();
        let enough_for_order = n_entries >= min_entries.min(max_entries);
        if (decided.is_some() && enough_for_order) || n_entries >= max_entries {
            break;
        }
        let Some(step) = next()? else { break };
        if !step.enter {
            continue;
        }
        if scan == ScanDirection::Forward && decided.is_none() {
            let k = n_entries + 1;
            let (stat, eta) = test(&step.before, step.tau)?;
            let reject = stat >= eta;
            trace.push(TraceEntry {
                knot: k,
                tau: step.tau,
                statistic: stat,
                threshold: eta,
                reject,
            });
            if !reject {
                decided = Some(k - 1);
            }
        }
        steps.push(step);
        if need_all && steps.len() >= max_entries {
            break;
        }
    }
    let order: Vec<usize> = steps.iter().map(|s| s.index).collect();
    let taus: Vec<f64> = steps.iter().map(|s| s.tau).collect();

    let s_hat = match scan {
        ScanDirection::Forward => decided.unwrap_or(steps.len()),
        ScanDirection::Upward => {
            let mut found = 0;
            for k in (1..=steps.len()).rev() {
                let st = &steps[k - 1];
                let (stat, eta) = test(&st.before, st.tau)?;
                let reject = stat >= eta;
                trace.push(TraceEntry {
                    knot: k,
                    tau: st.tau,
                    statistic: stat,
                    threshold: eta,
                    reject,
                });
                if reject {
                    found = k;
                    break;
                }
            }
            found
        }
    };
    // The knot right after the last detected one holds a solution in which
    // exactly the detected set is active.
    let (support, solution) = if s_hat < steps.len() {
        let st = &steps[s_hat];
        (st.before.clone(), Some(st.solution.clone()))
    } else if let Some(last) = steps.last() {
        let mut s = last.before.clone();
        s.push(last.index);
        (s, None)
    } else {
        (Vec::new(), None)
    };
    Ok((s_hat, support, solution, trace, order, taus))
}

fn least_squares(x: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if x.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    x.clone()
        .svd(true, true)
        .solve(b, 1e-12)
        .map_err(|e| Error::RankDeficient(format!("refit failed: {e}")))
}

/// Offsets from group coefficients: `c = y_2 / y_1`, `p = Im(c) / (2 pi spacing cos rho)`,
/// clamped to half a bin.
/// Once the active columns span the measurement space no noise direction is
/// left to test against, so nothing more can be declared a source.
fn saturated_eta(eta: Result<f64>) -> Result<f64> {
    match eta {
        Err(Error::RankDeficient(_)) => Ok(f64::INFINITY),
        other => other,
    }
}

pub fn recover_offsets(coefs: &[GroupCoef], model: &ArrayModel) -> Vec<Option<f64>> {
    recover_offsets_with(coefs, model, &Tolerances::DEFAULT)
}

pub fn recover_offsets_with(coefs: &[GroupCoef], model: &ArrayModel, tol: &Tolerances) -> Vec<Option<f64>> {
    let half = model.bin_width() / 2.0;
    let norms: Vec<f64> = match model.matching_operator() {
        Some(g) => g.column_iter().map(|c| c.norm()).collect(),
        None => vec![0.0; model.num_grid()],
    };
    coefs
        .iter()
        .map(|c| {
            if c.first.norm() < tol.offset_min_magnitude {
                return None;
            }
            let k = 2.0 * PI * model.spacing() * model.grid()[c.group].cos();
            if k.abs() < tol.offset_min_magnitude {
                return None;
            }
            let norm = norms[c.group];
            if norm < tol.offset_min_magnitude {
                return None;
            }
            // The group design works with unit-norm second columns.
            let ratio = c.second / (c.first * norm);
            Some((ratio.im / k).clamp(-half, half))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    Miss,
    FalseAlarm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub outcome: Outcome,
    /// The first `S` path entries are exactly the true sources.
    pub event_b: bool,
}

pub fn score(result: &DetectionResult, scen: &Scenario) -> Score {
    let truth: BTreeSet<usize> = scen.source_indices.iter().copied().collect();
    let found: BTreeSet<usize> = result.support.iter().copied().collect();
    let s = truth.len();
    let outcome = if result.s_hat == s && found == truth {
        Outcome::Correct
    } else if result.s_hat < s && found.is_subset(&truth) {
        Outcome::Miss
    } else {
        Outcome::FalseAlarm
    };
    let event_b = result.entry_order.len() >= s
        && result.entry_order[..s].iter().copied().collect::<BTreeSet<_>>() == truth;
    Score { outcome, event_b }
}

/// Convenience wrapper around [`SparseVector`] for orthogonal amplitudes.
pub fn support_vector(result: &DetectionResult, n: usize) -> SparseVector {
    let mut entries: Vec<(usize, Complex64)> = result
        .support
        .iter()
        .copied()
        .zip(result.amplitudes.iter().copied())
        .collect();
    entries.sort_by_key(|e| e.0);
    SparseVector { len: n, entries }
}
