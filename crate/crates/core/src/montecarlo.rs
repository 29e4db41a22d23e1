//! Monte Carlo experiments: detection rates, event-B frequency and offset
//! RMSE over many noisy snapshots, plus the published reference numbers.
//!
//! Every trial draws its own seed from a counter, so results do not depend on
//! how trials are spread over threads.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{score, DetectOptions, Detector, Outcome};
use crate::error::{Error, Result};
use crate::signal_model::{synthesize, ArrayConfig, ArrayModel, GridMode, ModelConfig, Scenario};
use crate::stat_tests::{DSpectrum, NoiseLevel, TestKind};

/// Published reference values, one row per table cell or figure point.
pub const PUBLISHED_REFERENCE_CSV: &str = include_str!("../data/published_reference_v1.csv");

/// Trials below this are too few for a meaningful rate.
pub const MIN_TRIALS: usize = 100;

/// Largest tolerated fraction of trials that end in a solver error.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

/// One family of sources: grid indices and a common offset in bin widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSet {
    pub indices: Vec<usize>,
    #[serde(default)]
    pub offset_bins: f64,
}

impl SourceSet {
    pub fn on_grid(indices: Vec<usize>) -> Self {
        Self { indices, offset_bins: 0.0 }
    }

    pub fn scenario(&self, model: &ArrayModel, snr_db: f64) -> Scenario {
        let p = self.offset_bins * model.bin_width();
        Scenario::equal_power(self.indices.clone(), vec![p; self.indices.len()], snr_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub tests: Vec<TestKind>,
    #[serde(default = "default_pc")]
    pub pc: f64,
    pub sources: Vec<SourceSet>,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub d_spectrum: DSpectrum,
}

fn default_pc() -> f64 {
    0.99
}

fn default_trials() -> usize {
    10_000
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < MIN_TRIALS {
            return Err(Error::InvalidConfig(format!(
                "need at least {MIN_TRIALS} trials, got {}",
                self.trials
            )));
        }
        if self.snr_db.is_empty() {
            return Err(Error::InvalidConfig("empty SNR grid".into()));
        }
        if self.tests.is_empty() || self.sources.is_empty() {
            return Err(Error::InvalidConfig("no tests or no source sets".into()));
        }
        if self.trials > 1 << 32 || self.sources.len() > 1 << 16 || self.snr_db.len() > 1 << 16 {
            return Err(Error::InvalidConfig("experiment too large for the seed layout".into()));
        }
        Ok(())
    }
}

/// Seed of one trial: the base seed with the source set, SNR point and trial
/// number packed into disjoint bit ranges.
pub fn trial_seed(base: u64, set: usize, snr: usize, trial: usize) -> u64 {
    base ^ ((set as u64) << 48 | (snr as u64) << 32 | trial as u64)
}

/// 95% normal-approximation half-width of a binomial proportion.
pub fn ci_halfwidth(p: f64, trials: usize) -> f64 {
    1.96 * (p * (1.0 - p) / trials as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub test: TestKind,
    #[serde(rename = "S")]
    pub num_sources: usize,
    pub snr_db: f64,
    pub pc_hat: f64,
    pub pf_hat: f64,
    pub pm_hat: f64,
    pub pb_hat: f64,
    /// Offset RMSE in radians over correctly detected sources (grid matching).
    pub rmse: Option<f64>,
    /// Trials that completed; failed trials are excluded from the rates.
    pub trials: usize,
    pub ci_halfwidth: f64,
    pub offset_bins: f64,
    pub failures: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: ExperimentConfig,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn row(&self, test: TestKind, s: usize, snr_db: f64) -> Option<&McRow> {
        self.rows
            .iter()
            .find(|r| r.test == test && r.num_sources == s && (r.snr_db - snr_db).abs() < 1e-9)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Default)]
struct Tally {
    correct: usize,
    miss: usize,
    false_alarm: usize,
    event_b: usize,
    failures: usize,
    sq_err: f64,
    err_count: usize,
}

enum Trial {
    Done { outcome: Outcome, event_b: bool, sq_err: f64, n_err: usize },
    Failed,
}

/// Run every (test, source set, SNR) cell of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<McReport> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let mut rows = Vec::new();
    for &test in &cfg.tests {
        for (set_idx, set) in cfg.sources.iter().enumerate() {
            for (snr_idx, &snr) in cfg.snr_db.iter().enumerate() {
                rows.push(run_cell(cfg, &model, test, set_idx, set, snr_idx, snr)?);
            }
        }
    }
    Ok(McReport { config: cfg.clone(), rows })
}

fn run_cell(
    cfg: &ExperimentConfig,
    model: &ArrayModel,
    test: TestKind,
    set_idx: usize,
    set: &SourceSet,
    snr_idx: usize,
    snr: f64,
) -> Result<McRow> {
    let start = Instant::now();
    let scen = set.scenario(model, snr);
    scen.validate(model)?;
    let s = scen.num_sources();
    let mut opts = DetectOptions::new(test, cfg.pc)
        .with_min_path_entries(s)
        .with_d_spectrum(cfg.d_spectrum);
    if test.needs_sigma() {
        opts = opts.with_noise(NoiseLevel::from_variance(scen.noise_variance(model))?);
    }
    let proto = Detector::new(model.clone(), opts)?;

    let results: Vec<Trial> = (0..cfg.trials)
        .into_par_iter()
        .map_init(
            || proto.clone(),
            |det, trial| {
                let seed = trial_seed(cfg.base_seed, set_idx, snr_idx, trial);
                let run = synthesize(model, &scen, seed).and_then(|snap| det.detect(&snap.measurement()));
                match run {
                    Ok(r) => {
                        let sc = score(&r, &scen);
                        let (mut sq_err, mut n_err) = (0.0, 0);
                        if sc.outcome == Outcome::Correct && test == TestKind::E {
                            for (k, off) in r.support.iter().zip(&r.offsets) {
                                let pos = scen.source_indices.iter().position(|i| i == k).expect("correct support");
                                let e = off.unwrap_or(0.0) - scen.offsets[pos];
                                sq_err += e * e;
                                n_err += 1;
                            }
                        }
                        Trial::Done { outcome: sc.outcome, event_b: sc.event_b, sq_err, n_err }
                    }
                    Err(_) => Trial::Failed,
                }
            },
        )
        .collect();

    let mut t = Tally::default();
    for r in results {
        match r {
            Trial::Done { outcome, event_b, sq_err, n_err } => {
                match outcome {
                    Outcome::Correct => t.correct += 1,
                    Outcome::Miss => t.miss += 1,
                    Outcome::FalseAlarm => t.false_alarm += 1,
                }
                t.event_b += event_b as usize;
                t.sq_err += sq_err;
                t.err_count += n_err;
            }
            Trial::Failed => t.failures += 1,
        }
    }
    if t.failures as f64 > MAX_FAILURE_RATE * cfg.trials as f64 {
        return Err(Error::Numeric(format!(
            "{} of {} trials failed (test {test}, S = {s}, {snr} dB)",
            t.failures, cfg.trials
        )));
    }
    let done = cfg.trials - t.failures;
    let rate = |c: usize| c as f64 / done as f64;
    let pc_hat = rate(t.correct);
    Ok(McRow {
        test,
        num_sources: s,
        snr_db: snr,
        pc_hat,
        pf_hat: rate(t.false_alarm),
        pm_hat: rate(t.miss),
        pb_hat: rate(t.event_b),
        rmse: (t.err_count > 0).then(|| (t.sq_err / t.err_count as f64).sqrt()),
        trials: done,
        ci_halfwidth: ci_halfwidth(pc_hat, done),
        offset_bins: set.offset_bins,
        failures: t.failures,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// The three simulated models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceSetting {
    Orthogonal,
    Oversampled,
    GridMatching,
}

impl ReferenceSetting {
    pub fn model(self) -> ModelConfig {
        let (n, mode) = match self {
            ReferenceSetting::Oversampled => (16, GridMode::Oversampled),
            _ => (8, GridMode::Orthogonal),
        };
        ModelConfig { array: ArrayConfig::new(8, n), mode }
    }

    /// Zero-based source indices for `s` sources. The published placements
    /// count grid points from one.
    pub fn sources(self, s: usize) -> Option<Vec<usize>> {
        let one_based: &[usize] = match (self, s) {
            (ReferenceSetting::Orthogonal, 1) | (ReferenceSetting::GridMatching, 1) => &[5],
            (ReferenceSetting::Orthogonal, 2) | (ReferenceSetting::GridMatching, 2) => &[3, 6],
            (ReferenceSetting::Orthogonal, 3) | (ReferenceSetting::GridMatching, 3) => &[2, 4, 6],
            (ReferenceSetting::Orthogonal, 4) => &[2, 4, 6, 7],
            (ReferenceSetting::GridMatching, 4) => &[1, 3, 5, 7],
            (ReferenceSetting::Oversampled, 1) => &[9],
            (ReferenceSetting::Oversampled, 2) => &[7, 10],
            (ReferenceSetting::Oversampled, 3) => &[6, 9, 12],
            (ReferenceSetting::Oversampled, 4) => &[5, 8, 11, 14],
            _ => return None,
        };
        Some(one_based.iter().map(|k| k - 1).collect())
    }

    /// Offset of every source, in bin widths.
    pub fn default_offset_bins(self) -> f64 {
        match self {
            ReferenceSetting::GridMatching => 0.24,
            _ => 0.0,
        }
    }

    pub fn source_set(self, s: usize, offset_bins: f64) -> Option<SourceSet> {
        self.sources(s).map(|indices| SourceSet { indices, offset_bins })
    }
}

/// The published SNR grid, 5 to 50 dB in 5 dB steps.
pub fn reference_snr_grid() -> Vec<f64> {
    (1..=10).map(|i| 5.0 * i as f64).collect()
}

/// Test and model behind each published table.
pub fn table_setup(table: u8) -> Result<(TestKind, ReferenceSetting, usize)> {
    Ok(match table {
        1 => (TestKind::CovAsymptotic, ReferenceSetting::Orthogonal, 4),
        2 => (TestKind::CovExact, ReferenceSetting::Orthogonal, 4),
        3 => (TestKind::A, ReferenceSetting::Orthogonal, 4),
        4 => (TestKind::B, ReferenceSetting::Orthogonal, 4),
        5 => (TestKind::C, ReferenceSetting::Orthogonal, 4),
        6 => (TestKind::D, ReferenceSetting::Oversampled, 4),
        7 => (TestKind::E, ReferenceSetting::GridMatching, 3),
        other => return Err(Error::InvalidConfig(format!("no table {other}; tables run 1 to 7"))),
    })
}

/// Configuration for one published table, all source counts.
pub fn table_config(table: u8, trials: usize, base_seed: u64) -> Result<ExperimentConfig> {
    let (test, setting, max_s) = table_setup(table)?;
    let offset = setting.default_offset_bins();
    Ok(ExperimentConfig {
        model: setting.model(),
        tests: vec![test],
        pc: 0.99,
        sources: (1..=max_s).filter_map(|s| setting.source_set(s, offset)).collect(),
        snr_db: reference_snr_grid(),
        trials,
        base_seed,
        d_spectrum: DSpectrum::default(),
    })
}

/// Configuration for one event-B figure. The rate of event B does not depend
/// on the test, only on the path, so the cheapest test for the model is used.
pub fn figure_config(figure: u8, trials: usize, base_seed: u64) -> Result<ExperimentConfig> {
    let (setting, test) = match figure {
        1 => (ReferenceSetting::Orthogonal, TestKind::B),
        2 => (ReferenceSetting::Oversampled, TestKind::D),
        3 => (ReferenceSetting::GridMatching, TestKind::E),
        other => return Err(Error::InvalidConfig(format!("no event-B figure {other}; figures run 1 to 3"))),
    };
    let offset = setting.default_offset_bins();
    let mut sources: Vec<SourceSet> = (1..=4).filter_map(|s| setting.source_set(s, offset)).collect();
    if setting == ReferenceSetting::GridMatching {
        sources.extend(setting.source_set(4, 0.1));
    }
    Ok(ExperimentConfig {
        model: setting.model(),
        tests: vec![test],
        pc: 0.99,
        sources,
        snr_db: reference_snr_grid(),
        trials,
        base_seed,
        d_spectrum: DSpectrum::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Table,
    Figure,
}

/// One published number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub kind: ReferenceKind,
    pub id: u8,
    pub test: Option<TestKind>,
    #[serde(rename = "S")]
    pub num_sources: usize,
    /// Distinguishes the two four-source offset curves of the grid-matching
    /// event-B figure (`p0.24`, `p0.1`).
    pub variant: Option<String>,
    pub snr_db: f64,
    /// Probability of correct detection (tables) or of event B (figures).
    pub value: f64,
    pub pf: Option<f64>,
}

impl ReferencePoint {
    pub fn offset_bins(&self) -> Option<f64> {
        self.variant.as_deref().and_then(|v| v.strip_prefix('p')).and_then(|v| v.parse().ok())
    }
}

pub fn published_reference() -> Result<Vec<ReferencePoint>> {
    let mut rdr = csv::Reader::from_reader(PUBLISHED_REFERENCE_CSV.as_bytes());
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Look up one published number.
pub fn reference_value(kind: ReferenceKind, id: u8, s: usize, snr_db: f64, variant: Option<&str>) -> Result<f64> {
    published_reference()?
        .into_iter()
        .find(|p| {
            p.kind == kind
                && p.id == id
                && p.num_sources == s
                && (p.snr_db - snr_db).abs() < 1e-9
                && p.variant.as_deref() == variant
        })
        .map(|p| p.value)
        .ok_or_else(|| Error::InvalidConfig(format!("no reference value for {kind:?} {id}, S = {s}, {snr_db} dB")))
}

/// Simulated value next to the published one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub id: u8,
    pub test: TestKind,
    #[serde(rename = "S")]
    pub num_sources: usize,
    pub snr_db: f64,
    pub offset_bins: f64,
    pub published: f64,
    pub simulated: f64,
    pub diff: f64,
    pub ci_halfwidth: f64,
}

fn compare(report: &McReport, kind: ReferenceKind, id: u8, pick: impl Fn(&McRow) -> f64) -> Result<Vec<Comparison>> {
    let refs = published_reference()?;
    let mut out = Vec::new();
    for row in &report.rows {
        let hit = refs.iter().find(|p| {
            p.kind == kind
                && p.id == id
                && p.num_sources == row.num_sources
                && (p.snr_db - row.snr_db).abs() < 1e-9
                && p.offset_bins().is_none_or(|o| (o - row.offset_bins).abs() < 1e-9)
        });
        if let Some(p) = hit {
            let sim = pick(row);
            out.push(Comparison {
                id,
                test: row.test,
                num_sources: row.num_sources,
                snr_db: row.snr_db,
                offset_bins: row.offset_bins,
                published: p.value,
                simulated: sim,
                diff: sim - p.value,
                ci_halfwidth: ci_halfwidth(sim, row.trials),
            });
        }
    }
    Ok(out)
}

/// Run one published table and line it up against the published values.
pub fn reproduce_table(table: u8, trials: usize, base_seed: u64) -> Result<(McReport, Vec<Comparison>)> {
    let report = run_experiment(&table_config(table, trials, base_seed)?)?;
    let cmp = compare(&report, ReferenceKind::Table, table, |r| r.pc_hat)?;
    Ok((report, cmp))
}

/// Run one event-B figure and line it up against the published curves.
pub fn reproduce_figure(figure: u8, trials: usize, base_seed: u64) -> Result<(McReport, Vec<Comparison>)> {
    let report = run_experiment(&figure_config(figure, trials, base_seed)?)?;
    let cmp = compare(&report, ReferenceKind::Figure, figure, |r| r.pb_hat)?;
    Ok((report, cmp))
}

pub fn write_comparisons<W: Write>(cmp: &[Comparison], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in cmp {
        out.serialize(c)?;
    }
    out.flush()?;
    Ok(())
}

/// Largest absolute deviation from the published values per source count.
pub fn worst_by_sources(cmp: &[Comparison]) -> BTreeMap<usize, f64> {
    let mut m = BTreeMap::new();
    for c in cmp {
        let e = m.entry(c.num_sources).or_insert(0.0f64);
        *e = e.max(c.diff.abs());
    }
    m
}
