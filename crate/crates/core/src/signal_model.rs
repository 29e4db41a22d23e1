//! Uniform linear array models and single-snapshot measurement synthesis.
//!
//! The steering column for grid angle `rho` is
//! `a(rho)[d] = exp(i 2 pi spacing d sin(rho)) / sqrt(M)` for `d = 0..M-1`.
//! The derivative matrix holds `da/drho` at every grid angle, which for a ULA
//! factors as `D A diag(i 2 pi spacing cos(rho))` with `D = diag(0, 1, .., M-1)`.
//! In orthogonal mode the grid is uniform in spatial frequency so that
//! `A^H A = I`, and the grid-matching operator `G = A^H D A` is available.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serde_complex;

const UNITARITY_TOL: f64 = 1e-10;

fn default_spacing() -> f64 {
    0.5
}

fn default_interval() -> [f64; 2] {
    [-PI / 2.0, PI / 2.0]
}

/// Geometry of the array and of the estimation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub num_elements: usize,
    pub num_grid: usize,
    /// Element spacing in wavelengths.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    /// `[kappa_1, kappa_2]` in radians.
    #[serde(default = "default_interval")]
    pub angle_interval: [f64; 2],
}

impl ArrayConfig {
    pub fn new(num_elements: usize, num_grid: usize) -> Self {
        Self {
            num_elements,
            num_grid,
            spacing: default_spacing(),
            angle_interval: default_interval(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_elements < 2 {
            return Err(Error::InvalidConfig(format!(
                "num_elements must be at least 2, got {}",
                self.num_elements
            )));
        }
        if self.num_grid < self.num_elements {
            return Err(Error::InvalidConfig(format!(
                "num_grid ({}) must be >= num_elements ({})",
                self.num_grid, self.num_elements
            )));
        }
        let [k1, k2] = self.angle_interval;
        if !(k1 < k2) || !k1.is_finite() || !k2.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "angle interval must satisfy kappa_1 < kappa_2, got [{k1}, {k2}]"
            )));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        Ok(())
    }

    /// Angular bin width `(kappa_2 - kappa_1) / N`; grid offsets are quoted
    /// as fractions of this value.
    pub fn bin_width(&self) -> f64 {
        (self.angle_interval[1] - self.angle_interval[0]) / self.num_grid as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// `N = M`, grid uniform in `sin(rho)`, unitary steering matrix.
    Orthogonal,
    /// `N` bin centres uniformly spaced in angle over the interval.
    Oversampled,
}

/// Model configuration as read from JSON: the array plus the grid mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub array: ArrayConfig,
    pub mode: GridMode,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ArrayModel> {
        build_array_model(&self.array, self.mode)
    }
}

#[derive(Debug, Clone)]
pub struct ArrayModel {
    config: ArrayConfig,
    mode: GridMode,
    grid: Vec<f64>,
    steering: DMatrix<Complex64>,
    derivative: DMatrix<Complex64>,
    element_index: Vec<f64>,
    matching: Option<DMatrix<Complex64>>,
    gram: DMatrix<Complex64>,
}

/// Steering vector of an `m`-element ULA towards `angle`.
pub fn steering_vector(m: usize, spacing: f64, angle: f64) -> DVector<Complex64> {
    let scale = 1.0 / (m as f64).sqrt();
    let phase = 2.0 * PI * spacing * angle.sin();
    DVector::from_iterator(
        m,
        (0..m).map(|d| Complex64::from_polar(scale, phase * d as f64)),
    )
}

/// `d a(rho) / d rho`.
pub fn steering_derivative(m: usize, spacing: f64, angle: f64) -> DVector<Complex64> {
    let a = steering_vector(m, spacing, angle);
    let k = Complex64::new(0.0, 2.0 * PI * spacing * angle.cos());
    DVector::from_iterator(m, a.iter().enumerate().map(|(d, z)| z * k * d as f64))
}

fn orthogonal_grid(cfg: &ArrayConfig) -> Result<Vec<f64>> {
    let n = cfg.num_grid as f64;
    (1..=cfg.num_grid)
        .map(|k| {
            let u = (2.0 * k as f64 - n - 1.0) / (2.0 * n * cfg.spacing);
            if u.abs() > 1.0 {
                Err(Error::InvalidConfig(format!(
                    "spacing {} puts orthogonal grid frequency {u} outside the visible region",
                    cfg.spacing
                )))
            } else {
                Ok(u.asin())
            }
        })
        .collect()
}

fn oversampled_grid(cfg: &ArrayConfig) -> Vec<f64> {
    let [k1, _] = cfg.angle_interval;
    let w = cfg.bin_width();
    (0..cfg.num_grid).map(|k| k1 + (k as f64 + 0.5) * w).collect()
}

/// Build the steering, derivative and (orthogonal mode only) grid-matching
/// matrices for `cfg`.
pub fn build_array_model(cfg: &ArrayConfig, mode: GridMode) -> Result<ArrayModel> {
    cfg.validate()?;
    let m = cfg.num_elements;
    let grid = match mode {
        GridMode::Orthogonal => {
            if cfg.num_grid != m {
                return Err(Error::InvalidConfig(format!(
                    "orthogonal mode requires num_grid == num_elements ({} != {m})",
                    cfg.num_grid
                )));
            }
            orthogonal_grid(cfg)?
        }
        GridMode::Oversampled => oversampled_grid(cfg),
    };
    ArrayModel::from_grid(cfg.clone(), mode, grid)
}

impl ArrayModel {
    fn from_grid(config: ArrayConfig, mode: GridMode, grid: Vec<f64>) -> Result<Self> {
        let m = config.num_elements;
        let n = grid.len();
        let mut steering = DMatrix::zeros(m, n);
        let mut derivative = DMatrix::zeros(m, n);
        for (k, &rho) in grid.iter().enumerate() {
            steering.set_column(k, &steering_vector(m, config.spacing, rho));
            derivative.set_column(k, &steering_derivative(m, config.spacing, rho));
        }
        let element_index: Vec<f64> = (0..m).map(|d| d as f64).collect();
        let gram = steering.adjoint() * &steering;

        let matching = if mode == GridMode::Orthogonal {
            let dev = max_abs_deviation_from_identity(&gram);
            if dev > UNITARITY_TOL {
                return Err(Error::Construction(format!(
                    "orthogonal steering matrix deviates from unitary by {dev:.3e}"
                )));
            }
            let mut da = steering.clone();
            for (d, mut row) in da.row_iter_mut().enumerate() {
                row *= Complex64::new(d as f64, 0.0);
            }
            Some(steering.adjoint() * da)
        } else {
            None
        };

        Ok(Self {
            config,
            mode,
            grid,
            steering,
            derivative,
            element_index,
            matching,
            gram,
        })
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.config
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    /// Number of array elements `M`.
    pub fn num_elements(&self) -> usize {
        self.config.num_elements
    }

    /// Number of grid points `N`.
    pub fn num_grid(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn spacing(&self) -> f64 {
        self.config.spacing
    }

    pub fn bin_width(&self) -> f64 {
        self.config.bin_width()
    }

    /// `A`, `M x N`.
    pub fn steering(&self) -> &DMatrix<Complex64> {
        &self.steering
    }

    /// `A1 = [a'(rho_1), .., a'(rho_N)]`.
    pub fn derivative(&self) -> &DMatrix<Complex64> {
        &self.derivative
    }

    /// Diagonal of `D`.
    pub fn element_index(&self) -> &[f64] {
        &self.element_index
    }

    /// `G = A^H D A`; only present in orthogonal mode.
    pub fn matching_operator(&self) -> Option<&DMatrix<Complex64>> {
        self.matching.as_ref()
    }

    /// `A^H A`.
    pub fn gram(&self) -> &DMatrix<Complex64> {
        &self.gram
    }

    pub fn is_orthogonal(&self) -> bool {
        self.mode == GridMode::Orthogonal
    }

    /// `A^H b`.
    pub fn correlate(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        self.steering.adjoint() * b
    }

    /// `b_bar = A^H b`, defined only when `A^H A = I`.
    pub fn project(&self, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if !self.is_orthogonal() {
            return Err(Error::Contract(
                "b_bar = A^H b requires an orthogonal steering matrix".into(),
            ));
        }
        Ok(self.correlate(b))
    }

    /// Exact (non-Taylor) steering vector at an arbitrary angle.
    pub fn steering_at(&self, angle: f64) -> DVector<Complex64> {
        steering_vector(self.num_elements(), self.config.spacing, angle)
    }

    /// ULA coupling coefficient `c = i 2 pi spacing cos(rho_k) p` for grid
    /// point `k` and offset `p`.
    pub fn coupling(&self, k: usize, offset: f64) -> Complex64 {
        Complex64::new(
            0.0,
            2.0 * PI * self.config.spacing * self.grid[k].cos() * offset,
        )
    }
}

fn max_abs_deviation_from_identity(g: &DMatrix<Complex64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - target).norm());
        }
    }
    dev
}

/// Ground truth for one synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub source_indices: Vec<usize>,
    /// Offsets from the grid angle in radians, one per source.
    pub offsets: Vec<f64>,
    #[serde(with = "serde_complex::vec")]
    pub weights: Vec<Complex64>,
    pub snr_db: f64,
}

impl Scenario {
    /// Equal-power sources with real positive weights `1/sqrt(S)`.
    pub fn equal_power(source_indices: Vec<usize>, offsets: Vec<f64>, snr_db: f64) -> Self {
        let s = source_indices.len().max(1) as f64;
        let w = Complex64::new(1.0 / s.sqrt(), 0.0);
        let weights = vec![w; source_indices.len()];
        Self {
            source_indices,
            offsets,
            weights,
            snr_db,
        }
    }

    /// On-grid equal-power sources.
    pub fn on_grid(source_indices: Vec<usize>, snr_db: f64) -> Self {
        let offsets = vec![0.0; source_indices.len()];
        Self::equal_power(source_indices, offsets, snr_db)
    }

    pub fn num_sources(&self) -> usize {
        self.source_indices.len()
    }

    pub fn validate(&self, model: &ArrayModel) -> Result<()> {
        let s = self.source_indices.len();
        if self.offsets.len() != s || self.weights.len() != s {
            return Err(Error::InvalidConfig(format!(
                "scenario has {s} indices, {} offsets, {} weights",
                self.offsets.len(),
                self.weights.len()
            )));
        }
        for w in self.source_indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidConfig(
                    "source indices must be sorted and distinct".into(),
                ));
            }
        }
        if let Some(&last) = self.source_indices.last() {
            if last >= model.num_grid() {
                return Err(Error::OutOfRange {
                    index: last,
                    len: model.num_grid(),
                });
            }
        }
        if s > 0 {
            let power: f64 = self.weights.iter().map(|w| w.norm_sqr()).sum();
            if (power - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "source power must sum to 1, got {power}"
                )));
            }
        }
        let half_bin = model.bin_width() / 2.0;
        for (p, w) in self.offsets.iter().zip(&self.weights) {
            if *p != 0.0 && w.norm() == 0.0 {
                return Err(Error::InvalidConfig(
                    "offset attached to a zero-weight source".into(),
                ));
            }
            if p.abs() >= half_bin {
                return Err(Error::InvalidConfig(format!(
                    "offset {p} is not within half a bin ({half_bin})"
                )));
            }
        }
        Ok(())
    }

    /// Noise-free measurement `sum_i x_i a(rho_{k_i} + p_i)` using the exact
    /// steering vectors.
    pub fn clean_signal(&self, model: &ArrayModel) -> DVector<Complex64> {
        let mut b = DVector::zeros(model.num_elements());
        for ((&k, &p), &x) in self
            .source_indices
            .iter()
            .zip(&self.offsets)
            .zip(&self.weights)
        {
            b += model.steering_at(model.grid()[k] + p) * x;
        }
        b
    }

    /// Per-element complex noise variance `sigma^2 = ||A x||^2 / 10^(snr/10)`.
    pub fn noise_variance(&self, model: &ArrayModel) -> f64 {
        let power = self.clean_signal(model).norm_squared();
        power / 10f64.powf(self.snr_db / 10.0)
    }

    /// Sparse length-`N` weight vector on the grid.
    pub fn grid_weights(&self, model: &ArrayModel) -> DVector<Complex64> {
        let mut x = DVector::zeros(model.num_grid());
        for (&k, &w) in self.source_indices.iter().zip(&self.weights) {
            x[k] = w;
        }
        x
    }
}

/// One noisy single-snapshot measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(with = "serde_complex::vec")]
    pub b: Vec<Complex64>,
    #[serde(
        default,
        with = "serde_complex::option_vec",
        skip_serializing_if = "Option::is_none"
    )]
    pub b_bar: Option<Vec<Complex64>>,
    #[serde(default)]
    pub seed: u64,
}

impl Snapshot {
    pub fn measurement(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.b)
    }

    /// `b_bar` if stored, otherwise `A^H b` (orthogonal models only).
    pub fn projected(&self, model: &ArrayModel) -> Result<DVector<Complex64>> {
        match &self.b_bar {
            Some(v) => Ok(DVector::from_column_slice(v)),
            None => model.project(&self.measurement()),
        }
    }
}

/// Add circular complex Gaussian noise of per-element variance `sigma2`.
pub fn add_noise<R: rand::Rng + ?Sized>(
    clean: &DVector<Complex64>,
    sigma2: f64,
    rng: &mut R,
) -> DVector<Complex64> {
    let s = (sigma2 / 2.0).sqrt();
    clean.map(|z| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        z + Complex64::new(s * re, s * im)
    })
}

/// Draw a noisy snapshot of `scen`; identical seeds give bit-identical output.
pub fn synthesize(model: &ArrayModel, scen: &Scenario, seed: u64) -> Result<Snapshot> {
    scen.validate(model)?;
    let clean = scen.clean_signal(model);
    let power = clean.norm_squared();
    let sigma2 = power / 10f64.powf(scen.snr_db / 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = add_noise(&clean, sigma2, &mut rng);
    let b_bar = model
        .is_orthogonal()
        .then(|| model.correlate(&b).iter().copied().collect());
    Ok(Snapshot {
        b: b.iter().copied().collect(),
        b_bar,
        seed,
    })
}

/// `|| b_exact - (A x + A1 P x) ||` for the noise-free scenario: the error of
/// the first-order Taylor model.
pub fn taylor_residual(model: &ArrayModel, scen: &Scenario) -> Result<f64> {
    scen.validate(model)?;
    let exact = scen.clean_signal(model);
    let mut approx = DVector::zeros(model.num_elements());
    for ((&k, &p), &x) in scen
        .source_indices
        .iter()
        .zip(&scen.offsets)
        .zip(&scen.weights)
    {
        approx += model.steering().column(k) * x;
        approx += model.derivative().column(k) * (x * p);
    }
    Ok((exact - approx).norm())
}
