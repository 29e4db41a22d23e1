//! Numeric tolerances shared by the solvers, quadrature and threshold search.

/// Tolerance record. [`Tolerances::DEFAULT`] holds the values every routine in
/// the crate uses unless a caller overrides them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Coordinate-descent stopping tolerance (max coefficient change, relative
    /// to the first knot).
    pub solver: f64,
    /// Hard cap on coordinate / block-coordinate sweeps.
    pub max_sweeps: usize,
    /// Knot bisection width, relative to the first knot.
    pub knot_bisection: f64,
    /// Below this fraction of the first knot a block solver that stalls ends
    /// the path instead of failing: the active columns are then typically
    /// rank deficient and the remaining knots carry no information.
    pub path_floor: f64,
    /// Number of uniform probes below a knot before bisection starts.
    pub knot_probes: usize,
    /// KKT certification slack.
    pub kkt: f64,
    /// Relative tolerance of the adaptive quadrature.
    pub quad_rel: f64,
    /// Integrand magnitude below which the tail integral is truncated.
    pub quad_truncation: f64,
    /// Threshold inversion: absolute tolerance in eta.
    pub invert_eta: f64,
    /// Threshold inversion: absolute tolerance in the CDF value.
    pub invert_cdf: f64,
    /// Bracket doublings allowed before inversion gives up.
    pub invert_max_doublings: u32,
    /// Eigenvalues below this are treated as zero.
    pub eigen_cutoff: f64,
    /// Gap below which an eigenvalue pair uses the degenerate Erlang form.
    pub eigen_degenerate_gap: f64,
    /// Magnitude below which a first group coefficient cannot carry an offset.
    pub offset_min_magnitude: f64,
    /// Absolute tolerance of the Marcum Q series.
    pub marcum_abs: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        solver: 1e-12,
        max_sweeps: 100_000,
        knot_bisection: 1e-10,
        path_floor: 1e-6,
        knot_probes: 24,
        kkt: 1e-8,
        quad_rel: 1e-9,
        quad_truncation: 1e-14,
        invert_eta: 1e-10,
        invert_cdf: 1e-12,
        invert_max_doublings: 1024,
        eigen_cutoff: 1e-10,
        eigen_degenerate_gap: 1e-9,
        offset_min_magnitude: 1e-12,
        marcum_abs: 1e-12,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
