//! Kernel density estimation of a cross-sectional distribution on a bounded
//! support, with boundary reflection.
//!
//! The estimator augments the sample with its reflections around both support
//! bounds, which removes the mass leakage of the plain Gaussian kernel near
//! the boundaries. After reflection the curve is renormalized to unit
//! trapezoid integral and floored at a tiny positive value so that downstream
//! logarithms stay finite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FvarError, Result};
use crate::instrument;
use crate::numerics::{cum_trapezoid, linspace, quantile, sample_std, trapezoid, MonotoneInterp};

/// Default number of evaluation grid points.
pub const DEFAULT_GRID_POINTS: usize = 1000;

/// Floor applied to density values before anything takes a logarithm of them.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Default minimum number of observations per period.
pub const DEFAULT_MIN_OBSERVATIONS: usize = 10;

const INV_SQRT_2PI: f64 = 0.3989422804014327;
// Gaussian contributions beyond this many bandwidths are below f64 resolution.
const KERNEL_CUTOFF: f64 = 9.0;

/// Closed interval on which densities are defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
}

impl Support {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
            return Err(FvarError::InvalidSupport(lower, upper));
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// A probability density evaluated on a grid spanning its support.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityCurve {
    support: Support,
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl DensityCurve {
    /// Build a curve, validating non-negativity and unit trapezoid integral
    /// (within 1e-8). Does not modify the values.
    pub fn new(support: Support, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(FvarError::InvalidGrid {
                min: 2,
                got: grid.len(),
            });
        }
        if !grid.windows(2).all(|w| w[1] > w[0]) {
            return Err(FvarError::InvalidGrid {
                min: 2,
                got: grid.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FvarError::NonFiniteCurve);
        }
        let curve = Self {
            support,
            grid,
            values,
        };
        let integral = curve.integral();
        if (integral - 1.0).abs() > 1e-8 {
            return Err(FvarError::Data(format!(
                "density integrates to {integral:.12}, expected 1 within 1e-8"
            )));
        }
        Ok(curve)
    }

    /// Build a curve from unnormalized non-negative values: floors at
    /// [`DENSITY_FLOOR`] and renormalizes to unit integral. This is the only
    /// constructor that renormalizes, and it records the event.
    pub fn from_unnormalized(support: Support, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(FvarError::InvalidGrid {
                min: 2,
                got: grid.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FvarError::NonFiniteCurve);
        }
        let floored: Vec<f64> = values.iter().map(|v| v.max(DENSITY_FLOOR)).collect();
        let mass = trapezoid(&grid, &floored);
        if mass <= 0.0 || !mass.is_finite() {
            return Err(FvarError::NonFiniteCurve);
        }
        instrument::record_renormalization();
        let values = floored.iter().map(|v| v / mass).collect();
        Ok(Self {
            support,
            grid,
            values,
        })
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid integral over the support.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }

    /// Mean of the distribution.
    pub fn mean(&self) -> f64 {
        let weighted: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.values)
            .map(|(x, p)| x * p)
            .collect();
        trapezoid(&self.grid, &weighted)
    }

    /// Cumulative distribution function on the curve's grid, anchored at zero.
    pub fn cdf(&self) -> Vec<f64> {
        cum_trapezoid(&self.grid, &self.values)
    }

    /// Quantile of the distribution by cdf inversion.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0 < q && q < 1.0) {
            return Err(FvarError::BadQuantileLevel(q));
        }
        let mut cdf = self.cdf();
        let total = *cdf.last().expect("nonempty cdf");
        if total <= 0.0 {
            return Err(FvarError::NonMonotoneCdf);
        }
        for v in &mut cdf {
            *v /= total;
        }
        Ok(MonotoneInterp::new(&cdf, &self.grid).eval(q))
    }
}

/// Raw cross-sectional observations per period on a common support.
#[derive(Debug, Clone)]
pub struct MicroPanel {
    periods: Vec<String>,
    samples: Vec<Vec<f64>>,
    support: Support,
}

impl MicroPanel {
    /// Validates that every observation lies in the support and every period
    /// clears the observation floor.
    pub fn new(
        periods: Vec<String>,
        samples: Vec<Vec<f64>>,
        support: Support,
        min_observations: usize,
    ) -> Result<Self> {
        if periods.len() != samples.len() {
            return Err(FvarError::DimensionMismatch(format!(
                "{} period labels vs {} sample groups",
                periods.len(),
                samples.len()
            )));
        }
        let mut row = 0usize;
        for (period, sample) in periods.iter().zip(&samples) {
            if sample.len() < min_observations {
                return Err(FvarError::TooFewObservations {
                    period: period.clone(),
                    got: sample.len(),
                    floor: min_observations,
                });
            }
            for &value in sample {
                row += 1;
                if !support.contains(value) {
                    return Err(FvarError::OutOfSupport {
                        value,
                        row,
                        lower: support.lower,
                        upper: support.upper,
                    });
                }
            }
        }
        Ok(Self {
            periods,
            samples,
            support,
        })
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }
}

/// Silverman's rule-of-thumb bandwidth, robust variant:
/// `h = 0.9 * min(s, IQR/1.34) * n^(-1/5)`.
///
/// Falls back to the standard deviation when the interquartile range is zero
/// but the sample still has dispersion.
pub fn silverman_bandwidth(sample: &[f64]) -> Result<f64> {
    if sample.len() < 2 {
        return Err(FvarError::NotEnoughObservations {
            need: 2,
            have: sample.len(),
        });
    }
    let s = sample_std(sample);
    let iqr = quantile(sample, 0.75) - quantile(sample, 0.25);
    let spread = if iqr > 0.0 { s.min(iqr / 1.34) } else { s };
    if spread <= 0.0 || !spread.is_finite() {
        return Err(FvarError::ZeroDispersion);
    }
    Ok(0.9 * spread * (sample.len() as f64).powf(-0.2))
}

/// Unnormalized reflected Gaussian kernel estimate on an arbitrary grid.
///
/// Sums the kernel over the sample and over its reflections around both
/// bounds (`2L - x` and `2U - x`). Contributions beyond nine bandwidths are
/// dropped; they are below f64 resolution.
pub fn reflected_kde_raw(sample: &[f64], support: Support, grid: &[f64], bandwidth: f64) -> Vec<f64> {
    let n = sample.len() as f64;
    let h = bandwidth;
    let scale = INV_SQRT_2PI / (n * h);
    let cutoff = KERNEL_CUTOFF * h;
    let lo = grid[0];
    let step = if grid.len() > 1 {
        grid[1] - grid[0]
    } else {
        1.0
    };
    let mut out = vec![0.0; grid.len()];
    let mut add_point = |center: f64| {
        // grid is uniform; find the index window within the cutoff
        let i0 = (((center - cutoff) - lo) / step).ceil().max(0.0) as usize;
        let i1_f = (((center + cutoff) - lo) / step).floor();
        if i1_f < 0.0 {
            return;
        }
        let i1 = (i1_f as usize).min(grid.len().saturating_sub(1));
        for i in i0..=i1.min(grid.len() - 1) {
            let z = (grid[i] - center) / h;
            out[i] += scale * (-0.5 * z * z).exp();
        }
    };
    for &x in sample {
        add_point(x);
        add_point(2.0 * support.lower - x);
        add_point(2.0 * support.upper - x);
    }
    out
}

/// Reflected Gaussian KDE on a uniform grid over the support, renormalized to
/// unit integral. The bandwidth defaults to [`silverman_bandwidth`].
pub fn estimate_density(
    sample: &[f64],
    support: Support,
    n_grid: usize,
    bandwidth: Option<f64>,
) -> Result<DensityCurve> {
    if sample.is_empty() {
        return Err(FvarError::EmptySample);
    }
    if n_grid < 64 {
        return Err(FvarError::InvalidGrid {
            min: 64,
            got: n_grid,
        });
    }
    for (row, &value) in sample.iter().enumerate() {
        if !support.contains(value) {
            return Err(FvarError::OutOfSupport {
                value,
                row: row + 1,
                lower: support.lower,
                upper: support.upper,
            });
        }
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => {
            return Err(FvarError::Data(format!("bandwidth must be positive, got {h}")));
        }
        None => silverman_bandwidth(sample)?,
    };
    let grid = linspace(support.lower, support.upper, n_grid);
    let raw = reflected_kde_raw(sample, support, &grid, h);
    DensityCurve::from_unnormalized(support, grid, raw)
}

/// Per-period density estimates for a whole panel, computed in parallel.
///
/// Output order matches the panel's period order regardless of scheduling.
pub fn estimate_panel(
    panel: &MicroPanel,
    n_grid: usize,
    bandwidth: Option<f64>,
) -> Result<Vec<DensityCurve>> {
    panel
        .samples()
        .par_iter()
        .map(|sample| estimate_density(sample, panel.support(), n_grid, bandwidth))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, Gamma, Uniform};

    #[test]
    fn silverman_rejects_degenerate_sample() {
        let sample = vec![1.5, 1.5];
        assert!(matches!(
            silverman_bandwidth(&sample),
            Err(FvarError::ZeroDispersion)
        ));
    }

    #[test]
    fn silverman_matches_direct_formula_on_two_points() {
        // s = sqrt(0.5), IQR = 0.5 under type-7 quantiles; the robust term wins
        let h = silverman_bandwidth(&[0.0, 1.0]).unwrap();
        let expected = 0.9 * (0.5 / 1.34) * 2f64.powf(-0.2);
        assert_relative_eq!(h, expected, epsilon = 1e-15);
    }

    #[test]
    fn silverman_shrinks_at_the_fifth_root_rate() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let draws: Vec<f64> = (0..8000).map(|_| normal.sample(&mut rng)).collect();
        let h_full = silverman_bandwidth(&draws).unwrap();
        let h_head = silverman_bandwidth(&draws[..500]).unwrap();
        // dispersion estimates agree, so the ratio is driven by n^(-1/5)
        let expected_ratio = (8000f64 / 500.0).powf(-0.2);
        assert_relative_eq!(h_full / h_head, expected_ratio, epsilon = 0.05);
        let s = sample_std(&draws);
        let iqr = quantile(&draws, 0.75) - quantile(&draws, 0.25);
        let expected = 0.9 * s.min(iqr / 1.34) * 8000f64.powf(-0.2);
        assert_relative_eq!(h_full, expected, epsilon = 1e-12);
    }

    #[test]
    fn single_midpoint_gives_symmetric_unimodal_curve() {
        let support = Support::new(0.0, 10.0).unwrap();
        let curve = estimate_density(&[5.0], support, 201, Some(0.3)).unwrap();
        let values = curve.values();
        let peak = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, 100);
        for i in 0..values.len() {
            let mirror = values.len() - 1 - i;
            assert_relative_eq!(values[i], values[mirror], max_relative = 1e-9, epsilon = 1e-12);
        }
        assert_relative_eq!(curve.integral(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn point_at_lower_bound_doubles_through_reflection() {
        // the observation and its lower reflection coincide at L
        let support = Support::new(0.0, 10.0).unwrap();
        let grid = linspace(0.0, 10.0, 401);
        let h = 0.5;
        let raw = reflected_kde_raw(&[0.0], support, &grid, h);
        let expected = 2.0 * INV_SQRT_2PI / h;
        assert_relative_eq!(raw[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn interior_matches_plain_gaussian_kde() {
        let support = Support::new(0.0, 6.0).unwrap();
        let h = 0.15;
        // all mass at least 1h inside, evaluation points at least 8h from bounds
        let sample = vec![2.0, 2.3, 2.7, 3.1, 3.3, 3.9, 4.1];
        let grid = linspace(0.0, 6.0, 601);
        let raw = reflected_kde_raw(&sample, support, &grid, h);
        let n = sample.len() as f64;
        for (i, &x) in grid.iter().enumerate() {
            if x - support.lower > 8.0 * h && support.upper - x > 8.0 * h {
                let plain: f64 = sample
                    .iter()
                    .map(|&xi| {
                        let z = (x - xi) / h;
                        INV_SQRT_2PI * (-0.5 * z * z).exp() / (n * h)
                    })
                    .sum();
                assert!((raw[i] - plain).abs() < 1e-12, "mismatch at x = {x}");
            }
        }
    }

    #[test]
    fn uniform_sample_recovers_flat_density() {
        let support = Support::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let unif = Uniform::new_inclusive(0.0, 1.0).unwrap();
        let sample: Vec<f64> = (0..8000).map(|_| unif.sample(&mut rng)).collect();
        let curve = estimate_density(&sample, support, 1000, None).unwrap();
        let sup_err = curve
            .values()
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(sup_err < 0.05, "sup-norm error {sup_err}");
    }

    #[test]
    fn shifting_the_sample_shifts_the_mode() {
        let support = Support::new(0.0, 10.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let normal = rand_distr::Normal::new(4.0, 0.6).unwrap();
        let sample: Vec<f64> = (0..4000)
            .map(|_| {
                let v: f64 = normal.sample(&mut rng);
                v.clamp(0.0, 10.0)
            })
            .collect();
        let shift = 1.0;
        let shifted: Vec<f64> = sample.iter().map(|v| v + shift).collect();
        let h = silverman_bandwidth(&sample).unwrap();
        let a = estimate_density(&sample, support, 1001, Some(h)).unwrap();
        let b = estimate_density(&shifted, support, 1001, Some(h)).unwrap();
        let argmax = |c: &DensityCurve| {
            let i = c
                .values()
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                .unwrap()
                .0;
            c.grid()[i]
        };
        let step = 10.0 / 1000.0;
        assert!((argmax(&b) - argmax(&a) - shift).abs() <= step + 1e-12);
    }

    #[test]
    fn mise_against_truth_decreases_with_sample_size() {
        let support = Support::new(0.0, 12.0).unwrap();
        let gamma = Gamma::new(2.0, 1.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let draw_n = |rng: &mut ChaCha20Rng, n: usize| -> Vec<f64> {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let v: f64 = gamma.sample(rng);
                if v <= 12.0 {
                    out.push(v);
                }
            }
            out
        };
        let grid = linspace(0.0, 12.0, 800);
        // Gamma(2,1) truncated to [0,12]; truncation mass is ~1e-4
        let truth: Vec<f64> = grid.iter().map(|&x| x * (-x).exp()).collect();
        let mise = |curve: &DensityCurve| {
            let diff: Vec<f64> = curve
                .values()
                .iter()
                .zip(&truth)
                .map(|(a, b)| (a - b) * (a - b))
                .collect();
            trapezoid(&grid, &diff)
        };
        let mut last = f64::INFINITY;
        for n in [500usize, 2000, 8000] {
            let sample = draw_n(&mut rng, n);
            let curve = estimate_density(&sample, support, 800, None).unwrap();
            let err = mise(&curve);
            assert!(err < last, "MISE did not decrease at n = {n}: {err} vs {last}");
            last = err;
        }
    }

    #[test]
    fn panel_validation_catches_bad_rows() {
        let support = Support::new(0.0, 1.0).unwrap();
        let err = MicroPanel::new(
            vec!["a".into()],
            vec![vec![0.5; 9]],
            support,
            DEFAULT_MIN_OBSERVATIONS,
        );
        assert!(matches!(err, Err(FvarError::TooFewObservations { .. })));
        let err = MicroPanel::new(vec!["a".into()], vec![vec![0.5, 1.4]], support, 2);
        assert!(matches!(err, Err(FvarError::OutOfSupport { .. })));
    }

    #[test]
    fn estimate_density_error_paths() {
        let support = Support::new(0.0, 1.0).unwrap();
        assert!(matches!(
            estimate_density(&[], support, 100, None),
            Err(FvarError::EmptySample)
        ));
        assert!(Support::new(1.0, 1.0).is_err());
        assert!(matches!(
            estimate_density(&[0.5, 0.6], support, 32, None),
            Err(FvarError::InvalidGrid { .. })
        ));
    }

    #[test]
    fn panel_estimation_is_deterministic_across_parallel_runs() {
        let support = Support::new(0.0, 6.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let unif = Uniform::new(0.1, 5.9).unwrap();
        let samples: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..200).map(|_| unif.sample(&mut rng)).collect())
            .collect();
        let periods: Vec<String> = (0..8).map(|i| format!("t{i}")).collect();
        let panel = MicroPanel::new(periods, samples, support, 10).unwrap();
        let a = estimate_panel(&panel, 256, None).unwrap();
        let b = estimate_panel(&panel, 256, None).unwrap();
        for (ca, cb) in a.iter().zip(&b) {
            assert_eq!(ca.values(), cb.values());
        }
    }
}
