//! Data-generating processes with an exact low-dimensional functional
//! structure.
//!
//! Both processes drive a five-variable VAR(4) (two observed aggregates plus
//! three latent factors). The factors load on a fixed functional basis built
//! from the principal components of fifty random Gamma-mixture densities:
//! in the first process the factors generate log-quantile-density curves, in
//! the second the log of the density itself, which makes the estimated model
//! deliberately misspecified.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Uniform};
use statrs::distribution::{Beta as BetaDist, Continuous, Gamma as GammaDist};

use crate::bvar::{structural_irf, unconditional_mean, PosteriorDraw};
use crate::density::{DensityCurve, MicroPanel, Support, DENSITY_FLOOR};
use crate::derive_seed;
use crate::error::{FvarError, Result};
use crate::fpca::{fit_fpca, CurvePanel, CurveSpace};
use crate::lqd::{lqd_forward, lqd_inverse, LqdCurve};
use crate::numerics::{cum_trapezoid, linspace, trapezoid, MonotoneInterp};

/// Functional space the latent factors act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Factors generate LQD curves (matches the estimated model).
    Lqd,
    /// Factors generate log densities (misspecifies the estimated model).
    LogDensity,
}

/// How the innovation covariance is assembled from random matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaRecipe {
    /// Average of `count` products `R R'` with iid product-normal entries.
    AveragedProducts { count: usize },
    /// A single product `R R'`, which carries strong random cross-correlation.
    SingleProduct,
}

/// Fixed functional basis of a DGP: mean curve plus `K_true` loading columns.
#[derive(Debug, Clone)]
pub struct DgpBasis {
    pub kind: BasisKind,
    /// Evaluation grid: [0,1] for LQD curves, the support for log densities.
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    /// Columns scaled to unit L2 function norm.
    pub columns: DMatrix<f64>,
}

/// VAR intercept and lag blocks of the built-in simulation design.
///
/// Five variables, four lags; the diagonal structure keeps the companion
/// matrix comfortably inside the unit circle.
pub fn dgp_var_coefficients() -> (DVector<f64>, Vec<DMatrix<f64>>) {
    let intercept = DVector::zeros(5);
    let pi1 = DMatrix::from_row_slice(
        5,
        5,
        &[
            0.85, -0.15, 0.15, 0.15, -0.25, //
            -0.2, 0.85, -0.15, -0.25, -0.2, //
            0.15, -0.15, 0.85, -0.15, 0.0, //
            0.1, 0.15, -0.2, 0.85, -0.2, //
            -0.25, 0.15, 0.15, 0.15, 0.85,
        ],
    );
    let pi2 = DMatrix::from_row_slice(
        5,
        5,
        &[
            -0.3, 0.1, 0.15, -0.15, -0.1, //
            -0.1, -0.3, 0.1, 0.15, 0.15, //
            -0.05, 0.1, -0.3, 0.05, -0.1, //
            0.15, -0.1, -0.05, -0.3, -0.05, //
            0.15, -0.15, 0.1, -0.1, -0.3,
        ],
    );
    let pi3 = DMatrix::identity(5, 5) * 0.15;
    let pi4 = DMatrix::identity(5, 5) * 0.05;
    (intercept, vec![pi1, pi2, pi3, pi4])
}

/// Innovation covariance from random matrices with entries `0.1 z1 z2`,
/// `z1, z2` standard normal.
pub fn build_omega(n: usize, recipe: OmegaRecipe, seed: u64) -> DMatrix<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sample_r = |rng: &mut ChaCha20Rng| {
        DMatrix::from_fn(n, n, |_, _| {
            let z1: f64 = normal.sample(rng);
            let z2: f64 = normal.sample(rng);
            0.1 * z1 * z2
        })
    };
    let omega = match recipe {
        OmegaRecipe::AveragedProducts { count } => {
            let mut acc = DMatrix::zeros(n, n);
            for _ in 0..count {
                let r = sample_r(&mut rng);
                acc += &r * r.transpose();
            }
            acc / count as f64
        }
        OmegaRecipe::SingleProduct => {
            let r = sample_r(&mut rng);
            &r * r.transpose()
        }
    };
    0.5 * (&omega + omega.transpose())
}

/// One random Gamma-mixture density on the censored support.
///
/// The mixture integrates a Gamma density with shape `1 + 2w` and unit scale
/// against a `Beta(a, b)` weight on `w`, by the midpoint rule; censoring to
/// the support and renormalizing happens in the curve constructor.
fn gamma_mixture_density(
    a: f64,
    b: f64,
    support: Support,
    grid: &[f64],
    n_mix: usize,
) -> Result<DensityCurve> {
    let beta = BetaDist::new(a, b)
        .map_err(|e| FvarError::Data(format!("invalid Beta mixing parameters: {e}")))?;
    let mut values = vec![0.0; grid.len()];
    let dw = 1.0 / n_mix as f64;
    for j in 0..n_mix {
        let w = (j as f64 + 0.5) * dw;
        let weight = beta.pdf(w) * dw;
        if weight <= 0.0 {
            continue;
        }
        let gamma = GammaDist::new(1.0 + 2.0 * w, 1.0)
            .map_err(|e| FvarError::Data(format!("invalid Gamma shape: {e}")))?;
        for (i, &xi) in grid.iter().enumerate() {
            values[i] += weight * gamma.pdf(xi.max(1e-12));
        }
    }
    DensityCurve::from_unnormalized(support, grid.to_vec(), values)
}

/// Basis construction: principal components of transformed random mixtures.
///
/// Draws `n_realizations` mixture densities with `a, b ~ U[0, 3]`, censors
/// them to the support, transforms per `kind`, and keeps the first `k_true`
/// principal components rescaled to unit L2 function norm together with the
/// mean curve. Deterministic given the seed.
pub fn build_gamma_mixture_basis(
    kind: BasisKind,
    n_realizations: usize,
    k_true: usize,
    seed: u64,
    support: Support,
    n_grid: usize,
    n_grid01: usize,
) -> Result<DgpBasis> {
    let grid = linspace(support.lower, support.upper, n_grid);
    let unif = Uniform::new(0.0f64, 3.0).expect("uniform range");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut densities = Vec::with_capacity(n_realizations);
    for _ in 0..n_realizations {
        let a = unif.sample(&mut rng).max(0.02);
        let b = unif.sample(&mut rng).max(0.02);
        densities.push(gamma_mixture_density(a, b, support, &grid, 200)?);
    }
    let times: Vec<String> = (0..n_realizations).map(|i| format!("r{i:03}")).collect();
    let panel = match kind {
        BasisKind::Lqd => {
            let curves: Vec<LqdCurve> = densities
                .iter()
                .map(|p| lqd_forward(p, n_grid01))
                .collect::<Result<_>>()?;
            CurvePanel::from_lqd_curves(times, &curves)?
        }
        BasisKind::LogDensity => {
            let rows: Vec<Vec<f64>> = densities
                .iter()
                .map(|p| p.values().iter().map(|v| v.max(DENSITY_FLOOR).ln()).collect())
                .collect();
            CurvePanel::from_rows(times, grid.clone(), rows, CurveSpace::LogDensity)?
        }
    };
    let model = fit_fpca(&panel, k_true)?;
    let basis_grid = model.grid().to_vec();
    let mut columns = model.basis().clone();
    for c in 0..k_true {
        let col: Vec<f64> = columns.column(c).iter().copied().collect();
        let sq: Vec<f64> = col.iter().map(|v| v * v).collect();
        let norm = trapezoid(&basis_grid, &sq).sqrt();
        if norm > 0.0 {
            for r in 0..columns.nrows() {
                columns[(r, c)] /= norm;
            }
        }
    }
    Ok(DgpBasis {
        kind,
        grid: basis_grid,
        mean: model.mean().to_vec(),
        columns,
    })
}

/// Full specification of a simulation design.
#[derive(Debug, Clone)]
pub struct DgpSpec {
    pub intercept: DVector<f64>,
    pub lags: Vec<DMatrix<f64>>,
    pub omega: DMatrix<f64>,
    pub basis: DgpBasis,
    pub support: Support,
    pub n_v: usize,
    pub k_true: usize,
    pub n_micro: usize,
    pub t_len: usize,
    pub n_grid: usize,
    pub n_grid01: usize,
    pub burn_in: usize,
}

impl DgpSpec {
    /// Assemble and validate a design; the companion matrix must be stable.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        intercept: DVector<f64>,
        lags: Vec<DMatrix<f64>>,
        omega: DMatrix<f64>,
        basis: DgpBasis,
        support: Support,
        n_v: usize,
        n_micro: usize,
        t_len: usize,
        burn_in: usize,
    ) -> Result<Self> {
        let n = intercept.len();
        let k_true = basis.columns.ncols();
        if n != n_v + k_true {
            return Err(FvarError::DimensionMismatch(format!(
                "system dimension {n} vs {n_v} aggregates + {k_true} factors"
            )));
        }
        let draw = PosteriorDraw::from_parameters(Self::stack_pi(&intercept, &lags), omega.clone())?;
        let radius = draw.spectral_radius();
        if radius >= 1.0 {
            return Err(FvarError::NoSteadyState(radius));
        }
        let n_grid = match basis.kind {
            BasisKind::Lqd => crate::density::DEFAULT_GRID_POINTS,
            BasisKind::LogDensity => basis.grid.len(),
        };
        let n_grid01 = match basis.kind {
            BasisKind::Lqd => basis.grid.len(),
            BasisKind::LogDensity => crate::density::DEFAULT_GRID_POINTS,
        };
        Ok(Self {
            intercept,
            lags,
            omega,
            basis,
            support,
            n_v,
            k_true,
            n_micro,
            t_len,
            n_grid,
            n_grid01,
            burn_in,
        })
    }

    fn stack_pi(intercept: &DVector<f64>, lags: &[DMatrix<f64>]) -> DMatrix<f64> {
        let n = intercept.len();
        let p = lags.len();
        let mut pi = DMatrix::zeros(n, 1 + n * p);
        pi.set_column(0, intercept);
        for (l, lag) in lags.iter().enumerate() {
            for r in 0..n {
                for c in 0..n {
                    pi[(r, 1 + l * n + c)] = lag[(r, c)];
                }
            }
        }
        pi
    }

    /// The built-in first design: LQD basis, support [0, 6], N = 8000, T = 500.
    pub fn dgp1(seed: u64) -> Result<Self> {
        Self::standard(BasisKind::Lqd, seed)
    }

    /// The built-in second design: log-density basis, otherwise identical.
    pub fn dgp2(seed: u64) -> Result<Self> {
        Self::standard(BasisKind::LogDensity, seed)
    }

    fn standard(kind: BasisKind, seed: u64) -> Result<Self> {
        let support = Support::new(0.0, 6.0)?;
        let (intercept, lags) = dgp_var_coefficients();
        let omega = build_omega(
            5,
            OmegaRecipe::AveragedProducts { count: 100 },
            derive_seed(seed, "omega"),
        );
        let basis = build_gamma_mixture_basis(
            kind,
            50,
            3,
            derive_seed(seed, "basis"),
            support,
            crate::density::DEFAULT_GRID_POINTS,
            crate::density::DEFAULT_GRID_POINTS,
        )?;
        Self::new(intercept, lags, omega, basis, support, 2, 8000, 500, 500)
    }

    /// Shrink the sample sizes (smoke tests and fast studies).
    pub fn with_sizes(mut self, t_len: usize, n_micro: usize) -> Self {
        self.t_len = t_len;
        self.n_micro = n_micro;
        self
    }

    /// The coefficient matrix `[c, Pi_1, ..., Pi_p]` as a posterior draw.
    pub fn as_draw(&self) -> Result<PosteriorDraw> {
        PosteriorDraw::from_parameters(
            Self::stack_pi(&self.intercept, &self.lags),
            self.omega.clone(),
        )
    }

    /// Map a factor vector to the density it generates.
    pub fn density_from_scores(&self, alpha: &[f64]) -> Result<DensityCurve> {
        let combo = &self.basis.columns * DVector::from_column_slice(alpha);
        let curve: Vec<f64> = self
            .basis
            .mean
            .iter()
            .zip(combo.iter())
            .map(|(m, c)| m + c)
            .collect();
        match self.basis.kind {
            BasisKind::Lqd => {
                let f = LqdCurve::new(self.basis.grid.clone(), curve, self.support.upper)?;
                lqd_inverse(&f, self.support, self.n_grid)
            }
            BasisKind::LogDensity => {
                let vals: Vec<f64> = curve.iter().map(|v| v.min(700.0).exp()).collect();
                DensityCurve::from_unnormalized(self.support, self.basis.grid.clone(), vals)
            }
        }
    }
}

/// Output of one simulated sample path.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub periods: Vec<String>,
    /// `T x n_v` observed aggregates.
    pub y: DMatrix<f64>,
    /// `T x K_true` latent factor paths.
    pub alpha: DMatrix<f64>,
    /// True per-period densities the micro samples were drawn from.
    pub densities: Vec<DensityCurve>,
    pub micro: MicroPanel,
}

/// Simulate the VAR forward, map factors to densities, and draw micro samples
/// by inverse-cdf sampling. Deterministic given the seed.
pub fn simulate_dgp(spec: &DgpSpec, seed: u64) -> Result<SimulatedPanel> {
    let n = spec.intercept.len();
    let p = spec.lags.len();
    let chol = Cholesky::new(spec.omega.clone())
        .ok_or(FvarError::NotPositiveDefinite("Omega"))?
        .l();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, "path"));
    let mut hist: Vec<DVector<f64>> = (0..p).map(|_| DVector::zeros(n)).collect();
    let mut z_rows: Vec<DVector<f64>> = Vec::with_capacity(spec.t_len);
    for step in 0..spec.burn_in + spec.t_len {
        let eps = DVector::from_fn(n, |_, _| normal.sample(&mut rng));
        let mut z = spec.intercept.clone() + &chol * eps;
        for (l, lag) in spec.lags.iter().enumerate() {
            z += lag * &hist[l];
        }
        hist.rotate_right(1);
        hist[0] = z.clone();
        if step >= spec.burn_in {
            z_rows.push(z);
        }
    }
    let t = spec.t_len;
    let mut y = DMatrix::zeros(t, spec.n_v);
    let mut alpha = DMatrix::zeros(t, spec.k_true);
    let mut densities = Vec::with_capacity(t);
    let mut samples = Vec::with_capacity(t);
    let mut periods = Vec::with_capacity(t);
    let mut micro_rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, "micro"));
    let unif = Uniform::new(0.0f64, 1.0).expect("unit uniform");
    for (ti, z) in z_rows.iter().enumerate() {
        for j in 0..spec.n_v {
            y[(ti, j)] = z[j];
        }
        let a: Vec<f64> = (0..spec.k_true).map(|k| z[spec.n_v + k]).collect();
        for (k, v) in a.iter().enumerate() {
            alpha[(ti, k)] = *v;
        }
        let density = spec.density_from_scores(&a)?;
        // inverse-cdf sampling through the generated quantile function
        let mut cdf = cum_trapezoid(density.grid(), density.values());
        let total = *cdf.last().expect("nonempty cdf");
        for v in &mut cdf {
            *v /= total;
        }
        let quantile = MonotoneInterp::new(&cdf, density.grid());
        let draws: Vec<f64> = (0..spec.n_micro)
            .map(|_| quantile.eval(unif.sample(&mut micro_rng)))
            .collect();
        samples.push(draws);
        densities.push(density);
        periods.push(format!("t{ti:04}"));
    }
    let micro = MicroPanel::new(periods.clone(), samples, spec.support, 1)?;
    Ok(SimulatedPanel {
        periods,
        y,
        alpha,
        densities,
        micro,
    })
}

/// Exact distributional impulse response implied by the design parameters.
#[derive(Debug, Clone)]
pub struct TruthIrf {
    pub horizons: Vec<usize>,
    pub grid: Vec<f64>,
    pub baseline: Vec<f64>,
    pub deltas: Vec<Vec<f64>>,
}

/// True functional IRF from the known parameters, bypassing estimation.
pub fn true_functional_irf(
    spec: &DgpSpec,
    shock: usize,
    size_sd: f64,
    horizons: &[usize],
) -> Result<TruthIrf> {
    let draw = spec.as_draw()?;
    let mean = unconditional_mean(&draw)?;
    let alpha_ss: Vec<f64> = (0..spec.k_true).map(|k| mean[spec.n_v + k]).collect();
    let p_ss = spec.density_from_scores(&alpha_ss)?;
    let h_max = horizons.iter().copied().max().unwrap_or(0);
    let irf = structural_irf(&draw, shock, size_sd, h_max)?;
    let mut deltas = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let a_h: Vec<f64> = (0..spec.k_true)
            .map(|k| alpha_ss[k] + irf.responses[(spec.n_v + k, h)])
            .collect();
        let p_h = spec.density_from_scores(&a_h)?;
        deltas.push(
            p_h.values()
                .iter()
                .zip(p_ss.values())
                .map(|(a, b)| a - b)
                .collect(),
        );
    }
    Ok(TruthIrf {
        horizons: horizons.to_vec(),
        grid: p_ss.grid().to_vec(),
        baseline: p_ss.values().to_vec(),
        deltas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_spec(kind: BasisKind, seed: u64) -> DgpSpec {
        let support = Support::new(0.0, 6.0).unwrap();
        let (intercept, lags) = dgp_var_coefficients();
        let omega = build_omega(
            5,
            OmegaRecipe::AveragedProducts { count: 100 },
            derive_seed(seed, "omega"),
        );
        let basis = build_gamma_mixture_basis(
            kind,
            50,
            3,
            derive_seed(seed, "basis"),
            support,
            300,
            300,
        )
        .unwrap();
        DgpSpec::new(intercept, lags, omega, basis, support, 2, 600, 60, 200).unwrap()
    }

    #[test]
    fn companion_matrix_of_the_design_is_stable() {
        let spec = small_spec(BasisKind::Lqd, 1);
        let radius = spec.as_draw().unwrap().spectral_radius();
        assert!(radius < 1.0, "spectral radius {radius}");
    }

    #[test]
    fn omega_is_positive_definite_under_both_recipes() {
        for recipe in [
            OmegaRecipe::AveragedProducts { count: 100 },
            OmegaRecipe::SingleProduct,
        ] {
            let omega = build_omega(5, recipe, 33);
            assert!(Cholesky::new(omega).is_some());
        }
    }

    #[test]
    fn basis_columns_are_orthogonal_with_unit_function_norm() {
        let spec = small_spec(BasisKind::Lqd, 5);
        let cols = &spec.basis.columns;
        let grid = &spec.basis.grid;
        for a in 0..3 {
            // function norm is one under trapezoid quadrature
            let sq: Vec<f64> = (0..cols.nrows()).map(|i| cols[(i, a)] * cols[(i, a)]).collect();
            assert!((trapezoid(grid, &sq) - 1.0).abs() < 1e-10);
            // rescaling preserves the factorization's orthogonality
            for b in 0..a {
                let dot: f64 = (0..cols.nrows()).map(|i| cols[(i, a)] * cols[(i, b)]).sum();
                let na: f64 = sq.iter().sum::<f64>().sqrt();
                let nb: f64 = (0..cols.nrows())
                    .map(|i| cols[(i, b)] * cols[(i, b)])
                    .sum::<f64>()
                    .sqrt();
                assert!(
                    (dot / (na * nb)).abs() < 1e-8,
                    "columns {a} and {b} are not orthogonal"
                );
            }
        }
    }

    #[test]
    fn bases_are_deterministic_given_the_seed() {
        let a = build_gamma_mixture_basis(
            BasisKind::Lqd,
            20,
            3,
            77,
            Support::new(0.0, 6.0).unwrap(),
            200,
            200,
        )
        .unwrap();
        let b = build_gamma_mixture_basis(
            BasisKind::Lqd,
            20,
            3,
            77,
            Support::new(0.0, 6.0).unwrap(),
            200,
            200,
        )
        .unwrap();
        assert_eq!(a.columns, b.columns);
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn factor_scores_reconstruct_valid_densities() {
        for kind in [BasisKind::Lqd, BasisKind::LogDensity] {
            let spec = small_spec(kind, 9);
            for scores in [[0.0, 0.0, 0.0], [0.5, -0.3, 0.2], [-1.0, 0.8, 0.4]] {
                let p = spec.density_from_scores(&scores).unwrap();
                assert!(p.values().iter().all(|v| *v >= 0.0));
                assert_relative_eq!(p.integral(), 1.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn simulated_micro_draws_live_on_the_support_and_match_their_density() {
        let spec = small_spec(BasisKind::Lqd, 13);
        let sim = simulate_dgp(&spec, 99).unwrap();
        assert_eq!(sim.micro.len(), 60);
        let bound = 4.0 / (spec.n_micro as f64).sqrt();
        for (ti, sample) in sim.micro.samples().iter().enumerate() {
            assert!(sample.iter().all(|v| (0.0..=6.0).contains(v)));
            let empirical = sample.iter().sum::<f64>() / sample.len() as f64;
            let truth = sim.densities[ti].mean();
            // CLT bound with the support width as the crude scale
            assert!(
                (empirical - truth).abs() < bound * 6.0,
                "period {ti}: {empirical} vs {truth}"
            );
        }
    }

    #[test]
    fn zero_intercept_design_has_zero_steady_state() {
        let spec = small_spec(BasisKind::Lqd, 21);
        let mu = unconditional_mean(&spec.as_draw().unwrap()).unwrap();
        for v in mu.iter() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn true_irf_of_a_zero_shock_vanishes_and_deltas_have_no_mass() {
        let spec = small_spec(BasisKind::Lqd, 31);
        let zero = true_functional_irf(&spec, 0, 0.0, &[0, 4]).unwrap();
        for d in &zero.deltas {
            assert!(d.iter().all(|v| *v == 0.0));
        }
        let truth = true_functional_irf(&spec, 1, 1.0, &[0, 2, 8]).unwrap();
        for d in &truth.deltas {
            let mass = trapezoid(&truth.grid, d);
            assert!(mass.abs() < 1e-6);
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let spec = small_spec(BasisKind::LogDensity, 41);
        let a = simulate_dgp(&spec, 7).unwrap();
        let b = simulate_dgp(&spec, 7).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.alpha, b.alpha);
        assert_eq!(a.micro.samples()[3], b.micro.samples()[3]);
    }
}
