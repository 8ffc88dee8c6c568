//! Distributional impulse responses and summary functionals.
//!
//! For each posterior draw the steady-state scores are the unconditional mean
//! of the VAR; the steady-state density is the inverse LQD of the
//! reconstructed curve. A shock moves the scores by the structural IRF, and
//! the response is the difference between the post-shock density and the
//! steady-state density at every grid point. Constraint enforcement is
//! inherited from the inverse transform; nothing here renormalizes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvar::{structural_irf, unconditional_mean, PosteriorDraw};
use crate::density::{DensityCurve, Support};
use crate::error::{FvarError, Result};
use crate::fpca::FpcaModel;
use crate::lqd::lqd_inverse;
use crate::numerics::{cum_trapezoid, linspace, quantile_sorted, trapezoid, MonotoneInterp};

/// Where the functional-component scores sit inside the VAR variable vector.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScoreBlock {
    pub offset: usize,
    pub len: usize,
}

/// Which estimator produced a distributional response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IrfMethod {
    Fsvar,
    Flp,
}

impl IrfMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            IrfMethod::Fsvar => "fsvar",
            IrfMethod::Flp => "flp",
        }
    }
}

/// Shock and reconstruction settings for a distributional IRF run.
#[derive(Debug, Clone)]
pub struct FirfConfig {
    pub shock: usize,
    pub size_sd: f64,
    pub horizons: Vec<usize>,
    pub support: Support,
    pub n_grid: usize,
}

/// Response curves of one posterior draw.
#[derive(Debug, Clone)]
pub struct DrawIrf {
    /// Steady-state density values on the shared grid.
    pub baseline: Vec<f64>,
    /// Per horizon, `p_{ss+h} - p_ss` on the shared grid.
    pub deltas: Vec<Vec<f64>>,
}

impl DrawIrf {
    /// Density values `h` periods after the shock.
    pub fn shocked(&self, horizon_idx: usize) -> Vec<f64> {
        self.baseline
            .iter()
            .zip(&self.deltas[horizon_idx])
            .map(|(b, d)| b + d)
            .collect()
    }
}

/// Distributional impulse responses across posterior draws.
#[derive(Debug, Clone)]
pub struct DistributionalIrf {
    pub horizons: Vec<usize>,
    pub grid: Vec<f64>,
    pub support: Support,
    pub draws: Vec<DrawIrf>,
    /// Draws excluded because their companion matrix had no steady state.
    pub dropped_draws: usize,
    /// Point-estimate deltas per horizon (local-projection output).
    pub point_estimate: Option<Vec<Vec<f64>>>,
    pub method: IrfMethod,
}

impl DistributionalIrf {
    fn collect_at(&self, horizon_idx: usize, grid_idx: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .draws
            .iter()
            .map(|d| d.deltas[horizon_idx][grid_idx])
            .collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite delta"));
        v
    }

    /// Pointwise median response at one horizon.
    pub fn median_delta(&self, horizon_idx: usize) -> Vec<f64> {
        (0..self.grid.len())
            .map(|j| quantile_sorted(&self.collect_at(horizon_idx, j), 0.5))
            .collect()
    }

    /// Pointwise credible band at one horizon; `level` is e.g. 0.68 or 0.90.
    pub fn band(&self, horizon_idx: usize, level: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(0.0 < level && level < 1.0) {
            return Err(FvarError::BadQuantileLevel(level));
        }
        let lo_q = 0.5 * (1.0 - level);
        let hi_q = 1.0 - lo_q;
        let mut lo = Vec::with_capacity(self.grid.len());
        let mut hi = Vec::with_capacity(self.grid.len());
        for j in 0..self.grid.len() {
            let sorted = self.collect_at(horizon_idx, j);
            lo.push(quantile_sorted(&sorted, lo_q));
            hi.push(quantile_sorted(&sorted, hi_q));
        }
        Ok((lo, hi))
    }

    /// Pointwise median steady-state density across draws.
    pub fn median_baseline(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|j| {
                let mut v: Vec<f64> = self.draws.iter().map(|d| d.baseline[j]).collect();
                v.sort_by(|a, b| a.partial_cmp(b).expect("finite baseline"));
                quantile_sorted(&v, 0.5)
            })
            .collect()
    }
}

/// Map score-space structural IRFs into distributional responses, draw by draw.
///
/// Draws whose companion matrix has a unit or explosive root carry no steady
/// state; they are dropped and counted in `dropped_draws`.
pub fn functional_irf(
    draws: &[PosteriorDraw],
    model: &FpcaModel,
    block: ScoreBlock,
    cfg: &FirfConfig,
) -> Result<DistributionalIrf> {
    if draws.is_empty() {
        return Err(FvarError::Data("no posterior draws supplied".to_string()));
    }
    let n = draws[0].n();
    if block.offset + block.len > n {
        return Err(FvarError::DimensionMismatch(format!(
            "score block {}..{} exceeds system dimension {n}",
            block.offset,
            block.offset + block.len
        )));
    }
    if block.len != model.k() {
        return Err(FvarError::DimensionMismatch(format!(
            "score block length {} vs model K = {}",
            block.len,
            model.k()
        )));
    }
    let h_max = cfg.horizons.iter().copied().max().unwrap_or(0);
    let results: Vec<Option<DrawIrf>> = draws
        .par_iter()
        .map(|draw| draw_response(draw, model, block, cfg, h_max).ok())
        .collect();
    let mut kept = Vec::with_capacity(results.len());
    let mut dropped = 0usize;
    for r in results {
        match r {
            Some(d) => kept.push(d),
            None => dropped += 1,
        }
    }
    if kept.is_empty() {
        return Err(FvarError::Data(
            "every posterior draw was dropped as non-stationary".to_string(),
        ));
    }
    Ok(DistributionalIrf {
        horizons: cfg.horizons.clone(),
        grid: linspace(cfg.support.lower, cfg.support.upper, cfg.n_grid),
        support: cfg.support,
        draws: kept,
        dropped_draws: dropped,
        point_estimate: None,
        method: IrfMethod::Fsvar,
    })
}

fn draw_response(
    draw: &PosteriorDraw,
    model: &FpcaModel,
    block: ScoreBlock,
    cfg: &FirfConfig,
    h_max: usize,
) -> Result<DrawIrf> {
    let mean = unconditional_mean(draw)?;
    let alpha_ss: Vec<f64> = (0..block.len).map(|k| mean[block.offset + k]).collect();
    let f_ss = model.reconstruct_lqd(&alpha_ss)?;
    let p_ss = lqd_inverse(&f_ss, cfg.support, cfg.n_grid)?;
    let irf = structural_irf(draw, cfg.shock, cfg.size_sd, h_max)?;
    let mut deltas = Vec::with_capacity(cfg.horizons.len());
    for &h in &cfg.horizons {
        let alpha_h: Vec<f64> = (0..block.len)
            .map(|k| alpha_ss[k] + irf.responses[(block.offset + k, h)])
            .collect();
        let f_h = model.reconstruct_lqd(&alpha_h)?;
        let p_h = lqd_inverse(&f_h, cfg.support, cfg.n_grid)?;
        let delta: Vec<f64> = p_h
            .values()
            .iter()
            .zip(p_ss.values())
            .map(|(a, b)| a - b)
            .collect();
        deltas.push(delta);
    }
    Ok(DrawIrf {
        baseline: p_ss.values().to_vec(),
        deltas,
    })
}

/// Quantile of a density given by grid values, via cdf inversion.
fn grid_quantile(grid: &[f64], values: &[f64], q: f64) -> f64 {
    let mut cdf = cum_trapezoid(grid, values);
    let total = *cdf.last().expect("nonempty cdf");
    for v in &mut cdf {
        *v /= total;
    }
    MonotoneInterp::new(&cdf, grid).eval(q)
}

/// Per-draw horizon paths of the percent change in the `q`-quantile.
///
/// Entry `[draw][horizon]` is `100 (Q_h(q) / Q_ss(q) - 1)`.
pub fn quantile_response(dirf: &DistributionalIrf, q: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0 < q && q < 1.0) {
        return Err(FvarError::BadQuantileLevel(q));
    }
    Ok(dirf
        .draws
        .par_iter()
        .map(|d| {
            let q_ss = grid_quantile(&dirf.grid, &d.baseline, q);
            (0..dirf.horizons.len())
                .map(|hi| {
                    let shocked = d.shocked(hi);
                    let q_h = grid_quantile(&dirf.grid, &shocked, q);
                    100.0 * (q_h / q_ss - 1.0)
                })
                .collect()
        })
        .collect())
}

/// Cumulative trapezoid integral evaluated at an arbitrary point.
///
/// Inside a cell the integrand is linear, so the cumulative integral is the
/// quadratic continuation from the left knot; class shares built from
/// differences of this function sum exactly to the total integral.
fn cumulative_at(grid: &[f64], values: &[f64], cdf: &[f64], x: f64) -> f64 {
    if x <= grid[0] {
        return 0.0;
    }
    if x >= grid[grid.len() - 1] {
        return cdf[cdf.len() - 1];
    }
    let j = grid.partition_point(|&v| v <= x) - 1;
    let dx = x - grid[j];
    let cell = grid[j + 1] - grid[j];
    let slope = (values[j + 1] - values[j]) / cell;
    cdf[j] + values[j] * dx + 0.5 * slope * dx * dx
}

/// Per-draw horizon paths of class-share changes over equal-width classes.
///
/// Entry `[draw][horizon][class]` is the share of `p_{ss+h}` in the class
/// minus the steady-state share; the changes sum to zero across classes.
pub fn class_share_response(
    dirf: &DistributionalIrf,
    n_classes: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if n_classes < 2 {
        return Err(FvarError::Data(format!(
            "need at least two classes, got {n_classes}"
        )));
    }
    let bounds: Vec<f64> = linspace(dirf.support.lower, dirf.support.upper, n_classes + 1);
    let shares = |values: &[f64]| -> Vec<f64> {
        let cdf = cum_trapezoid(&dirf.grid, values);
        (0..n_classes)
            .map(|c| {
                cumulative_at(&dirf.grid, values, &cdf, bounds[c + 1])
                    - cumulative_at(&dirf.grid, values, &cdf, bounds[c])
            })
            .collect()
    };
    Ok(dirf
        .draws
        .par_iter()
        .map(|d| {
            let base = shares(&d.baseline);
            (0..dirf.horizons.len())
                .map(|hi| {
                    let shocked = d.shocked(hi);
                    shares(&shocked)
                        .iter()
                        .zip(&base)
                        .map(|(a, b)| a - b)
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Gini coefficient of a density on a non-negative support.
///
/// `G = 1 - 2 int_0^1 L(u) du` with the Lorenz curve
/// `L(u) = (1/mu) int_0^u Q(v) dv`, all by trapezoid quadrature on a fine
/// quantile grid.
pub fn gini(p: &DensityCurve) -> Result<f64> {
    gini_from_values(p.grid(), p.values(), p.support())
}

fn gini_from_values(grid: &[f64], values: &[f64], support: Support) -> Result<f64> {
    if support.lower < 0.0 {
        return Err(FvarError::Data(
            "Gini needs a non-negative support".to_string(),
        ));
    }
    let mut cdf = cum_trapezoid(grid, values);
    let total = *cdf.last().expect("nonempty cdf");
    if !(total.is_finite() && total > 0.0) {
        return Err(FvarError::ZeroMeanDensity);
    }
    for v in &mut cdf {
        *v /= total;
    }
    let n_q = 2049;
    let u = linspace(0.0, 1.0, n_q);
    let quantile_fn = MonotoneInterp::new(&cdf, grid);
    let q: Vec<f64> = u.iter().map(|&v| quantile_fn.eval(v)).collect();
    let mu = trapezoid(&u, &q);
    if !(mu.is_finite() && mu > 0.0) {
        return Err(FvarError::ZeroMeanDensity);
    }
    let lorenz: Vec<f64> = cum_trapezoid(&u, &q).iter().map(|v| v / mu).collect();
    Ok(1.0 - 2.0 * trapezoid(&u, &lorenz))
}

/// Per-draw horizon paths of the Gini response.
///
/// Level differences `G_h - G_ss` by default; set `percent` for
/// `100 (G_h / G_ss - 1)`.
pub fn gini_response(dirf: &DistributionalIrf, percent: bool) -> Result<Vec<Vec<f64>>> {
    dirf.draws
        .par_iter()
        .map(|d| {
            let g_ss = gini_from_values(&dirf.grid, &d.baseline, dirf.support)?;
            (0..dirf.horizons.len())
                .map(|hi| {
                    let shocked = d.shocked(hi);
                    let g_h = gini_from_values(&dirf.grid, &shocked, dirf.support)?;
                    Ok(if percent {
                        100.0 * (g_h / g_ss - 1.0)
                    } else {
                        g_h - g_ss
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpca::{CurveSpace, FpcaModel};
    use crate::instrument;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, Gamma};

    fn toy_model(k: usize, n_grid01: usize, sup: f64) -> FpcaModel {
        // linear-in-x basis columns, orthogonalized is unnecessary for these tests
        let grid = linspace(0.0, 1.0, n_grid01);
        let basis = DMatrix::from_fn(n_grid01, k, |i, c| {
            let x = grid[i];
            match c {
                0 => x - 0.5,
                1 => (x - 0.5) * (x - 0.5) - 1.0 / 12.0,
                _ => (std::f64::consts::PI * (c as f64 + 1.0) * x).sin(),
            }
        });
        FpcaModel::from_parts(
            CurveSpace::Lqd { support_sup: sup },
            grid,
            vec![0.0; n_grid01],
            basis,
        )
        .unwrap()
    }

    fn stationary_draw(k: usize, rho: f64, cross: f64) -> PosteriorDraw {
        let n = k + 1;
        let mut pi = DMatrix::zeros(n, 1 + n);
        for i in 0..n {
            pi[(i, 0)] = 0.0;
            pi[(i, 1 + i)] = rho;
        }
        let mut omega = DMatrix::identity(n, n) * 0.04;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    omega[(i, j)] = cross;
                }
            }
        }
        PosteriorDraw::from_parameters(pi, omega).unwrap()
    }

    #[test]
    fn zero_size_shock_gives_identically_zero_deltas() {
        let model = toy_model(2, 400, 6.0);
        let draw = stationary_draw(2, 0.5, 0.01);
        let cfg = FirfConfig {
            shock: 0,
            size_sd: 0.0,
            horizons: vec![0, 2, 5],
            support: Support::new(0.0, 6.0).unwrap(),
            n_grid: 400,
        };
        let dirf = functional_irf(
            &[draw],
            &model,
            ScoreBlock { offset: 1, len: 2 },
            &cfg,
        )
        .unwrap();
        for deltas in &dirf.draws[0].deltas {
            assert!(deltas.iter().all(|d| *d == 0.0));
        }
    }

    #[test]
    fn constant_basis_yields_uniform_before_and_after() {
        // theta absorbs constant shifts of the curve, so a constant basis
        // reconstructs the same uniform at every horizon
        let n_grid01 = 300;
        let grid = linspace(0.0, 1.0, n_grid01);
        let basis = DMatrix::from_element(n_grid01, 1, 0.7);
        let model = FpcaModel::from_parts(
            CurveSpace::Lqd { support_sup: 6.0 },
            grid,
            vec![0.0; n_grid01],
            basis,
        )
        .unwrap();
        let draw = stationary_draw(1, 0.4, 0.015);
        let cfg = FirfConfig {
            shock: 0,
            size_sd: 2.0,
            horizons: vec![0, 3],
            support: Support::new(0.0, 6.0).unwrap(),
            n_grid: 300,
        };
        let dirf = functional_irf(&[draw], &model, ScoreBlock { offset: 1, len: 1 }, &cfg).unwrap();
        for v in &dirf.draws[0].baseline {
            assert_relative_eq!(*v, 1.0 / 6.0, epsilon = 1e-9);
        }
        for deltas in &dirf.draws[0].deltas {
            for d in deltas {
                assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_basis_matches_closed_form_densities() {
        // with f(x) = a (x - 1/2), Q' = e^{f}, the density is analytic:
        // p(xi) = total / (U w(z(xi))) on [0, U]
        let n_grid01 = 2000;
        let model = toy_model(1, n_grid01, 6.0);
        let draw = stationary_draw(1, 0.0, 0.01);
        let cfg = FirfConfig {
            shock: 1,
            size_sd: 1.0,
            horizons: vec![0],
            support: Support::new(0.0, 6.0).unwrap(),
            n_grid: 1000,
        };
        let block = ScoreBlock { offset: 1, len: 1 };
        let dirf = functional_irf(&[draw.clone()], &model, block, &cfg).unwrap();
        // alpha_ss = 0, impact = a0_inv[1,1] (second Cholesky column)
        let a = draw.a0_inv[(1, 1)];
        let analytic = |alpha: f64, xi: f64| -> f64 {
            if alpha.abs() < 1e-14 {
                return 1.0 / 6.0;
            }
            // Q(z) = 6 (e^{alpha(z-1/2)} - e^{-alpha/2}) / (e^{alpha/2} - e^{-alpha/2})
            let denom = (alpha / 2.0).exp() - (-alpha / 2.0).exp();
            let z = (xi / 6.0 * denom + (-alpha / 2.0).exp()).ln() / alpha + 0.5;
            denom / (6.0 * alpha * (alpha * (z - 0.5)).exp())
        };
        let base = &dirf.draws[0].baseline;
        let delta = &dirf.draws[0].deltas[0];
        // endpoints use first-order one-sided stencils; check the interior
        for (j, &xi) in dirf.grid.iter().enumerate().skip(1).step_by(37) {
            assert_relative_eq!(base[j], 1.0 / 6.0, epsilon = 1e-9);
            let expected = analytic(a, xi) - 1.0 / 6.0;
            assert_relative_eq!(delta[j], expected, epsilon = 5e-6);
        }
    }

    #[test]
    fn reconstructed_densities_satisfy_constraints_without_renormalizing() {
        let model = toy_model(3, 500, 6.0);
        let mut draws = Vec::new();
        for i in 0..20 {
            draws.push(stationary_draw(3, 0.3 + 0.02 * i as f64, 0.01));
        }
        let cfg = FirfConfig {
            shock: 0,
            size_sd: 1.0,
            horizons: vec![0, 1, 4, 8],
            support: Support::new(0.0, 6.0).unwrap(),
            n_grid: 500,
        };
        instrument::reset_renormalization_count();
        let dirf = functional_irf(&draws, &model, ScoreBlock { offset: 1, len: 3 }, &cfg).unwrap();
        assert_eq!(instrument::renormalization_count(), 0);
        assert_eq!(dirf.dropped_draws, 0);
        let grid = &dirf.grid;
        for d in &dirf.draws {
            for hi in 0..dirf.horizons.len() {
                let shocked = d.shocked(hi);
                assert!(shocked.iter().all(|v| *v >= 0.0));
                assert_relative_eq!(trapezoid(grid, &shocked), 1.0, epsilon = 1e-6);
                let delta_mass = trapezoid(grid, &d.deltas[hi]);
                assert!(delta_mass.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn explosive_draws_are_dropped_and_counted() {
        let model = toy_model(1, 200, 6.0);
        let good = stationary_draw(1, 0.5, 0.01);
        let mut bad = stationary_draw(1, 0.5, 0.01);
        bad.pi[(0, 1)] = 1.02;
        let cfg = FirfConfig {
            shock: 0,
            size_sd: 1.0,
            horizons: vec![0],
            support: Support::new(0.0, 6.0).unwrap(),
            n_grid: 200,
        };
        let dirf = functional_irf(
            &[good, bad],
            &model,
            ScoreBlock { offset: 1, len: 1 },
            &cfg,
        )
        .unwrap();
        assert_eq!(dirf.draws.len(), 1);
        assert_eq!(dirf.dropped_draws, 1);
    }

    fn hand_built_dirf() -> DistributionalIrf {
        // uniform baseline on [0,6]; delta moves mass from [0,1.5] to [1.5,3]
        let n = 601;
        let support = Support::new(0.0, 6.0).unwrap();
        let grid = linspace(0.0, 6.0, n);
        let baseline = vec![1.0 / 6.0; n];
        let bump = |x: f64, lo: f64, hi: f64| -> f64 {
            if x > lo && x < hi {
                let t = (x - lo) / (hi - lo);
                (std::f64::consts::PI * t).sin().powi(2)
            } else {
                0.0
            }
        };
        let scale = 0.02;
        let delta: Vec<f64> = grid
            .iter()
            .map(|&x| scale * (bump(x, 1.5, 3.0) - bump(x, 0.0, 1.5)))
            .collect();
        DistributionalIrf {
            horizons: vec![0],
            grid,
            support,
            draws: vec![DrawIrf {
                baseline,
                deltas: vec![delta],
            }],
            dropped_draws: 0,
            point_estimate: None,
            method: IrfMethod::Fsvar,
        }
    }

    #[test]
    fn class_share_changes_sum_to_zero_and_localize() {
        let dirf = hand_built_dirf();
        let resp = class_share_response(&dirf, 4).unwrap();
        let classes = &resp[0][0];
        let total: f64 = classes.iter().sum();
        assert!(total.abs() < 1e-8);
        // mass moved from class 0 to class 1; upper half untouched
        assert!(classes[0] < -1e-4);
        assert!(classes[1] > 1e-4);
        assert!(classes[2].abs() < 1e-10);
        assert!(classes[3].abs() < 1e-10);
        assert_relative_eq!(classes[0] + classes[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn location_shift_moves_every_quantile_by_the_shift() {
        // uniform on [1,4] inside [0,6]; the shocked density is the same
        // uniform moved right by 0.5
        let n = 1201;
        let support = Support::new(0.0, 6.0).unwrap();
        let grid = linspace(0.0, 6.0, n);
        let boxcar = |lo: f64, hi: f64| -> Vec<f64> {
            grid.iter()
                .map(|&x| {
                    if x >= lo && x <= hi {
                        1.0 / (hi - lo)
                    } else {
                        1e-9
                    }
                })
                .collect()
        };
        let baseline = boxcar(1.0, 4.0);
        let shifted = boxcar(1.5, 4.5);
        let delta: Vec<f64> = shifted
            .iter()
            .zip(&baseline)
            .map(|(a, b)| a - b)
            .collect();
        let dirf = DistributionalIrf {
            horizons: vec![0],
            grid: grid.clone(),
            support,
            draws: vec![DrawIrf {
                baseline: baseline.clone(),
                deltas: vec![delta],
            }],
            dropped_draws: 0,
            point_estimate: None,
            method: IrfMethod::Fsvar,
        };
        for q in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let resp = quantile_response(&dirf, q).unwrap();
            let q_ss = grid_quantile(&grid, &baseline, q);
            let implied_shift = resp[0][0] / 100.0 * q_ss;
            assert_relative_eq!(implied_shift, 0.5, epsilon = 2e-2);
        }
        // zero shock path
        let zero = DistributionalIrf {
            horizons: vec![0],
            grid: grid.clone(),
            support,
            draws: vec![DrawIrf {
                baseline,
                deltas: vec![vec![0.0; n]],
            }],
            dropped_draws: 0,
            point_estimate: None,
            method: IrfMethod::Fsvar,
        };
        let resp = quantile_response(&zero, 0.5).unwrap();
        assert_eq!(resp[0][0], 0.0);
    }

    #[test]
    fn quantiles_never_cross_across_draws_and_horizons() {
        let model = toy_model(2, 400, 6.0);
        let draws: Vec<PosteriorDraw> = (0..10)
            .map(|i| stationary_draw(2, 0.35 + 0.03 * i as f64, 0.012))
            .collect();
        let cfg = FirfConfig {
            shock: 0,
            size_sd: 2.0,
            horizons: vec![0, 2, 6],
            support: Support::new(0.0, 6.0).unwrap(),
            n_grid: 400,
        };
        let dirf = functional_irf(&draws, &model, ScoreBlock { offset: 1, len: 2 }, &cfg).unwrap();
        for d in &dirf.draws {
            for hi in 0..dirf.horizons.len() {
                let shocked = d.shocked(hi);
                let mut last = f64::NEG_INFINITY;
                for q in [0.05, 0.25, 0.5, 0.75, 0.95] {
                    let v = grid_quantile(&dirf.grid, &shocked, q);
                    assert!(v >= last, "quantile crossing at q = {q}");
                    last = v;
                }
            }
        }
    }

    #[test]
    fn bands_nest_pointwise() {
        let model = toy_model(2, 300, 6.0);
        let draws: Vec<PosteriorDraw> = (0..30)
            .map(|i| stationary_draw(2, 0.3 + 0.01 * i as f64, 0.013))
            .collect();
        let cfg = FirfConfig {
            shock: 1,
            size_sd: 1.0,
            horizons: vec![0, 4],
            support: Support::new(0.0, 6.0).unwrap(),
            n_grid: 300,
        };
        let dirf = functional_irf(&draws, &model, ScoreBlock { offset: 1, len: 2 }, &cfg).unwrap();
        for hi in 0..2 {
            let (lo68, hi68) = dirf.band(hi, 0.68).unwrap();
            let (lo90, hi90) = dirf.band(hi, 0.90).unwrap();
            let med = dirf.median_delta(hi);
            for j in 0..dirf.grid.len() {
                assert!(lo90[j] <= lo68[j] + 1e-15);
                assert!(hi68[j] <= hi90[j] + 1e-15);
                assert!(lo68[j] <= med[j] + 1e-15 && med[j] <= hi68[j] + 1e-15);
            }
        }
    }

    #[test]
    fn gini_of_uniform_is_one_third() {
        for c in [1.0, 5.0] {
            let support = Support::new(0.0, c).unwrap();
            let grid = linspace(0.0, c, 1000);
            let p = DensityCurve::new(support, grid, vec![1.0 / c; 1000]).unwrap();
            let g = gini(&p).unwrap();
            assert!((g - 1.0 / 3.0).abs() < 1e-3, "Gini {g} for c = {c}");
        }
    }

    #[test]
    fn gini_of_a_spike_vanishes() {
        let support = Support::new(0.0, 6.0).unwrap();
        let grid = linspace(0.0, 6.0, 2000);
        let vals: Vec<f64> = grid
            .iter()
            .map(|&x| (-(x - 3.0) * (x - 3.0) / (2.0 * 0.01 * 0.01)).exp())
            .collect();
        let p = DensityCurve::from_unnormalized(support, grid, vals).unwrap();
        let g = gini(&p).unwrap();
        assert!(g.abs() < 5e-3, "Gini of a near-degenerate spike was {g}");
    }

    #[test]
    fn gini_is_scale_invariant() {
        let support = Support::new(0.0, 6.0).unwrap();
        let grid = linspace(0.0, 6.0, 1500);
        let vals: Vec<f64> = grid.iter().map(|&x| x * (-x).exp() + 1e-6).collect();
        let p = DensityCurve::from_unnormalized(support, grid.clone(), vals.clone()).unwrap();
        let doubled = Support::new(0.0, 12.0).unwrap();
        let grid2: Vec<f64> = grid.iter().map(|x| 2.0 * x).collect();
        let vals2: Vec<f64> = vals.iter().map(|v| v / 2.0).collect();
        let p2 = DensityCurve::from_unnormalized(doubled, grid2, vals2).unwrap();
        assert!((gini(&p).unwrap() - gini(&p2).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn gini_matches_sampled_oracle_on_truncated_gamma() {
        let support = Support::new(0.0, 6.0).unwrap();
        let grid = linspace(0.0, 6.0, 2000);
        let vals: Vec<f64> = grid.iter().map(|&x| x * (-x).exp()).collect();
        let p = DensityCurve::from_unnormalized(support, grid, vals).unwrap();
        let g = gini(&p).unwrap();
        // empirical Gini of rejection-sampled draws from the same law
        let gamma = Gamma::new(2.0, 1.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(314159);
        let n = 1_000_000usize;
        let mut draws = Vec::with_capacity(n);
        while draws.len() < n {
            let v: f64 = gamma.sample(&mut rng);
            if v <= 6.0 {
                draws.push(v);
            }
        }
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = draws.iter().sum::<f64>() / n as f64;
        let mut weighted = 0.0;
        for (i, v) in draws.iter().enumerate() {
            weighted += (2.0 * (i + 1) as f64 - n as f64 - 1.0) * v;
        }
        let empirical = weighted / (n as f64 * n as f64 * mean);
        assert!(
            (g - empirical).abs() < 1e-3,
            "Gini {g} vs sampled {empirical}"
        );
    }

    #[test]
    fn gini_error_paths() {
        let support = Support::new(0.0, 1.0).unwrap();
        let grid = linspace(0.0, 1.0, 100);
        let p = DensityCurve::new(support, grid, vec![1.0; 100]).unwrap();
        assert!(gini(&p).is_ok());
        let dirf = hand_built_dirf();
        let resp = gini_response(&dirf, false).unwrap();
        // moving mass toward the middle reduces inequality of the uniform
        assert!(resp[0][0] < 0.0);
        let pct = gini_response(&dirf, true).unwrap();
        assert!(pct[0][0] < 0.0);
    }

    #[test]
    fn median_of_symmetric_draws_is_central() {
        let dirf = hand_built_dirf();
        let med = dirf.median_delta(0);
        assert_eq!(med, dirf.draws[0].deltas[0]);
        let base = dirf.median_baseline();
        assert_eq!(base, dirf.draws[0].baseline);
    }

    #[test]
    fn score_block_validation() {
        let model = toy_model(2, 200, 6.0);
        let draw = stationary_draw(2, 0.5, 0.01);
        let cfg = FirfConfig {
            shock: 0,
            size_sd: 1.0,
            horizons: vec![0],
            support: Support::new(0.0, 6.0).unwrap(),
            n_grid: 200,
        };
        assert!(functional_irf(&[draw.clone()], &model, ScoreBlock { offset: 2, len: 2 }, &cfg)
            .is_err());
        assert!(functional_irf(&[draw], &model, ScoreBlock { offset: 0, len: 1 }, &cfg).is_err());
    }

    #[test]
    fn a_dvector_is_what_unconditional_mean_returns() {
        // pin the score-block slicing convention against bvar's output shape
        let draw = stationary_draw(2, 0.5, 0.01);
        let mu: DVector<f64> = unconditional_mean(&draw).unwrap();
        assert_eq!(mu.len(), 3);
    }
}
