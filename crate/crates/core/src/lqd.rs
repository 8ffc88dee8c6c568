//! Log quantile density transform and its inverse.
//!
//! The LQD of a density is the log of the derivative of its quantile
//! function. It is an unconstrained curve on [0,1]: any finite curve maps
//! back to a valid density. The inverse map builds the quantile function by
//! integrating `exp(f)`, rescales it so the quantile range matches the
//! support, inverts it into a cdf and differentiates. Because the cdf is
//! monotone and runs exactly from 0 to 1, the differentiated curve is
//! non-negative and its trapezoid integral telescopes to one — the inverse
//! never renormalizes.

use serde::{Deserialize, Serialize};

use crate::density::{DensityCurve, Support, DENSITY_FLOOR};
use crate::error::{FvarError, Result};
use crate::numerics::{central_diff, cum_trapezoid, linspace, MonotoneInterp};

/// Guard on the LQD magnitude before exponentiation.
pub const LQD_EXP_CAP: f64 = 700.0;

/// Log quantile density curve on [0,1].
///
/// `support_sup` keeps the upper bound of the support the curve was derived
/// from; the transform itself loses all location information.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LqdCurve {
    grid01: Vec<f64>,
    values: Vec<f64>,
    support_sup: f64,
}

impl LqdCurve {
    pub fn new(grid01: Vec<f64>, values: Vec<f64>, support_sup: f64) -> Result<Self> {
        if grid01.len() < 3 || grid01.len() != values.len() {
            return Err(FvarError::InvalidGrid {
                min: 3,
                got: grid01.len(),
            });
        }
        if grid01[0] != 0.0 || *grid01.last().unwrap() != 1.0 {
            return Err(FvarError::InvalidGrid {
                min: 3,
                got: grid01.len(),
            });
        }
        if !grid01.windows(2).all(|w| w[1] > w[0]) {
            return Err(FvarError::InvalidGrid {
                min: 3,
                got: grid01.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FvarError::NonFiniteCurve);
        }
        Ok(Self {
            grid01,
            values,
            support_sup,
        })
    }

    pub fn grid01(&self) -> &[f64] {
        &self.grid01
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_sup(&self) -> f64 {
        self.support_sup
    }
}

/// Forward LQD map: density -> log quantile density on a uniform [0,1] grid.
///
/// The cdf comes from cumulative trapezoid integration, the quantile function
/// from monotone inversion of the cdf, and the quantile derivative from
/// central finite differences (one-sided at the endpoints).
pub fn lqd_forward(p: &DensityCurve, n_grid01: usize) -> Result<LqdCurve> {
    if n_grid01 < 3 {
        return Err(FvarError::InvalidGrid {
            min: 3,
            got: n_grid01,
        });
    }
    let grid = p.grid();
    // floor before integrating so the cdf is strictly increasing and the
    // quantile derivative stays positive
    let floored: Vec<f64> = p.values().iter().map(|v| v.max(DENSITY_FLOOR)).collect();
    let mut cdf = cum_trapezoid(grid, &floored);
    let total = *cdf.last().unwrap();
    if !(total.is_finite() && total > 0.0) {
        return Err(FvarError::NonMonotoneCdf);
    }
    for v in &mut cdf {
        *v /= total;
    }
    if !cdf.windows(2).all(|w| w[1] > w[0]) {
        return Err(FvarError::NonMonotoneCdf);
    }
    let grid01 = linspace(0.0, 1.0, n_grid01);
    let quantile = MonotoneInterp::new(&cdf, grid);
    let mut q: Vec<f64> = grid01.iter().map(|&z| quantile.eval(z)).collect();
    q[0] = grid[0];
    q[n_grid01 - 1] = grid[grid.len() - 1];
    let qprime = central_diff(&grid01, &q);
    let values: Vec<f64> = qprime.iter().map(|d| d.ln()).collect();
    LqdCurve::new(grid01, values, p.support().upper)
}

/// Inverse LQD map: curve on [0,1] plus a target support -> density.
///
/// The quantile function is `Q(x) = L + theta * int_0^x exp(f)`, with `theta`
/// chosen so that `Q(1) = U`; for `L = 0` this is the usual normalization by
/// the supremum of the support. The output cdf runs exactly from 0 to 1, so
/// the differentiated density integrates to one with no correction step.
pub fn lqd_inverse(f: &LqdCurve, support: Support, n_grid: usize) -> Result<DensityCurve> {
    if n_grid < 3 {
        return Err(FvarError::InvalidGrid {
            min: 3,
            got: n_grid,
        });
    }
    let vals = f.values();
    let max_abs = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !max_abs.is_finite() {
        return Err(FvarError::NonFiniteCurve);
    }
    if max_abs > LQD_EXP_CAP {
        return Err(FvarError::LqdOverflow(max_abs));
    }
    // exponentiate relative to the max; the scale cancels in theta
    let peak = vals.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let w: Vec<f64> = vals.iter().map(|v| (v - peak).exp()).collect();
    let grid01 = f.grid01();
    let cum = cum_trapezoid(grid01, &w);
    let total = *cum.last().unwrap();
    if !(total.is_finite() && total > 0.0) {
        return Err(FvarError::NonFiniteCurve);
    }
    let width = support.width();
    let mut q: Vec<f64> = cum
        .iter()
        .map(|c| support.lower + width * (c / total))
        .collect();
    q[0] = support.lower;
    *q.last_mut().unwrap() = support.upper;

    let grid = linspace(support.lower, support.upper, n_grid);
    let mut cdf = invert_trapezoid_quantile(&q, grid01, &w, total, width, &grid);
    cdf[0] = 0.0;
    cdf[n_grid - 1] = 1.0;
    let mut pdf = central_diff(&grid, &cdf);
    for v in &mut pdf {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    DensityCurve::new(support, grid, pdf)
}

/// Invert the cumulative-trapezoid quantile table at sorted queries.
///
/// Between knots the integrand `w` is linear under the trapezoid rule, so the
/// quantile function is piecewise quadratic; solving that quadratic per
/// segment gives a C1 cdf instead of the staircase a piecewise-linear
/// inversion would produce. Cell boundaries map back exactly, so the result
/// is monotone and pins the endpoints.
fn invert_trapezoid_quantile(
    q: &[f64],
    grid01: &[f64],
    w: &[f64],
    total: f64,
    width: f64,
    queries: &[f64],
) -> Vec<f64> {
    let n = q.len();
    let mut out = Vec::with_capacity(queries.len());
    let mut j = 0usize;
    for &xi in queries {
        if xi <= q[0] {
            out.push(grid01[0]);
            continue;
        }
        if xi >= q[n - 1] {
            out.push(grid01[n - 1]);
            continue;
        }
        while q[j + 1] < xi {
            j += 1;
        }
        let dz = grid01[j + 1] - grid01[j];
        // mass target within the cell, in units of the integrand
        let m = (xi - q[j]) * total / width;
        let a = 0.5 * (w[j + 1] - w[j]) / dz;
        let b = w[j];
        let s = if m <= 0.0 {
            0.0
        } else {
            let denom = b + (b * b + 4.0 * a * m).max(0.0).sqrt();
            if denom > 0.0 {
                2.0 * m / denom
            } else {
                // zero-mass cell under extreme underflow; split it linearly
                dz * (xi - q[j]) / (q[j + 1] - q[j])
            }
        };
        out.push(grid01[j] + s.clamp(0.0, dz));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::trapezoid;
    use approx::assert_relative_eq;

    fn density_from_shape(
        support: Support,
        n: usize,
        shape: impl Fn(f64) -> f64,
    ) -> DensityCurve {
        let grid = linspace(support.lower, support.upper, n);
        let vals: Vec<f64> = grid.iter().map(|&x| shape(x)).collect();
        DensityCurve::from_unnormalized(support, grid, vals).unwrap()
    }

    fn mise(a: &DensityCurve, b: &DensityCurve) -> f64 {
        let diff: Vec<f64> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y) * (x - y))
            .collect();
        trapezoid(a.grid(), &diff)
    }

    #[test]
    fn uniform_on_unit_interval_maps_to_zero_lqd() {
        let support = Support::new(0.0, 1.0).unwrap();
        let p = density_from_shape(support, 1000, |_| 1.0);
        let f = lqd_forward(&p, 1000).unwrap();
        for v in f.values() {
            assert!(v.abs() < 1e-9, "LQD of Uniform[0,1] should vanish, got {v}");
        }
        assert_eq!(f.support_sup(), 1.0);
    }

    #[test]
    fn uniform_on_scaled_interval_maps_to_log_c() {
        let c = 5.0;
        let support = Support::new(0.0, c).unwrap();
        let p = density_from_shape(support, 1000, |_| 1.0 / c);
        let f = lqd_forward(&p, 1000).unwrap();
        for v in f.values() {
            assert_relative_eq!(*v, c.ln(), epsilon = 1e-9);
        }
    }

    #[test]
    fn constant_lqd_inverts_to_uniform() {
        let support = Support::new(0.0, 5.0).unwrap();
        let grid01 = linspace(0.0, 1.0, 1000);
        let f = LqdCurve::new(grid01.clone(), vec![0.0; 1000], 5.0).unwrap();
        let p = lqd_inverse(&f, support, 1000).unwrap();
        for v in p.values() {
            assert_relative_eq!(*v, 0.2, epsilon = 1e-10);
        }
        // theta absorbs any additive constant
        let g = LqdCurve::new(grid01, vec![5f64.ln(); 1000], 5.0).unwrap();
        let p2 = lqd_inverse(&g, support, 1000).unwrap();
        for (a, b) in p.values().iter().zip(p2.values()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn additive_constants_cancel_in_the_inverse() {
        let support = Support::new(0.0, 6.0).unwrap();
        let p = density_from_shape(support, 900, |x| (x * (6.0 - x)).max(0.0) + 0.05);
        let f = lqd_forward(&p, 900).unwrap();
        let shifted = LqdCurve::new(
            f.grid01().to_vec(),
            f.values().iter().map(|v| v + 3.25).collect(),
            f.support_sup(),
        )
        .unwrap();
        let a = lqd_inverse(&f, support, 900).unwrap();
        let b = lqd_inverse(&shifted, support, 900).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_relative_eq!(*x, *y, epsilon = 1e-11, max_relative = 1e-11);
        }
    }

    #[test]
    fn censored_gamma_lqd_is_finite_and_rises_near_one() {
        // Gamma(2,1) censored to [0,5]
        let support = Support::new(0.0, 5.0).unwrap();
        let p = density_from_shape(support, 1000, |x| x * (-x).exp());
        let f = lqd_forward(&p, 1000).unwrap();
        let vals = f.values();
        assert!(vals.iter().all(|v| v.is_finite()));
        // dips in the body where the density is high, rises steeply toward 1
        let near_end = vals[vals.len() - 2];
        let mid = vals[vals.len() / 2];
        assert!(near_end > mid + 0.5, "LQD should rise near x = 1");
        let interior_min = vals[3..vals.len() - 3]
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(*v));
        assert!(interior_min < vals[0]);
        assert!(interior_min < near_end);
    }

    #[test]
    fn round_trip_recovers_smooth_densities() {
        let support = Support::new(0.0, 6.0).unwrap();
        // positive on the whole support: the round trip is near machine-level
        let smooth: Vec<Box<dyn Fn(f64) -> f64>> = vec![
            Box::new(|x: f64| (-(x - 2.5) * (x - 2.5) / 0.8).exp() + 0.02),
            Box::new(|x: f64| (-(x - 1.5) * (x - 1.5)).exp() + 0.5 * (-(x - 4.0) * (x - 4.0) / 0.5).exp() + 0.03),
            Box::new(|x: f64| (-0.4 * x).exp()),
        ];
        for shape in smooth {
            let p = density_from_shape(support, 1000, shape);
            let f = lqd_forward(&p, 1000).unwrap();
            let back = lqd_inverse(&f, support, 1000).unwrap();
            assert!(mise(&back, &p) < 1e-6);
            assert_relative_eq!(back.integral(), 1.0, epsilon = 1e-10);
            assert!(back.values().iter().all(|v| *v >= 0.0));
        }
        // vanishing at a boundary: quantile resolution caps the accuracy,
        // which still clears the pipeline-wide bound
        let vanishing: Vec<Box<dyn Fn(f64) -> f64>> = vec![
            Box::new(|x: f64| (x / 6.0).powf(1.5) * (1.0 - x / 6.0).powf(2.0)),
            Box::new(|x: f64| (x / 6.0) * (1.0 - x / 6.0)),
            Box::new(|x: f64| x * (-x).exp()),
        ];
        for shape in vanishing {
            let p = density_from_shape(support, 1000, shape);
            let f = lqd_forward(&p, 1000).unwrap();
            let back = lqd_inverse(&f, support, 1000).unwrap();
            assert!(mise(&back, &p) < 1e-5);
        }
    }

    #[test]
    fn reconstruction_places_shape_on_the_requested_support() {
        // the transform forgets location; the inverse puts it where asked
        let src = Support::new(0.0, 6.0).unwrap();
        let dst = Support::new(1.0, 7.0).unwrap();
        let p = density_from_shape(src, 800, |x| (-(x - 2.0) * (x - 2.0)).exp() + 0.01);
        let f = lqd_forward(&p, 800).unwrap();
        let moved = lqd_inverse(&f, dst, 800).unwrap();
        let diff: Vec<f64> = p
            .values()
            .iter()
            .zip(moved.values())
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        assert!(trapezoid(moved.grid(), &diff) < 1e-5);
        for (a, b) in p.values().iter().zip(moved.values()) {
            assert!((a - b).abs() < 5e-3);
        }
        assert_eq!(moved.grid()[0], 1.0);
    }

    #[test]
    fn overflow_is_reported_with_the_offending_value() {
        let grid01 = linspace(0.0, 1.0, 100);
        let mut vals = vec![0.0; 100];
        vals[50] = 701.0;
        let f = LqdCurve::new(grid01, vals, 6.0).unwrap();
        let err = lqd_inverse(&f, Support::new(0.0, 6.0).unwrap(), 100);
        match err {
            Err(FvarError::LqdOverflow(v)) => assert_relative_eq!(v, 701.0),
            other => panic!("expected overflow error, got {other:?}"),
        }
    }

    #[test]
    fn forward_rejects_corrupted_curves() {
        let support = Support::new(0.0, 1.0).unwrap();
        let grid = linspace(0.0, 1.0, 100);
        let vals = vec![1.0; 100];
        let p = DensityCurve::new(support, grid, vals).unwrap();
        assert!(lqd_forward(&p, 2).is_err());
    }
}
