//! Functional local projections.
//!
//! Per horizon `h`, the component scores at `t+h` are regressed jointly on an
//! intercept, the variables ordered before the impulse variable (their
//! contemporaneous values), the impulse variable itself, and `p` lags of the
//! whole system. Under recursive timing identification the impulse
//! coefficient block estimates the score response to the identified shock.
//! Inference uses a Bartlett-kernel HAC covariance of the stacked moment
//! vector, which captures both the serial correlation of multi-step
//! projection residuals and the correlation across score equations; a
//! per-equation variant without the cross-equation terms is also available.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::density::Support;
use crate::error::{FvarError, Result};
use crate::firf::{DistributionalIrf, DrawIrf, IrfMethod, ScoreBlock};
use crate::fpca::FpcaModel;
use crate::lqd::{lqd_inverse, LqdCurve};
use crate::numerics::linspace;

/// System data for local projections: series, impulse position, score block.
#[derive(Debug, Clone)]
pub struct FlpData {
    names: Vec<String>,
    z: DMatrix<f64>,
    impulse: usize,
    score_block: ScoreBlock,
}

impl FlpData {
    pub fn new(
        names: Vec<String>,
        z: DMatrix<f64>,
        impulse: usize,
        score_block: ScoreBlock,
    ) -> Result<Self> {
        let n = z.ncols();
        if names.len() != n {
            return Err(FvarError::DimensionMismatch(format!(
                "{} names for {} series",
                names.len(),
                n
            )));
        }
        if impulse >= n || score_block.offset + score_block.len > n || score_block.len == 0 {
            return Err(FvarError::DimensionMismatch(
                "impulse or score block out of range".to_string(),
            ));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(FvarError::Data("series contain non-finite values".to_string()));
        }
        Ok(Self {
            names,
            z,
            impulse,
            score_block,
        })
    }

    pub fn n(&self) -> usize {
        self.z.ncols()
    }

    pub fn t(&self) -> usize {
        self.z.nrows()
    }

    pub fn impulse(&self) -> usize {
        self.impulse
    }

    pub fn score_block(&self) -> ScoreBlock {
        self.score_block
    }

    fn regressor_names(&self, p: usize) -> Vec<String> {
        let mut out = vec!["const".to_string()];
        for j in 0..self.impulse {
            out.push(self.names[j].clone());
        }
        out.push(self.names[self.impulse].clone());
        for l in 1..=p {
            for j in 0..self.n() {
                out.push(format!("lag{l}:{}", self.names[j]));
            }
        }
        out
    }
}

/// Default Bartlett lag truncation, `floor(1.3 sqrt(T))`.
pub fn default_lag_truncation(t: usize) -> usize {
    (1.3 * (t as f64).sqrt()).floor() as usize
}

/// HAC covariance flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HacKind {
    /// Joint covariance of all score equations, robust to serial and
    /// cross-equation correlation. The default.
    DriscollKraay,
    /// Per-equation HAC with cross-equation blocks set to zero.
    NeweyWest,
}

/// One fitted projection horizon.
#[derive(Debug, Clone)]
pub struct FlpFit {
    pub horizon: usize,
    pub p: usize,
    /// `m x K` coefficient matrix, one column per score equation.
    pub coef: DMatrix<f64>,
    /// Impulse coefficients across score equations: the score IRF at this
    /// horizon per unit impulse-variable innovation.
    pub beta_impulse: Vec<f64>,
    residuals: DMatrix<f64>,
    x: DMatrix<f64>,
    xtx_inv: DMatrix<f64>,
    impulse_col: usize,
}

impl FlpFit {
    pub fn t_used(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_regressors(&self) -> usize {
        self.x.ncols()
    }

    pub fn residuals(&self) -> &DMatrix<f64> {
        &self.residuals
    }

    pub fn k(&self) -> usize {
        self.coef.ncols()
    }

    /// Extract the impulse-coefficient block of a stacked covariance matrix.
    pub fn impulse_cov(&self, cov: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.n_regressors();
        let k = self.k();
        DMatrix::from_fn(k, k, |a, b| {
            cov[(a * m + self.impulse_col, b * m + self.impulse_col)]
        })
    }
}

fn build_design(
    data: &FlpData,
    p: usize,
    h: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let t = data.t();
    let n = data.n();
    let k = data.score_block.len;
    let m = 2 + data.impulse + p * n;
    if t < p + h + 1 {
        return Err(FvarError::NotEnoughObservations {
            need: p + h + 1,
            have: t,
        });
    }
    let rows = t - p - h;
    if rows < m {
        return Err(FvarError::NotEnoughObservations {
            need: m + p + h,
            have: t,
        });
    }
    let mut x = DMatrix::zeros(rows, m);
    let mut y = DMatrix::zeros(rows, k);
    for s in 0..rows {
        let time = p + s;
        x[(s, 0)] = 1.0;
        for j in 0..data.impulse {
            x[(s, 1 + j)] = data.z[(time, j)];
        }
        x[(s, 1 + data.impulse)] = data.z[(time, data.impulse)];
        for l in 1..=p {
            for j in 0..n {
                x[(s, 2 + data.impulse + (l - 1) * n + j)] = data.z[(time - l, j)];
            }
        }
        for kk in 0..k {
            y[(s, kk)] = data.z[(time + h, data.score_block.offset + kk)];
        }
    }
    Ok((x, y))
}

/// Name the columns that a rank-deficient design cannot separate.
fn collinear_columns(x: &DMatrix<f64>, names: &[String]) -> String {
    let m = x.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..m {
        let mut col = x.column(j).into_owned();
        let orig = col.norm().max(1e-300);
        for b in &basis {
            let proj = b.dot(&col);
            col -= b * proj;
        }
        if col.norm() / orig < 1e-10 {
            bad.push(names.get(j).cloned().unwrap_or_else(|| format!("col{j}")));
        } else {
            let norm = col.norm();
            basis.push(col / norm);
        }
    }
    bad.join(", ")
}

/// Least-squares fit of all score equations at one horizon.
pub fn flp_fit(data: &FlpData, p: usize, h: usize) -> Result<FlpFit> {
    if p == 0 {
        return Err(FvarError::Data("lag order must be at least 1".to_string()));
    }
    let (x, y) = build_design(data, p, h)?;
    let xtx = x.transpose() * &x;
    let chol = match Cholesky::new(xtx.clone()) {
        Some(c) => c,
        None => {
            return Err(FvarError::RankDeficient(collinear_columns(
                &x,
                &data.regressor_names(p),
            )))
        }
    };
    let coef = chol.solve(&(x.transpose() * &y));
    let residuals = &y - &x * &coef;
    let xtx_inv = chol.inverse();
    let impulse_col = 1 + data.impulse;
    let beta_impulse: Vec<f64> = (0..coef.ncols())
        .map(|kk| coef[(impulse_col, kk)])
        .collect();
    Ok(FlpFit {
        horizon: h,
        p,
        coef,
        beta_impulse,
        residuals,
        x,
        xtx_inv,
        impulse_col,
    })
}

/// Bartlett-kernel HAC covariance of the stacked coefficient vector.
///
/// The moment vector at time `t` stacks `e_t (x) x_t` across the score
/// equations. Lag `l` contributions enter with weight `1 - l/(q+1)`. The
/// result is `cov(vec(B))` with equations as the outer blocks.
pub fn hac_cov(fit: &FlpFit, lag_truncation: usize, kind: HacKind) -> Result<DMatrix<f64>> {
    let t = fit.t_used();
    let m = fit.n_regressors();
    let k = fit.k();
    if lag_truncation >= t {
        return Err(FvarError::BadLagTruncation {
            truncation: lag_truncation,
            t,
        });
    }
    let dim = k * m;
    // moment vectors g_t, stacked equation-major
    let mut g = DMatrix::zeros(t, dim);
    for s in 0..t {
        for kk in 0..k {
            let e = fit.residuals[(s, kk)];
            for r in 0..m {
                g[(s, kk * m + r)] = e * fit.x[(s, r)];
            }
        }
    }
    let cross_equation = matches!(kind, HacKind::DriscollKraay);
    let mut s_mat: DMatrix<f64> = DMatrix::zeros(dim, dim);
    for l in 0..=lag_truncation {
        let w = 1.0 - l as f64 / (lag_truncation as f64 + 1.0);
        let mut gamma: DMatrix<f64> = DMatrix::zeros(dim, dim);
        for s in l..t {
            let gt = g.row(s);
            let gl = g.row(s - l);
            for a in 0..dim {
                let ga = gt[a];
                if ga == 0.0 {
                    continue;
                }
                for b in 0..dim {
                    gamma[(a, b)] += ga * gl[b];
                }
            }
        }
        if !cross_equation {
            for a in 0..dim {
                for b in 0..dim {
                    if a / m != b / m {
                        gamma[(a, b)] = 0.0;
                    }
                }
            }
        }
        if l == 0 {
            s_mat += w * gamma;
        } else {
            s_mat += w * (&gamma + gamma.transpose());
        }
    }
    // sandwich blockwise: cov(block a,b) = xtx_inv S_ab xtx_inv
    let mut cov = DMatrix::zeros(dim, dim);
    for a in 0..k {
        for b in 0..k {
            let block = s_mat.view((a * m, b * m), (m, m)).into_owned();
            let sandwiched = &fit.xtx_inv * block * &fit.xtx_inv;
            for r in 0..m {
                for c in 0..m {
                    cov[(a * m + r, b * m + c)] = sandwiched[(r, c)];
                }
            }
        }
    }
    Ok(0.5 * (&cov + cov.transpose()))
}

/// One-standard-deviation scale of the impulse-variable innovation.
///
/// Residual standard deviation of the impulse variable regressed on the
/// variables ordered before it and `p` lags of the system; this is the
/// recursive-identification counterpart of the Cholesky impact entry.
pub fn impulse_scale(data: &FlpData, p: usize) -> Result<f64> {
    let t = data.t();
    let n = data.n();
    let m = 1 + data.impulse + p * n;
    let rows = t.checked_sub(p).unwrap_or(0);
    if rows < m + 1 {
        return Err(FvarError::NotEnoughObservations {
            need: m + 1 + p,
            have: t,
        });
    }
    let mut x = DMatrix::zeros(rows, m);
    let mut y = DVector::zeros(rows);
    for s in 0..rows {
        let time = p + s;
        x[(s, 0)] = 1.0;
        for j in 0..data.impulse {
            x[(s, 1 + j)] = data.z[(time, j)];
        }
        for l in 1..=p {
            for j in 0..n {
                x[(s, 1 + data.impulse + (l - 1) * n + j)] = data.z[(time - l, j)];
            }
        }
        y[s] = data.z[(time, data.impulse)];
    }
    let xtx = x.transpose() * &x;
    let chol = Cholesky::new(xtx).ok_or_else(|| {
        FvarError::RankDeficient("impulse-scale regression design".to_string())
    })?;
    let beta = chol.solve(&(x.transpose() * &y));
    let resid = y - x * beta;
    let dof = (rows - m).max(1) as f64;
    Ok((resid.norm_squared() / dof).sqrt())
}

/// Map per-horizon projection fits into distributional responses.
///
/// The baseline is the density of the sample-mean curve. The point response
/// at each horizon reconstructs `mean + basis (beta scale)` and inverts it;
/// frequentist bands push Gaussian draws from the coefficient distribution
/// through the same nonlinear map.
#[allow(clippy::too_many_arguments)]
pub fn flp_functional_irf(
    fits: &[FlpFit],
    impulse_covs: &[DMatrix<f64>],
    model: &FpcaModel,
    support: Support,
    n_grid: usize,
    scale: f64,
    n_sims: usize,
    seed: u64,
) -> Result<DistributionalIrf> {
    if fits.is_empty() || fits.len() != impulse_covs.len() {
        return Err(FvarError::DimensionMismatch(
            "one covariance per fitted horizon is required".to_string(),
        ));
    }
    let k = model.k();
    for f in fits {
        if f.k() != k {
            return Err(FvarError::DimensionMismatch(format!(
                "fit has {} score equations, model K = {k}",
                f.k()
            )));
        }
    }
    let mean_curve = LqdCurve::new(
        model.grid().to_vec(),
        model.mean().to_vec(),
        match model.space() {
            crate::fpca::CurveSpace::Lqd { support_sup } => support_sup,
            _ => support.upper,
        },
    )?;
    let p_ss = lqd_inverse(&mean_curve, support, n_grid)?;
    let baseline = p_ss.values().to_vec();
    let delta_for = |beta: &[f64]| -> Result<Vec<f64>> {
        let scaled: Vec<f64> = beta.iter().map(|b| b * scale).collect();
        let f_h = model.reconstruct_lqd(&scaled)?;
        let p_h = lqd_inverse(&f_h, support, n_grid)?;
        Ok(p_h
            .values()
            .iter()
            .zip(&baseline)
            .map(|(a, b)| a - b)
            .collect())
    };
    let mut point = Vec::with_capacity(fits.len());
    for f in fits {
        point.push(delta_for(&f.beta_impulse)?);
    }
    // parametric simulation of the coefficient distribution per horizon
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut sims: Vec<DrawIrf> = (0..n_sims)
        .map(|_| DrawIrf {
            baseline: baseline.clone(),
            deltas: Vec::with_capacity(fits.len()),
        })
        .collect();
    for (f, cov) in fits.iter().zip(impulse_covs) {
        let factor = psd_factor(cov)?;
        for sim in sims.iter_mut() {
            let gauss = DVector::from_fn(k, |_, _| normal.sample(&mut rng));
            let noise = &factor * gauss;
            let beta: Vec<f64> = f
                .beta_impulse
                .iter()
                .zip(noise.iter())
                .map(|(b, n)| b + n)
                .collect();
            sim.deltas.push(delta_for(&beta)?);
        }
    }
    Ok(DistributionalIrf {
        horizons: fits.iter().map(|f| f.horizon).collect(),
        grid: linspace(support.lower, support.upper, n_grid),
        support,
        draws: sims,
        dropped_draws: 0,
        point_estimate: Some(point),
        method: IrfMethod::Flp,
    })
}

/// Cholesky-like factor of a positive semidefinite matrix, with a tiny ridge
/// escalation for exactly singular covariances (e.g. zero-residual fits).
fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = cov.nrows();
    let scale = cov.trace().abs().max(1e-300) / k as f64;
    let mut ridge = 0.0;
    for _ in 0..8 {
        let candidate = cov + DMatrix::identity(k, k) * ridge;
        if let Some(c) = Cholesky::new(candidate) {
            return Ok(c.l());
        }
        ridge = if ridge == 0.0 { scale * 1e-12 } else { ridge * 100.0 };
    }
    Err(FvarError::NotPositiveDefinite("impulse covariance"))
}
