//! Conjugate Bayesian VAR over macro aggregates and functional component
//! scores.
//!
//! The reduced form is `z_t = Pi x_t + u_t` with `x_t = [1, z_{t-1}', ...,
//! z_{t-p}']'`. The prior is Gaussian-Inverse-Wishart in the Minnesota
//! tradition; the posterior is available in closed form and sampled by direct
//! Monte Carlo: `Omega` from an inverse Wishart via the Bartlett
//! decomposition, then the coefficients from a matrix normal using two
//! Cholesky factors. Structural shocks are identified by the lower-triangular
//! Cholesky factor of `Omega`.
//!
//! Orientation: the paper-facing coefficient matrix `Pi` is `n x m`; the
//! prior/posterior means are stored transposed (`m x n`, one column per
//! equation) so every posterior formula is dimensionally exact as written.

use nalgebra::{Cholesky, DMatrix, DVector, LU};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{FvarError, Result};

/// Stacked VAR regression data.
#[derive(Debug, Clone)]
pub struct VarData {
    names: Vec<String>,
    z: DMatrix<f64>,
    p: usize,
    y: DMatrix<f64>,
    x: DMatrix<f64>,
}

impl VarData {
    /// Stack `Y` and `X` from a `T x n` series matrix and a lag order.
    ///
    /// Row `t` of `X` is `[1, z_{t-1}', ..., z_{t-p}']`.
    pub fn new(names: Vec<String>, z: DMatrix<f64>, p: usize) -> Result<Self> {
        let t = z.nrows();
        let n = z.ncols();
        if n == 0 || names.len() != n {
            return Err(FvarError::DimensionMismatch(format!(
                "{} names for {} series",
                names.len(),
                n
            )));
        }
        if p == 0 {
            return Err(FvarError::Data("lag order must be at least 1".to_string()));
        }
        if t < p {
            return Err(FvarError::NotEnoughObservations { need: p, have: t });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(FvarError::Data("series contain non-finite values".to_string()));
        }
        let t_eff = t - p;
        let m = n * p + 1;
        let mut y = DMatrix::zeros(t_eff, n);
        let mut x = DMatrix::zeros(t_eff, m);
        for s in 0..t_eff {
            let time = p + s;
            for j in 0..n {
                y[(s, j)] = z[(time, j)];
            }
            x[(s, 0)] = 1.0;
            for l in 1..=p {
                for j in 0..n {
                    x[(s, 1 + (l - 1) * n + j)] = z[(time - l, j)];
                }
            }
        }
        Ok(Self { names, z, p, y, x })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn series(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.z.ncols()
    }

    /// Number of regressors, `n p + 1`.
    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    /// Effective sample size after lag stacking.
    pub fn t_eff(&self) -> usize {
        self.y.nrows()
    }

    pub fn stacked_y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn stacked_x(&self) -> &DMatrix<f64> {
        &self.x
    }
}

/// Gaussian-Inverse-Wishart prior.
///
/// `psi` is the prior coefficient mean, stored `m x n`; `gamma_diag` the
/// diagonal of the coefficient prior variance factor; `nu` and `phi` the
/// inverse-Wishart degrees of freedom and scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NiwPrior {
    pub psi: DMatrix<f64>,
    pub gamma_diag: DVector<f64>,
    pub nu: f64,
    pub phi: DMatrix<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// AR(1) residual variances used to scale the lag shrinkage.
    pub sigma_ar: Vec<f64>,
}

/// Posterior hyperparameters of the Gaussian-Inverse-Wishart family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NiwPosterior {
    pub gamma_bar: DMatrix<f64>,
    pub psi_bar: DMatrix<f64>,
    pub nu_bar: f64,
    pub phi_bar: DMatrix<f64>,
}

/// One joint draw of the VAR parameters with its Cholesky impact factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorDraw {
    /// `n x m` coefficient matrix `[c, Pi_1, ..., Pi_p]`.
    pub pi: DMatrix<f64>,
    /// Residual covariance, symmetric positive definite.
    pub omega: DMatrix<f64>,
    /// Lower-triangular impact matrix with `omega = a0_inv a0_inv'`.
    pub a0_inv: DMatrix<f64>,
}

/// AR(1) OLS residual variance per series, used by the Minnesota scaling.
pub fn ar1_residual_variances(z: &DMatrix<f64>, names: &[String]) -> Result<Vec<f64>> {
    let t = z.nrows();
    if t < 4 {
        return Err(FvarError::NotEnoughObservations { need: 4, have: t });
    }
    let mut out = Vec::with_capacity(z.ncols());
    for j in 0..z.ncols() {
        let y: Vec<f64> = (1..t).map(|i| z[(i, j)]).collect();
        let x: Vec<f64> = (0..t - 1).map(|i| z[(i, j)]).collect();
        let n = y.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        let name = names.get(j).cloned().unwrap_or_else(|| format!("var{j}"));
        if det.abs() < 1e-12 * (n * sxx).abs().max(1.0) {
            return Err(FvarError::ConstantSeries(name));
        }
        let slope = (n * sxy - sx * sy) / det;
        let intercept = (sy - slope * sx) / n;
        let ssr: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| {
                let e = b - intercept - slope * a;
                e * e
            })
            .sum();
        let dof = (y.len() as f64 - 2.0).max(1.0);
        let sigma = ssr / dof;
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(FvarError::ConstantSeries(name));
        }
        out.push(sigma);
    }
    Ok(out)
}

/// Minnesota-style prior.
///
/// The prior coefficient mean has a one at the own first lag of every series
/// flagged persistent and zeros elsewhere. The prior variance diagonal is
/// `10^3` for the intercept and `lambda1^2 / (sigma_j l^lambda2)` for the lag-`l`
/// regressor of series `j`. The inverse-Wishart part uses `nu = n + 2` and
/// `phi = diag(sigma_1, ..., sigma_n)`.
pub fn build_minnesota_prior(
    data: &VarData,
    lambda1: f64,
    lambda2: f64,
    persistent: &[bool],
) -> Result<NiwPrior> {
    let n = data.n();
    let m = data.m();
    let p = data.p();
    if persistent.len() != n {
        return Err(FvarError::DimensionMismatch(format!(
            "{} persistence flags for {} series",
            persistent.len(),
            n
        )));
    }
    if data.t_eff() <= m {
        log::warn!(
            "VAR has {} effective observations for {} regressors per equation; \
             posterior will lean heavily on the prior",
            data.t_eff(),
            m
        );
    }
    let sigma_ar = ar1_residual_variances(data.series(), data.names())?;
    let mut psi = DMatrix::zeros(m, n);
    for j in 0..n {
        if persistent[j] {
            psi[(1 + j, j)] = 1.0;
        }
    }
    let mut gamma_diag = DVector::zeros(m);
    gamma_diag[0] = 1e3;
    for l in 1..=p {
        for j in 0..n {
            gamma_diag[1 + (l - 1) * n + j] =
                lambda1 * lambda1 / (sigma_ar[j] * (l as f64).powf(lambda2));
        }
    }
    let phi = DMatrix::from_diagonal(&DVector::from_vec(sigma_ar.clone()));
    Ok(NiwPrior {
        psi,
        gamma_diag,
        nu: n as f64 + 2.0,
        phi,
        lambda1,
        lambda2,
        sigma_ar,
    })
}

/// Closed-form posterior update.
///
/// `gamma_bar = (Gamma^-1 + X'X)^-1`, `psi_bar = gamma_bar (Gamma^-1 psi + X'Y)`,
/// `nu_bar = nu + T_eff`, and
/// `phi_bar = phi + Y'Y + psi' Gamma^-1 psi - psi_bar' gamma_bar^-1 psi_bar`.
pub fn posterior_moments(prior: &NiwPrior, data: &VarData) -> Result<NiwPosterior> {
    let m = data.m();
    let n = data.n();
    if prior.psi.nrows() != m || prior.psi.ncols() != n || prior.gamma_diag.len() != m {
        return Err(FvarError::DimensionMismatch(
            "prior dimensions do not match the data".to_string(),
        ));
    }
    if prior.gamma_diag.iter().any(|v| *v <= 0.0) {
        return Err(FvarError::NotPositiveDefinite("Gamma"));
    }
    let x = data.stacked_x();
    let y = data.stacked_y();
    let gamma_inv = DMatrix::from_diagonal(&prior.gamma_diag.map(|v| 1.0 / v));
    let precision = &gamma_inv + x.transpose() * x;
    let chol = Cholesky::new(precision.clone())
        .ok_or(FvarError::NotPositiveDefinite("Gamma^-1 + X'X"))?;
    let gamma_bar = chol.inverse();
    // right-hand side reused below as gamma_bar^-1 psi_bar
    let rhs = &gamma_inv * &prior.psi + x.transpose() * y;
    let psi_bar = chol.solve(&rhs);
    let nu_bar = prior.nu + data.t_eff() as f64;
    let phi_bar = &prior.phi + y.transpose() * y + prior.psi.transpose() * &gamma_inv * &prior.psi
        - psi_bar.transpose() * &rhs;
    let phi_bar = 0.5 * (&phi_bar + phi_bar.transpose());
    if Cholesky::new(phi_bar.clone()).is_none() {
        return Err(FvarError::NotPositiveDefinite("phi_bar"));
    }
    Ok(NiwPosterior {
        gamma_bar,
        psi_bar,
        nu_bar,
        phi_bar,
    })
}

/// Direct Monte Carlo sampler for the NIW posterior.
///
/// Per draw: `Omega ~ IW(nu_bar, phi_bar)` via the Bartlett decomposition,
/// then `Pi' = psi_bar + chol(gamma_bar) G chol(Omega)'` with `G` iid standard
/// normal. The sequence is fully determined by the seed; draws are generated
/// from a single stream in index order.
pub fn sample_posterior(
    post: &NiwPosterior,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<PosteriorDraw>> {
    if n_draws == 0 {
        return Err(FvarError::Data("need at least one draw".to_string()));
    }
    let n = post.phi_bar.nrows();
    let m = post.gamma_bar.nrows();
    if post.nu_bar <= (n + 1) as f64 {
        return Err(FvarError::Data(format!(
            "posterior degrees of freedom {} too small for dimension {n}",
            post.nu_bar
        )));
    }
    let l_gamma = Cholesky::new(post.gamma_bar.clone())
        .ok_or(FvarError::NotPositiveDefinite("gamma_bar"))?
        .l();
    let l_phi = Cholesky::new(post.phi_bar.clone())
        .ok_or(FvarError::NotPositiveDefinite("phi_bar"))?
        .l();
    let l_phi_t = l_phi.transpose();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        // Bartlett factor: chi-square diagonal, standard normal below
        let mut bartlett = DMatrix::zeros(n, n);
        for i in 0..n {
            let chi = ChiSquared::new(post.nu_bar - i as f64).map_err(|_| {
                FvarError::Data("invalid chi-square degrees of freedom".to_string())
            })?;
            bartlett[(i, i)] = chi.sample(&mut rng).sqrt();
            for j in 0..i {
                bartlett[(i, j)] = normal.sample(&mut rng);
            }
        }
        // Omega = C'C with C = bartlett^-1 chol(phi_bar)'
        let c = bartlett
            .solve_lower_triangular(&l_phi_t)
            .ok_or(FvarError::NotPositiveDefinite("Bartlett factor"))?;
        let omega = c.transpose() * &c;
        let omega = 0.5 * (&omega + omega.transpose());
        let a0_inv = Cholesky::new(omega.clone())
            .ok_or(FvarError::NotPositiveDefinite("Omega draw"))?
            .l();
        let g = DMatrix::from_fn(m, n, |_, _| normal.sample(&mut rng));
        let pi_t = &post.psi_bar + &l_gamma * g * a0_inv.transpose();
        draws.push(PosteriorDraw {
            pi: pi_t.transpose(),
            omega,
            a0_inv,
        });
    }
    Ok(draws)
}

impl PosteriorDraw {
    /// Build a draw directly from known parameters (used for true-model IRFs).
    pub fn from_parameters(pi: DMatrix<f64>, omega: DMatrix<f64>) -> Result<Self> {
        let omega = 0.5 * (&omega + omega.transpose());
        let a0_inv = Cholesky::new(omega.clone())
            .ok_or(FvarError::NotPositiveDefinite("Omega"))?
            .l();
        Ok(Self { pi, omega, a0_inv })
    }

    pub fn n(&self) -> usize {
        self.pi.nrows()
    }

    /// Lag order implied by the coefficient matrix shape.
    pub fn p(&self) -> usize {
        (self.pi.ncols() - 1) / self.pi.nrows()
    }

    pub fn intercept(&self) -> DVector<f64> {
        self.pi.column(0).into_owned()
    }

    /// The `n x n` coefficient block of lag `l` (1-based).
    pub fn lag_block(&self, l: usize) -> DMatrix<f64> {
        let n = self.n();
        self.pi.columns(1 + (l - 1) * n, n).into_owned()
    }

    /// Companion matrix of the lag polynomial (intercept excluded).
    pub fn companion(&self) -> DMatrix<f64> {
        let n = self.n();
        let p = self.p();
        let mut comp = DMatrix::zeros(n * p, n * p);
        for l in 1..=p {
            let block = self.lag_block(l);
            for r in 0..n {
                for c in 0..n {
                    comp[(r, (l - 1) * n + c)] = block[(r, c)];
                }
            }
        }
        for i in 0..n * (p - 1) {
            comp[(n + i, i)] = 1.0;
        }
        comp
    }

    /// Spectral radius of the companion matrix.
    pub fn spectral_radius(&self) -> f64 {
        self.companion()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_explosive(&self) -> bool {
        self.spectral_radius() >= 1.0
    }
}

/// Structural impulse responses of all variables to one identified shock.
#[derive(Debug, Clone)]
pub struct StructuralIrf {
    /// `n x (h_max + 1)`; column `h` is the response at horizon `h`.
    pub responses: DMatrix<f64>,
    /// Set when the companion matrix has a root on or outside the unit circle.
    pub explosive: bool,
}

/// Responses of `z_{t+h}` to a `size_sd`-standard-deviation shock.
///
/// The impact column is `size_sd` times column `shock` of the Cholesky factor;
/// later horizons follow the moving-average recursion on the lag blocks.
/// Explosive draws are not an error, only flagged.
pub fn structural_irf(
    draw: &PosteriorDraw,
    shock: usize,
    size_sd: f64,
    h_max: usize,
) -> Result<StructuralIrf> {
    let n = draw.n();
    if shock >= n {
        return Err(FvarError::DimensionMismatch(format!(
            "shock index {shock} out of range for {n} variables"
        )));
    }
    let p = draw.p();
    let lags: Vec<DMatrix<f64>> = (1..=p).map(|l| draw.lag_block(l)).collect();
    let impact = draw.a0_inv.column(shock).into_owned() * size_sd;
    let mut phis: Vec<DMatrix<f64>> = Vec::with_capacity(h_max + 1);
    phis.push(DMatrix::identity(n, n));
    for h in 1..=h_max {
        let mut acc = DMatrix::zeros(n, n);
        for l in 1..=p.min(h) {
            acc += &lags[l - 1] * &phis[h - l];
        }
        phis.push(acc);
    }
    let mut responses = DMatrix::zeros(n, h_max + 1);
    for h in 0..=h_max {
        let col = &phis[h] * &impact;
        responses.set_column(h, &col);
    }
    Ok(StructuralIrf {
        responses,
        explosive: draw.is_explosive(),
    })
}

/// Unconditional mean implied by the draw: `(I - sum_l Pi_l)^-1 c`.
pub fn unconditional_mean(draw: &PosteriorDraw) -> Result<DVector<f64>> {
    let radius = draw.spectral_radius();
    if radius >= 1.0 {
        return Err(FvarError::NoSteadyState(radius));
    }
    let n = draw.n();
    let mut m = DMatrix::identity(n, n);
    for l in 1..=draw.p() {
        m -= draw.lag_block(l);
    }
    LU::new(m)
        .solve(&draw.intercept())
        .ok_or(FvarError::NoSteadyState(radius))
}
