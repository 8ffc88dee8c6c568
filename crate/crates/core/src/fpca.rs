//! Functional principal components of a panel of curves sharing one grid.
//!
//! The demeaned panel `Z` (rows are periods) is decomposed as `Z = S V D' + E`
//! with orthonormal basis columns in `D` and scores `A = S V`. The
//! factorization is computed from the eigendecomposition of the small Gram
//! matrix `Z Z'`, which equals the truncated SVD but costs `O(T^2 N)` instead
//! of a full rectangular SVD.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{FvarError, Result};
use crate::lqd::LqdCurve;

/// Which function space a curve panel lives in.
///
/// The pipeline models LQD curves; the density and log-density spaces exist
/// for the transform comparison studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSpace {
    Lqd { support_sup: f64 },
    Density,
    LogDensity,
}

/// Panel of curves on a shared grid, one row per period.
#[derive(Debug, Clone)]
pub struct CurvePanel {
    times: Vec<String>,
    grid: Vec<f64>,
    data: DMatrix<f64>,
    space: CurveSpace,
}

impl CurvePanel {
    pub fn from_rows(
        times: Vec<String>,
        grid: Vec<f64>,
        rows: Vec<Vec<f64>>,
        space: CurveSpace,
    ) -> Result<Self> {
        if times.len() != rows.len() || rows.is_empty() {
            return Err(FvarError::DimensionMismatch(format!(
                "{} period labels vs {} curves",
                times.len(),
                rows.len()
            )));
        }
        let n = grid.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(FvarError::GridMismatch);
        }
        let t = rows.len();
        let data = DMatrix::from_fn(t, n, |i, j| rows[i][j]);
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FvarError::NonFiniteCurve);
        }
        Ok(Self {
            times,
            grid,
            data,
            space,
        })
    }

    /// Build a panel from LQD curves, checking that they share one grid.
    pub fn from_lqd_curves(times: Vec<String>, curves: &[LqdCurve]) -> Result<Self> {
        let first = curves.first().ok_or(FvarError::EmptySample)?;
        let grid = first.grid01().to_vec();
        let sup = first.support_sup();
        for c in curves {
            if c.grid01().len() != grid.len()
                || c.grid01()
                    .iter()
                    .zip(&grid)
                    .any(|(a, b)| (a - b).abs() > 1e-12)
            {
                return Err(FvarError::GridMismatch);
            }
        }
        let rows: Vec<Vec<f64>> = curves.iter().map(|c| c.values().to_vec()).collect();
        Self::from_rows(times, grid, rows, CurveSpace::Lqd { support_sup: sup })
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn space(&self) -> CurveSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    /// Pointwise time average of the curves.
    pub fn mean_curve(&self) -> Vec<f64> {
        let t = self.data.nrows() as f64;
        (0..self.data.ncols())
            .map(|j| self.data.column(j).sum() / t)
            .collect()
    }

    /// Panel with the time mean removed; columns sum to zero.
    pub fn demeaned(&self) -> DMatrix<f64> {
        let mean = self.mean_curve();
        let mut z = self.data.clone();
        for j in 0..z.ncols() {
            let m = mean[j];
            for i in 0..z.nrows() {
                z[(i, j)] -= m;
            }
        }
        z
    }

    /// Select a subset of rows as a new panel (used by cross-validation splits).
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let times = idx
            .iter()
            .map(|&i| {
                self.times
                    .get(i)
                    .cloned()
                    .ok_or_else(|| FvarError::DimensionMismatch(format!("row {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| self.data.row(i).iter().copied().collect())
            .collect();
        Self::from_rows(times, self.grid.clone(), rows, self.space)
    }
}

/// Fitted functional principal component model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FpcaModel {
    space: CurveSpace,
    grid: Vec<f64>,
    mean: Vec<f64>,
    /// N x K orthonormal basis columns.
    basis: DMatrix<f64>,
    /// T x K in-sample scores, A = S V.
    scores: DMatrix<f64>,
    singular_values: Vec<f64>,
    /// Individual (not cumulative) share of variance per component.
    explained_shares: Vec<f64>,
    times: Vec<String>,
}

impl FpcaModel {
    /// Assemble a model from a known mean and basis (no in-sample scores).
    ///
    /// Used when the basis comes from outside the SVD fit, e.g. the known
    /// loadings of a data-generating process.
    pub fn from_parts(
        space: CurveSpace,
        grid: Vec<f64>,
        mean: Vec<f64>,
        basis: DMatrix<f64>,
    ) -> Result<Self> {
        if mean.len() != grid.len() || basis.nrows() != grid.len() {
            return Err(FvarError::GridMismatch);
        }
        let k = basis.ncols();
        Ok(Self {
            space,
            grid,
            mean,
            basis,
            scores: DMatrix::zeros(0, k),
            singular_values: vec![0.0; k],
            explained_shares: vec![0.0; k],
            times: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn space(&self) -> CurveSpace {
        self.space
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn explained_shares(&self) -> &[f64] {
        &self.explained_shares
    }

    pub fn cumulative_shares(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.explained_shares
            .iter()
            .map(|s| {
                acc += s;
                acc
            })
            .collect()
    }

    /// Keep only the first `k` components.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k() {
            return Err(FvarError::KOutOfRange { k, max: self.k() });
        }
        Ok(Self {
            space: self.space,
            grid: self.grid.clone(),
            mean: self.mean.clone(),
            basis: self.basis.columns(0, k).into_owned(),
            scores: self.scores.columns(0, k).into_owned(),
            singular_values: self.singular_values[..k].to_vec(),
            explained_shares: self.explained_shares[..k].to_vec(),
            times: self.times.clone(),
        })
    }

    /// Mean curve plus the basis combination of the given scores.
    pub fn reconstruct(&self, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() != self.k() {
            return Err(FvarError::DimensionMismatch(format!(
                "{} scores for a K = {} model",
                scores.len(),
                self.k()
            )));
        }
        let a = DVector::from_column_slice(scores);
        let combo = &self.basis * a;
        Ok(self
            .mean
            .iter()
            .zip(combo.iter())
            .map(|(m, c)| m + c)
            .collect())
    }

    /// Reconstruct as an [`LqdCurve`] (model must live in LQD space).
    pub fn reconstruct_lqd(&self, scores: &[f64]) -> Result<LqdCurve> {
        let sup = match self.space {
            CurveSpace::Lqd { support_sup } => support_sup,
            _ => {
                return Err(FvarError::Data(
                    "model does not live in LQD space".to_string(),
                ))
            }
        };
        LqdCurve::new(self.grid.clone(), self.reconstruct(scores)?, sup)
    }

    /// Least-squares scores of a curve on the basis: `D'(curve - mean)`.
    pub fn project(&self, values: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
        if grid.len() != self.grid.len()
            || grid
                .iter()
                .zip(&self.grid)
                .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(FvarError::GridMismatch);
        }
        if values.len() != self.grid.len() {
            return Err(FvarError::GridMismatch);
        }
        let centered = DVector::from_iterator(
            values.len(),
            values.iter().zip(&self.mean).map(|(v, m)| v - m),
        );
        Ok((self.basis.transpose() * centered).iter().copied().collect())
    }

    /// Project an LQD curve (checks the grid).
    pub fn project_lqd(&self, curve: &LqdCurve) -> Result<Vec<f64>> {
        self.project(curve.values(), curve.grid01())
    }
}

/// Eigendecomposition of the panel Gram matrix, sorted by decreasing eigenvalue.
fn gram_spectrum(z: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let gram = z * z.transpose();
    let eig = SymmetricEigen::new(gram);
    let t = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(t, t, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Rank-K truncated SVD of the demeaned panel.
///
/// Sign convention: the largest-magnitude entry of each basis column is
/// positive, so results are reproducible across linear algebra backends.
pub fn fit_fpca(panel: &CurvePanel, k: usize) -> Result<FpcaModel> {
    let t = panel.len();
    let n = panel.grid().len();
    let max_k = t.min(n);
    if k == 0 || k > max_k {
        return Err(FvarError::KOutOfRange { k, max: max_k });
    }
    let z = panel.demeaned();
    let (eigvals, eigvecs) = gram_spectrum(&z);
    let total: f64 = eigvals.iter().sum();
    let mut basis = DMatrix::zeros(n, k);
    let mut scores = DMatrix::zeros(t, k);
    let mut singular_values = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    let v_max = eigvals.first().map(|v| v.sqrt()).unwrap_or(0.0);
    for c in 0..k {
        let s_c = eigvecs.column(c);
        let mut d_c = z.transpose() * s_c;
        // recompute the singular value from the projected column; this keeps
        // A D' an exact orthogonal projection of Z even for tiny components
        let v = d_c.norm();
        if v > 1e-14 * v_max.max(1.0) {
            d_c /= v;
        } else {
            d_c.fill(0.0);
        }
        // deterministic sign: largest-magnitude entry positive
        let mut arg = 0usize;
        let mut best = 0.0f64;
        for (i, val) in d_c.iter().enumerate() {
            if val.abs() > best {
                best = val.abs();
                arg = i;
            }
        }
        let flip = if d_c[arg] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            basis[(i, c)] = flip * d_c[i];
        }
        for r in 0..t {
            scores[(r, c)] = flip * v * s_c[r];
        }
        singular_values.push(v);
        explained.push(if total > 0.0 { eigvals[c] / total } else { 0.0 });
    }
    Ok(FpcaModel {
        space: panel.space(),
        grid: panel.grid().to_vec(),
        mean: panel.mean_curve(),
        basis,
        scores,
        singular_values,
        explained_shares: explained,
        times: panel.times().to_vec(),
    })
}

/// Smallest K whose cumulative explained variance share reaches `threshold`.
///
/// Demeaning removes one rank from the panel, so the cumulative share reaches
/// one at `min(T, N) - 1` already; the fallback returns the full rank bound.
pub fn select_k_scree(panel: &CurvePanel, threshold: f64) -> Result<usize> {
    if !(0.0 < threshold && threshold <= 1.0) {
        return Err(FvarError::Data(format!(
            "scree threshold must be in (0, 1], got {threshold}"
        )));
    }
    let z = panel.demeaned();
    let (eigvals, _) = gram_spectrum(&z);
    let total: f64 = eigvals.iter().sum();
    if total <= 0.0 {
        return Ok(1);
    }
    let max_k = panel.len().min(panel.grid().len());
    let mut acc = 0.0;
    for (i, v) in eigvals.iter().take(max_k).enumerate() {
        acc += v / total;
        if acc >= threshold - 1e-9 {
            return Ok(i + 1);
        }
    }
    Ok(max_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_panel(t: usize, n: usize, seed: u64) -> CurvePanel {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let rows: Vec<Vec<f64>> = (0..t)
            .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        let times = (0..t).map(|i| format!("t{i:03}")).collect();
        CurvePanel::from_rows(times, grid, rows, CurveSpace::Density).unwrap()
    }

    fn factor_panel(t: usize, n: usize, k_true: usize, seed: u64) -> CurvePanel {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let bases: Vec<Vec<f64>> = (0..k_true)
            .map(|k| {
                grid.iter()
                    .map(|&x| (std::f64::consts::PI * (k + 1) as f64 * x).sin())
                    .collect()
            })
            .collect();
        let rows: Vec<Vec<f64>> = (0..t)
            .map(|_| {
                let loadings: Vec<f64> = (0..k_true).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                (0..n)
                    .map(|j| {
                        1.0 + loadings
                            .iter()
                            .zip(&bases)
                            .map(|(a, b)| a * b[j])
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        let times = (0..t).map(|i| format!("t{i:03}")).collect();
        CurvePanel::from_rows(times, grid, rows, CurveSpace::Density).unwrap()
    }

    #[test]
    fn demeaned_columns_sum_to_zero() {
        let panel = random_panel(40, 120, 3);
        let z = panel.demeaned();
        for j in 0..z.ncols() {
            assert!(z.column(j).sum().abs() < 1e-10);
        }
    }

    #[test]
    fn rank_one_panel_is_fully_explained_by_one_component() {
        let n = 80;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let shape: Vec<f64> = grid.iter().map(|&x| (2.0 * x).cos()).collect();
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| shape.iter().map(|s| s * (i as f64 - 3.0)).collect())
            .collect();
        let times = (0..12).map(|i| format!("t{i}")).collect();
        let panel = CurvePanel::from_rows(times, grid, rows, CurveSpace::Density).unwrap();
        let model = fit_fpca(&panel, 1).unwrap();
        assert_relative_eq!(model.explained_shares()[0], 1.0, epsilon = 1e-10);
        // E = 0: reconstruction matches every row
        for (i, time_scores) in (0..panel.len()).map(|i| (i, model.scores().row(i))) {
            let rec = model.reconstruct(&[time_scores[0]]).unwrap();
            for (a, b) in rec.iter().zip(panel.data().row(i).iter()) {
                assert_relative_eq!(*a, *b, epsilon = 1e-9);
            }
        }
        assert_eq!(select_k_scree(&panel, 0.9).unwrap(), 1);
    }

    #[test]
    fn full_rank_truncation_reproduces_the_panel() {
        let panel = random_panel(25, 60, 11);
        let model = fit_fpca(&panel, 25).unwrap();
        let mean = panel.mean_curve();
        for i in 0..panel.len() {
            let scores: Vec<f64> = model.scores().row(i).iter().copied().collect();
            let rec = model.reconstruct(&scores).unwrap();
            for (j, v) in rec.iter().enumerate() {
                assert!((v - panel.data()[(i, j)]).abs() < 1e-8);
            }
        }
        // demeaning costs one rank, so the spectrum is exhausted one early
        assert_eq!(select_k_scree(&panel, 1.0).unwrap(), 24);
        let _ = mean;
    }

    #[test]
    fn basis_is_orthonormal_and_shares_decrease() {
        let panel = random_panel(60, 200, 5);
        let model = fit_fpca(&panel, 12).unwrap();
        let gram = model.basis().transpose() * model.basis();
        for i in 0..12 {
            for j in 0..12 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expected).abs() < 1e-8);
            }
        }
        let shares = model.explained_shares();
        for w in shares.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
        assert!(shares.iter().sum::<f64>() <= 1.0 + 1e-9);
    }

    #[test]
    fn reconstruction_error_is_monotone_in_k() {
        let panel = factor_panel(40, 150, 6, 9);
        let z = panel.demeaned();
        let full = fit_fpca(&panel, 12).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=12 {
            let model = full.truncated(k).unwrap();
            let approx_z = model.scores() * model.basis().transpose();
            let err = (&z - approx_z).norm();
            assert!(err <= last + 1e-9, "error grew at k = {k}");
            last = err;
        }
    }

    #[test]
    fn projecting_the_mean_gives_zero_scores() {
        let panel = random_panel(30, 90, 17);
        let model = fit_fpca(&panel, 5).unwrap();
        let mean = model.mean().to_vec();
        let scores = model.project(&mean, model.grid()).unwrap();
        for s in scores {
            assert!(s.abs() < 1e-10);
        }
    }

    #[test]
    fn exact_recovery_of_scores_in_span() {
        let panel = random_panel(30, 90, 23);
        let model = fit_fpca(&panel, 4).unwrap();
        let a = [0.7, -1.2, 0.05, 2.4];
        let curve = model.reconstruct(&a).unwrap();
        let back = model.project(&curve, model.grid()).unwrap();
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let panel = random_panel(10, 50, 2);
        let model = fit_fpca(&panel, 2).unwrap();
        let other: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let vals = vec![0.0; 50];
        assert!(matches!(
            model.project(&vals, &other),
            Err(FvarError::GridMismatch)
        ));
        assert!(matches!(
            fit_fpca(&panel, 0),
            Err(FvarError::KOutOfRange { .. })
        ));
        assert!(matches!(
            fit_fpca(&panel, 11),
            Err(FvarError::KOutOfRange { .. })
        ));
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let panel = random_panel(20, 70, 31);
        let model = fit_fpca(&panel, 6).unwrap();
        for c in 0..6 {
            let col = model.basis().column(c);
            let mut arg = 0usize;
            let mut best = 0.0f64;
            for (i, v) in col.iter().enumerate() {
                if v.abs() > best {
                    best = v.abs();
                    arg = i;
                }
            }
            assert!(col[arg] > 0.0);
        }
    }

    #[test]
    fn model_round_trips_through_json() {
        let panel = random_panel(8, 40, 41);
        let model = fit_fpca(&panel, 3).unwrap();
        let text = serde_json::to_string(&model).unwrap();
        let back: FpcaModel = serde_json::from_str(&text).unwrap();
        assert_eq!(model.basis(), back.basis());
        assert_eq!(model.mean(), back.mean());
        assert_eq!(model.singular_values(), back.singular_values());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn project_after_reconstruct_is_identity(seed in 0u64..1000, k in 1usize..5) {
            let panel = random_panel(20, 64, seed);
            let model = fit_fpca(&panel, k).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xabcd);
            let a: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let curve = model.reconstruct(&a).unwrap();
            let back = model.project(&curve, model.grid()).unwrap();
            for (x, y) in a.iter().zip(&back) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
