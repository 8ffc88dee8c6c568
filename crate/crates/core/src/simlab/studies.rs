//! Monte Carlo studies over the simulation designs: correlation of estimated
//! and true distributional responses, and cross-validated approximation error
//! of competing curve transforms.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::bvar::{build_minnesota_prior, posterior_moments, sample_posterior, VarData};
use crate::density::{estimate_panel, DensityCurve, MicroPanel, DENSITY_FLOOR};
use crate::derive_seed;
use crate::error::{FvarError, Result};
use crate::firf::{functional_irf, FirfConfig, ScoreBlock};
use crate::fpca::{fit_fpca, select_k_scree, CurvePanel, CurveSpace, FpcaModel};
use crate::lqd::{lqd_forward, lqd_inverse, LqdCurve};
use crate::numerics::{pearson, trapezoid};
use crate::simlab::dgp::{simulate_dgp, true_functional_irf, DgpSpec, SimulatedPanel};

/// Component-count choice for a study cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KChoice {
    Fixed(usize),
    /// Smallest K whose cumulative explained share reaches the threshold.
    Scree(f64),
}

impl KChoice {
    pub fn label(&self) -> String {
        match self {
            KChoice::Fixed(k) => k.to_string(),
            KChoice::Scree(thr) => format!("scree{:.2}", thr),
        }
    }
}

/// Kernel-estimate every period of a micro panel and map it to LQD curves.
pub fn estimate_lqd_panel(
    micro: &MicroPanel,
    n_grid: usize,
    n_grid01: usize,
) -> Result<(Vec<DensityCurve>, CurvePanel)> {
    let densities = estimate_panel(micro, n_grid, None)?;
    let curves: Vec<LqdCurve> = densities
        .par_iter()
        .map(|p| lqd_forward(p, n_grid01))
        .collect::<Result<_>>()?;
    let panel = CurvePanel::from_lqd_curves(micro.periods().to_vec(), &curves)?;
    Ok((densities, panel))
}

/// One cell of the correlation study.
#[derive(Debug, Clone)]
pub struct McRow {
    pub k_label: String,
    pub k_resolved_mean: f64,
    pub shock: usize,
    pub horizon: usize,
    pub avg_correlation: f64,
}

/// Average correlations between median estimated and true responses.
#[derive(Debug, Clone)]
pub struct McCorrelationTable {
    pub n_reps: usize,
    pub n_draws: usize,
    pub rows: Vec<McRow>,
}

impl McCorrelationTable {
    pub fn get(&self, k_label: &str, shock: usize, horizon: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.k_label == k_label && r.shock == shock && r.horizon == horizon)
            .map(|r| r.avg_correlation)
    }

    /// Average over shocks for one (K, horizon) cell.
    pub fn avg_over_shocks(&self, k_label: &str, horizon: usize) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.k_label == k_label && r.horizon == horizon)
            .map(|r| r.avg_correlation)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// Repeat the full pipeline (simulate, estimate densities, transform, fit the
/// VAR, sample, reconstruct responses) and correlate the pointwise median
/// response with the exact one, per shock, horizon and component count.
///
/// Repetitions run in parallel with per-repetition derived seeds; results are
/// averaged in repetition order, so the output is reproducible bit for bit.
pub fn mc_correlation_study(
    spec: &DgpSpec,
    k_choices: &[KChoice],
    horizons: &[usize],
    n_reps: usize,
    n_draws: usize,
    seed: u64,
) -> Result<McCorrelationTable> {
    if n_reps == 0 || k_choices.is_empty() || horizons.is_empty() {
        return Err(FvarError::Data("empty study configuration".to_string()));
    }
    let shocks: Vec<usize> = (0..spec.n_v).collect();
    let mut truths = Vec::new();
    for &shock in &shocks {
        truths.push(true_functional_irf(spec, shock, 1.0, horizons)?);
    }
    // per repetition: correlations indexed [k][shock][horizon], plus the K used
    type RepOut = (Vec<Vec<Vec<f64>>>, Vec<usize>);
    let rep_results: Vec<Result<RepOut>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| -> Result<RepOut> {
            let rep_seed = derive_seed(seed, &format!("rep{rep}"));
            let sim = simulate_dgp(spec, rep_seed)?;
            let (_, panel) = estimate_lqd_panel(&sim.micro, spec.n_grid, spec.n_grid01)?;
            let mut resolved: Vec<usize> = Vec::with_capacity(k_choices.len());
            for choice in k_choices {
                let k = match choice {
                    KChoice::Fixed(k) => *k,
                    KChoice::Scree(threshold) => select_k_scree(&panel, *threshold)?,
                };
                resolved.push(k.clamp(1, panel.len().min(panel.grid().len())));
            }
            let k_max = *resolved.iter().max().expect("nonempty k list");
            let full_model = fit_fpca(&panel, k_max)?;
            let mut per_k = Vec::with_capacity(k_choices.len());
            for (ci, &k) in resolved.iter().enumerate() {
                let model = full_model.truncated(k)?;
                let mut z = DMatrix::zeros(spec.t_len, spec.n_v + k);
                for t in 0..spec.t_len {
                    for j in 0..spec.n_v {
                        z[(t, j)] = sim.y[(t, j)];
                    }
                    for kk in 0..k {
                        z[(t, spec.n_v + kk)] = model.scores()[(t, kk)];
                    }
                }
                let mut names: Vec<String> =
                    (0..spec.n_v).map(|j| format!("y{}", j + 1)).collect();
                names.extend((0..k).map(|kk| format!("alpha{}", kk + 1)));
                let data = VarData::new(names, z, spec.lags.len())?;
                let prior =
                    build_minnesota_prior(&data, 0.2, 2.0, &vec![true; spec.n_v + k])?;
                let post = posterior_moments(&prior, &data)?;
                let draws = sample_posterior(
                    &post,
                    n_draws,
                    derive_seed(rep_seed, &format!("draws_k{ci}")),
                )?;
                let block = ScoreBlock {
                    offset: spec.n_v,
                    len: k,
                };
                let mut per_shock = Vec::with_capacity(shocks.len());
                for &shock in &shocks {
                    let cfg = FirfConfig {
                        shock,
                        size_sd: 1.0,
                        horizons: horizons.to_vec(),
                        support: spec.support,
                        n_grid: spec.n_grid,
                    };
                    let dirf = functional_irf(&draws, &model, block, &cfg)?;
                    let mut per_h = Vec::with_capacity(horizons.len());
                    for (hi, _) in horizons.iter().enumerate() {
                        let median = dirf.median_delta(hi);
                        let truth = &truths[shock].deltas[hi];
                        per_h.push(pearson(&median, truth));
                    }
                    per_shock.push(per_h);
                }
                per_k.push(per_shock);
            }
            Ok((per_k, resolved))
        })
        .collect();

    let mut acc = vec![vec![vec![0.0f64; horizons.len()]; shocks.len()]; k_choices.len()];
    let mut k_sum = vec![0.0f64; k_choices.len()];
    for rep in rep_results {
        let (per_k, resolved) = rep?;
        for (ci, per_shock) in per_k.iter().enumerate() {
            k_sum[ci] += resolved[ci] as f64;
            for (si, per_h) in per_shock.iter().enumerate() {
                for (hi, c) in per_h.iter().enumerate() {
                    acc[ci][si][hi] += c;
                }
            }
        }
    }
    let mut rows = Vec::new();
    for (ci, choice) in k_choices.iter().enumerate() {
        for (si, &shock) in shocks.iter().enumerate() {
            for (hi, &h) in horizons.iter().enumerate() {
                rows.push(McRow {
                    k_label: choice.label(),
                    k_resolved_mean: k_sum[ci] / n_reps as f64,
                    shock,
                    horizon: h,
                    avg_correlation: acc[ci][si][hi] / n_reps as f64,
                });
            }
        }
    }
    Ok(McCorrelationTable {
        n_reps,
        n_draws,
        rows,
    })
}

/// Curve transform compared in the cross-validation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    Log,
    Lqd,
}

impl Transform {
    pub fn label(&self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Log => "log",
            Transform::Lqd => "lqd",
        }
    }

    pub const ALL: [Transform; 3] = [Transform::Identity, Transform::Log, Transform::Lqd];
}

/// One cell of the cross-validation table.
#[derive(Debug, Clone)]
pub struct MiseRow {
    pub transform: &'static str,
    pub k: usize,
    pub avg_mise: f64,
    /// Relative to the identity-transform K = 1 cell.
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct MiseCvTable {
    pub n_reps: usize,
    pub split: f64,
    pub rows: Vec<MiseRow>,
}

impl MiseCvTable {
    pub fn get(&self, transform: Transform, k: usize) -> Option<&MiseRow> {
        self.rows
            .iter()
            .find(|r| r.transform == transform.label() && r.k == k)
    }
}

fn transform_panel(
    transform: Transform,
    densities: &[DensityCurve],
    lqd_panel: &CurvePanel,
    periods: &[String],
) -> Result<CurvePanel> {
    match transform {
        Transform::Lqd => Ok(lqd_panel.clone()),
        Transform::Identity => {
            let rows: Vec<Vec<f64>> = densities.iter().map(|p| p.values().to_vec()).collect();
            CurvePanel::from_rows(
                periods.to_vec(),
                densities[0].grid().to_vec(),
                rows,
                CurveSpace::Density,
            )
        }
        Transform::Log => {
            let rows: Vec<Vec<f64>> = densities
                .iter()
                .map(|p| p.values().iter().map(|v| v.max(DENSITY_FLOOR).ln()).collect())
                .collect();
            CurvePanel::from_rows(
                periods.to_vec(),
                densities[0].grid().to_vec(),
                rows,
                CurveSpace::LogDensity,
            )
        }
    }
}

/// Map a reconstructed curve back to density space (no renormalization; the
/// raw back-transform is what the comparison is about).
fn invert_transform(
    transform: Transform,
    spec: &DgpSpec,
    reconstructed: &[f64],
    model: &FpcaModel,
) -> Result<Vec<f64>> {
    match transform {
        Transform::Identity => Ok(reconstructed.to_vec()),
        Transform::Log => Ok(reconstructed.iter().map(|v| v.min(700.0).exp()).collect()),
        Transform::Lqd => {
            let sup = match model.space() {
                CurveSpace::Lqd { support_sup } => support_sup,
                _ => spec.support.upper,
            };
            let f = LqdCurve::new(model.grid().to_vec(), reconstructed.to_vec(), sup)?;
            let p = lqd_inverse(&f, spec.support, spec.n_grid)?;
            Ok(p.values().to_vec())
        }
    }
}

/// Cross-validated approximation error of the three transforms.
///
/// One sample is simulated from the design; every repetition re-splits it
/// 80/20 (or per `split`), fits the component basis on the training curves in
/// each transform space, projects the validation curves, inverts to density
/// space and integrates the squared error against the true density. The
/// table is normalized by the identity-transform K = 1 cell.
pub fn mise_cv_study(
    spec: &DgpSpec,
    k_max: usize,
    n_reps: usize,
    split: f64,
    seed: u64,
) -> Result<MiseCvTable> {
    if !(0.0 < split && split < 1.0) {
        return Err(FvarError::Data(format!(
            "split fraction must be in (0,1), got {split}"
        )));
    }
    if n_reps == 0 || k_max == 0 {
        return Err(FvarError::Data("empty study configuration".to_string()));
    }
    let sim: SimulatedPanel = simulate_dgp(spec, derive_seed(seed, "panel"))?;
    let (densities_hat, lqd_panel) =
        estimate_lqd_panel(&sim.micro, spec.n_grid, spec.n_grid01)?;
    let t = sim.micro.len();
    let n_train = ((t as f64) * split).round() as usize;
    if n_train == 0 || n_train >= t {
        return Err(FvarError::Data(format!(
            "split {split} leaves no training or validation data for T = {t}"
        )));
    }
    let panels: Vec<CurvePanel> = Transform::ALL
        .iter()
        .map(|tr| transform_panel(*tr, &densities_hat, &lqd_panel, sim.micro.periods()))
        .collect::<Result<_>>()?;
    let grid = sim.densities[0].grid().to_vec();

    // per repetition: sum of validation MISEs indexed [transform][k-1]
    let rep_sums: Vec<Result<Vec<Vec<f64>>>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| -> Result<Vec<Vec<f64>>> {
            let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, &format!("split{rep}")));
            let mut idx: Vec<usize> = (0..t).collect();
            idx.shuffle(&mut rng);
            let (train, val) = idx.split_at(n_train);
            let mut train_sorted = train.to_vec();
            train_sorted.sort_unstable();
            let mut sums = vec![vec![0.0f64; k_max]; Transform::ALL.len()];
            for (tri, panel) in panels.iter().enumerate() {
                let transform = Transform::ALL[tri];
                let sub = panel.subset(&train_sorted)?;
                let model = fit_fpca(&sub, k_max.min(sub.len().min(sub.grid().len())))?;
                let fitted_k = model.k();
                for &vi in val {
                    let target: Vec<f64> = panel.data().row(vi).iter().copied().collect();
                    let scores = model.project(&target, model.grid())?;
                    // incremental reconstruction over K
                    let mut rec = model.mean().to_vec();
                    for k in 1..=k_max {
                        if k <= fitted_k {
                            let col = model.basis().column(k - 1);
                            let a = scores[k - 1];
                            for (r, v) in rec.iter_mut().enumerate() {
                                *v += a * col[r];
                            }
                        }
                        let back = invert_transform(transform, spec, &rec, &model)?;
                        let truth = sim.densities[vi].values();
                        let sq: Vec<f64> = back
                            .iter()
                            .zip(truth)
                            .map(|(a, b)| (a - b) * (a - b))
                            .collect();
                        sums[tri][k - 1] += trapezoid(&grid, &sq);
                    }
                }
            }
            Ok(sums)
        })
        .collect();

    let n_val = t - n_train;
    let mut avg = vec![vec![0.0f64; k_max]; Transform::ALL.len()];
    for rep in rep_sums {
        let sums = rep?;
        for tri in 0..Transform::ALL.len() {
            for k in 0..k_max {
                avg[tri][k] += sums[tri][k];
            }
        }
    }
    for row in avg.iter_mut() {
        for v in row.iter_mut() {
            *v /= (n_reps * n_val) as f64;
        }
    }
    let reference = avg[0][0];
    if !(reference.is_finite() && reference > 0.0) {
        return Err(FvarError::Data(
            "degenerate reference cell in the cross-validation table".to_string(),
        ));
    }
    let mut rows = Vec::new();
    for (tri, transform) in Transform::ALL.iter().enumerate() {
        for k in 1..=k_max {
            rows.push(MiseRow {
                transform: transform.label(),
                k,
                avg_mise: avg[tri][k - 1],
                ratio: avg[tri][k - 1] / reference,
            });
        }
    }
    Ok(MiseCvTable {
        n_reps,
        split,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Support;
    use crate::simlab::dgp::{build_gamma_mixture_basis, build_omega, dgp_var_coefficients, BasisKind, OmegaRecipe};

    fn tiny_spec(kind: BasisKind) -> DgpSpec {
        let support = Support::new(0.0, 6.0).unwrap();
        let (intercept, lags) = dgp_var_coefficients();
        let omega = build_omega(5, OmegaRecipe::AveragedProducts { count: 100 }, 3);
        let basis =
            build_gamma_mixture_basis(kind, 30, 3, 11, support, 200, 200).unwrap();
        DgpSpec::new(intercept, lags, omega, basis, support, 2, 500, 70, 150).unwrap()
    }

    #[test]
    fn correlation_study_is_reproducible_and_well_formed() {
        let spec = tiny_spec(BasisKind::Lqd);
        let ks = [KChoice::Fixed(1), KChoice::Fixed(3)];
        let hs = [0usize, 2];
        let a = mc_correlation_study(&spec, &ks, &hs, 2, 60, 2024).unwrap();
        let b = mc_correlation_study(&spec, &ks, &hs, 2, 60, 2024).unwrap();
        assert_eq!(a.rows.len(), 2 * 2 * 2);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.avg_correlation, rb.avg_correlation);
        }
        for r in &a.rows {
            assert!(r.avg_correlation.abs() <= 1.0 + 1e-12);
        }
        assert!(a.get("3", 0, 0).is_some());
        assert!(a.avg_over_shocks("1", 2).is_some());
    }

    #[test]
    fn scree_choice_resolves_within_bounds() {
        let spec = tiny_spec(BasisKind::Lqd);
        let ks = [KChoice::Scree(0.9)];
        let table = mc_correlation_study(&spec, &ks, &[0], 1, 40, 7).unwrap();
        let k_mean = table.rows[0].k_resolved_mean;
        assert!(k_mean >= 1.0 && k_mean <= 70.0);
    }

    #[test]
    fn mise_table_normalizes_the_identity_k1_cell_to_one() {
        let spec = tiny_spec(BasisKind::Lqd);
        let table = mise_cv_study(&spec, 3, 3, 0.8, 5).unwrap();
        let cell = table.get(Transform::Identity, 1).unwrap();
        assert_eq!(cell.ratio, 1.0);
        assert_eq!(table.rows.len(), 9);
        for row in &table.rows {
            assert!(row.avg_mise.is_finite() && row.avg_mise >= 0.0);
        }
        // identity FPCA approximates its own space best at every K
        for k in 1..=3 {
            let id = table.get(Transform::Identity, k).unwrap().avg_mise;
            let lqd = table.get(Transform::Lqd, k).unwrap().avg_mise;
            assert!(id <= lqd * 1.5, "identity should not be far worse");
        }
    }

    #[test]
    fn mise_study_is_deterministic() {
        let spec = tiny_spec(BasisKind::LogDensity);
        let a = mise_cv_study(&spec, 2, 2, 0.8, 31).unwrap();
        let b = mise_cv_study(&spec, 2, 2, 0.8, 31).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.avg_mise, rb.avg_mise);
        }
    }
}
