//! Subcommand implementations.
//!
//! Every command is a pure function of (config, input files, seed): outputs
//! are deterministic and re-running reproduces them byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use fvar::bvar::{
    build_minnesota_prior, posterior_moments, sample_posterior, structural_irf, NiwPosterior,
    VarData,
};
use fvar::density::Support;
use fvar::derive_seed;
use fvar::firf::{
    class_share_response, functional_irf, gini, gini_response, quantile_response,
    DistributionalIrf, DrawIrf, FirfConfig, IrfMethod, ScoreBlock,
};
use fvar::flp::{default_lag_truncation, flp_fit, hac_cov, impulse_scale, FlpData, HacKind};
use fvar::fpca::{fit_fpca, select_k_scree, FpcaModel};
use fvar::io as fio;
use fvar::lqd::lqd_forward;
use fvar::numerics::{quantile, quantile_sorted};
use fvar::simlab::{
    estimate_lqd_panel, mc_correlation_study, mise_cv_study, simulate_dgp, DgpSpec, KChoice,
};

use crate::config::{DgpChoice, HacChoice, RunConfig};
use crate::manifest::{sha256_hex, write_manifest};

/// Command failure, carrying the exit-code class.
#[derive(Debug)]
pub enum CliError {
    /// Exit code 2.
    Config(String),
    /// Exit code 3.
    Data(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fvar::FvarError> for CliError {
    fn from(e: fvar::FvarError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("io error: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

fn ensure_out_dir(cfg: &RunConfig) -> CliResult<()> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cfg.out_dir.display())))
}

fn support_of(cfg: &RunConfig) -> CliResult<Support> {
    Support::new(cfg.support[0], cfg.support[1]).map_err(|e| CliError::Config(e.to_string()))
}

fn build_spec(cfg: &RunConfig) -> CliResult<DgpSpec> {
    let seed = derive_seed(cfg.seed, "dgp");
    let spec = match cfg.dgp {
        DgpChoice::Dgp1 => DgpSpec::dgp1(seed)?,
        DgpChoice::Dgp2 => DgpSpec::dgp2(seed)?,
    };
    Ok(spec.with_sizes(cfg.t_periods, cfg.n_micro))
}

fn dgp_label(cfg: &RunConfig) -> &'static str {
    match cfg.dgp {
        DgpChoice::Dgp1 => "dgp1",
        DgpChoice::Dgp2 => "dgp2",
    }
}

/// Everything `irf` and `flp` need from a fitted model, in one JSON document.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitArtifacts {
    pub names: Vec<String>,
    pub periods: Vec<String>,
    pub score_offset: usize,
    pub k: usize,
    pub lags: usize,
    pub impulse_index: usize,
    pub support: [f64; 2],
    pub n_grid: usize,
    pub t_eff: usize,
    pub posterior: NiwPosterior,
    /// Assembled series (aggregates without the impulse, scores, impulse).
    pub z: Vec<Vec<f64>>,
}

impl FitArtifacts {
    fn z_matrix(&self) -> DMatrix<f64> {
        let t = self.z.len();
        let n = self.names.len();
        DMatrix::from_fn(t, n, |i, j| self.z[i][j])
    }
}

/// Simulate a built-in design and write its data and truth handles.
pub fn cmd_simulate(cfg: &RunConfig, config_bytes: &[u8]) -> CliResult<()> {
    ensure_out_dir(cfg)?;
    let spec = build_spec(cfg)?;
    let sim = simulate_dgp(&spec, derive_seed(cfg.seed, "simulate"))?;
    let macro_names: Vec<String> = (0..spec.n_v).map(|j| format!("y{}", j + 1)).collect();
    fio::write_macro_csv(
        &cfg.out_dir.join("macro.csv"),
        &macro_names,
        &sim.periods,
        &sim.y,
    )?;
    fio::write_micro_csv(&cfg.out_dir.join("micro.csv"), &sim.micro)?;
    let truth = json!({
        "dgp": dgp_label(cfg),
        "support": cfg.support,
        "n_v": spec.n_v,
        "k_true": spec.k_true,
        "basis_kind": match spec.basis.kind {
            fvar::simlab::BasisKind::Lqd => "lqd",
            fvar::simlab::BasisKind::LogDensity => "logdensity",
        },
        "basis_grid": spec.basis.grid,
        "basis_mean": spec.basis.mean,
        "basis_columns": matrix_rows(&spec.basis.columns),
        "intercept": spec.intercept.iter().copied().collect::<Vec<f64>>(),
        "lag_blocks": spec.lags.iter().map(matrix_rows).collect::<Vec<_>>(),
        "omega": matrix_rows(&spec.omega),
        "alpha": matrix_rows(&sim.alpha),
        "periods": sim.periods,
    });
    std::fs::write(
        cfg.out_dir.join("truth.json"),
        serde_json::to_string_pretty(&truth).expect("truth serializes"),
    )?;
    write_manifest(
        &cfg.out_dir,
        "simulate",
        cfg,
        config_bytes,
        json!({"dgp": dgp_label(cfg), "t_periods": cfg.t_periods, "n_micro": cfg.n_micro}),
    )?;
    Ok(())
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

/// End-to-end estimation: densities, transform, components, posterior.
pub fn cmd_fit(cfg: &RunConfig, config_bytes: &[u8]) -> CliResult<()> {
    ensure_out_dir(cfg)?;
    let support = support_of(cfg)?;
    let macro_path = cfg
        .macro_csv
        .as_ref()
        .ok_or_else(|| CliError::Config("fit needs macro_csv".to_string()))?;
    let (raw_names, periods, raw_macro) = fio::read_macro_csv(macro_path)?;
    let impulse_name = match &cfg.impulse {
        Some(name) => name.clone(),
        None => raw_names
            .last()
            .cloned()
            .ok_or_else(|| CliError::Data("macro file has no series".to_string()))?,
    };
    let impulse_raw = raw_names
        .iter()
        .position(|n| *n == impulse_name)
        .ok_or_else(|| {
            CliError::Config(format!("impulse series '{impulse_name}' not in the macro file"))
        })?;

    // optional functional block
    let (k, model, shares): (usize, Option<FpcaModel>, Vec<f64>) = match &cfg.micro_csv {
        None => (0, None, Vec::new()),
        Some(path) => {
            let micro = fio::read_micro_csv(path, support, cfg.min_observations)?;
            if micro.periods() != periods.as_slice() {
                return Err(CliError::Data(format!(
                    "macro and micro period labels disagree ({} vs {} periods)",
                    periods.len(),
                    micro.len()
                )));
            }
            let (_densities, panel) = estimate_lqd_panel(&micro, cfg.n_grid, cfg.n_grid01)?;
            let k = match cfg.k {
                Some(k) => k,
                None => select_k_scree(&panel, cfg.scree_threshold)?,
            };
            let model = fit_fpca(&panel, k)?;
            let shares = model.cumulative_shares();
            log::info!(
                "selected K = {k}; cumulative explained share {:.4}",
                shares.last().copied().unwrap_or(0.0)
            );
            fio::write_fpca_model_json(&cfg.out_dir.join("fpca_model.json"), &model)?;
            let mut out = BufWriter::new(File::create(cfg.out_dir.join("explained_shares.csv"))?);
            writeln!(out, "k,share,cumulative")?;
            let mut cum = 0.0;
            for (i, s) in model.explained_shares().iter().enumerate() {
                cum += s;
                writeln!(out, "{},{},{}", i + 1, s, cum)?;
            }
            (k, Some(model), shares)
        }
    };

    // assemble z in response ordering: aggregates, scores, impulse last
    let t = periods.len();
    let n_v = raw_names.len();
    let n = n_v + k;
    let mut names: Vec<String> = Vec::with_capacity(n);
    let mut z = DMatrix::zeros(t, n);
    let mut col = 0usize;
    for j in 0..n_v {
        if j == impulse_raw {
            continue;
        }
        names.push(raw_names[j].clone());
        for i in 0..t {
            z[(i, col)] = raw_macro[(i, j)];
        }
        col += 1;
    }
    let score_offset = col;
    if let Some(model) = &model {
        for kk in 0..k {
            names.push(format!("alpha{}", kk + 1));
            for i in 0..t {
                z[(i, col)] = model.scores()[(i, kk)];
            }
            col += 1;
        }
    }
    names.push(impulse_name.clone());
    for i in 0..t {
        z[(i, col)] = raw_macro[(i, impulse_raw)];
    }

    let data = VarData::new(names.clone(), z.clone(), cfg.lags)?;
    let persistent = match &cfg.persistent {
        Some(flags) => {
            if flags.len() != n {
                return Err(CliError::Config(format!(
                    "persistent has {} entries for {} variables",
                    flags.len(),
                    n
                )));
            }
            flags.clone()
        }
        None => vec![true; n],
    };
    let prior = build_minnesota_prior(&data, cfg.lambda1, cfg.lambda2, &persistent)?;
    let posterior = posterior_moments(&prior, &data)?;
    let artifacts = FitArtifacts {
        names: names.clone(),
        periods,
        score_offset,
        k,
        lags: cfg.lags,
        impulse_index: n - 1,
        support: cfg.support,
        n_grid: cfg.n_grid,
        t_eff: data.t_eff(),
        posterior,
        z: matrix_rows(&z),
    };
    std::fs::write(
        cfg.out_dir.join("posterior.json"),
        serde_json::to_string(&artifacts).map_err(|e| CliError::Data(e.to_string()))?,
    )?;

    // posterior draws in long form plus a compact summary
    let draws = sample_posterior(&artifacts.posterior, cfg.n_draws, derive_seed(cfg.seed, "draws"))?;
    fio::write_draws_csv(&cfg.out_dir.join("draws_pi.csv"), &draws, fio::DrawMatrix::Pi)?;
    fio::write_draws_csv(
        &cfg.out_dir.join("draws_omega.csv"),
        &draws,
        fio::DrawMatrix::Omega,
    )?;
    let mut levels = Vec::new();
    for l in &cfg.band_levels {
        levels.push(0.5 - l / 2.0);
        levels.push(0.5 + l / 2.0);
    }
    let summary = fio::summarize_draws(&draws, &levels)?;
    std::fs::write(
        cfg.out_dir.join("posterior_summary.json"),
        serde_json::to_string(&summary).map_err(|e| CliError::Data(e.to_string()))?,
    )?;
    write_manifest(
        &cfg.out_dir,
        "fit",
        cfg,
        config_bytes,
        json!({
            "k": k,
            "cumulative_shares": shares,
            "t_eff": artifacts.t_eff,
            "names": names,
        }),
    )?;
    Ok(())
}

fn load_artifacts(cfg: &RunConfig) -> CliResult<FitArtifacts> {
    let path = cfg.out_dir.join("posterior.json");
    let text = std::fs::read_to_string(&path).map_err(|_| {
        CliError::Data(format!(
            "missing fitted artifacts at {}; run `fit` first",
            path.display()
        ))
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_model(cfg: &RunConfig) -> CliResult<FpcaModel> {
    let path = cfg.out_dir.join("fpca_model.json");
    if !path.exists() {
        return Err(CliError::Data(format!(
            "missing fitted component model at {}; run `fit` with micro_csv first",
            path.display()
        )));
    }
    Ok(fio::read_fpca_model_json(&path)?)
}

struct SummaryRow {
    horizon: usize,
    x: f64,
    median: f64,
    lo: f64,
    hi: f64,
}

fn summarize_deltas(
    dirf: &DistributionalIrf,
    level: f64,
    center: Option<&Vec<Vec<f64>>>,
) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for (hi_idx, &h) in dirf.horizons.iter().enumerate() {
        let med = match center {
            Some(point) => point[hi_idx].clone(),
            None => dirf.median_delta(hi_idx),
        };
        let (lo, hi) = dirf.band(hi_idx, level).expect("valid level");
        for (j, &x) in dirf.grid.iter().enumerate() {
            rows.push(SummaryRow {
                horizon: h,
                x,
                median: med[j],
                lo: lo[j],
                hi: hi[j],
            });
        }
    }
    rows
}

/// Summarize per-draw horizon paths into (median, lo, hi) per horizon.
fn summarize_paths(paths: &[Vec<f64>], n_h: usize, level: f64) -> Vec<(f64, f64, f64)> {
    let lo_q = 0.5 * (1.0 - level);
    let hi_q = 1.0 - lo_q;
    (0..n_h)
        .map(|hi| {
            let mut vals: Vec<f64> = paths.iter().map(|p| p[hi]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).expect("finite path"));
            (
                quantile_sorted(&vals, 0.5),
                quantile_sorted(&vals, lo_q),
                quantile_sorted(&vals, hi_q),
            )
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn write_functional_outputs(
    cfg: &RunConfig,
    dirf: &DistributionalIrf,
    method: IrfMethod,
    center_paths: Option<&DistributionalIrf>,
) -> CliResult<()> {
    // summarized deltas, one file per band level
    for level in &cfg.band_levels {
        let rows = summarize_deltas(dirf, *level, dirf.point_estimate.as_ref());
        let name = format!("irf_delta_summary_{:.0}.csv", level * 100.0);
        let mut out = BufWriter::new(File::create(cfg.out_dir.join(name))?);
        writeln!(out, "method,horizon,x,median,lo,hi")?;
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                method.as_str(),
                r.horizon,
                r.x,
                r.median,
                r.lo,
                r.hi
            )?;
        }
    }
    // draw-level long format
    if cfg.write_draw_level {
        let mut out = BufWriter::new(File::create(cfg.out_dir.join("irf_delta_draws.csv"))?);
        writeln!(out, "draw,horizon,x,delta")?;
        for (d, draw) in dirf.draws.iter().enumerate() {
            for (hi_idx, &h) in dirf.horizons.iter().enumerate() {
                for (j, &x) in dirf.grid.iter().enumerate() {
                    writeln!(out, "{d},{h},{x},{}", draw.deltas[hi_idx][j])?;
                }
            }
        }
    }
    // quantile paths
    {
        let mut out = BufWriter::new(File::create(cfg.out_dir.join("quantile_paths.csv"))?);
        writeln!(out, "method,level,quantile,horizon,center,lo,hi")?;
        for &q in &cfg.quantiles {
            let paths = quantile_response(dirf, q)?;
            let centers: Option<Vec<f64>> = center_paths
                .map(|c| quantile_response(c, q).map(|p| p[0].clone()))
                .transpose()?;
            for &level in &cfg.band_levels {
                let summary = summarize_paths(&paths, dirf.horizons.len(), level);
                for (hi_idx, &h) in dirf.horizons.iter().enumerate() {
                    let (med, lo, hi) = summary[hi_idx];
                    let center = centers.as_ref().map_or(med, |c| c[hi_idx]);
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        method.as_str(),
                        level,
                        q,
                        h,
                        center,
                        lo,
                        hi
                    )?;
                }
            }
        }
    }
    // class shares
    {
        let mut out = BufWriter::new(File::create(cfg.out_dir.join("class_shares.csv"))?);
        writeln!(out, "method,level,class,horizon,center,lo,hi")?;
        let resp = class_share_response(dirf, cfg.n_classes)?;
        let center_resp: Option<Vec<Vec<Vec<f64>>>> = center_paths
            .map(|c| class_share_response(c, cfg.n_classes))
            .transpose()?;
        for class in 0..cfg.n_classes {
            let per_draw: Vec<Vec<f64>> = resp
                .iter()
                .map(|d| d.iter().map(|h| h[class]).collect())
                .collect();
            for &level in &cfg.band_levels {
                let summary = summarize_paths(&per_draw, dirf.horizons.len(), level);
                for (hi_idx, &h) in dirf.horizons.iter().enumerate() {
                    let (med, lo, hi) = summary[hi_idx];
                    let center = center_resp
                        .as_ref()
                        .map_or(med, |c| c[0][hi_idx][class]);
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        method.as_str(),
                        level,
                        class + 1,
                        h,
                        center,
                        lo,
                        hi
                    )?;
                }
            }
        }
    }
    // Gini level-difference paths
    {
        let mut out = BufWriter::new(File::create(cfg.out_dir.join("gini_path.csv"))?);
        writeln!(out, "method,level,horizon,center,lo,hi")?;
        let resp = gini_response(dirf, false)?;
        let center_resp: Option<Vec<Vec<f64>>> =
            center_paths.map(|c| gini_response(c, false)).transpose()?;
        for &level in &cfg.band_levels {
            let summary = summarize_paths(&resp, dirf.horizons.len(), level);
            for (hi_idx, &h) in dirf.horizons.iter().enumerate() {
                let (med, lo, hi) = summary[hi_idx];
                let center = center_resp.as_ref().map_or(med, |c| c[0][hi_idx]);
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    method.as_str(),
                    level,
                    h,
                    center,
                    lo,
                    hi
                )?;
            }
        }
    }
    Ok(())
}

/// Structural responses from the fitted posterior: aggregate IRFs always,
/// distributional IRFs when a functional block was fitted.
pub fn cmd_irf(cfg: &RunConfig, config_bytes: &[u8]) -> CliResult<()> {
    ensure_out_dir(cfg)?;
    let support = support_of(cfg)?;
    let artifacts = load_artifacts(cfg)?;
    let n = artifacts.names.len();
    let shock = artifacts.impulse_index;
    let draws = sample_posterior(
        &artifacts.posterior,
        cfg.n_draws,
        derive_seed(cfg.seed, "draws"),
    )?;
    let h_max = cfg.horizons.iter().copied().max().unwrap_or(0);

    // aggregate responses, pointwise over draws
    let mut explosive = 0usize;
    let mut responses: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); cfg.horizons.len()]; n];
    for draw in &draws {
        let irf = structural_irf(draw, shock, cfg.shock_size_sd, h_max)?;
        if irf.explosive {
            explosive += 1;
        }
        for (hi, &h) in cfg.horizons.iter().enumerate() {
            for v in 0..n {
                responses[v][hi].push(irf.responses[(v, h)]);
            }
        }
    }
    {
        let mut out = BufWriter::new(File::create(cfg.out_dir.join("irf_macro_summary.csv"))?);
        writeln!(out, "method,level,variable,horizon,median,lo,hi")?;
        for &level in &cfg.band_levels {
            let lo_q = 0.5 * (1.0 - level);
            let hi_q = 1.0 - lo_q;
            for v in 0..n {
                for (hi_idx, &h) in cfg.horizons.iter().enumerate() {
                    let vals = &responses[v][hi_idx];
                    writeln!(
                        out,
                        "fsvar,{},{},{},{},{},{}",
                        level,
                        artifacts.names[v],
                        h,
                        quantile(vals, 0.5),
                        quantile(vals, lo_q),
                        quantile(vals, hi_q)
                    )?;
                }
            }
        }
    }

    let mut details = json!({
        "impulse": artifacts.names[shock],
        "explosive_draws": explosive,
        "k": artifacts.k,
    });
    if artifacts.k > 0 {
        let model = load_model(cfg)?;
        let block = ScoreBlock {
            offset: artifacts.score_offset,
            len: artifacts.k,
        };
        let firf_cfg = FirfConfig {
            shock,
            size_sd: cfg.shock_size_sd,
            horizons: cfg.horizons.clone(),
            support,
            n_grid: cfg.n_grid,
        };
        let dirf = functional_irf(&draws, &model, block, &firf_cfg)?;
        details["dropped_draws"] = json!(dirf.dropped_draws);
        write_functional_outputs(cfg, &dirf, IrfMethod::Fsvar, None)?;
    }
    write_manifest(&cfg.out_dir, "irf", cfg, config_bytes, details)?;
    Ok(())
}

/// Local-projection responses using the fitted component model.
pub fn cmd_flp(cfg: &RunConfig, config_bytes: &[u8]) -> CliResult<()> {
    ensure_out_dir(cfg)?;
    let support = support_of(cfg)?;
    let artifacts = load_artifacts(cfg)?;
    if artifacts.k == 0 {
        return Err(CliError::Data(
            "flp needs a fitted functional block; run `fit` with micro_csv".to_string(),
        ));
    }
    let model = load_model(cfg)?;
    let z = artifacts.z_matrix();
    let data = FlpData::new(
        artifacts.names.clone(),
        z,
        artifacts.impulse_index,
        ScoreBlock {
            offset: artifacts.score_offset,
            len: artifacts.k,
        },
    )?;
    let hac_kind = match cfg.hac {
        HacChoice::DriscollKraay => HacKind::DriscollKraay,
        HacChoice::NeweyWest => HacKind::NeweyWest,
    };
    let mut fits = Vec::new();
    let mut covs = Vec::new();
    for &h in &cfg.horizons {
        let fit = flp_fit(&data, cfg.flp_lags, h)?;
        let truncation = cfg
            .hac_truncation
            .unwrap_or_else(|| default_lag_truncation(fit.t_used()));
        let cov = hac_cov(&fit, truncation, hac_kind)?;
        covs.push(fit.impulse_cov(&cov));
        fits.push(fit);
    }
    let scale = impulse_scale(&data, cfg.flp_lags)?;
    {
        let mut out = BufWriter::new(File::create(cfg.out_dir.join("flp_score_irf.csv"))?);
        writeln!(out, "horizon,component,beta_unit,beta_scaled,se_unit")?;
        for (fit, cov) in fits.iter().zip(&covs) {
            for kk in 0..artifacts.k {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    fit.horizon,
                    kk + 1,
                    fit.beta_impulse[kk],
                    fit.beta_impulse[kk] * scale * cfg.shock_size_sd,
                    cov[(kk, kk)].sqrt()
                )?;
            }
        }
    }
    let dirf = fvar::flp::flp_functional_irf(
        &fits,
        &covs,
        &model,
        support,
        cfg.n_grid,
        scale * cfg.shock_size_sd,
        cfg.flp_band_sims,
        derive_seed(cfg.seed, "flp-bands"),
    )?;
    // point-estimate paths for the center lines of the summaries
    let center = DistributionalIrf {
        horizons: dirf.horizons.clone(),
        grid: dirf.grid.clone(),
        support: dirf.support,
        draws: vec![DrawIrf {
            baseline: dirf.draws[0].baseline.clone(),
            deltas: dirf.point_estimate.clone().expect("flp has point estimates"),
        }],
        dropped_draws: 0,
        point_estimate: None,
        method: IrfMethod::Flp,
    };
    write_functional_outputs(cfg, &dirf, IrfMethod::Flp, Some(&center))?;
    write_manifest(
        &cfg.out_dir,
        "flp",
        cfg,
        config_bytes,
        json!({
            "impulse": artifacts.names[artifacts.impulse_index],
            "impulse_scale": scale,
            "k": artifacts.k,
            "hac": match cfg.hac { HacChoice::DriscollKraay => "driscoll-kraay", HacChoice::NeweyWest => "newey-west" },
        }),
    )?;
    Ok(())
}

/// Monte Carlo correlation study over a built-in design.
pub fn cmd_mc(cfg: &RunConfig, config_bytes: &[u8]) -> CliResult<()> {
    ensure_out_dir(cfg)?;
    let spec = build_spec(cfg)?;
    let mut choices: Vec<KChoice> = cfg.mc_k_list.iter().map(|&k| KChoice::Fixed(k)).collect();
    if cfg.mc_include_scree {
        choices.push(KChoice::Scree(cfg.scree_threshold));
    }
    let table = mc_correlation_study(
        &spec,
        &choices,
        &cfg.horizons,
        cfg.mc_reps,
        cfg.n_draws,
        derive_seed(cfg.seed, "mc"),
    )?;
    fio::write_mc_table_csv(&cfg.out_dir.join("mc_correlation.csv"), &table)?;
    write_manifest(
        &cfg.out_dir,
        "mc",
        cfg,
        config_bytes,
        json!({"dgp": dgp_label(cfg), "reps": cfg.mc_reps, "draws": cfg.n_draws}),
    )?;
    Ok(())
}

/// Cross-validated transform comparison over a built-in design.
pub fn cmd_mise_cv(cfg: &RunConfig, config_bytes: &[u8]) -> CliResult<()> {
    ensure_out_dir(cfg)?;
    let spec = build_spec(cfg)?;
    let table = mise_cv_study(
        &spec,
        cfg.mise_k_max,
        cfg.mise_reps,
        cfg.split,
        derive_seed(cfg.seed, "mise"),
    )?;
    fio::write_mise_table_csv(&cfg.out_dir.join("mise_ratios.csv"), dgp_label(cfg), &table)?;
    write_manifest(
        &cfg.out_dir,
        "mise-cv",
        cfg,
        config_bytes,
        json!({"dgp": dgp_label(cfg), "reps": cfg.mise_reps, "k_max": cfg.mise_k_max}),
    )?;
    Ok(())
}

/// Gini coefficient of a density file.
pub fn cmd_gini(input: &Path, out_dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    let curve = fio::read_density_csv(input)?;
    let g = gini(&curve)?;
    let bytes = std::fs::read(input)?;
    let payload = json!({
        "command": "gini",
        "library_version": env!("CARGO_PKG_VERSION"),
        "input": input.display().to_string(),
        "input_sha256": sha256_hex(&bytes),
        "gini": g,
    });
    std::fs::write(
        out_dir.join("gini.json"),
        serde_json::to_string_pretty(&payload).expect("payload serializes"),
    )?;
    println!("{g}");
    Ok(())
}

/// Convenience used by tests: run `fit` on simulated outputs in a directory.
pub fn config_for_simulated(dir: &Path, cfg: &RunConfig) -> RunConfig {
    let mut out = cfg.clone();
    out.macro_csv = Some(dir.join("macro.csv"));
    out.micro_csv = Some(dir.join("micro.csv"));
    out.out_dir = PathBuf::from(dir);
    out
}

// silence an unused-import lint when the lqd re-export is only used by tests
#[allow(unused_imports)]
use lqd_forward as _lqd_forward_for_tests;
