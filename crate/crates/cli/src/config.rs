//! Run configuration: one TOML file drives every subcommand.
//!
//! Unknown keys are rejected and every numeric field is range-checked before
//! a command runs. Paper-grade defaults are encoded here once: shrinkage
//! hyperparameters 0.2 and 2, a 90% scree threshold, 1000-point grids, 1000
//! posterior draws, 68%/90% bands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Estimation method for the distributional responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fsvar,
    Flp,
}

/// Which built-in simulation design to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DgpChoice {
    Dgp1,
    Dgp2,
}

/// HAC covariance flavor for local projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HacChoice {
    DriscollKraay,
    NeweyWest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // inputs and outputs
    pub macro_csv: Option<PathBuf>,
    pub micro_csv: Option<PathBuf>,
    pub out_dir: PathBuf,

    // support and grids
    pub support: [f64; 2],
    pub n_grid: usize,
    pub n_grid01: usize,
    pub min_observations: usize,

    // component selection
    pub k: Option<usize>,
    pub scree_threshold: f64,

    // VAR and prior
    pub lags: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub persistent: Option<Vec<bool>>,
    pub n_draws: usize,
    pub seed: u64,

    // responses
    pub method: Method,
    pub impulse: Option<String>,
    pub shock_size_sd: f64,
    pub horizons: Vec<usize>,
    pub band_levels: Vec<f64>,
    pub quantiles: Vec<f64>,
    pub n_classes: usize,
    pub write_draw_level: bool,

    // local projections
    pub flp_lags: usize,
    pub hac: HacChoice,
    pub hac_truncation: Option<usize>,
    pub flp_band_sims: usize,

    // simulation designs and studies
    pub dgp: DgpChoice,
    pub t_periods: usize,
    pub n_micro: usize,
    pub mc_reps: usize,
    pub mc_k_list: Vec<usize>,
    pub mc_include_scree: bool,
    pub mise_reps: usize,
    pub mise_k_max: usize,
    pub split: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            macro_csv: None,
            micro_csv: None,
            out_dir: PathBuf::from("out"),
            support: [0.0, 6.0],
            n_grid: 1000,
            n_grid01: 1000,
            min_observations: 10,
            k: None,
            scree_threshold: 0.90,
            lags: 4,
            lambda1: 0.2,
            lambda2: 2.0,
            persistent: None,
            n_draws: 1000,
            seed: 20240601,
            method: Method::Fsvar,
            impulse: None,
            shock_size_sd: 1.0,
            horizons: vec![0, 4, 12, 24],
            band_levels: vec![0.68, 0.90],
            quantiles: vec![0.05, 0.50, 0.95],
            n_classes: 4,
            write_draw_level: false,
            flp_lags: 1,
            hac: HacChoice::DriscollKraay,
            hac_truncation: None,
            flp_band_sims: 1000,
            dgp: DgpChoice::Dgp1,
            t_periods: 500,
            n_micro: 8000,
            mc_reps: 20,
            mc_k_list: vec![1, 2, 3, 5, 7, 15],
            mc_include_scree: true,
            mise_reps: 100,
            mise_k_max: 5,
            split: 0.8,
        }
    }
}

/// A configuration problem; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), ConfigError> {
        let bytes = std::fs::read(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| ConfigError(format!("{} is not UTF-8", path.display())))?;
        let config: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok((config, bytes))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError(msg));
        if !(self.support[0].is_finite() && self.support[1].is_finite())
            || self.support[0] >= self.support[1]
        {
            return fail(format!(
                "support [{}, {}] must be a finite interval",
                self.support[0], self.support[1]
            ));
        }
        if self.n_grid < 64 {
            return fail(format!("n_grid = {} must be at least 64", self.n_grid));
        }
        if self.n_grid01 < 64 {
            return fail(format!("n_grid01 = {} must be at least 64", self.n_grid01));
        }
        if !(0.0 < self.scree_threshold && self.scree_threshold <= 1.0) {
            return fail(format!(
                "scree_threshold = {} must lie in (0, 1]",
                self.scree_threshold
            ));
        }
        if self.k == Some(0) {
            return fail("k must be at least 1 when given".to_string());
        }
        if self.lags == 0 || self.flp_lags == 0 {
            return fail("lag orders must be at least 1".to_string());
        }
        if self.lambda1 <= 0.0 || self.lambda2 < 0.0 {
            return fail(format!(
                "shrinkage parameters lambda1 = {}, lambda2 = {} out of range",
                self.lambda1, self.lambda2
            ));
        }
        if self.n_draws == 0 {
            return fail("n_draws must be at least 1".to_string());
        }
        if self.horizons.is_empty() {
            return fail("horizons must not be empty".to_string());
        }
        if self.band_levels.is_empty()
            || self.band_levels.iter().any(|l| !(0.0 < *l && *l < 1.0))
        {
            return fail("band_levels must lie strictly inside (0, 1)".to_string());
        }
        if self.quantiles.iter().any(|q| !(0.0 < *q && *q < 1.0)) {
            return fail("quantiles must lie strictly inside (0, 1)".to_string());
        }
        if self.n_classes < 2 {
            return fail(format!("n_classes = {} must be at least 2", self.n_classes));
        }
        if self.shock_size_sd < 0.0 || !self.shock_size_sd.is_finite() {
            return fail(format!(
                "shock_size_sd = {} must be non-negative",
                self.shock_size_sd
            ));
        }
        if self.flp_band_sims == 0 {
            return fail("flp_band_sims must be at least 1".to_string());
        }
        if self.t_periods < self.lags + 2 {
            return fail(format!(
                "t_periods = {} too small for lag order {}",
                self.t_periods, self.lags
            ));
        }
        if self.n_micro < self.min_observations {
            return fail(format!(
                "n_micro = {} below the observation floor {}",
                self.n_micro, self.min_observations
            ));
        }
        if self.mc_reps == 0 || self.mise_reps == 0 {
            return fail("study repetition counts must be at least 1".to_string());
        }
        if self.mc_k_list.is_empty() && !self.mc_include_scree {
            return fail("mc_k_list is empty and scree selection is disabled".to_string());
        }
        if self.mc_k_list.iter().any(|k| *k == 0) {
            return fail("mc_k_list entries must be at least 1".to_string());
        }
        if self.mise_k_max == 0 {
            return fail("mise_k_max must be at least 1".to_string());
        }
        if !(0.0 < self.split && self.split < 1.0) {
            return fail(format!("split = {} must lie in (0, 1)", self.split));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "bogus_key = 1\n";
        let parsed: Result<RunConfig, _> = toml::from_str(text);
        assert!(parsed.is_err());
    }

    #[test]
    fn out_of_range_fields_are_rejected() {
        let mut cfg = RunConfig::default();
        cfg.support = [2.0, 1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.band_levels = vec![1.5];
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.n_grid = 10;
        assert!(cfg.validate().is_err());
    }
}
