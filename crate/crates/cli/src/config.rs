//! Settings resolution: flag, then `OUTSAMPLE_*` environment variable, then the
//! TOML config file, then the built-in default.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use outsample::spectral::DEFAULT_RANK_TOL;
use outsample::KernelSpec;

use crate::data::read_gram;
use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub kernel: Option<String>,
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
    pub rank_tol: Option<f64>,
    pub gram: Option<PathBuf>,
    pub measure_col: Option<String>,
    pub split_frac: Option<f64>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Options every command understands.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// TOML file with defaults for any of the options below.
    #[arg(long, env = "OUTSAMPLE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Column holding point weights (default `weight`; absent column = unit weights).
    #[arg(long, env = "OUTSAMPLE_MEASURE_COL")]
    pub measure_col: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct KernelArgs {
    #[arg(long, env = "OUTSAMPLE_KERNEL", value_parser = ["gaussian", "linear", "precomputed"])]
    pub kernel: Option<String>,
    /// Gaussian bandwidth in `exp(-|x - y|^2 / epsilon)`.
    #[arg(long, env = "OUTSAMPLE_EPSILON")]
    pub epsilon: Option<f64>,
    /// Sparsity threshold: weights below it are set to zero.
    #[arg(long, env = "OUTSAMPLE_ETA")]
    pub eta: Option<f64>,
    /// Eigenvalues at or below `rank_tol * lambda_1` are dropped.
    #[arg(long, env = "OUTSAMPLE_RANK_TOL")]
    pub rank_tol: Option<f64>,
    /// Headerless CSV Gram matrix for `--kernel precomputed`.
    #[arg(long, env = "OUTSAMPLE_GRAM")]
    pub gram: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SplitArgs {
    /// Fraction of points drawn as the test set.
    #[arg(long, env = "OUTSAMPLE_SPLIT_FRAC")]
    pub split_frac: Option<f64>,
    #[arg(long, env = "OUTSAMPLE_SEED")]
    pub seed: Option<u64>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub kernel: String,
    pub epsilon: f64,
    pub eta: f64,
    pub rank_tol: f64,
    pub gram: Option<PathBuf>,
    pub measure_col: String,
    pub split_frac: f64,
    pub seed: Option<u64>,
}

impl Settings {
    pub fn resolve(common: &CommonArgs, kernel: &KernelArgs, split: &SplitArgs) -> Result<Self, CliError> {
        let file = match &common.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(Self {
            kernel: kernel.kernel.clone().or(file.kernel).unwrap_or_else(|| "gaussian".into()),
            epsilon: kernel.epsilon.or(file.epsilon).unwrap_or(1.0),
            eta: kernel.eta.or(file.eta).unwrap_or(0.0),
            rank_tol: kernel.rank_tol.or(file.rank_tol).unwrap_or(DEFAULT_RANK_TOL),
            gram: kernel.gram.clone().or(file.gram),
            measure_col: common
                .measure_col
                .clone()
                .or(file.measure_col)
                .unwrap_or_else(|| "weight".into()),
            split_frac: split.split_frac.or(file.split_frac).unwrap_or(0.2),
            seed: split.seed.or(file.seed),
        })
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, CliError> {
        match self.kernel.as_str() {
            "gaussian" => Ok(KernelSpec::gaussian(self.epsilon, self.eta)?),
            "linear" => Ok(KernelSpec::Linear),
            "precomputed" => {
                let path = self
                    .gram
                    .as_ref()
                    .ok_or_else(|| CliError::Config("--kernel precomputed needs --gram".into()))?;
                Ok(KernelSpec::precomputed(read_gram(path)?)?)
            }
            other => Err(CliError::Config(format!("unknown kernel {other:?}"))),
        }
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config("this command is randomized and needs --seed".into()))
    }
}
