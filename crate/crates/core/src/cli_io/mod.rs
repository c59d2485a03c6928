//! Scenario files, result serialization and the command-line front end.

mod cli;
mod format;

pub use cli::cli_main;
pub use format::{format_sig12, render_attack, render_comparison, render_results};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{EmpiricalResult, ExperimentError};
use crate::hash_lottery::CalibrationError;
use crate::stake_model::{
    derive_miner_seed, validate_scenario, LotteryParams, Mechanism, MinerAccount, Scenario,
    StakeError, DEFAULT_TICK_LIMIT,
};

/// Trials per run when `--trials` is not given.
pub const DEFAULT_TRIALS: u64 = 1_000_000;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "POS_LAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid scenario: {0}")]
    Validation(#[from] StakeError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

impl CliError {
    /// 1 for bad input, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. }
            | CliError::Validation(_)
            | CliError::Usage(_)
            | CliError::Input { .. }
            | CliError::Calibration(_) => 1,
            CliError::Experiment(ExperimentError::Stake(_))
            | CliError::Experiment(ExperimentError::Sortition(_))
            | CliError::Experiment(ExperimentError::UnknownAttackerId(_))
            | CliError::Experiment(ExperimentError::TooManyAccounts(_))
            | CliError::Experiment(ExperimentError::ZeroTrials) => 1,
            CliError::Io { .. } | CliError::Experiment(_) => 2,
        }
    }
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub mechanism: Mechanism,
    pub master_seed: u64,
    pub miners: Vec<MinerEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lottery: Option<LotteryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinerEntry {
    pub id: u64,
    pub stake: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coin_age: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LotteryEntry {
    pub difficulty: u64,
    #[serde(default = "default_tick_limit")]
    pub tick_limit: u64,
}

fn default_tick_limit() -> u64 {
    DEFAULT_TICK_LIMIT
}

impl ScenarioFile {
    /// Builds the in-memory scenario. Missing seeds derive from the effective
    /// master seed, so an override reseeds them too.
    pub fn into_scenario(self, seed_override: Option<u64>) -> Scenario {
        let master_seed = seed_override.unwrap_or(self.master_seed);
        let miners = self
            .miners
            .into_iter()
            .map(|m| MinerAccount {
                id: m.id,
                stake: m.stake,
                coin_age: m.coin_age.unwrap_or(1),
                seed: m
                    .seed
                    .unwrap_or_else(|| derive_miner_seed(master_seed, m.id)),
            })
            .collect();
        Scenario {
            name: self.name,
            miners,
            mechanism: self.mechanism,
            lottery: self.lottery.map(|l| LotteryParams {
                difficulty: l.difficulty,
                tick_limit: l.tick_limit,
            }),
            master_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub scenario_path: PathBuf,
    pub trials: u64,
    pub seed_override: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

impl RunConfig {
    pub fn new(scenario_path: impl Into<PathBuf>) -> Self {
        Self {
            scenario_path: scenario_path.into(),
            trials: DEFAULT_TRIALS,
            seed_override: None,
            output_path: None,
            output_format: OutputFormat::Csv,
        }
    }
}

/// Parses a scenario file without validating it.
pub fn parse_scenario(path: &Path, seed_override: Option<u64>) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Input {
        path: path.to_owned(),
        source,
    })?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    Ok(file.into_scenario(seed_override))
}

/// Parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    load_scenario_with_seed(path, None)
}

pub fn load_scenario_with_seed(
    path: &Path,
    seed_override: Option<u64>,
) -> Result<Scenario, CliError> {
    Ok(validate_scenario(parse_scenario(path, seed_override)?)?)
}

/// Writes `text` to the configured output path, or stdout when none is set.
pub fn emit(text: &str, output_path: Option<&Path>) -> Result<(), CliError> {
    use std::io::Write;
    match output_path {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

pub fn write_results(result: &EmpiricalResult, config: &RunConfig) -> Result<(), CliError> {
    emit(
        &render_results(result, config.output_format),
        config.output_path.as_deref(),
    )
}

/// Reads a JSON document produced by [`write_results`].
pub fn read_results_json(path: &Path) -> Result<EmpiricalResult, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Input {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })
}
