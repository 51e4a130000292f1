//! Experiment configuration and the orchestration shared by the command-line
//! front end: rating synthesis, scenario construction, scripted simulation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, AgentError};
use crate::cascade_env::{CascadeEnv, EnvConfig, EnvError, EpisodeLog};
use crate::case_io::Network;
use crate::fixtures::{load_case, resolve_case, FixtureError};
use crate::power_flow::{self, FlowModel, PowerFlowError};

/// Smallest rating handed out by [`synth_limits`], in pu.
pub const RATING_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Shipped case name or path; relative paths resolve against the config file.
    pub case_path: String,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    /// β for branches without a rating; `None` leaves ratings as they are.
    #[serde(default)]
    pub synth_limits_factor: Option<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub report_format: ReportFormat,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read config {path}: {source}")]
    ConfigIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    ConfigSyntax {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error("base-case power flow: {0}")]
    PowerFlow(#[from] PowerFlowError),
    #[error("base-case power flow did not converge")]
    BaseCaseDiverged,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("action script has {given} entries but stage {needed} was reached")]
    ScriptTooShort { given: usize, needed: usize },
}

impl HarnessError {
    /// True for usage and configuration problems, false for failures of the
    /// computation itself.
    pub fn is_usage(&self) -> bool {
        match self {
            HarnessError::ConfigIo { .. }
            | HarnessError::ConfigSyntax { .. }
            | HarnessError::Invalid(_)
            | HarnessError::Fixture(_)
            | HarnessError::ScriptTooShort { .. } => true,
            HarnessError::Env(e) => matches!(
                e,
                EnvError::Config(_) | EnvError::InvalidAction(_) | EnvError::Network(_)
            ),
            HarnessError::Agent(e) => {
                matches!(e, AgentError::Config(_) | AgentError::Mismatch { .. })
            }
            _ => false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|source| HarnessError::ConfigSyntax {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Read a config file, resolving a relative `case_path` against its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::ConfigIo {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text, path)?;
        let beside = path.parent().unwrap_or(Path::new(".")).join(&cfg.case_path);
        if beside.is_file() {
            cfg.case_path = beside.to_string_lossy().into_owned();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.env.validate()?;
        self.agent.validate()?;
        if let Some(beta) = self.synth_limits_factor {
            if !(beta > 1.0) {
                return Err(HarnessError::Invalid(format!(
                    "synth_limits_factor must exceed 1, got {beta}"
                )));
            }
        }
        if !resolve_case(&self.case_path).is_file() {
            return Err(HarnessError::Invalid(format!(
                "case `{}` not found",
                self.case_path
            )));
        }
        Ok(())
    }

    /// Load the case and synthesise missing ratings if requested.
    pub fn network(&self) -> Result<Network, HarnessError> {
        let net = load_case(&self.case_path)?;
        match self.synth_limits_factor {
            Some(beta) => synth_limits(&net, beta, self.env.flow_model),
            None => Ok(net),
        }
    }

    pub fn environment(&self) -> Result<CascadeEnv, HarnessError> {
        Ok(CascadeEnv::new(self.network()?, self.env.clone())?)
    }
}

/// Give every unrated branch `β × |base-case flow|` (at least [`RATING_FLOOR`]).
/// Rated branches keep their rating.
pub fn synth_limits(net: &Network, beta: f64, model: FlowModel) -> Result<Network, HarnessError> {
    let sol = power_flow::solve(net, model, None)?;
    if !sol.converged {
        return Err(HarnessError::BaseCaseDiverged);
    }
    let mut out = net.clone();
    for (br, &flow) in out.branches.iter_mut().zip(&sol.branch_flow_mva) {
        if br.rating == 0.0 {
            br.rating = synth_rating(flow, beta);
        }
    }
    Ok(out)
}

pub fn synth_rating(base_flow: f64, beta: f64) -> f64 {
    (beta * base_flow.abs()).max(RATING_FLOOR)
}

/// Play one episode with `script[k]` as the action of stage `k + 1`.
pub fn simulate(env: &mut CascadeEnv, script: &[usize]) -> Result<EpisodeLog, HarnessError> {
    let mut out = env.reset()?;
    while !out.terminal {
        let stage = env.stage();
        let &action = script.get(stage - 1).ok_or(HarnessError::ScriptTooShort {
            given: script.len(),
            needed: stage,
        })?;
        out = env.step(action)?;
    }
    Ok(env.log().clone())
}
