use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::case_io::BranchId;
use crate::power_flow::FlowModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripRule {
    /// Every branch above the relay threshold trips in the same generation.
    AllOverloaded,
    /// Only the most loaded branch trips.
    WorstOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpfFrequency {
    PerGeneration,
    PerStageEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    /// `count` distinct in-service branches drawn uniformly at every stage.
    RandomLine { count: usize },
    /// Branch ids to open at each stage; stages past the list get no attack.
    Scripted { stages: Vec<Vec<BranchId>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub max_stage: usize,
    pub max_generations_per_stage: usize,
    /// Loading (fraction of base rating) above which a branch trips.
    pub relay_threshold: f64,
    pub trip_rule: TripRule,
    pub opf_frequency: OpfFrequency,
    pub flow_model: FlowModel,
    pub attack_spec: AttackSpec,
    /// Random attacks skip branches whose loss would split the slack's island.
    #[serde(default)]
    pub avoid_islanding_attacks: bool,
    /// Multiplier turning an OPF objective into a (negative) stage reward.
    pub cost_scale: f64,
    /// Reward magnitude for winning or losing an episode.
    pub terminal_bonus: f64,
    /// Fraction of total demand whose de-energisation ends the episode.
    pub deenergized_load_limit: f64,
    pub rng_seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            max_stage: 3,
            max_generations_per_stage: 50,
            relay_threshold: 1.0,
            trip_rule: TripRule::AllOverloaded,
            opf_frequency: OpfFrequency::PerGeneration,
            flow_model: FlowModel::Ac,
            attack_spec: AttackSpec::RandomLine { count: 1 },
            avoid_islanding_attacks: true,
            cost_scale: 0.02,
            terminal_bonus: 1000.0,
            deenergized_load_limit: 0.5,
            rng_seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::Config(m.to_string()));
        if self.max_stage < 1 {
            return bad("max_stage must be at least 1");
        }
        if !(self.relay_threshold > 0.0) {
            return bad("relay_threshold must be positive");
        }
        if !(self.deenergized_load_limit > 0.0 && self.deenergized_load_limit <= 1.0) {
            return bad("deenergized_load_limit must lie in (0, 1]");
        }
        if !(self.terminal_bonus > 0.0) {
            return bad("terminal_bonus must be positive");
        }
        if !(self.cost_scale >= 0.0) {
            return bad("cost_scale must be non-negative");
        }
        Ok(())
    }
}
