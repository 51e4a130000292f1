use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::case_io::BranchId;
use crate::dc_opf::DispatchStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeResult {
    Win,
    Lose,
}

impl fmt::Display for EpisodeResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Win => "Win",
            Self::Lose => "Lose",
        })
    }
}

/// Why an episode was lost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseReason {
    PowerFlowDiverged,
    OpfInfeasible,
    GenerationCap,
    LoadLoss,
    SlackIsolated,
}

impl fmt::Display for CollapseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PowerFlowDiverged => "power flow diverged",
            Self::OpfInfeasible => "DC-OPF infeasible",
            Self::GenerationCap => "generation cap exceeded",
            Self::LoadLoss => "de-energized load above limit",
            Self::SlackIsolated => "slack island has no generation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageOpf {
    pub status: DispatchStatus,
    pub objective: f64,
}

/// One power-flow evaluation within a stage and what followed from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub pf_converged: bool,
    pub overloaded_count: usize,
    pub tripped_branch_ids: Vec<BranchId>,
    /// Redispatch run after the trips, if any.
    pub opf: Option<StageOpf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct StageLog {
    pub stage: usize,
    pub attacked_branch_ids: Vec<BranchId>,
    pub action_index: Option<usize>,
    pub generations: Vec<GenerationRecord>,
    /// Stage-end redispatch, when one ran after the generation loop.
    pub final_opf: Option<StageOpf>,
    pub stable: bool,
    pub reward: f64,
    pub collapse: Option<CollapseReason>,
}

impl StageLog {
    pub(crate) fn new(stage: usize) -> Self {
        Self {
            stage,
            ..Self::default()
        }
    }

    /// Objective of the last OPF run in this stage.
    pub fn last_opf_objective(&self) -> Option<f64> {
        self.final_opf
            .iter()
            .chain(self.generations.iter().rev().filter_map(|g| g.opf.as_ref()))
            .map(|o| o.objective)
            .next()
    }
}

/// A (state, action, reward, successor) tuple. Terminal transitions carry
/// no successor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action_index: usize,
    pub reward: f64,
    pub next_state: Option<Vec<f64>>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EpisodeLog {
    pub stages: Vec<StageLog>,
    pub result: Option<EpisodeResult>,
    pub total_reward: f64,
    pub transitions: Vec<Transition>,
}

fn ids(list: &[BranchId]) -> String {
    if list.is_empty() {
        "-".to_string()
    } else {
        list.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn opf_text(o: Option<&StageOpf>) -> String {
    match o {
        Some(StageOpf {
            status: DispatchStatus::Optimal,
            objective,
        }) => format!("{objective:.6}"),
        Some(o) => format!("{:?}", o.status).to_lowercase(),
        None => "-".to_string(),
    }
}

impl EpisodeLog {
    /// Line-oriented text log: one header per stage, one line per generation.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for st in &self.stages {
            let action = st.action_index.map_or("-".to_string(), |a| a.to_string());
            let _ = writeln!(
                s,
                "Stage-{} attack={} action={}",
                st.stage,
                ids(&st.attacked_branch_ids),
                action
            );
            for (g, rec) in st.generations.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "Generation-{}: converged={}, over_limit_count={}, tripped={}, opf_objective={}",
                    g + 1,
                    if rec.pf_converged { "Yes" } else { "No" },
                    rec.overloaded_count,
                    ids(&rec.tripped_branch_ids),
                    opf_text(rec.opf.as_ref())
                );
            }
            if st.final_opf.is_some() {
                let _ = writeln!(s, "Stage OPF: {}", opf_text(st.final_opf.as_ref()));
            }
            match st.collapse {
                Some(reason) => {
                    let _ = writeln!(s, "Collapse: {reason}");
                }
                None if st.stable => {
                    let _ = writeln!(s, "Stage reward: {:.6}", st.reward);
                }
                None => {}
            }
        }
        if let Some(r) = self.result {
            let _ = writeln!(s, "Total reward: {:.6}", self.total_reward);
            let _ = writeln!(s, "Result: {r}");
        }
        s
    }

    /// One CSV row per generation.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "stage,generation,converged,over_limit_count,tripped_ids,opf_status,opf_objective\n",
        );
        for st in &self.stages {
            for (g, rec) in st.generations.iter().enumerate() {
                let (status, obj) = match &rec.opf {
                    Some(o) => (
                        format!("{:?}", o.status).to_lowercase(),
                        if o.objective.is_finite() {
                            format!("{}", o.objective)
                        } else {
                            String::new()
                        },
                    ),
                    None => (String::new(), String::new()),
                };
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    st.stage,
                    g + 1,
                    rec.pf_converged,
                    rec.overloaded_count,
                    rec.tripped_branch_ids
                        .iter()
                        .map(|i| i.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                    status,
                    obj
                );
            }
        }
        s
    }
}
