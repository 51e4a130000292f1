use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{AttackSpec, EnvConfig, OpfFrequency, TripRule};
use super::features::{feature_len, featurize};
use super::log::{
    CollapseReason, EpisodeLog, EpisodeResult, GenerationRecord, StageLog, StageOpf, Transition,
};
use super::{action_value, EnvError};
use crate::case_io::{validate, BranchId, Network};
use crate::dc_opf::{apply_dispatch, solve_opf};
use crate::power_flow::{self, slack_component, FlowModel, PowerFlowSolution};

/// Result of `reset` or `step`. Terminal outcomes carry an all-zero state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    /// For `reset`, the partial log of stage 1; for `step`, the stage just played.
    pub stage_log: StageLog,
}

/// Episode engine. Owns a pristine copy of the network and a working copy
/// that accumulates outages and redispatch within an episode.
#[derive(Debug, Clone)]
pub struct CascadeEnv {
    base: Network,
    cfg: EnvConfig,
    rng: ChaCha8Rng,
    net: Network,
    stage: usize,
    solution: Option<PowerFlowSolution>,
    state: Option<Vec<f64>>,
    log: EpisodeLog,
    terminal: bool,
}

fn slack_has_generation(net: &Network, keep: &[bool]) -> bool {
    let idx = net.bus_index();
    net.generators
        .iter()
        .any(|g| g.in_service && keep[idx[&g.bus]])
}

impl CascadeEnv {
    pub fn new(net: Network, cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let problems = validate(&net);
        if !problems.is_empty() {
            return Err(EnvError::Network(problems.join("; ")));
        }
        let keep = slack_component(&net).ok_or(EnvError::Network("no slack bus".into()))?;
        if !slack_has_generation(&net, &keep) {
            return Err(EnvError::Network(
                "slack island has no in-service generator".into(),
            ));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            net: net.clone(),
            base: net,
            cfg,
            stage: 0,
            solution: None,
            state: None,
            log: EpisodeLog::default(),
            terminal: true,
        })
    }

    /// Restart the disturbance stream from `seed`.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn base_network(&self) -> &Network {
        &self.base
    }

    /// The working network of the current episode.
    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn log(&self) -> &EpisodeLog {
        &self.log
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// Current stage, 1-based; 0 before the first reset.
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn state_len(&self) -> usize {
        feature_len(&self.base)
    }

    /// Latest converged power flow, indexed like `network()`.
    pub fn solution(&self) -> Option<&PowerFlowSolution> {
        self.solution.as_ref()
    }

    pub fn reset(&mut self) -> Result<StepOutcome, EnvError> {
        self.net = self.base.clone();
        self.stage = 1;
        self.solution = None;
        self.state = None;
        self.log = EpisodeLog::default();
        self.terminal = false;
        let reward = match self.begin_stage()? {
            Some(reason) => self.lose(reason, 0.0),
            None => 0.0,
        };
        self.log.total_reward += reward;
        Ok(self.outcome(reward, self.log.stages.last().cloned().unwrap_or_default()))
    }

    pub fn step(&mut self, action_index: usize) -> Result<StepOutcome, EnvError> {
        if self.stage == 0 {
            return Err(EnvError::NotReset);
        }
        if self.terminal {
            return Err(EnvError::Terminated);
        }
        let scale = action_value(action_index)?;
        let before = self.state.clone().unwrap_or_default();
        let played = self.log.stages.len() - 1;
        self.current().action_index = Some(action_index);
        let limits: Vec<f64> = self.net.branches.iter().map(|b| b.rating * scale).collect();

        let reward = match self.play_stage(&limits)? {
            Err(reason) => self.lose(reason, 0.0),
            Ok(objective) => {
                let stage_reward = -self.cfg.cost_scale * objective;
                let st = self.current();
                st.stable = true;
                st.reward = stage_reward;
                if self.stage == self.cfg.max_stage {
                    self.finish(EpisodeResult::Win);
                    stage_reward + self.cfg.terminal_bonus
                } else {
                    self.stage += 1;
                    match self.begin_stage()? {
                        Some(reason) => self.lose(reason, stage_reward),
                        None => stage_reward,
                    }
                }
            }
        };
        let played = self.log.stages[played].clone();
        self.log.total_reward += reward;
        self.log.transitions.push(Transition {
            state: before,
            action_index,
            reward,
            next_state: if self.terminal {
                None
            } else {
                self.state.clone()
            },
            terminal: self.terminal,
        });
        Ok(self.outcome(reward, played))
    }

    /// Play a whole episode, asking `policy` for an action at every stage.
    pub fn run_episode<F>(&mut self, mut policy: F) -> Result<&EpisodeLog, EnvError>
    where
        F: FnMut(&[f64], usize) -> usize,
    {
        let mut out = self.reset()?;
        while !out.terminal {
            let a = policy(&out.state, self.stage);
            out = self.step(a)?;
        }
        Ok(&self.log)
    }

    fn outcome(&self, reward: f64, stage_log: StageLog) -> StepOutcome {
        StepOutcome {
            state: match (&self.state, self.terminal) {
                (Some(s), false) => s.clone(),
                _ => vec![0.0; self.state_len()],
            },
            reward,
            terminal: self.terminal,
            stage_log,
        }
    }

    fn current(&mut self) -> &mut StageLog {
        self.log.stages.last_mut().expect("stage log exists")
    }

    fn finish(&mut self, result: EpisodeResult) {
        self.terminal = true;
        self.state = None;
        self.log.result = Some(result);
    }

    /// Mark the episode lost; returns the step reward.
    fn lose(&mut self, reason: CollapseReason, stage_reward: f64) -> f64 {
        let st = self.current();
        if st.collapse.is_none() && !st.stable {
            st.collapse = Some(reason);
        }
        self.finish(EpisodeResult::Lose);
        stage_reward - self.cfg.terminal_bonus
    }

    /// Open the current stage: disturbance, island settling, power flow.
    fn begin_stage(&mut self) -> Result<Option<CollapseReason>, EnvError> {
        self.log.stages.push(StageLog::new(self.stage));
        let attacked = self.disturb();
        for &id in &attacked {
            if let Some(l) = self.net.branch_position(id) {
                self.net.branches[l].in_service = false;
            }
        }
        self.current().attacked_branch_ids = attacked;
        if let Some(reason) = self.settle_islands() {
            return Ok(Some(reason));
        }
        if self.power_flow()?.is_none() {
            self.current().generations.push(GenerationRecord {
                pf_converged: false,
                overloaded_count: 0,
                tripped_branch_ids: Vec::new(),
                opf: None,
            });
            return Ok(Some(CollapseReason::PowerFlowDiverged));
        }
        let sol = self.solution.as_ref().expect("converged");
        self.state = Some(featurize(sol, &self.net));
        Ok(None)
    }

    /// Generation loop plus stage-end redispatch. The inner result is the
    /// objective of the stage's last OPF, or the reason for collapse.
    fn play_stage(&mut self, limits: &[f64]) -> Result<Result<f64, CollapseReason>, EnvError> {
        let mut sol = self.solution.clone().expect("stage opened with a solution");
        let mut trips = 0;
        let mut opf_ran = false;
        loop {
            let over: Vec<usize> = (0..self.net.n_branches())
                .filter(|&l| {
                    self.net.branches[l].in_service
                        && self.net.branches[l].rating > 0.0
                        && sol.loading[l] > self.cfg.relay_threshold
                })
                .collect();
            let mut rec = GenerationRecord {
                pf_converged: true,
                overloaded_count: over.len(),
                tripped_branch_ids: Vec::new(),
                opf: None,
            };
            if over.is_empty() {
                self.current().generations.push(rec);
                break;
            }
            if trips >= self.cfg.max_generations_per_stage {
                self.current().generations.push(rec);
                return Ok(Err(CollapseReason::GenerationCap));
            }
            let trip: Vec<usize> = match self.cfg.trip_rule {
                TripRule::AllOverloaded => over,
                TripRule::WorstOnly => {
                    let mut worst = over[0];
                    for &l in &over[1..] {
                        if sol.loading[l] > sol.loading[worst] {
                            worst = l;
                        }
                    }
                    vec![worst]
                }
            };
            for &l in &trip {
                self.net.branches[l].in_service = false;
                rec.tripped_branch_ids.push(self.net.branches[l].id);
            }
            trips += 1;
            if let Some(reason) = self.settle_islands() {
                self.current().generations.push(rec);
                return Ok(Err(reason));
            }
            if self.cfg.opf_frequency == OpfFrequency::PerGeneration {
                let opf = self.redispatch(limits)?;
                rec.opf = Some(opf);
                opf_ran = true;
                if !opf.status.is_optimal() {
                    self.current().generations.push(rec);
                    return Ok(Err(CollapseReason::OpfInfeasible));
                }
            }
            self.current().generations.push(rec);
            match self.power_flow()? {
                Some(s) => sol = s,
                None => {
                    self.current().generations.push(GenerationRecord {
                        pf_converged: false,
                        overloaded_count: 0,
                        tripped_branch_ids: Vec::new(),
                        opf: None,
                    });
                    return Ok(Err(CollapseReason::PowerFlowDiverged));
                }
            }
        }
        if self.cfg.opf_frequency == OpfFrequency::PerStageEnd || !opf_ran {
            let opf = self.redispatch(limits)?;
            self.current().final_opf = Some(opf);
            if !opf.status.is_optimal() {
                return Ok(Err(CollapseReason::OpfInfeasible));
            }
        }
        Ok(Ok(self.current().last_opf_objective().unwrap_or(0.0)))
    }

    fn disturb(&mut self) -> Vec<BranchId> {
        let mut ids: Vec<BranchId> = match &self.cfg.attack_spec {
            AttackSpec::Scripted { stages } => stages
                .get(self.stage - 1)
                .cloned()
                .unwrap_or_default()
                .into_iter()
                .filter(|&id| {
                    self.net
                        .branch_position(id)
                        .is_some_and(|l| self.net.branches[l].in_service)
                })
                .collect(),
            AttackSpec::RandomLine { count } => {
                let candidates = self.attack_candidates();
                candidates
                    .choose_multiple(&mut self.rng, *count)
                    .map(|&l| self.net.branches[l].id)
                    .collect()
            }
        };
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// In-service branches inside the slack island, optionally excluding those
    /// whose outage would split it.
    fn attack_candidates(&self) -> Vec<usize> {
        let keep = slack_component(&self.net).expect("slack exists");
        let idx = self.net.bus_index();
        let size = keep.iter().filter(|&&k| k).count();
        (0..self.net.n_branches())
            .filter(|&l| {
                let br = &self.net.branches[l];
                br.in_service && keep[idx[&br.from_bus]] && keep[idx[&br.to_bus]]
            })
            .filter(|&l| {
                if !self.cfg.avoid_islanding_attacks {
                    return true;
                }
                let mut trial = self.net.clone();
                trial.branches[l].in_service = false;
                let after = slack_component(&trial).expect("slack exists");
                after.iter().filter(|&&k| k).count() == size
            })
            .collect()
    }

    /// Shut down everything outside the slack island and check the loss
    /// conditions that follow from it.
    fn settle_islands(&mut self) -> Option<CollapseReason> {
        let keep = slack_component(&self.net).expect("slack exists");
        let idx = self.net.bus_index();
        let mut lost = 0.0;
        for l in self.net.loads.iter_mut() {
            if !keep[idx[&l.bus]] {
                l.served_fraction = 0.0;
                lost += -l.p_demand;
            }
        }
        for g in self.net.generators.iter_mut() {
            if !keep[idx[&g.bus]] {
                g.in_service = false;
            }
        }
        if !slack_has_generation(&self.net, &keep) {
            return Some(CollapseReason::SlackIsolated);
        }
        let total = self.base.total_demand();
        if total > 0.0 && lost / total > self.cfg.deenergized_load_limit {
            return Some(CollapseReason::LoadLoss);
        }
        None
    }

    /// Solve the slack island; on AC divergence from a warm start, retry flat.
    /// Returns the full-indexed solution, or `None` on divergence.
    fn power_flow(&mut self) -> Result<Option<PowerFlowSolution>, EnvError> {
        let keep = slack_component(&self.net).expect("slack exists");
        let sub = self.net.restricted(&keep);
        let warm = match (self.cfg.flow_model, &self.solution) {
            (FlowModel::Ac, Some(prev)) => Some(PowerFlowSolution {
                v: restrict(&prev.v, &keep),
                theta: restrict(&prev.theta, &keep),
                ..empty_solution()
            }),
            _ => None,
        };
        let mut sol = power_flow::solve(&sub, self.cfg.flow_model, warm.as_ref())?;
        if !sol.converged && warm.is_some() {
            sol = power_flow::solve(&sub, self.cfg.flow_model, None)?;
        }
        if !sol.converged {
            return Ok(None);
        }
        let full = sol.expand(&sub, &self.net);
        self.solution = Some(full.clone());
        Ok(Some(full))
    }

    /// DC-OPF over the slack island, applied to the working network when optimal.
    fn redispatch(&mut self, limits: &[f64]) -> Result<StageOpf, EnvError> {
        let keep = slack_component(&self.net).expect("slack exists");
        let idx = self.net.bus_index();
        let mut sub = self.net.restricted(&keep);
        let sub_limits: Vec<f64> = sub
            .branches
            .iter()
            .map(|b| limits[self.net.branch_position(b.id).expect("same ids")])
            .collect();
        let d = solve_opf(&sub, &sub_limits)?;
        if d.status.is_optimal() {
            apply_dispatch(&mut sub, &d)?;
            let inside = |bus| keep[idx[&bus]];
            let gens = self.net.generators.iter_mut().filter(|g| inside(g.bus));
            for (g, s) in gens.zip(&sub.generators) {
                g.p_dispatch = s.p_dispatch;
            }
            let loads = self.net.loads.iter_mut().filter(|l| inside(l.bus));
            for (l, s) in loads.zip(&sub.loads) {
                l.served_fraction = s.served_fraction;
            }
        }
        Ok(StageOpf {
            status: d.status,
            objective: d.objective,
        })
    }
}

fn restrict(values: &[f64], keep: &[bool]) -> Vec<f64> {
    values
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(&v, _)| v)
        .collect()
}

fn empty_solution() -> PowerFlowSolution {
    PowerFlowSolution {
        converged: false,
        iterations: 0,
        v: Vec::new(),
        theta: Vec::new(),
        p_inj: Vec::new(),
        q_inj: Vec::new(),
        branch_flow_p: Vec::new(),
        branch_flow_mva: Vec::new(),
        loading: Vec::new(),
    }
}
