use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{argmax, epsilon_greedy, BaselinePolicy};
use super::{
    td_target_qlearning, td_target_sarsa, td_update, Agent, AgentConfig, AgentError, Algorithm,
};
use crate::cascade_env::{CascadeEnv, EpisodeLog, EpisodeResult};

/// Moving-average window of the training metrics.
pub const WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// 1-based.
    pub episode: usize,
    pub result: EpisodeResult,
    pub reward: f64,
    /// Stages that reached a stable end.
    pub stages: usize,
}

impl EpisodeRecord {
    fn from_log(episode: usize, log: &EpisodeLog) -> Self {
        Self {
            episode,
            result: log.result.unwrap_or(EpisodeResult::Lose),
            reward: log.total_reward,
            stages: log.stages.iter().filter(|s| s.stable).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMetrics {
    pub records: Vec<EpisodeRecord>,
    pub win_count: usize,
    /// Mean reward over the last `WINDOW` episodes; `None` before episode `WINDOW`.
    pub moving_avg_reward: Vec<Option<f64>>,
    pub moving_avg_winrate: Vec<Option<f64>>,
}

impl TrainingMetrics {
    pub fn push(&mut self, record: EpisodeRecord) {
        if record.result == EpisodeResult::Win {
            self.win_count += 1;
        }
        self.records.push(record);
        let n = self.records.len();
        if n >= WINDOW {
            let recent = &self.records[n - WINDOW..];
            let reward = recent.iter().map(|r| r.reward).sum::<f64>() / WINDOW as f64;
            let wins = recent
                .iter()
                .filter(|r| r.result == EpisodeResult::Win)
                .count();
            self.moving_avg_reward.push(Some(reward));
            self.moving_avg_winrate
                .push(Some(wins as f64 / WINDOW as f64));
        } else {
            self.moving_avg_reward.push(None);
            self.moving_avg_winrate.push(None);
        }
    }

    pub fn win_rate(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.win_count as f64 / self.records.len() as f64
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "episode,result,reward,stages,moving_avg_reward_50,moving_avg_winrate_50\n",
        );
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for (i, r) in self.records.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.episode,
                r.result,
                r.reward,
                r.stages,
                opt(self.moving_avg_reward[i]),
                opt(self.moving_avg_winrate[i])
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let n = self.records.len();
        let avg = if n == 0 {
            0.0
        } else {
            self.records.iter().map(|r| r.reward).sum::<f64>() / n as f64
        };
        let last = |v: &[Option<f64>]| {
            v.last()
                .copied()
                .flatten()
                .map_or("-".into(), |x| format!("{x:.6}"))
        };
        format!(
            "episodes: {n}\nwins: {}\nwin rate: {:.6}\naverage reward: {avg:.6}\nfinal moving win rate: {}\nfinal moving reward: {}\n",
            self.win_count,
            self.win_rate(),
            last(&self.moving_avg_winrate),
            last(&self.moving_avg_reward),
        )
    }
}

fn finite(values: Vec<f64>, episode: usize) -> Result<Vec<f64>, AgentError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(values)
    } else {
        Err(AgentError::NonFinite {
            episode,
            what: "action value",
        })
    }
}

/// Train a fresh agent for `cfg.episodes` episodes.
pub fn train(
    env: &mut CascadeEnv,
    cfg: &AgentConfig,
) -> Result<(Agent, TrainingMetrics), AgentError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut agent = Agent::new(cfg, env.state_len(), &mut rng)?;
    let mut metrics = TrainingMetrics::default();
    for episode in 1..=cfg.episodes {
        match cfg.algorithm {
            Algorithm::SarsaShallow => sarsa_episode(env, &mut agent, cfg, &mut rng, episode)?,
            Algorithm::QlearningDeep => qlearning_episode(env, &mut agent, cfg, &mut rng, episode)?,
        }
        metrics.push(EpisodeRecord::from_log(episode, env.log()));
    }
    Ok((agent, metrics))
}

fn sarsa_episode(
    env: &mut CascadeEnv,
    agent: &mut Agent,
    cfg: &AgentConfig,
    rng: &mut ChaCha8Rng,
    episode: usize,
) -> Result<(), AgentError> {
    let scale = 1.0 / env.config().terminal_bonus;
    let lr = cfg.learning_rate();
    let mut out = env.reset()?;
    if out.terminal {
        return Ok(());
    }
    let mut state = out.state;
    let mut action = epsilon_greedy(&finite(agent.q_values(&state)?, episode)?, cfg.epsilon, rng);
    loop {
        out = env.step(action)?;
        let reward = out.reward * scale;
        if out.terminal {
            let target = td_target_sarsa(reward, cfg.gamma, 0.0, true);
            td_update(
                &mut agent.network,
                agent.algorithm,
                &state,
                action,
                target,
                lr,
            )?;
            return Ok(());
        }
        let next_values = finite(agent.q_values(&out.state)?, episode)?;
        let next_action = epsilon_greedy(&next_values, cfg.epsilon, rng);
        let target = td_target_sarsa(reward, cfg.gamma, next_values[next_action], false);
        td_update(
            &mut agent.network,
            agent.algorithm,
            &state,
            action,
            target,
            lr,
        )?;
        state = out.state;
        action = next_action;
    }
}

fn qlearning_episode(
    env: &mut CascadeEnv,
    agent: &mut Agent,
    cfg: &AgentConfig,
    rng: &mut ChaCha8Rng,
    episode: usize,
) -> Result<(), AgentError> {
    let scale = 1.0 / env.config().terminal_bonus;
    let lr = cfg.learning_rate();
    let mut out = env.reset()?;
    while !out.terminal {
        let state = out.state;
        let action = epsilon_greedy(&finite(agent.q_values(&state)?, episode)?, cfg.epsilon, rng);
        out = env.step(action)?;
        let reward = out.reward * scale;
        let target = if out.terminal {
            td_target_qlearning(reward, cfg.gamma, &[], true)
        } else {
            let next = finite(agent.q_values(&out.state)?, episode)?;
            td_target_qlearning(reward, cfg.gamma, &next, false)
        };
        td_update(
            &mut agent.network,
            agent.algorithm,
            &state,
            action,
            target,
            lr,
        )?;
    }
    Ok(())
}

/// Action source for evaluation runs.
#[derive(Debug, Clone)]
pub enum Policy<'a> {
    /// ε = 0 on the agent's action values.
    Greedy(&'a Agent),
    Baseline(BaselinePolicy<ChaCha8Rng>),
}

impl Policy<'_> {
    fn choose(&mut self, state: &[f64]) -> Result<usize, AgentError> {
        match self {
            Policy::Greedy(agent) => Ok(argmax(&agent.q_values(state)?)),
            Policy::Baseline(b) => Ok(b.choose()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub episodes: usize,
    pub wins: usize,
    pub win_rate: f64,
    pub avg_reward: f64,
    pub records: Vec<EpisodeRecord>,
}

impl EvaluationReport {
    pub fn to_text(&self) -> String {
        if self.episodes == 0 {
            return "episodes: 0\n".to_string();
        }
        format!(
            "episodes: {}\nwins: {}\nwin rate: {:.6}\naverage reward: {:.6}\n",
            self.episodes, self.wins, self.win_rate, self.avg_reward
        )
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("episode,result,reward,stages\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{}", r.episode, r.result, r.reward, r.stages);
        }
        s
    }
}

/// Play `episodes` episodes; episode `i` reseeds the environment's
/// disturbances with `seed + i`, so different policies face the same attacks.
pub fn evaluate(
    env: &mut CascadeEnv,
    policy: &mut Policy<'_>,
    episodes: usize,
    seed: u64,
) -> Result<EvaluationReport, AgentError> {
    let mut report = EvaluationReport {
        episodes,
        ..EvaluationReport::default()
    };
    for i in 0..episodes {
        env.reseed(seed.wrapping_add(i as u64));
        let mut out = env.reset()?;
        while !out.terminal {
            let a = policy.choose(&out.state)?;
            out = env.step(a)?;
        }
        let rec = EpisodeRecord::from_log(i + 1, env.log());
        if rec.result == EpisodeResult::Win {
            report.wins += 1;
        }
        report.avg_reward += rec.reward;
        report.records.push(rec);
    }
    if episodes > 0 {
        report.win_rate = report.wins as f64 / episodes as f64;
        report.avg_reward /= episodes as f64;
    }
    Ok(report)
}
