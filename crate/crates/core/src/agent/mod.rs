//! Value-based agents: ε-greedy action selection, SARSA with a shallow
//! state-action network and Q-learning with a convolutional per-action
//! network, trained online without replay or target networks.

mod policy;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade_env::{EnvError, ACTION_VALUES};
use crate::neural::{to_image, NeuralError, QNetwork};

pub use policy::{argmax, epsilon_greedy, policy_probabilities, Baseline, BaselinePolicy};
pub use train::{
    evaluate, train, EpisodeRecord, EvaluationReport, Policy, TrainingMetrics, WINDOW,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SarsaShallow,
    QlearningDeep,
}

impl Algorithm {
    pub fn default_learning_rate(self) -> f64 {
        match self {
            Algorithm::SarsaShallow => 1e-3,
            Algorithm::QlearningDeep => 1e-4,
        }
    }
}

fn default_init_scale() -> f64 {
    0.05
}
fn default_filters() -> usize {
    8
}
fn default_kernel() -> usize {
    5
}
fn default_stride() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub epsilon: f64,
    /// Defaults per algorithm when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    pub episodes: usize,
    pub rng_seed: u64,
    /// Hidden width; 10 for the shallow network and 64 for the deep one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_units: Option<usize>,
    /// Half-width of the uniform weight initialisation.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default = "default_filters")]
    pub conv_filters: usize,
    #[serde(default = "default_kernel")]
    pub conv_kernel: usize,
    #[serde(default = "default_stride")]
    pub conv_stride: usize,
}

impl AgentConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            gamma: 0.7,
            epsilon: 1e-4,
            learning_rate: None,
            episodes: 400,
            rng_seed: 0,
            hidden_units: None,
            init_scale: default_init_scale(),
            conv_filters: default_filters(),
            conv_kernel: default_kernel(),
            conv_stride: default_stride(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
            .unwrap_or_else(|| self.algorithm.default_learning_rate())
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_units.unwrap_or(match self.algorithm {
            Algorithm::SarsaShallow => 10,
            Algorithm::QlearningDeep => 64,
        })
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(self.learning_rate() > 0.0 && self.learning_rate().is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.hidden_units() == 0 {
            return bad("hidden_units must be positive");
        }
        if !(self.init_scale >= 0.0) {
            return bad("init_scale must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("non-finite {what} in episode {episode}")]
    NonFinite { episode: usize, what: &'static str },
    #[error("network does not fit the {algorithm:?} algorithm: {message}")]
    Mismatch {
        algorithm: Algorithm,
        message: String,
    },
}

/// The action input of the shallow network: the candidate scale mapped onto
/// [-1, 1], so that every action carries gradient to its input weight.
pub fn normalized_action(index: usize) -> f64 {
    let lo = ACTION_VALUES[0];
    let hi = ACTION_VALUES[ACTION_VALUES.len() - 1];
    2.0 * (ACTION_VALUES[index] - lo) / (hi - lo) - 1.0
}

/// Network input for `state` (and, for the shallow network, `action`).
pub fn network_input(algorithm: Algorithm, state: &[f64], action: usize) -> Vec<f64> {
    match algorithm {
        Algorithm::SarsaShallow => {
            let mut x = Vec::with_capacity(state.len() + 1);
            x.extend_from_slice(state);
            x.push(normalized_action(action));
            x
        }
        Algorithm::QlearningDeep => to_image(state).pixels,
    }
}

/// Value of every candidate action in `state`.
pub fn q_values(
    net: &QNetwork<f64>,
    algorithm: Algorithm,
    state: &[f64],
) -> Result<Vec<f64>, AgentError> {
    match algorithm {
        Algorithm::SarsaShallow => (0..ACTION_VALUES.len())
            .map(|a| Ok(net.predict(&network_input(algorithm, state, a))?[0]))
            .collect(),
        Algorithm::QlearningDeep => Ok(net.predict(&network_input(algorithm, state, 0))?),
    }
}

pub fn td_target_sarsa(reward: f64, gamma: f64, q_next_chosen: f64, terminal: bool) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * q_next_chosen
    }
}

pub fn td_target_qlearning(reward: f64, gamma: f64, q_next: &[f64], terminal: bool) -> f64 {
    if terminal {
        return reward;
    }
    let best = q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    reward + gamma * best
}

/// One SGD step on `½ (target − y[output])²` for a single network output.
/// Returns the output value before the step.
pub fn sgd_towards(
    net: &mut QNetwork<f64>,
    input: &[f64],
    output: usize,
    target: f64,
    learning_rate: f64,
) -> Result<f64, AgentError> {
    if !target.is_finite() {
        return Err(NeuralError::NonFinite("target").into());
    }
    let (y, cache) = net.forward(input)?;
    if output >= y.len() {
        return Err(NeuralError::Dimension {
            expected: y.len(),
            got: output + 1,
        }
        .into());
    }
    let mut grad = vec![0.0; y.len()];
    grad[output] = y[output] - target;
    if grad[output] == 0.0 || learning_rate == 0.0 {
        return Ok(y[output]);
    }
    let grads = net.backward(&cache, &grad)?;
    net.sgd_step(&grads, learning_rate)?;
    Ok(y[output])
}

/// Move Q(state, action) toward `target` by one SGD step.
pub fn td_update(
    net: &mut QNetwork<f64>,
    algorithm: Algorithm,
    state: &[f64],
    action: usize,
    target: f64,
    learning_rate: f64,
) -> Result<f64, AgentError> {
    let input = network_input(algorithm, state, action);
    let output = match algorithm {
        Algorithm::SarsaShallow => 0,
        Algorithm::QlearningDeep => action,
    };
    sgd_towards(net, &input, output, target, learning_rate)
}

/// A Q-network together with the algorithm that reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub algorithm: Algorithm,
    pub network: QNetwork<f64>,
}

impl Agent {
    /// Fresh network for states of length `state_len`, weights drawn from `rng`.
    pub fn new<R: Rng + ?Sized>(
        cfg: &AgentConfig,
        state_len: usize,
        rng: &mut R,
    ) -> Result<Self, AgentError> {
        cfg.validate()?;
        let mut network = match cfg.algorithm {
            Algorithm::SarsaShallow => QNetwork::shallow(state_len + 1, cfg.hidden_units())?,
            Algorithm::QlearningDeep => {
                let side = to_image(&vec![0.0; state_len]).side;
                let kernel = cfg.conv_kernel.min(side).max(1);
                QNetwork::deep_conv(
                    side,
                    cfg.conv_filters,
                    kernel,
                    cfg.conv_stride,
                    cfg.hidden_units(),
                )?
            }
        };
        network.init_uniform(rng, cfg.init_scale);
        Ok(Self {
            algorithm: cfg.algorithm,
            network,
        })
    }

    pub fn from_network(algorithm: Algorithm, network: QNetwork<f64>) -> Result<Self, AgentError> {
        use crate::neural::{Head, Shape};
        let ok = match (algorithm, network.head(), network.input_shape()) {
            (Algorithm::SarsaShallow, Head::Scalar, Shape::Vector { .. }) => true,
            (Algorithm::QlearningDeep, Head::PerAction, Shape::Image { channels: 1, .. }) => true,
            _ => false,
        };
        if !ok {
            return Err(AgentError::Mismatch {
                algorithm,
                message: format!("{:?} head over {:?}", network.head(), network.input_shape()),
            });
        }
        Ok(Self { algorithm, network })
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        q_values(&self.network, self.algorithm, state)
    }

    pub fn greedy_action(&self, state: &[f64]) -> Result<usize, AgentError> {
        Ok(argmax(&self.q_values(state)?))
    }
}
