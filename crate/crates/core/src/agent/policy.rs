use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::neural::ACTION_COUNT;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Selection probability of every action under ε-greedy: the argmax gets
/// `1 − ε + ε/|A|`, every other action `ε/|A|`.
pub fn policy_probabilities(values: &[f64], epsilon: f64) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let other = epsilon / n as f64;
    let mut p = vec![other; n];
    p[argmax(values)] = 1.0 - epsilon + other;
    p
}

/// Explore uniformly with probability ε, otherwise act greedily.
pub fn epsilon_greedy<R: Rng + ?Sized>(values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..values.len())
    } else {
        argmax(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Baseline {
    Random,
    Fixed(usize),
}

/// State-blind comparison policy.
#[derive(Debug, Clone)]
pub struct BaselinePolicy<R> {
    kind: Baseline,
    rng: R,
}

impl<R: Rng> BaselinePolicy<R> {
    pub fn new(kind: Baseline, rng: R) -> Self {
        Self { kind, rng }
    }

    pub fn choose(&mut self) -> usize {
        match self.kind {
            Baseline::Random => self.rng.gen_range(0..ACTION_COUNT),
            Baseline::Fixed(i) => i,
        }
    }
}
