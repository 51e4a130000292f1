//! Reinforcement-learning and neural-network oracles.

use gridcascade::agent::{
    epsilon_greedy, policy_probabilities, sgd_towards, td_target_qlearning, td_target_sarsa,
};
use gridcascade::neural::{Activation, Head, LayerSpec, Shape, ACTION_COUNT};
use gridcascade::QNet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Q(s, a) = w[s * actions + a] on one-hot inputs.
pub fn table(states: usize, actions: usize) -> QNet {
    let n = states * actions;
    QNet::new(
        Shape::Vector { len: n },
        vec![LayerSpec::Linear {
            inputs: n,
            outputs: 1,
        }],
        Head::Scalar,
    )
    .unwrap()
}

pub fn one_hot(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

// Deterministic chain: states 0, 1, 2; action 0 moves left (staying put at 0
// with reward 0.5), action 1 moves right; right from 2 ends the episode with
// reward 10.
pub const STATES: usize = 3;
pub const ACTIONS: usize = 2;
pub const GAMMA: f64 = 0.9;

pub fn chain_step(s: usize, a: usize) -> (f64, Option<usize>) {
    match (s, a) {
        (0, 0) => (0.5, Some(0)),
        (s, 0) => (0.0, Some(s - 1)),
        (2, 1) => (10.0, None),
        (s, _) => (0.0, Some(s + 1)),
    }
}

pub fn value_iteration() -> [[f64; ACTIONS]; STATES] {
    let mut q = [[0.0f64; ACTIONS]; STATES];
    for _ in 0..2000 {
        let mut next = q;
        for (s, row) in next.iter_mut().enumerate() {
            for (a, cell) in row.iter_mut().enumerate() {
                let (r, succ) = chain_step(s, a);
                *cell = r + succ.map_or(0.0, |t| GAMMA * q[t][0].max(q[t][1]));
            }
        }
        q = next;
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    Sarsa,
    Qlearning,
}

/// Runs `steps` updates with exploring starts (each episode begins at a
/// random state-action pair, then follows ε-greedy for at most 10 steps).
/// Returns the final table and the sequence of TD targets.
pub fn run_chain(
    rule: Rule,
    steps: usize,
    epsilon: f64,
    seed: u64,
) -> ([[f64; ACTIONS]; STATES], Vec<f64>) {
    let n = STATES * ACTIONS;
    let mut net = table(STATES, ACTIONS);
    let mut init = ChaCha8Rng::seed_from_u64(99);
    net.init_uniform(&mut init, 0.01);
    let q = |net: &QNet, s: usize| -> Vec<f64> {
        (0..ACTIONS)
            .map(|a| net.predict(&one_hot(n, s * ACTIONS + a)).unwrap()[0])
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets = Vec::with_capacity(steps);
    'outer: loop {
        let mut s = rng.gen_range(0..STATES);
        let mut a = rng.gen_range(0..ACTIONS);
        for _ in 0..10 {
            let (r, succ) = chain_step(s, a);
            let (target, next) = match succ {
                None => (td_target_sarsa(r, GAMMA, 0.0, true), None),
                Some(t) => {
                    let qt = q(&net, t);
                    let a2 = epsilon_greedy(&qt, epsilon, &mut rng);
                    let target = match rule {
                        Rule::Sarsa => td_target_sarsa(r, GAMMA, qt[a2], false),
                        Rule::Qlearning => td_target_qlearning(r, GAMMA, &qt, false),
                    };
                    (target, Some((t, a2)))
                }
            };
            sgd_towards(&mut net, &one_hot(n, s * ACTIONS + a), 0, target, 0.5).unwrap();
            targets.push(target);
            if targets.len() == steps {
                break 'outer;
            }
            match next {
                Some((t, a2)) => {
                    s = t;
                    a = a2;
                }
                None => break,
            }
        }
    }
    let mut out = [[0.0; ACTIONS]; STATES];
    for (s, row) in out.iter_mut().enumerate() {
        row.copy_from_slice(&q(&net, s));
    }
    (out, targets)
}

pub fn conv_net(channels: usize) -> QNet {
    QNet::new(
        Shape::Image { channels, side: 6 },
        vec![
            LayerSpec::Conv2d {
                filters: 3,
                kernel: 3,
                stride: 2,
            },
            LayerSpec::Activation {
                function: Activation::Relu,
            },
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 12,
                outputs: 5,
            },
            LayerSpec::Activation {
                function: Activation::Tanh,
            },
            LayerSpec::Dense {
                inputs: 5,
                outputs: ACTION_COUNT,
            },
        ],
        Head::PerAction,
    )
    .unwrap()
}

pub fn linear_net() -> QNet {
    QNet::new(
        Shape::Vector { len: 7 },
        vec![
            LayerSpec::Linear {
                inputs: 7,
                outputs: 4,
            },
            LayerSpec::Activation {
                function: Activation::Tanh,
            },
            LayerSpec::Linear {
                inputs: 4,
                outputs: 1,
            },
        ],
        Head::Scalar,
    )
    .unwrap()
}

/// One network per layer kind: dense, linear, conv2d, relu, tanh, flatten.
pub fn zoo() -> Vec<QNet> {
    vec![
        QNet::shallow(6, 5).unwrap(),
        QNet::deep_dense(6, 8).unwrap(),
        linear_net(),
        conv_net(1),
        conv_net(2),
        QNet::deep_conv(7, 2, 3, 2, 6).unwrap(),
    ]
}

fn loss(net: &QNet, x: &[f64], g: &[f64]) -> f64 {
    net.predict(x)
        .unwrap()
        .iter()
        .zip(g)
        .map(|(y, w)| y * w)
        .sum()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Largest relative error between backprop and central differences of
/// `L = Σ g_k y_k`, over all parameters and all inputs.
pub fn gradient_check(net: &mut QNet, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    net.init_uniform(&mut rng, 0.5);
    let n_in = net.input_shape().len();
    let x: Vec<f64> = (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let width = net.head().width();
    let g: Vec<f64> = (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (_, cache) = net.forward(&x).unwrap();
    let grads = net.backward(&cache, &g).unwrap();
    let analytic: Vec<f64> = grads
        .weights
        .iter()
        .zip(&grads.biases)
        .flat_map(|(w, b)| w.iter().chain(b).copied())
        .collect();
    let h = 1e-6;
    let base = net.params();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + h;
        net.set_params(&p).unwrap();
        let up = loss(net, &x, &g);
        p[k] = base[k] - h;
        net.set_params(&p).unwrap();
        let down = loss(net, &x, &g);
        worst = worst.max(rel_err(analytic[k], (up - down) / (2.0 * h)));
    }
    net.set_params(&base).unwrap();
    for i in 0..n_in {
        let mut xp = x.clone();
        xp[i] += h;
        let up = loss(net, &xp, &g);
        xp[i] -= 2.0 * h;
        let down = loss(net, &xp, &g);
        worst = worst.max(rel_err(grads.input[i], (up - down) / (2.0 * h)));
    }
    worst
}

/// Largest deviation, in binomial standard deviations, of 10⁵ ε-greedy draws
/// from the two-level distribution.
pub fn epsilon_greedy_deviation(epsilon: f64, seed: u64) -> f64 {
    const DRAWS: usize = 100_000;
    let values = [0.1, 0.4, -0.2, 0.9, 0.0, 0.3, 0.5, 0.2, 0.8, 0.7];
    let probs = policy_probabilities(&values, epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0usize; 10];
    for _ in 0..DRAWS {
        counts[epsilon_greedy(&values, epsilon, &mut rng)] += 1;
    }
    let mut worst: f64 = 0.0;
    for (a, &c) in counts.iter().enumerate() {
        let p = probs[a];
        let dev = (c as f64 - DRAWS as f64 * p).abs();
        let sigma = (DRAWS as f64 * p * (1.0 - p)).sqrt();
        // a degenerate distribution must be hit exactly
        worst = worst.max(if sigma == 0.0 {
            if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            dev / sigma
        });
    }
    worst
}

/// Largest |Q − Q*| after `steps` updates of `rule` on the chain.
pub fn chain_error(rule: Rule, steps: usize) -> f64 {
    let exact = value_iteration();
    let (q, _) = run_chain(rule, steps, 0.0, 5);
    let mut worst: f64 = 0.0;
    for s in 0..STATES {
        for a in 0..ACTIONS {
            worst = worst.max((q[s][a] - exact[s][a]).abs());
        }
    }
    worst
}
