use crate::case_io::Network;
use crate::linalg::{Lu, Matrix};

use super::{base_ratings, branch_loading, find_islands, PowerFlowError, PowerFlowSolution};

/// Series susceptance used by the DC model, `1 / (x · tap)`.
pub fn dc_susceptance(x: f64, tap: f64) -> f64 {
    1.0 / (x * tap)
}

/// Nodal susceptance matrix with the slack row and column removed.
#[derive(Debug, Clone)]
pub struct ReducedB {
    pub matrix: Matrix<f64>,
    /// Bus positions (into `Network::buses`) of the matrix rows, in order.
    pub buses: Vec<usize>,
    pub slack: usize,
}

pub fn build_b_matrix(net: &Network) -> Result<ReducedB, PowerFlowError> {
    let slack = net.slack_index().ok_or(PowerFlowError::NoSlack)?;
    Ok(reduced_b(net, slack))
}

/// Reduced susceptance matrix with an arbitrary reference bus position.
pub(crate) fn reduced_b(net: &Network, slack: usize) -> ReducedB {
    let idx = net.bus_index();
    let n = net.n_buses();
    // position of each bus in the reduced ordering
    let mut red = vec![usize::MAX; n];
    let buses: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    for (k, &i) in buses.iter().enumerate() {
        red[i] = k;
    }
    let mut b = Matrix::zeros(n - 1, n - 1);
    for br in net.branches.iter().filter(|b| b.in_service) {
        let f = red[idx[&br.from_bus]];
        let t = red[idx[&br.to_bus]];
        let y = dc_susceptance(br.x, br.tap_ratio);
        if f != usize::MAX {
            b[(f, f)] += y;
        }
        if t != usize::MAX {
            b[(t, t)] += y;
        }
        if f != usize::MAX && t != usize::MAX {
            b[(f, t)] -= y;
            b[(t, f)] -= y;
        }
    }
    ReducedB {
        matrix: b,
        buses,
        slack,
    }
}

/// Net active injection per bus from in-service generator dispatch and served load.
pub fn nodal_injections(net: &Network) -> Vec<f64> {
    let idx = net.bus_index();
    let mut p = vec![0.0; net.n_buses()];
    for g in net.generators.iter().filter(|g| g.in_service) {
        p[idx[&g.bus]] += g.p_dispatch;
    }
    for l in &net.loads {
        p[idx[&l.bus]] += l.p_served();
    }
    p
}

fn angles(net: &Network, p: &[f64]) -> Result<Vec<f64>, PowerFlowError> {
    let islands = find_islands(net);
    if islands.components.len() > 1 {
        return Err(PowerFlowError::Islanded {
            components: islands.components.len(),
        });
    }
    let rb = build_b_matrix(net)?;
    let mut theta = vec![0.0; net.n_buses()];
    if rb.buses.is_empty() {
        return Ok(theta);
    }
    let rhs: Vec<f64> = rb.buses.iter().map(|&i| p[i]).collect();
    let lu = Lu::factor(rb.matrix).map_err(|_| PowerFlowError::Islanded { components: 2 })?;
    for (&i, t) in rb.buses.iter().zip(lu.solve(&rhs)) {
        theta[i] = t;
    }
    Ok(theta)
}

fn flows_from_angles(net: &Network, theta: &[f64]) -> Vec<f64> {
    let idx = net.bus_index();
    net.branches
        .iter()
        .map(|br| {
            if br.in_service {
                dc_susceptance(br.x, br.tap_ratio)
                    * (theta[idx[&br.from_bus]] - theta[idx[&br.to_bus]])
            } else {
                0.0
            }
        })
        .collect()
}

/// Branch flows for an arbitrary injection vector (the slack entry is ignored
/// and absorbs the imbalance).
pub fn dc_flows_for_injections(net: &Network, p: &[f64]) -> Result<Vec<f64>, PowerFlowError> {
    let theta = angles(net, p)?;
    Ok(flows_from_angles(net, &theta))
}

/// Linearised power flow: unit voltages, lossless branches, `B·θ = p`.
pub fn dc_power_flow(net: &Network) -> Result<PowerFlowSolution, PowerFlowError> {
    let mut p = nodal_injections(net);
    let theta = angles(net, &p)?;
    let flows = flows_from_angles(net, &theta);
    let idx = net.bus_index();
    let slack = net.slack_index().ok_or(PowerFlowError::NoSlack)?;
    // slack absorbs the imbalance: its injection equals its net outflow
    let mut out = 0.0;
    for (br, &f) in net.branches.iter().zip(&flows) {
        if idx[&br.from_bus] == slack {
            out += f;
        }
        if idx[&br.to_bus] == slack {
            out -= f;
        }
    }
    p[slack] = out;
    let mut sol = PowerFlowSolution {
        converged: true,
        iterations: 1,
        v: vec![1.0; net.n_buses()],
        theta,
        p_inj: p,
        q_inj: vec![0.0; net.n_buses()],
        branch_flow_mva: flows.iter().map(|f| f.abs()).collect(),
        branch_flow_p: flows,
        loading: Vec::new(),
    };
    sol.loading = branch_loading(&sol, &base_ratings(net));
    Ok(sol)
}
