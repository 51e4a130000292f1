//! DC and Newton-Raphson AC power flow, island detection and branch loading.

mod ac;
mod dc;
mod islands;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_io::{BusId, Network};

pub use ac::{ac_power_flow, total_losses, AcOptions};
pub(crate) use dc::reduced_b;
pub use dc::{
    build_b_matrix, dc_flows_for_injections, dc_power_flow, dc_susceptance, nodal_injections,
    ReducedB,
};
pub use islands::{find_islands, slack_component, IslandReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowModel {
    Ac,
    Dc,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("network has no slack bus")]
    NoSlack,
    #[error(
        "network is split into {components} islands; run find_islands and solve the energized part"
    )]
    Islanded { components: usize },
    #[error("warm start has {got} buses, network has {expected}")]
    StartMismatch { expected: usize, got: usize },
}

/// Bus and branch quantities from one power-flow solve, indexed like
/// `Network::buses` and `Network::branches`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub converged: bool,
    pub iterations: usize,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
    /// Active flow at the from end.
    pub branch_flow_p: Vec<f64>,
    /// Apparent flow, the larger of the two ends (|P| under the DC model).
    pub branch_flow_mva: Vec<f64>,
    /// Flow over the branch's own rating; 0 for unrated branches.
    pub loading: Vec<f64>,
}

impl PowerFlowSolution {
    /// Recompute `loading` against other limits (for example scaled ratings).
    pub fn with_ratings(mut self, ratings: &[f64]) -> Self {
        self.loading = branch_loading(&self, ratings);
        self
    }

    /// Re-index a solution of `sub` (a restriction of `full`) onto `full`.
    /// Buses outside `sub` read as de-energized: zero voltage, angle and injection.
    pub fn expand(&self, sub: &Network, full: &Network) -> PowerFlowSolution {
        let bi = sub.bus_index();
        let n = full.n_buses();
        let m = full.n_branches();
        let mut out = PowerFlowSolution {
            converged: self.converged,
            iterations: self.iterations,
            v: vec![0.0; n],
            theta: vec![0.0; n],
            p_inj: vec![0.0; n],
            q_inj: vec![0.0; n],
            branch_flow_p: vec![0.0; m],
            branch_flow_mva: vec![0.0; m],
            loading: vec![0.0; m],
        };
        for (i, b) in full.buses.iter().enumerate() {
            if let Some(&k) = bi.get(&b.id) {
                out.v[i] = self.v[k];
                out.theta[i] = self.theta[k];
                out.p_inj[i] = self.p_inj[k];
                out.q_inj[i] = self.q_inj[k];
            }
        }
        for (k, br) in sub.branches.iter().enumerate() {
            if let Some(l) = full.branch_position(br.id) {
                out.branch_flow_p[l] = self.branch_flow_p[k];
                out.branch_flow_mva[l] = self.branch_flow_mva[k];
                out.loading[l] = self.loading[k];
            }
        }
        out
    }

    pub fn bus_value(&self, net: &Network, id: BusId) -> Option<(f64, f64)> {
        net.buses
            .iter()
            .position(|b| b.id == id)
            .map(|i| (self.v[i], self.theta[i]))
    }
}

/// `|flow| / rating` per branch; branches with a non-positive rating report 0.
pub fn branch_loading(sol: &PowerFlowSolution, ratings: &[f64]) -> Vec<f64> {
    sol.branch_flow_mva
        .iter()
        .zip(ratings)
        .map(|(&f, &r)| if r > 0.0 { f.abs() / r } else { 0.0 })
        .collect()
}

/// Base ratings of every branch, in branch order.
pub fn base_ratings(net: &Network) -> Vec<f64> {
    net.branches.iter().map(|b| b.rating).collect()
}

pub fn solve(
    net: &Network,
    model: FlowModel,
    start: Option<&PowerFlowSolution>,
) -> Result<PowerFlowSolution, PowerFlowError> {
    match model {
        FlowModel::Dc => dc_power_flow(net),
        FlowModel::Ac => ac_power_flow(net, start, &AcOptions::default()),
    }
}
