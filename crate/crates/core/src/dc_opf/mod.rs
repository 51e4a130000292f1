//! DC optimal power flow with load shedding.
//!
//! Decision variables are the outputs of in-service generators and the
//! injections of all loads (`P_d ≤ p ≤ 0`). The objective charges the
//! linear generation cost plus the shedding cost `d·(p − P_d)`, subject to
//! power balance and PTDF-based branch limits.

mod lp;
mod ptdf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_io::Network;
use crate::power_flow::PowerFlowError;

pub use lp::{solve_lp, solve_lp_with, LinearProgram, LpSolution, LpStatus, SimplexOptions};
pub use ptdf::{compute_ptdf, PtdfMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpfError {
    #[error(transparent)]
    Network(#[from] PowerFlowError),
    #[error("effective limits have {got} entries, network has {expected} branches")]
    LimitCount { expected: usize, got: usize },
    #[error("cannot apply a {0:?} dispatch")]
    NotOptimal(DispatchStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchStatus {
    Optimal,
    Infeasible,
    /// The simplex hit its pivot budget; callers treat it like infeasibility.
    IterationLimit,
}

impl DispatchStatus {
    pub fn is_optimal(self) -> bool {
        self == Self::Optimal
    }
}

/// The LP together with the variable/row bookkeeping needed to map back.
#[derive(Debug, Clone)]
pub struct OpfModel {
    pub lp: LinearProgram<f64>,
    /// Positions in `Network::generators` of the generator variables.
    pub gens: Vec<usize>,
    /// Positions in `Network::loads` of the load variables (after the generators).
    pub loads: Vec<usize>,
    /// Branch positions whose flow is constrained; each owns two inequality rows.
    pub monitored: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchResult {
    pub status: DispatchStatus,
    /// Per generator of the network; out-of-service units read 0.
    pub gen_dispatch: Vec<f64>,
    /// Per load of the network (≤ 0).
    pub load_dispatch: Vec<f64>,
    pub objective: f64,
    /// Σ (p_j − P_dj), the shed demand in pu.
    pub shed_total: f64,
}

/// Formulate the DC-OPF. `effective_limits` holds one entry per branch;
/// branches with a non-positive limit are left unconstrained.
pub fn build_opf(net: &Network, effective_limits: &[f64]) -> Result<OpfModel, OpfError> {
    if effective_limits.len() != net.n_branches() {
        return Err(OpfError::LimitCount {
            expected: net.n_branches(),
            got: effective_limits.len(),
        });
    }
    let slack = net.slack_id().ok_or(PowerFlowError::NoSlack)?;
    let ptdf = compute_ptdf(net, slack)?;
    let idx = net.bus_index();

    let gens: Vec<usize> = (0..net.generators.len())
        .filter(|&i| net.generators[i].in_service)
        .collect();
    let loads: Vec<usize> = (0..net.loads.len()).collect();
    let nv = gens.len() + loads.len();
    let mut lower = Vec::with_capacity(nv);
    let mut upper = Vec::with_capacity(nv);
    let mut cost = Vec::with_capacity(nv);
    let mut var_bus = Vec::with_capacity(nv);
    let mut offset = 0.0;
    for &g in &gens {
        let gen = &net.generators[g];
        lower.push(gen.p_min);
        upper.push(gen.p_max);
        cost.push(gen.cost_coeff);
        var_bus.push(idx[&gen.bus]);
    }
    for &j in &loads {
        let load = &net.loads[j];
        lower.push(load.p_demand);
        upper.push(0.0);
        cost.push(load.shed_cost);
        var_bus.push(idx[&load.bus]);
        offset -= load.shed_cost * load.p_demand;
    }
    let mut lp = LinearProgram::new(lower, upper, cost);
    lp.objective_offset = offset;
    lp.add_eq(vec![1.0; nv], 0.0);

    let monitored: Vec<usize> = net
        .branches
        .iter()
        .enumerate()
        .filter(|(l, br)| br.in_service && effective_limits[*l] > 0.0)
        .map(|(l, _)| l)
        .collect();
    for &l in &monitored {
        let row: Vec<f64> = var_bus.iter().map(|&k| ptdf.entries[(l, k)]).collect();
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        lp.add_le(row, effective_limits[l]);
        lp.add_le(neg, effective_limits[l]);
    }
    Ok(OpfModel {
        lp,
        gens,
        loads,
        monitored,
    })
}

impl OpfModel {
    /// Map an LP solution back onto the network's generators and loads.
    pub fn dispatch(&self, net: &Network, sol: &LpSolution<f64>) -> DispatchResult {
        let status = match sol.status {
            LpStatus::Optimal => DispatchStatus::Optimal,
            LpStatus::IterationLimit => DispatchStatus::IterationLimit,
            LpStatus::Infeasible | LpStatus::Unbounded => DispatchStatus::Infeasible,
        };
        let mut gen_dispatch = vec![0.0; net.generators.len()];
        let mut load_dispatch: Vec<f64> = net.loads.iter().map(|l| l.p_demand).collect();
        if status.is_optimal() {
            for (k, &g) in self.gens.iter().enumerate() {
                gen_dispatch[g] = sol.x[k];
            }
            for (k, &j) in self.loads.iter().enumerate() {
                load_dispatch[j] = sol.x[self.gens.len() + k];
            }
        }
        let shed_total = if status.is_optimal() {
            net.loads
                .iter()
                .zip(&load_dispatch)
                .map(|(l, &p)| p - l.p_demand)
                .sum()
        } else {
            0.0
        };
        DispatchResult {
            status,
            gen_dispatch,
            load_dispatch,
            objective: if status.is_optimal() {
                sol.objective
            } else {
                f64::NAN
            },
            shed_total,
        }
    }
}

/// Build and solve the DC-OPF in one go.
pub fn solve_opf(net: &Network, effective_limits: &[f64]) -> Result<DispatchResult, OpfError> {
    let model = build_opf(net, effective_limits)?;
    let sol = solve_lp(&model.lp);
    Ok(model.dispatch(net, &sol))
}

/// Write an optimal dispatch into the network's operating state.
pub fn apply_dispatch(net: &mut Network, d: &DispatchResult) -> Result<(), OpfError> {
    if !d.status.is_optimal() {
        return Err(OpfError::NotOptimal(d.status));
    }
    for (g, &p) in net.generators.iter_mut().zip(&d.gen_dispatch) {
        if g.in_service {
            g.p_dispatch = p;
        }
    }
    for (l, &p) in net.loads.iter_mut().zip(&d.load_dispatch) {
        l.served_fraction = if l.p_demand < 0.0 {
            (p / l.p_demand).clamp(0.0, 1.0)
        } else {
            1.0
        };
    }
    Ok(())
}

/// Independent feasibility audit of a dispatch: bounds, balance and flow
/// limits, each within `tol`. Returns one line per violation.
pub fn check_dispatch(
    net: &Network,
    effective_limits: &[f64],
    d: &DispatchResult,
    tol: f64,
) -> Vec<String> {
    let mut out = Vec::new();
    let idx = net.bus_index();
    let mut p = vec![0.0; net.n_buses()];
    for (i, (g, &pg)) in net.generators.iter().zip(&d.gen_dispatch).enumerate() {
        if !g.in_service {
            if pg != 0.0 {
                out.push(format!(
                    "generator {}: out of service but dispatched",
                    i + 1
                ));
            }
            continue;
        }
        if pg < g.p_min - tol || pg > g.p_max + tol {
            out.push(format!(
                "generator {}: {pg} outside [{}, {}]",
                i + 1,
                g.p_min,
                g.p_max
            ));
        }
        p[idx[&g.bus]] += pg;
    }
    for (j, (l, &pd)) in net.loads.iter().zip(&d.load_dispatch).enumerate() {
        if pd < l.p_demand - tol || pd > tol {
            out.push(format!("load {}: {pd} outside [{}, 0]", j + 1, l.p_demand));
        }
        p[idx[&l.bus]] += pd;
    }
    let balance: f64 = p.iter().sum();
    if balance.abs() >= tol {
        out.push(format!("power balance residual {balance}"));
    }
    match crate::power_flow::dc_flows_for_injections(net, &p) {
        Ok(flows) => {
            for (l, (&f, &lim)) in flows.iter().zip(effective_limits).enumerate() {
                if net.branches[l].in_service && lim > 0.0 && f.abs() > lim + tol {
                    out.push(format!(
                        "branch {}: flow {f} exceeds {lim}",
                        net.branches[l].id
                    ));
                }
            }
        }
        Err(e) => out.push(format!("flow check failed: {e}")),
    }
    out
}
