//! Grid case model, MATPOWER-subset reader/writer and validation.
//!
//! All quantities are stored per unit on `base_mva`. Loads are negative
//! injections, so a 50 MW demand on a 100 MVA base is `p_demand = -0.5`.

mod parse;
mod serialize;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::parse_case;
pub use serialize::serialize_case;

pub type BusId = u32;
pub type BranchId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusRole {
    Slack,
    Pv,
    Pq,
}

impl BusRole {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            3 => Some(Self::Slack),
            2 => Some(Self::Pv),
            1 => Some(Self::Pq),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        match self {
            Self::Slack => 3,
            Self::Pv => 2,
            Self::Pq => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub role: BusRole,
    /// Voltage magnitude setpoint in pu. Held for slack and pv buses; for pq
    /// buses it is the stored operating magnitude and only informational.
    pub v_setpoint: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Shunt conductance (pu, injected at 1 pu voltage).
    pub gs: f64,
    /// Shunt susceptance (pu, injected at 1 pu voltage).
    pub bs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: BranchId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance.
    pub b: f64,
    /// Off-nominal tap on the from side; 1.0 for lines.
    pub tap_ratio: f64,
    /// Continuous rating in pu; 0 means unspecified.
    pub rating: f64,
    pub in_service: bool,
    pub is_transformer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: BusId,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Linear cost per pu of output.
    pub cost_coeff: f64,
    pub in_service: bool,
    pub p_dispatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: BusId,
    /// Normal active demand as an injection (≤ 0).
    pub p_demand: f64,
    /// Normal reactive demand as an injection.
    pub q_demand: f64,
    /// Cost per pu of shed demand.
    pub shed_cost: f64,
    pub served_fraction: f64,
}

impl Load {
    /// Active injection at the current served fraction.
    pub fn p_served(&self) -> f64 {
        self.p_demand * self.served_fraction
    }

    pub fn q_served(&self) -> f64 {
        self.q_demand * self.served_fraction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{element} references undeclared bus {bus}")]
    UnknownBus { element: String, bus: BusId },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: BusId },
    #[error("missing required section mpc.{0}")]
    MissingSection(&'static str),
    #[error("unsupported at line {line}: {message}")]
    Unsupported { line: usize, message: String },
    #[error("invalid network: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl Network {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    /// Map from bus id to position in `buses`.
    pub fn bus_index(&self) -> HashMap<BusId, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect()
    }

    pub fn slack_index(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.role == BusRole::Slack)
    }

    pub fn slack_id(&self) -> Option<BusId> {
        self.slack_index().map(|i| self.buses[i].id)
    }

    pub fn branch_position(&self, id: BranchId) -> Option<usize> {
        self.branches.iter().position(|b| b.id == id)
    }

    /// Sum of normal demand magnitudes (pu).
    pub fn total_demand(&self) -> f64 {
        self.loads.iter().map(|l| -l.p_demand).sum()
    }

    /// Copy containing only the buses flagged in `keep`, with the branches,
    /// generators and loads lying entirely inside that set. Ids are preserved.
    pub fn restricted(&self, keep: &[bool]) -> Network {
        assert_eq!(keep.len(), self.buses.len());
        let kept: HashSet<BusId> = self
            .buses
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(b, _)| b.id)
            .collect();
        Network {
            base_mva: self.base_mva,
            buses: self
                .buses
                .iter()
                .filter(|b| kept.contains(&b.id))
                .cloned()
                .collect(),
            branches: self
                .branches
                .iter()
                .filter(|br| kept.contains(&br.from_bus) && kept.contains(&br.to_bus))
                .cloned()
                .collect(),
            generators: self
                .generators
                .iter()
                .filter(|g| kept.contains(&g.bus))
                .cloned()
                .collect(),
            loads: self
                .loads
                .iter()
                .filter(|l| kept.contains(&l.bus))
                .cloned()
                .collect(),
        }
    }
}

/// Check every structural invariant; each entry names the offending element.
pub fn validate(net: &Network) -> Vec<String> {
    let mut out = Vec::new();
    if !(net.base_mva > 0.0) {
        out.push(format!("base_mva must be positive, got {}", net.base_mva));
    }
    let slacks: Vec<BusId> = net
        .buses
        .iter()
        .filter(|b| b.role == BusRole::Slack)
        .map(|b| b.id)
        .collect();
    if slacks.len() != 1 {
        out.push(format!(
            "exactly one slack bus required, found {} ({:?})",
            slacks.len(),
            slacks
        ));
    }
    let mut bus_ids = HashSet::new();
    for b in &net.buses {
        if !bus_ids.insert(b.id) {
            out.push(format!("bus {}: duplicate id", b.id));
        }
        if b.role != BusRole::Pq && !(b.v_setpoint > 0.0) {
            out.push(format!("bus {}: voltage setpoint must be positive", b.id));
        }
    }
    let mut branch_ids = HashSet::new();
    for br in &net.branches {
        let tag = format!("branch {}", br.id);
        if !branch_ids.insert(br.id) {
            out.push(format!("{tag}: duplicate id"));
        }
        for end in [br.from_bus, br.to_bus] {
            if !bus_ids.contains(&end) {
                out.push(format!("{tag}: references undeclared bus {end}"));
            }
        }
        if br.x == 0.0 || !br.x.is_finite() {
            out.push(format!("{tag}: zero reactance"));
        }
        if br.from_bus == br.to_bus {
            out.push(format!("{tag}: from_bus equals to_bus"));
        }
        if !(br.rating >= 0.0) {
            out.push(format!("{tag}: negative rating"));
        }
        if !(br.tap_ratio > 0.0) {
            out.push(format!("{tag}: tap ratio must be positive"));
        }
    }
    for (i, g) in net.generators.iter().enumerate() {
        let tag = format!("generator {} at bus {}", i + 1, g.bus);
        if !bus_ids.contains(&g.bus) {
            out.push(format!("{tag}: references undeclared bus {}", g.bus));
        }
        if !(g.p_min <= g.p_max) {
            out.push(format!("{tag}: p_min exceeds p_max"));
        }
        if !(g.cost_coeff >= 0.0) {
            out.push(format!("{tag}: negative cost coefficient"));
        }
    }
    for (i, l) in net.loads.iter().enumerate() {
        let tag = format!("load {} at bus {}", i + 1, l.bus);
        if !bus_ids.contains(&l.bus) {
            out.push(format!("{tag}: references undeclared bus {}", l.bus));
        }
        if !(l.p_demand <= 0.0) {
            out.push(format!("{tag}: demand must be a non-positive injection"));
        }
        if !(l.shed_cost >= 0.0) {
            out.push(format!("{tag}: negative shed cost"));
        }
        if !(0.0..=1.0).contains(&l.served_fraction) {
            out.push(format!("{tag}: served fraction outside [0, 1]"));
        }
    }
    out
}
