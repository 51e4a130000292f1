//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod rl;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use gridcascade::case_io::{BusRole, Network};
use gridcascade::power_flow::PowerFlowSolution;
use num_complex::Complex64;

pub fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.json"))
}

fn index(net: &Network) -> HashMap<u32, usize> {
    net.buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id, i))
        .collect()
}

/// Dense complex bus admittance matrix of the π model with off-nominal taps.
pub fn ybus(net: &Network) -> Vec<Vec<Complex64>> {
    let n = net.buses.len();
    let idx = index(net);
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for br in net.branches.iter().filter(|b| b.in_service) {
        let (f, t) = (idx[&br.from_bus], idx[&br.to_bus]);
        let series = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let half = Complex64::new(0.0, br.b / 2.0);
        let a = br.tap_ratio;
        y[f][f] += (series + half) / (a * a);
        y[t][t] += series + half;
        y[f][t] -= series / a;
        y[t][f] -= series / a;
    }
    for (i, bus) in net.buses.iter().enumerate() {
        y[i][i] += Complex64::new(bus.gs, bus.bs);
    }
    y
}

/// Gauss-Seidel AC power flow. Returns bus voltage phasors, or `None` if the
/// update has not settled below `tol` within `max_iter` sweeps.
pub fn gauss_seidel(net: &Network, tol: f64, max_iter: usize) -> Option<Vec<Complex64>> {
    let n = net.buses.len();
    let idx = index(net);
    let y = ybus(net);
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut has_gen = vec![false; n];
    for g in net.generators.iter().filter(|g| g.in_service) {
        p[idx[&g.bus]] += g.p_dispatch;
        has_gen[idx[&g.bus]] = true;
    }
    for l in &net.loads {
        p[idx[&l.bus]] += l.p_demand * l.served_fraction;
        q[idx[&l.bus]] += l.q_demand * l.served_fraction;
    }
    let kind: Vec<BusRole> = net
        .buses
        .iter()
        .zip(&has_gen)
        .map(|(b, &g)| match b.role {
            BusRole::Pv if !g => BusRole::Pq,
            r => r,
        })
        .collect();
    let mut v: Vec<Complex64> = net
        .buses
        .iter()
        .zip(&kind)
        .map(|(b, k)| match k {
            BusRole::Pq => Complex64::new(1.0, 0.0),
            _ => Complex64::new(b.v_setpoint, 0.0),
        })
        .collect();
    for _ in 0..max_iter {
        let mut change: f64 = 0.0;
        for i in 0..n {
            if kind[i] == BusRole::Slack {
                continue;
            }
            let sum: Complex64 = (0..n).filter(|&k| k != i).map(|k| y[i][k] * v[k]).sum();
            let qi = if kind[i] == BusRole::Pv {
                -(v[i].conj() * (sum + y[i][i] * v[i])).im
            } else {
                q[i]
            };
            let s = Complex64::new(p[i], -qi);
            let mut next = (s / v[i].conj() - sum) / y[i][i];
            if kind[i] == BusRole::Pv {
                next = next / next.norm() * net.buses[i].v_setpoint;
            }
            change = change.max((next - v[i]).norm());
            v[i] = next;
        }
        if change < tol {
            return Some(v);
        }
    }
    None
}

/// Largest nodal imbalance |p_k − Σ outgoing flows| of a DC solution.
pub fn dc_kcl_residual(net: &Network, sol: &PowerFlowSolution) -> f64 {
    let idx = index(net);
    let mut out = vec![0.0; net.buses.len()];
    for (br, &f) in net.branches.iter().zip(&sol.branch_flow_p) {
        out[idx[&br.from_bus]] += f;
        out[idx[&br.to_bus]] -= f;
    }
    out.iter()
        .zip(&sol.p_inj)
        .map(|(o, p)| (p - o).abs())
        .fold(0.0, f64::max)
}
