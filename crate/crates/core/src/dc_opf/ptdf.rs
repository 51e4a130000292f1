use crate::case_io::{BusId, Network};
use crate::linalg::{Lu, Matrix};
use crate::power_flow::{dc_susceptance, find_islands, reduced_b, PowerFlowError};

/// Injection shift factors: `entries[(l, k)]` is the flow on branch `l`
/// caused by +1 pu injected at bus `k` and withdrawn at the reference bus.
#[derive(Debug, Clone)]
pub struct PtdfMatrix {
    pub entries: Matrix<f64>,
    pub slack: BusId,
}

impl PtdfMatrix {
    /// Branch flows for a full nodal injection vector.
    pub fn flows(&self, p: &[f64]) -> Vec<f64> {
        self.entries.mul_vec(p)
    }
}

pub fn compute_ptdf(net: &Network, slack: BusId) -> Result<PtdfMatrix, PowerFlowError> {
    let islands = find_islands(net);
    if islands.components.len() > 1 {
        return Err(PowerFlowError::Islanded {
            components: islands.components.len(),
        });
    }
    let idx = net.bus_index();
    let s = *idx.get(&slack).ok_or(PowerFlowError::NoSlack)?;
    let rb = reduced_b(net, s);
    let n = net.n_buses();
    let m = net.n_branches();
    let mut entries = Matrix::zeros(m, n);
    if rb.buses.is_empty() {
        return Ok(PtdfMatrix { entries, slack });
    }
    let lu = Lu::factor(rb.matrix).map_err(|_| PowerFlowError::Islanded { components: 2 })?;
    // sensitivity of every bus angle to a unit injection at each bus (slack row stays 0)
    let mut x = Matrix::zeros(n, n);
    let mut e = vec![0.0; rb.buses.len()];
    for (k, &bus_k) in rb.buses.iter().enumerate() {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[k] = 1.0;
        for (r, th) in lu.solve(&e).into_iter().enumerate() {
            x[(rb.buses[r], bus_k)] = th;
        }
    }
    for (l, br) in net.branches.iter().enumerate() {
        if !br.in_service {
            continue;
        }
        let (f, t) = (idx[&br.from_bus], idx[&br.to_bus]);
        let y = dc_susceptance(br.x, br.tap_ratio);
        for k in 0..n {
            entries[(l, k)] = y * (x[(f, k)] - x[(t, k)]);
        }
    }
    Ok(PtdfMatrix { entries, slack })
}
