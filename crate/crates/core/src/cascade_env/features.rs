use crate::case_io::Network;
use crate::power_flow::PowerFlowSolution;

pub fn feature_len(net: &Network) -> usize {
    net.n_branches() + 4 * net.n_buses()
}

/// State vector: branch loadings (by branch id, out-of-service branches 0),
/// then V, θ, P, Q for each bus in ascending id order.
///
/// `sol` must be indexed like `net`.
pub fn featurize(sol: &PowerFlowSolution, net: &Network) -> Vec<f64> {
    let mut out = Vec::with_capacity(feature_len(net));
    let mut branches: Vec<usize> = (0..net.n_branches()).collect();
    branches.sort_by_key(|&l| net.branches[l].id);
    for l in branches {
        out.push(if net.branches[l].in_service {
            sol.loading[l]
        } else {
            0.0
        });
    }
    let mut buses: Vec<usize> = (0..net.n_buses()).collect();
    buses.sort_by_key(|&i| net.buses[i].id);
    for i in buses {
        out.extend([sol.v[i], sol.theta[i], sol.p_inj[i], sol.q_inj[i]]);
    }
    out
}
