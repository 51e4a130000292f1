use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::case_io::{BusId, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandReport {
    /// Connected components over in-service branches, each sorted by bus order.
    pub components: Vec<Vec<BusId>>,
    /// Whether each component holds at least one in-service generator.
    pub energized: Vec<bool>,
    /// Normal demand (pu, positive) located in non-energized components.
    pub deenergized_load: f64,
}

impl IslandReport {
    pub fn component_of(&self, bus: BusId) -> Option<usize> {
        self.components.iter().position(|c| c.contains(&bus))
    }
}

fn component_labels(net: &Network) -> Vec<usize> {
    let idx = net.bus_index();
    let n = net.n_buses();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for br in net.branches.iter().filter(|b| b.in_service) {
        if let (Some(&f), Some(&t)) = (idx.get(&br.from_bus), idx.get(&br.to_bus)) {
            adj[f].push(t);
            adj[t].push(f);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if label[w] == usize::MAX {
                    label[w] = next;
                    queue.push_back(w);
                }
            }
        }
        next += 1;
    }
    label
}

pub fn find_islands(net: &Network) -> IslandReport {
    let label = component_labels(net);
    let count = label.iter().copied().max().map_or(0, |m| m + 1);
    let mut components = vec![Vec::new(); count];
    let mut of_bus: HashMap<BusId, usize> = HashMap::new();
    for (b, &c) in net.buses.iter().zip(&label) {
        components[c].push(b.id);
        of_bus.insert(b.id, c);
    }
    let mut energized = vec![false; count];
    for g in net.generators.iter().filter(|g| g.in_service) {
        if let Some(&c) = of_bus.get(&g.bus) {
            energized[c] = true;
        }
    }
    let deenergized_load = net
        .loads
        .iter()
        .filter(|l| of_bus.get(&l.bus).is_some_and(|&c| !energized[c]))
        .map(|l| -l.p_demand)
        .sum();
    IslandReport {
        components,
        energized,
        deenergized_load,
    }
}

/// Per-bus membership flag of the component containing the slack bus.
pub fn slack_component(net: &Network) -> Option<Vec<bool>> {
    let s = net.slack_index()?;
    let label = component_labels(net);
    Some(label.iter().map(|&c| c == label[s]).collect())
}
