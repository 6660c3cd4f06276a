//! Transitive closure of the substrate and the unreachability sets behind
//! the connectivity inequalities.

use std::collections::{BTreeSet, VecDeque};

use crate::instance::{Instance, Network};

/// `reach(i, j)` is true iff a directed path `i → j` exists. Every node
/// reaches itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl ReachabilityMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn reaches(&self, from: usize, to: usize) -> bool {
        self.bits[from * self.n + to]
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                bits[i * n + j] = f(i, j);
            }
        }
        Self { n, bits }
    }
}

/// One BFS per node, `O(|I| (|I| + |L|))`.
pub fn transitive_closure(network: &Network) -> ReachabilityMatrix {
    let n = network.nodes.len();
    let mut adj = vec![Vec::new(); n];
    for l in &network.links {
        adj[l.tail].push(l.head);
    }
    let mut bits = vec![false; n * n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        let row = &mut bits[src * n..(src + 1) * n];
        row[src] = true;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if !row[w] {
                    row[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    ReachabilityMatrix { n, bits }
}

/// Cloud positions that cannot take part in a service's chain, plus the
/// per-cloud unreachable sets. All sets hold cloud positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnreachableSets {
    /// `V(S^k)`: clouds with no path from the source of service `k`.
    pub from_source: Vec<BTreeSet<usize>>,
    /// `V(D^k)`: clouds with no path to the destination of service `k`.
    pub to_destination: Vec<BTreeSet<usize>>,
    /// `V(v₀)`: clouds other than `v₀` with no path from `v₀`.
    pub from_cloud: Vec<BTreeSet<usize>>,
}

impl UnreachableSets {
    /// Clouds that may host some stage of service `k`.
    pub fn usable_for(&self, service: usize, cloud: usize) -> bool {
        !self.from_source[service].contains(&cloud)
            && !self.to_destination[service].contains(&cloud)
    }

    /// `V \ V(v₀)`, which always contains `v₀` itself.
    pub fn reachable_from(&self, cloud: usize, cloud_count: usize) -> Vec<usize> {
        (0..cloud_count)
            .filter(|c| !self.from_cloud[cloud].contains(c))
            .collect()
    }
}

pub fn unreachable_sets(matrix: &ReachabilityMatrix, instance: &Instance) -> UnreachableSets {
    let clouds = &instance.network.clouds;
    let collect = |pred: &dyn Fn(usize) -> bool| -> BTreeSet<usize> {
        clouds
            .iter()
            .enumerate()
            .filter(|(_, c)| pred(c.node))
            .map(|(i, _)| i)
            .collect()
    };
    let from_source = instance
        .services
        .iter()
        .map(|s| collect(&|v| !matrix.reaches(s.source, v)))
        .collect();
    let to_destination = instance
        .services
        .iter()
        .map(|s| collect(&|v| !matrix.reaches(v, s.destination)))
        .collect();
    let from_cloud = clouds
        .iter()
        .map(|c0| collect(&|v| v != c0.node && !matrix.reaches(c0.node, v)))
        .collect();
    UnreachableSets {
        from_source,
        to_destination,
        from_cloud,
    }
}

/// Convenience: closure plus sets in one call.
pub fn analyze(instance: &Instance) -> UnreachableSets {
    unreachable_sets(&transitive_closure(&instance.network), instance)
}
