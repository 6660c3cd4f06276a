//! Problem instances: substrate network, cloud nodes and service chains.
//!
//! Node references are indices into [`Network::nodes`]; cloud references
//! are indices into [`Network::clouds`]. Stages of a chain are numbered
//! from 1 in the public helpers (stage `s` produces rate `λ_s`), while flow
//! `(k, s)` for `s = 0..=ℓ_k` carries the traffic leaving stage `s`.

mod generate;
mod io;

pub use generate::{generate, GeneratorConfig, GeneratorError, RateMode, Topology};
pub use io::{from_json_str, load, save, to_json_string, LoadError, SCHEMA_VERSION};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Capacity of a node or link. Infinite capacities are a distinct variant,
/// never a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Finite(f64),
    Infinite,
}

impl Capacity {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Capacity::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Capacity::Finite(c) => Some(c),
            Capacity::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub tail: usize,
    pub head: usize,
    pub capacity: Capacity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudNode {
    pub node: usize,
    /// Compute capacity `μ_v`.
    pub capacity: Capacity,
    /// Activation power `p_v`.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub nodes: Vec<String>,
    pub links: Vec<Link>,
    pub clouds: Vec<CloudNode>,
}

impl Network {
    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    /// Position of `node` in the cloud list, if it is a cloud node.
    pub fn cloud_of_node(&self, node: usize) -> Option<usize> {
        self.clouds.iter().position(|c| c.node == node)
    }

    /// Sum of incoming link capacities of `node`; `Infinite` if any link is.
    pub fn inbound_capacity(&self, node: usize) -> Capacity {
        sum_capacities(self.links.iter().filter(|l| l.head == node))
    }

    /// Sum of outgoing link capacities of `node`; `Infinite` if any link is.
    pub fn outbound_capacity(&self, node: usize) -> Capacity {
        sum_capacities(self.links.iter().filter(|l| l.tail == node))
    }

    pub fn all_links_infinite(&self) -> bool {
        self.links.iter().all(|l| l.capacity.is_infinite())
    }
}

fn sum_capacities<'a>(links: impl Iterator<Item = &'a Link>) -> Capacity {
    let mut total = 0.0;
    for l in links {
        match l.capacity {
            Capacity::Finite(c) => total += c,
            Capacity::Infinite => return Capacity::Infinite,
        }
    }
    Capacity::Finite(total)
}

/// One stage `f_s^k` of a service function chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub function: String,
    /// Data rate after this function, `λ_s^k`.
    pub rate: f64,
    /// Placement cost per cloud position. A cloud absent from the map cannot
    /// process this function.
    pub costs: BTreeMap<usize, f64>,
}

impl Stage {
    pub fn allows(&self, cloud: usize) -> bool {
        self.costs.contains_key(&cloud)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Service {
    pub id: String,
    pub source: usize,
    pub destination: usize,
    /// Data rate before any function, `λ_0^k`.
    pub rate_in: f64,
    pub chain: Vec<Stage>,
}

impl Service {
    pub fn chain_len(&self) -> usize {
        self.chain.len()
    }

    /// `λ_s^k` for flow index `s = 0..=ℓ_k`.
    pub fn flow_rate(&self, flow: usize) -> f64 {
        if flow == 0 {
            self.rate_in
        } else {
            self.chain[flow - 1].rate
        }
    }

    /// Stage with 1-based number `stage`.
    pub fn stage(&self, stage: usize) -> &Stage {
        &self.chain[stage - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Instance {
    pub network: Network,
    pub services: Vec<Service>,
}

impl Instance {
    /// Number of `(k, s)` function stages over all services.
    pub fn total_stages(&self) -> usize {
        self.services.iter().map(Service::chain_len).sum()
    }

    /// Product over services of `|V|^{ℓ_k}`: the size of the raw placement space.
    pub fn placement_space(&self) -> f64 {
        let v = self.network.clouds.len() as f64;
        self.services
            .iter()
            .map(|s| v.powi(s.chain_len() as i32))
            .product()
    }
}

/// A complete function placement: `placement[k][s-1]` is the cloud position
/// hosting stage `s` of service `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Placement(pub Vec<Vec<usize>>);

impl Placement {
    pub fn host(&self, service: usize, stage: usize) -> usize {
        self.0[service][stage - 1]
    }

    /// Activation pattern implied by the placement: a cloud is on iff it
    /// hosts at least one function.
    pub fn active_clouds(&self, cloud_count: usize) -> Vec<bool> {
        let mut on = vec![false; cloud_count];
        for chain in &self.0 {
            for &c in chain {
                on[c] = true;
            }
        }
        on
    }

    /// NS objective for this placement with minimal activation.
    pub fn cost(&self, instance: &Instance) -> f64 {
        let active = self.active_clouds(instance.network.clouds.len());
        let mut total: f64 = instance
            .network
            .clouds
            .iter()
            .zip(&active)
            .filter(|(_, &on)| on)
            .map(|(c, _)| c.power)
            .sum();
        for (k, chain) in self.0.iter().enumerate() {
            for (i, &c) in chain.iter().enumerate() {
                total += instance.services[k].chain[i]
                    .costs
                    .get(&c)
                    .copied()
                    .unwrap_or(f64::NAN);
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    UnknownEndpoint,
    SelfLoop,
    DuplicateLink,
    NegativeCapacity,
    UnknownCloudNode,
    DuplicateCloudNode,
    NegativePower,
    DuplicateNodeName,
    DuplicateServiceId,
    UnknownServiceNode,
    SourceInsideCloudSet,
    DestinationInsideCloudSet,
    EmptyChain,
    NonPositiveRate,
    InvalidPlacementCost,
}

impl ViolationKind {
    pub fn describe(&self) -> &'static str {
        match self {
            ViolationKind::UnknownEndpoint => "unknown endpoint",
            ViolationKind::SelfLoop => "self-loop",
            ViolationKind::DuplicateLink => "duplicate link",
            ViolationKind::NegativeCapacity => "negative capacity",
            ViolationKind::UnknownCloudNode => "cloud node not declared",
            ViolationKind::DuplicateCloudNode => "duplicate cloud node",
            ViolationKind::NegativePower => "negative activation power",
            ViolationKind::DuplicateNodeName => "duplicate node name",
            ViolationKind::DuplicateServiceId => "duplicate service id",
            ViolationKind::UnknownServiceNode => "service references unknown node",
            ViolationKind::SourceInsideCloudSet => "source inside cloud set",
            ViolationKind::DestinationInsideCloudSet => "destination inside cloud set",
            ViolationKind::EmptyChain => "empty function chain",
            ViolationKind::NonPositiveRate => "non-positive rate",
            ViolationKind::InvalidPlacementCost => "invalid placement cost",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.describe(), self.detail)
    }
}

/// Every invariant breach found in an instance. Empty iff well-formed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, detail: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn bad_capacity(c: Capacity) -> bool {
    match c {
        Capacity::Finite(x) => !(x >= 0.0) || !x.is_finite(),
        Capacity::Infinite => false,
    }
}

/// Check every structural invariant of `instance`. Never aborts.
pub fn validate(instance: &Instance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let net = &instance.network;
    let n = net.nodes.len();

    let mut names = BTreeSet::new();
    for name in &net.nodes {
        if !names.insert(name.as_str()) {
            report.push(ViolationKind::DuplicateNodeName, name.clone());
        }
    }

    let mut seen_links = BTreeSet::new();
    for (idx, l) in net.links.iter().enumerate() {
        if l.tail >= n || l.head >= n {
            report.push(
                ViolationKind::UnknownEndpoint,
                format!("link #{idx} ({} -> {}) with {n} nodes", l.tail, l.head),
            );
            continue;
        }
        if l.tail == l.head {
            report.push(
                ViolationKind::SelfLoop,
                format!("link #{idx} at {}", net.nodes[l.tail]),
            );
        }
        if !seen_links.insert((l.tail, l.head)) {
            report.push(
                ViolationKind::DuplicateLink,
                format!("{} -> {}", net.nodes[l.tail], net.nodes[l.head]),
            );
        }
        if bad_capacity(l.capacity) {
            report.push(ViolationKind::NegativeCapacity, format!("link #{idx}"));
        }
    }

    let mut cloud_nodes = BTreeSet::new();
    for (idx, c) in net.clouds.iter().enumerate() {
        if c.node >= n {
            report.push(
                ViolationKind::UnknownCloudNode,
                format!("cloud #{idx} -> node {}", c.node),
            );
            continue;
        }
        if !cloud_nodes.insert(c.node) {
            report.push(ViolationKind::DuplicateCloudNode, net.nodes[c.node].clone());
        }
        if bad_capacity(c.capacity) {
            report.push(
                ViolationKind::NegativeCapacity,
                format!("cloud {}", net.nodes[c.node]),
            );
        }
        if !(c.power >= 0.0) || !c.power.is_finite() {
            report.push(
                ViolationKind::NegativePower,
                format!("cloud {}", net.nodes[c.node]),
            );
        }
    }

    let mut ids = BTreeSet::new();
    for svc in &instance.services {
        if !ids.insert(svc.id.as_str()) {
            report.push(ViolationKind::DuplicateServiceId, svc.id.clone());
        }
        for (role, node) in [("source", svc.source), ("destination", svc.destination)] {
            if node >= n {
                report.push(
                    ViolationKind::UnknownServiceNode,
                    format!("service {} {role} {node}", svc.id),
                );
            }
        }
        if cloud_nodes.contains(&svc.source) {
            report.push(
                ViolationKind::SourceInsideCloudSet,
                format!("service {}", svc.id),
            );
        }
        if cloud_nodes.contains(&svc.destination) {
            report.push(
                ViolationKind::DestinationInsideCloudSet,
                format!("service {}", svc.id),
            );
        }
        if svc.chain.is_empty() {
            report.push(ViolationKind::EmptyChain, format!("service {}", svc.id));
        }
        if !(svc.rate_in > 0.0) || !svc.rate_in.is_finite() {
            report.push(
                ViolationKind::NonPositiveRate,
                format!("service {} input rate", svc.id),
            );
        }
        for (i, st) in svc.chain.iter().enumerate() {
            if !(st.rate > 0.0) || !st.rate.is_finite() {
                report.push(
                    ViolationKind::NonPositiveRate,
                    format!("service {} stage {}", svc.id, i + 1),
                );
            }
            for (&cloud, &cost) in &st.costs {
                if cloud >= net.clouds.len() || !(cost >= 0.0) || !cost.is_finite() {
                    report.push(
                        ViolationKind::InvalidPlacementCost,
                        format!("service {} stage {} cloud #{cloud}", svc.id, i + 1),
                    );
                }
            }
        }
    }
    report
}

/// Small hand-built instances used throughout tests, docs and the CLI.
pub mod examples {
    use super::*;

    fn stage(function: &str, rate: f64, costs: &[(usize, f64)]) -> Stage {
        Stage {
            function: function.to_string(),
            rate,
            costs: costs.iter().copied().collect(),
        }
    }

    /// Chain `S → 1 → 2 → 3 → D` with clouds 1, 2, 3 (`μ = ∞, ∞, 3`), one
    /// service `f¹ → f²` of rate 2, and cost 1 for `f¹` on clouds 1 and 2.
    /// Links are uncapacitated.
    pub fn chain_of_three() -> Instance {
        let nodes: Vec<String> = ["S", "1", "2", "3", "D"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let links = (0..4)
            .map(|i| Link {
                tail: i,
                head: i + 1,
                capacity: Capacity::Infinite,
            })
            .collect();
        let clouds = vec![
            CloudNode {
                node: 1,
                capacity: Capacity::Infinite,
                power: 0.0,
            },
            CloudNode {
                node: 2,
                capacity: Capacity::Infinite,
                power: 0.0,
            },
            CloudNode {
                node: 3,
                capacity: Capacity::Finite(3.0),
                power: 0.0,
            },
        ];
        let services = vec![Service {
            id: "1".into(),
            source: 0,
            destination: 4,
            rate_in: 2.0,
            chain: vec![
                stage("f1", 2.0, &[(0, 1.0), (1, 1.0), (2, 0.0)]),
                stage("f2", 2.0, &[(0, 0.0), (1, 0.0), (2, 0.0)]),
            ],
        }];
        Instance {
            network: Network {
                nodes,
                links,
                clouds,
            },
            services,
        }
    }

    /// Diamond `A → {B, C} → D` with `C_AB = C_CD = 1`, `C_AC = C_BD = 2`,
    /// `μ_B = μ_C = 2`, `p_B = 1`, `p_C = 2`, and two single-function
    /// services of rate 1 from `A` to `D`.
    pub fn diamond() -> Instance {
        let nodes: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        let link = |tail, head, c| Link {
            tail,
            head,
            capacity: Capacity::Finite(c),
        };
        let links = vec![
            link(0, 1, 1.0),
            link(0, 2, 2.0),
            link(1, 3, 2.0),
            link(2, 3, 1.0),
        ];
        let clouds = vec![
            CloudNode {
                node: 1,
                capacity: Capacity::Finite(2.0),
                power: 1.0,
            },
            CloudNode {
                node: 2,
                capacity: Capacity::Finite(2.0),
                power: 2.0,
            },
        ];
        let services = (1..=2)
            .map(|k| Service {
                id: k.to_string(),
                source: 0,
                destination: 3,
                rate_in: 1.0,
                chain: vec![stage("f", 1.0, &[(0, 0.0), (1, 0.0)])],
            })
            .collect();
        Instance {
            network: Network {
                nodes,
                links,
                clouds,
            },
            services,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_instances_are_valid() {
        assert!(validate(&examples::chain_of_three()).is_valid());
        assert!(validate(&examples::diamond()).is_valid());
    }

    #[test]
    fn source_in_cloud_set_is_reported() {
        let mut inst = examples::chain_of_three();
        inst.services[0].source = 1;
        let report = validate(&inst);
        assert!(report.has(ViolationKind::SourceInsideCloudSet));
        assert!(report.to_string().contains("source inside cloud set"));
    }

    #[test]
    fn undeclared_endpoint_is_reported() {
        let mut inst = examples::diamond();
        inst.network.links.push(Link {
            tail: 0,
            head: 9,
            capacity: Capacity::Infinite,
        });
        let report = validate(&inst);
        assert!(report.has(ViolationKind::UnknownEndpoint));
        assert!(report.to_string().contains("unknown endpoint"));
    }

    #[test]
    fn collects_all_violations() {
        let mut inst = examples::diamond();
        inst.network.links.push(Link {
            tail: 2,
            head: 2,
            capacity: Capacity::Infinite,
        });
        inst.network.links.push(Link {
            tail: 0,
            head: 1,
            capacity: Capacity::Finite(-1.0),
        });
        inst.services[1].id = "1".into();
        inst.services[0].chain[0].rate = 0.0;
        let report = validate(&inst);
        for kind in [
            ViolationKind::SelfLoop,
            ViolationKind::DuplicateLink,
            ViolationKind::NegativeCapacity,
            ViolationKind::DuplicateServiceId,
            ViolationKind::NonPositiveRate,
        ] {
            assert!(report.has(kind), "missing {kind:?} in {report}");
        }
    }

    #[test]
    fn neighbourhood_capacities() {
        let inst = examples::diamond();
        assert_eq!(inst.network.inbound_capacity(1), Capacity::Finite(1.0));
        assert_eq!(inst.network.outbound_capacity(2), Capacity::Finite(1.0));
        let chain = examples::chain_of_three();
        assert_eq!(chain.network.inbound_capacity(2), Capacity::Infinite);
    }

    #[test]
    fn placement_cost_uses_minimal_activation() {
        let inst = examples::diamond();
        assert_eq!(Placement(vec![vec![0], vec![0]]).cost(&inst), 1.0);
        assert_eq!(Placement(vec![vec![0], vec![1]]).cost(&inst), 3.0);
    }
}
