//! Complete NS solutions, their JSON form and a feasibility verifier that
//! recomputes every constraint from the instance alone.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benders::CbdSolution;
use crate::formulations::RouteKey;
use crate::instance::{Capacity, Instance, Placement};

pub const SOLUTION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NsSolution {
    pub placement: Placement,
    /// Indexed by cloud position.
    pub activation: Vec<bool>,
    /// Fraction of each flow's rate carried by each link; absent means 0.
    pub routing: BTreeMap<RouteKey, f64>,
    pub objective: f64,
}

/// Recompute `Σ p y + Σ c x`. Forbidden placements count as infinite cost.
impl From<CbdSolution> for NsSolution {
    fn from(s: CbdSolution) -> Self {
        Self {
            placement: s.placement,
            activation: s.activation,
            routing: s.routing,
            objective: s.objective,
        }
    }
}

pub fn objective_of(instance: &Instance, placement: &Placement, activation: &[bool]) -> f64 {
    let mut total: f64 = instance
        .network
        .clouds
        .iter()
        .zip(activation)
        .filter(|(_, &on)| on)
        .map(|(c, _)| c.power)
        .sum();
    for (svc, chain) in instance.services.iter().zip(&placement.0) {
        for (stage, &c) in svc.chain.iter().zip(chain) {
            total += stage.costs.get(&c).copied().unwrap_or(f64::INFINITY);
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationReport {
    pub violations: Vec<String>,
}

impl VerificationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "feasible");
        }
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Check a solution against every NS constraint with absolute tolerance
/// `tol` (scaled by the magnitude of each right-hand side).
pub fn verify(instance: &Instance, sol: &NsSolution, tol: f64) -> VerificationReport {
    let net = &instance.network;
    let mut bad = Vec::new();
    let nc = net.clouds.len();
    let scaled = |rhs: f64| tol * rhs.abs().max(1.0);

    if sol.placement.0.len() != instance.services.len() {
        bad.push(format!(
            "placement lists {} services, instance has {}",
            sol.placement.0.len(),
            instance.services.len()
        ));
        return VerificationReport { violations: bad };
    }
    if sol.activation.len() != nc {
        bad.push(format!(
            "activation lists {} clouds, instance has {nc}",
            sol.activation.len()
        ));
        return VerificationReport { violations: bad };
    }
    let mut shape_ok = true;
    for (svc, chain) in instance.services.iter().zip(&sol.placement.0) {
        if chain.len() != svc.chain_len() {
            bad.push(format!(
                "service {} places {} of {} stages",
                svc.id,
                chain.len(),
                svc.chain_len()
            ));
            shape_ok = false;
            continue;
        }
        for (i, &c) in chain.iter().enumerate() {
            if c >= nc {
                bad.push(format!(
                    "service {} stage {} on unknown cloud #{c}",
                    svc.id,
                    i + 1
                ));
                shape_ok = false;
            } else {
                if !svc.chain[i].costs.contains_key(&c) {
                    bad.push(format!(
                        "service {} stage {} on cloud {} which cannot run it",
                        svc.id,
                        i + 1,
                        net.nodes[net.clouds[c].node]
                    ));
                }
                if !sol.activation[c] {
                    bad.push(format!(
                        "service {} stage {} on inactive cloud {}",
                        svc.id,
                        i + 1,
                        net.nodes[net.clouds[c].node]
                    ));
                }
            }
        }
    }
    if !shape_ok {
        return VerificationReport { violations: bad };
    }

    let mut load = vec![0.0; nc];
    for (svc, chain) in instance.services.iter().zip(&sol.placement.0) {
        for (stage, &c) in svc.chain.iter().zip(chain) {
            load[c] += stage.rate;
        }
    }
    for (c, cloud) in net.clouds.iter().enumerate() {
        if let Capacity::Finite(mu) = cloud.capacity {
            if load[c] > mu + scaled(mu) {
                bad.push(format!(
                    "cloud {} load {} exceeds capacity {mu}",
                    net.nodes[cloud.node], load[c]
                ));
            }
        }
    }

    let mut link_load = vec![0.0; net.links.len()];
    let mut balance: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    for (key, &r) in &sol.routing {
        if key.link >= net.links.len()
            || key.service >= instance.services.len()
            || key.flow > instance.services[key.service].chain_len()
        {
            bad.push(format!("routing entry {key:?} does not exist"));
            continue;
        }
        if r < -tol {
            bad.push(format!("negative routing fraction {r} on {key:?}"));
        }
        let link = &net.links[key.link];
        link_load[key.link] += instance.services[key.service].flow_rate(key.flow) * r;
        *balance
            .entry((key.service, key.flow, link.head))
            .or_default() += r;
        *balance
            .entry((key.service, key.flow, link.tail))
            .or_default() -= r;
    }
    for (l, link) in net.links.iter().enumerate() {
        if let Capacity::Finite(c) = link.capacity {
            if link_load[l] > c + scaled(c) {
                bad.push(format!(
                    "link {}->{} carries {} over capacity {c}",
                    net.nodes[link.tail], net.nodes[link.head], link_load[l]
                ));
            }
        }
    }
    for (k, svc) in instance.services.iter().enumerate() {
        let hosts: Vec<usize> = sol.placement.0[k]
            .iter()
            .map(|&c| net.clouds[c].node)
            .collect();
        let len = svc.chain_len();
        for flow in 0..=len {
            let origin = if flow == 0 {
                svc.source
            } else {
                hosts[flow - 1]
            };
            let target = if flow == len {
                svc.destination
            } else {
                hosts[flow]
            };
            for node in 0..net.nodes.len() {
                let net_in = balance.get(&(k, flow, node)).copied().unwrap_or(0.0);
                let want = (node == target) as u8 as f64 - (node == origin) as u8 as f64;
                if (net_in - want).abs() > tol {
                    bad.push(format!(
                        "service {} flow {flow} at node {}: net inflow {net_in} but {want} required",
                        svc.id, net.nodes[node]
                    ));
                }
            }
        }
    }

    let recomputed = objective_of(instance, &sol.placement, &sol.activation);
    if (recomputed - sol.objective).abs() > 1e-6 * recomputed.abs().max(1.0) {
        bad.push(format!(
            "claimed objective {} but the solution costs {recomputed}",
            sol.objective
        ));
    }
    VerificationReport { violations: bad }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionFile {
    schema_version: u32,
    objective: f64,
    placement: Vec<ServicePlacement>,
    active_clouds: Vec<String>,
    routing: Vec<RouteEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServicePlacement {
    service: String,
    hosts: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteEntry {
    service: String,
    flow: usize,
    tail: String,
    head: String,
    fraction: f64,
}

#[derive(Debug, Error)]
pub enum SolutionError {
    #[error("malformed solution JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported solution schema version {0}")]
    SchemaVersion(u32),
    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },
}

pub fn solution_to_json(instance: &Instance, sol: &NsSolution) -> String {
    let net = &instance.network;
    let cloud_name = |c: usize| net.nodes[net.clouds[c].node].clone();
    let file = SolutionFile {
        schema_version: SOLUTION_SCHEMA_VERSION,
        objective: sol.objective,
        placement: instance
            .services
            .iter()
            .zip(&sol.placement.0)
            .map(|(s, chain)| ServicePlacement {
                service: s.id.clone(),
                hosts: chain.iter().map(|&c| cloud_name(c)).collect(),
            })
            .collect(),
        active_clouds: sol
            .activation
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(c, _)| cloud_name(c))
            .collect(),
        routing: sol
            .routing
            .iter()
            .map(|(k, &fraction)| RouteEntry {
                service: instance.services[k.service].id.clone(),
                flow: k.flow,
                tail: net.nodes[net.links[k.link].tail].clone(),
                head: net.nodes[net.links[k.link].head].clone(),
                fraction,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("solution serializes")
}

pub fn solution_from_json(instance: &Instance, text: &str) -> Result<NsSolution, SolutionError> {
    let file: SolutionFile = serde_json::from_str(text)?;
    if file.schema_version != SOLUTION_SCHEMA_VERSION {
        return Err(SolutionError::SchemaVersion(file.schema_version));
    }
    let net = &instance.network;
    let cloud = |name: &str| -> Result<usize, SolutionError> {
        net.node_index(name)
            .and_then(|n| net.cloud_of_node(n))
            .ok_or_else(|| SolutionError::Unknown {
                what: "cloud",
                name: name.to_string(),
            })
    };
    let service = |id: &str| -> Result<usize, SolutionError> {
        instance
            .services
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| SolutionError::Unknown {
                what: "service",
                name: id.to_string(),
            })
    };
    let mut chains = vec![Vec::new(); instance.services.len()];
    for sp in &file.placement {
        let k = service(&sp.service)?;
        chains[k] = sp
            .hosts
            .iter()
            .map(|h| cloud(h))
            .collect::<Result<_, _>>()?;
    }
    let mut activation = vec![false; net.clouds.len()];
    for name in &file.active_clouds {
        activation[cloud(name)?] = true;
    }
    let mut routing = BTreeMap::new();
    for e in &file.routing {
        let k = service(&e.service)?;
        let node = |n: &str| {
            net.node_index(n).ok_or_else(|| SolutionError::Unknown {
                what: "node",
                name: n.to_string(),
            })
        };
        let (t, h) = (node(&e.tail)?, node(&e.head)?);
        let link = net
            .links
            .iter()
            .position(|l| l.tail == t && l.head == h)
            .ok_or_else(|| SolutionError::Unknown {
                what: "link",
                name: format!("{}->{}", e.tail, e.head),
            })?;
        *routing
            .entry(RouteKey {
                link,
                service: k,
                flow: e.flow,
            })
            .or_insert(0.0) += e.fraction;
    }
    Ok(NsSolution {
        placement: Placement(chains),
        activation,
        routing,
        objective: file.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::examples;

    fn diamond_split() -> (Instance, NsSolution) {
        let inst = examples::diamond();
        // Links: 0 A->B, 1 A->C, 2 B->D, 3 C->D.
        let mut routing = BTreeMap::new();
        for (service, flow, link) in [(0, 0, 0), (0, 1, 2), (1, 0, 1), (1, 1, 3)] {
            routing.insert(
                RouteKey {
                    link,
                    service,
                    flow,
                },
                1.0,
            );
        }
        let sol = NsSolution {
            placement: Placement(vec![vec![0], vec![1]]),
            activation: vec![true, true],
            routing,
            objective: 3.0,
        };
        (inst, sol)
    }

    #[test]
    fn hand_built_solution_verifies() {
        let (inst, sol) = diamond_split();
        let r = verify(&inst, &sol, 1e-7);
        assert!(r.is_feasible(), "{r}");
    }

    #[test]
    fn detects_each_kind_of_violation() {
        let (inst, sol) = diamond_split();
        let mut s = sol.clone();
        s.activation[1] = false;
        s.objective = 1.0;
        assert!(verify(&inst, &s, 1e-7)
            .violations
            .iter()
            .any(|v| v.contains("inactive")));

        let mut s = sol.clone();
        s.placement = Placement(vec![vec![0], vec![0]]);
        s.routing.remove(&RouteKey {
            link: 1,
            service: 1,
            flow: 0,
        });
        s.routing.remove(&RouteKey {
            link: 3,
            service: 1,
            flow: 1,
        });
        s.routing.insert(
            RouteKey {
                link: 0,
                service: 1,
                flow: 0,
            },
            1.0,
        );
        s.routing.insert(
            RouteKey {
                link: 2,
                service: 1,
                flow: 1,
            },
            1.0,
        );
        s.objective = 3.0;
        let r = verify(&inst, &s, 1e-7);
        assert!(r.violations.iter().any(|v| v.contains("A->B")), "{r}");

        let mut s = sol.clone();
        s.routing.insert(
            RouteKey {
                link: 2,
                service: 0,
                flow: 1,
            },
            0.5,
        );
        assert!(verify(&inst, &s, 1e-7)
            .violations
            .iter()
            .any(|v| v.contains("net inflow")));

        let mut s = sol;
        s.objective = 2.0;
        assert!(verify(&inst, &s, 1e-7)
            .violations
            .iter()
            .any(|v| v.contains("claimed objective")));
    }

    #[test]
    fn json_round_trip() {
        let (inst, sol) = diamond_split();
        let text = solution_to_json(&inst, &sol);
        assert_eq!(solution_from_json(&inst, &text).unwrap(), sol);
        let broken = text.replace("\"B\"", "\"Q\"");
        assert!(matches!(
            solution_from_json(&inst, &broken),
            Err(SolutionError::Unknown { .. })
        ));
    }
}
