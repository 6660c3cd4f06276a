//! The routing feasibility LP for a fixed placement.

use std::collections::BTreeMap;

use crate::instance::{Capacity, Instance, Placement};
use crate::lp::{LinearProgram, Sense};

use super::{check_placement_shape, flow_rhs, PlacementError, RouteKey};

/// What a TR row stands for; aligned with the rows of [`TrSystem::lp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrRow {
    Link(usize),
    Flow {
        service: usize,
        flow: usize,
        node: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrSystem {
    pub lp: LinearProgram,
    pub rows: Vec<TrRow>,
    pub routes: BTreeMap<RouteKey, crate::lp::VarId>,
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrError {
    #[error("placement rejected: {0}")]
    Placement(#[from] PlacementError),
}

impl TrSystem {
    /// Routing fractions from an LP solution, keyed like the NS catalog.
    pub fn routing(&self, x: &[f64]) -> BTreeMap<RouteKey, f64> {
        self.routes
            .iter()
            .map(|(&k, v)| (k, x[v.0]))
            .filter(|&(_, r)| r != 0.0)
            .collect()
    }
}

/// Rows (4) with rhs `C_ij` (infinite links omitted) and rows (5) with the
/// numeric right-hand side `b_i^{k,s}(x̄)`; every `r >= 0`; objective 0.
pub fn build_tr(instance: &Instance, placement: &Placement) -> Result<TrSystem, TrError> {
    check_placement_shape(instance, placement)?;
    let net = &instance.network;
    let mut lp = LinearProgram::new();
    let mut rows = Vec::new();
    let mut routes = BTreeMap::new();
    for (k, svc) in instance.services.iter().enumerate() {
        for flow in 0..=svc.chain_len() {
            for (l, link) in net.links.iter().enumerate() {
                let name = format!(
                    "r[{},{},{},{}]",
                    svc.id, flow, net.nodes[link.tail], net.nodes[link.head]
                );
                routes.insert(
                    RouteKey {
                        link: l,
                        service: k,
                        flow,
                    },
                    lp.add_var(name, 0.0, f64::INFINITY),
                );
            }
        }
    }
    for (l, link) in net.links.iter().enumerate() {
        let Capacity::Finite(cap) = link.capacity else {
            continue;
        };
        let coeffs = routes
            .iter()
            .filter(|(key, _)| key.link == l)
            .map(|(key, &r)| (r, instance.services[key.service].flow_rate(key.flow)))
            .collect();
        lp.add_row(
            format!("linkcap[{},{}]", net.nodes[link.tail], net.nodes[link.head]),
            coeffs,
            Sense::Le,
            cap,
        );
        rows.push(TrRow::Link(l));
    }
    for (k, svc) in instance.services.iter().enumerate() {
        for flow in 0..=svc.chain_len() {
            for node in 0..net.nodes.len() {
                let mut coeffs = Vec::new();
                for (l, link) in net.links.iter().enumerate() {
                    let r = routes[&RouteKey {
                        link: l,
                        service: k,
                        flow,
                    }];
                    if link.head == node {
                        coeffs.push((r, 1.0));
                    }
                    if link.tail == node {
                        coeffs.push((r, -1.0));
                    }
                }
                let rhs = flow_rhs(instance, k, flow, node).at_placement(placement);
                lp.add_row(
                    format!("flow[{},{},{}]", svc.id, flow, net.nodes[node]),
                    coeffs,
                    Sense::Eq,
                    rhs,
                );
                rows.push(TrRow::Flow {
                    service: k,
                    flow,
                    node,
                });
            }
        }
    }
    Ok(TrSystem {
        lp,
        rows,
        routes,
        placement: placement.clone(),
    })
}
