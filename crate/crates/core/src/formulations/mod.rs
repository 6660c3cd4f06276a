//! Optimization models built from an [`Instance`]: the full mixed-binary
//! model (NS), the placement master in three strengths (FP, FP-I, FP-II),
//! the routing feasibility LP (TR) and feasibility cuts derived from TR
//! certificates.

mod connectivity;
mod cut;
mod tr;

pub use connectivity::{build_fp_with_rows, connectivity_rows, ConnectivityForm, SymbolicRow};
pub use cut::{materialize_cut, BendersCut, CutError};
pub use tr::{build_tr, TrError, TrRow, TrSystem};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::instance::{Capacity, Instance, Placement};
use crate::lp::{LinearProgram, Sense, VarId};
use crate::milp::MixedBinaryProgram;
use crate::reachability::UnreachableSets;

/// `x_v^{k,s}`: stage `s` (1-based) of service `k` on cloud position `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlacementKey {
    pub service: usize,
    pub stage: usize,
    pub cloud: usize,
}

impl PlacementKey {
    pub fn new(service: usize, stage: usize, cloud: usize) -> Self {
        Self {
            service,
            stage,
            cloud,
        }
    }
}

/// `r_ij^{k,s}`: fraction of flow `s` of service `k` on link `link`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RouteKey {
    pub link: usize,
    pub service: usize,
    pub flow: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableCatalog {
    pub x: BTreeMap<PlacementKey, VarId>,
    /// Indexed by cloud position.
    pub y: Vec<VarId>,
    pub r: BTreeMap<RouteKey, VarId>,
    /// Keyed by the lower stage `s` of the pair `(s, s+1)`.
    pub z: BTreeMap<PlacementKey, VarId>,
    pub w: BTreeMap<PlacementKey, VarId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FpVariant {
    Fp,
    FpI,
    FpII,
}

impl FpVariant {
    pub fn name(&self) -> &'static str {
        match self {
            FpVariant::Fp => "FP",
            FpVariant::FpI => "FP-I",
            FpVariant::FpII => "FP-II",
        }
    }
}

/// A mixed-binary program together with the meaning of its columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub program: MixedBinaryProgram,
    pub catalog: VariableCatalog,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlacementError {
    #[error("stage {stage} of service {service} is assigned to {count} clouds")]
    NotOneHost {
        service: usize,
        stage: usize,
        count: usize,
    },
    #[error("service {service} has {found} stages, expected {expected}")]
    ChainLength {
        service: usize,
        expected: usize,
        found: usize,
    },
    #[error("placement has {found} services, expected {expected}")]
    ServiceCount { expected: usize, found: usize },
    #[error("cloud position {cloud} out of range for service {service} stage {stage}")]
    UnknownCloud {
        service: usize,
        stage: usize,
        cloud: usize,
    },
}

impl VariableCatalog {
    /// Read a placement off a solution vector, requiring exactly one host
    /// per stage.
    pub fn placement(&self, instance: &Instance, x: &[f64]) -> Result<Placement, PlacementError> {
        let mut hosts: Vec<Vec<Vec<usize>>> = instance
            .services
            .iter()
            .map(|s| vec![Vec::new(); s.chain_len()])
            .collect();
        for (key, var) in &self.x {
            if x[var.0] > 0.5 {
                hosts[key.service][key.stage - 1].push(key.cloud);
            }
        }
        let mut out = Vec::with_capacity(hosts.len());
        for (k, stages) in hosts.into_iter().enumerate() {
            let mut chain = Vec::with_capacity(stages.len());
            for (i, h) in stages.into_iter().enumerate() {
                if h.len() != 1 {
                    return Err(PlacementError::NotOneHost {
                        service: k,
                        stage: i + 1,
                        count: h.len(),
                    });
                }
                chain.push(h[0]);
            }
            out.push(chain);
        }
        Ok(Placement(out))
    }

    /// Activation values read off a solution vector.
    pub fn activation(&self, x: &[f64]) -> Vec<bool> {
        self.y.iter().map(|v| x[v.0] > 0.5).collect()
    }
}

/// Check that a placement has the shape required by constraint (1):
/// one known cloud for each stage of each service.
pub fn check_placement_shape(
    instance: &Instance,
    placement: &Placement,
) -> Result<(), PlacementError> {
    if placement.0.len() != instance.services.len() {
        return Err(PlacementError::ServiceCount {
            expected: instance.services.len(),
            found: placement.0.len(),
        });
    }
    let nc = instance.network.clouds.len();
    for (k, (svc, chain)) in instance.services.iter().zip(&placement.0).enumerate() {
        if chain.len() != svc.chain_len() {
            return Err(PlacementError::ChainLength {
                service: k,
                expected: svc.chain_len(),
                found: chain.len(),
            });
        }
        if let Some((i, &c)) = chain.iter().enumerate().find(|(_, &c)| c >= nc) {
            return Err(PlacementError::UnknownCloud {
                service: k,
                stage: i + 1,
                cloud: c,
            });
        }
    }
    Ok(())
}

/// `constant + Σ coeff · x[key]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineForm {
    pub constant: f64,
    pub terms: Vec<(PlacementKey, f64)>,
}

impl AffineForm {
    pub fn eval(&self, x: impl Fn(PlacementKey) -> f64) -> f64 {
        self.constant + self.terms.iter().map(|&(k, c)| c * x(k)).sum::<f64>()
    }

    pub fn at_placement(&self, placement: &Placement) -> f64 {
        self.eval(|k| (placement.host(k.service, k.stage) == k.cloud) as u8 as f64)
    }
}

/// Right-hand side `b_i^{k,s}(x)` of the flow conservation row for node
/// `node`, flow `flow` of service `service`, where the row reads
/// `inflow - outflow = b`.
pub fn flow_rhs(instance: &Instance, service: usize, flow: usize, node: usize) -> AffineForm {
    let svc = &instance.services[service];
    let len = svc.chain_len();
    let mut form = AffineForm::default();
    if flow == 0 && node == svc.source {
        form.constant -= 1.0;
    }
    if flow == len && node == svc.destination {
        form.constant += 1.0;
    }
    if let Some(cloud) = instance.network.cloud_of_node(node) {
        if flow < len {
            form.terms
                .push((PlacementKey::new(service, flow + 1, cloud), 1.0));
        }
        if flow >= 1 {
            form.terms
                .push((PlacementKey::new(service, flow, cloud), -1.0));
        }
    }
    form
}

fn cloud_name(instance: &Instance, cloud: usize) -> &str {
    &instance.network.nodes[instance.network.clouds[cloud].node]
}

/// Add x, y and the rows (1)-(3) shared by NS and every FP variant.
fn placement_core(
    instance: &Instance,
    keep: impl Fn(PlacementKey) -> bool,
) -> (LinearProgram, VariableCatalog, Vec<VarId>) {
    let net = &instance.network;
    let mut lp = LinearProgram::new();
    let mut cat = VariableCatalog::default();
    let mut binaries = Vec::new();

    for (v, c) in net.clouds.iter().enumerate() {
        let y = lp.add_var(format!("y[{}]", cloud_name(instance, v)), 0.0, 1.0);
        cat.y.push(y);
        binaries.push(y);
        lp.objective.push((y, c.power));
    }
    for (k, svc) in instance.services.iter().enumerate() {
        for s in 1..=svc.chain_len() {
            let stage = svc.stage(s);
            for v in 0..net.clouds.len() {
                let key = PlacementKey::new(k, s, v);
                let Some(&cost) = stage.costs.get(&v) else {
                    continue;
                };
                if !keep(key) {
                    continue;
                }
                let x = lp.add_var(
                    format!("x[{},{},{}]", svc.id, s, cloud_name(instance, v)),
                    0.0,
                    1.0,
                );
                cat.x.insert(key, x);
                binaries.push(x);
                lp.objective.push((x, cost));
            }
        }
    }

    // (1) one host per stage.
    for (k, svc) in instance.services.iter().enumerate() {
        for s in 1..=svc.chain_len() {
            let coeffs = (0..net.clouds.len())
                .filter_map(|v| cat.x.get(&PlacementKey::new(k, s, v)).map(|&x| (x, 1.0)))
                .collect();
            lp.add_row(format!("assign[{},{}]", svc.id, s), coeffs, Sense::Eq, 1.0);
        }
    }
    // (2) activation.
    for (key, &x) in &cat.x {
        let y = cat.y[key.cloud];
        let name = format!(
            "act[{},{},{}]",
            instance.services[key.service].id,
            key.stage,
            cloud_name(instance, key.cloud)
        );
        lp.add_row(name, vec![(x, 1.0), (y, -1.0)], Sense::Le, 0.0);
    }
    // (3) node capacity.
    for (v, c) in net.clouds.iter().enumerate() {
        let Capacity::Finite(mu) = c.capacity else {
            continue;
        };
        let mut coeffs: Vec<(VarId, f64)> = cat
            .x
            .iter()
            .filter(|(k, _)| k.cloud == v)
            .map(|(k, &x)| (x, instance.services[k.service].flow_rate(k.stage)))
            .collect();
        coeffs.push((cat.y[v], -mu));
        lp.add_row(
            format!("nodecap[{}]", cloud_name(instance, v)),
            coeffs,
            Sense::Le,
            0.0,
        );
    }
    (lp, cat, binaries)
}

/// The full mixed-binary model: placement, activation and routing.
pub fn build_ns(instance: &Instance) -> Model {
    let (mut lp, mut cat, binaries) = placement_core(instance, |_| true);
    let net = &instance.network;
    for (k, svc) in instance.services.iter().enumerate() {
        for flow in 0..=svc.chain_len() {
            for (l, link) in net.links.iter().enumerate() {
                let name = format!(
                    "r[{},{},{},{}]",
                    svc.id, flow, net.nodes[link.tail], net.nodes[link.head]
                );
                let r = lp.add_var(name, 0.0, f64::INFINITY);
                cat.r.insert(
                    RouteKey {
                        link: l,
                        service: k,
                        flow,
                    },
                    r,
                );
            }
        }
    }
    // (4) link capacity.
    for (l, link) in net.links.iter().enumerate() {
        let Capacity::Finite(cap) = link.capacity else {
            continue;
        };
        let coeffs = cat
            .r
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
    }
    // (5) flow conservation with the x-dependent part moved to the left.
    for (k, svc) in instance.services.iter().enumerate() {
        for flow in 0..=svc.chain_len() {
            for node in 0..net.nodes.len() {
                let mut coeffs = Vec::new();
                for (l, link) in net.links.iter().enumerate() {
                    let r = cat.r[&RouteKey {
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
                let form = flow_rhs(instance, k, flow, node);
                for (key, c) in form.terms {
                    if let Some(&x) = cat.x.get(&key) {
                        coeffs.push((x, -c));
                    }
                }
                if coeffs.is_empty() && form.constant == 0.0 {
                    continue;
                }
                lp.add_row(
                    format!("flow[{},{},{}]", svc.id, flow, net.nodes[node]),
                    coeffs,
                    Sense::Eq,
                    form.constant,
                );
            }
        }
    }
    Model {
        program: MixedBinaryProgram { lp, binaries },
        catalog: cat,
    }
}

/// The placement master. FP-I removes placements on clouds unreachable
/// from the source or unable to reach the destination and adds the
/// aggregated reachability rows; FP-II adds the link-capacity rows.
pub fn build_fp(instance: &Instance, variant: FpVariant, reach: &UnreachableSets) -> Model {
    let connect = variant != FpVariant::Fp;
    let (mut lp, mut cat, binaries) = placement_core(instance, |key| {
        !connect || reach.usable_for(key.service, key.cloud)
    });
    if connect {
        add_aggregated_rows(instance, reach, &mut lp, &cat);
    }
    if variant == FpVariant::FpII {
        add_link_capacity_rows(instance, &mut lp, &mut cat);
    }
    Model {
        program: MixedBinaryProgram { lp, binaries },
        catalog: cat,
    }
}

/// `Σ_{v ∉ V(v₀)} x^{k,s}_v <= Σ_{v ∉ V(v₀)} x^{k,s+1}_v`, one row per
/// distinct reachable set; empty `V(v₀)` rows are implied by (1).
fn add_aggregated_rows(
    instance: &Instance,
    reach: &UnreachableSets,
    lp: &mut LinearProgram,
    cat: &VariableCatalog,
) {
    let nc = instance.network.clouds.len();
    let mut sets: BTreeSet<Vec<usize>> = BTreeSet::new();
    for v0 in 0..nc {
        if !reach.from_cloud[v0].is_empty() {
            sets.insert(reach.reachable_from(v0, nc));
        }
    }
    for (k, svc) in instance.services.iter().enumerate() {
        for s in 1..svc.chain_len() {
            for (n, set) in sets.iter().enumerate() {
                let mut coeffs = Vec::new();
                for &v in set {
                    if let Some(&x) = cat.x.get(&PlacementKey::new(k, s, v)) {
                        coeffs.push((x, 1.0));
                    }
                    if let Some(&x) = cat.x.get(&PlacementKey::new(k, s + 1, v)) {
                        coeffs.push((x, -1.0));
                    }
                }
                if !coeffs.is_empty() {
                    lp.add_row(
                        format!("reach[{},{},{}]", svc.id, s, n),
                        coeffs,
                        Sense::Le,
                        0.0,
                    );
                }
            }
        }
    }
}

/// `z` and `w` are kept continuous in `[0, 1]`: they only appear with
/// positive coefficients in `<=` rows, so at integral `x` they can always
/// take the integral value `max(0, ±(x^{s+1} - x^s))`.
fn add_link_capacity_rows(instance: &Instance, lp: &mut LinearProgram, cat: &mut VariableCatalog) {
    let net = &instance.network;
    for (k, svc) in instance.services.iter().enumerate() {
        for s in 1..svc.chain_len() {
            for v in 0..net.clouds.len() {
                let lo = cat.x.get(&PlacementKey::new(k, s, v)).copied();
                let hi = cat.x.get(&PlacementKey::new(k, s + 1, v)).copied();
                let key = PlacementKey::new(k, s, v);
                let tag = format!("{},{},{}", svc.id, s, cloud_name(instance, v));
                // z >= x^{s+1} - x^s is vacuous when x^{s+1} is absent.
                if let Some(hi) = hi {
                    let z = lp.add_var(format!("z[{tag}]"), 0.0, 1.0);
                    cat.z.insert(key, z);
                    let mut coeffs = vec![(z, 1.0), (hi, -1.0)];
                    if let Some(lo) = lo {
                        coeffs.push((lo, 1.0));
                    }
                    lp.add_row(format!("zlin[{tag}]"), coeffs, Sense::Ge, 0.0);
                }
                if let Some(lo) = lo {
                    let w = lp.add_var(format!("w[{tag}]"), 0.0, 1.0);
                    cat.w.insert(key, w);
                    let mut coeffs = vec![(w, 1.0), (lo, -1.0)];
                    if let Some(hi) = hi {
                        coeffs.push((hi, 1.0));
                    }
                    lp.add_row(format!("wlin[{tag}]"), coeffs, Sense::Ge, 0.0);
                }
            }
        }
    }
    for (v, cloud) in net.clouds.iter().enumerate() {
        let name = cloud_name(instance, v).to_string();
        if let Capacity::Finite(cap_in) = net.inbound_capacity(cloud.node) {
            let mut coeffs = Vec::new();
            for (k, svc) in instance.services.iter().enumerate() {
                if let Some(&x) = cat.x.get(&PlacementKey::new(k, 1, v)) {
                    coeffs.push((x, svc.rate_in));
                }
                for s in 1..svc.chain_len() {
                    if let Some(&z) = cat.z.get(&PlacementKey::new(k, s, v)) {
                        coeffs.push((z, svc.flow_rate(s)));
                    }
                }
            }
            if !coeffs.is_empty() {
                coeffs.push((cat.y[v], -cap_in));
                lp.add_row(format!("incap[{name}]"), coeffs, Sense::Le, 0.0);
            }
        }
        if let Capacity::Finite(cap_out) = net.outbound_capacity(cloud.node) {
            let mut coeffs = Vec::new();
            for (k, svc) in instance.services.iter().enumerate() {
                let len = svc.chain_len();
                if let Some(&x) = cat.x.get(&PlacementKey::new(k, len, v)) {
                    coeffs.push((x, svc.flow_rate(len)));
                }
                for s in 1..len {
                    if let Some(&w) = cat.w.get(&PlacementKey::new(k, s, v)) {
                        coeffs.push((w, svc.flow_rate(s)));
                    }
                }
            }
            if !coeffs.is_empty() {
                coeffs.push((cat.y[v], -cap_out));
                lp.add_row(format!("outcap[{name}]"), coeffs, Sense::Le, 0.0);
            }
        }
    }
}

#[cfg(test)]
mod tests;
