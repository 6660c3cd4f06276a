//! Exhaustive ground truth for tiny instances.
//!
//! Placements are enumerated directly and each candidate's routing LP is
//! assembled here from first principles (origin and target of every flow),
//! sharing no model-building code with [`crate::formulations`].

use rayon::prelude::*;
use thiserror::Error;

use crate::instance::{Capacity, Instance, Placement};
use crate::lp::{solve_lp, LinearProgram, LpConfig, LpOutcome, Sense};

/// Largest placement space the oracle will enumerate.
pub const PLACEMENT_GUARD: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleResult {
    Optimal {
        objective: f64,
        placement: Placement,
    },
    Infeasible,
}

impl OracleResult {
    pub fn objective(&self) -> Option<f64> {
        match self {
            OracleResult::Optimal { objective, .. } => Some(*objective),
            OracleResult::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("placement space {0:.3e} exceeds the enumeration guard")]
    TooLarge(f64),
    #[error("routing LP stalled: {0}")]
    Stalled(String),
}

/// Every placement on permitted clouds, in lexicographic order.
pub fn all_placements(instance: &Instance) -> Result<Vec<Placement>, OracleError> {
    let space = instance.placement_space();
    if space > PLACEMENT_GUARD {
        return Err(OracleError::TooLarge(space));
    }
    let slots: Vec<(usize, Vec<usize>)> = instance
        .services
        .iter()
        .enumerate()
        .flat_map(|(k, svc)| {
            svc.chain
                .iter()
                .map(move |st| (k, st.costs.keys().copied().collect::<Vec<_>>()))
        })
        .collect();
    let mut out = Vec::new();
    let mut choice = vec![0usize; slots.len()];
    if slots.iter().any(|(_, c)| c.is_empty()) {
        return Ok(out);
    }
    loop {
        let mut chains: Vec<Vec<usize>> = instance
            .services
            .iter()
            .map(|s| Vec::with_capacity(s.chain_len()))
            .collect();
        for (i, (k, opts)) in slots.iter().enumerate() {
            chains[*k].push(opts[choice[i]]);
        }
        out.push(Placement(chains));
        // Odometer increment, last slot fastest.
        let mut i = slots.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < slots[i].1.len() {
                break;
            }
            choice[i] = 0;
        }
    }
}

/// Node capacities respected under minimal activation.
pub fn within_node_capacity(instance: &Instance, placement: &Placement) -> bool {
    let mut load = vec![0.0; instance.network.clouds.len()];
    for (svc, chain) in instance.services.iter().zip(&placement.0) {
        for (i, &c) in chain.iter().enumerate() {
            load[c] += svc.chain[i].rate;
        }
    }
    instance
        .network
        .clouds
        .iter()
        .zip(&load)
        .all(|(c, &l)| match c.capacity {
            Capacity::Finite(mu) => l <= mu + 1e-9,
            Capacity::Infinite => true,
        })
}

/// Multicommodity feasibility LP: one unit commodity per flow from the
/// node emitting it to the node consuming it.
fn routing_lp(instance: &Instance, placement: &Placement) -> LinearProgram {
    let net = &instance.network;
    let mut lp = LinearProgram::new();
    let mut link_terms: Vec<Vec<(crate::lp::VarId, f64)>> = vec![Vec::new(); net.links.len()];
    for (k, svc) in instance.services.iter().enumerate() {
        let hosts: Vec<usize> = placement.0[k].iter().map(|&c| net.clouds[c].node).collect();
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
            let rate = if flow == 0 {
                svc.rate_in
            } else {
                svc.chain[flow - 1].rate
            };
            let vars: Vec<_> = (0..net.links.len())
                .map(|l| lp.add_var(format!("f{k}_{flow}_{l}"), 0.0, f64::INFINITY))
                .collect();
            for (l, &v) in vars.iter().enumerate() {
                link_terms[l].push((v, rate));
            }
            if origin == target {
                continue;
            }
            for node in 0..net.nodes.len() {
                let mut coeffs = Vec::new();
                for (l, link) in net.links.iter().enumerate() {
                    if link.tail == node {
                        coeffs.push((vars[l], 1.0));
                    }
                    if link.head == node {
                        coeffs.push((vars[l], -1.0));
                    }
                }
                // outflow - inflow = supply
                let supply = (node == origin) as u8 as f64 - (node == target) as u8 as f64;
                lp.add_row(format!("bal{k}_{flow}_{node}"), coeffs, Sense::Eq, supply);
            }
        }
    }
    for (l, link) in net.links.iter().enumerate() {
        if let Capacity::Finite(c) = link.capacity {
            lp.add_row(
                format!("cap{l}"),
                std::mem::take(&mut link_terms[l]),
                Sense::Le,
                c,
            );
        }
    }
    lp
}

/// Whether the flows of `placement` can be routed within link capacities.
pub fn routable(instance: &Instance, placement: &Placement) -> Result<bool, OracleError> {
    match solve_lp(&routing_lp(instance, placement), &LpConfig::default()) {
        LpOutcome::Optimal(_) => Ok(true),
        LpOutcome::Infeasible(_) => Ok(false),
        LpOutcome::Unbounded { .. } => Err(OracleError::Stalled(
            "zero objective reported unbounded".into(),
        )),
        LpOutcome::Stalled { reason, .. } => Err(OracleError::Stalled(reason)),
    }
}

/// All routable placements, optionally also requiring node capacities.
pub fn enumerate_routable(
    instance: &Instance,
    node_capacity: bool,
) -> Result<Vec<Placement>, OracleError> {
    let candidates: Vec<Placement> = all_placements(instance)?
        .into_iter()
        .filter(|p| !node_capacity || within_node_capacity(instance, p))
        .collect();
    let checked: Result<Vec<Option<Placement>>, OracleError> = candidates
        .into_par_iter()
        .map(|p| Ok(routable(instance, &p)?.then_some(p)))
        .collect();
    Ok(checked?.into_iter().flatten().collect())
}

/// Minimum-cost feasible placement by exhaustive enumeration; ties go to
/// the lexicographically smallest placement.
pub fn brute_force_ns(instance: &Instance) -> Result<OracleResult, OracleError> {
    let feasible = enumerate_routable(instance, true)?;
    let best = feasible
        .into_iter()
        .map(|p| (p.cost(instance), p))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(match best {
        Some((objective, placement)) => OracleResult::Optimal {
            objective,
            placement,
        },
        None => OracleResult::Infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{examples, generate, GeneratorConfig};

    #[test]
    fn chain_example() {
        let r = brute_force_ns(&examples::chain_of_three()).unwrap();
        assert_eq!(r.objective(), Some(1.0));
        assert_eq!(
            all_placements(&examples::chain_of_three()).unwrap().len(),
            9
        );
    }

    #[test]
    fn diamond_example() {
        let inst = examples::diamond();
        assert_eq!(brute_force_ns(&inst).unwrap().objective(), Some(3.0));
        assert_eq!(enumerate_routable(&inst, true).unwrap().len(), 2);
    }

    #[test]
    fn zero_services() {
        let mut inst = examples::diamond();
        inst.services.clear();
        let r = brute_force_ns(&inst).unwrap();
        let OracleResult::Optimal {
            objective,
            placement,
        } = r
        else {
            panic!()
        };
        assert_eq!(objective, 0.0);
        assert!(placement.active_clouds(2).iter().all(|&on| !on));
    }

    #[test]
    fn guard_is_enforced() {
        let cfg = GeneratorConfig {
            nodes: 30,
            clouds: 10,
            services: 4,
            chain_length: 2,
            ..Default::default()
        };
        let inst = generate(&cfg).unwrap();
        assert!(matches!(
            brute_force_ns(&inst),
            Err(OracleError::TooLarge(_))
        ));
    }

    #[test]
    fn excess_demand_is_infeasible() {
        let mut inst = examples::diamond();
        for s in &mut inst.services {
            s.chain[0].rate = 3.0;
        }
        assert_eq!(brute_force_ns(&inst).unwrap(), OracleResult::Infeasible);
    }
}
