//! Comparison algorithms: the full model solved directly, and two LP
//! rounding heuristics (one-shot and dynamic).
//!
//! The rounding rules are reconstructions. One-shot rounding sends each
//! stage to the cloud with the largest LP value (lowest node id on ties).
//! Dynamic rounding repeatedly fixes the stage whose best fractional value
//! is largest and re-solves. Both then check node capacities and routing.

use std::time::{Duration, Instant};

use crate::formulations::{build_ns, build_tr, Model, PlacementKey};
use crate::instance::{Instance, Placement};
use crate::lp::{solve_lp, LpConfig, LpOutcome};
use crate::milp::{solve_milp, MilpConfig, MilpStatus};
use crate::oracle::within_node_capacity;
use crate::solution::NsSolution;

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineOutcome {
    Feasible {
        objective: f64,
        solution: NsSolution,
        proven_optimal: bool,
    },
    InfeasibleOrFailed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub outcome: BaselineOutcome,
    pub runtime: Duration,
    /// A node or time limit stopped the search early.
    pub limit_reached: bool,
}

impl BaselineResult {
    pub fn objective(&self) -> Option<f64> {
        match &self.outcome {
            BaselineOutcome::Feasible { objective, .. } => Some(*objective),
            BaselineOutcome::InfeasibleOrFailed { .. } => None,
        }
    }
}

fn failed(reason: impl Into<String>, start: Instant) -> BaselineResult {
    BaselineResult {
        outcome: BaselineOutcome::InfeasibleOrFailed {
            reason: reason.into(),
        },
        runtime: start.elapsed(),
        limit_reached: false,
    }
}

fn ns_solution_from_vector(
    instance: &Instance,
    model: &Model,
    x: &[f64],
    objective: f64,
) -> Option<NsSolution> {
    let placement = model.catalog.placement(instance, x).ok()?;
    let routing = model
        .catalog
        .r
        .iter()
        .map(|(&k, v)| (k, x[v.0]))
        .filter(|&(_, r)| r != 0.0)
        .collect();
    Some(NsSolution {
        placement,
        activation: model.catalog.activation(x),
        routing,
        objective,
    })
}

/// Solve the full mixed-binary model by branch and bound.
pub fn solve_direct(instance: &Instance, config: &MilpConfig) -> BaselineResult {
    let start = Instant::now();
    let model = build_ns(instance);
    let out = match solve_milp(&model.program, config) {
        Ok(o) => o,
        Err(e) => return failed(e.to_string(), start),
    };
    let (sol, proven) = match out.status {
        MilpStatus::Optimal(s) => (s, true),
        MilpStatus::Infeasible => return failed("infeasible", start),
        MilpStatus::NodeLimit(Some(s)) | MilpStatus::TimeLimit(Some(s)) => (s, false),
        MilpStatus::NodeLimit(None) => {
            return BaselineResult {
                limit_reached: true,
                ..failed("node limit without incumbent", start)
            }
        }
        MilpStatus::TimeLimit(None) => {
            return BaselineResult {
                limit_reached: true,
                ..failed("time limit without incumbent", start)
            }
        }
    };
    match ns_solution_from_vector(instance, &model, &sol.x, sol.objective) {
        Some(solution) => BaselineResult {
            outcome: BaselineOutcome::Feasible {
                objective: sol.objective,
                solution,
                proven_optimal: proven,
            },
            runtime: start.elapsed(),
            limit_reached: !proven,
        },
        None => failed("solution vector does not encode a placement", start),
    }
}

/// Node capacity and routing check for a rounded placement, with minimal
/// activation.
fn finish_rounding(
    instance: &Instance,
    placement: Placement,
    config: &LpConfig,
    start: Instant,
) -> BaselineResult {
    if !within_node_capacity(instance, &placement) {
        return failed("rounded placement exceeds a node capacity", start);
    }
    let tr = match build_tr(instance, &placement) {
        Ok(tr) => tr,
        Err(e) => return failed(e.to_string(), start),
    };
    match solve_lp(&tr.lp, config) {
        LpOutcome::Optimal(r) => {
            let activation = placement.active_clouds(instance.network.clouds.len());
            let objective = placement.cost(instance);
            let solution = NsSolution {
                routing: tr.routing(&r.x),
                placement,
                activation,
                objective,
            };
            BaselineResult {
                outcome: BaselineOutcome::Feasible {
                    objective,
                    solution,
                    proven_optimal: false,
                },
                runtime: start.elapsed(),
                limit_reached: false,
            }
        }
        LpOutcome::Infeasible(_) => failed("rounded placement cannot be routed", start),
        other => failed(format!("routing LP {}", other.status_name()), start),
    }
}

/// Stage keys of the model grouped by `(service, stage)`, clouds in
/// ascending node id.
fn stage_groups(instance: &Instance, model: &Model) -> Vec<Vec<PlacementKey>> {
    let mut groups = Vec::new();
    for (k, svc) in instance.services.iter().enumerate() {
        for s in 1..=svc.chain_len() {
            let mut keys: Vec<PlacementKey> = model
                .catalog
                .x
                .keys()
                .filter(|key| key.service == k && key.stage == s)
                .copied()
                .collect();
            keys.sort_by_key(|key| instance.network.clouds[key.cloud].node);
            groups.push(keys);
        }
    }
    groups
}

/// Highest LP value in the group; the first (lowest node id) wins ties.
fn argmax(model: &Model, group: &[PlacementKey], x: &[f64]) -> Option<(PlacementKey, f64)> {
    group.iter().fold(None, |best, &key| {
        let v = x[model.catalog.x[&key].0];
        match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((key, v)),
        }
    })
}

fn relaxation_point(model: &Model, config: &LpConfig) -> Result<Vec<f64>, String> {
    let lp = model.program.relaxation();
    match solve_lp(&lp, config) {
        LpOutcome::Optimal(s) => Ok(s.x),
        other => Err(format!("LP relaxation {}", other.status_name())),
    }
}

fn to_placement(instance: &Instance, chosen: &[PlacementKey]) -> Placement {
    let mut chains: Vec<Vec<usize>> = instance
        .services
        .iter()
        .map(|s| vec![0; s.chain_len()])
        .collect();
    for key in chosen {
        chains[key.service][key.stage - 1] = key.cloud;
    }
    Placement(chains)
}

/// Round the LP relaxation of the full model once.
pub fn solve_lp_one_shot_rounding(instance: &Instance, config: &LpConfig) -> BaselineResult {
    let start = Instant::now();
    let model = build_ns(instance);
    let x = match relaxation_point(&model, config) {
        Ok(x) => x,
        Err(e) => return failed(e, start),
    };
    let mut chosen = Vec::new();
    for group in stage_groups(instance, &model) {
        match argmax(&model, &group, &x) {
            Some((key, _)) => chosen.push(key),
            None => return failed("a stage has no permitted cloud", start),
        }
    }
    finish_rounding(instance, to_placement(instance, &chosen), config, start)
}

/// Fix one stage at a time, re-solving the relaxation after each fixing.
pub fn solve_lp_dynamic_rounding(
    instance: &Instance,
    config: &LpConfig,
    tol_int: f64,
) -> BaselineResult {
    let start = Instant::now();
    let mut model = build_ns(instance);
    let groups = stage_groups(instance, &model);
    let mut placed: Vec<Option<PlacementKey>> = vec![None; groups.len()];

    let fix = |model: &mut Model, group: &[PlacementKey], chosen: PlacementKey| {
        for key in group {
            let v = &mut model.program.lp.variables[model.catalog.x[key].0];
            let val = if *key == chosen { 1.0 } else { 0.0 };
            v.lower = val;
            v.upper = val;
        }
    };

    while placed.iter().any(Option::is_none) {
        let x = match relaxation_point(&model, config) {
            Ok(x) => x,
            Err(e) => return failed(e, start),
        };
        // Stages already integral in the relaxation are taken as they are.
        let mut best: Option<(usize, PlacementKey, f64)> = None;
        for (g, group) in groups.iter().enumerate() {
            if placed[g].is_some() {
                continue;
            }
            let Some((key, v)) = argmax(&model, group, &x) else {
                return failed("a stage has no permitted cloud", start);
            };
            if v >= 1.0 - tol_int {
                placed[g] = Some(key);
                fix(&mut model, group, key);
            } else if best.is_none_or(|(_, _, bv)| v > bv) {
                best = Some((g, key, v));
            }
        }
        if let Some((g, key, _)) = best {
            placed[g] = Some(key);
            fix(&mut model, &groups[g], key);
        }
    }
    let chosen: Vec<PlacementKey> = placed.into_iter().flatten().collect();
    finish_rounding(instance, to_placement(instance, &chosen), config, start)
}
