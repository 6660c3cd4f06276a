//! Branch and bound for linear programs with binary variables: a depth-first
//! dive until the first incumbent, best-bound afterwards. Child nodes are
//! re-solved from the parent basis by the dual simplex method.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::lp::{solve_lp_warm, LinearProgram, LpConfig, LpOutcome, VarId, WarmStart};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixedBinaryProgram {
    pub lp: LinearProgram,
    pub binaries: Vec<VarId>,
}

impl MixedBinaryProgram {
    /// The LP relaxation with binaries clamped to `[0, 1]`.
    pub fn relaxation(&self) -> LinearProgram {
        let mut lp = self.lp.clone();
        for b in &self.binaries {
            let v = &mut lp.variables[b.0];
            v.lower = v.lower.max(0.0);
            v.upper = v.upper.min(1.0);
        }
        lp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpConfig {
    /// Distance from an integer below which a binary counts as integral.
    pub tol_int: f64,
    /// Relative optimality gap used for pruning.
    pub tol_obj: f64,
    pub node_limit: usize,
    pub deadline: Option<Instant>,
    pub lp: LpConfig,
}

impl Default for MilpConfig {
    fn default() -> Self {
        Self {
            tol_int: 1e-6,
            tol_obj: 1e-9,
            node_limit: 1_000_000,
            deadline: None,
            lp: LpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MilpStatus {
    Optimal(MilpSolution),
    Infeasible,
    /// Limits hit; the best solution found so far, if any.
    NodeLimit(Option<MilpSolution>),
    TimeLimit(Option<MilpSolution>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOutcome {
    pub status: MilpStatus,
    pub nodes: usize,
    /// Root relaxation value, `None` when the root LP is infeasible.
    pub root_bound: Option<f64>,
    /// Best bound after each processed node.
    pub bound_history: Vec<f64>,
}

impl MilpOutcome {
    pub fn solution(&self) -> Option<&MilpSolution> {
        match &self.status {
            MilpStatus::Optimal(s) => Some(s),
            MilpStatus::NodeLimit(s) | MilpStatus::TimeLimit(s) => s.as_ref(),
            MilpStatus::Infeasible => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MilpError {
    #[error("LP relaxation stalled after {iterations} iterations: {reason}")]
    Stalled { iterations: usize, reason: String },
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("variable #{0} is declared binary but its bounds exclude both 0 and 1")]
    BadBinary(usize),
}

struct Node {
    bound: f64,
    id: usize,
    fixings: Vec<(VarId, f64)>,
    /// Optimal basis of the parent node.
    warm: Option<Arc<WarmStart>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

type NodeSolve = Option<(Vec<f64>, f64, Option<Arc<WarmStart>>)>;

fn solve_node(
    base: &LinearProgram,
    fixings: &[(VarId, f64)],
    warm: Option<&WarmStart>,
    cfg: &LpConfig,
) -> Result<NodeSolve, MilpError> {
    let mut lp = base.clone();
    for &(v, val) in fixings {
        lp.variables[v.0].lower = val;
        lp.variables[v.0].upper = val;
    }
    match solve_lp_warm(&lp, cfg, warm) {
        (LpOutcome::Optimal(s), basis) => Ok(Some((s.x, s.objective, basis.map(Arc::new)))),
        (LpOutcome::Infeasible(_), _) => Ok(None),
        (LpOutcome::Unbounded { .. }, _) => Err(MilpError::Unbounded),
        (LpOutcome::Stalled { iterations, reason }, _) => {
            Err(MilpError::Stalled { iterations, reason })
        }
    }
}

/// Most fractional binary, lowest id on ties.
fn branching_variable(binaries: &[VarId], x: &[f64], tol_int: f64) -> Option<VarId> {
    let mut best: Option<(VarId, f64)> = None;
    for &b in binaries {
        let frac = (x[b.0] - x[b.0].floor()).min(x[b.0].ceil() - x[b.0]);
        if frac > tol_int && best.is_none_or(|(bv, bf)| frac > bf || (frac == bf && b < bv)) {
            best = Some((b, frac));
        }
    }
    best.map(|(b, _)| b)
}

pub fn solve_milp(
    problem: &MixedBinaryProgram,
    config: &MilpConfig,
) -> Result<MilpOutcome, MilpError> {
    for b in &problem.binaries {
        let v = &problem.lp.variables[b.0];
        if v.lower > 1.0 || v.upper < 0.0 {
            return Err(MilpError::BadBinary(b.0));
        }
    }
    let base = problem.relaxation();
    // With integer costs on binaries only, every node bound rounds up.
    let integral_objective = problem.lp.objective.iter().all(|&(v, c)| {
        c == 0.0 || (problem.binaries.contains(&v) && (c - c.round()).abs() <= 1e-9)
    });
    let tighten = |z: f64| {
        if integral_objective {
            (z - 1e-6).ceil()
        } else {
            z
        }
    };
    let mut heap = BinaryHeap::new();
    // Depth-first dive used until the first incumbent is found.
    let mut dive: Vec<Node> = Vec::new();
    let mut incumbent: Option<MilpSolution> = None;
    let mut nodes = 0usize;
    let mut next_id = 0usize;
    let mut bound_history = Vec::new();

    let prune = |bound: f64, inc: &Option<MilpSolution>| match inc {
        Some(s) => bound >= s.objective - config.tol_obj * s.objective.abs().max(1.0),
        None => false,
    };

    // Root.
    let root = solve_node(&base, &[], None, &config.lp)?;
    nodes += 1;
    let Some((x0, z0, w0)) = root else {
        return Ok(MilpOutcome {
            status: MilpStatus::Infeasible,
            nodes,
            root_bound: None,
            bound_history,
        });
    };
    let root_bound = Some(z0);
    let mut pending = vec![(x0, tighten(z0), Vec::new(), w0)];

    loop {
        // Expand freshly solved nodes: record incumbents or push children.
        for (x, z, fixings, warm) in pending.drain(..) {
            if prune(z, &incumbent) {
                continue;
            }
            match branching_variable(&problem.binaries, &x, config.tol_int) {
                None => {
                    let mut x = x;
                    for b in &problem.binaries {
                        x[b.0] = x[b.0].round();
                    }
                    let objective = problem.lp.objective_value(&x);
                    if incumbent.as_ref().is_none_or(|s| objective < s.objective) {
                        incumbent = Some(MilpSolution { x, objective });
                    }
                }
                Some(v) => {
                    let mut down: Vec<(VarId, f64)> = fixings.clone();
                    down.push((v, 0.0));
                    let mut up = fixings;
                    up.push((v, 1.0));
                    let children = [
                        Node {
                            bound: z,
                            id: next_id,
                            fixings: down,
                            warm: warm.clone(),
                        },
                        Node {
                            bound: z,
                            id: next_id + 1,
                            fixings: up,
                            warm,
                        },
                    ];
                    next_id += 2;
                    if incumbent.is_none() {
                        // The up branch is popped first.
                        dive.extend(children);
                    } else {
                        heap.extend(children);
                    }
                }
            }
        }
        if incumbent.is_some() {
            heap.extend(dive.drain(..));
        }
        let best_open = heap
            .iter()
            .chain(&dive)
            .map(|n| n.bound)
            .min_by(f64::total_cmp);
        let global = match (&incumbent, best_open) {
            (Some(s), Some(b)) => b.min(s.objective),
            (Some(s), None) => s.objective,
            (None, Some(b)) => b,
            (None, None) => f64::INFINITY,
        };
        bound_history.push(global);

        let Some(node) = dive.pop().or_else(|| heap.pop()) else {
            break;
        };
        if prune(node.bound, &incumbent) {
            heap.clear();
            break;
        }
        if nodes >= config.node_limit {
            heap.push(node);
            return Ok(MilpOutcome {
                status: MilpStatus::NodeLimit(incumbent),
                nodes,
                root_bound,
                bound_history,
            });
        }
        if config.deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok(MilpOutcome {
                status: MilpStatus::TimeLimit(incumbent),
                nodes,
                root_bound,
                bound_history,
            });
        }
        nodes += 1;
        if let Some((x, z, warm)) =
            solve_node(&base, &node.fixings, node.warm.as_deref(), &config.lp)?
        {
            pending.push((x, tighten(z), node.fixings, warm));
        }
    }

    let status = match incumbent {
        Some(s) => MilpStatus::Optimal(s),
        None => MilpStatus::Infeasible,
    };
    Ok(MilpOutcome {
        status,
        nodes,
        root_bound,
        bound_history,
    })
}

/// Optimal value of the LP relaxation, or `None` when it is infeasible.
pub fn root_relaxation_value(
    problem: &MixedBinaryProgram,
    config: &LpConfig,
) -> Result<Option<f64>, MilpError> {
    Ok(solve_node(&problem.relaxation(), &[], None, config)?.map(|(_, z, _)| z))
}
