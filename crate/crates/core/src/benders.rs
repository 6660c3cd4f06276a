//! The decomposition loop: solve the placement master with the cuts found
//! so far, try to route the resulting placement, and either stop or add a
//! feasibility cut built from the routing LP's infeasibility certificate.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::formulations::{
    build_fp, build_tr, materialize_cut, BendersCut, CutError, FpVariant, Model, PlacementError,
    RouteKey, TrError,
};
use crate::instance::{validate, Instance, Placement};
use crate::lp::{solve_lp, FarkasCertificate, LpOutcome, Sense};
use crate::milp::{solve_milp, MilpConfig, MilpError, MilpStatus};
use crate::reachability::analyze;

#[derive(Debug, Clone, PartialEq)]
pub struct CbdConfig {
    /// Maximum number of master solves; `usize::MAX` means no limit.
    pub iter_max: usize,
    pub variant: FpVariant,
    pub milp: MilpConfig,
    pub time_limit: Option<Duration>,
}

impl Default for CbdConfig {
    fn default() -> Self {
        Self {
            iter_max: usize::MAX,
            variant: FpVariant::FpII,
            milp: MilpConfig::default(),
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbdSolution {
    pub placement: Placement,
    pub activation: Vec<bool>,
    /// Nonzero routing fractions.
    pub routing: BTreeMap<RouteKey, f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CbdStatus {
    Optimal(CbdSolution),
    Infeasible,
    IterLimit,
    TimeLimit,
}

impl CbdStatus {
    pub fn name(&self) -> &'static str {
        match self {
            CbdStatus::Optimal(_) => "optimal",
            CbdStatus::Infeasible => "infeasible",
            CbdStatus::IterLimit => "iteration_limit",
            CbdStatus::TimeLimit => "time_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrStatus {
    Feasible,
    Infeasible,
    /// The master was infeasible or hit the time limit.
    NotRun,
}

impl TrStatus {
    pub fn name(&self) -> &'static str {
        match self {
            TrStatus::Feasible => "feasible",
            TrStatus::Infeasible => "infeasible",
            TrStatus::NotRun => "not_run",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub master_objective: Option<f64>,
    pub master_nodes: usize,
    pub tr_status: TrStatus,
    pub cut_nnz: Option<usize>,
    pub cum_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbdResult {
    pub status: CbdStatus,
    pub iterations: Vec<IterationRecord>,
    pub cuts: Vec<BendersCut>,
    /// Placements returned by the master, in order.
    pub visited: Vec<Placement>,
    pub elapsed: Duration,
}

impl CbdResult {
    pub fn objective(&self) -> Option<f64> {
        match &self.status {
            CbdStatus::Optimal(s) => Some(s.objective),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CbdError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid instance:\n{0}")]
    Instance(String),
    #[error("master problem: {0}")]
    Master(#[from] MilpError),
    #[error("master problem hit its node limit in iteration {0}")]
    MasterNodeLimit(usize),
    #[error("master returned a malformed placement: {0}")]
    Placement(#[from] PlacementError),
    #[error("routing subproblem: {0}")]
    Routing(String),
    #[error(
        "iteration {iteration}: cut construction failed ({source}); certificate {certificate:?}"
    )]
    Cut {
        iteration: usize,
        source: CutError,
        certificate: FarkasCertificate,
    },
    #[error("iteration {iteration}: master returned placement {placement:?} that an earlier cut excludes")]
    Revisited {
        iteration: usize,
        placement: Placement,
    },
}

impl From<TrError> for CbdError {
    fn from(e: TrError) -> Self {
        CbdError::Routing(e.to_string())
    }
}

/// Append `cut` to the master as `Σ c x >= -constant`. Placement variables
/// absent from the master are fixed at zero and dropped.
fn add_cut(master: &mut Model, cut: &BendersCut, index: usize) {
    let coeffs = cut
        .coeffs
        .iter()
        .filter_map(|(k, &c)| master.catalog.x.get(k).map(|&v| (v, c)))
        .collect();
    master
        .program
        .lp
        .add_row(format!("cut[{index}]"), coeffs, Sense::Ge, -cut.constant);
}

pub fn solve_cbd(instance: &Instance, config: &CbdConfig) -> Result<CbdResult, CbdError> {
    if config.iter_max == 0 {
        return Err(CbdError::Config("iter_max must be at least 1".into()));
    }
    let report = validate(instance);
    if !report.is_valid() {
        return Err(CbdError::Instance(report.to_string()));
    }
    let start = Instant::now();
    let deadline = config.time_limit.map(|t| start + t);
    let milp = MilpConfig {
        deadline,
        ..config.milp.clone()
    };
    let tol_cert = config.milp.lp.tol_cert;

    let reach = analyze(instance);
    let mut master = build_fp(instance, config.variant, &reach);
    let mut iterations = Vec::new();
    let mut cuts: Vec<BendersCut> = Vec::new();
    let mut visited = Vec::new();
    let mut seen = BTreeSet::new();

    let finish = |status, iterations, cuts, visited| CbdResult {
        status,
        iterations,
        cuts,
        visited,
        elapsed: start.elapsed(),
    };
    let mut t = 0usize;
    while t < config.iter_max {
        t += 1;
        let record = |obj, nodes, tr, nnz| IterationRecord {
            iteration: t,
            master_objective: obj,
            master_nodes: nodes,
            tr_status: tr,
            cut_nnz: nnz,
            cum_time_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok(finish(CbdStatus::TimeLimit, iterations, cuts, visited));
        }
        let out = solve_milp(&master.program, &milp)?;
        let sol = match out.status {
            MilpStatus::Optimal(s) => s,
            MilpStatus::Infeasible => {
                iterations.push(record(None, out.nodes, TrStatus::NotRun, None));
                return Ok(finish(CbdStatus::Infeasible, iterations, cuts, visited));
            }
            MilpStatus::TimeLimit(_) => {
                iterations.push(record(None, out.nodes, TrStatus::NotRun, None));
                return Ok(finish(CbdStatus::TimeLimit, iterations, cuts, visited));
            }
            MilpStatus::NodeLimit(_) => return Err(CbdError::MasterNodeLimit(t)),
        };
        let placement = master.catalog.placement(instance, &sol.x)?;
        if !seen.insert(placement.clone()) || cuts.iter().any(|c| c.lhs_at(&placement) < -tol_cert)
        {
            return Err(CbdError::Revisited {
                iteration: t,
                placement,
            });
        }
        visited.push(placement.clone());

        let tr = build_tr(instance, &placement)?;
        match solve_lp(&tr.lp, &config.milp.lp) {
            LpOutcome::Optimal(r) => {
                iterations.push(record(
                    Some(sol.objective),
                    out.nodes,
                    TrStatus::Feasible,
                    None,
                ));
                let solution = CbdSolution {
                    activation: master.catalog.activation(&sol.x),
                    routing: tr.routing(&r.x),
                    placement,
                    objective: sol.objective,
                };
                return Ok(finish(
                    CbdStatus::Optimal(solution),
                    iterations,
                    cuts,
                    visited,
                ));
            }
            LpOutcome::Infeasible(cert) => {
                let mut cut =
                    materialize_cut(instance, &tr, &cert, tol_cert).map_err(|source| {
                        CbdError::Cut {
                            iteration: t,
                            source,
                            certificate: cert.clone(),
                        }
                    })?;
                cut.iteration = t;
                cut.certificate_id = cuts.len();
                iterations.push(record(
                    Some(sol.objective),
                    out.nodes,
                    TrStatus::Infeasible,
                    Some(cut.nnz()),
                ));
                add_cut(&mut master, &cut, cuts.len());
                cuts.push(cut);
            }
            LpOutcome::Unbounded { .. } => {
                return Err(CbdError::Routing(
                    "feasibility LP reported unbounded".into(),
                ))
            }
            LpOutcome::Stalled { reason, .. } => return Err(CbdError::Routing(reason)),
        }
    }
    Ok(finish(CbdStatus::IterLimit, iterations, cuts, visited))
}

/// Iteration trace as CSV.
pub fn write_trace_csv<W: Write>(records: &[IterationRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "master_obj",
        "tr_status",
        "cut_nnz",
        "cum_time_ms",
    ])?;
    for r in records {
        w.write_record([
            r.iteration.to_string(),
            r.master_objective.map_or(String::new(), |v| v.to_string()),
            r.tr_status.name().to_string(),
            r.cut_nnz.map_or(String::new(), |v| v.to_string()),
            format!("{:.3}", r.cum_time_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Optimal values behind the gap-improvement metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub nu_fp: Option<f64>,
    pub nu_fp1: Option<f64>,
    pub nu_fp2: Option<f64>,
    pub nu_ns: Option<f64>,
    /// `None` when the metric is undefined.
    pub fp_i: Option<f64>,
    pub fp_ii: Option<f64>,
}

/// Fraction of the `ν(NS) - ν(FP)` gap closed by each strengthened master.
pub fn gap_improvement(instance: &Instance, config: &CbdConfig) -> Result<GapReport, CbdError> {
    let reach = analyze(instance);
    let master_value = |variant| -> Result<Option<f64>, CbdError> {
        let model = build_fp(instance, variant, &reach);
        match solve_milp(&model.program, &config.milp)?.status {
            MilpStatus::Optimal(s) => Ok(Some(s.objective)),
            MilpStatus::Infeasible => Ok(None),
            _ => Err(CbdError::MasterNodeLimit(0)),
        }
    };
    let nu_fp = master_value(FpVariant::Fp)?;
    let nu_fp1 = master_value(FpVariant::FpI)?;
    let nu_fp2 = master_value(FpVariant::FpII)?;
    let exact = CbdConfig {
        iter_max: usize::MAX,
        variant: FpVariant::FpII,
        ..config.clone()
    };
    let nu_ns = solve_cbd(instance, &exact)?.objective();
    let ratio = |nu: Option<f64>| -> Option<f64> {
        let (base, top, v) = (nu_fp?, nu_ns?, nu?);
        let denom = top - base;
        (denom > 1e-6 * top.abs().max(1.0)).then(|| ((v - base) / denom).clamp(0.0, 1.0))
    };
    Ok(GapReport {
        fp_i: ratio(nu_fp1),
        fp_ii: ratio(nu_fp2),
        nu_fp,
        nu_fp1,
        nu_fp2,
        nu_ns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{examples, generate, GeneratorConfig};

    #[test]
    fn diamond_with_fp1_needs_cuts() {
        let cfg = CbdConfig {
            variant: FpVariant::FpI,
            ..Default::default()
        };
        let r = solve_cbd(&examples::diamond(), &cfg).unwrap();
        assert_eq!(r.objective(), Some(3.0));
        assert!(r.iterations.len() >= 2);
        assert_eq!(r.visited[0], Placement(vec![vec![0], vec![0]]));
        let objs: Vec<f64> = r
            .iterations
            .iter()
            .filter_map(|i| i.master_objective)
            .collect();
        assert!(objs.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn diamond_with_fp2_is_immediate() {
        let r = solve_cbd(&examples::diamond(), &CbdConfig::default()).unwrap();
        assert_eq!(r.objective(), Some(3.0));
        assert_eq!(r.iterations.len(), 1);
        assert!(r.cuts.is_empty());
    }

    #[test]
    fn iteration_budget() {
        let cfg = CbdConfig {
            variant: FpVariant::FpI,
            iter_max: 1,
            ..Default::default()
        };
        let r = solve_cbd(&examples::diamond(), &cfg).unwrap();
        assert_eq!(r.status, CbdStatus::IterLimit);
        assert!(matches!(
            solve_cbd(
                &examples::diamond(),
                &CbdConfig {
                    iter_max: 0,
                    ..Default::default()
                }
            ),
            Err(CbdError::Config(_))
        ));
    }

    #[test]
    fn infinite_links_take_one_iteration() {
        for seed in 0..10 {
            let cfg = GeneratorConfig {
                nodes: 12,
                clouds: 4,
                services: 3,
                chain_length: 3,
                infinite_links: true,
                link_removal_probability: 0.3,
                seed,
                ..Default::default()
            };
            let inst = generate(&cfg).unwrap();
            for variant in [FpVariant::FpI, FpVariant::FpII] {
                let r = solve_cbd(
                    &inst,
                    &CbdConfig {
                        variant,
                        ..Default::default()
                    },
                )
                .unwrap();
                assert_eq!(r.iterations.len(), 1, "seed {seed} {variant:?}");
            }
        }
    }

    #[test]
    fn diamond_gap_improvement() {
        let g = gap_improvement(&examples::diamond(), &CbdConfig::default()).unwrap();
        assert_eq!(
            (g.nu_fp, g.nu_fp1, g.nu_fp2, g.nu_ns),
            (Some(1.0), Some(1.0), Some(3.0), Some(3.0))
        );
        assert_eq!(g.fp_i, Some(0.0));
        assert_eq!(g.fp_ii, Some(1.0));
    }

    #[test]
    fn chain_gap_is_closed_by_connectivity() {
        // FP puts f1 on node 3 for free and sends f2 back upstream.
        let g = gap_improvement(&examples::chain_of_three(), &CbdConfig::default()).unwrap();
        assert_eq!(
            (g.nu_fp, g.nu_fp1, g.nu_ns),
            (Some(0.0), Some(1.0), Some(1.0))
        );
        assert_eq!((g.fp_i, g.fp_ii), (Some(1.0), Some(1.0)));
    }

    #[test]
    fn bottleneck_away_from_clouds_is_invisible_to_the_masters() {
        use crate::instance::{Capacity, CloudNode, Link, Network, Service, Stage};
        let link = |tail, head, c| Link {
            tail,
            head,
            capacity: Capacity::Finite(c),
        };
        let inst = Instance {
            network: Network {
                nodes: ["S", "M", "V1", "V2", "D"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                links: vec![
                    link(0, 1, 1.0),
                    link(1, 2, 10.0),
                    link(2, 4, 10.0),
                    link(0, 3, 10.0),
                    link(3, 4, 10.0),
                ],
                clouds: vec![
                    CloudNode {
                        node: 2,
                        capacity: Capacity::Finite(10.0),
                        power: 1.0,
                    },
                    CloudNode {
                        node: 3,
                        capacity: Capacity::Finite(10.0),
                        power: 5.0,
                    },
                ],
            },
            services: vec![Service {
                id: "a".into(),
                source: 0,
                destination: 4,
                rate_in: 2.0,
                chain: vec![Stage {
                    function: "f".into(),
                    rate: 2.0,
                    costs: [(0, 0.0), (1, 0.0)].into(),
                }],
            }],
        };
        let g = gap_improvement(&inst, &CbdConfig::default()).unwrap();
        assert_eq!(
            (g.nu_fp, g.nu_fp2, g.nu_ns),
            (Some(1.0), Some(1.0), Some(5.0))
        );
        assert_eq!((g.fp_i, g.fp_ii), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn fully_connected_uncapacitated_gap_is_undefined() {
        let cfg = GeneratorConfig {
            nodes: 9,
            clouds: 3,
            services: 2,
            chain_length: 2,
            infinite_links: true,
            link_removal_probability: 0.0,
            ..Default::default()
        };
        let g = gap_improvement(&generate(&cfg).unwrap(), &CbdConfig::default()).unwrap();
        assert_eq!(g.nu_fp, g.nu_ns);
        assert_eq!((g.fp_i, g.fp_ii), (None, None));
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let cfg = CbdConfig {
            variant: FpVariant::FpI,
            ..Default::default()
        };
        let r = solve_cbd(&examples::diamond(), &cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&r.iterations, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("iteration,master_obj,tr_status,cut_nnz,cum_time_ms")
        );
        assert_eq!(lines.count(), r.iterations.len());
        assert!(text.contains(",infeasible,"));
    }
}
