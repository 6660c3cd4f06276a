use super::*;
use crate::instance::{
    examples, generate, CloudNode, GeneratorConfig, Link, Network, Service, Stage,
};
use crate::lp::{solve_lp, FarkasCertificate, LpConfig, LpOutcome};
use crate::milp::{root_relaxation_value, solve_milp, MilpConfig, MilpStatus};
use crate::reachability::analyze;

fn optimum(model: &Model) -> Option<f64> {
    match solve_milp(&model.program, &MilpConfig::default())
        .unwrap()
        .status
    {
        MilpStatus::Optimal(s) => Some(s.objective),
        MilpStatus::Infeasible => None,
        other => panic!("limit hit: {other:?}"),
    }
}

fn relaxation(model: &Model) -> f64 {
    root_relaxation_value(&model.program, &LpConfig::default())
        .unwrap()
        .unwrap()
}

fn tr_outcome(instance: &Instance, placement: &Placement) -> (TrSystem, LpOutcome) {
    let tr = build_tr(instance, placement).unwrap();
    let out = solve_lp(&tr.lp, &LpConfig::default());
    (tr, out)
}

#[test]
fn diamond_ns_optimum_is_three() {
    assert_eq!(optimum(&build_ns(&examples::diamond())), Some(3.0));
}

#[test]
fn chain_ns_optimum_is_one() {
    let m = build_ns(&examples::chain_of_three());
    let out = solve_milp(&m.program, &MilpConfig::default()).unwrap();
    let MilpStatus::Optimal(sol) = out.status else {
        panic!()
    };
    assert!((sol.objective - 1.0).abs() < 1e-9);
    let p = m
        .catalog
        .placement(&examples::chain_of_three(), &sol.x)
        .unwrap();
    assert!(p.host(0, 1) < 2, "f1 sits on node 1 or 2");
    assert!(p.host(0, 2) >= p.host(0, 1), "f2 downstream of f1");
}

#[test]
fn single_cloud_on_the_only_path() {
    let inst = Instance {
        network: Network {
            nodes: vec!["S".into(), "V".into(), "D".into()],
            links: vec![
                Link {
                    tail: 0,
                    head: 1,
                    capacity: Capacity::Finite(100.0),
                },
                Link {
                    tail: 1,
                    head: 2,
                    capacity: Capacity::Finite(100.0),
                },
            ],
            clouds: vec![CloudNode {
                node: 1,
                capacity: Capacity::Finite(100.0),
                power: 7.0,
            }],
        },
        services: vec![Service {
            id: "a".into(),
            source: 0,
            destination: 2,
            rate_in: 3.0,
            chain: vec![
                Stage {
                    function: "f".into(),
                    rate: 3.0,
                    costs: [(0, 2.0)].into(),
                },
                Stage {
                    function: "g".into(),
                    rate: 3.0,
                    costs: [(0, 5.0)].into(),
                },
            ],
        }],
    };
    assert_eq!(optimum(&build_ns(&inst)), Some(14.0));
}

#[test]
fn diamond_master_values() {
    let inst = examples::diamond();
    let reach = analyze(&inst);
    assert_eq!(optimum(&build_fp(&inst, FpVariant::Fp, &reach)), Some(1.0));
    assert_eq!(optimum(&build_fp(&inst, FpVariant::FpI, &reach)), Some(1.0));
    assert_eq!(
        optimum(&build_fp(&inst, FpVariant::FpII, &reach)),
        Some(3.0)
    );
}

#[test]
fn chain_relaxation_bounds() {
    let inst = examples::chain_of_three();
    let reach = analyze(&inst);
    let basic = build_fp_with_rows(
        &inst,
        &connectivity_rows(&inst, &reach, ConnectivityForm::Basic),
    );
    let pairwise = build_fp_with_rows(
        &inst,
        &connectivity_rows(&inst, &reach, ConnectivityForm::Pairwise),
    );
    let aggregated = build_fp_with_rows(
        &inst,
        &connectivity_rows(&inst, &reach, ConnectivityForm::Aggregated),
    );
    assert!((relaxation(&basic) - 1.0 / 6.0).abs() < 1e-9);
    assert!((relaxation(&pairwise) - 1.0 / 6.0).abs() < 1e-9);
    assert!((relaxation(&aggregated) - 0.25).abs() < 1e-9);
    assert!((relaxation(&build_fp(&inst, FpVariant::FpI, &reach)) - 0.25).abs() < 1e-9);
}

#[test]
fn full_reachability_makes_fp_and_fp1_agree() {
    for seed in 0..5 {
        let cfg = GeneratorConfig {
            nodes: 9,
            clouds: 3,
            services: 2,
            chain_length: 2,
            link_removal_probability: 0.0,
            seed,
            ..Default::default()
        };
        let inst = generate(&cfg).unwrap();
        let reach = analyze(&inst);
        let a = build_fp(&inst, FpVariant::Fp, &reach);
        let b = build_fp(&inst, FpVariant::FpI, &reach);
        assert_eq!(a.program.lp.num_rows(), b.program.lp.num_rows());
        assert_eq!(optimum(&a), optimum(&b));
    }
}

#[test]
fn diamond_routing_checks() {
    let inst = examples::diamond();
    let (_, both_b) = tr_outcome(&inst, &Placement(vec![vec![0], vec![0]]));
    assert!(matches!(both_b, LpOutcome::Infeasible(_)));
    let (_, split) = tr_outcome(&inst, &Placement(vec![vec![0], vec![1]]));
    assert!(matches!(split, LpOutcome::Optimal(_)));
    let (_, both_c) = tr_outcome(&inst, &Placement(vec![vec![1], vec![1]]));
    assert!(matches!(both_c, LpOutcome::Infeasible(_)));
}

#[test]
fn tr_rejects_malformed_placements() {
    let inst = examples::diamond();
    assert!(build_tr(&inst, &Placement(vec![vec![0]])).is_err());
    assert!(build_tr(&inst, &Placement(vec![vec![0], vec![0, 1]])).is_err());
    assert!(build_tr(&inst, &Placement(vec![vec![0], vec![5]])).is_err());
}

#[test]
fn uncapacitated_reachable_placements_route() {
    let inst = examples::chain_of_three();
    for p in [vec![0, 0], vec![0, 2], vec![1, 2], vec![2, 2]] {
        let (_, out) = tr_outcome(&inst, &Placement(vec![p.clone()]));
        assert!(matches!(out, LpOutcome::Optimal(_)), "{p:?}");
    }
    let (_, out) = tr_outcome(&inst, &Placement(vec![vec![2, 0]]));
    assert!(matches!(out, LpOutcome::Infeasible(_)));
}

#[test]
fn diamond_cut_separates_exactly_the_routable_placements() {
    let inst = examples::diamond();
    let bad = Placement(vec![vec![0], vec![0]]);
    let (tr, out) = tr_outcome(&inst, &bad);
    let LpOutcome::Infeasible(cert) = out else {
        panic!()
    };
    let cut = materialize_cut(&inst, &tr, &cert, 1e-6).unwrap();
    assert!(cut.lhs_at(&bad) < -1e-6);
    let mut routable = 0;
    for a in 0..2 {
        for b in 0..2 {
            let p = Placement(vec![vec![a], vec![b]]);
            let (_, o) = tr_outcome(&inst, &p);
            if matches!(o, LpOutcome::Optimal(_)) {
                routable += 1;
                assert!(cut.lhs_at(&p) >= -1e-9, "{p:?}");
            }
        }
    }
    assert_eq!(routable, 2);
}

#[test]
fn zero_certificate_is_refused() {
    let inst = examples::diamond();
    let tr = build_tr(&inst, &Placement(vec![vec![0], vec![0]])).unwrap();
    let zero = FarkasCertificate {
        multipliers: vec![0.0; tr.lp.num_rows()],
    };
    assert_eq!(
        materialize_cut(&inst, &tr, &zero, 1e-6),
        Err(CutError::Unverified)
    );
}

#[test]
fn scaled_certificate_scales_the_cut() {
    let inst = examples::diamond();
    let bad = Placement(vec![vec![0], vec![0]]);
    let (tr, out) = tr_outcome(&inst, &bad);
    let LpOutcome::Infeasible(cert) = out else {
        panic!()
    };
    let a = materialize_cut(&inst, &tr, &cert, 1e-6).unwrap();
    let b = materialize_cut(&inst, &tr, &cert.scaled(2.0), 1e-6).unwrap();
    assert_eq!(a.coeffs.len(), b.coeffs.len());
    for (k, c) in &a.coeffs {
        assert!((b.coeffs[k] - 2.0 * c).abs() < 1e-12);
    }
    assert!((b.constant - 2.0 * a.constant).abs() < 1e-12);
    assert!(b.lhs_at(&bad) < 0.0);
}

#[test]
fn flow_rhs_cases() {
    let inst = examples::chain_of_three();
    // Source, flow 0.
    assert_eq!(
        flow_rhs(&inst, 0, 0, 0),
        AffineForm {
            constant: -1.0,
            terms: vec![]
        }
    );
    // Destination, last flow.
    assert_eq!(
        flow_rhs(&inst, 0, 2, 4),
        AffineForm {
            constant: 1.0,
            terms: vec![]
        }
    );
    // Cloud node 2 (position 1) on the middle flow.
    let f = flow_rhs(&inst, 0, 1, 2);
    assert_eq!(
        f.terms,
        vec![
            (PlacementKey::new(0, 2, 1), 1.0),
            (PlacementKey::new(0, 1, 1), -1.0)
        ]
    );
    // Destination on flow 0 carries nothing.
    assert_eq!(flow_rhs(&inst, 0, 0, 4), AffineForm::default());
}

#[test]
fn single_function_rows_match_the_combined_row() {
    for seed in 0..12 {
        let cfg = GeneratorConfig {
            nodes: 10,
            clouds: 3,
            services: 3,
            chain_length: 1,
            link_capacity: (1, 30),
            rate: (5, 20),
            seed,
            ..Default::default()
        };
        let inst = generate(&cfg).unwrap();
        let reach = analyze(&inst);
        let two = build_fp(&inst, FpVariant::FpII, &reach);
        assert!(two.catalog.z.is_empty() && two.catalog.w.is_empty());
        let mut combined = build_fp(&inst, FpVariant::FpI, &reach);
        let net = &inst.network;
        for (v, cloud) in net.clouds.iter().enumerate() {
            let caps = [
                cloud.capacity,
                net.inbound_capacity(cloud.node),
                net.outbound_capacity(cloud.node),
            ];
            let bound = caps
                .iter()
                .filter_map(Capacity::finite)
                .fold(f64::INFINITY, f64::min);
            if bound.is_infinite() {
                continue;
            }
            let mut coeffs: Vec<_> = combined
                .catalog
                .x
                .iter()
                .filter(|(k, _)| k.cloud == v)
                .map(|(k, &x)| (x, inst.services[k.service].rate_in))
                .collect();
            coeffs.push((combined.catalog.y[v], -bound));
            combined
                .program
                .lp
                .add_row(format!("combined[{v}]"), coeffs, Sense::Le, 0.0);
        }
        let a = root_relaxation_value(&two.program, &LpConfig::default()).unwrap();
        let b = root_relaxation_value(&combined.program, &LpConfig::default()).unwrap();
        match (a, b) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-7, "seed {seed}: {a} vs {b}"),
            (None, None) => {}
            other => panic!("seed {seed}: {other:?}"),
        }
    }
}

#[test]
fn placement_extraction_requires_one_host() {
    let inst = examples::diamond();
    let m = build_ns(&inst);
    let mut x = vec![0.0; m.program.lp.num_vars()];
    x[m.catalog.x[&PlacementKey::new(0, 1, 0)].0] = 1.0;
    assert!(matches!(
        m.catalog.placement(&inst, &x),
        Err(PlacementError::NotOneHost { service: 1, .. })
    ));
    x[m.catalog.x[&PlacementKey::new(1, 1, 1)].0] = 1.0;
    assert_eq!(
        m.catalog.placement(&inst, &x).unwrap(),
        Placement(vec![vec![0], vec![1]])
    );
}
