//! Connectivity inequalities as explicit rows over placement variables.
//!
//! [`build_fp`](super::build_fp) applies the aggregated form directly (by
//! removing fixed variables). The pairwise forms are kept here so the three
//! families can be compared on the same variable space.

use std::collections::BTreeSet;

use crate::instance::{Instance, Placement};
use crate::lp::Sense;
use crate::reachability::UnreachableSets;

use super::{placement_core, Model, PlacementKey};
use crate::milp::MixedBinaryProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConnectivityForm {
    /// First stage off `V(S)`, last stage off `V(D)`, and pairwise rows for
    /// consecutive stages.
    Basic,
    /// Every stage off `V(S) ∪ V(D)` and pairwise rows for all later stages.
    Pairwise,
    /// Every stage off `V(S) ∪ V(D)` and one aggregated row per reachable set.
    Aggregated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicRow {
    pub name: String,
    pub terms: Vec<(PlacementKey, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl SymbolicRow {
    pub fn activity(&self, x: impl Fn(PlacementKey) -> f64) -> f64 {
        self.terms.iter().map(|&(k, c)| c * x(k)).sum()
    }

    pub fn holds_at(&self, placement: &Placement, tol: f64) -> bool {
        let a = self.activity(|k| (placement.host(k.service, k.stage) == k.cloud) as u8 as f64);
        match self.sense {
            Sense::Le => a <= self.rhs + tol,
            Sense::Ge => a >= self.rhs - tol,
            Sense::Eq => (a - self.rhs).abs() <= tol,
        }
    }
}

fn fix_zero(out: &mut Vec<SymbolicRow>, key: PlacementKey) {
    out.push(SymbolicRow {
        name: format!("fix[{},{},{}]", key.service, key.stage, key.cloud),
        terms: vec![(key, 1.0)],
        sense: Sense::Eq,
        rhs: 0.0,
    });
}

fn pair(out: &mut Vec<SymbolicRow>, a: PlacementKey, b: PlacementKey) {
    out.push(SymbolicRow {
        name: format!(
            "pair[{},{},{};{},{}]",
            a.service, a.stage, a.cloud, b.stage, b.cloud
        ),
        terms: vec![(a, 1.0), (b, 1.0)],
        sense: Sense::Le,
        rhs: 1.0,
    });
}

pub fn connectivity_rows(
    instance: &Instance,
    reach: &UnreachableSets,
    form: ConnectivityForm,
) -> Vec<SymbolicRow> {
    let nc = instance.network.clouds.len();
    let mut out = Vec::new();
    for (k, svc) in instance.services.iter().enumerate() {
        let len = svc.chain_len();
        match form {
            ConnectivityForm::Basic => {
                for &v in &reach.from_source[k] {
                    fix_zero(&mut out, PlacementKey::new(k, 1, v));
                }
                for &v in &reach.to_destination[k] {
                    fix_zero(&mut out, PlacementKey::new(k, len, v));
                }
            }
            ConnectivityForm::Pairwise | ConnectivityForm::Aggregated => {
                let bad: BTreeSet<usize> = reach.from_source[k]
                    .union(&reach.to_destination[k])
                    .copied()
                    .collect();
                for s in 1..=len {
                    for &v in &bad {
                        fix_zero(&mut out, PlacementKey::new(k, s, v));
                    }
                }
            }
        }
        for s in 1..len {
            match form {
                ConnectivityForm::Basic | ConnectivityForm::Pairwise => {
                    let last = if form == ConnectivityForm::Basic {
                        s + 1
                    } else {
                        len
                    };
                    for v0 in 0..nc {
                        for &v in &reach.from_cloud[v0] {
                            for s0 in s + 1..=last {
                                pair(
                                    &mut out,
                                    PlacementKey::new(k, s, v0),
                                    PlacementKey::new(k, s0, v),
                                );
                            }
                        }
                    }
                }
                ConnectivityForm::Aggregated => {
                    let mut seen = BTreeSet::new();
                    for v0 in 0..nc {
                        if reach.from_cloud[v0].is_empty() {
                            continue;
                        }
                        let set = reach.reachable_from(v0, nc);
                        if !seen.insert(set.clone()) {
                            continue;
                        }
                        let mut terms: Vec<(PlacementKey, f64)> = set
                            .iter()
                            .map(|&v| (PlacementKey::new(k, s, v), 1.0))
                            .collect();
                        terms.extend(set.iter().map(|&v| (PlacementKey::new(k, s + 1, v), -1.0)));
                        out.push(SymbolicRow {
                            name: format!("reach[{k},{s},{v0}]"),
                            terms,
                            sense: Sense::Le,
                            rhs: 0.0,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Plain FP over every permitted placement variable, plus `rows`. Terms on
/// forbidden placements are dropped since those variables are zero.
pub fn build_fp_with_rows(instance: &Instance, rows: &[SymbolicRow]) -> Model {
    let (mut lp, catalog, binaries) = placement_core(instance, |_| true);
    for row in rows {
        let coeffs: Vec<_> = row
            .terms
            .iter()
            .filter_map(|(k, c)| catalog.x.get(k).map(|&v| (v, *c)))
            .collect();
        if coeffs.is_empty() {
            continue;
        }
        lp.add_row(row.name.clone(), coeffs, row.sense, row.rhs);
    }
    Model {
        program: MixedBinaryProgram { lp, binaries },
        catalog,
    }
}
