//! Feasibility cuts from TR infeasibility certificates.
//!
//! With multipliers `α >= 0` on the link rows and `β` on the flow rows, the
//! certificate states `Σ C α + Σ β b(x̄) < 0` while `Σ C α + Σ β b(x) >= 0`
//! holds for every routable placement. Expanding `b` through
//! [`flow_rhs`](super::flow_rhs) gives a linear inequality in `x`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::instance::{Instance, Placement};
use crate::lp::{verify_certificate, CertificateError, FarkasCertificate};

use super::{flow_rhs, PlacementKey, TrRow, TrSystem};

/// `constant + Σ coeffs[key] · x[key] >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendersCut {
    pub coeffs: BTreeMap<PlacementKey, f64>,
    pub constant: f64,
    pub iteration: usize,
    pub certificate_id: usize,
}

impl BendersCut {
    pub fn lhs(&self, x: impl Fn(PlacementKey) -> f64) -> f64 {
        self.constant + self.coeffs.iter().map(|(&k, &c)| c * x(k)).sum::<f64>()
    }

    pub fn lhs_at(&self, placement: &Placement) -> f64 {
        self.lhs(|k| (placement.host(k.service, k.stage) == k.cloud) as u8 as f64)
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.len()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CutError {
    #[error("certificate does not prove the routing system infeasible")]
    Unverified,
    #[error(transparent)]
    Dimension(#[from] CertificateError),
    #[error(
        "cut evaluates to {lhs:.3e} at the placement that produced it; expected below -{tol:.1e}"
    )]
    NotViolated { lhs: f64, tol: f64 },
}

/// Expand a verified TR certificate into a cut over placement variables.
pub fn materialize_cut(
    instance: &Instance,
    tr: &TrSystem,
    cert: &FarkasCertificate,
    tol_cert: f64,
) -> Result<BendersCut, CutError> {
    if !verify_certificate(&tr.lp, cert, tol_cert)? {
        return Err(CutError::Unverified);
    }
    let mut constant = 0.0;
    let mut coeffs: BTreeMap<PlacementKey, f64> = BTreeMap::new();
    for (row, (&kind, &y)) in tr.lp.rows.iter().zip(tr.rows.iter().zip(&cert.multipliers)) {
        if y == 0.0 {
            continue;
        }
        match kind {
            TrRow::Link(_) => constant += y * row.rhs,
            TrRow::Flow {
                service,
                flow,
                node,
            } => {
                let form = flow_rhs(instance, service, flow, node);
                constant += y * form.constant;
                for (key, c) in form.terms {
                    *coeffs.entry(key).or_insert(0.0) += y * c;
                }
            }
        }
    }
    coeffs.retain(|_, c| *c != 0.0);
    let cut = BendersCut {
        coeffs,
        constant,
        iteration: 0,
        certificate_id: 0,
    };
    let lhs = cut.lhs_at(&tr.placement);
    if lhs >= -tol_cert {
        return Err(CutError::NotViolated { lhs, tol: tol_cert });
    }
    Ok(cut)
}
