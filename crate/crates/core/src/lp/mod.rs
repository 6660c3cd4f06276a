//! Solver-agnostic linear programs and a bounded revised simplex solver that
//! returns Farkas certificates for infeasible systems.

mod certificate;
mod lp_format;
mod simplex;

pub use certificate::{verify_certificate, CertificateError, FarkasCertificate};
pub use lp_format::write_lp_format;
pub use simplex::{solve_lp, solve_lp_warm, WarmStart};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(&self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    /// May be `f64::INFINITY`.
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// `minimize objective·x + offset` subject to rows and variable bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: Vec<(VarId, f64)>,
    pub objective_offset: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("row `{row}` references undeclared variable #{var}")]
    UnknownVariable { row: String, var: usize },
    #[error("variable `{0}` has an infinite or NaN lower bound")]
    LowerBound(String),
    #[error("variable `{0}` has upper bound below lower bound")]
    EmptyDomain(String),
    #[error("row `{0}` has a non-finite coefficient or rhs")]
    NonFinite(String),
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn check(&self) -> Result<(), ModelError> {
        for v in &self.variables {
            if !v.lower.is_finite() {
                return Err(ModelError::LowerBound(v.name.clone()));
            }
            if v.upper < v.lower || v.upper.is_nan() {
                return Err(ModelError::EmptyDomain(v.name.clone()));
            }
        }
        let n = self.variables.len();
        for r in self.rows.iter() {
            if !r.rhs.is_finite() {
                return Err(ModelError::NonFinite(r.name.clone()));
            }
            for &(v, a) in &r.coeffs {
                if v.0 >= n {
                    return Err(ModelError::UnknownVariable {
                        row: r.name.clone(),
                        var: v.0,
                    });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite(r.name.clone()));
                }
            }
        }
        for &(v, a) in &self.objective {
            if v.0 >= n {
                return Err(ModelError::UnknownVariable {
                    row: "objective".into(),
                    var: v.0,
                });
            }
            if !a.is_finite() {
                return Err(ModelError::NonFinite("objective".into()));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>()
    }

    /// Largest bound or row violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lower - xi).max(xi - v.upper).max(0.0));
        let rows = self.rows.iter().map(|r| r.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// Dense objective coefficients, summing duplicates.
    pub fn dense_objective(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(v, a) in &self.objective {
            c[v.0] += a;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpConfig {
    /// Primal feasibility tolerance.
    pub tol_feas: f64,
    /// Minimum contradiction a Farkas certificate must exhibit.
    pub tol_cert: f64,
    /// Reduced-cost optimality tolerance.
    pub tol_opt: f64,
    /// Smallest pivot element accepted by the ratio test.
    pub tol_pivot: f64,
    /// `None` picks a limit proportional to the problem size.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degeneracy_threshold: usize,
    /// Pivots between basis reinversions.
    pub refactor_interval: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            tol_feas: 1e-7,
            tol_cert: 1e-6,
            tol_opt: 1e-9,
            tol_pivot: 1e-9,
            max_iterations: None,
            degeneracy_threshold: 50,
            refactor_interval: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row: `c_j - Σ_i duals_i a_ij` is the reduced cost
    /// of column `j`. Nonpositive on `<=` rows, nonnegative on `>=` rows.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    /// Reduced costs recomputed from the model and the duals.
    pub fn reduced_costs(&self, lp: &LinearProgram) -> Vec<f64> {
        let mut d = lp.dense_objective();
        for (row, &y) in lp.rows.iter().zip(&self.duals) {
            for &(v, a) in &row.coeffs {
                d[v.0] -= y * a;
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible(FarkasCertificate),
    /// A feasible direction along which the objective decreases without bound.
    Unbounded {
        direction: Vec<f64>,
    },
    /// Iteration limit or numerical breakdown. Never a silent wrong answer.
    Stalled {
        iterations: usize,
        reason: String,
    },
}

impl LpOutcome {
    pub fn status_name(&self) -> &'static str {
        match self {
            LpOutcome::Optimal(_) => "optimal",
            LpOutcome::Infeasible(_) => "infeasible",
            LpOutcome::Unbounded { .. } => "unbounded",
            LpOutcome::Stalled { .. } => "stalled",
        }
    }

    pub fn optimal(&self) -> Option<&LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}
