//! Two-phase bounded revised simplex.
//!
//! Columns are stored sparse; the basis inverse is kept explicitly as a dense
//! matrix, updated in product form after each pivot and reinverted by
//! Gauss-Jordan elimination every `refactor_interval` pivots. Pricing is
//! Dantzig (largest reduced cost, ties to the lowest column). After
//! `degeneracy_threshold` consecutive degenerate pivots the solver switches
//! to Bland's rule until it makes progress again.
//!
//! Phase I minimizes the sum of artificial variables. When that optimum is
//! positive the negated phase-I duals form a Farkas certificate.

use super::{FarkasCertificate, LinearProgram, LpConfig, LpOutcome, LpSolution, Sense};

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, Default)]
struct Column {
    rows: Vec<usize>,
    vals: Vec<f64>,
}

/// Result of removing fixed variables and empty rows.
struct Reduced {
    lp_cols: Vec<Column>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    senses: Vec<Sense>,
    rhs: Vec<f64>,
    /// Reduced column -> original variable.
    var_map: Vec<usize>,
    /// Reduced row -> original row.
    row_map: Vec<usize>,
}

enum Presolve {
    Reduced(Reduced),
    /// An empty row is violated; the multiplier for it alone is a certificate.
    Infeasible {
        row: usize,
        multiplier: f64,
    },
}

/// With `substitute_fixed` unset, fixed variables stay as columns so that
/// the reduced layout depends only on the sparsity pattern.
fn presolve(lp: &LinearProgram, tol_feas: f64, substitute_fixed: bool) -> Presolve {
    let n = lp.num_vars();
    let fixed: Vec<bool> = lp
        .variables
        .iter()
        .map(|v| substitute_fixed && v.upper - v.lower <= 0.0)
        .collect();
    let mut var_map = Vec::new();
    let mut new_index = vec![usize::MAX; n];
    for j in 0..n {
        if !fixed[j] {
            new_index[j] = var_map.len();
            var_map.push(j);
        }
    }

    let mut row_map = Vec::new();
    let mut senses = Vec::new();
    let mut rhs = Vec::new();
    let mut cols = vec![Column::default(); var_map.len()];
    let mut acc: Vec<f64> = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    for (i, row) in lp.rows.iter().enumerate() {
        let mut b = row.rhs;
        for &(v, a) in &row.coeffs {
            if fixed[v.0] {
                b -= a * lp.variables[v.0].lower;
            } else {
                if !seen[v.0] {
                    seen[v.0] = true;
                    touched.push(v.0);
                }
                acc[v.0] += a;
            }
        }
        touched.sort_unstable();
        let entries: Vec<(usize, f64)> = touched
            .iter()
            .map(|&j| (j, acc[j]))
            .filter(|&(_, a)| a != 0.0)
            .collect();
        for &j in &touched {
            acc[j] = 0.0;
            seen[j] = false;
        }
        touched.clear();

        if entries.is_empty() {
            let violated = match row.sense {
                Sense::Le => b < -tol_feas,
                Sense::Ge => b > tol_feas,
                Sense::Eq => b.abs() > tol_feas,
            };
            if violated {
                // 0 <= b fails with b < 0: y = 1; 0 >= b fails with b > 0: y = -1.
                let multiplier = if b < 0.0 { 1.0 } else { -1.0 };
                return Presolve::Infeasible { row: i, multiplier };
            }
            continue;
        }
        let r = row_map.len();
        row_map.push(i);
        senses.push(row.sense);
        rhs.push(b);
        for (j, a) in entries {
            let c = &mut cols[new_index[j]];
            c.rows.push(r);
            c.vals.push(a);
        }
    }

    let dense_c = lp.dense_objective();
    Presolve::Reduced(Reduced {
        lp_cols: cols,
        lower: var_map.iter().map(|&j| lp.variables[j].lower).collect(),
        upper: var_map.iter().map(|&j| lp.variables[j].upper).collect(),
        cost: var_map.iter().map(|&j| dense_c[j]).collect(),
        senses,
        rhs,
        var_map,
        row_map,
    })
}

/// Solve `lp`. Deterministic for a fixed configuration.
pub fn solve_lp(lp: &LinearProgram, config: &LpConfig) -> LpOutcome {
    if let Err(e) = lp.check() {
        return LpOutcome::Stalled {
            iterations: 0,
            reason: format!("malformed model: {e}"),
        };
    }
    let reduced = match presolve(lp, config.tol_feas, true) {
        Presolve::Infeasible { row, multiplier } => {
            return empty_row_certificate(lp, row, multiplier)
        }
        Presolve::Reduced(r) => r,
    };
    let mut engine = Engine::new(&reduced, config);
    let raw = engine.run();
    finish(lp, &reduced, config, raw)
}

/// Basis of an optimal solve, reusable after changes to variable bounds
/// only (same rows, coefficients and objective).
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    vars: usize,
    rows: usize,
    basis: Vec<BasisEntry>,
    /// Original variables nonbasic at their upper bound.
    at_upper: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BasisEntry {
    Structural(usize),
    Logical(usize),
    Artificial(usize),
}

/// Like [`solve_lp`], but starts from `warm` when given and compatible,
/// re-optimizing with the dual simplex method. Falls back to a cold solve
/// whenever the warm start cannot be used. Optimal outcomes come with the
/// final basis.
pub fn solve_lp_warm(
    lp: &LinearProgram,
    config: &LpConfig,
    warm: Option<&WarmStart>,
) -> (LpOutcome, Option<WarmStart>) {
    if let Err(e) = lp.check() {
        return (
            LpOutcome::Stalled {
                iterations: 0,
                reason: format!("malformed model: {e}"),
            },
            None,
        );
    }
    let reduced = match presolve(lp, config.tol_feas, false) {
        Presolve::Infeasible { row, multiplier } => {
            return (empty_row_certificate(lp, row, multiplier), None)
        }
        Presolve::Reduced(r) => r,
    };
    if let Some(ws) = warm.filter(|w| w.vars == lp.num_vars() && w.rows == lp.num_rows()) {
        if let Some(mut engine) = Engine::from_warm_start(&reduced, config, ws) {
            match engine.run_dual() {
                DualEnd::Optimal(raw) => {
                    let snap = engine.snapshot(&reduced, lp);
                    return (finish(lp, &reduced, config, raw), Some(snap));
                }
                DualEnd::Infeasible(row) => {
                    if let Some(cert) = engine.row_certificate(&reduced, lp, row) {
                        return (LpOutcome::Infeasible(cert), None);
                    }
                }
                DualEnd::Failed => {}
            }
        }
    }
    let mut engine = Engine::new(&reduced, config);
    let raw = engine.run();
    let snap = matches!(raw, RawOutcome::Optimal { .. }).then(|| engine.snapshot(&reduced, lp));
    (finish(lp, &reduced, config, raw), snap)
}

fn empty_row_certificate(lp: &LinearProgram, row: usize, multiplier: f64) -> LpOutcome {
    let mut multipliers = vec![0.0; lp.num_rows()];
    multipliers[row] = multiplier;
    LpOutcome::Infeasible(FarkasCertificate { multipliers })
}

/// Snap sign noise and normalize to unit max-norm.
fn clean_multipliers(lp: &LinearProgram, multipliers: &mut [f64]) {
    for (y, row) in multipliers.iter_mut().zip(&lp.rows) {
        let wrong = match row.sense {
            Sense::Le => *y < 0.0,
            Sense::Ge => *y > 0.0,
            Sense::Eq => false,
        };
        if wrong && y.abs() < 1e-9 || y.abs() < 1e-12 {
            *y = 0.0;
        }
    }
    let norm = multipliers.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if norm > 0.0 {
        for y in multipliers.iter_mut() {
            *y /= norm;
        }
    }
}

fn finish(lp: &LinearProgram, reduced: &Reduced, config: &LpConfig, raw: RawOutcome) -> LpOutcome {
    let full_x = |xr: &[f64]| {
        let mut x: Vec<f64> = lp.variables.iter().map(|v| v.lower).collect();
        for (k, &j) in reduced.var_map.iter().enumerate() {
            x[j] = xr[k];
        }
        x
    };
    let full_rows = |yr: &[f64]| {
        let mut y = vec![0.0; lp.num_rows()];
        for (k, &i) in reduced.row_map.iter().enumerate() {
            y[i] = yr[k];
        }
        y
    };

    match raw {
        RawOutcome::Optimal {
            x,
            duals,
            iterations,
        } => {
            let x = full_x(&x);
            let objective = lp.objective_value(&x);
            LpOutcome::Optimal(LpSolution {
                x,
                objective,
                duals: full_rows(&duals),
                iterations,
            })
        }
        RawOutcome::Infeasible {
            multipliers,
            iterations,
        } => {
            let mut multipliers = full_rows(&multipliers);
            clean_multipliers(lp, &mut multipliers);
            let cert = FarkasCertificate { multipliers };
            if cert.signs_ok(lp) && cert.contradiction(lp) > config.tol_cert {
                LpOutcome::Infeasible(cert)
            } else {
                LpOutcome::Stalled {
                    iterations,
                    reason: format!(
                        "phase I ended infeasible but the certificate is too weak (gap {:.3e})",
                        cert.contradiction(lp)
                    ),
                }
            }
        }
        RawOutcome::Unbounded { direction } => {
            let mut d = vec![0.0; lp.num_vars()];
            for (k, &j) in reduced.var_map.iter().enumerate() {
                d[j] = direction[k];
            }
            LpOutcome::Unbounded { direction: d }
        }
        RawOutcome::Stalled { iterations, reason } => LpOutcome::Stalled { iterations, reason },
    }
}

enum RawOutcome {
    Optimal {
        x: Vec<f64>,
        duals: Vec<f64>,
        iterations: usize,
    },
    Infeasible {
        multipliers: Vec<f64>,
        iterations: usize,
    },
    Unbounded {
        direction: Vec<f64>,
    },
    Stalled {
        iterations: usize,
        reason: String,
    },
}

enum DualEnd {
    Optimal(RawOutcome),
    Infeasible(usize),
    Failed,
}

enum PhaseEnd {
    Optimal,
    Unbounded {
        entering: usize,
        dir: f64,
        alpha: Vec<f64>,
    },
    Stalled(String),
}

enum Step {
    Flip,
    Pivot { row: usize, to_upper: bool },
    Unbounded,
}

struct Engine<'a> {
    config: &'a LpConfig,
    m: usize,
    n_struct: usize,
    cols: Vec<Column>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    phase2_cost: Vec<f64>,
    rhs: Vec<f64>,
    first_artificial: usize,
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    binv: Vec<f64>,
    y: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
    bland: bool,
}

impl<'a> Engine<'a> {
    fn new(red: &'a Reduced, config: &'a LpConfig) -> Self {
        let m = red.rhs.len();
        let n_struct = red.lp_cols.len();
        let mut cols = red.lp_cols.clone();
        let mut lower = red.lower.clone();
        let mut upper = red.upper.clone();
        let mut x: Vec<f64> = lower.clone();
        let mut state = vec![VarState::AtLower; n_struct];

        // Residual with structurals at their lower bounds.
        let mut resid = red.rhs.clone();
        for (j, c) in cols.iter().enumerate() {
            for (&i, &a) in c.rows.iter().zip(&c.vals) {
                resid[i] -= a * x[j];
            }
        }

        let mut basis = vec![usize::MAX; m];
        let mut diag = vec![0.0; m];
        // Logical columns.
        for i in 0..m {
            let sign = match red.senses[i] {
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
                Sense::Eq => continue,
            };
            let j = cols.len();
            cols.push(Column {
                rows: vec![i],
                vals: vec![sign],
            });
            lower.push(0.0);
            upper.push(f64::INFINITY);
            let value = sign * resid[i];
            if value >= 0.0 {
                basis[i] = j;
                diag[i] = sign;
                x.push(value);
                state.push(VarState::Basic(i));
            } else {
                x.push(0.0);
                state.push(VarState::AtLower);
            }
        }
        let first_artificial = cols.len();
        for i in 0..m {
            if basis[i] != usize::MAX {
                continue;
            }
            let sign = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
            let j = cols.len();
            cols.push(Column {
                rows: vec![i],
                vals: vec![sign],
            });
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(resid[i].abs());
            state.push(VarState::Basic(i));
            basis[i] = j;
            diag[i] = sign;
        }

        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0 / diag[i];
        }
        let total = cols.len();
        let max_iterations = config.max_iterations.unwrap_or(20 * (m + total) + 10_000);
        let mut cost = vec![0.0; total];
        for c in cost.iter_mut().skip(first_artificial) {
            *c = 1.0;
        }
        let mut engine = Self {
            config,
            m,
            n_struct,
            cols,
            lower,
            upper,
            cost,
            phase2_cost: red.cost.clone(),
            rhs: red.rhs.clone(),
            first_artificial,
            basis,
            state,
            x,
            binv,
            y: vec![0.0; m],
            iterations: 0,
            max_iterations,
            since_refactor: 0,
            degenerate_run: 0,
            bland: false,
        };
        engine.compute_duals();
        engine
    }

    fn run(&mut self) -> RawOutcome {
        // Phase I.
        if self.first_artificial < self.cols.len() {
            match self.phase() {
                PhaseEnd::Optimal => {}
                PhaseEnd::Stalled(reason) => {
                    return RawOutcome::Stalled {
                        iterations: self.iterations,
                        reason,
                    }
                }
                PhaseEnd::Unbounded { .. } => {
                    return RawOutcome::Stalled {
                        iterations: self.iterations,
                        reason: "phase I reported unbounded".into(),
                    }
                }
            }
            let infeas: f64 = (self.first_artificial..self.cols.len())
                .map(|j| self.x[j])
                .sum();
            if infeas > self.config.tol_feas {
                let multipliers = self.y.iter().map(|v| -v).collect();
                return RawOutcome::Infeasible {
                    multipliers,
                    iterations: self.iterations,
                };
            }
            for j in self.first_artificial..self.cols.len() {
                self.upper[j] = 0.0;
                if !matches!(self.state[j], VarState::Basic(_)) {
                    self.state[j] = VarState::AtLower;
                    self.x[j] = 0.0;
                }
            }
        }

        // Phase II.
        let mut cost = vec![0.0; self.cols.len()];
        cost[..self.n_struct].copy_from_slice(&self.phase2_cost);
        self.cost = cost;
        self.phase_two()
    }

    /// Primal phase II from the current basis under `self.cost`.
    fn phase_two(&mut self) -> RawOutcome {
        self.bland = false;
        self.degenerate_run = 0;
        if let Err(reason) = self.refactor() {
            return RawOutcome::Stalled {
                iterations: self.iterations,
                reason,
            };
        }
        match self.phase() {
            PhaseEnd::Optimal => {
                let worst = self.worst_basic_violation();
                if worst > self.config.tol_feas * 10.0 {
                    return RawOutcome::Stalled {
                        iterations: self.iterations,
                        reason: format!("basic solution drifted infeasible by {worst:.3e}"),
                    };
                }
                RawOutcome::Optimal {
                    x: self.x[..self.n_struct].to_vec(),
                    duals: self.y.clone(),
                    iterations: self.iterations,
                }
            }
            PhaseEnd::Unbounded {
                entering,
                dir,
                alpha,
            } => {
                let mut direction = vec![0.0; self.n_struct];
                if entering < self.n_struct {
                    direction[entering] = dir;
                }
                for (p, &j) in self.basis.iter().enumerate() {
                    if j < self.n_struct {
                        direction[j] = -dir * alpha[p];
                    }
                }
                RawOutcome::Unbounded { direction }
            }
            PhaseEnd::Stalled(reason) => RawOutcome::Stalled {
                iterations: self.iterations,
                reason,
            },
        }
    }

    /// Engine on the structure of `red` with the basis of `ws`. `None` when
    /// the basis does not fit or is singular.
    fn from_warm_start(red: &'a Reduced, config: &'a LpConfig, ws: &WarmStart) -> Option<Self> {
        let m = red.rhs.len();
        if ws.basis.len() != m {
            return None;
        }
        let n_struct = red.lp_cols.len();
        let mut cols = red.lp_cols.clone();
        let mut lower = red.lower.clone();
        let mut upper = red.upper.clone();
        let mut struct_of_var = vec![usize::MAX; ws.vars];
        for (k, &j) in red.var_map.iter().enumerate() {
            struct_of_var[j] = k;
        }
        let mut pos_of_row = vec![usize::MAX; ws.rows];
        for (k, &i) in red.row_map.iter().enumerate() {
            pos_of_row[i] = k;
        }
        let mut logical_of_row = vec![usize::MAX; m];
        for i in 0..m {
            let sign = match red.senses[i] {
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
                Sense::Eq => continue,
            };
            logical_of_row[i] = cols.len();
            cols.push(Column {
                rows: vec![i],
                vals: vec![sign],
            });
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }
        let first_artificial = cols.len();
        let mut basis = Vec::with_capacity(m);
        for entry in &ws.basis {
            let j = match *entry {
                BasisEntry::Structural(v) => *struct_of_var.get(v)?,
                BasisEntry::Logical(r) => *logical_of_row.get(*pos_of_row.get(r)?)?,
                BasisEntry::Artificial(r) => {
                    let i = *pos_of_row.get(r)?;
                    if i == usize::MAX {
                        return None;
                    }
                    // Artificials are kept only to complete the basis.
                    cols.push(Column {
                        rows: vec![i],
                        vals: vec![1.0],
                    });
                    lower.push(0.0);
                    upper.push(0.0);
                    cols.len() - 1
                }
            };
            if j == usize::MAX {
                return None;
            }
            basis.push(j);
        }
        let total = cols.len();
        let mut state = vec![VarState::AtLower; total];
        for &v in &ws.at_upper {
            let j = *struct_of_var.get(v)?;
            if j != usize::MAX && upper[j].is_finite() {
                state[j] = VarState::AtUpper;
            }
        }
        for (p, &j) in basis.iter().enumerate() {
            if matches!(state[j], VarState::Basic(_)) {
                return None;
            }
            state[j] = VarState::Basic(p);
        }
        let x = (0..total)
            .map(|j| {
                if state[j] == VarState::AtUpper {
                    upper[j]
                } else {
                    lower[j]
                }
            })
            .collect();
        let mut cost = red.cost.clone();
        cost.resize(total, 0.0);
        let max_iterations = config.max_iterations.unwrap_or(20 * (m + total) + 10_000);
        let mut engine = Self {
            config,
            m,
            n_struct,
            cols,
            lower,
            upper,
            cost,
            phase2_cost: red.cost.clone(),
            rhs: red.rhs.clone(),
            first_artificial,
            basis,
            state,
            x,
            binv: vec![0.0; m * m],
            y: vec![0.0; m],
            iterations: 0,
            max_iterations,
            since_refactor: 0,
            degenerate_run: 0,
            bland: false,
        };
        engine.refactor().ok()?;
        Some(engine)
    }

    /// Basic position with the largest bound violation above `tol_feas`.
    fn dual_leaving(&self) -> Option<(usize, bool)> {
        let tol = self.config.tol_feas;
        let mut best: Option<(usize, bool, f64)> = None;
        for (p, &j) in self.basis.iter().enumerate() {
            let below = self.lower[j] - self.x[j];
            let above = self.x[j] - self.upper[j];
            let (v, to_upper) = if below > above {
                (below, false)
            } else {
                (above, true)
            };
            if v > tol && best.is_none_or(|(_, _, bv)| v > bv) {
                best = Some((p, to_upper, v));
            }
        }
        best.map(|(p, up, _)| (p, up))
    }

    fn dual_feasible(&self) -> bool {
        let tol = self.config.tol_opt.max(1e-9) * 10.0;
        (0..self.cols.len()).all(|j| {
            if self.upper[j] - self.lower[j] <= 0.0 {
                return true;
            }
            match self.state[j] {
                VarState::Basic(_) => true,
                VarState::AtLower => self.reduced_cost(j) >= -tol,
                VarState::AtUpper => self.reduced_cost(j) <= tol,
            }
        })
    }

    /// Dual simplex from a dual feasible basis, then a primal clean-up.
    fn run_dual(&mut self) -> DualEnd {
        if !self.dual_feasible() {
            return DualEnd::Failed;
        }
        let m = self.m;
        loop {
            if self.iterations >= self.max_iterations {
                return DualEnd::Failed;
            }
            if self.since_refactor >= self.config.refactor_interval && self.refactor().is_err() {
                return DualEnd::Failed;
            }
            let Some((r, to_upper)) = self.dual_leaving() else {
                break;
            };
            let leaving = self.basis[r];
            let bound = if to_upper {
                self.upper[leaving]
            } else {
                self.lower[leaving]
            };
            // +1 when the leaving variable has to increase.
            let need = if to_upper { -1.0 } else { 1.0 };
            let rho = &self.binv[r * m..(r + 1) * m];
            let mut best: Option<(usize, f64, f64, f64)> = None;
            for j in 0..self.cols.len() {
                let dir = match self.state[j] {
                    VarState::Basic(_) => continue,
                    _ if self.upper[j] - self.lower[j] <= 0.0 => continue,
                    VarState::AtLower => 1.0,
                    VarState::AtUpper => -1.0,
                };
                let c = &self.cols[j];
                let a: f64 = c.rows.iter().zip(&c.vals).map(|(&i, &v)| rho[i] * v).sum();
                if -dir * a * need <= self.config.tol_pivot {
                    continue;
                }
                let ratio = (self.reduced_cost(j) * dir).max(0.0) / a.abs();
                let better = match best {
                    None => true,
                    Some((_, _, br, ba)) => {
                        ratio < br - 1e-12 || (ratio <= br + 1e-12 && a.abs() > ba)
                    }
                };
                if better {
                    best = Some((j, dir, ratio, a.abs()));
                }
            }
            let Some((q, dir, _, _)) = best else {
                return DualEnd::Infeasible(r);
            };
            let alpha = self.ftran(q);
            if alpha[r].abs() <= self.config.tol_pivot {
                return DualEnd::Failed;
            }
            let theta = ((self.x[leaving] - bound) / (dir * alpha[r])).max(0.0);
            self.apply(q, dir, &alpha, Step::Pivot { row: r, to_upper }, theta);
            self.iterations += 1;
        }
        match self.phase_two() {
            raw @ RawOutcome::Optimal { .. } => DualEnd::Optimal(raw),
            _ => DualEnd::Failed,
        }
    }

    /// Farkas certificate read off row `r` of the basis inverse, verified
    /// against the model; `None` when it does not verify.
    fn row_certificate(
        &mut self,
        red: &Reduced,
        lp: &LinearProgram,
        r: usize,
    ) -> Option<FarkasCertificate> {
        let m = self.m;
        for sign in [1.0, -1.0] {
            let mut multipliers = vec![0.0; lp.num_rows()];
            for (k, &i) in red.row_map.iter().enumerate() {
                multipliers[i] = sign * self.binv[r * m + k];
            }
            clean_multipliers(lp, &mut multipliers);
            let cert = FarkasCertificate { multipliers };
            if cert.signs_ok(lp) && cert.contradiction(lp) > self.config.tol_cert {
                return Some(cert);
            }
        }
        None
    }

    fn snapshot(&self, red: &Reduced, lp: &LinearProgram) -> WarmStart {
        let basis = self
            .basis
            .iter()
            .map(|&j| {
                if j < self.n_struct {
                    BasisEntry::Structural(red.var_map[j])
                } else if j < self.first_artificial {
                    BasisEntry::Logical(red.row_map[self.cols[j].rows[0]])
                } else {
                    BasisEntry::Artificial(red.row_map[self.cols[j].rows[0]])
                }
            })
            .collect();
        let at_upper = (0..self.n_struct)
            .filter(|&j| self.state[j] == VarState::AtUpper)
            .map(|j| red.var_map[j])
            .collect();
        WarmStart {
            vars: lp.num_vars(),
            rows: lp.num_rows(),
            basis,
            at_upper,
        }
    }

    fn worst_basic_violation(&self) -> f64 {
        self.basis
            .iter()
            .map(|&j| {
                (self.lower[j] - self.x[j])
                    .max(self.x[j] - self.upper[j])
                    .max(0.0)
            })
            .fold(0.0, f64::max)
    }

    fn phase(&mut self) -> PhaseEnd {
        loop {
            if self.iterations >= self.max_iterations {
                return PhaseEnd::Stalled(format!(
                    "iteration limit {} reached",
                    self.max_iterations
                ));
            }
            if self.since_refactor >= self.config.refactor_interval {
                if let Err(e) = self.refactor() {
                    return PhaseEnd::Stalled(e);
                }
            }
            let Some((q, dir)) = self.price() else {
                // Confirm with a fresh factorization before declaring optimality.
                if self.since_refactor > 0 {
                    if let Err(e) = self.refactor() {
                        return PhaseEnd::Stalled(e);
                    }
                    if self.price().is_some() {
                        continue;
                    }
                }
                return PhaseEnd::Optimal;
            };
            let alpha = self.ftran(q);
            match self.ratio_test(q, dir, &alpha) {
                (Step::Unbounded, _) => {
                    return PhaseEnd::Unbounded {
                        entering: q,
                        dir,
                        alpha,
                    }
                }
                (step, theta) => {
                    self.apply(q, dir, &alpha, step, theta);
                    self.iterations += 1;
                    if theta <= 1e-12 {
                        self.degenerate_run += 1;
                        if self.degenerate_run >= self.config.degeneracy_threshold {
                            self.bland = true;
                        }
                    } else {
                        self.degenerate_run = 0;
                        self.bland = false;
                    }
                }
            }
        }
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for (p, &j) in self.basis.iter().enumerate() {
            let c = self.cost[j];
            if c != 0.0 {
                let row = &self.binv[p * m..(p + 1) * m];
                for (yi, &b) in self.y.iter_mut().zip(row) {
                    *yi += c * b;
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let c = &self.cols[j];
        let dot: f64 = c
            .rows
            .iter()
            .zip(&c.vals)
            .map(|(&i, &a)| self.y[i] * a)
            .sum();
        self.cost[j] - dot
    }

    /// Entering column and its direction of movement (+1 up, -1 down).
    fn price(&self) -> Option<(usize, f64)> {
        let tol = self.config.tol_opt;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols.len() {
            let dir = match self.state[j] {
                VarState::Basic(_) => continue,
                _ if self.upper[j] - self.lower[j] <= 0.0 => continue,
                VarState::AtLower => 1.0,
                VarState::AtUpper => -1.0,
            };
            let d = self.reduced_cost(j);
            let gain = -d * dir;
            if gain > tol {
                if self.bland {
                    return Some((j, dir));
                }
                if best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((j, dir, gain));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        let c = &self.cols[q];
        for (&i, &a) in c.rows.iter().zip(&c.vals) {
            for (p, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[p * m + i] * a;
            }
        }
        alpha
    }

    /// Harris-style two-pass ratio test; textbook min-ratio under Bland.
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64]) -> (Step, f64) {
        let tol_piv = self.config.tol_pivot;
        let tol_feas = self.config.tol_feas;
        let flip = self.upper[q] - self.lower[q];

        // Rate of change of basic p per unit step is -dir * alpha[p].
        let bound_gap = |p: usize, relax: f64| -> Option<(f64, bool)> {
            let j = self.basis[p];
            let rate = -dir * alpha[p];
            if rate < -tol_piv {
                Some(((self.x[j] - self.lower[j] + relax) / -rate, false))
            } else if rate > tol_piv && self.upper[j].is_finite() {
                Some(((self.upper[j] - self.x[j] + relax) / rate, true))
            } else {
                None
            }
        };

        if self.bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for p in 0..self.m {
                if let Some((t, up)) = bound_gap(p, 0.0) {
                    let t = t.max(0.0);
                    let better = match best {
                        None => true,
                        Some((bp, bt, _)) => {
                            t < bt - 1e-12 || (t <= bt + 1e-12 && self.basis[p] < self.basis[bp])
                        }
                    };
                    if better {
                        best = Some((p, t, up));
                    }
                }
            }
            return match best {
                Some((_, t, _)) if flip <= t => (Step::Flip, flip),
                Some((p, t, up)) => (
                    Step::Pivot {
                        row: p,
                        to_upper: up,
                    },
                    t,
                ),
                None if flip.is_finite() => (Step::Flip, flip),
                None => (Step::Unbounded, f64::INFINITY),
            };
        }

        let mut theta_max = f64::INFINITY;
        for p in 0..self.m {
            if let Some((t, _)) = bound_gap(p, tol_feas) {
                theta_max = theta_max.min(t);
            }
        }
        if theta_max.is_infinite() {
            return if flip.is_finite() {
                (Step::Flip, flip)
            } else {
                (Step::Unbounded, f64::INFINITY)
            };
        }
        let mut best: Option<(usize, f64, bool)> = None;
        for p in 0..self.m {
            if let Some((t, up)) = bound_gap(p, 0.0) {
                if t <= theta_max {
                    let better = match best {
                        None => true,
                        Some((bp, _, _)) => {
                            let (a, b) = (alpha[p].abs(), alpha[bp].abs());
                            a > b || (a == b && self.basis[p] < self.basis[bp])
                        }
                    };
                    if better {
                        best = Some((p, t, up));
                    }
                }
            }
        }
        let (p, t, up) = best.expect("theta_max finite implies a candidate");
        let t = t.max(0.0);
        if flip <= t {
            (Step::Flip, flip)
        } else {
            (
                Step::Pivot {
                    row: p,
                    to_upper: up,
                },
                t,
            )
        }
    }

    fn apply(&mut self, q: usize, dir: f64, alpha: &[f64], step: Step, theta: f64) {
        let m = self.m;
        if theta != 0.0 {
            for (p, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[p]] -= dir * theta * a;
                }
            }
        }
        match step {
            Step::Flip => {
                if dir > 0.0 {
                    self.state[q] = VarState::AtUpper;
                    self.x[q] = self.upper[q];
                } else {
                    self.state[q] = VarState::AtLower;
                    self.x[q] = self.lower[q];
                }
            }
            Step::Pivot { row: r, to_upper } => {
                let leaving = self.basis[r];
                let entering_value = self.x[q] + dir * theta;
                if to_upper {
                    self.state[leaving] = VarState::AtUpper;
                    self.x[leaving] = self.upper[leaving];
                } else {
                    self.state[leaving] = VarState::AtLower;
                    self.x[leaving] = self.lower[leaving];
                }
                self.basis[r] = q;
                self.state[q] = VarState::Basic(r);
                self.x[q] = entering_value;

                let d_q = self.reduced_cost(q);
                let piv = alpha[r];
                let (head, rest) = self.binv.split_at_mut(r * m);
                let (pivot_row, tail) = rest.split_at_mut(m);
                for v in pivot_row.iter_mut() {
                    *v /= piv;
                }
                let nz: Vec<(usize, f64)> = pivot_row
                    .iter()
                    .enumerate()
                    .filter(|&(_, &v)| v != 0.0)
                    .map(|(k, &v)| (k, v))
                    .collect();
                for (p, &a) in alpha.iter().enumerate() {
                    if p == r || a == 0.0 {
                        continue;
                    }
                    let target = if p < r {
                        &mut head[p * m..(p + 1) * m]
                    } else {
                        let o = (p - r - 1) * m;
                        &mut tail[o..o + m]
                    };
                    for &(k, pv) in &nz {
                        target[k] -= a * pv;
                    }
                }
                for &(k, pv) in &nz {
                    self.y[k] += d_q * pv;
                }
                self.since_refactor += 1;
            }
            Step::Unbounded => unreachable!("handled by caller"),
        }
    }

    /// Rebuild the basis inverse and the basic values from scratch.
    fn refactor(&mut self) -> Result<(), String> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut a = vec![0.0; m * m];
        for (p, &j) in self.basis.iter().enumerate() {
            let c = &self.cols[j];
            for (&i, &v) in c.rows.iter().zip(&c.vals) {
                a[i * m + p] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv_row = col;
            let mut piv_val = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val < 1e-11 {
                return Err("singular basis during reinversion".into());
            }
            if piv_row != col {
                for k in 0..m {
                    a.swap(col * m + k, piv_row * m + k);
                    inv.swap(col * m + k, piv_row * m + k);
                }
            }
            let pv = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= pv;
                inv[col * m + k] /= pv;
            }
            let (arow, ainv): (Vec<(usize, f64)>, Vec<(usize, f64)>) = (
                (0..m)
                    .filter_map(|k| {
                        let v = a[col * m + k];
                        (v != 0.0).then_some((k, v))
                    })
                    .collect(),
                (0..m)
                    .filter_map(|k| {
                        let v = inv[col * m + k];
                        (v != 0.0).then_some((k, v))
                    })
                    .collect(),
            );
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for &(k, v) in &arow {
                    a[r * m + k] -= f * v;
                }
                for &(k, v) in &ainv {
                    inv[r * m + k] -= f * v;
                }
            }
        }
        // The rows of `inv` are indexed by basis position because column p of
        // the basis matrix was basis[p].
        self.binv = inv;

        let mut resid = self.rhs.clone();
        for (j, c) in self.cols.iter().enumerate() {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let xj = self.x[j];
            if xj != 0.0 {
                for (&i, &v) in c.rows.iter().zip(&c.vals) {
                    resid[i] -= v * xj;
                }
            }
        }
        for p in 0..m {
            let row = &self.binv[p * m..(p + 1) * m];
            self.x[self.basis[p]] = row.iter().zip(&resid).map(|(b, r)| b * r).sum();
        }
        self.compute_duals();
        Ok(())
    }
}
