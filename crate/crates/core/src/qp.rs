//! Dense primal active-set solver for strictly convex QPs
//!
//! ```text
//! min 1/2 z'Hz + g'z   s.t.   C z + c <= 0,   lb <= z <= ub
//! ```
//!
//! Every working-set change refactorizes the equality-constrained subproblem
//! from scratch (Cholesky of the free Hessian block and of the Schur
//! complement of the active rows).

use nalgebra::{DMatrix, DVector};

use crate::condensing::CondensedQp;
use crate::error::{Error, Result};

/// `min 1/2 z'Hz + g'z  s.t.  c_rows z + cvec <= 0,  lb <= z <= ub`.
#[derive(Debug, Clone)]
pub struct DenseQp {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub c_rows: DMatrix<f64>,
    pub cvec: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl DenseQp {
    pub fn new(
        h: DMatrix<f64>,
        g: DVector<f64>,
        c_rows: DMatrix<f64>,
        cvec: DVector<f64>,
        lb: DVector<f64>,
        ub: DVector<f64>,
    ) -> Result<Self> {
        let qp = Self {
            h,
            g,
            c_rows,
            cvec,
            lb,
            ub,
        };
        qp.validate()?;
        Ok(qp)
    }

    /// Unconstrained problem with infinite bounds.
    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Result<Self> {
        let n = g.len();
        Self::new(
            h,
            g,
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DVector::from_element(n, f64::NEG_INFINITY),
            DVector::from_element(n, f64::INFINITY),
        )
    }

    pub fn num_vars(&self) -> usize {
        self.g.len()
    }

    pub fn num_rows(&self) -> usize {
        self.cvec.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.g.len();
        let check = |what: &'static str, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { what, expected, got })
            }
        };
        check("QP Hessian rows", n, self.h.nrows())?;
        check("QP Hessian columns", n, self.h.ncols())?;
        check("QP constraint columns", n, self.c_rows.ncols())?;
        check("QP constraint constants", self.c_rows.nrows(), self.cvec.len())?;
        check("QP lower bounds", n, self.lb.len())?;
        check("QP upper bounds", n, self.ub.len())?;
        if let Some(i) = (0..n).find(|&i| self.lb[i].partial_cmp(&self.ub[i]).is_none_or(|o| o.is_gt())) {
            return Err(Error::InvalidProblem(format!(
                "bound {i}: lower {} exceeds upper {}",
                self.lb[i], self.ub[i]
            )));
        }
        if self.h.clone().cholesky().is_none() {
            return Err(Error::InvalidProblem("QP Hessian is not positive definite".into()));
        }
        Ok(())
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.g.dot(z)
    }

    /// Largest constraint violation (rows and bounds) at `z`, zero if feasible.
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let rows = (&self.c_rows * z + &self.cvec).max().max(0.0);
        let bounds = (0..z.len()).map(|i| (self.lb[i] - z[i]).max(z[i] - self.ub[i])).fold(0.0, f64::max);
        rows.max(bounds)
    }
}

impl From<&CondensedQp> for DenseQp {
    fn from(qp: &CondensedQp) -> Self {
        Self {
            h: qp.h.clone(),
            g: qp.g.clone(),
            c_rows: qp.c.clone(),
            cvec: qp.cvec.clone(),
            lb: qp.lb.clone(),
            ub: qp.ub.clone(),
        }
    }
}

/// Constraint identifier. The derived order (all lower bounds, then upper
/// bounds, then rows, each by index) is the tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintId {
    Lower(usize),
    Upper(usize),
    Row(usize),
}

/// Constraints treated as equalities, in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkingSet {
    pub active: Vec<ConstraintId>,
}

impl WorkingSet {
    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, id: ConstraintId) -> bool {
        self.active.contains(&id)
    }

    fn bound_on(&self, i: usize) -> Option<ConstraintId> {
        self.active
            .iter()
            .copied()
            .find(|id| matches!(id, ConstraintId::Lower(j) | ConstraintId::Upper(j) if *j == i))
    }

    /// Drops entries that do not exist in a problem of the given size.
    fn restricted_to(&self, n: usize, m: usize) -> Self {
        let mut out = Self::default();
        for &id in &self.active {
            let ok = match id {
                ConstraintId::Lower(i) | ConstraintId::Upper(i) => i < n && out.bound_on(i).is_none(),
                ConstraintId::Row(r) => r < m,
            };
            if ok && !out.contains(id) {
                out.active.push(id);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpOptions {
    pub tol: f64,
    /// `None` means `100 (n + m)`.
    pub max_iter: Option<usize>,
    /// Record the objective after every primal step.
    pub record_objective: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: None,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Row multipliers, zero for inactive rows.
    pub lambda: DVector<f64>,
    pub mu_lower: DVector<f64>,
    pub mu_upper: DVector<f64>,
    pub ws: WorkingSet,
    pub iterations: usize,
    pub status: QpStatus,
    pub objective_trace: Vec<f64>,
}

impl QpSolution {
    /// `H z + g + C' lambda + mu_upper - mu_lower`.
    pub fn stationarity(&self, qp: &DenseQp) -> DVector<f64> {
        &qp.h * &self.z + &qp.g + qp.c_rows.transpose() * &self.lambda + &self.mu_upper - &self.mu_lower
    }
}

/// Solution of the subproblem with the working set held as equalities.
struct EqSolution {
    z: DVector<f64>,
    /// Multipliers aligned with the working set entries.
    mult: Vec<f64>,
}

fn solve_equality(qp: &DenseQp, ws: &WorkingSet) -> Option<EqSolution> {
    let n = qp.num_vars();
    let mut z = DVector::zeros(n);
    let mut fixed = vec![false; n];
    let mut rows = Vec::new();
    for &id in &ws.active {
        match id {
            ConstraintId::Lower(i) => {
                z[i] = qp.lb[i];
                fixed[i] = true;
            }
            ConstraintId::Upper(i) => {
                z[i] = qp.ub[i];
                fixed[i] = true;
            }
            ConstraintId::Row(r) => rows.push(r),
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let nf = free.len();
    if rows.len() > nf {
        return None;
    }

    // Reduced data over the free variables with the fixed part folded in.
    let h_ff = DMatrix::from_fn(nf, nf, |a, b| qp.h[(free[a], free[b])]);
    let mut g_f = DVector::from_fn(nf, |a, _| qp.g[free[a]]);
    let a_f = DMatrix::from_fn(rows.len(), nf, |r, a| qp.c_rows[(rows[r], free[a])]);
    let mut b = DVector::from_fn(rows.len(), |r, _| qp.cvec[rows[r]]);
    for i in (0..n).filter(|&i| fixed[i]) {
        for a in 0..nf {
            g_f[a] += qp.h[(free[a], i)] * z[i];
        }
        for (r, &row) in rows.iter().enumerate() {
            b[r] += qp.c_rows[(row, i)] * z[i];
        }
    }

    let chol = h_ff.cholesky()?;
    let hinv_g = chol.solve(&g_f);
    let lambda = if rows.is_empty() {
        DVector::zeros(0)
    } else {
        let hinv_at = chol.solve(&a_f.transpose());
        let schur = &a_f * &hinv_at;
        let rhs = &b - &a_f * &hinv_g;
        let schur_chol = schur.cholesky()?;
        // Reject numerically dependent rows.
        let diag_min = schur_chol.l_dirty().diagonal().min();
        let diag_max = schur_chol.l_dirty().diagonal().max();
        if diag_min <= 1e-10 * diag_max.max(1.0) {
            return None;
        }
        schur_chol.solve(&rhs)
    };
    let z_f = -chol.solve(&(&g_f + a_f.transpose() * &lambda));
    for (a, &i) in free.iter().enumerate() {
        z[i] = z_f[a];
    }

    let mut residual = &qp.h * &z + &qp.g;
    for (r, &row) in rows.iter().enumerate() {
        residual += qp.c_rows.row(row).transpose() * lambda[r];
    }
    let mut row_pos = 0;
    let mult = ws
        .active
        .iter()
        .map(|&id| match id {
            ConstraintId::Lower(i) => residual[i],
            ConstraintId::Upper(i) => -residual[i],
            ConstraintId::Row(_) => {
                row_pos += 1;
                lambda[row_pos - 1]
            }
        })
        .collect();
    Some(EqSolution { z, mult })
}

fn row_value(qp: &DenseQp, r: usize, z: &DVector<f64>) -> f64 {
    qp.c_rows.row(r).dot(&z.transpose()) + qp.cvec[r]
}

fn violation(qp: &DenseQp, id: ConstraintId, z: &DVector<f64>) -> f64 {
    match id {
        ConstraintId::Lower(i) => qp.lb[i] - z[i],
        ConstraintId::Upper(i) => z[i] - qp.ub[i],
        ConstraintId::Row(r) => row_value(qp, r, z),
    }
}

/// All constraint identifiers in tie-breaking order; infinite bounds are skipped.
fn all_ids(qp: &DenseQp) -> Vec<ConstraintId> {
    let n = qp.num_vars();
    let mut ids: Vec<ConstraintId> = (0..n).filter(|&i| qp.lb[i].is_finite()).map(ConstraintId::Lower).collect();
    ids.extend((0..n).filter(|&i| qp.ub[i].is_finite()).map(ConstraintId::Upper));
    ids.extend((0..qp.num_rows()).map(ConstraintId::Row));
    ids
}

fn is_feasible(qp: &DenseQp, z: &DVector<f64>, tol: f64) -> bool {
    qp.max_violation(z) <= tol
}

struct LoopResult {
    z: DVector<f64>,
    ws: WorkingSet,
    mult: Vec<f64>,
    iterations: usize,
    status: QpStatus,
}

/// Primal active-set iterations from a feasible `z` with a working set whose
/// constraints are active at `z`.
fn primal_loop(
    qp: &DenseQp,
    mut z: DVector<f64>,
    mut ws: WorkingSet,
    tol: f64,
    max_iter: usize,
    trace: &mut Option<Vec<f64>>,
) -> LoopResult {
    let ids = all_ids(qp);
    let step_tol = tol * (1.0 + z.amax());
    let mut last_mult = vec![0.0; ws.len()];
    for iter in 1..=max_iter {
        let Some(sub) = solve_equality(qp, &ws) else {
            // Only reachable through a numerically dependent working set; drop the newest entry.
            ws.active.pop();
            last_mult.pop();
            continue;
        };
        let p = &sub.z - &z;
        let mut full_step = true;
        if p.amax() > step_tol {
            let mut alpha = 1.0;
            let mut blocking = None;
            for &id in &ids {
                if ws.contains(id) {
                    continue;
                }
                let (slope, slack) = match id {
                    ConstraintId::Lower(i) => (-p[i], z[i] - qp.lb[i]),
                    ConstraintId::Upper(i) => (p[i], qp.ub[i] - z[i]),
                    ConstraintId::Row(r) => (qp.c_rows.row(r).dot(&p.transpose()), -row_value(qp, r, &z)),
                };
                if slope <= 1e-14 {
                    continue;
                }
                let step = slack.max(0.0) / slope;
                if step < alpha {
                    alpha = step;
                    blocking = Some(id);
                }
            }
            z.axpy(alpha, &p, 1.0);
            if let Some(id) = blocking {
                full_step = false;
                ws.active.push(id);
                last_mult.push(0.0);
            } else {
                z.copy_from(&sub.z);
            }
            if let Some(t) = trace.as_mut() {
                t.push(qp.objective(&z));
            }
        } else {
            // Land exactly on the working-set solution so active rows hold to rounding.
            z.copy_from(&sub.z);
        }
        if !full_step {
            continue;
        }

        last_mult.clone_from(&sub.mult);
        let mut worst: Option<(f64, ConstraintId, usize)> = None;
        for (pos, (&id, &mu)) in ws.active.iter().zip(&sub.mult).enumerate() {
            if mu < -tol {
                let better = match worst {
                    None => true,
                    Some((w, wid, _)) => mu < w || (mu == w && id < wid),
                };
                if better {
                    worst = Some((mu, id, pos));
                }
            }
        }
        match worst {
            None => {
                return LoopResult {
                    z,
                    ws,
                    mult: sub.mult,
                    iterations: iter,
                    status: QpStatus::Solved,
                }
            }
            Some((_, _, pos)) => {
                ws.active.remove(pos);
                last_mult.remove(pos);
            }
        }
    }
    LoopResult {
        z,
        ws,
        mult: last_mult,
        iterations: max_iter,
        status: QpStatus::MaxIterations,
    }
}

/// Cold start: clamp the unconstrained minimizer into the bounds, then add the
/// most violated constraint and re-solve until feasible. `None` if this stalls.
fn heuristic_start(qp: &DenseQp, tol: f64) -> Option<(DVector<f64>, WorkingSet)> {
    let n = qp.num_vars();
    let mut z = -qp.h.clone().cholesky()?.solve(&qp.g);
    let mut ws = WorkingSet::default();
    for i in 0..n {
        if z[i] < qp.lb[i] {
            z[i] = qp.lb[i];
            ws.active.push(ConstraintId::Lower(i));
        } else if z[i] > qp.ub[i] {
            z[i] = qp.ub[i];
            ws.active.push(ConstraintId::Upper(i));
        }
    }
    let ids = all_ids(qp);
    for _ in 0..=(n + qp.num_rows()) {
        let worst = ids
            .iter()
            .copied()
            .filter(|id| !ws.contains(*id))
            .map(|id| (violation(qp, id, &z), id))
            .filter(|(v, _)| *v > tol)
            .fold(None, |acc: Option<(f64, ConstraintId)>, cur| match acc {
                Some(a) if a.0 >= cur.0 => Some(a),
                _ => Some(cur),
            });
        let Some((_, id)) = worst else {
            return Some((z, ws));
        };
        if ws.len() >= n {
            return None;
        }
        if let ConstraintId::Lower(i) | ConstraintId::Upper(i) = id {
            if ws.bound_on(i).is_some() {
                return None;
            }
        }
        ws.active.push(id);
        z = solve_equality(qp, &ws)?.z;
    }
    None
}

const PHASE1_WEIGHT: f64 = 1e-6;

/// Slack problem `min eps/2 |z - z0|^2 + eps/2 s^2 + s  s.t.  C z + c - s <= 0,
/// lb <= z <= ub, s >= 0`. Starts feasible, so it never recurses.
fn phase_one(qp: &DenseQp, tol: f64, max_iter: usize) -> (DVector<f64>, f64) {
    let n = qp.num_vars();
    let m = qp.num_rows();
    let z0 = match qp.h.clone().cholesky() {
        Some(chol) => -chol.solve(&qp.g),
        None => DVector::zeros(n),
    };
    let clamped = DVector::from_fn(n, |i, _| z0[i].clamp(qp.lb[i], qp.ub[i]));

    let mut h = DMatrix::identity(n + 1, n + 1) * PHASE1_WEIGHT;
    h[(n, n)] = PHASE1_WEIGHT;
    let mut g = DVector::zeros(n + 1);
    g.rows_mut(0, n).copy_from(&(-&clamped * PHASE1_WEIGHT));
    g[n] = 1.0;
    let mut c_rows = DMatrix::zeros(m, n + 1);
    c_rows.view_mut((0, 0), (m, n)).copy_from(&qp.c_rows);
    c_rows.column_mut(n).fill(-1.0);
    let mut lb = DVector::from_element(n + 1, 0.0);
    lb.rows_mut(0, n).copy_from(&qp.lb);
    let mut ub = DVector::from_element(n + 1, f64::INFINITY);
    ub.rows_mut(0, n).copy_from(&qp.ub);
    let aux = DenseQp {
        h,
        g,
        c_rows,
        cvec: qp.cvec.clone(),
        lb,
        ub,
    };

    let mut start = DVector::zeros(n + 1);
    start.rows_mut(0, n).copy_from(&clamped);
    start[n] = (&qp.c_rows * &clamped + &qp.cvec).max().max(0.0);
    let res = primal_loop(&aux, start, WorkingSet::default(), tol, max_iter, &mut None);
    let s = res.z[n];
    (res.z.rows(0, n).into_owned(), s)
}

fn package(qp: &DenseQp, res: LoopResult, trace: Option<Vec<f64>>) -> QpSolution {
    let n = qp.num_vars();
    let mut lambda = DVector::zeros(qp.num_rows());
    let mut mu_lower = DVector::zeros(n);
    let mut mu_upper = DVector::zeros(n);
    if res.status == QpStatus::Solved {
        for (&id, &mu) in res.ws.active.iter().zip(&res.mult) {
            match id {
                ConstraintId::Lower(i) => mu_lower[i] = mu,
                ConstraintId::Upper(i) => mu_upper[i] = mu,
                ConstraintId::Row(r) => lambda[r] = mu,
            }
        }
    }
    QpSolution {
        z: res.z,
        lambda,
        mu_lower,
        mu_upper,
        ws: res.ws,
        iterations: res.iterations,
        status: res.status,
        objective_trace: trace.unwrap_or_default(),
    }
}

/// Solves `qp`, optionally warm-started from a previous working set.
///
/// A warm working set is used when its subproblem solution is feasible;
/// otherwise the solver falls back to a cold start. Infeasibility is detected
/// by a slack phase-1 problem, whose minimizer is returned in that case.
pub fn solve(qp: &DenseQp, warm: Option<&WorkingSet>, opts: &QpOptions) -> QpSolution {
    let n = qp.num_vars();
    let m = qp.num_rows();
    let tol = opts.tol;
    let max_iter = opts.max_iter.unwrap_or(100 * (n + m)).max(1);
    let mut trace = opts.record_objective.then(Vec::new);

    let mut start = None;
    if let Some(ws) = warm {
        let ws = ws.restricted_to(n, m);
        if let Some(sub) = solve_equality(qp, &ws) {
            if is_feasible(qp, &sub.z, tol) {
                start = Some((sub.z, ws));
            }
        }
    }
    if start.is_none() {
        start = heuristic_start(qp, tol);
    }
    let (z, ws) = match start {
        Some(s) => s,
        None => {
            let (z, s) = phase_one(qp, tol, max_iter);
            if s > tol {
                return QpSolution {
                    z,
                    lambda: DVector::zeros(m),
                    mu_lower: DVector::zeros(n),
                    mu_upper: DVector::zeros(n),
                    ws: WorkingSet::default(),
                    iterations: 0,
                    status: QpStatus::Infeasible,
                    objective_trace: trace.unwrap_or_default(),
                };
            }
            (z, WorkingSet::default())
        }
    };
    if let Some(t) = trace.as_mut() {
        t.push(qp.objective(&z));
    }
    let res = primal_loop(qp, z, ws, tol, max_iter, &mut trace);
    package(qp, res, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn boxed(h: DMatrix<f64>, g: DVector<f64>, lb: f64, ub: f64) -> DenseQp {
        let n = g.len();
        DenseQp::new(
            h,
            g,
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DVector::from_element(n, lb),
            DVector::from_element(n, ub),
        )
        .unwrap()
    }

    /// Random strictly convex QP with a known feasible interior point.
    fn random_qp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseQp {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let h = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
        let g = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
        let z0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let c_rows = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let cvec = DVector::from_fn(m, |r, _| -c_rows.row(r).dot(&z0.transpose()) - rng.gen_range(0.1..1.0));
        let lb = DVector::from_fn(n, |i, _| z0[i] - rng.gen_range(0.2..2.0));
        let ub = DVector::from_fn(n, |i, _| z0[i] + rng.gen_range(0.2..2.0));
        DenseQp::new(h, g, c_rows, cvec, lb, ub).unwrap()
    }

    fn check_kkt(qp: &DenseQp, sol: &QpSolution, tol: f64) {
        assert_eq!(sol.status, QpStatus::Solved);
        assert!(sol.stationarity(qp).amax() <= tol, "stationarity {}", sol.stationarity(qp).amax());
        assert!(qp.max_violation(&sol.z) <= tol);
        let rows = &qp.c_rows * &sol.z + &qp.cvec;
        for r in 0..qp.num_rows() {
            assert!(sol.lambda[r] >= -tol);
            assert!((sol.lambda[r] * rows[r]).abs() <= tol);
        }
        for i in 0..qp.num_vars() {
            assert!(sol.mu_lower[i] >= -tol && sol.mu_upper[i] >= -tol);
            if qp.lb[i].is_finite() {
                assert!((sol.mu_lower[i] * (sol.z[i] - qp.lb[i])).abs() <= tol);
            }
            if qp.ub[i].is_finite() {
                assert!((sol.mu_upper[i] * (qp.ub[i] - sol.z[i])).abs() <= tol);
            }
        }
    }

    #[test]
    fn unconstrained_minimizer() {
        let qp = DenseQp::unconstrained(DMatrix::identity(2, 2), DVector::from_vec(vec![-1.0, -1.0])).unwrap();
        let sol = solve(&qp, None, &QpOptions::default());
        assert_eq!(sol.status, QpStatus::Solved);
        assert!((sol.z.clone() - DVector::from_element(2, 1.0)).amax() < 1e-14);
        assert!(sol.ws.is_empty());
    }

    #[test]
    fn active_upper_bounds() {
        let qp = boxed(DMatrix::identity(2, 2), DVector::from_vec(vec![-1.0, -1.0]), f64::NEG_INFINITY, 0.5);
        let sol = solve(&qp, None, &QpOptions::default());
        check_kkt(&qp, &sol, 1e-12);
        assert_eq!(sol.z, DVector::from_element(2, 0.5));
        assert_eq!(sol.mu_upper, DVector::from_element(2, 0.5));
        assert!(sol.ws.contains(ConstraintId::Upper(0)) && sol.ws.contains(ConstraintId::Upper(1)));
    }

    #[test]
    fn general_row_becomes_active() {
        // min 1/2|z|^2 - z0 - z1  s.t.  z0 + z1 <= 1  ->  z = [0.5, 0.5], lambda = 0.5.
        let qp = DenseQp::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![-1.0, -1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![-1.0]),
            DVector::from_element(2, -10.0),
            DVector::from_element(2, 10.0),
        )
        .unwrap();
        let sol = solve(&qp, None, &QpOptions::default());
        check_kkt(&qp, &sol, 1e-12);
        assert!((sol.z[0] - 0.5).abs() < 1e-14 && (sol.lambda[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn infeasible_rows_are_reported() {
        // z <= -1 and -z <= -1 cannot both hold.
        let qp = DenseQp::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_element(1, -5.0),
            DVector::from_element(1, 5.0),
        )
        .unwrap();
        let sol = solve(&qp, None, &QpOptions::default());
        assert_eq!(sol.status, QpStatus::Infeasible);
        assert!(sol.z[0].abs() < 1e-6);
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let bad_h = DenseQp::unconstrained(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), DVector::zeros(2));
        assert!(matches!(bad_h, Err(Error::InvalidProblem(_))));
        let crossed = DenseQp::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 0.0),
        );
        assert!(crossed.is_err());
    }

    #[test]
    fn max_iterations_flags_best_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let qp = random_qp(&mut rng, 6, 8);
        let opts = QpOptions {
            max_iter: Some(1),
            ..QpOptions::default()
        };
        let sol = solve(&qp, None, &opts);
        if sol.status == QpStatus::MaxIterations {
            assert!(qp.max_violation(&sol.z) <= 1e-8);
        }
    }

    #[test]
    fn warm_start_from_random_set_still_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let qp = random_qp(&mut rng, 5, 6);
            let cold = solve(&qp, None, &QpOptions::default());
            let junk = WorkingSet {
                active: vec![
                    ConstraintId::Row(0),
                    ConstraintId::Upper(2),
                    ConstraintId::Lower(2),
                    ConstraintId::Row(99),
                ],
            };
            let warm = solve(&qp, Some(&junk), &QpOptions::default());
            check_kkt(&qp, &warm, 1e-8);
            assert!((&warm.z - &cold.z).amax() < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn solutions_satisfy_kkt(seed in any::<u64>(), n in 1usize..7, m in 0usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let qp = random_qp(&mut rng, n, m);
            let sol = solve(&qp, None, &QpOptions::default());
            check_kkt(&qp, &sol, 1e-8);
        }

        #[test]
        fn warm_restart_is_idempotent(seed in any::<u64>(), n in 1usize..7, m in 0usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let qp = random_qp(&mut rng, n, m);
            let first = solve(&qp, None, &QpOptions::default());
            let again = solve(&qp, Some(&first.ws), &QpOptions::default());
            prop_assert!(again.iterations <= 1);
            prop_assert!((&again.z - &first.z).amax() <= 1e-12);
        }

        #[test]
        fn objective_never_increases(seed in any::<u64>(), n in 1usize..7, m in 0usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let qp = random_qp(&mut rng, n, m);
            let opts = QpOptions { record_objective: true, ..QpOptions::default() };
            let sol = solve(&qp, None, &opts);
            for w in sol.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-10 * (1.0 + w[0].abs()));
            }
        }

        #[test]
        fn minimizer_is_scale_invariant(seed in any::<u64>(), alpha in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let qp = random_qp(&mut rng, 4, 5);
            let mut scaled = qp.clone();
            scaled.h *= alpha;
            scaled.g *= alpha;
            let a = solve(&qp, None, &QpOptions::default());
            let b = solve(&scaled, None, &QpOptions::default());
            prop_assert!((&a.z - &b.z).amax() <= 1e-10 * (1.0 + a.z.amax()));
        }

        #[test]
        fn solve_is_deterministic(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let qp = random_qp(&mut rng, 5, 6);
            let a = solve(&qp, None, &QpOptions::default());
            let b = solve(&qp, None, &QpOptions::default());
            prop_assert_eq!(a.z, b.z);
            prop_assert_eq!(a.ws, b.ws);
        }
    }
}
