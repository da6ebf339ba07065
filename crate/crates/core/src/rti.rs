//! Real-time iteration: one linearize-condense-solve cycle per sample with a
//! full Newton step, plus the KKT diagnostic and inter-sample warm start.

use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::blocking::BlockStructure;
use crate::condensing::{
    blocked_sensitivities, condense, expand, naive_condense, residual_chain, CondensedQp, FlopCounter, SensitivityChain,
};
use crate::error::{Error, Result};
use crate::model::Dynamics;
use crate::qp::{solve, DenseQp, QpOptions, QpStatus, WorkingSet};
use crate::shooting::{evaluate, evaluate_from_measurement, Ocp, StageData, Trajectory};

/// How the linearization point moves from one sample to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarmStartPolicy {
    /// Keep the blocked inputs and re-simulate the node states from the new
    /// measurement during `prepare`. Unsuitable for open-loop unstable plants
    /// over long horizons: the stale input plan diverges in simulation.
    Resimulate,
    /// Keep the whole trajectory; the measurement enters through the initial embedding.
    #[default]
    Carry,
    /// Classical one-interval shift (unit blocks only), last entry repeated.
    Shift,
}

/// Which condensing pipeline `prepare` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CondensingRoute {
    #[default]
    Tailored,
    /// Unblocked condensing followed by explicit `T` products.
    Naive,
}

#[derive(Debug, Clone, Default)]
pub struct RtiOptions {
    pub qp: QpOptions,
    pub policy: WarmStartPolicy,
    pub route: CondensingRoute,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub shooting: Duration,
    pub condensing: Duration,
    pub qp: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.shooting + self.condensing + self.qp
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub eq_residual: f64,
    pub ineq_violation: f64,
    pub total: f64,
}

/// Inequality multipliers of the stage-wise QP, one vector per node.
#[derive(Debug, Clone)]
pub struct NodeMultipliers {
    pub stage: Vec<DVector<f64>>,
    pub terminal: DVector<f64>,
    /// `mu_upper - mu_lower` of the input bounds, stacked per block.
    pub bounds: DVector<f64>,
}

impl NodeMultipliers {
    pub fn zeros(sd: &StageData, bs: &BlockStructure) -> Self {
        Self {
            stage: sd.stages.iter().map(|s| DVector::zeros(s.c.len())).collect(),
            terminal: DVector::zeros(sd.terminal.c.len()),
            bounds: DVector::zeros(bs.num_blocks() * sd.nu),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RtiState {
    pub traj: Trajectory,
    pub ws: WorkingSet,
    pub last_kkt: Option<KktReport>,
    pub timings: PhaseTimings,
}

/// Output of [`RtiController::prepare`].
#[derive(Debug, Clone)]
pub struct Prepared {
    pub qp: CondensedQp,
    pub chain: SensitivityChain,
    pub sd: StageData,
    pub flops: FlopCounter,
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub u_applied: DVector<f64>,
    pub du: DVector<f64>,
    pub kkt: KktReport,
    pub qp_iterations: usize,
    pub qp_status: QpStatus,
    pub timings: PhaseTimings,
}

/// Residuals of the stage-wise QP optimality conditions at the increments
/// `(dx, du)` with inequality multipliers `mult`.
///
/// Costates follow from the backward recursion
/// `lambda_N = q_N + Q_N dx_N + Cx_N' mu_N`,
/// `lambda_k = q_k + Q_k dx_k + S_k du + A_k' lambda_{k+1} + Cx_k' mu_k`;
/// the input stationarity of block `j` sums its intervals' contributions.
pub fn kkt_residual(sd: &StageData, bs: &BlockStructure, dx: &[DVector<f64>], du: &DVector<f64>, mult: &NodeMultipliers) -> KktReport {
    let n = bs.horizon();
    let nu = sd.nu;
    let blocks = bs.interval_blocks();
    let du_of = |k: usize| du.rows(blocks[k] * nu, nu);

    let mut stat = mult.bounds.clone();
    let mut lambda_next = &sd.terminal.q + &sd.terminal.hxx * &dx[n] + sd.terminal.cx.transpose() * &mult.terminal;
    for k in (0..n).rev() {
        let s = &sd.stages[k];
        let duk = du_of(k);
        let mut seg = stat.rows_mut(blocks[k] * nu, nu);
        seg += &s.r + &s.huu * duk + s.hxu.transpose() * &dx[k] + s.b.transpose() * &lambda_next + s.cu.transpose() * &mult.stage[k];
        if k > 0 {
            lambda_next = &s.q + &s.hxx * &dx[k] + &s.hxu * duk + s.a.transpose() * &lambda_next + s.cx.transpose() * &mult.stage[k];
        }
    }

    let mut eq = (&dx[0] - &sd.dx0).amax();
    let mut ineq: f64 = 0.0;
    for k in 0..n {
        let s = &sd.stages[k];
        let duk = du_of(k);
        let defect = &s.a * &dx[k] + &s.b * duk + &s.d - &dx[k + 1];
        eq = eq.max(defect.amax());
        if !s.c.is_empty() {
            ineq = ineq.max((&s.cx * &dx[k] + &s.cu * duk + &s.c).max());
        }
    }
    if !sd.terminal.c.is_empty() {
        ineq = ineq.max((&sd.terminal.cx * &dx[n] + &sd.terminal.c).max());
    }
    for j in 0..bs.num_blocks() {
        for i in 0..nu {
            let v = du[j * nu + i];
            ineq = ineq.max(v - sd.du_upper[j][i]).max(sd.du_lower[j][i] - v);
        }
    }
    let stationarity = stat.amax();
    let ineq_violation = ineq.max(0.0);
    KktReport {
        stationarity,
        eq_residual: eq,
        ineq_violation,
        total: stationarity + eq + ineq_violation,
    }
}

/// Maps condensed-QP multipliers back to the nodes they came from.
pub fn node_multipliers(
    qp: &CondensedQp,
    sd: &StageData,
    bs: &BlockStructure,
    lambda: &DVector<f64>,
    bounds: DVector<f64>,
) -> NodeMultipliers {
    let mut out = NodeMultipliers::zeros(sd, bs);
    out.bounds = bounds;
    let n = bs.horizon();
    for (r, origin) in qp.row_origin.iter().enumerate() {
        if origin.node == n {
            out.terminal[origin.row] = lambda[r];
        } else {
            out.stage[origin.node][origin.row] = lambda[r];
        }
    }
    out
}

/// RTI controller for one problem and block structure.
#[derive(Debug, Clone)]
pub struct RtiController<D> {
    pub ocp: Ocp<D>,
    pub bs: BlockStructure,
    pub opts: RtiOptions,
    pub state: RtiState,
}

impl<D: Dynamics> RtiController<D> {
    pub fn new(ocp: Ocp<D>, bs: BlockStructure, opts: RtiOptions, traj: Trajectory) -> Result<Self> {
        if bs.horizon() != ocp.horizon() {
            return Err(Error::DimensionMismatch {
                what: "block structure horizon",
                expected: ocp.horizon(),
                got: bs.horizon(),
            });
        }
        traj.check(&bs, ocp.dynamics.nx(), ocp.dynamics.nu())?;
        if opts.policy == WarmStartPolicy::Shift && !bs.is_unit() {
            return Err(Error::InvalidProblem("shift warm start requires unit blocks".into()));
        }
        Ok(Self {
            ocp,
            bs,
            opts,
            state: RtiState {
                traj,
                ws: WorkingSet::default(),
                last_kkt: None,
                timings: PhaseTimings::default(),
            },
        })
    }

    /// Initial trajectory holding `u` on every block, simulated from `x0`.
    pub fn constant_input_guess(ocp: &Ocp<D>, bs: &BlockStructure, x0: &DVector<f64>, u: &DVector<f64>) -> Result<Trajectory> {
        let us = vec![u.clone(); bs.num_blocks()];
        crate::shooting::forward_simulate(ocp, bs, x0, &us)
    }

    /// Linearization and condensing at the current trajectory for measurement `x0_hat`.
    pub fn prepare(&mut self, x0_hat: &DVector<f64>) -> Result<Prepared> {
        let t0 = Instant::now();
        let sd = match self.opts.policy {
            WarmStartPolicy::Resimulate => {
                let (traj, sd) = evaluate_from_measurement(&self.ocp, &self.bs, x0_hat, &self.state.traj.us)?;
                self.state.traj = traj;
                sd
            }
            WarmStartPolicy::Carry | WarmStartPolicy::Shift => evaluate(&self.ocp, &self.bs, &self.state.traj, x0_hat)?,
        };
        let t1 = Instant::now();
        let mut flops = FlopCounter::default();
        let (qp, chain) = match self.opts.route {
            CondensingRoute::Tailored => condense(&sd, &self.bs, &mut flops)?,
            CondensingRoute::Naive => {
                let (qp, _) = naive_condense(&sd, &self.bs, &mut flops)?;
                let ghat = blocked_sensitivities(&sd, &self.bs);
                let l = residual_chain(&sd, &sd.dx0);
                (qp, SensitivityChain { ghat, l })
            }
        };
        let t2 = Instant::now();
        self.state.timings.shooting = t1 - t0;
        self.state.timings.condensing = t2 - t1;
        Ok(Prepared { qp, chain, sd, flops })
    }

    /// Solves the condensed QP, takes the full Newton step and evaluates the
    /// KKT residual at the new iterate.
    pub fn feedback(&mut self, prep: &Prepared, x0_hat: &DVector<f64>) -> Result<StepReport> {
        let nu = prep.sd.nu;
        let t0 = Instant::now();
        let dense = DenseQp::from(&prep.qp);
        let sol = solve(&dense, Some(&self.state.ws), &self.opts.qp);
        let dx = expand(&prep.chain, &self.bs, &prep.sd.dx0, &sol.z);
        for (x, d) in self.state.traj.xs.iter_mut().zip(&dx) {
            *x += d;
        }
        for (j, u) in self.state.traj.us.iter_mut().enumerate() {
            *u += sol.z.rows(j * nu, nu);
        }
        let qp_time = t0.elapsed();
        self.state.timings.qp = qp_time;
        self.state.ws = sol.ws.clone();

        let mult = node_multipliers(&prep.qp, &prep.sd, &self.bs, &sol.lambda, &sol.mu_upper - &sol.mu_lower);
        let kkt = self.kkt_at_current(x0_hat, &mult)?;
        self.state.last_kkt = Some(kkt);
        Ok(StepReport {
            u_applied: self.state.traj.us[0].clone(),
            du: sol.z,
            kkt,
            qp_iterations: sol.iterations,
            qp_status: sol.status,
            timings: self.state.timings,
        })
    }

    /// KKT residual of the linearization at the current trajectory, with zero
    /// increments and the given multipliers.
    pub fn kkt_at_current(&self, x0_hat: &DVector<f64>, mult: &NodeMultipliers) -> Result<KktReport> {
        let sd = evaluate(&self.ocp, &self.bs, &self.state.traj, x0_hat)?;
        let dx = vec![DVector::zeros(sd.nx); self.bs.horizon() + 1];
        let du = DVector::zeros(self.bs.num_blocks() * sd.nu);
        Ok(kkt_residual(&sd, &self.bs, &dx, &du, mult))
    }

    /// Moves the linearization point to the next sample according to the policy.
    pub fn advance(&mut self) {
        if self.opts.policy == WarmStartPolicy::Shift {
            let traj = &mut self.state.traj;
            traj.xs.rotate_left(1);
            let n = traj.xs.len();
            traj.xs[n - 1] = traj.xs[n - 2].clone();
            traj.us.rotate_left(1);
            let m = traj.us.len();
            traj.us[m - 1] = traj.us[m.saturating_sub(2)].clone();
        }
    }

    /// `prepare`, `feedback` and `advance` for one sample.
    pub fn step(&mut self, x0_hat: &DVector<f64>) -> Result<(StepReport, Prepared)> {
        let prep = self.prepare(x0_hat)?;
        let report = self.feedback(&prep, x0_hat)?;
        self.advance();
        Ok((report, prep))
    }
}
