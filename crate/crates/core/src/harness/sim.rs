//! Closed-loop simulation of the cart-pendulum under an RTI controller.

use nalgebra::{DMatrix, DVector};

use crate::condensing::CondensedQp;
use crate::error::Result;
use crate::harness::config::{Scheme, SchemeConfig};
use crate::integrator::{simulate_interval, IntegratorConfig};
use crate::model::{Pendulum, QuadraticCost, StageBounds};
use crate::qp::{QpOptions, QpStatus};
use crate::rti::{CondensingRoute, KktReport, PhaseTimings, RtiController, RtiOptions};
use crate::shooting::Ocp;

/// Slack allowed on the position and force limits before a sample is flagged.
pub const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub t: f64,
    /// Plant state at `t`, as measured by the controller.
    pub x: DVector<f64>,
    /// Input applied over `[t, t + ts)`.
    pub u: DVector<f64>,
    pub kkt: KktReport,
    pub timings: PhaseTimings,
    pub qp_iterations: usize,
    pub qp_status: QpStatus,
    pub hessian_multiplies: u64,
    /// `|p| > p_max` or `|u| > u_max` beyond [`BOUND_SLACK`].
    pub bound_violation: bool,
}

#[derive(Debug, Clone)]
pub struct SimLog {
    pub scheme: Scheme,
    pub config_echo: String,
    pub version: &'static str,
    pub samples: Vec<SampleRecord>,
    /// Set when the run stopped early; the samples up to that point are kept.
    pub aborted: Option<String>,
}

impl SimLog {
    pub fn kkt_totals(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.kkt.total).collect()
    }

    pub fn flagged_samples(&self) -> impl Iterator<Item = (usize, &SampleRecord)> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.bound_violation || s.qp_status != QpStatus::Solved)
    }
}

/// Builds the RTI controller for the configured scheme.
pub fn build_controller(cfg: &SchemeConfig, route: CondensingRoute) -> Result<RtiController<Pendulum>> {
    cfg.validate()?;
    let plant = Pendulum::new(cfg.pendulum_params())?;
    let bs = cfg.block_structure()?;
    let (grid, scale): (Vec<IntegratorConfig>, Vec<f64>) = match cfg.scheme {
        Scheme::A | Scheme::C => (vec![IntegratorConfig::new(cfg.ts, 1)?; cfg.horizon], vec![1.0; cfg.horizon]),
        Scheme::B => (
            cfg.grid()
                .iter()
                .map(|&n| IntegratorConfig::new(cfg.ts, n))
                .collect::<Result<_>>()?,
            cfg.grid().iter().map(|&n| n as f64).collect(),
        ),
    };
    let n = grid.len();
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(&cfg.q_diag));
    let qn = DMatrix::from_diagonal(&DVector::from_column_slice(cfg.terminal_diag()));
    let r = DMatrix::from_element(1, 1, cfg.r);
    let cost = QuadraticCost::constant_reference(q, r, qn, n, DVector::zeros(4), DVector::zeros(1))?.with_stage_scale(scale)?;

    let inf = f64::INFINITY;
    let bounds = StageBounds {
        x_lo: DVector::from_vec(vec![-cfg.p_max, -inf, -inf, -inf]),
        x_hi: DVector::from_vec(vec![cfg.p_max, inf, inf, inf]),
        u_lo: DVector::from_element(1, -cfg.u_max),
        u_hi: DVector::from_element(1, cfg.u_max),
    };
    let ocp = Ocp::new(plant, cost, bounds, grid)?;
    let x0 = DVector::from_column_slice(&cfg.x0);
    let traj = RtiController::constant_input_guess(&ocp, &bs, &x0, &DVector::zeros(1))?;
    let opts = RtiOptions {
        qp: QpOptions {
            tol: cfg.qp_tol,
            max_iter: cfg.qp_max_iter,
            record_objective: false,
        },
        policy: cfg.warm_start.into(),
        route,
    };
    RtiController::new(ocp, bs, opts, traj)
}

/// Condensed QP of the first sample, before any feedback.
pub fn first_qp(cfg: &SchemeConfig) -> Result<CondensedQp> {
    let mut ctl = build_controller(cfg, CondensingRoute::Tailored)?;
    let x0 = DVector::from_column_slice(&cfg.x0);
    Ok(ctl.prepare(&x0)?.qp)
}

/// Runs the closed loop with the tailored condensing route.
pub fn run_closed_loop(cfg: &SchemeConfig) -> Result<SimLog> {
    run_closed_loop_with(cfg, CondensingRoute::Tailored)
}

/// Per sample: measure, prepare, feedback, apply `u` to the plant over one
/// sampling period, advance. An integration failure ends the run early and is
/// recorded in [`SimLog::aborted`].
pub fn run_closed_loop_with(cfg: &SchemeConfig, route: CondensingRoute) -> Result<SimLog> {
    let mut ctl = build_controller(cfg, route)?;
    let plant = ctl.ocp.dynamics;
    let plant_step = IntegratorConfig::new(cfg.ts / cfg.plant_substeps as f64, cfg.plant_substeps)?;
    let mut log = SimLog {
        scheme: cfg.scheme,
        config_echo: cfg.echo(),
        version: env!("CARGO_PKG_VERSION"),
        samples: Vec::with_capacity(cfg.num_samples()),
        aborted: None,
    };
    let mut x = DVector::from_column_slice(&cfg.x0);
    for i in 0..cfg.num_samples() {
        let t = i as f64 * cfg.ts;
        let (report, prep) = match ctl.step(&x) {
            Ok(r) => r,
            Err(e) => {
                log.aborted = Some(format!("sample {i} (t = {t}): {e}"));
                break;
            }
        };
        let u = report.u_applied.clone();
        let bound_violation = x[0].abs() > cfg.p_max + BOUND_SLACK || u[0].abs() > cfg.u_max + BOUND_SLACK;
        log.samples.push(SampleRecord {
            t,
            x: x.clone(),
            u: u.clone(),
            kkt: report.kkt,
            timings: report.timings,
            qp_iterations: report.qp_iterations,
            qp_status: report.qp_status,
            hessian_multiplies: prep.flops.multiplies,
            bound_violation,
        });
        match simulate_interval(&plant_step, &plant, &x, &u) {
            Ok(next) => x = next,
            Err(e) => {
                log.aborted = Some(format!("plant after sample {i} (t = {t}): {e}"));
                break;
            }
        }
    }
    Ok(log)
}
