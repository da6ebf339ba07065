//! Multiple shooting with blocked inputs: builds the stage-wise QP data at a
//! linearization point. The QP keeps all `N` dynamic stages and `N + 1` cost
//! stages no matter how many input blocks there are.

use nalgebra::{DMatrix, DVector};

use crate::blocking::BlockStructure;
use crate::error::{Error, Result};
use crate::integrator::{integrate_interval, IntegratorConfig, Propagation};
use crate::model::{stage_cost_terms, terminal_cost_terms, Dynamics, ProblemDims, QuadraticCost, StageBounds};

/// Discretized optimal control problem: dynamics, cost, bounds and the
/// integration settings of each shooting interval.
#[derive(Debug, Clone)]
pub struct Ocp<D> {
    pub dynamics: D,
    pub cost: QuadraticCost,
    pub bounds: StageBounds,
    pub grid: Vec<IntegratorConfig>,
}

impl<D: Dynamics> Ocp<D> {
    pub fn new(dynamics: D, cost: QuadraticCost, bounds: StageBounds, grid: Vec<IntegratorConfig>) -> Result<Self> {
        let (nx, nu) = (dynamics.nx(), dynamics.nu());
        ProblemDims::new(nx, nu)?;
        cost.validate()?;
        bounds.validate(nx, nu)?;
        if cost.q.nrows() != nx || cost.r.nrows() != nu {
            return Err(Error::InvalidProblem("cost weights do not match model dimensions".into()));
        }
        if grid.len() != cost.horizon() || grid.is_empty() {
            return Err(Error::DimensionMismatch {
                what: "shooting grid length",
                expected: cost.horizon(),
                got: grid.len(),
            });
        }
        Ok(Self {
            dynamics,
            cost,
            bounds,
            grid,
        })
    }

    pub fn horizon(&self) -> usize {
        self.grid.len()
    }

    pub fn dims(&self) -> ProblemDims {
        let rows = self
            .bounds
            .bounded_states()
            .map(|i| usize::from(self.bounds.x_lo[i].is_finite()) + usize::from(self.bounds.x_hi[i].is_finite()))
            .sum();
        ProblemDims {
            nx: self.dynamics.nx(),
            nu: self.dynamics.nu(),
            nc: rows,
            nc_terminal: rows,
        }
    }

    fn check_blocks(&self, bs: &BlockStructure) -> Result<()> {
        if bs.horizon() != self.horizon() {
            return Err(Error::DimensionMismatch {
                what: "block structure horizon",
                expected: self.horizon(),
                got: bs.horizon(),
            });
        }
        Ok(())
    }
}

/// Linearization point: `N + 1` node states and `M` blocked inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub xs: Vec<DVector<f64>>,
    pub us: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn check(&self, bs: &BlockStructure, nx: usize, nu: usize) -> Result<()> {
        if self.xs.len() != bs.horizon() + 1 {
            return Err(Error::DimensionMismatch {
                what: "trajectory state count",
                expected: bs.horizon() + 1,
                got: self.xs.len(),
            });
        }
        if self.us.len() != bs.num_blocks() {
            return Err(Error::DimensionMismatch {
                what: "trajectory input count",
                expected: bs.num_blocks(),
                got: self.us.len(),
            });
        }
        if self.xs.iter().any(|x| x.len() != nx) || self.us.iter().any(|u| u.len() != nu) {
            return Err(Error::InvalidProblem("trajectory vector dimension mismatch".into()));
        }
        if self.xs.iter().chain(self.us.iter()).flat_map(|v| v.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("trajectory contains non-finite entries".into()));
        }
        Ok(())
    }
}

/// QP data of one shooting interval `k`:
/// `dx_{k+1} = A dx_k + B du_j + d` and rows `Cx dx_k + Cu du_j + c <= 0`.
#[derive(Debug, Clone)]
pub struct Stage {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: DVector<f64>,
    pub hxx: DMatrix<f64>,
    pub hxu: DMatrix<f64>,
    pub huu: DMatrix<f64>,
    pub q: DVector<f64>,
    pub r: DVector<f64>,
    pub cx: DMatrix<f64>,
    pub cu: DMatrix<f64>,
    pub c: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct TerminalStage {
    pub hxx: DMatrix<f64>,
    pub q: DVector<f64>,
    pub cx: DMatrix<f64>,
    pub c: DVector<f64>,
}

/// Stage-wise QP in the increments `(dx_0..dx_N, du_0..du_{M-1})`.
#[derive(Debug, Clone)]
pub struct StageData {
    pub nx: usize,
    pub nu: usize,
    pub stages: Vec<Stage>,
    pub terminal: TerminalStage,
    /// Initial-value embedding `x0_hat - x_0`.
    pub dx0: DVector<f64>,
    /// Simple bounds on each blocked input increment.
    pub du_lower: Vec<DVector<f64>>,
    pub du_upper: Vec<DVector<f64>>,
}

impl StageData {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn check(&self, bs: &BlockStructure) -> Result<()> {
        if self.stages.len() != bs.horizon() {
            return Err(Error::DimensionMismatch {
                what: "stage count",
                expected: bs.horizon(),
                got: self.stages.len(),
            });
        }
        if self.du_lower.len() != bs.num_blocks() || self.du_upper.len() != bs.num_blocks() {
            return Err(Error::DimensionMismatch {
                what: "input bound count",
                expected: bs.num_blocks(),
                got: self.du_lower.len(),
            });
        }
        Ok(())
    }

    /// Largest dynamics residual `max_k |d_k|_inf`.
    pub fn max_defect(&self) -> f64 {
        self.stages.iter().map(|s| s.d.amax()).fold(0.0, f64::max)
    }
}

/// State-bound rows at one node: returns `(Cx, c)` for `Cx dx + c <= 0`.
fn state_bound_rows(bounds: &StageBounds, x: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let nx = x.len();
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    for i in bounds.bounded_states() {
        if bounds.x_lo[i].is_finite() {
            rows.push((i, -1.0, bounds.x_lo[i] - x[i]));
        }
        if bounds.x_hi[i].is_finite() {
            rows.push((i, 1.0, x[i] - bounds.x_hi[i]));
        }
    }
    let mut cx = DMatrix::zeros(rows.len(), nx);
    let mut c = DVector::zeros(rows.len());
    for (r, &(i, sign, value)) in rows.iter().enumerate() {
        cx[(r, i)] = sign;
        c[r] = value;
    }
    (cx, c)
}

fn build_stage<D: Dynamics>(ocp: &Ocp<D>, k: usize, x: &DVector<f64>, u: &DVector<f64>, prop: Propagation, x_next: &DVector<f64>) -> Stage {
    let cost = stage_cost_terms(x, u, &ocp.cost, k);
    // The initial state is fixed by the embedding, so node 0 carries no state rows.
    let (cx, c) = if k == 0 {
        (DMatrix::zeros(0, x.len()), DVector::zeros(0))
    } else {
        state_bound_rows(&ocp.bounds, x)
    };
    let cu = DMatrix::zeros(cx.nrows(), u.len());
    Stage {
        d: &prop.x - x_next,
        a: prop.a,
        b: prop.b,
        hxx: cost.hxx,
        hxu: cost.hxu,
        huu: cost.huu,
        q: cost.q,
        r: cost.r,
        cx,
        cu,
        c,
    }
}

fn finish<D: Dynamics>(ocp: &Ocp<D>, bs: &BlockStructure, traj: &Trajectory, stages: Vec<Stage>, x0_hat: &DVector<f64>) -> StageData {
    let n = bs.horizon();
    let x_n = &traj.xs[n];
    let (q, hxx) = terminal_cost_terms(x_n, &ocp.cost);
    let (cx, c) = state_bound_rows(&ocp.bounds, x_n);
    let du_lower = traj.us.iter().map(|u| &ocp.bounds.u_lo - u).collect();
    let du_upper = traj.us.iter().map(|u| &ocp.bounds.u_hi - u).collect();
    StageData {
        nx: ocp.dynamics.nx(),
        nu: ocp.dynamics.nu(),
        stages,
        terminal: TerminalStage { hxx, q, cx, c },
        dx0: x0_hat - &traj.xs[0],
        du_lower,
        du_upper,
    }
}

/// Linearizes the blocked multiple-shooting NLP at `traj`. Interval `k` is
/// integrated with the input of its block.
pub fn evaluate<D: Dynamics>(ocp: &Ocp<D>, bs: &BlockStructure, traj: &Trajectory, x0_hat: &DVector<f64>) -> Result<StageData> {
    ocp.check_blocks(bs)?;
    let (nx, nu) = (ocp.dynamics.nx(), ocp.dynamics.nu());
    traj.check(bs, nx, nu)?;
    if x0_hat.len() != nx {
        return Err(Error::DimensionMismatch {
            what: "measured state",
            expected: nx,
            got: x0_hat.len(),
        });
    }
    let blocks = bs.interval_blocks();
    let stages = (0..bs.horizon())
        .map(|k| {
            let x = &traj.xs[k];
            let u = &traj.us[blocks[k]];
            let prop = integrate_interval(&ocp.grid[k], &ocp.dynamics, x, u).map_err(|e| e.at_node(k))?;
            Ok(build_stage(ocp, k, x, u, prop, &traj.xs[k + 1]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(ocp, bs, traj, stages, x0_hat))
}

/// Forward simulation from `x0_hat` under the blocked inputs `us`.
pub fn forward_simulate<D: Dynamics>(ocp: &Ocp<D>, bs: &BlockStructure, x0_hat: &DVector<f64>, us: &[DVector<f64>]) -> Result<Trajectory> {
    Ok(evaluate_from_measurement(ocp, bs, x0_hat, us)?.0)
}

/// Re-simulates the node states from `x0_hat` and linearizes in the same pass.
/// The returned stage data has zero defects and a zero initial embedding.
pub fn evaluate_from_measurement<D: Dynamics>(
    ocp: &Ocp<D>,
    bs: &BlockStructure,
    x0_hat: &DVector<f64>,
    us: &[DVector<f64>],
) -> Result<(Trajectory, StageData)> {
    ocp.check_blocks(bs)?;
    if us.len() != bs.num_blocks() {
        return Err(Error::DimensionMismatch {
            what: "blocked input count",
            expected: bs.num_blocks(),
            got: us.len(),
        });
    }
    let n = bs.horizon();
    let blocks = bs.interval_blocks();
    let mut xs = Vec::with_capacity(n + 1);
    xs.push(x0_hat.clone());
    let mut stages = Vec::with_capacity(n);
    for k in 0..n {
        let u = &us[blocks[k]];
        let prop = integrate_interval(&ocp.grid[k], &ocp.dynamics, &xs[k], u).map_err(|e| e.at_node(k))?;
        let x_next = prop.x.clone();
        stages.push(build_stage(ocp, k, &xs[k], u, prop, &x_next));
        xs.push(x_next);
    }
    let traj = Trajectory { xs, us: us.to_vec() };
    traj.check(bs, ocp.dynamics.nx(), ocp.dynamics.nu())?;
    let sd = finish(ocp, bs, &traj, stages, x0_hat);
    Ok((traj, sd))
}
