//! Continuous-time problem ingredients: dynamics, least-squares cost and box bounds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Problem dimensions. `nc` and `nc_terminal` count affine path-constraint rows
/// per stage and at the terminal node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemDims {
    pub nx: usize,
    pub nu: usize,
    pub nc: usize,
    pub nc_terminal: usize,
}

impl ProblemDims {
    pub fn new(nx: usize, nu: usize) -> Result<Self> {
        if nx == 0 || nu == 0 {
            return Err(Error::InvalidProblem(format!(
                "state and input dimensions must be positive (nx={nx}, nu={nu})"
            )));
        }
        Ok(Self {
            nx,
            nu,
            nc: 0,
            nc_terminal: 0,
        })
    }
}

/// Explicit ODE right-hand side `xdot = f(x, u)` with analytic Jacobians.
pub trait Dynamics: Send + Sync {
    fn nx(&self) -> usize;
    fn nu(&self) -> usize;
    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    /// Returns `(df/dx, df/du)`.
    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    /// Pendulum mass (kg).
    pub m1: f64,
    /// Cart mass (kg).
    pub m2: f64,
    /// Pole length (m).
    pub l: f64,
    /// Gravity (m/s^2).
    pub g: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            m1: 0.1,
            m2: 1.0,
            l: 0.8,
            g: 9.81,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.m1, self.m2, self.l, self.g].iter().all(|v| v.is_finite() && *v > 0.0);
        if all_positive {
            Ok(())
        } else {
            Err(Error::InvalidProblem(format!(
                "pendulum parameters must be strictly positive: {self:?}"
            )))
        }
    }
}

/// Cart-pole with state `[p, theta, pdot, thetadot]` and a horizontal force input.
/// `theta = 0` is upright, `theta = pi` hangs down.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pendulum {
    pub params: PendulumParams,
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

pub fn pendulum_rhs(x: &[f64; 4], u: f64, params: &PendulumParams) -> [f64; 4] {
    let PendulumParams { m1, m2, l, g } = *params;
    let (s, c) = x[1].sin_cos();
    let w2 = x[3] * x[3];
    let den = m2 + m1 - m1 * c * c;
    let pdd = (-m1 * l * s * w2 + m1 * g * c * s + u) / den;
    let tdd = (u * c - m1 * l * c * s * w2 + (m2 + m1) * g * s) / (l * den);
    [x[2], x[3], pdd, tdd]
}

/// Analytic `(df/dx, df/du)` of [`pendulum_rhs`], row-major 4x4 and 4x1.
pub fn pendulum_jacobians(x: &[f64; 4], u: f64, params: &PendulumParams) -> ([[f64; 4]; 4], [f64; 4]) {
    let PendulumParams { m1, m2, l, g } = *params;
    let (s, c) = x[1].sin_cos();
    let w = x[3];
    let w2 = w * w;
    let den = m2 + m1 - m1 * c * c;
    let dden = 2.0 * m1 * s * c;

    let np = -m1 * l * s * w2 + m1 * g * c * s + u;
    let np_t = -m1 * l * c * w2 + m1 * g * (c * c - s * s);
    let np_w = -2.0 * m1 * l * s * w;

    let nt = u * c - m1 * l * c * s * w2 + (m2 + m1) * g * s;
    let nt_t = -u * s - m1 * l * (c * c - s * s) * w2 + (m2 + m1) * g * c;
    let nt_w = -2.0 * m1 * l * c * s * w;

    let den2 = den * den;
    let mut a = [[0.0; 4]; 4];
    a[0][2] = 1.0;
    a[1][3] = 1.0;
    a[2][1] = (np_t * den - np * dden) / den2;
    a[2][3] = np_w / den;
    a[3][1] = (nt_t * den - nt * dden) / (l * den2);
    a[3][3] = nt_w / (l * den);

    let b = [0.0, 0.0, 1.0 / den, c / (l * den)];
    (a, b)
}

impl Dynamics for Pendulum {
    fn nx(&self) -> usize {
        4
    }

    fn nu(&self) -> usize {
        1
    }

    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let xs = [x[0], x[1], x[2], x[3]];
        DVector::from_column_slice(&pendulum_rhs(&xs, u[0], &self.params))
    }

    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let xs = [x[0], x[1], x[2], x[3]];
        let (a, b) = pendulum_jacobians(&xs, u[0], &self.params);
        (DMatrix::from_fn(4, 4, |i, j| a[i][j]), DMatrix::from_column_slice(4, 1, &b))
    }
}

/// Linear time-invariant dynamics `xdot = A x + B u`.
#[derive(Debug, Clone)]
pub struct LinearDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearDynamics {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.nrows() || b.ncols() == 0 {
            return Err(Error::InvalidProblem(format!(
                "linear dynamics need square A and matching B (A: {}x{}, B: {}x{})",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b })
    }
}

impl Dynamics for LinearDynamics {
    fn nx(&self) -> usize {
        self.a.nrows()
    }

    fn nu(&self) -> usize {
        self.b.ncols()
    }

    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    fn jacobians(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.a.clone(), self.b.clone())
    }
}

/// Least-squares tracking cost
/// `sum_k w_k/2 (|x_k - xr_k|_Q^2 + |u_k - ur_k|_R^2) + 1/2 |x_N - xr_N|_QN^2`,
/// where `w_k` is a per-stage weight scale (1 unless the grid is nonuniform).
#[derive(Debug, Clone)]
pub struct QuadraticCost {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q_terminal: DMatrix<f64>,
    /// N+1 state references.
    pub x_ref: Vec<DVector<f64>>,
    /// N input references, one per shooting interval.
    pub u_ref: Vec<DVector<f64>>,
    /// N stage weight scales.
    pub stage_scale: Vec<f64>,
}

impl QuadraticCost {
    /// Cost with constant references over `n` intervals and unit stage scales.
    pub fn constant_reference(
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        q_terminal: DMatrix<f64>,
        n: usize,
        x_ref: DVector<f64>,
        u_ref: DVector<f64>,
    ) -> Result<Self> {
        let cost = Self {
            q,
            r,
            q_terminal,
            x_ref: vec![x_ref; n + 1],
            u_ref: vec![u_ref; n],
            stage_scale: vec![1.0; n],
        };
        cost.validate()?;
        Ok(cost)
    }

    pub fn horizon(&self) -> usize {
        self.u_ref.len()
    }

    pub fn with_stage_scale(mut self, scale: Vec<f64>) -> Result<Self> {
        self.stage_scale = scale;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let nx = self.q.nrows();
        let nu = self.r.nrows();
        let n = self.u_ref.len();
        check_sym_psd(&self.q, nx, "Q", false)?;
        check_sym_psd(&self.q_terminal, nx, "QN", false)?;
        check_sym_psd(&self.r, nu, "R", true)?;
        if self.x_ref.len() != n + 1 {
            return Err(Error::DimensionMismatch {
                what: "state reference count",
                expected: n + 1,
                got: self.x_ref.len(),
            });
        }
        if self.stage_scale.len() != n {
            return Err(Error::DimensionMismatch {
                what: "stage scale count",
                expected: n,
                got: self.stage_scale.len(),
            });
        }
        if self.stage_scale.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidProblem("stage scales must be positive".into()));
        }
        if self.x_ref.iter().any(|v| v.len() != nx) || self.u_ref.iter().any(|v| v.len() != nu) {
            return Err(Error::InvalidProblem("reference vector dimension mismatch".into()));
        }
        Ok(())
    }
}

fn check_sym_psd(m: &DMatrix<f64>, n: usize, name: &str, strict: bool) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidProblem(format!("{name} must be {n}x{n}")));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidProblem(format!("{name} must be symmetric")));
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    let ok = if strict { min_eig > 0.0 } else { min_eig >= -1e-12 * scale };
    if ok {
        Ok(())
    } else {
        let kind = if strict { "positive definite" } else { "positive semidefinite" };
        Err(Error::InvalidProblem(format!("{name} must be {kind}")))
    }
}

/// Gauss-Newton stage terms. `hxu` is the state-input coupling block `S_k` (nx x nu).
#[derive(Debug, Clone)]
pub struct StageCostTerms {
    pub q: DVector<f64>,
    pub r: DVector<f64>,
    pub hxx: DMatrix<f64>,
    pub hxu: DMatrix<f64>,
    pub huu: DMatrix<f64>,
}

pub fn stage_cost_terms(x: &DVector<f64>, u: &DVector<f64>, cost: &QuadraticCost, k: usize) -> StageCostTerms {
    let w = cost.stage_scale[k];
    let hxx = &cost.q * w;
    let huu = &cost.r * w;
    StageCostTerms {
        q: &hxx * (x - &cost.x_ref[k]),
        r: &huu * (u - &cost.u_ref[k]),
        hxu: DMatrix::zeros(cost.q.nrows(), cost.r.nrows()),
        hxx,
        huu,
    }
}

/// `(gradient, Hessian)` of the terminal term.
pub fn terminal_cost_terms(x: &DVector<f64>, cost: &QuadraticCost) -> (DVector<f64>, DMatrix<f64>) {
    let n = cost.horizon();
    (&cost.q_terminal * (x - &cost.x_ref[n]), cost.q_terminal.clone())
}

/// Box bounds on states and inputs; infinite entries mean unconstrained.
#[derive(Debug, Clone)]
pub struct StageBounds {
    pub x_lo: DVector<f64>,
    pub x_hi: DVector<f64>,
    pub u_lo: DVector<f64>,
    pub u_hi: DVector<f64>,
}

impl StageBounds {
    pub fn unbounded(nx: usize, nu: usize) -> Self {
        Self {
            x_lo: DVector::from_element(nx, f64::NEG_INFINITY),
            x_hi: DVector::from_element(nx, f64::INFINITY),
            u_lo: DVector::from_element(nu, f64::NEG_INFINITY),
            u_hi: DVector::from_element(nu, f64::INFINITY),
        }
    }

    pub fn validate(&self, nx: usize, nu: usize) -> Result<()> {
        if self.x_lo.len() != nx || self.x_hi.len() != nx || self.u_lo.len() != nu || self.u_hi.len() != nu {
            return Err(Error::InvalidProblem("bound vector dimension mismatch".into()));
        }
        let ordered =
            self.x_lo.iter().zip(self.x_hi.iter()).all(|(l, h)| l <= h) && self.u_lo.iter().zip(self.u_hi.iter()).all(|(l, h)| l <= h);
        if !ordered {
            return Err(Error::InvalidProblem("lower bounds must not exceed upper bounds".into()));
        }
        Ok(())
    }

    /// Indices of state components with at least one finite bound.
    pub fn bounded_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.x_lo.len()).filter(|&i| self.x_lo[i].is_finite() || self.x_hi[i].is_finite())
    }
}
