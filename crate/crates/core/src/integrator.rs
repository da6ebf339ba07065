//! Fixed-step RK4 with exact forward sensitivities of the discrete map.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::Dynamics;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Sub-step length (s).
    pub h: f64,
    /// Sub-steps per shooting interval.
    pub n_sub: usize,
}

impl IntegratorConfig {
    pub fn new(h: f64, n_sub: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) || n_sub == 0 {
            return Err(Error::InvalidProblem(format!(
                "integrator needs h > 0 and n_sub >= 1 (h={h}, n_sub={n_sub})"
            )));
        }
        Ok(Self { h, n_sub })
    }

    pub fn interval_length(&self) -> f64 {
        self.h * self.n_sub as f64
    }
}

/// End state of an integration together with `A = dx_end/dx` and `B = dx_end/du`.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub x: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

/// One classical RK4 step. The returned Jacobians are those of the RK4 map itself,
/// obtained by differentiating through all four stages.
pub fn rk4_step<D: Dynamics + ?Sized>(dynamics: &D, x: &DVector<f64>, u: &DVector<f64>, h: f64) -> Result<Propagation> {
    let half = 0.5 * h;

    let k1 = dynamics.rhs(x, u);
    let (j1x, j1u) = dynamics.jacobians(x, u);
    let dk1x = j1x;
    let dk1u = j1u;

    let x2 = x + &k1 * half;
    let k2 = dynamics.rhs(&x2, u);
    let (j2x, j2u) = dynamics.jacobians(&x2, u);
    // d(x + h/2 k1)/dx = I + h/2 dk1/dx
    let dk2x = &j2x + &j2x * &dk1x * half;
    let dk2u = &j2x * &dk1u * half + &j2u;

    let x3 = x + &k2 * half;
    let k3 = dynamics.rhs(&x3, u);
    let (j3x, j3u) = dynamics.jacobians(&x3, u);
    let dk3x = &j3x + &j3x * &dk2x * half;
    let dk3u = &j3x * &dk2u * half + &j3u;

    let x4 = x + &k3 * h;
    let k4 = dynamics.rhs(&x4, u);
    let (j4x, j4u) = dynamics.jacobians(&x4, u);
    let dk4x = &j4x + &j4x * &dk3x * h;
    let dk4u = &j4x * &dk3u * h + &j4u;

    let sixth = h / 6.0;
    let x_next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * sixth;
    let nx = x.len();
    let a = DMatrix::identity(nx, nx) + (dk1x + dk2x * 2.0 + dk3x * 2.0 + dk4x) * sixth;
    let b = (dk1u + dk2u * 2.0 + dk3u * 2.0 + dk4u) * sixth;

    if x_next.iter().any(|v| !v.is_finite()) || a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::IntegrationDiverged { node: 0 });
    }
    Ok(Propagation { x: x_next, a, b })
}

/// Integrates one shooting interval with the input held constant, chaining the
/// sub-step sensitivities: `A <- A_step A`, `B <- A_step B + B_step`.
pub fn integrate_interval<D: Dynamics + ?Sized>(
    cfg: &IntegratorConfig,
    dynamics: &D,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<Propagation> {
    let mut acc = rk4_step(dynamics, x, u, cfg.h)?;
    for _ in 1..cfg.n_sub {
        let step = rk4_step(dynamics, &acc.x, u, cfg.h)?;
        acc.b = &step.a * &acc.b + step.b;
        acc.a = &step.a * &acc.a;
        acc.x = step.x;
    }
    Ok(acc)
}

/// Integrates without sensitivities (plant simulation).
pub fn simulate_interval<D: Dynamics + ?Sized>(
    cfg: &IntegratorConfig,
    dynamics: &D,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    let h = cfg.h;
    let mut x = x.clone();
    for _ in 0..cfg.n_sub {
        let k1 = dynamics.rhs(&x, u);
        let k2 = dynamics.rhs(&(&x + &k1 * (0.5 * h)), u);
        let k3 = dynamics.rhs(&(&x + &k2 * (0.5 * h)), u);
        let k4 = dynamics.rhs(&(&x + &k3 * h), u);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { node: 0 });
        }
    }
    Ok(x)
}
