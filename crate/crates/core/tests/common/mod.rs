//! Independent oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use moveblock::integrator::IntegratorConfig;
use moveblock::model::{LinearDynamics, QuadraticCost, StageBounds};
use moveblock::qp::DenseQp;
use moveblock::rti::{RtiController, RtiOptions};
use moveblock::shooting::{forward_simulate, Ocp};
use moveblock::BlockStructure;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One inequality `a'z <= b` of the stacked constraint list.
struct Ineq {
    a: DVector<f64>,
    b: f64,
}

fn stacked_inequalities(qp: &DenseQp) -> Vec<Ineq> {
    let n = qp.g.len();
    let mut out = Vec::new();
    for i in 0..n {
        if qp.lb[i].is_finite() {
            let mut a = DVector::zeros(n);
            a[i] = -1.0;
            out.push(Ineq { a, b: -qp.lb[i] });
        }
    }
    for i in 0..n {
        if qp.ub[i].is_finite() {
            let mut a = DVector::zeros(n);
            a[i] = 1.0;
            out.push(Ineq { a, b: qp.ub[i] });
        }
    }
    for r in 0..qp.c_rows.nrows() {
        out.push(Ineq {
            a: qp.c_rows.row(r).transpose(),
            b: -qp.cvec[r],
        });
    }
    out
}

fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < m - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Brute-force solution of a strictly convex QP: enumerates active sets by
/// increasing size, solves each equality-constrained subproblem through an LU
/// factorization of its KKT matrix and returns the first point that is primal
/// feasible with nonnegative multipliers. `None` if no KKT point exists.
pub fn brute_force_qp(qp: &DenseQp, tol: f64) -> Option<DVector<f64>> {
    let n = qp.g.len();
    let ineqs = stacked_inequalities(qp);
    let m = ineqs.len();
    for k in 0..=m.min(n) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let dim = n + k;
            let mut kkt = DMatrix::zeros(dim, dim);
            let mut rhs = DVector::zeros(dim);
            kkt.view_mut((0, 0), (n, n)).copy_from(&qp.h);
            rhs.rows_mut(0, n).copy_from(&(-&qp.g));
            for (p, &c) in idx.iter().enumerate() {
                kkt.view_mut((0, n + p), (n, 1)).copy_from(&ineqs[c].a);
                kkt.view_mut((n + p, 0), (1, n)).copy_from(&ineqs[c].a.transpose());
                rhs[n + p] = ineqs[c].b;
            }
            let lu = kkt.clone().lu();
            if let Some(sol) = lu.solve(&rhs) {
                let resid = (&kkt * &sol - &rhs).amax();
                let z = sol.rows(0, n).into_owned();
                let mu = sol.rows(n, k);
                let feasible = ineqs.iter().all(|c| c.a.dot(&z) - c.b <= tol * (1.0 + c.b.abs()));
                if resid <= 1e-9 * (1.0 + rhs.amax()) && feasible && mu.iter().all(|&v| v >= -tol) {
                    return Some(z);
                }
            }
            if k == 0 || !next_combination(&mut idx, m) {
                break;
            }
        }
    }
    None
}

/// Random strictly convex QP with a known feasible point, a mix of finite and
/// infinite bounds, and general rows.
pub fn random_feasible_qp<R: Rng>(rng: &mut R, n: usize, rows: usize) -> DenseQp {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
    let g = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
    let z0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let c_rows = DMatrix::from_fn(rows, n, |_, _| rng.gen_range(-1.0..1.0));
    let slack = DVector::from_fn(rows, |_, _| rng.gen_range(0.0..0.5));
    let cvec = -(&c_rows * &z0) - slack;
    let lb = DVector::from_fn(n, |i, _| {
        if rng.gen_bool(0.7) {
            z0[i] - rng.gen_range(0.0..1.0)
        } else {
            f64::NEG_INFINITY
        }
    });
    let ub = DVector::from_fn(n, |i, _| {
        if rng.gen_bool(0.7) {
            z0[i] + rng.gen_range(0.0..1.0)
        } else {
            f64::INFINITY
        }
    });
    DenseQp::new(h, g, c_rows, cvec, lb, ub).expect("generated QP is well formed")
}

/// Discrete transition of `n_sub` RK4 steps of size `h` on `xdot = A x + B u`,
/// from the closed-form RK4 polynomial.
pub fn rk4_discretize(sys: &LinearDynamics, h: f64, n_sub: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let nx = sys.a.nrows();
    let eye = DMatrix::<f64>::identity(nx, nx);
    let ha = &sys.a * h;
    let ha2 = &ha * &ha;
    let ha3 = &ha2 * &ha;
    let ha4 = &ha3 * &ha;
    let ad1 = &eye + &ha + &ha2 / 2.0 + &ha3 / 6.0 + &ha4 / 24.0;
    let bd1 = (&eye + &ha / 2.0 + &ha2 / 6.0 + &ha3 / 24.0) * &sys.b * h;
    let mut ad = eye.clone();
    let mut bd = DMatrix::zeros(nx, sys.b.ncols());
    for _ in 0..n_sub {
        bd = &ad1 * bd + &bd1;
        ad = &ad1 * ad;
    }
    (ad, bd)
}

/// Finite-horizon LQR gains `u_k = -K_k x_k` for
/// `sum_k 1/2 (x'Qx + u'Ru) + 1/2 x_N' QN x_N`.
pub fn riccati_gains(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    qn: &DMatrix<f64>,
    n: usize,
) -> Vec<DMatrix<f64>> {
    let mut p = qn.clone();
    let mut gains = vec![DMatrix::zeros(b.ncols(), a.nrows()); n];
    for k in (0..n).rev() {
        let btp = b.transpose() * &p;
        let s = r + &btp * b;
        let kk = s.lu().solve(&(&btp * a)).expect("R + B'PB is nonsingular");
        p = q + a.transpose() * &p * a - a.transpose() * &p * b * &kk;
        p = (&p + p.transpose()) * 0.5;
        gains[k] = kk;
    }
    gains
}

/// Optimal open-loop input sequence from `x0` under the Riccati gains.
pub fn riccati_inputs(a: &DMatrix<f64>, b: &DMatrix<f64>, gains: &[DMatrix<f64>], x0: &DVector<f64>) -> Vec<DVector<f64>> {
    let mut x = x0.clone();
    gains
        .iter()
        .map(|k| {
            let u = -(k * &x);
            x = a * &x + b * &u;
            u
        })
        .collect()
}

pub struct LqrCase {
    pub ctl: RtiController<LinearDynamics>,
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub qn: DMatrix<f64>,
    pub x0_hat: DVector<f64>,
}

/// Random LTI system, weights and zero-defect linearization point with unit blocks.
pub fn random_lqr_case(seed: u64, nx: usize, nu: usize, n: usize, n_sub: usize) -> LqrCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(nx, nx, |_, _| rng.gen_range(-1.0..1.0));
    let b = DMatrix::from_fn(nx, nu, |_, _| rng.gen_range(-1.0..1.0));
    let sys = LinearDynamics::new(a, b).unwrap();
    let h = 0.05;
    let (ad, bd) = rk4_discretize(&sys, h, n_sub);

    let spd = |rng: &mut ChaCha8Rng, k: usize, shift: f64| {
        let m = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(k, k) * shift
    };
    let q = spd(&mut rng, nx, 0.1);
    let r = spd(&mut rng, nu, 0.5);
    let qn = spd(&mut rng, nx, 0.1);
    let cost = QuadraticCost::constant_reference(q.clone(), r.clone(), qn.clone(), n, DVector::zeros(nx), DVector::zeros(nu)).unwrap();
    let grid = vec![IntegratorConfig::new(h, n_sub).unwrap(); n];
    let ocp = Ocp::new(sys, cost, StageBounds::unbounded(nx, nu), grid).unwrap();
    let bs = BlockStructure::unit(n).unwrap();

    // Feasible (zero-defect) but otherwise arbitrary linearization point.
    let start = DVector::from_fn(nx, |_, _| rng.gen_range(-1.0..1.0));
    let us: Vec<_> = (0..n).map(|_| DVector::from_fn(nu, |_, _| rng.gen_range(-1.0..1.0))).collect();
    let traj = forward_simulate(&ocp, &bs, &start, &us).unwrap();
    let x0_hat = DVector::from_fn(nx, |_, _| rng.gen_range(-2.0..2.0));
    let ctl = RtiController::new(ocp, bs, RtiOptions::default(), traj).unwrap();
    LqrCase {
        ctl,
        ad,
        bd,
        q,
        r,
        qn,
        x0_hat,
    }
}

/// Relative distance between the input plan after one RTI step and the
/// Riccati-optimal open-loop inputs from the measured state.
pub fn rti_vs_riccati(mut case: LqrCase, n: usize) -> f64 {
    let (report, _) = case.ctl.step(&case.x0_hat).unwrap();
    let gains = riccati_gains(&case.ad, &case.bd, &case.q, &case.r, &case.qn, n);
    let u_opt = riccati_inputs(&case.ad, &case.bd, &gains, &case.x0_hat);
    let scale = u_opt.iter().map(|u| u.amax()).fold(1.0, f64::max);
    let feedback = -(&gains[0] * &case.x0_hat);
    let mut err = (&report.u_applied - feedback).amax();
    // The step lands on the whole optimal sequence, not just the first input.
    // `advance` is a no-op under the default policy, so `traj.us` is the post-step plan.
    for (u, r) in case.ctl.state.traj.us.iter().zip(&u_opt) {
        err = err.max((u - r).amax());
    }
    err / scale
}

/// Double integrator linearized at rest in the origin and measured away from it.
pub fn double_integrator_case() -> (LqrCase, usize) {
    let sys = LinearDynamics::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
    )
    .unwrap();
    let n = 30;
    let h = 0.1;
    let (ad, bd) = rk4_discretize(&sys, h, 1);
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.1]));
    let r = DMatrix::from_element(1, 1, 0.01);
    let cost = QuadraticCost::constant_reference(q.clone(), r.clone(), q.clone(), n, DVector::zeros(2), DVector::zeros(1)).unwrap();
    let ocp = Ocp::new(
        sys,
        cost,
        StageBounds::unbounded(2, 1),
        vec![IntegratorConfig::new(h, 1).unwrap(); n],
    )
    .unwrap();
    let bs = BlockStructure::unit(n).unwrap();
    let traj = RtiController::constant_input_guess(&ocp, &bs, &DVector::zeros(2), &DVector::zeros(1)).unwrap();
    let case = LqrCase {
        ctl: RtiController::new(ocp, bs, RtiOptions::default(), traj).unwrap(),
        ad,
        bd,
        q: q.clone(),
        r,
        qn: q,
        x0_hat: DVector::from_vec(vec![1.0, -0.5]),
    };
    (case, n)
}
