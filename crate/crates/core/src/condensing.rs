//! Condensing of the blocked stage-wise QP into a dense QP in the `M * nu`
//! blocked input increments.
//!
//! The tailored route never forms the blocking matrix `T`: the blocked
//! sensitivity chain `Ghat = G T` and the Hessian `Hhat = T' H_c T` are built
//! directly from the stage data in `O(N M)` block operations. The reference
//! route ([`naive_condense`]) condenses the unblocked problem in `O(N^2)` and
//! multiplies by an explicit `T` afterwards.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::blocking::BlockStructure;
use crate::error::{Error, Result};
use crate::model::ProblemDims;
use crate::shooting::StageData;

/// Multiply counter for the Hessian condensing kernels.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FlopCounter {
    pub multiplies: u64,
}

impl FlopCounter {
    #[inline]
    fn gemm(&mut self, m: usize, k: usize, n: usize) {
        self.multiplies += (m * k * n) as u64;
    }
}

/// `rows x cols` grid of equally sized dense blocks, indexed `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    rows: usize,
    cols: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl BlockGrid {
    pub fn zeros(rows: usize, cols: usize, block_rows: usize, block_cols: usize) -> Self {
        Self {
            rows,
            cols,
            blocks: vec![DMatrix::zeros(block_rows, block_cols); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> &DMatrix<f64> {
        &self.blocks[row * self.cols + col]
    }

    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut DMatrix<f64> {
        &mut self.blocks[row * self.cols + col]
    }

    /// Assembles the grid into one dense matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (br, bc) = self.blocks.first().map_or((0, 0), |b| b.shape());
        let mut out = DMatrix::zeros(self.rows * br, self.cols * bc);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.view_mut((r * br, c * bc), (br, bc)).copy_from(self.get(r, c));
            }
        }
        out
    }
}

/// `dx_{k+1} = sum_j Ghat[k, j] du_j + L_k` for `k = 0..N-1`.
#[derive(Debug, Clone)]
pub struct SensitivityChain {
    pub ghat: BlockGrid,
    pub l: Vec<DVector<f64>>,
}

/// Where a condensed inequality row came from: `node` is the shooting node
/// (`N` for the terminal node) and `row` the row index within that node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowOrigin {
    pub node: usize,
    pub row: usize,
}

/// Dense QP `min 1/2 z'Hz + g'z  s.t.  C z + c <= 0,  lb <= z <= ub`.
#[derive(Debug, Clone)]
pub struct CondensedQp {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub c: DMatrix<f64>,
    pub cvec: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
    pub row_origin: Vec<RowOrigin>,
}

/// Blocked sensitivity chain `Ghat = G T`, one column block at a time:
/// `Ghat[I_i, i] = B_{I_i}`, then `Ghat[k, i] = A_k Ghat[k-1, i] (+ B_k while k is in block i)`.
/// Blocks above `I_i` stay zero.
pub fn blocked_sensitivities(sd: &StageData, bs: &BlockStructure) -> BlockGrid {
    let n = bs.horizon();
    let m = bs.num_blocks();
    let mut ghat = BlockGrid::zeros(n, m, sd.nx, sd.nu);
    for i in 0..m {
        let (start, end) = (bs.start(i), bs.end(i));
        ghat.get_mut(start, i).copy_from(&sd.stages[start].b);
        for k in start + 1..n {
            let (before, after) = ghat.blocks.split_at_mut(k * m + i);
            let prev = &before[(k - 1) * m + i];
            let cur = &mut after[0];
            let stage = &sd.stages[k];
            if k < end {
                cur.copy_from(&stage.b);
                cur.gemm(1.0, &stage.a, prev, 1.0);
            } else {
                cur.gemm(1.0, &stage.a, prev, 0.0);
            }
        }
    }
    ghat
}

/// Free response of the state increments: `L_0 = A_0 dx0 + d_0`,
/// `L_k = A_k L_{k-1} + d_k`.
pub fn residual_chain(sd: &StageData, dx0: &DVector<f64>) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(sd.horizon());
    for (k, stage) in sd.stages.iter().enumerate() {
        let prev = if k == 0 { dx0 } else { &out[k - 1] };
        let mut next = stage.d.clone();
        next.gemv(1.0, &stage.a, prev, 1.0);
        out.push(next);
    }
    out
}

/// `Hhat = T' H_c T` without forming `T` or `H_c`.
///
/// For every column block `i` a backward sweep carries
/// `W_k = Q_k Ghat[k-1, i] + A_k' W_{k+1}` (plus `S_k` while `k` lies inside block `i`)
/// and stores the per-interval rows `S_k' Ghat[k-1, i] + B_k' W_{k+1}` in `H_tmp`.
/// The rows of each block are then summed together with the block's summed `R_k`.
/// Only row blocks at or below the diagonal are produced; the upper triangle is
/// filled by symmetry.
pub fn condensed_hessian(sd: &StageData, bs: &BlockStructure, ghat: &BlockGrid, flops: &mut FlopCounter) -> DMatrix<f64> {
    let n = bs.horizon();
    let m = bs.num_blocks();
    let (nx, nu) = (sd.nx, sd.nu);

    let mut h_tmp = BlockGrid::zeros(n, m, nu, nu);
    let mut w_next = DMatrix::zeros(nx, nu);
    let mut w = DMatrix::zeros(nx, nu);

    for i in 0..m {
        let (start, end) = (bs.start(i), bs.end(i));
        w_next.gemm(1.0, &sd.terminal.hxx, ghat.get(n - 1, i), 0.0);
        flops.gemm(nx, nx, nu);
        for k in (start + 1..n).rev() {
            let stage = &sd.stages[k];
            let g_prev = ghat.get(k - 1, i);

            let row = h_tmp.get_mut(k, i);
            row.gemm_tr(1.0, &stage.hxu, g_prev, 0.0);
            row.gemm_tr(1.0, &stage.b, &w_next, 1.0);
            flops.gemm(nu, nx, nu);
            flops.gemm(nu, nx, nu);

            if k < end {
                w.copy_from(&stage.hxu);
                w.gemm(1.0, &stage.hxx, g_prev, 1.0);
            } else {
                w.gemm(1.0, &stage.hxx, g_prev, 0.0);
            }
            w.gemm_tr(1.0, &stage.a, &w_next, 1.0);
            flops.gemm(nx, nx, nu);
            flops.gemm(nx, nx, nu);
            std::mem::swap(&mut w, &mut w_next);
        }
        h_tmp.get_mut(start, i).gemm_tr(1.0, &sd.stages[start].b, &w_next, 0.0);
        flops.gemm(nu, nx, nu);
    }

    let mut hhat = DMatrix::zeros(m * nu, m * nu);
    let mut r_tmp = DMatrix::zeros(nu, nu);
    let mut block = 0;
    for k in 0..n {
        for i in 0..=block {
            let mut dst = hhat.view_mut((block * nu, i * nu), (nu, nu));
            dst += h_tmp.get(k, i);
        }
        r_tmp += &sd.stages[k].huu;
        if k + 1 == bs.end(block) {
            let mut diag = hhat.view_mut((block * nu, block * nu), (nu, nu));
            diag += &r_tmp;
            r_tmp.fill(0.0);
            block += 1;
        }
    }
    fill_upper_from_lower(&mut hhat);
    hhat
}

fn fill_upper_from_lower(h: &mut DMatrix<f64>) {
    let n = h.nrows();
    for c in 1..n {
        for r in 0..c {
            h[(r, c)] = h[(c, r)];
        }
    }
}

/// `ghat = T' g_c` by one backward sweep
/// `w_N = q_N + Q_N L_{N-1}`, `w_k = q_k + Q_k L_{k-1} + A_k' w_{k+1}`;
/// interval `k` adds `r_k + S_k' L_{k-1} + B_k' w_{k+1}` to its block.
pub fn condensed_gradient(sd: &StageData, bs: &BlockStructure, l: &[DVector<f64>], dx0: &DVector<f64>) -> DVector<f64> {
    let n = bs.horizon();
    let nu = sd.nu;
    let blocks = bs.interval_blocks();
    let mut g = DVector::zeros(bs.num_blocks() * nu);

    let mut w_next = sd.terminal.q.clone();
    w_next.gemv(1.0, &sd.terminal.hxx, &l[n - 1], 1.0);
    for k in (0..n).rev() {
        let stage = &sd.stages[k];
        let l_prev = if k == 0 { dx0 } else { &l[k - 1] };
        let mut seg = g.rows_mut(blocks[k] * nu, nu);
        seg += &stage.r;
        seg.gemv_tr(1.0, &stage.hxu, l_prev, 1.0);
        seg.gemv_tr(1.0, &stage.b, &w_next, 1.0);
        if k > 0 {
            let mut w = stage.q.clone();
            w.gemv(1.0, &stage.hxx, l_prev, 1.0);
            w.gemv_tr(1.0, &stage.a, &w_next, 1.0);
            w_next = w;
        }
    }
    g
}

/// Condensed inequality rows and input bounds.
#[derive(Debug, Clone)]
pub struct CondensedConstraints {
    pub c: DMatrix<f64>,
    pub cvec: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
    pub row_origin: Vec<RowOrigin>,
}

fn count_rows(sd: &StageData) -> usize {
    sd.stages.iter().map(|s| s.c.len()).sum::<usize>() + sd.terminal.c.len()
}

fn stacked_bounds(sd: &StageData) -> (DVector<f64>, DVector<f64>) {
    let stack = |v: &[DVector<f64>]| DVector::from_iterator(v.len() * sd.nu, v.iter().flat_map(|b| b.iter().copied()));
    (stack(&sd.du_lower), stack(&sd.du_upper))
}

/// Rows at node `k >= 1` become `Cx_k Ghat[k-1, :]` plus `Cu_k` in the column
/// of the interval's block, with constant `Cx_k L_{k-1} + c_k`.
pub fn condense_constraints(
    sd: &StageData,
    bs: &BlockStructure,
    ghat: &BlockGrid,
    l: &[DVector<f64>],
    dx0: &DVector<f64>,
) -> CondensedConstraints {
    let n = bs.horizon();
    let m = bs.num_blocks();
    let nu = sd.nu;
    let blocks = bs.interval_blocks();
    let total = count_rows(sd);
    let mut c = DMatrix::zeros(total, m * nu);
    let mut cvec = DVector::zeros(total);
    let mut origin = Vec::with_capacity(total);

    let mut r0 = 0;
    for k in 0..=n {
        let (cx, cu, cc) = if k < n {
            let s = &sd.stages[k];
            (&s.cx, Some(&s.cu), &s.c)
        } else {
            (&sd.terminal.cx, None, &sd.terminal.c)
        };
        let rows = cc.len();
        if rows == 0 {
            continue;
        }
        let mut constant = cc.clone();
        if k == 0 {
            constant.gemv(1.0, cx, dx0, 1.0);
        } else {
            constant.gemv(1.0, cx, &l[k - 1], 1.0);
            for j in 0..m {
                if bs.start(j) > k - 1 {
                    break;
                }
                c.view_mut((r0, j * nu), (rows, nu)).gemm(1.0, cx, ghat.get(k - 1, j), 0.0);
            }
        }
        if let Some(cu) = cu {
            let mut dst = c.view_mut((r0, blocks[k] * nu), (rows, nu));
            dst += cu;
        }
        cvec.rows_mut(r0, rows).copy_from(&constant);
        origin.extend((0..rows).map(|row| RowOrigin { node: k, row }));
        r0 += rows;
    }
    let (lb, ub) = stacked_bounds(sd);
    CondensedConstraints {
        c,
        cvec,
        lb,
        ub,
        row_origin: origin,
    }
}

/// Tailored condensing: Ghat, L, Hhat, ghat and the constraint rows.
pub fn condense(sd: &StageData, bs: &BlockStructure, flops: &mut FlopCounter) -> Result<(CondensedQp, SensitivityChain)> {
    sd.check(bs)?;
    let ghat = blocked_sensitivities(sd, bs);
    let l = residual_chain(sd, &sd.dx0);
    let h = condensed_hessian(sd, bs, &ghat, flops);
    let g = condensed_gradient(sd, bs, &l, &sd.dx0);
    let cons = condense_constraints(sd, bs, &ghat, &l, &sd.dx0);
    Ok((
        CondensedQp {
            h,
            g,
            c: cons.c,
            cvec: cons.cvec,
            lb: cons.lb,
            ub: cons.ub,
            row_origin: cons.row_origin,
        },
        SensitivityChain { ghat, l },
    ))
}

/// Recovers the state increments `dx_0 = dx0`, `dx_{k+1} = Ghat[k, :] du + L_k`.
pub fn expand(chain: &SensitivityChain, bs: &BlockStructure, dx0: &DVector<f64>, du: &DVector<f64>) -> Vec<DVector<f64>> {
    let nu = du.len() / bs.num_blocks();
    let mut out = Vec::with_capacity(bs.horizon() + 1);
    out.push(dx0.clone());
    for k in 0..bs.horizon() {
        let mut x = chain.l[k].clone();
        for j in 0..bs.num_blocks() {
            if bs.start(j) > k {
                break;
            }
            x.gemv(1.0, chain.ghat.get(k, j), &du.rows(j * nu, nu), 1.0);
        }
        out.push(x);
    }
    out
}

/// Leading-order multiply count of [`condensed_hessian`]:
/// `N M nx^2 nu + N M nx nu^2`.
pub fn predicted_hessian_flops(dims: &ProblemDims, bs: &BlockStructure) -> u64 {
    let (n, m) = (bs.horizon() as u64, bs.num_blocks() as u64);
    let (nx, nu) = (dims.nx as u64, dims.nu as u64);
    n * m * nx * nx * nu + n * m * nx * nu * nu
}

/// Intermediate products of the reference pipeline, before blocking.
#[derive(Debug, Clone)]
pub struct UnblockedCondensing {
    /// `N nx x N nu` lower block-triangular sensitivity matrix.
    pub g: DMatrix<f64>,
    /// Stacked free response `L_0..L_{N-1}`.
    pub l: DVector<f64>,
    pub h: DMatrix<f64>,
    pub grad: DVector<f64>,
    pub c: DMatrix<f64>,
    pub cvec: DVector<f64>,
}

/// Reference pipeline: standard `O(N^2)` condensing of the stage QP treating
/// every interval input as its own variable, followed by the explicit blocking
/// products `T' H_c T`, `T' g_c` and `C_c T`.
///
/// `flops` receives the multiply count of the `H_c` computation only.
pub fn naive_condense(sd: &StageData, bs: &BlockStructure, flops: &mut FlopCounter) -> Result<(CondensedQp, UnblockedCondensing)> {
    sd.check(bs)?;
    let n = bs.horizon();
    let (nx, nu) = (sd.nx, sd.nu);
    let blocks = bs.interval_blocks();

    // G[k, m] = A_k ... A_{m+1} B_m for m <= k.
    let mut g = DMatrix::zeros(n * nx, n * nu);
    for col in 0..n {
        g.view_mut((col * nx, col * nu), (nx, nu)).copy_from(&sd.stages[col].b);
        for k in col + 1..n {
            let prev = g.view(((k - 1) * nx, col * nu), (nx, nu)).into_owned();
            g.view_mut((k * nx, col * nu), (nx, nu)).copy_from(&(&sd.stages[k].a * prev));
        }
    }

    // L_k = Phi(k, 0) dx0 + sum_{j <= k} Phi(k, j+1) d_j with explicit transition products.
    let mut l = DVector::zeros(n * nx);
    for k in 0..n {
        let mut phi = DMatrix::<f64>::identity(nx, nx);
        let mut acc = sd.stages[k].d.clone();
        for j in (0..k).rev() {
            phi = &phi * &sd.stages[j + 1].a;
            acc += &phi * &sd.stages[j].d;
        }
        phi = &phi * &sd.stages[0].a;
        acc += &phi * &sd.dx0;
        l.rows_mut(k * nx, nx).copy_from(&acc);
    }

    // Column-wise backward recursion over the full G.
    let mut h = DMatrix::zeros(n * nu, n * nu);
    for col in 0..n {
        let gb = |k: usize| g.view((k * nx, col * nu), (nx, nu));
        let mut w_next = &sd.terminal.hxx * gb(n - 1);
        flops.gemm(nx, nx, nu);
        for k in (col + 1..n).rev() {
            let s = &sd.stages[k];
            let entry = s.hxu.transpose() * gb(k - 1) + s.b.transpose() * &w_next;
            flops.gemm(nu, nx, nu);
            flops.gemm(nu, nx, nu);
            h.view_mut((k * nu, col * nu), (nu, nu)).copy_from(&entry);
            w_next = &s.hxx * gb(k - 1) + s.a.transpose() * &w_next;
            flops.gemm(nx, nx, nu);
            flops.gemm(nx, nx, nu);
        }
        let s = &sd.stages[col];
        let diag = s.b.transpose() * &w_next + &s.huu;
        flops.gemm(nu, nx, nu);
        h.view_mut((col * nu, col * nu), (nu, nu)).copy_from(&diag);
    }
    fill_upper_from_lower(&mut h);

    // Gradient: g_c = G' (q + Q L) + S' L_prev + r, assembled with dense products.
    let mut lin = DVector::zeros(n * nx);
    for k in 1..=n {
        let lk = l.rows((k - 1) * nx, nx);
        let (q, hxx) = if k < n {
            (&sd.stages[k].q, &sd.stages[k].hxx)
        } else {
            (&sd.terminal.q, &sd.terminal.hxx)
        };
        lin.rows_mut((k - 1) * nx, nx).copy_from(&(q + hxx * lk));
    }
    let mut grad = g.transpose() * lin;
    for k in 0..n {
        let s = &sd.stages[k];
        let l_prev = if k == 0 {
            sd.dx0.clone()
        } else {
            l.rows((k - 1) * nx, nx).into_owned()
        };
        let mut seg = grad.rows_mut(k * nu, nu);
        seg += &s.r + s.hxu.transpose() * l_prev;
    }

    // Constraint rows over the unblocked inputs.
    let total = count_rows(sd);
    let mut c = DMatrix::zeros(total, n * nu);
    let mut cvec = DVector::zeros(total);
    let mut origin = Vec::with_capacity(total);
    let mut r0 = 0;
    for k in 0..=n {
        let (cx, cu, cc) = if k < n {
            let s = &sd.stages[k];
            (&s.cx, Some(&s.cu), &s.c)
        } else {
            (&sd.terminal.cx, None, &sd.terminal.c)
        };
        let rows = cc.len();
        if rows == 0 {
            continue;
        }
        let (x_lin, x_const) = if k == 0 {
            (DMatrix::zeros(nx, n * nu), sd.dx0.clone())
        } else {
            (g.rows((k - 1) * nx, nx).into_owned(), l.rows((k - 1) * nx, nx).into_owned())
        };
        let mut block_rows = cx * x_lin;
        if let Some(cu) = cu {
            let mut dst = block_rows.view_mut((0, k * nu), (rows, nu));
            dst += cu;
        }
        c.rows_mut(r0, rows).copy_from(&block_rows);
        cvec.rows_mut(r0, rows).copy_from(&(cc + cx * x_const));
        origin.extend((0..rows).map(|row| RowOrigin { node: k, row }));
        r0 += rows;
    }
    debug_assert_eq!(blocks.len(), n);

    let t = bs.build_t(nu);
    let tt = t.transpose();
    let (lb, ub) = stacked_bounds(sd);
    let qp = CondensedQp {
        h: &tt * &h * &t,
        g: &tt * &grad,
        c: &c * &t,
        cvec: cvec.clone(),
        lb,
        ub,
        row_origin: origin,
    };
    Ok((qp, UnblockedCondensing { g, l, h, grad, c, cvec }))
}

/// Writes a matrix as text: a `rows cols` header line followed by one
/// whitespace-separated line per row.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.17e}", m[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::InvalidProblem(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(format!("bad header '{header}'"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(bad(format!("bad header '{header}'")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (r, line) in lines.take(rows).enumerate() {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad value '{t}' in row {r}"))))
            .collect::<Result<_>>()?;
        if vals.len() != cols {
            return Err(bad(format!("row {r} has {} values, expected {cols}", vals.len())));
        }
        data.extend(vals);
    }
    if data.len() != rows * cols {
        return Err(bad("truncated matrix".into()));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Dumps the condensed QP as `H.txt`, `g.txt`, `C.txt`, `c.txt`, `lb.txt`, `ub.txt`.
pub fn dump_qp(qp: &CondensedQp, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    write_matrix(&dir.join("H.txt"), &qp.h)?;
    write_matrix(&dir.join("g.txt"), &col(&qp.g))?;
    write_matrix(&dir.join("C.txt"), &qp.c)?;
    write_matrix(&dir.join("c.txt"), &col(&qp.cvec))?;
    write_matrix(&dir.join("lb.txt"), &col(&qp.lb))?;
    write_matrix(&dir.join("ub.txt"), &col(&qp.ub))
}

pub mod synthetic {
    //! Random stage data for tests and condensing benchmarks.

    use super::*;
    use crate::shooting::{Stage, TerminalStage};
    use rand::Rng;

    fn mat<R: Rng>(rng: &mut R, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-scale..scale))
    }

    fn spd<R: Rng>(rng: &mut R, n: usize, shift: f64) -> DMatrix<f64> {
        let a = mat(rng, n, n, 1.0);
        &a * a.transpose() + DMatrix::identity(n, n) * shift
    }

    /// Random stage data with general (nonzero) coupling blocks and constraint rows.
    pub fn random_stage_data<R: Rng>(rng: &mut R, bs: &BlockStructure, nx: usize, nu: usize, with_coupling: bool) -> StageData {
        let n = bs.horizon();
        let stages = (0..n)
            .map(|k| {
                let rows = if k == 0 { rng.gen_range(0..2) } else { rng.gen_range(0..3) };
                let hxu = if with_coupling {
                    mat(rng, nx, nu, 0.3)
                } else {
                    DMatrix::zeros(nx, nu)
                };
                Stage {
                    a: DMatrix::identity(nx, nx) + mat(rng, nx, nx, 0.4),
                    b: mat(rng, nx, nu, 1.0),
                    d: DVector::from_fn(nx, |_, _| rng.gen_range(-0.5..0.5)),
                    hxx: spd(rng, nx, 0.1),
                    hxu,
                    huu: spd(rng, nu, 1.0),
                    q: DVector::from_fn(nx, |_, _| rng.gen_range(-1.0..1.0)),
                    r: DVector::from_fn(nu, |_, _| rng.gen_range(-1.0..1.0)),
                    cx: mat(rng, rows, nx, 1.0),
                    cu: mat(rng, rows, nu, 1.0),
                    c: DVector::from_fn(rows, |_, _| rng.gen_range(-1.0..1.0)),
                }
            })
            .collect();
        let rows = rng.gen_range(0..3);
        StageData {
            nx,
            nu,
            stages,
            terminal: TerminalStage {
                hxx: spd(rng, nx, 0.1),
                q: DVector::from_fn(nx, |_, _| rng.gen_range(-1.0..1.0)),
                cx: mat(rng, rows, nx, 1.0),
                c: DVector::from_fn(rows, |_, _| rng.gen_range(-1.0..1.0)),
            },
            dx0: DVector::from_fn(nx, |_, _| rng.gen_range(-1.0..1.0)),
            du_lower: (0..bs.num_blocks()).map(|_| DVector::from_element(nu, -1.0)).collect(),
            du_upper: (0..bs.num_blocks()).map(|_| DVector::from_element(nu, 2.0)).collect(),
        }
    }

    pub fn random_lengths<R: Rng>(rng: &mut R, max_n: usize) -> Vec<usize> {
        let n = rng.gen_range(1..=max_n);
        let mut lengths = Vec::new();
        let mut left = n;
        while left > 0 {
            let len = rng.gen_range(1..=left.min(6));
            lengths.push(len);
            left -= len;
        }
        lengths
    }

    /// Relative Frobenius error `|a - b| / max(|b|, 1)`.
    pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1.0)
    }
}
