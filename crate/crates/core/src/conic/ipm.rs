//! Dense Nesterov-Todd primal-dual interior-point solver.
//!
//! Handles the canonical form `min c.x, Ax = b, x in K` where `K` is a
//! product of nonnegative and PSD cones; second-order blocks from the public
//! problem type are lowered to PSD arrow matrices before the solver runs
//! (`soc(d)` is the set of `(x0, v)` whose arrow matrix
//! `[[x0, v^T], [v, x0 I]]` is PSD, enforced with explicit structure rows).
//!
//! The iteration is a standard Mehrotra predictor-corrector on the normal
//! equations `A H A^T dy = r`, with H the Nesterov-Todd quadratic scaling
//! applied blockwise. Decompositions go through LAPACK; matrix products are
//! dense. Problem sizes here are desk scale (PSD sides in the hundreds at
//! most), which is exactly the regime where this dense approach is both
//! simple and fast, and where sparse-LDL conic codes stall because the PSD
//! scaling block is dense.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Cholesky, Eigh, UPLO};

use super::linalg::{smat, svec, svec_index, svec_len};
use super::{ConeSpec, ConicProblem, SolveStatus, SparseRow};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Cone block of the lowered (solver-internal) problem.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Block {
    NonNeg(usize),
    Psd(usize),
}

impl Block {
    fn storage_len(&self) -> usize {
        match *self {
            Block::NonNeg(d) => d,
            Block::Psd(side) => svec_len(side),
        }
    }

    fn degree(&self) -> usize {
        match *self {
            Block::NonNeg(d) => d,
            Block::Psd(side) => side,
        }
    }
}

/// Lowered problem: SOC blocks replaced by PSD arrow blocks.
pub(crate) struct Lowered {
    pub n: usize,
    pub c: Array1<f64>,
    pub rows: Vec<SparseRow>,
    pub b: Array1<f64>,
    pub blocks: Vec<Block>,
    pub offsets: Vec<usize>,
    /// original variable index -> (lowered index, scale), `x_orig = scale * x_low`
    pub var_map: Vec<(usize, f64)>,
}

/// Rewrites SOC cones as PSD arrow blocks with structure rows.
pub(crate) fn lower(p: &ConicProblem) -> Lowered {
    let mut blocks = Vec::new();
    let mut offsets = Vec::new();
    let mut var_map = Vec::with_capacity(p.num_vars);
    let mut extra_rows: Vec<SparseRow> = Vec::new();
    let mut n = 0usize;

    for cone in &p.cones {
        offsets.push(n);
        match *cone {
            ConeSpec::NonNeg(d) => {
                for i in 0..d {
                    var_map.push((n + i, 1.0));
                }
                blocks.push(Block::NonNeg(d));
                n += d;
            }
            ConeSpec::Psd(side) => {
                let len = svec_len(side);
                for i in 0..len {
                    var_map.push((n + i, 1.0));
                }
                blocks.push(Block::Psd(side));
                n += len;
            }
            ConeSpec::Soc(d) => {
                // x0 sits on the arrow diagonal, the vector part on the
                // first row; svec off-diagonals carry a sqrt(2) factor.
                var_map.push((n + svec_index(0, 0), 1.0));
                for i in 1..d {
                    var_map.push((n + svec_index(0, i), 1.0 / SQRT2));
                }
                // structure: all diagonal entries equal x0 ...
                for i in 1..d {
                    extra_rows.push(vec![
                        (n + svec_index(i, i), 1.0),
                        (n + svec_index(0, 0), -1.0),
                    ]);
                }
                // ... and the trailing principal submatrix is diagonal
                for i in 1..d {
                    for j in (i + 1)..d {
                        extra_rows.push(vec![(n + svec_index(i, j), 1.0)]);
                    }
                }
                blocks.push(Block::Psd(d));
                n += svec_len(d);
            }
        }
    }

    let mut c = Array1::zeros(n);
    for (orig, &(low, scale)) in var_map.iter().enumerate() {
        c[low] += scale * p.objective[orig];
    }
    let mut rows: Vec<SparseRow> = p
        .eq_rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(j, v)| {
                    let (low, scale) = var_map[j];
                    (low, v * scale)
                })
                .collect()
        })
        .collect();
    let mut b: Vec<f64> = p.eq_rhs.clone();
    for r in extra_rows {
        rows.push(r);
        b.push(0.0);
    }

    Lowered {
        n,
        c,
        rows,
        b: Array1::from(b),
        blocks,
        offsets,
        var_map,
    }
}

/// Maps a lowered solution vector back to the original variable layout.
pub(crate) fn recover(p: &ConicProblem, low: &Lowered, x: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(p.num_vars);
    for (orig, &(li, scale)) in low.var_map.iter().enumerate() {
        out[orig] = scale * x[li];
    }
    out
}

pub(crate) struct RawResult {
    pub x: Array1<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub dual_residual: f64,
    pub rel_gap: f64,
}

/// Smallest eigenvalue of a symmetric matrix (LAPACK).
pub fn min_eig_sym(m: &Array2<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    match m.eigh(UPLO::Lower) {
        Ok((vals, _)) => vals.iter().cloned().fold(f64::INFINITY, f64::min),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Per-block NT scaling data.
enum Scaling {
    NonNeg {
        d: Array1<f64>,
        lambda: Array1<f64>,
    },
    Psd {
        /// NT point `g = r r^T`, the H-operator is `u -> svec(g U g)`.
        g: Array2<f64>,
        r: Array2<f64>,
        /// `r^{-1} = diag(sigma)^{-1} r^T Z`, stored explicitly.
        rinv: Array2<f64>,
        sigma: Array1<f64>,
    },
}

struct BlockView {
    block: Block,
    off: usize,
    len: usize,
}

fn block_views(low: &Lowered) -> Vec<BlockView> {
    low.blocks
        .iter()
        .zip(low.offsets.iter())
        .map(|(&block, &off)| BlockView {
            block,
            off,
            len: block.storage_len(),
        })
        .collect()
}

fn chol_with_ridge(m: &Array2<f64>) -> Option<Array2<f64>> {
    if let Ok(l) = m.cholesky(UPLO::Lower) {
        return Some(l);
    }
    let d = m.nrows();
    let tr: f64 = m.diag().sum();
    let mut ridge = 1e-14 * (1.0 + tr.abs() / d.max(1) as f64);
    for _ in 0..3 {
        let mut m2 = m.clone();
        for i in 0..d {
            m2[(i, i)] += ridge;
        }
        if let Ok(l) = m2.cholesky(UPLO::Lower) {
            return Some(l);
        }
        ridge *= 1e3;
    }
    None
}

fn compute_scaling(bv: &BlockView, x: &Array1<f64>, z: &Array1<f64>) -> Option<Scaling> {
    match bv.block {
        Block::NonNeg(dn) => {
            let mut d = Array1::zeros(dn);
            let mut lambda = Array1::zeros(dn);
            for i in 0..dn {
                let (xi, zi) = (x[bv.off + i], z[bv.off + i]);
                if xi <= 0.0 || zi <= 0.0 {
                    return None;
                }
                d[i] = (xi / zi).sqrt();
                lambda[i] = (xi * zi).sqrt();
            }
            Some(Scaling::NonNeg { d, lambda })
        }
        Block::Psd(side) => {
            let xm = smat(&x.slice(s![bv.off..bv.off + bv.len]).to_owned(), side);
            let zm = smat(&z.slice(s![bv.off..bv.off + bv.len]).to_owned(), side);
            let lx = chol_with_ridge(&xm)?;
            let lz = chol_with_ridge(&zm)?;
            // NT scaling: svd(lz^T lx) = u s v^T, r = lx v s^{-1/2}
            let m = lz.t().dot(&lx);
            let (u_opt, sig, vt_opt) = ndarray_linalg::SVD::svd(&m, true, true).ok()?;
            let _u = u_opt?;
            let vt = vt_opt?;
            let mut r = lx.dot(&vt.t());
            for (j, &sj) in sig.iter().enumerate() {
                let scale = 1.0 / sj.max(1e-300).sqrt();
                r.column_mut(j).mapv_inplace(|v| v * scale);
            }
            let g = r.dot(&r.t());
            // r^{-1} via the identity r^T z r = diag(sigma)
            let mut rinv = r.t().dot(&zm);
            for (i, &si) in sig.iter().enumerate() {
                let scale = 1.0 / si.max(1e-300);
                rinv.row_mut(i).mapv_inplace(|v| v * scale);
            }
            Some(Scaling::Psd {
                g,
                r,
                rinv,
                sigma: sig,
            })
        }
    }
}

/// Applies the NT quadratic operator of one block to a sparse column,
/// writing into `out[off..off+len]`.
fn apply_h_sparse(bv: &BlockView, sc: &Scaling, entries: &[(usize, f64)], out: &mut Array1<f64>) {
    match (bv.block, sc) {
        (Block::NonNeg(_), Scaling::NonNeg { d, .. }) => {
            for &(j, v) in entries {
                let i = j - bv.off;
                out[j] = d[i] * d[i] * v;
            }
        }
        (Block::Psd(side), Scaling::Psd { g, .. }) => {
            // few entries: expand g E g from outer products of g's columns
            if entries.len() * 4 <= side {
                let mut acc: Array2<f64> = Array2::zeros((side, side));
                for &(jvar, v) in entries {
                    let li = jvar - bv.off;
                    let (i, j) = inv_svec_index(li);
                    if i == j {
                        let gi = g.column(i);
                        for a in 0..side {
                            for bcol in 0..side {
                                acc[(a, bcol)] += v * gi[a] * gi[bcol];
                            }
                        }
                    } else {
                        let w = v / SQRT2;
                        let gi = g.column(i);
                        let gj = g.column(j);
                        for a in 0..side {
                            for bcol in 0..side {
                                acc[(a, bcol)] += w * (gi[a] * gj[bcol] + gj[a] * gi[bcol]);
                            }
                        }
                    }
                }
                let sv = svec(&acc);
                for (i, v) in sv.iter().enumerate() {
                    out[bv.off + i] = *v;
                }
            } else {
                let mut dense = Array1::zeros(bv.len);
                for &(j, v) in entries {
                    dense[j - bv.off] = v;
                }
                let um = smat(&dense, side);
                let res = g.dot(&um).dot(g);
                let sv = svec(&res);
                for (i, v) in sv.iter().enumerate() {
                    out[bv.off + i] = *v;
                }
            }
        }
        _ => unreachable!(),
    }
}

/// Inverse of `svec_index`: storage position -> (i, j) with i <= j.
fn inv_svec_index(idx: usize) -> (usize, usize) {
    // j is the largest integer with j(j+1)/2 <= idx
    let mut j = ((((8 * idx + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
    while (j + 1) * (j + 2) / 2 <= idx {
        j += 1;
    }
    while j * (j + 1) / 2 > idx {
        j -= 1;
    }
    (idx - j * (j + 1) / 2, j)
}

/// Applies H blockwise to a dense vector.
fn apply_h_dense(views: &[BlockView], scals: &[Scaling], v: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(v.len());
    for (bv, sc) in views.iter().zip(scals.iter()) {
        match (bv.block, sc) {
            (Block::NonNeg(dn), Scaling::NonNeg { d, .. }) => {
                for i in 0..dn {
                    out[bv.off + i] = d[i] * d[i] * v[bv.off + i];
                }
            }
            (Block::Psd(side), Scaling::Psd { g, .. }) => {
                let um = smat(&v.slice(s![bv.off..bv.off + bv.len]).to_owned(), side);
                let res = g.dot(&um).dot(g);
                let sv = svec(&res);
                for (i, w) in sv.iter().enumerate() {
                    out[bv.off + i] = *w;
                }
            }
            _ => unreachable!(),
        }
    }
    out
}

/// Longest feasible step: largest alpha in (0, 1] with `x + alpha dx` in the
/// cone, found by Cholesky bisection per PSD block.
fn max_step(views: &[BlockView], x: &Array1<f64>, dx: &Array1<f64>) -> f64 {
    let mut alpha: f64 = 1.0;
    for bv in views {
        match bv.block {
            Block::NonNeg(dn) => {
                for i in 0..dn {
                    let d = dx[bv.off + i];
                    if d < 0.0 {
                        alpha = alpha.min(-x[bv.off + i] / d);
                    }
                }
            }
            Block::Psd(side) => {
                let xm = smat(&x.slice(s![bv.off..bv.off + bv.len]).to_owned(), side);
                let dm = smat(&dx.slice(s![bv.off..bv.off + bv.len]).to_owned(), side);
                let feasible = |a: f64| -> bool {
                    let trial = &xm + &(a * &dm);
                    trial.cholesky(UPLO::Lower).is_ok()
                };
                if feasible(alpha) {
                    continue;
                }
                let (mut lo, mut hi) = (0.0_f64, alpha);
                for _ in 0..30 {
                    let mid = 0.5 * (lo + hi);
                    if feasible(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                alpha = alpha.min(lo);
            }
        }
    }
    alpha.max(0.0)
}

struct KktFactors {
    /// Dense Schur complement A H A^T and its Cholesky factor.
    chol: Array2<f64>,
    s: Array2<f64>,
}

fn factor_schur(rows: &[SparseRow], hat: &Array2<f64>) -> Option<KktFactors> {
    let m = rows.len();
    if m == 0 {
        return Some(KktFactors {
            chol: Array2::zeros((0, 0)),
            s: Array2::zeros((0, 0)),
        });
    }
    let mut smat_ = Array2::zeros((m, m));
    for (i, row) in rows.iter().enumerate() {
        for jcol in 0..m {
            let col = hat.column(jcol);
            let mut acc = 0.0;
            for &(k, v) in row {
                acc += v * col[k];
            }
            smat_[(i, jcol)] = acc;
        }
    }
    // symmetrize against round-off and regularize lightly
    for i in 0..m {
        for j in 0..i {
            let avg = 0.5 * (smat_[(i, j)] + smat_[(j, i)]);
            smat_[(i, j)] = avg;
            smat_[(j, i)] = avg;
        }
    }
    let base = smat_.diag().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut reg = 1e-13 * (1.0 + base);
    for _ in 0..4 {
        let mut s2 = smat_.clone();
        for i in 0..s2.nrows() {
            s2[(i, i)] += reg;
        }
        if let Ok(l) = s2.cholesky(UPLO::Lower) {
            return Some(KktFactors { chol: l, s: smat_ });
        }
        reg *= 1e3;
    }
    None
}

fn chol_solve(l: &Array2<f64>, rhs: &Array1<f64>) -> Array1<f64> {
    let m = l.nrows();
    let mut w = rhs.clone();
    for i in 0..m {
        let mut acc = w[i];
        for k in 0..i {
            acc -= l[(i, k)] * w[k];
        }
        w[i] = acc / l[(i, i)];
    }
    for i in (0..m).rev() {
        let mut acc = w[i];
        for k in (i + 1)..m {
            acc -= l[(k, i)] * w[k];
        }
        w[i] = acc / l[(i, i)];
    }
    w
}

fn a_mul(rows: &[SparseRow], x: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let mut acc = 0.0;
        for &(j, v) in row {
            acc += v * x[j];
        }
        out[i] = acc;
    }
    out
}

fn at_mul(rows: &[SparseRow], n: usize, y: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        let yi = y[i];
        if yi == 0.0 {
            continue;
        }
        for &(j, v) in row {
            out[j] += v * yi;
        }
    }
    out
}

/// Shifts a blockwise point into the cone interior.
fn shift_interior(views: &[BlockView], v: &mut Array1<f64>) {
    for bv in views {
        match bv.block {
            Block::NonNeg(dn) => {
                let mut mn = f64::INFINITY;
                for i in 0..dn {
                    mn = mn.min(v[bv.off + i]);
                }
                let shift = interior_shift(mn);
                if shift > 0.0 {
                    for i in 0..dn {
                        v[bv.off + i] += shift;
                    }
                }
            }
            Block::Psd(side) => {
                let m = smat(&v.slice(s![bv.off..bv.off + bv.len]).to_owned(), side);
                let mn = min_eig_sym(&m);
                let shift = interior_shift(mn);
                if shift > 0.0 {
                    for i in 0..side {
                        v[bv.off + svec_index(i, i)] += shift;
                    }
                }
            }
        }
    }
}

fn interior_shift(min_eig: f64) -> f64 {
    if min_eig < 0.0 {
        -1.5 * min_eig + 0.1
    } else if min_eig < 0.1 {
        0.1 - min_eig
    } else {
        0.0
    }
}

struct Direction {
    dx: Array1<f64>,
    dy: Array1<f64>,
    dz: Array1<f64>,
}

fn solve_direction(
    low: &Lowered,
    views: &[BlockView],
    scals: &[Scaling],
    kkt: &KktFactors,
    rd: &Array1<f64>,
    rp: &Array1<f64>,
    rc: &Array1<f64>,
) -> Direction {
    let hrd = apply_h_dense(views, scals, rd);
    let tmp = rc - &hrd;
    let rhs = rp - &a_mul(&low.rows, &tmp);
    let mut dy = chol_solve(&kkt.chol, &rhs);
    // one round of iterative refinement on the Schur system
    let resid = &rhs - &kkt.s.dot(&dy);
    let corr = chol_solve(&kkt.chol, &resid);
    dy = &dy + &corr;
    let dz = rd - &at_mul(&low.rows, low.n, &dy);
    let hdz = apply_h_dense(views, scals, &dz);
    let dx = rc - &hdz;
    Direction { dx, dy, dz }
}

/// Builds the Mehrotra corrector right-hand side `rc = W(v)` with
/// `v = -lambda o lambda + sigma mu e - (W^-1 dx_aff) o (W dz_aff)`, all in
/// the scaled Jordan frame, then mapped back through the scaling.
fn corrector_rc(
    views: &[BlockView],
    scals: &[Scaling],
    dx_aff: &Array1<f64>,
    dz_aff: &Array1<f64>,
    sigma_mu: f64,
    n: usize,
) -> Array1<f64> {
    let mut rc = Array1::zeros(n);
    for (bv, sc) in views.iter().zip(scals.iter()) {
        match (bv.block, sc) {
            (Block::NonNeg(dn), Scaling::NonNeg { d, lambda }) => {
                for i in 0..dn {
                    let dxs = dx_aff[bv.off + i] / d[i];
                    let dzs = dz_aff[bv.off + i] * d[i];
                    let v = -lambda[i] + (sigma_mu - dxs * dzs) / lambda[i];
                    rc[bv.off + i] = d[i] * v;
                }
            }
            (Block::Psd(side), Scaling::Psd { r, rinv, sigma, .. }) => {
                let dxm = smat(&dx_aff.slice(s![bv.off..bv.off + bv.len]).to_owned(), side);
                let dzm = smat(&dz_aff.slice(s![bv.off..bv.off + bv.len]).to_owned(), side);
                // scaled directions: rinv dX rinv^T and r^T dZ r
                let dxs = rinv.dot(&dxm).dot(&rinv.t());
                let dzs = r.t().dot(&dzm).dot(r);
                // corrector cross term, symmetrized
                let cross = dxs.dot(&dzs);
                let mut vmat = Array2::zeros((side, side));
                for i in 0..side {
                    for j in 0..side {
                        let cij = 0.5 * (cross[(i, j)] + cross[(j, i)]);
                        // L_lambda^{-1} acts entrywise as 2/(sigma_i+sigma_j)
                        let denom = (sigma[i] + sigma[j]).max(1e-300);
                        vmat[(i, j)] = -2.0 * cij / denom;
                    }
                    vmat[(i, i)] += -sigma[i] + sigma_mu / sigma[i].max(1e-300);
                }
                let back = r.dot(&vmat).dot(&r.t());
                let sv = svec(&back);
                for (i, v) in sv.iter().enumerate() {
                    rc[bv.off + i] = *v;
                }
            }
            _ => unreachable!(),
        }
    }
    rc
}

pub(crate) fn run(low: &Lowered, tol: f64, max_iter: usize) -> RawResult {
    let n = low.n;
    let m = low.rows.len();
    let views = block_views(low);
    let nu: usize = low.blocks.iter().map(|b| b.degree()).sum();

    // row equilibration (pure row scaling leaves x unchanged)
    let mut rows = low.rows.clone();
    let mut b = low.b.clone();
    for (i, row) in rows.iter_mut().enumerate() {
        let norm = row
            .iter()
            .map(|&(_, v)| v.abs())
            .fold(0.0_f64, f64::max)
            .max(1e-12);
        for e in row.iter_mut() {
            e.1 /= norm;
        }
        b[i] /= norm;
    }
    let cs = low.c.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let c = low.c.mapv(|v| v / cs);
    let low_scaled = Lowered {
        n,
        c: c.clone(),
        rows,
        b: b.clone(),
        blocks: low.blocks.clone(),
        offsets: low.offsets.clone(),
        var_map: Vec::new(),
    };
    let rows = &low_scaled.rows;

    // least-squares initialization, then shift into the cone interior
    let eye_hat = {
        let mut hat = Array2::zeros((n, m));
        for (j, row) in rows.iter().enumerate() {
            for &(k, v) in row {
                hat[(k, j)] = v;
            }
        }
        hat
    };
    let kkt0 = match factor_schur(rows, &eye_hat) {
        Some(k) => k,
        None => {
            return RawResult {
                x: Array1::zeros(n),
                status: SolveStatus::AccuracyLimit,
                iterations: 0,
                dual_residual: f64::INFINITY,
                rel_gap: f64::INFINITY,
            }
        }
    };
    let mut x = at_mul(rows, n, &chol_solve(&kkt0.chol, &b));
    shift_interior(&views, &mut x);
    let mut y = chol_solve(&kkt0.chol, &a_mul(rows, &c));
    let mut z = &c - &at_mul(rows, n, &y);
    shift_interior(&views, &mut z);

    let bnorm = b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let cnorm = c.iter().fold(0.0_f64, |a, v| a.max(v.abs()));

    let mut best_x = x.clone();
    let mut best_score = f64::INFINITY;
    let mut best_rd = f64::INFINITY;
    let mut best_gap = f64::INFINITY;
    let mut status = SolveStatus::AccuracyLimit;
    let mut iterations = 0;
    let mut tiny_steps = 0;

    for iter in 0..max_iter {
        iterations = iter;
        let rp = &b - &a_mul(rows, &x);
        let atyz = &at_mul(rows, n, &y) + &z;
        let rd = &c - &atyz;
        let gap: f64 = x.dot(&z);
        let mu = gap / nu.max(1) as f64;
        let pobj = c.dot(&x);
        let dobj = b.dot(&y);
        let rel_p = rp.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / (1.0 + bnorm);
        let rel_d = rd.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / (1.0 + cnorm);
        let rel_g = gap.abs() / (1.0 + pobj.abs().max(dobj.abs()));

        let score = rel_p.max(rel_d).max(rel_g);
        if score < best_score {
            best_score = score;
            best_x = x.clone();
            best_rd = rel_d;
            best_gap = rel_g;
        }
        if rel_p <= tol && rel_d <= tol && rel_g <= tol {
            status = SolveStatus::Optimal;
            best_x = x.clone();
            best_rd = rel_d;
            best_gap = rel_g;
            break;
        }

        // certificate checks on the raw iterate; the norm guards keep a
        // well-posed problem with b.y -> 0 from tripping a false positive
        let by = b.dot(&y);
        let ynorm = y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if by > 1e-8 * (1.0 + ynorm) {
            let hres = atyz.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if hres / by < 1e-9 {
                status = SolveStatus::Infeasible;
                break;
            }
        }
        let cx = c.dot(&x);
        let xnorm = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if cx < -1e-8 * (1.0 + xnorm) {
            let hres = a_mul(rows, &x).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if hres / (-cx) < 1e-9 {
                status = SolveStatus::Unbounded;
                break;
            }
        }

        let scals: Option<Vec<Scaling>> = views
            .iter()
            .map(|bv| compute_scaling(bv, &x, &z))
            .collect();
        let scals = match scals {
            Some(s) => s,
            None => break,
        };

        // H A^T, exploiting sparse rows inside PSD blocks
        let mut hat = Array2::zeros((n, m));
        for (j, row) in rows.iter().enumerate() {
            let mut col = Array1::zeros(n);
            // split row entries by block
            let mut bi = 0usize;
            let mut k = 0usize;
            let mut sorted = row.clone();
            sorted.sort_unstable_by_key(|e| e.0);
            while k < sorted.len() {
                while bi + 1 < views.len() && views[bi + 1].off <= sorted[k].0 {
                    bi += 1;
                }
                let end_off = views[bi].off + views[bi].len;
                let start = k;
                while k < sorted.len() && sorted[k].0 < end_off {
                    k += 1;
                }
                apply_h_sparse(&views[bi], &scals[bi], &sorted[start..k], &mut col);
            }
            hat.column_mut(j).assign(&col);
        }
        let kkt = match factor_schur(rows, &hat) {
            Some(kf) => kf,
            None => break,
        };

        // predictor
        let rc_aff = x.mapv(|v| -v);
        let aff = solve_direction(&low_scaled, &views, &scals, &kkt, &rd, &rp, &rc_aff);
        let ap = max_step(&views, &x, &aff.dx);
        let ad = max_step(&views, &z, &aff.dz);
        let a_aff = ap.min(ad);
        let gap_aff = (&x + &(a_aff * &aff.dx)).dot(&(&z + &(a_aff * &aff.dz)));
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // corrector
        let rc = corrector_rc(&views, &scals, &aff.dx, &aff.dz, sigma * mu, n);
        let dir = solve_direction(&low_scaled, &views, &scals, &kkt, &rd, &rp, &rc);
        let ap = (0.99 * max_step(&views, &x, &dir.dx)).min(1.0);
        let ad = (0.99 * max_step(&views, &z, &dir.dz)).min(1.0);

        x = &x + &(ap * &dir.dx);
        y = &y + &(ad * &dir.dy);
        z = &z + &(ad * &dir.dz);

        if ap < 1e-7 && ad < 1e-7 {
            tiny_steps += 1;
            if tiny_steps >= 3 {
                break;
            }
        } else {
            tiny_steps = 0;
        }
    }

    RawResult {
        x: best_x,
        status,
        iterations: iterations + 1,
        dual_residual: best_rd,
        rel_gap: best_gap,
    }
}
