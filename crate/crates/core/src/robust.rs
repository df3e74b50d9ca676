//! Worst-case robust joint design under bounded channel uncertainty.
//!
//! The estimated composite channels are trusted only up to Frobenius-ball
//! perturbations. Both alternating subproblems then carry matrix
//! inequalities obtained from the S-procedure: a level `t` is certified
//! only if the received power stays above `t` for every admissible
//! perturbation, and every interference cap must hold for every admissible
//! perturbation of its own link. The alternation maximizes the certified
//! level over the reflect Gram matrix and the transmit covariance in turn;
//! a final randomization step recovers a unit-modulus reflect vector and a
//! rank-1 beamformer whose own worst-case performance has a closed form.
//!
//! With a zero uncertainty radius the loop falls back to the nominal
//! semidefinite subproblems, which have no perturbation variables and stay
//! tractable when the product of reflect elements and transmit antennas is
//! large.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conic::{
    self, extract_hermitian, herm_inner, hermitian_embed, kron, smat, svec, svec_len, vec_cm,
    ProblemBuilder, SolveStatus, VarBlock,
};
use crate::error::{Error, Result};
use crate::model::{self, SystemConfig};
use crate::perfect;

/// Tuning knobs of the robust alternating loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustOptions {
    /// Conic solver tolerance (the solver itself never runs looser than
    /// 1e-8; this mainly sets the acceptance thresholds).
    pub eps_solver: f64,
    /// Stop when the relative change of the certified level drops below
    /// this.
    pub eps_bcd: f64,
    /// Hard cap on outer rounds.
    pub max_rounds: usize,
    /// Randomized candidate pairs drawn from the relaxed matrices.
    pub randomization_count: usize,
    /// Seed for the randomization stream.
    pub seed: u64,
    /// Relative channel error level: each link's perturbation is bounded by
    /// `tau` times the Frobenius norm of its estimate. Zero selects the
    /// nominal path.
    pub tau: f64,
    /// Discrete phase levels for the final quantization step; `None` keeps
    /// continuous phases only.
    pub quantization_levels: Option<u32>,
}

impl Default for RobustOptions {
    fn default() -> Self {
        RobustOptions {
            eps_solver: 1e-2,
            eps_bcd: 1e-4,
            max_rounds: 50,
            randomization_count: 100,
            seed: 0,
            tau: 0.0,
            quantization_levels: None,
        }
    }
}

/// Squared uncertainty radii per link: the admissible errors are
/// `||Delta||_F^2 <= xi`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintySpec {
    pub xi_secondary: f64,
    pub xi_primary: Vec<f64>,
}

impl UncertaintySpec {
    /// True when every radius is zero, so the nominal subproblems apply.
    pub fn is_zero(&self) -> bool {
        self.xi_secondary <= 0.0 && self.xi_primary.iter().all(|&x| x <= 0.0)
    }
}

/// Radii proportional to each estimated channel's Frobenius norm:
/// `||Delta||_F <= tau ||H_hat||_F`, stored squared.
pub fn uncertainty_radii(
    tau: f64,
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
) -> UncertaintySpec {
    let xi = |h: &Array2<Complex64>| -> f64 {
        let fro2: f64 = h.iter().map(|v| v.norm_sqr()).sum();
        tau * tau * fro2
    };
    UncertaintySpec {
        xi_secondary: xi(h_s),
        xi_primary: h_p.iter().map(xi).collect(),
    }
}

/// Per-round trace entry. Levels are certified worst-case received powers,
/// valid for every channel in the uncertainty set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustIteration {
    /// Certified level after the reflect step (covariance held fixed).
    pub reflect_level: f64,
    /// Certified level after the covariance step (reflect held fixed).
    pub beamform_level: f64,
    /// Received power of the relaxed pair at the channel estimates.
    pub eta_nominal: f64,
    /// Relative change of the certified level against the previous round.
    pub delta: f64,
    /// Wall-clock seconds spent in this round.
    pub elapsed_s: f64,
}

/// Outcome of the robust alternating design.
#[derive(Debug, Clone)]
pub struct RobustResult {
    /// Final relaxed reflect Gram matrix.
    pub theta_mat: Array2<Complex64>,
    /// Final transmit covariance, `tr(W) <= P`.
    pub w_mat: Array2<Complex64>,
    /// Certified worst-case received power of the relaxed pair.
    pub level: f64,
    /// Rate at the certified level, `log2(1 + level / noise)`.
    pub rate_certified: f64,
    /// Randomized unit-modulus reflect vector (direct entry 1).
    pub theta: Array1<Complex64>,
    /// Randomized beamformer, rescaled so every worst-case interference cap
    /// holds.
    pub w: Array1<Complex64>,
    /// Exact worst-case received power of the randomized pair.
    pub worst_power: f64,
    /// Rate at the randomized pair's worst case.
    pub rate_worst: f64,
    /// Received power of the randomized pair at the channel estimates.
    pub eta_nominal: f64,
    /// Rate of the randomized pair at the channel estimates.
    pub rate_nominal: f64,
    /// Reflect vector after phase quantization, if requested.
    pub theta_quantized: Option<Array1<Complex64>>,
    /// Worst-case rate with quantized phases (beamformer rescaled onto the
    /// robust interference caps first), if requested.
    pub rate_worst_quantized: Option<f64>,
    pub iterations: usize,
    /// Whether the stopping rule fired before the round cap.
    pub converged: bool,
    /// Times the starting covariance was scaled down by 4 because the
    /// interference certificates could not hold at full power.
    pub init_shrinks: usize,
    pub trace: Vec<RobustIteration>,
}

/// Exact worst-case received power of a rank-1 design over the uncertainty
/// ball `||Delta||_F <= sqrt(xi)` around `h_hat`: the adversary aligns the
/// perturbation against the signal, so the amplitude drops by exactly
/// `sqrt(xi) ||theta|| ||w||`.
pub fn worst_case_power_rank1(
    theta: &Array1<Complex64>,
    w: &Array1<Complex64>,
    h_hat: &Array2<Complex64>,
    xi: f64,
) -> f64 {
    let nominal = model::received_amplitude(theta, h_hat, w).norm();
    let swing = xi.sqrt() * vec_norm(theta) * vec_norm(w);
    let worst = (nominal - swing).max(0.0);
    worst * worst
}

/// Exact best-case (largest) received power of a rank-1 design over the
/// same uncertainty ball; this is what an interference cap must withstand.
pub fn best_case_power_rank1(
    theta: &Array1<Complex64>,
    w: &Array1<Complex64>,
    h_hat: &Array2<Complex64>,
    xi: f64,
) -> f64 {
    let nominal = model::received_amplitude(theta, h_hat, w).norm();
    let best = nominal + xi.sqrt() * vec_norm(theta) * vec_norm(w);
    best * best
}

fn vec_norm(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian matrix of the received-power quadratic form in the stacked
/// perturbation: with `x = vec(Delta)` column-major,
/// `[x; 1]^H Q [x; 1] = tr(Theta (H + Delta) W (H + Delta)^H)`.
///
/// The blocks are `W^T kron Theta`, the stacked cross term
/// `vec(Theta H W)`, and the nominal power in the corner. The form is
/// linear in `Theta` for fixed `W` and vice versa, which is what the
/// coordinate probing in the subproblem builders relies on.
pub fn quadratic_power_form(
    theta_mat: &Array2<Complex64>,
    w_mat: &Array2<Complex64>,
    h_hat: &Array2<Complex64>,
) -> Array2<Complex64> {
    let (rows, cols) = h_hat.dim();
    let d = rows * cols;
    let quad = kron(&w_mat.t(), &theta_mat.view());
    let thw = theta_mat.dot(h_hat).dot(w_mat);
    let cross = vec_cm(&thw.view());
    // tr(Theta H W H^H) = sum_ij (Theta H W)_ij conj(H_ij)
    let mut corner = Complex64::new(0.0, 0.0);
    for i in 0..rows {
        for j in 0..cols {
            corner += thw[(i, j)] * h_hat[(i, j)].conj();
        }
    }
    let mut out = Array2::zeros((d + 1, d + 1));
    out.slice_mut(s![..d, ..d]).assign(&quad);
    for i in 0..d {
        out[(i, d)] = cross[i];
        out[(d, i)] = cross[i].conj();
    }
    out[(d, d)] = Complex64::new(corner.re, 0.0);
    out
}

/// Multiplier direction of the uncertainty-ball constraint inside a
/// certificate: `[[I / xi, 0], [0, -1]]` with the identity acting on the
/// stacked perturbation.
fn ball_multiplier_basis(dim: usize, xi: f64) -> Array2<Complex64> {
    let mut out = Array2::zeros((dim + 1, dim + 1));
    for i in 0..dim {
        out[(i, i)] = Complex64::new(1.0 / xi, 0.0);
    }
    out[(dim, dim)] = Complex64::new(-1.0, 0.0);
    out
}

/// All-zero matrix of the given side with `value` in the bottom-right
/// entry.
fn corner_matrix(side: usize, value: f64) -> Array2<Complex64> {
    let mut out = Array2::zeros((side, side));
    out[(side - 1, side - 1)] = Complex64::new(value, 0.0);
    out
}

/// Ties a fresh PSD slack block to an affine matrix expression,
/// `S = eval(unknown) + sum_j scalar_j basis_j + constant`, by probing the
/// expression one real-embedding coordinate of the Hermitian unknown at a
/// time. The PSD cone on the returned slack then enforces the matrix
/// inequality `eval(unknown) + ... >= 0`.
fn add_lmi_rows<F>(
    pb: &mut ProblemBuilder,
    unknown: VarBlock,
    unknown_side: usize,
    eval: F,
    scalars: &[(usize, Array2<Complex64>)],
    constant: &Array2<Complex64>,
) -> Result<VarBlock>
where
    F: Fn(&Array2<Complex64>) -> Array2<Complex64>,
{
    let side = constant.nrows();
    let slack = pb.add_psd(2 * side);
    let nrows = svec_len(2 * side);
    let mut rows: Vec<Vec<(usize, f64)>> =
        (0..nrows).map(|q| vec![(slack.start + q, 1.0)]).collect();

    let coords = svec_len(2 * unknown_side);
    for r in 0..coords {
        let mut unit = Array1::zeros(coords);
        unit[r] = 1.0;
        let probe = extract_hermitian(&smat(&unit, 2 * unknown_side));
        let contrib = eval(&probe);
        let col = svec(&hermitian_embed(&contrib.view())?);
        for (q, v) in col.iter().enumerate() {
            if v.abs() > 1e-14 {
                rows[q].push((unknown.start + r, -v));
            }
        }
    }
    for (idx, basis) in scalars {
        let col = svec(&hermitian_embed(&basis.view())?);
        for (q, v) in col.iter().enumerate() {
            if v.abs() > 1e-14 {
                rows[q].push((*idx, -v));
            }
        }
    }
    let rhs = svec(&hermitian_embed(&constant.view())?);
    for (q, row) in rows.iter().enumerate() {
        pb.row(row, rhs[q]);
    }
    Ok(slack)
}

/// Robust reflect subproblem: maximize the certified level `t` over the
/// reflect Gram matrix with the transmit covariance fixed. One certificate
/// keeps the worst-case received power above `t`; one per primary receiver
/// keeps the worst-case interference below its cap. The reflect matrix
/// carries the usual unit diagonal caps with the direct entry pinned.
pub fn solve_reflect_robust(
    w_mat: &Array2<Complex64>,
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
    limits: &[f64],
    unc: &UncertaintySpec,
    eps_solver: f64,
) -> Result<(Array2<Complex64>, f64)> {
    let (rows_s, m) = h_s.dim();
    check_uncertainty(unc, h_p.len(), limits.len())?;
    let d = rows_s * m;

    let mut pb = ProblemBuilder::new();
    let xt = pb.add_psd(2 * rows_s);
    let tv = pb.add_nonneg(1);
    let mult = pb.add_nonneg(1 + limits.len());
    pb.obj(tv.start, -1.0);

    let snr_scalars = vec![
        (mult.start, ball_multiplier_basis(d, unc.xi_secondary)),
        (tv.start, corner_matrix(d + 1, -1.0)),
    ];
    add_lmi_rows(
        &mut pb,
        xt,
        rows_s,
        |probe| quadratic_power_form(probe, w_mat, h_s),
        &snr_scalars,
        &Array2::zeros((d + 1, d + 1)),
    )?;
    for (k, h) in h_p.iter().enumerate() {
        let scalars = vec![(mult.start + 1 + k, ball_multiplier_basis(d, unc.xi_primary[k]))];
        add_lmi_rows(
            &mut pb,
            xt,
            rows_s,
            |probe| -quadratic_power_form(probe, w_mat, h),
            &scalars,
            &corner_matrix(d + 1, limits[k]),
        )?;
    }

    add_reflect_diag_rows(&mut pb, xt, rows_s);

    let problem = pb.finish();
    let sol = conic::solve(&problem, eps_solver)?;
    if sol.status != SolveStatus::Optimal && sol.status != SolveStatus::AccuracyLimit {
        return Err(Error::Infeasible(format!(
            "robust reflect subproblem reported {:?}",
            sol.status
        )));
    }
    let theta_mat = extract_block(&sol.x, xt, rows_s);
    Ok((theta_mat, sol.x[tv.start]))
}

/// Robust covariance subproblem: maximize the certified level `t` over the
/// transmit covariance with the reflect matrix fixed, under the same
/// worst-case certificates plus the transmit power budget `tr(W) <= P`.
pub fn solve_covariance_robust(
    theta_mat: &Array2<Complex64>,
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
    limits: &[f64],
    power: f64,
    unc: &UncertaintySpec,
    eps_solver: f64,
) -> Result<(Array2<Complex64>, f64)> {
    let (rows_s, m) = h_s.dim();
    check_uncertainty(unc, h_p.len(), limits.len())?;
    let d = rows_s * m;

    let mut pb = ProblemBuilder::new();
    let xw = pb.add_psd(2 * m);
    let tv = pb.add_nonneg(1);
    let mult = pb.add_nonneg(1 + limits.len());
    let power_slack = pb.add_nonneg(1);
    pb.obj(tv.start, -1.0);

    let snr_scalars = vec![
        (mult.start, ball_multiplier_basis(d, unc.xi_secondary)),
        (tv.start, corner_matrix(d + 1, -1.0)),
    ];
    add_lmi_rows(
        &mut pb,
        xw,
        m,
        |probe| quadratic_power_form(theta_mat, probe, h_s),
        &snr_scalars,
        &Array2::zeros((d + 1, d + 1)),
    )?;
    for (k, h) in h_p.iter().enumerate() {
        let scalars = vec![(mult.start + 1 + k, ball_multiplier_basis(d, unc.xi_primary[k]))];
        add_lmi_rows(
            &mut pb,
            xw,
            m,
            |probe| -quadratic_power_form(theta_mat, probe, h),
            &scalars,
            &corner_matrix(d + 1, limits[k]),
        )?;
    }

    // power budget on the pair-averaged embedded diagonal
    let mut trace_row: Vec<(usize, f64)> = Vec::with_capacity(2 * m + 1);
    for i in 0..m {
        trace_row.push((xw.psd_entry(i, i), 0.5));
        trace_row.push((xw.psd_entry(m + i, m + i), 0.5));
    }
    trace_row.push((power_slack.start, 1.0));
    pb.row(&trace_row, power);

    let problem = pb.finish();
    let sol = conic::solve(&problem, eps_solver)?;
    if sol.status != SolveStatus::Optimal && sol.status != SolveStatus::AccuracyLimit {
        return Err(Error::Infeasible(format!(
            "robust covariance subproblem reported {:?}",
            sol.status
        )));
    }
    let w_out = extract_block(&sol.x, xw, m);
    Ok((w_out, sol.x[tv.start]))
}

/// Nominal covariance subproblem (zero uncertainty): maximize
/// `tr(Q_s W)` over PSD `W` with `tr(Q_k W) <= limit_k` and
/// `tr(W) <= power`, where `Q = H^H Theta H` for each link.
pub fn solve_covariance_nominal(
    q_s: &Array2<Complex64>,
    q_ks: &[Array2<Complex64>],
    limits: &[f64],
    power: f64,
    eps_solver: f64,
) -> Result<(Array2<Complex64>, f64)> {
    if q_ks.len() != limits.len() {
        return Err(Error::Dimension(format!(
            "{} interference grams vs {} limits",
            q_ks.len(),
            limits.len()
        )));
    }
    let m = q_s.nrows();
    let mut pb = ProblemBuilder::new();
    let xw = pb.add_psd(2 * m);
    let slacks = pb.add_nonneg(limits.len());
    let power_slack = pb.add_nonneg(1);

    let re_s = hermitian_embed(&q_s.view())?;
    for (idx, v) in svec(&re_s).iter().enumerate() {
        pb.obj(xw.start + idx, -0.5 * v);
    }
    for (k, qk) in q_ks.iter().enumerate() {
        let re_k = hermitian_embed(&qk.view())?;
        let mut row: Vec<(usize, f64)> = svec(&re_k)
            .iter()
            .enumerate()
            .map(|(idx, v)| (xw.start + idx, 0.5 * *v))
            .collect();
        row.push((slacks.start + k, 1.0));
        pb.row(&row, limits[k]);
    }
    let mut trace_row: Vec<(usize, f64)> = Vec::with_capacity(2 * m + 1);
    for i in 0..m {
        trace_row.push((xw.psd_entry(i, i), 0.5));
        trace_row.push((xw.psd_entry(m + i, m + i), 0.5));
    }
    trace_row.push((power_slack.start, 1.0));
    pb.row(&trace_row, power);

    let problem = pb.finish();
    let sol = conic::solve(&problem, eps_solver)?;
    if sol.status != SolveStatus::Optimal && sol.status != SolveStatus::AccuracyLimit {
        return Err(Error::Infeasible(format!(
            "nominal covariance subproblem reported {:?}",
            sol.status
        )));
    }
    let w_out = extract_block(&sol.x, xw, m);
    Ok((w_out, -sol.objective))
}

/// `H W H^H`, the received-power Gram seen from the reflect side,
/// symmetrized against matmul roundoff.
pub fn covariance_gram(w_mat: &Array2<Complex64>, h: &Array2<Complex64>) -> Array2<Complex64> {
    hermitian_part(h.dot(w_mat).dot(&dagger(h)))
}

/// `H^H Theta H`, the received-power Gram seen from the transmit side,
/// symmetrized against matmul roundoff.
pub fn reflect_gram(theta_mat: &Array2<Complex64>, h: &Array2<Complex64>) -> Array2<Complex64> {
    hermitian_part(dagger(h).dot(theta_mat).dot(h))
}

fn dagger(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (r, c) = a.dim();
    let mut out = Array2::zeros((c, r));
    for i in 0..r {
        for j in 0..c {
            out[(j, i)] = a[(i, j)].conj();
        }
    }
    out
}

fn hermitian_part(a: Array2<Complex64>) -> Array2<Complex64> {
    let ad = dagger(&a);
    let mut out = a;
    out.zip_mut_with(&ad, |x, y| *x = (*x + *y) * 0.5);
    out
}

fn check_uncertainty(unc: &UncertaintySpec, links: usize, limits: usize) -> Result<()> {
    if unc.xi_primary.len() != links || links != limits {
        return Err(Error::Dimension(format!(
            "{} radii vs {} primary links vs {} limits",
            unc.xi_primary.len(),
            links,
            limits
        )));
    }
    if unc.xi_secondary <= 0.0 || unc.xi_primary.iter().any(|&x| x <= 0.0) {
        return Err(Error::Config(
            "zero uncertainty radius: use the nominal subproblems instead".into(),
        ));
    }
    Ok(())
}

fn extract_block(x: &Array1<f64>, block: VarBlock, side: usize) -> Array2<Complex64> {
    let xr = x.slice(s![block.start..block.start + block.len]).to_owned();
    extract_hermitian(&smat(&xr, 2 * side))
}

fn add_reflect_diag_rows(pb: &mut ProblemBuilder, xt: VarBlock, side: usize) {
    let diag_slacks = pb.add_nonneg(side - 1);
    for i in 0..side - 1 {
        pb.row(
            &[
                (xt.psd_entry(i, i), 0.5),
                (xt.psd_entry(side + i, side + i), 0.5),
                (diag_slacks.start + i, 1.0),
            ],
            1.0,
        );
    }
    pb.row(
        &[
            (xt.psd_entry(side - 1, side - 1), 0.5),
            (xt.psd_entry(2 * side - 1, 2 * side - 1), 0.5),
        ],
        1.0,
    );
}

/// Largest scale in `(0, 1]` that keeps `scale * w` within every
/// worst-case interference cap; 1 when the pair is already robust
/// feasible. Scaling the beamformer scales both the nominal amplitude and
/// the worst-case swing, so the restored pair meets each cap exactly.
pub fn robust_feasible_scale(
    theta: &Array1<Complex64>,
    w: &Array1<Complex64>,
    h_p: &[Array2<Complex64>],
    unc: &UncertaintySpec,
    limits: &[f64],
) -> f64 {
    let mut scale = 1.0_f64;
    for ((h, &lim), &xi) in h_p.iter().zip(limits.iter()).zip(unc.xi_primary.iter()) {
        let peak = best_case_power_rank1(theta, w, h, xi);
        if peak > lim && peak > 0.0 {
            scale = scale.min((lim / peak).sqrt());
        }
    }
    scale
}

/// Recovers a unit-modulus reflect vector and a rank-1 beamformer from the
/// relaxed reflect matrix. Candidates are the principal eigenvector phases,
/// the all-ones vector and Gaussian draws; for each one the beamformer is
/// re-optimized exactly through the margin form of the transmit
/// subproblem, so every candidate pair meets the worst-case interference
/// caps by construction. Returns the pair with the largest worst-case
/// received power, and that power.
#[allow(clippy::too_many_arguments)]
pub fn dual_randomize(
    theta_mat: &Array2<Complex64>,
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
    limits: &[f64],
    unc: &UncertaintySpec,
    power: f64,
    count: usize,
    eps_solver: f64,
    rng: &mut ChaCha8Rng,
) -> (Array1<Complex64>, Array1<Complex64>, f64) {
    let s_dim = theta_mat.nrows();
    let m = h_s.ncols();

    let mut best_theta = model::uniform_reflect(s_dim - 1);
    let mut best_w: Array1<Complex64> = Array1::zeros(m);
    let mut best_val = -1.0_f64;

    let consider = |theta: Array1<Complex64>,
                    bt: &mut Array1<Complex64>,
                    bw: &mut Array1<Complex64>,
                    bv: &mut f64| {
        let tnorm = vec_norm(&theta);
        let margin_s = unc.xi_secondary.sqrt() * tnorm;
        let margins_k: Vec<f64> = unc.xi_primary.iter().map(|x| x.sqrt() * tnorm).collect();
        let (a, g) = perfect::effective_rows(&theta, h_s, h_p);
        if let Ok((w, worst_amp)) = perfect::solve_beamforming_margins(
            &a,
            &g,
            limits,
            power,
            margin_s,
            &margins_k,
            eps_solver,
        ) {
            let worst = worst_amp * worst_amp;
            if worst > *bv {
                *bv = worst;
                *bt = theta;
                *bw = w;
            }
        }
    };

    consider(
        model::uniform_reflect(s_dim - 1),
        &mut best_theta,
        &mut best_w,
        &mut best_val,
    );
    if let Ok((tvals, tvecs)) = conic::hermitian_eig(theta_mat) {
        let it = argmax(&tvals);
        let principal = tvecs
            .column(it)
            .mapv(|v| v * Complex64::from(tvals[it].max(0.0).sqrt()));
        consider(
            perfect::anchor_clip(&principal, s_dim),
            &mut best_theta,
            &mut best_w,
            &mut best_val,
        );

        let tfac = sqrt_factor(&tvecs, &tvals);
        for _ in 0..count {
            let draw = tfac.dot(&perfect::reflect_probe(s_dim, rng));
            consider(
                perfect::anchor_clip(&draw, s_dim),
                &mut best_theta,
                &mut best_w,
                &mut best_val,
            );
        }
    }

    (best_theta, best_w, best_val.max(0.0))
}

/// Worst-case received power delivered by a quantized reflect vector. The
/// beamformer is re-optimized for the quantized phases through the margin
/// form of the transmit subproblem; if that solve fails, the continuous
/// beamformer is rescaled onto the worst-case caps instead.
#[allow(clippy::too_many_arguments)]
fn quantized_worst_power(
    tq: &Array1<Complex64>,
    w: &Array1<Complex64>,
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
    limits: &[f64],
    unc: &UncertaintySpec,
    power: f64,
    eps_solver: f64,
) -> f64 {
    let tnorm = vec_norm(tq);
    let margin_s = unc.xi_secondary.sqrt() * tnorm;
    let margins_k: Vec<f64> = unc.xi_primary.iter().map(|x| x.sqrt() * tnorm).collect();
    let (a, g) = perfect::effective_rows(tq, h_s, h_p);
    if let Ok((_, worst_amp)) =
        perfect::solve_beamforming_margins(&a, &g, limits, power, margin_s, &margins_k, eps_solver)
    {
        return worst_amp * worst_amp;
    }
    let scale = robust_feasible_scale(tq, w, h_p, unc, limits);
    let ws = w.mapv(|v| v * scale);
    worst_case_power_rank1(tq, &ws, h_s, unc.xi_secondary)
}

fn argmax(vals: &Array1<f64>) -> usize {
    vals.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn sqrt_factor(vecs: &Array2<Complex64>, vals: &Array1<f64>) -> Array2<Complex64> {
    let mut fac = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let sc = Complex64::from(lam.max(0.0).sqrt());
        fac.column_mut(j).mapv_inplace(|v| v * sc);
    }
    fac
}


/// Runs the robust alternating design on one channel realization. With
/// `tau == 0` the subproblems reduce to their nominal forms; the loop,
/// randomization and reporting are shared.
pub fn run_bcd_robust(
    cfg: &SystemConfig,
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
    opts: &RobustOptions,
) -> Result<RobustResult> {
    cfg.validate()?;
    let m = cfg.num_tx_antennas;
    let s_dim = h_s.nrows();
    let limits = &cfg.interference_limits;
    let unc = uncertainty_radii(opts.tau, h_s, h_p);
    let nominal_path = unc.is_zero();

    let reflect_step = |w_mat: &Array2<Complex64>| -> Result<(Array2<Complex64>, f64)> {
        if nominal_path {
            let rs = covariance_gram(w_mat, h_s);
            let rks: Vec<Array2<Complex64>> =
                h_p.iter().map(|h| covariance_gram(w_mat, h)).collect();
            perfect::solve_reflect_sdp_from_grams(&rs, &rks, limits, opts.eps_solver)
        } else {
            solve_reflect_robust(w_mat, h_s, h_p, limits, &unc, opts.eps_solver)
        }
    };
    let covariance_step = |theta_mat: &Array2<Complex64>| -> Result<(Array2<Complex64>, f64)> {
        if nominal_path {
            let qs = reflect_gram(theta_mat, h_s);
            let qks: Vec<Array2<Complex64>> =
                h_p.iter().map(|h| reflect_gram(theta_mat, h)).collect();
            solve_covariance_nominal(&qs, &qks, limits, cfg.tx_power, opts.eps_solver)
        } else {
            solve_covariance_robust(theta_mat, h_s, h_p, limits, cfg.tx_power, &unc, opts.eps_solver)
        }
    };

    // uniform full-power start, scaled down until the interference
    // certificates can hold
    let mut w_mat = Array2::from_elem((m, m), Complex64::new(cfg.tx_power / m as f64, 0.0));
    let mut init_shrinks = 0usize;
    let mut pending = loop {
        match reflect_step(&w_mat) {
            Ok(r) => break Some(r),
            Err(Error::Infeasible(_)) if init_shrinks < 6 => {
                init_shrinks += 1;
                w_mat.mapv_inplace(|v| v * 0.25);
            }
            Err(e) => return Err(e),
        }
    };

    let mut theta_mat = Array2::eye(s_dim);
    let mut level = 0.0;
    let mut level_prev = opts.eps_bcd;
    let mut trace = Vec::new();
    let mut converged = false;

    for _ in 0..opts.max_rounds {
        let round_start = std::time::Instant::now();
        let (tm, reflect_level) = match pending.take() {
            Some(r) => r,
            None => reflect_step(&w_mat)?,
        };
        theta_mat = tm;
        let (wm, beamform_level) = covariance_step(&theta_mat)?;
        w_mat = wm;
        let eta_nominal = herm_inner(&theta_mat.view(), &covariance_gram(&w_mat, h_s).view());
        level = beamform_level;
        let delta = if level_prev > 1e-12 {
            (level - level_prev).abs() / level_prev
        } else {
            (level - level_prev).abs()
        };
        trace.push(RobustIteration {
            reflect_level,
            beamform_level,
            eta_nominal,
            delta,
            elapsed_s: round_start.elapsed().as_secs_f64(),
        });
        level_prev = level;
        if delta <= opts.eps_bcd {
            converged = true;
            break;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (theta, w, worst_power) = dual_randomize(
        &theta_mat,
        h_s,
        h_p,
        limits,
        &unc,
        cfg.tx_power,
        opts.randomization_count,
        opts.eps_solver,
        &mut rng,
    );
    let eta_nominal = model::received_power(&theta, h_s, &w);
    let rate_certified = (1.0 + level / cfg.noise_power).log2();
    let rate_worst = (1.0 + worst_power / cfg.noise_power).log2();
    let rate_nominal = (1.0 + eta_nominal / cfg.noise_power).log2();

    let (theta_quantized, rate_worst_quantized) = match opts.quantization_levels {
        Some(levels) => {
            let tq = perfect::quantize_phases(&theta, levels);
            let worst_q = quantized_worst_power(
                &tq,
                &w,
                h_s,
                h_p,
                limits,
                &unc,
                cfg.tx_power,
                opts.eps_solver,
            );
            (Some(tq), Some((1.0 + worst_q / cfg.noise_power).log2()))
        }
        None => (None, None),
    };

    Ok(RobustResult {
        theta_mat,
        w_mat,
        level,
        rate_certified,
        theta,
        w,
        worst_power,
        rate_worst,
        eta_nominal,
        rate_nominal,
        theta_quantized,
        rate_worst_quantized,
        iterations: trace.len(),
        converged,
        init_shrinks,
        trace,
    })
}
