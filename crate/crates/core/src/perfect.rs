//! Alternating transmit/reflect design with perfect channel knowledge.
//!
//! One outer round holds the reflect vector fixed and solves the transmit
//! beamforming problem exactly (a second-order cone program: maximize the
//! received amplitude under the power budget and per-receiver interference
//! caps), then holds the beamformer fixed and optimizes the reflect
//! coefficients through a semidefinite relaxation (drop the rank-1
//! constraint on `theta theta^H`), recovering a unit-modulus vector by
//! Gaussian randomization. The previous reflect vector is always kept as a
//! randomization candidate, so the received power never decreases from one
//! round to the next (up to solver tolerance) and the stopping rule on the
//! relative power change is well founded.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::conic::{self, hermitian_embed, svec, ProblemBuilder, SolveStatus};
use crate::error::{Error, Result};
use crate::model::{self, SystemConfig};

/// Tuning knobs of the alternating loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BcdOptions {
    /// Conic solver tolerance (the solver itself never runs looser than
    /// 1e-8; this mainly sets the acceptance thresholds).
    pub eps_solver: f64,
    /// Stop when the relative change of received power drops below this.
    pub eps_bcd: f64,
    /// Hard cap on outer rounds.
    pub max_rounds: usize,
    /// Gaussian randomization candidates per round.
    pub randomization_count: usize,
    /// Seed for the randomization stream.
    pub seed: u64,
    /// Discrete phase levels for the final quantization step; `None` keeps
    /// continuous phases only.
    pub quantization_levels: Option<u32>,
}

impl Default for BcdOptions {
    fn default() -> Self {
        BcdOptions {
            eps_solver: 1e-2,
            eps_bcd: 1e-4,
            max_rounds: 50,
            randomization_count: 100,
            seed: 0,
            quantization_levels: None,
        }
    }
}

/// Per-round trace entry. `eta` is the received power of the same-round
/// pair (reflect vector and beamformer produced in this round).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BcdIteration {
    /// Received amplitude achieved by the beamforming step.
    pub beamform_value: f64,
    /// Relaxation upper bound from the reflect-coefficient SDP.
    pub sdp_bound: f64,
    /// Received power after randomization, `|theta^H H_s w|^2`.
    pub eta: f64,
    /// Relative change of `eta` against the previous round.
    pub delta: f64,
    /// Wall-clock seconds spent in this round.
    pub elapsed_s: f64,
}

/// Outcome of the alternating design.
#[derive(Debug, Clone)]
pub struct BcdResult {
    /// Final reflect vector (unit modulus, direct entry 1).
    pub theta: Array1<Complex64>,
    /// Final beamformer, `||w||^2 <= P`.
    pub w: Array1<Complex64>,
    /// Final received power `|theta^H H_s w|^2`.
    pub eta: f64,
    /// Achievable rate in bits/s/Hz.
    pub rate: f64,
    /// Reflect vector after phase quantization, if requested.
    pub theta_quantized: Option<Array1<Complex64>>,
    /// Rate with quantized phases (beamformer rescaled if the interference
    /// caps need restoring), if requested.
    pub rate_quantized: Option<f64>,
    pub iterations: usize,
    /// Whether the stopping rule fired before the round cap.
    pub converged: bool,
    pub trace: Vec<BcdIteration>,
}

/// Effective channels after fixing the reflect vector: the received
/// amplitude row `theta^H H` for the secondary link and each primary link.
pub(crate) fn effective_rows(
    theta: &Array1<Complex64>,
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
) -> (Array1<Complex64>, Vec<Array1<Complex64>>) {
    let a = row_through(theta, h_s);
    let g = h_p.iter().map(|h| row_through(theta, h)).collect();
    (a, g)
}

fn row_through(theta: &Array1<Complex64>, h: &Array2<Complex64>) -> Array1<Complex64> {
    let mut out = Array1::zeros(h.ncols());
    for (i, t) in theta.iter().enumerate() {
        let tc = t.conj();
        for c in 0..h.ncols() {
            out[c] += tc * h[(i, c)];
        }
    }
    out
}

/// Exact transmit beamforming for a fixed reflect vector: maximize
/// `Re(a . w)` (a rotation makes the optimum real) subject to
/// `Im(a . w) = 0`, `|g_k . w|^2 <= limit_k` and `||w||^2 <= power`.
///
/// Returns the beamformer and the achieved amplitude `|a . w|`.
pub fn solve_beamforming(
    a: &Array1<Complex64>,
    g: &[Array1<Complex64>],
    limits: &[f64],
    power: f64,
    eps_solver: f64,
) -> Result<(Array1<Complex64>, f64)> {
    let zeros = vec![0.0; limits.len()];
    solve_beamforming_margins(a, g, limits, power, 0.0, &zeros, eps_solver)
}

/// Beamforming with norm penalties that make the rank-1 worst case exact:
/// maximize `Re(a . w) - margin_s ||w||` subject to `Im(a . w) = 0`,
/// `|g_k . w| + margin_k ||w|| <= sqrt(limit_k)` and `||w||^2 <= power`.
/// With margins `sqrt(xi) ||theta||` per link this is the worst-case
/// amplitude and the worst-case interference of a unit-modulus reflect
/// vector over Frobenius-ball channel errors; with all margins zero it
/// reduces to [`solve_beamforming`].
///
/// Returns the beamformer and the achieved objective
/// `(|a . w| - margin_s ||w||)+`.
pub fn solve_beamforming_margins(
    a: &Array1<Complex64>,
    g: &[Array1<Complex64>],
    limits: &[f64],
    power: f64,
    margin_s: f64,
    margins_k: &[f64],
    eps_solver: f64,
) -> Result<(Array1<Complex64>, f64)> {
    let m = a.len();
    if g.len() != limits.len() || margins_k.len() != limits.len() {
        return Err(Error::Dimension(format!(
            "{} interference rows vs {} limits vs {} margins",
            g.len(),
            limits.len(),
            margins_k.len()
        )));
    }
    let anorm = a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if anorm < 1e-14 {
        // zero effective channel: nothing to optimize, zero beamformer is
        // optimal and trivially feasible
        return Ok((Array1::zeros(m), 0.0));
    }

    // variable layout: one SOC of dim 2M+1 holds (r, Re w, Im w) with the
    // norm bound r capped at sqrt(power); one SOC of dim 3 per interference
    // cap holds (s_k, Re(g_k w), Im(g_k w)) with s_k tied to
    // sqrt(limit_k) - margin_k r
    let mut pb = ProblemBuilder::new();
    let wq = pb.add_soc(2 * m + 1);
    let wr = |i: usize| wq.start + 1 + i;
    let wi = |i: usize| wq.start + 1 + m + i;
    let cap = pb.add_nonneg(1);
    pb.row(&[(wq.start, 1.0), (cap.start, 1.0)], power.sqrt());

    for i in 0..m {
        pb.obj(wr(i), -a[i].re);
        pb.obj(wi(i), a[i].im);
    }
    if margin_s != 0.0 {
        pb.obj(wq.start, margin_s);
    }
    let mut im_row: Vec<(usize, f64)> = Vec::with_capacity(2 * m);
    for i in 0..m {
        im_row.push((wr(i), a[i].im));
        im_row.push((wi(i), a[i].re));
    }
    pb.row(&im_row, 0.0);

    for (k, gk) in g.iter().enumerate() {
        let q = pb.add_soc(3);
        pb.row(&[(q.start, 1.0), (wq.start, margins_k[k])], limits[k].sqrt());
        let mut re_row: Vec<(usize, f64)> = vec![(q.start + 1, -1.0)];
        let mut im_row: Vec<(usize, f64)> = vec![(q.start + 2, -1.0)];
        for i in 0..m {
            re_row.push((wr(i), gk[i].re));
            re_row.push((wi(i), -gk[i].im));
            im_row.push((wr(i), gk[i].im));
            im_row.push((wi(i), gk[i].re));
        }
        pb.row(&re_row, 0.0);
        pb.row(&im_row, 0.0);
    }

    let problem = pb.finish();
    let sol = conic::solve(&problem, eps_solver)?;
    if sol.status != SolveStatus::Optimal && sol.status != SolveStatus::AccuracyLimit {
        return Err(Error::Infeasible(format!(
            "beamforming subproblem reported {:?}",
            sol.status
        )));
    }
    let w = Array1::from_iter((0..m).map(|i| Complex64::new(sol.x[wr(i)], sol.x[wi(i)])));
    let nominal = a
        .iter()
        .zip(w.iter())
        .map(|(ai, wi)| ai * wi)
        .sum::<Complex64>()
        .norm();
    let wnorm = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok((w, (nominal - margin_s * wnorm).max(0.0)))
}

/// Reflect-coefficient semidefinite relaxation for a fixed beamformer:
/// maximize `tr(Theta R_s)` over Hermitian PSD `Theta` with unit diagonal
/// caps, direct entry pinned to one, and `tr(Theta R_k) <= limit_k`, where
/// `R = (H w)(H w)^H`. Solved over the real embedding of `Theta`.
///
/// Returns the relaxed matrix and the relaxation value (an upper bound on
/// the received power any feasible reflect vector can reach with this
/// beamformer).
pub fn solve_reflect_sdp(
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
    w: &Array1<Complex64>,
    limits: &[f64],
    eps_solver: f64,
) -> Result<(Array2<Complex64>, f64)> {
    let rs = rank_one(&h_s.dot(w));
    let rks: Vec<Array2<Complex64>> = h_p.iter().map(|h| rank_one(&h.dot(w))).collect();
    solve_reflect_sdp_from_grams(&rs, &rks, limits, eps_solver)
}

/// Same relaxation with the received-power Gram matrices supplied directly
/// (`R = H W H^H` for a general transmit covariance `W`, not necessarily
/// rank-1).
pub fn solve_reflect_sdp_from_grams(
    rs: &Array2<Complex64>,
    rks: &[Array2<Complex64>],
    limits: &[f64],
    eps_solver: f64,
) -> Result<(Array2<Complex64>, f64)> {
    let s = rs.nrows();
    let mut pb = ProblemBuilder::new();
    let xb = pb.add_psd(2 * s);
    let slacks = pb.add_nonneg(limits.len());

    // objective: minimize -tr(Theta R_s) = -svec(embed(R_s)) . x / 2
    let re_s = hermitian_embed(&rs.view())?;
    if rks.len() != limits.len() {
        return Err(Error::Dimension(format!(
            "{} interference grams vs {} limits",
            rks.len(),
            limits.len()
        )));
    }
    for (idx, v) in svec(&re_s).iter().enumerate() {
        pb.obj(xb.start + idx, -0.5 * v);
    }
    // interference caps with explicit slack
    for (k, rk) in rks.iter().enumerate() {
        let re_k = hermitian_embed(&rk.view())?;
        let mut row: Vec<(usize, f64)> = svec(&re_k)
            .iter()
            .enumerate()
            .map(|(idx, v)| (xb.start + idx, 0.5 * *v))
            .collect();
        row.push((slacks.start + k, 1.0));
        pb.row(&row, limits[k]);
    }
    // reflect diagonal caps |theta_i|^2 <= 1 (pair-averaged in the real
    // embedding), direct entry pinned to exactly 1
    let diag_slacks = pb.add_nonneg(s - 1);
    for i in 0..s - 1 {
        pb.row(
            &[
                (xb.psd_entry(i, i), 0.5),
                (xb.psd_entry(s + i, s + i), 0.5),
                (diag_slacks.start + i, 1.0),
            ],
            1.0,
        );
    }
    pb.row(
        &[
            (xb.psd_entry(s - 1, s - 1), 0.5),
            (xb.psd_entry(2 * s - 1, 2 * s - 1), 0.5),
        ],
        1.0,
    );

    let problem = pb.finish();
    let sol = conic::solve(&problem, eps_solver)?;
    if sol.status != SolveStatus::Optimal && sol.status != SolveStatus::AccuracyLimit {
        return Err(Error::Infeasible(format!(
            "reflect subproblem reported {:?}",
            sol.status
        )));
    }
    let xr = sol
        .x
        .slice(ndarray::s![xb.start..xb.start + xb.len])
        .to_owned();
    let xm = conic::smat(&xr, 2 * s);
    let theta_mat = conic::extract_hermitian(&xm);
    let bound = -sol.objective;
    Ok((theta_mat, bound))
}

fn rank_one(v: &Array1<Complex64>) -> Array2<Complex64> {
    let s = v.len();
    let mut out = Array2::zeros((s, s));
    for i in 0..s {
        for j in 0..s {
            out[(i, j)] = v[i] * v[j].conj();
        }
    }
    out
}

/// Draws reflect vectors from the relaxed matrix and keeps the best
/// interference-feasible one. Each candidate applies the matrix square
/// root to a normalized Gaussian with a one appended for the direct entry,
/// then re-anchors the result so the direct entry is exactly one and clips
/// any reflect-entry magnitude that exceeds the passive limit. The
/// candidate set always contains the principal eigenvector treated the
/// same way and the supplied incumbent, so the returned vector is never
/// worse than the incumbent.
pub fn randomize_reflect(
    theta_mat: &Array2<Complex64>,
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
    w: &Array1<Complex64>,
    limits: &[f64],
    count: usize,
    incumbent: &Array1<Complex64>,
    rng: &mut ChaCha8Rng,
) -> Array1<Complex64> {
    let s = theta_mat.nrows();
    let hw_s = h_s.dot(w);
    let hw_p: Vec<Array1<Complex64>> = h_p.iter().map(|h| h.dot(w)).collect();

    let feasible = |theta: &Array1<Complex64>| -> bool {
        hw_p.iter().zip(limits.iter()).all(|(hw, &lim)| {
            let amp: Complex64 = theta
                .iter()
                .zip(hw.iter())
                .map(|(t, v)| t.conj() * v)
                .sum();
            amp.norm_sqr() <= lim * (1.0 + 1e-9)
        })
    };
    let power = |theta: &Array1<Complex64>| -> f64 {
        let amp: Complex64 = theta
            .iter()
            .zip(hw_s.iter())
            .map(|(t, v)| t.conj() * v)
            .sum();
        amp.norm_sqr()
    };

    let mut best = incumbent.clone();
    let mut best_val = power(incumbent);

    let consider = |theta: Array1<Complex64>, best: &mut Array1<Complex64>, best_val: &mut f64| {
        if feasible(&theta) {
            let v = power(&theta);
            if v > *best_val {
                *best_val = v;
                *best = theta;
            }
        }
    };

    if let Ok((vals, vecs)) = conic::hermitian_eig(theta_mat) {
        // scaled principal eigenvector as a deterministic candidate
        let imax = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let principal = vecs
            .column(imax)
            .mapv(|v| v * Complex64::from(vals[imax].max(0.0).sqrt()));
        consider(anchor_clip(&principal, s), &mut best, &mut best_val);

        // square-root factor for the Gaussian draws
        let mut factor = vecs.clone();
        for (j, &lam) in vals.iter().enumerate() {
            let scale = Complex64::from(lam.max(0.0).sqrt());
            factor.column_mut(j).mapv_inplace(|v| v * scale);
        }
        for _ in 0..count {
            let draw = factor.dot(&reflect_probe(s, rng));
            consider(anchor_clip(&draw, s), &mut best, &mut best_val);
        }
    }
    best
}

/// Normalized complex Gaussian of length `s - 1` with a one appended for
/// the direct entry, the shape every reflect randomization draw probes the
/// square-root factor with.
pub(crate) fn reflect_probe(s: usize, rng: &mut ChaCha8Rng) -> Array1<Complex64> {
    let z = Array1::from_iter((0..s - 1).map(|_| {
        let re: f64 = rng.sample(rand_distr::StandardNormal);
        let im: f64 = rng.sample(rand_distr::StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }));
    let zn: f64 = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut v = Array1::zeros(s);
    for (i, val) in z.iter().enumerate() {
        v[i] = if zn > 1e-300 { val / Complex64::from(zn) } else { *val };
    }
    v[s - 1] = Complex64::new(1.0, 0.0);
    v
}

/// Re-anchors a draw so the direct entry is exactly 1 (dividing the whole
/// vector by that entry) and clips reflect-entry magnitudes above the
/// passive limit back to one while keeping their phases.
pub(crate) fn anchor_clip(draw: &Array1<Complex64>, s: usize) -> Array1<Complex64> {
    let anchor = draw[s - 1];
    let mut out = if anchor.norm() > 1e-12 {
        draw.mapv(|v| v / anchor)
    } else {
        // degenerate direct entry: keep the phases of the raw draw
        draw.mapv(|v| {
            if v.norm() > 1e-300 {
                v / Complex64::from(v.norm())
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
    };
    for v in out.iter_mut() {
        let n = v.norm();
        if n > 1.0 {
            *v /= Complex64::from(n);
        }
    }
    out[s - 1] = Complex64::new(1.0, 0.0);
    out
}

/// Snaps each reflect phase to the nearest of `levels` uniformly spaced
/// grid points (ties resolved toward the lower grid index). The direct
/// entry stays pinned to 1; magnitudes are preserved.
pub fn quantize_phases(theta: &Array1<Complex64>, levels: u32) -> Array1<Complex64> {
    let s = theta.len();
    let q = levels as f64;
    let mut out = theta.clone();
    for i in 0..s - 1 {
        let mag = theta[i].norm();
        let mut phase = theta[i].arg();
        if phase < 0.0 {
            phase += std::f64::consts::TAU;
        }
        let steps = phase * q / std::f64::consts::TAU;
        // round half-down so a midpoint maps to the lower grid index
        let idx = (steps - 0.5).ceil().rem_euclid(q);
        out[i] = Complex64::from_polar(mag, std::f64::consts::TAU * idx / q);
    }
    out
}

/// Runs the alternating design on one channel realization.
pub fn run_bcd_perfect(
    cfg: &SystemConfig,
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
    opts: &BcdOptions,
) -> Result<BcdResult> {
    cfg.validate()?;
    let s = h_s.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut theta = model::uniform_reflect(s - 1);
    let mut w = Array1::zeros(cfg.num_tx_antennas);
    let mut eta_prev = opts.eps_bcd;
    let mut eta = 0.0;
    let mut trace = Vec::new();
    let mut converged = false;

    for _ in 0..opts.max_rounds {
        let round_start = std::time::Instant::now();
        let (a, g) = effective_rows(&theta, h_s, h_p);
        let (w_new, beamform_value) = solve_beamforming(
            &a,
            &g,
            &cfg.interference_limits,
            cfg.tx_power,
            opts.eps_solver,
        )?;
        w = w_new;
        let (theta_mat, sdp_bound) = solve_reflect_sdp(
            h_s,
            h_p,
            &w,
            &cfg.interference_limits,
            opts.eps_solver,
        )?;
        theta = randomize_reflect(
            &theta_mat,
            h_s,
            h_p,
            &w,
            &cfg.interference_limits,
            opts.randomization_count,
            &theta,
            &mut rng,
        );
        eta = model::received_power(&theta, h_s, &w);
        let delta = if eta_prev > 1e-12 {
            (eta - eta_prev).abs() / eta_prev
        } else {
            (eta - eta_prev).abs()
        };
        trace.push(BcdIteration {
            beamform_value,
            sdp_bound,
            eta,
            delta,
            elapsed_s: round_start.elapsed().as_secs_f64(),
        });
        eta_prev = eta;
        if delta <= opts.eps_bcd {
            converged = true;
            break;
        }
    }

    let rate = (1.0 + eta / cfg.noise_power).log2();
    let (theta_quantized, rate_quantized) = match opts.quantization_levels {
        Some(levels) => {
            let tq = quantize_phases(&theta, levels);
            let rq = quantized_rate(cfg, &tq, h_s, h_p, &w, opts.eps_solver);
            (Some(tq), Some(rq))
        }
        None => (None, None),
    };

    Ok(BcdResult {
        theta,
        w: w.clone(),
        eta,
        rate,
        theta_quantized,
        rate_quantized,
        iterations: trace.len(),
        converged,
        trace,
    })
}

/// Rate achieved by a quantized reflect vector. The beamformer is
/// re-optimized for the quantized phases, mirroring how an exhaustive
/// search over discrete phases treats every candidate; if that solve
/// fails, the supplied beamformer is scaled back onto the feasible set
/// instead.
pub fn quantized_rate(
    cfg: &SystemConfig,
    theta_q: &Array1<Complex64>,
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
    w: &Array1<Complex64>,
    eps_solver: f64,
) -> f64 {
    let (a, g) = effective_rows(theta_q, h_s, h_p);
    if let Ok((_, value)) =
        solve_beamforming(&a, &g, &cfg.interference_limits, cfg.tx_power, eps_solver)
    {
        return (1.0 + value * value / cfg.noise_power).log2();
    }
    let mut scale = 1.0_f64;
    for (h, &lim) in h_p.iter().zip(cfg.interference_limits.iter()) {
        let it = model::received_power(theta_q, h, w);
        if it > lim {
            scale = scale.min((lim / it).sqrt());
        }
    }
    let ws = w.mapv(|v| v * scale);
    model::rate_bits(theta_q, h_s, &ws, cfg.noise_power)
}
