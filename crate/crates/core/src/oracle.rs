//! Independent checkers for the optimization pipeline.
//!
//! Nothing here reuses the composite-channel assembly or the relaxation
//! code paths it certifies: received amplitudes are recomputed from the raw
//! per-surface channels, discrete designs are found by exhaustive
//! enumeration, and worst-case claims are probed both by closed-form
//! adversaries (exact for rank-1 designs) and by sampling the uncertainty
//! ellipsoid. Tests freeze values produced by these oracles; the production
//! code must reproduce them.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ChannelRealization, SystemConfig};
use crate::perfect;

/// Which receiver a link-level quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkTarget {
    Secondary,
    Primary(usize),
}

/// Received amplitude computed directly from the raw channels, without the
/// composite-channel assembly: sums `h_r^H Phi F w` over surfaces plus the
/// direct term, with `Phi = amplitude * diag(conj(theta))` (the optimizer
/// stores conjugated coefficients, so conjugating here recovers the
/// physical phase shifts).
pub fn physical_received_amplitude(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    target: LinkTarget,
    theta: &Array1<Complex64>,
    w: &Array1<Complex64>,
) -> Complex64 {
    let l = cfg.elements_per_surface;
    let (h_r_per_surface, h_d): (Vec<&Array1<Complex64>>, &Array1<Complex64>) = match target {
        LinkTarget::Secondary => (
            ch.surface_secondary.iter().collect(),
            &ch.direct_secondary,
        ),
        LinkTarget::Primary(k) => (
            ch.surface_primary.iter().map(|per_k| &per_k[k]).collect(),
            &ch.direct_primary[k],
        ),
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, hr) in h_r_per_surface.iter().enumerate() {
        let f = &ch.tx_surface[n];
        for li in 0..l {
            // element coefficient: amplitude times the physical phase shift
            let coeff = cfg.reflect_amplitude * theta[n * l + li].conj();
            let fw: Complex64 = (0..cfg.num_tx_antennas).map(|c| f[(li, c)] * w[c]).sum();
            acc += hr[li].conj() * coeff * fw;
        }
    }
    let direct: Complex64 = h_d.iter().zip(w.iter()).map(|(h, wi)| h.conj() * wi).sum();
    acc + direct
}

/// Result of exhaustive enumeration over discrete reflect phases.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub theta: Array1<Complex64>,
    pub w: Array1<Complex64>,
    /// Best received power found.
    pub power: f64,
    /// Number of enumerated phase combinations.
    pub combinations: usize,
}

/// Global optimum over all `levels^(N*L)` discrete phase vectors, with the
/// exact beamforming problem solved for each candidate. Only viable for
/// small element counts; refuses anything above two million combinations.
pub fn brute_force_discrete(
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
    limits: &[f64],
    power: f64,
    levels: u32,
    eps_solver: f64,
) -> Result<BruteForceResult> {
    let s = h_s.nrows();
    let elements = s - 1;
    let total = (levels as f64).powi(elements as i32);
    if total > 2e6 {
        return Err(Error::Budget(format!(
            "{}^{} phase combinations exceed the enumeration budget",
            levels, elements
        )));
    }
    let total = total as usize;
    let mut best_power = -1.0;
    let mut best_theta = Array1::zeros(s);
    let mut best_w = Array1::zeros(h_s.ncols());

    let mut counters = vec![0u32; elements];
    for _ in 0..total {
        let theta = Array1::from_iter(
            counters
                .iter()
                .map(|&q| {
                    Complex64::from_polar(1.0, std::f64::consts::TAU * q as f64 / levels as f64)
                })
                .chain(std::iter::once(Complex64::new(1.0, 0.0))),
        );
        let mut a = Array1::zeros(h_s.ncols());
        for (i, t) in theta.iter().enumerate() {
            let tc = t.conj();
            for c in 0..h_s.ncols() {
                a[c] += tc * h_s[(i, c)];
            }
        }
        let g: Vec<Array1<Complex64>> = h_p
            .iter()
            .map(|h| {
                let mut row = Array1::zeros(h.ncols());
                for (i, t) in theta.iter().enumerate() {
                    let tc = t.conj();
                    for c in 0..h.ncols() {
                        row[c] += tc * h[(i, c)];
                    }
                }
                row
            })
            .collect();
        let (w, value) = perfect::solve_beamforming(&a, &g, limits, power, eps_solver)?;
        let p = value * value;
        if p > best_power {
            best_power = p;
            best_theta = theta;
            best_w = w;
        }
        // odometer increment over the phase indices
        for c in counters.iter_mut() {
            *c += 1;
            if *c < levels {
                break;
            }
            *c = 0;
        }
    }
    Ok(BruteForceResult {
        theta: best_theta,
        w: best_w,
        power: best_power,
        combinations: total,
    })
}

/// The perturbation achieving [`crate::robust::worst_case_power_rank1`],
/// built here independently for equality checks in tests:
/// `Delta* = -e^{j arg(theta^H H w)} sqrt(xi) theta w^H / (||theta|| ||w||)`.
pub fn adversarial_perturbation(
    theta: &Array1<Complex64>,
    w: &Array1<Complex64>,
    h_hat: &Array2<Complex64>,
    xi: f64,
) -> Array2<Complex64> {
    let nominal = amp(theta, h_hat, w);
    let phase = if nominal.norm() > 1e-300 {
        nominal / nominal.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let scale = -phase * xi.sqrt() / (norm2(theta) * norm2(w));
    let s = theta.len();
    let m = w.len();
    let mut delta = Array2::zeros((s, m));
    for i in 0..s {
        for j in 0..m {
            delta[(i, j)] = scale * theta[i] * w[j].conj();
        }
    }
    delta
}

fn amp(theta: &Array1<Complex64>, h: &Array2<Complex64>, w: &Array1<Complex64>) -> Complex64 {
    let hw = h.dot(w);
    theta
        .iter()
        .zip(hw.iter())
        .map(|(t, v)| t.conj() * v)
        .sum()
}

fn norm2(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Extreme received powers of a rank-1 design under sampled perturbations:
/// returns `(min, max)` of `|theta^H (h_hat + Delta) w|^2` over `draws`
/// perturbations, the first half on the ellipsoid boundary, the rest
/// uniform in its interior.
pub fn sampled_power_extremes(
    theta: &Array1<Complex64>,
    w: &Array1<Complex64>,
    h_hat: &Array2<Complex64>,
    xi: f64,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let nominal = amp(theta, h_hat, w);
    let (s, m) = h_hat.dim();
    let mut mn = f64::INFINITY;
    let mut mx = f64::NEG_INFINITY;
    for d in 0..draws {
        let (g, gnorm) = gaussian_matrix(s, m, rng);
        let r = radius(xi, 2 * s * m, d < draws / 2, rng);
        // theta^H Delta w without materializing Delta
        let mut tdw = Complex64::new(0.0, 0.0);
        for i in 0..s {
            let tc = theta[i].conj();
            for j in 0..m {
                tdw += tc * g[(i, j)] * w[j];
            }
        }
        let p = (nominal + tdw * (r / gnorm)).norm_sqr();
        mn = mn.min(p);
        mx = mx.max(p);
    }
    (mn, mx)
}

/// Extreme values of `tr(Theta (h_hat + Delta) W (h_hat + Delta)^H)` under
/// sampled perturbations, for matrix-valued (pre-randomization) designs.
pub fn sampled_quadratic_extremes(
    theta_mat: &Array2<Complex64>,
    w_mat: &Array2<Complex64>,
    h_hat: &Array2<Complex64>,
    xi: f64,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let (s, m) = h_hat.dim();
    let mut mn = f64::INFINITY;
    let mut mx = f64::NEG_INFINITY;
    for d in 0..draws {
        let (g, gnorm) = gaussian_matrix(s, m, rng);
        let r = radius(xi, 2 * s * m, d < draws / 2, rng);
        let scale = Complex64::from(r / gnorm);
        let mut h = h_hat.clone();
        h.zip_mut_with(&g, |hv, gv| *hv += scale * gv);
        let hw = theta_mat.dot(&h).dot(w_mat);
        // tr(Theta H W H^H) = sum_ij (Theta H W)_ij conj(H_ij)
        let mut tr = Complex64::new(0.0, 0.0);
        for i in 0..s {
            for j in 0..m {
                tr += hw[(i, j)] * h[(i, j)].conj();
            }
        }
        mn = mn.min(tr.re);
        mx = mx.max(tr.re);
    }
    (mn, mx)
}

fn gaussian_matrix(s: usize, m: usize, rng: &mut ChaCha8Rng) -> (Array2<Complex64>, f64) {
    let mut g = Array2::zeros((s, m));
    let mut norm2 = 0.0;
    for i in 0..s {
        for j in 0..m {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            let v = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            norm2 += v.norm_sqr();
            g[(i, j)] = v;
        }
    }
    (g, norm2.sqrt().max(1e-300))
}

/// Radius of a draw: on the boundary, or uniform in the ball (the
/// `1/dims`-power law makes the volume measure uniform).
fn radius(xi: f64, real_dims: usize, boundary: bool, rng: &mut ChaCha8Rng) -> f64 {
    let rmax = xi.sqrt();
    if boundary {
        rmax
    } else {
        let u: f64 = rng.gen_range(0.0..1.0);
        rmax * u.powf(1.0 / real_dims as f64)
    }
}

/// Eigenvalue profile of a Hermitian matrix: `(numerical rank, eigenvalues
/// ascending)`. Rank counts eigenvalues above `rel_tol` times the largest.
pub fn rank_profile(mat: &Array2<Complex64>, rel_tol: f64) -> (usize, Array1<f64>) {
    let (vals, _) = mat
        .eigh(UPLO::Lower)
        .expect("eigendecomposition of Hermitian matrix");
    let top = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if top <= 0.0 {
        return (0, vals);
    }
    let rank = vals.iter().filter(|&&v| v > rel_tol * top).count();
    (rank, vals)
}
