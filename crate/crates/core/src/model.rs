//! System and channel model for the IRS-assisted cognitive-radio downlink.
//!
//! A secondary transmitter with `M` antennas serves one single-antenna
//! secondary receiver in the presence of `K` single-antenna primary
//! receivers. `N` reflecting surfaces with `L` elements each assist the
//! secondary link. Transmitter-to-surface links and surface-to-receiver
//! links are Rician; the direct transmitter-to-receiver links are Rayleigh.
//!
//! Everything downstream works on the composite channel: an
//! `(N*L + 1) x M` matrix whose first `N*L` rows are the per-element
//! cascaded reflect paths (surface gain folded in) and whose last row is the
//! direct path. With `theta` holding the conjugated reflect coefficients
//! (last entry pinned to 1 for the direct path), the received amplitude is
//! the bilinear form `theta^H H w`, which is what the SOCP/SDP machinery
//! optimizes. [`crate::oracle::physical_received_amplitude`] evaluates the
//! same quantity directly from the raw per-surface channels and is used in
//! tests to certify this assembly.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts decibels to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Element reflection amplitude used throughout the experiments (-10 dB of
/// reflected power, i.e. an amplitude of `10^(-1/2)`).
pub const DEFAULT_REFLECT_AMPLITUDE: f64 = 0.316_227_766_016_837_94;

/// Static scenario description: array sizes, power and interference budgets,
/// noise, and fading parameters. All powers are linear (callers convert from
/// dB at the edge, see [`db_to_linear`]).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Transmit antennas at the secondary transmitter (`M`).
    pub num_tx_antennas: usize,
    /// Primary receivers to protect (`K`).
    pub num_primary: usize,
    /// Reflecting surfaces (`N`).
    pub num_surfaces: usize,
    /// Elements per surface (`L`).
    pub elements_per_surface: usize,
    /// Transmit power budget `P`.
    pub tx_power: f64,
    /// Interference-temperature limit per primary receiver, length `K`.
    pub interference_limits: Vec<f64>,
    /// Receiver noise power at the secondary user.
    pub noise_power: f64,
    /// Rician factor of the transmitter-to-surface links.
    pub rician_tx_surface: f64,
    /// Rician factor of the surface-to-primary links.
    pub rician_surface_primary: f64,
    /// Rician factor of the surface-to-secondary links.
    pub rician_surface_secondary: f64,
    /// Per-element reflection amplitude in `(0, 1]`.
    pub reflect_amplitude: f64,
}

impl SystemConfig {
    /// Baseline scenario used by most experiments: 4 transmit antennas, 2
    /// primary receivers, 2 surfaces, unit noise, Rician factors 10/1/10,
    /// -10 dB reflect gain. Power and interference limits default to 6 dB
    /// and 5 dB and are usually overridden per experiment.
    pub fn baseline(elements_per_surface: usize) -> Self {
        SystemConfig {
            num_tx_antennas: 4,
            num_primary: 2,
            num_surfaces: 2,
            elements_per_surface,
            tx_power: db_to_linear(6.0),
            interference_limits: vec![db_to_linear(5.0); 2],
            noise_power: 1.0,
            rician_tx_surface: 10.0,
            rician_surface_primary: 1.0,
            rician_surface_secondary: 10.0,
            reflect_amplitude: DEFAULT_REFLECT_AMPLITUDE,
        }
    }

    /// Total number of reflect coefficients `N * L`.
    pub fn total_elements(&self) -> usize {
        self.num_surfaces * self.elements_per_surface
    }

    /// Composite-channel row count `N * L + 1`.
    pub fn composite_rows(&self) -> usize {
        self.total_elements() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tx_antennas == 0 {
            return Err(Error::Config("need at least one transmit antenna".into()));
        }
        if self.num_surfaces == 0 || self.elements_per_surface == 0 {
            return Err(Error::Config(
                "need at least one surface with at least one element".into(),
            ));
        }
        if self.interference_limits.len() != self.num_primary {
            return Err(Error::Config(format!(
                "{} interference limits for {} primary receivers",
                self.interference_limits.len(),
                self.num_primary
            )));
        }
        if !(self.tx_power > 0.0) || !(self.noise_power > 0.0) {
            return Err(Error::Config("powers must be positive".into()));
        }
        if self.interference_limits.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::Config("interference limits must be positive".into()));
        }
        if !(self.reflect_amplitude > 0.0 && self.reflect_amplitude <= 1.0) {
            return Err(Error::Config(format!(
                "reflect amplitude {} outside (0, 1]",
                self.reflect_amplitude
            )));
        }
        let neg = |k: f64| !(k >= 0.0);
        if neg(self.rician_tx_surface)
            || neg(self.rician_surface_primary)
            || neg(self.rician_surface_secondary)
        {
            return Err(Error::Config("Rician factors must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One draw of every fading link in the scenario.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Transmitter-to-surface matrices, `N` entries of shape `L x M`.
    pub tx_surface: Vec<Array2<Complex64>>,
    /// Surface-to-secondary vectors, `N` entries of length `L`.
    pub surface_secondary: Vec<Array1<Complex64>>,
    /// Surface-to-primary vectors, indexed `[n][k]`, length `L`.
    pub surface_primary: Vec<Vec<Array1<Complex64>>>,
    /// Direct transmitter-to-secondary vector, length `M`.
    pub direct_secondary: Array1<Complex64>,
    /// Direct transmitter-to-primary vectors, `K` entries of length `M`.
    pub direct_primary: Vec<Array1<Complex64>>,
}

/// Uniform-linear-array steering vector at half-wavelength spacing:
/// entry `i` is `exp(j pi i sin(angle))`.
pub fn steering(len: usize, angle: f64) -> Array1<Complex64> {
    let s = angle.sin();
    Array1::from_iter((0..len).map(|i| {
        let phase = std::f64::consts::PI * i as f64 * s;
        Complex64::from_polar(1.0, phase)
    }))
}

/// Stream tags: each physical link draws from its own substream so a
/// realization is invariant under changes to unrelated dimensions (adding a
/// surface or a primary receiver leaves existing links untouched, which
/// keeps paired comparisons across sweep points sharp).
fn substream(seed: u64, class: u64, n: u64, k: u64) -> ChaCha8Rng {
    let tag = (class << 48) | (n << 24) | k;
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

const CLASS_TX_SURFACE: u64 = 1;
const CLASS_SURFACE_SECONDARY: u64 = 2;
const CLASS_SURFACE_PRIMARY: u64 = 3;
const CLASS_DIRECT_SECONDARY: u64 = 4;
const CLASS_DIRECT_PRIMARY: u64 = 5;

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    // unit-variance circular Gaussian
    let re: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
    let im: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn rician_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    kappa: f64,
) -> Array2<Complex64> {
    // line-of-sight component: outer product of arrival and departure
    // steering vectors at angles drawn once per link
    let arrive = steering(rows, rng.gen_range(0.0..std::f64::consts::TAU));
    let depart = steering(cols, rng.gen_range(0.0..std::f64::consts::TAU));
    let los_w = (kappa / (1.0 + kappa)).sqrt();
    let nlos_w = (1.0 / (1.0 + kappa)).sqrt();
    let mut h = Array2::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let los = arrive[r] * depart[c].conj();
            h[(r, c)] = los_w * los + nlos_w * complex_gaussian(rng);
        }
    }
    h
}

fn rician_vector(rng: &mut ChaCha8Rng, len: usize, kappa: f64) -> Array1<Complex64> {
    let los = steering(len, rng.gen_range(0.0..std::f64::consts::TAU));
    let los_w = (kappa / (1.0 + kappa)).sqrt();
    let nlos_w = (1.0 / (1.0 + kappa)).sqrt();
    Array1::from_iter(
        los.iter()
            .map(|l| los_w * l + nlos_w * complex_gaussian(rng)),
    )
}

fn rayleigh_vector(rng: &mut ChaCha8Rng, len: usize) -> Array1<Complex64> {
    Array1::from_iter((0..len).map(|_| complex_gaussian(rng)))
}

/// Draws one realization of every link. Deterministic in `(config dims,
/// seed)`; links are keyed individually, see [`substream`].
pub fn sample_channels(cfg: &SystemConfig, seed: u64) -> ChannelRealization {
    let (m, k, n, l) = (
        cfg.num_tx_antennas,
        cfg.num_primary,
        cfg.num_surfaces,
        cfg.elements_per_surface,
    );
    let tx_surface = (0..n)
        .map(|i| {
            let mut rng = substream(seed, CLASS_TX_SURFACE, i as u64, 0);
            rician_matrix(&mut rng, l, m, cfg.rician_tx_surface)
        })
        .collect();
    let surface_secondary = (0..n)
        .map(|i| {
            let mut rng = substream(seed, CLASS_SURFACE_SECONDARY, i as u64, 0);
            rician_vector(&mut rng, l, cfg.rician_surface_secondary)
        })
        .collect();
    let surface_primary = (0..n)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let mut rng = substream(seed, CLASS_SURFACE_PRIMARY, i as u64, j as u64);
                    rician_vector(&mut rng, l, cfg.rician_surface_primary)
                })
                .collect()
        })
        .collect();
    let direct_secondary = {
        let mut rng = substream(seed, CLASS_DIRECT_SECONDARY, 0, 0);
        rayleigh_vector(&mut rng, m)
    };
    let direct_primary = (0..k)
        .map(|j| {
            let mut rng = substream(seed, CLASS_DIRECT_PRIMARY, 0, j as u64);
            rayleigh_vector(&mut rng, m)
        })
        .collect();
    ChannelRealization {
        tx_surface,
        surface_secondary,
        surface_primary,
        direct_secondary,
        direct_primary,
    }
}

/// Assembles the composite channel toward a receiver with reflected vectors
/// `h_r(n)` (surface to receiver) and direct vector `h_d`.
///
/// Row `n*L + l` is `amplitude * conj(h_r(n)[l]) * F(n)[l, :]`; the last row
/// is `conj(h_d)`. The reflect coefficients then enter as a conjugated
/// vector `theta` with `|theta_i| <= 1` and last entry 1, and the received
/// amplitude is `theta^H H w`.
fn assemble_composite(
    cfg: &SystemConfig,
    tx_surface: &[Array2<Complex64>],
    h_r: &[&Array1<Complex64>],
    h_d: &Array1<Complex64>,
) -> Array2<Complex64> {
    let (m, n, l) = (
        cfg.num_tx_antennas,
        cfg.num_surfaces,
        cfg.elements_per_surface,
    );
    let amp = Complex64::from(cfg.reflect_amplitude);
    let mut h = Array2::zeros((n * l + 1, m));
    for i in 0..n {
        let f = &tx_surface[i];
        let hr = h_r[i];
        for li in 0..l {
            let w = amp * hr[li].conj();
            for c in 0..m {
                h[(i * l + li, c)] = w * f[(li, c)];
            }
        }
    }
    for c in 0..m {
        h[(n * l, c)] = h_d[c].conj();
    }
    h
}

/// Composite channel toward the secondary receiver, `(N*L + 1) x M`.
pub fn composite_secondary(cfg: &SystemConfig, ch: &ChannelRealization) -> Array2<Complex64> {
    let hr: Vec<&Array1<Complex64>> = ch.surface_secondary.iter().collect();
    assemble_composite(cfg, &ch.tx_surface, &hr, &ch.direct_secondary)
}

/// Composite channel toward primary receiver `k`, `(N*L + 1) x M`.
pub fn composite_primary(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    k: usize,
) -> Array2<Complex64> {
    let hr: Vec<&Array1<Complex64>> = ch.surface_primary.iter().map(|per_k| &per_k[k]).collect();
    assemble_composite(cfg, &ch.tx_surface, &hr, &ch.direct_primary[k])
}

/// Zeroes the reflect rows of a composite channel, leaving only the direct
/// path. Used by the no-surface baseline.
pub fn zero_reflect_rows(h: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = h.clone();
    let rows = out.nrows();
    for r in 0..rows - 1 {
        for c in 0..out.ncols() {
            out[(r, c)] = Complex64::new(0.0, 0.0);
        }
    }
    out
}

/// All-ones reflect vector (the loop's starting point): every element at
/// phase zero, direct entry pinned to 1.
pub fn uniform_reflect(total_elements: usize) -> Array1<Complex64> {
    Array1::from_elem(total_elements + 1, Complex64::new(1.0, 0.0))
}

/// Random unit-modulus reflect vector with uniform phases, direct entry
/// pinned to 1. Used by the random-phase baseline.
pub fn random_reflect(total_elements: usize, rng: &mut ChaCha8Rng) -> Array1<Complex64> {
    let mut v = Array1::from_iter((0..total_elements).map(|_| {
        Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
    }));
    v.append(ndarray::Axis(0), ndarray::arr1(&[Complex64::new(1.0, 0.0)]).view())
        .expect("append direct entry");
    v
}

/// Received complex amplitude `theta^H H w` through a composite channel.
pub fn received_amplitude(
    theta: &Array1<Complex64>,
    h: &Array2<Complex64>,
    w: &Array1<Complex64>,
) -> Complex64 {
    let hw = h.dot(w);
    theta
        .iter()
        .zip(hw.iter())
        .map(|(t, v)| t.conj() * v)
        .sum()
}

/// `|theta^H H w|^2`, the received signal power before noise scaling.
pub fn received_power(
    theta: &Array1<Complex64>,
    h: &Array2<Complex64>,
    w: &Array1<Complex64>,
) -> f64 {
    received_amplitude(theta, h, w).norm_sqr()
}

/// Achievable rate `log2(1 + |theta^H H w|^2 / noise)` in bits/s/Hz.
pub fn rate_bits(
    theta: &Array1<Complex64>,
    h: &Array2<Complex64>,
    w: &Array1<Complex64>,
    noise_power: f64,
) -> f64 {
    (1.0 + received_power(theta, h, w) / noise_power).log2()
}
