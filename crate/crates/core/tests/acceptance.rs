//! End-to-end acceptance suite.
//!
//! Thirteen checks cover the model algebra, the conic lifting identities,
//! the alternating designs (monotonicity, iteration counts, runtime
//! scaling), oracle agreement for discrete phases, robust certification
//! under sampled channel errors, statistical rate trends over surfaces,
//! power, elements and uncertainty, quantization loss, and byte-exact
//! replay of a sweep. Every test prints one summary line on success and
//! panics with the measured numbers otherwise; statistical tests print
//! their full tables (visible with --nocapture or on failure).
//!
//! The iteration-count and runtime checks share one heavy sweep, computed
//! once on first use. Expect a long wall time on a single core.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use irscr_core::conic;
use irscr_core::harness::{self, ExperimentSpec, Variant};
use irscr_core::model::{self, SystemConfig};
use irscr_core::oracle::{self, LinkTarget};
use irscr_core::perfect::{self, BcdOptions};
use irscr_core::robust::{self, RobustOptions};

fn links(cfg: &SystemConfig, seed: u64) -> (Array2<Complex64>, Vec<Array2<Complex64>>) {
    let ch = model::sample_channels(cfg, seed);
    let h_s = model::composite_secondary(cfg, &ch);
    let h_p: Vec<Array2<Complex64>> = (0..cfg.num_primary)
        .map(|k| model::composite_primary(cfg, &ch, k))
        .collect();
    (h_s, h_p)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0);
    var.sqrt()
}

/// Nearest-rank percentile of an unsorted sample, p in (0, 1].
fn percentile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let idx = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

fn median(xs: &[f64]) -> f64 {
    percentile(xs, 0.5)
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<Complex64> {
    let mut g = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            g[(i, j)] = complex_gaussian(rng);
        }
    }
    g
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Array2<Complex64> {
    let g = random_matrix(n, n, rng);
    let mut h = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = (g[(i, j)] + g[(j, i)].conj()) * Complex64::from(0.5);
        }
    }
    h
}

/// `v^H K v` for a complex matrix `K`.
fn quad_form(k: &Array2<Complex64>, v: &Array1<Complex64>) -> Complex64 {
    let kv = k.dot(v);
    v.iter().zip(kv.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Effective transmit-side row `theta^H H` of one composite channel.
fn reflect_row(theta: &Array1<Complex64>, h: &Array2<Complex64>) -> Array1<Complex64> {
    let mut out = Array1::zeros(h.ncols());
    for (i, t) in theta.iter().enumerate() {
        let tc = t.conj();
        for c in 0..h.ncols() {
            out[c] += tc * h[(i, c)];
        }
    }
    out
}

/// One design run inside the shared sweep: outer-round count, wall time,
/// and the per-round received-power sequence.
struct SweepRun {
    iterations: usize,
    wall_s: f64,
    etas: Vec<f64>,
}

struct SweepData {
    exact: BTreeMap<usize, Vec<SweepRun>>,
    robust: BTreeMap<usize, Vec<SweepRun>>,
}

static SWEEP: OnceLock<SweepData> = OnceLock::new();

/// Convergence sweep shared by the monotonicity, iteration-count and
/// runtime checks: both designs at 10 dB transmit power, 5 dB caps,
/// element counts 10 through 40; 100 exact and 50 robust seeds at 10
/// elements, 11 seeds each elsewhere.
fn sweep() -> &'static SweepData {
    SWEEP.get_or_init(|| {
        let cells = [(10usize, 100usize, 50usize), (20, 11, 11), (30, 11, 11), (40, 11, 11)];
        let mut exact = BTreeMap::new();
        let mut robust_runs = BTreeMap::new();
        for &(l, n_exact, n_rob) in &cells {
            let mut cfg = SystemConfig::baseline(l);
            cfg.tx_power = model::db_to_linear(10.0);
            let mut runs = Vec::new();
            for seed in 0..n_exact as u64 {
                let (h_s, h_p) = links(&cfg, seed);
                let opts = BcdOptions { seed, ..Default::default() };
                let t0 = Instant::now();
                let res = perfect::run_bcd_perfect(&cfg, &h_s, &h_p, &opts).expect("exact run");
                runs.push(SweepRun {
                    iterations: res.iterations,
                    wall_s: t0.elapsed().as_secs_f64(),
                    etas: res.trace.iter().map(|it| it.eta).collect(),
                });
            }
            println!("sweep: exact design, {} elements per surface, {} runs done", l, n_exact);
            exact.insert(l, runs);

            let mut runs = Vec::new();
            for seed in 0..n_rob as u64 {
                let (h_s, h_p) = links(&cfg, seed);
                let opts = RobustOptions { seed, ..Default::default() };
                let t0 = Instant::now();
                let res = robust::run_bcd_robust(&cfg, &h_s, &h_p, &opts).expect("robust run");
                runs.push(SweepRun {
                    iterations: res.iterations,
                    wall_s: t0.elapsed().as_secs_f64(),
                    etas: res.trace.iter().map(|it| it.eta_nominal).collect(),
                });
            }
            println!("sweep: robust design, {} elements per surface, {} runs done", l, n_rob);
            robust_runs.insert(l, runs);
        }
        SweepData { exact, robust: robust_runs }
    })
}

#[test]
fn c01_composite_channel_matches_direct_form() {
    let t0 = Instant::now();
    let shapes: [(usize, usize, usize, usize, usize); 3] =
        [(2, 1, 1, 2, 334), (4, 2, 2, 3, 333), (3, 3, 3, 4, 333)];
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a3c_51f2);
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for &(m, k, n, l, draws) in &shapes {
        let mut cfg = SystemConfig::baseline(l);
        cfg.num_tx_antennas = m;
        cfg.num_primary = k;
        cfg.num_surfaces = n;
        cfg.interference_limits = vec![model::db_to_linear(5.0); k];
        for d in 0..draws {
            let ch = model::sample_channels(&cfg, d as u64);
            let s = cfg.composite_rows();
            let mut theta: Array1<Complex64> = Array1::zeros(s);
            for i in 0..s - 1 {
                let mag = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.0..1.0) };
                theta[i] = Complex64::from_polar(mag, rng.gen_range(0.0..std::f64::consts::TAU));
            }
            theta[s - 1] = Complex64::new(1.0, 0.0);
            let mut w: Array1<Complex64> =
                Array1::from_iter((0..m).map(|_| complex_gaussian(&mut rng)));
            let norm = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().max(1e-12);
            let scale = Complex64::from(rng.gen_range(0.1..1.0) * cfg.tx_power.sqrt() / norm);
            w.mapv_inplace(|v| v * scale);

            let mut check = |h: &Array2<Complex64>, target: LinkTarget| {
                let composite = model::received_amplitude(&theta, h, &w);
                let direct = oracle::physical_received_amplitude(&cfg, &ch, target, &theta, &w);
                let rel = (composite - direct).norm() / direct.norm().max(1.0);
                worst = worst.max(rel);
                compared += 1;
            };
            check(&model::composite_secondary(&cfg, &ch), LinkTarget::Secondary);
            for kk in 0..k {
                check(&model::composite_primary(&cfg, &ch, kk), LinkTarget::Primary(kk));
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(
        worst <= 1e-10,
        "acceptance 01 composite-vs-direct: FAIL (worst relative gap {:.2e} over {} comparisons)",
        worst,
        compared
    );
    assert!(
        elapsed < 10.0,
        "acceptance 01 composite-vs-direct: FAIL (took {:.1} s, budget 10 s)",
        elapsed
    );
    println!(
        "acceptance 01 composite-vs-direct: PASS ({} comparisons across 3 shapes, worst relative gap {:.2e}, {:.1} s)",
        compared, worst, elapsed
    );
}

#[test]
fn c02_lifting_identities_and_embedding_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51f2_9a3c);
    let mut worst_quad = 0.0f64;
    for _ in 0..100 {
        let (s, m) = (4, 3);
        let theta = random_hermitian(s, &mut rng);
        let w_mat = random_hermitian(m, &mut rng);
        let delta = random_matrix(s, m, &mut rng);
        let p = theta.dot(&delta).dot(&w_mat);
        let lhs: Complex64 = p
            .iter()
            .zip(delta.iter())
            .map(|(a, d)| a * d.conj())
            .sum();
        let wt = w_mat.t().to_owned();
        let big = conic::kron(&wt.view(), &theta.view());
        let q = quad_form(&big, &conic::vec_cm(&delta.view()));
        let scale = lhs.re.abs().max(1.0);
        worst_quad = worst_quad.max((q.re - lhs.re).abs() / scale);
        worst_quad = worst_quad.max(q.im.abs() / scale);
        worst_quad = worst_quad.max(lhs.im.abs() / scale);
    }
    for _ in 0..100 {
        let (s, m) = (3, 4);
        let c = random_hermitian(m, &mut rng);
        let delta = random_matrix(s, m, &mut rng);
        let p = delta.dot(&c);
        let lhs: Complex64 = p
            .iter()
            .zip(delta.iter())
            .map(|(a, d)| a * d.conj())
            .sum();
        let ct = c.t().to_owned();
        let eye = Array2::from_diag_elem(s, Complex64::new(1.0, 0.0));
        let big = conic::kron(&ct.view(), &eye.view());
        let q = quad_form(&big, &conic::vec_cm(&delta.view()));
        let scale = lhs.re.abs().max(1.0);
        worst_quad = worst_quad.max((q.re - lhs.re).abs() / scale);
        worst_quad = worst_quad.max(q.im.abs() / scale);
    }
    assert!(
        worst_quad <= 1e-10,
        "acceptance 02 lifting identities: FAIL (worst trace/quadratic-form gap {:.2e})",
        worst_quad
    );

    let mut worst_eig = 0.0f64;
    for d in 0..100 {
        let n = 3 + (d % 4);
        let h = random_hermitian(n, &mut rng);
        let emb = conic::hermitian_embed(&h.view()).expect("embed");
        let (de, _) = emb.eigh(UPLO::Lower).expect("embedding eig");
        let (dh, _) = conic::hermitian_eig(&h).expect("hermitian eig");
        for i in 0..n {
            let scale = dh[i].abs().max(1.0);
            worst_eig = worst_eig.max((de[2 * i] - dh[i]).abs() / scale);
            worst_eig = worst_eig.max((de[2 * i + 1] - dh[i]).abs() / scale);
        }
    }
    assert!(
        worst_eig <= 1e-8,
        "acceptance 02 embedding spectrum: FAIL (worst duplicated-eigenvalue gap {:.2e})",
        worst_eig
    );
    println!(
        "acceptance 02 lifting identities: PASS (trace forms within {:.2e}, spectrum doubling within {:.2e})",
        worst_quad, worst_eig
    );
}

#[test]
fn c03_design_power_is_monotone_across_rounds() {
    let data = sweep();
    let tol = 10.0 * 1e-2;
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut worst_drop = 0.0f64;
    let mut scan = |runs: &[SweepRun]| {
        for run in runs {
            for pair in run.etas.windows(2) {
                checked += 1;
                worst_drop = worst_drop.max(pair[0] - pair[1]);
                if pair[1] < pair[0] - tol {
                    violations += 1;
                }
            }
        }
    };
    scan(&data.exact[&10]);
    scan(&data.robust[&10]);
    assert!(
        violations == 0,
        "acceptance 03 monotone design power: FAIL ({} of {} round pairs dropped more than {:.1e}, worst drop {:.3e})",
        violations,
        checked,
        tol,
        worst_drop
    );
    println!(
        "acceptance 03 monotone design power: PASS ({} round pairs over 100 exact + 50 robust runs, worst drop {:.3e}, tolerance {:.1e})",
        checked, worst_drop, tol
    );
}

#[test]
fn c04_iteration_counts_stay_small() {
    let data = sweep();
    let collect = |m: &BTreeMap<usize, Vec<SweepRun>>| -> Vec<f64> {
        m.values()
            .flatten()
            .map(|r| r.iterations as f64)
            .collect()
    };
    for (name, m) in [("exact", &data.exact), ("robust", &data.robust)] {
        for (l, runs) in m.iter() {
            let its: Vec<f64> = runs.iter().map(|r| r.iterations as f64).collect();
            println!(
                "  {} design, {} elements: median {} rounds, p90 {} rounds ({} runs)",
                name,
                l,
                median(&its),
                percentile(&its, 0.9),
                its.len()
            );
        }
    }
    let exact_its = collect(&data.exact);
    let robust_its = collect(&data.robust);
    let stats = [
        ("exact", median(&exact_its), percentile(&exact_its, 0.9)),
        ("robust", median(&robust_its), percentile(&robust_its, 0.9)),
    ];
    let ok = stats.iter().all(|&(_, med, p90)| med <= 7.0 && p90 <= 15.0);
    assert!(
        ok,
        "acceptance 04 iteration scale: FAIL (exact median {} p90 {}, robust median {} p90 {}; required median <= 7 and p90 <= 15 at the 1e-4 stopping tolerance)",
        stats[0].1, stats[0].2, stats[1].1, stats[1].2
    );
    println!(
        "acceptance 04 iteration scale: PASS (exact median {} p90 {}, robust median {} p90 {})",
        stats[0].1, stats[0].2, stats[1].1, stats[1].2
    );
}

#[test]
fn c05_quantized_design_tracks_discrete_optimum() {
    let mut cfg = SystemConfig::baseline(2);
    cfg.num_tx_antennas = 2;
    cfg.num_primary = 1;
    cfg.num_surfaces = 1;
    cfg.interference_limits = vec![model::db_to_linear(5.0)];
    let eps = 1e-2;
    let mut hits = 0usize;
    let mut min_ratio = f64::INFINITY;
    let mut worst_round_excess = f64::NEG_INFINITY;
    let mut worst_quant_excess = f64::NEG_INFINITY;
    for seed in 0..50u64 {
        let (h_s, h_p) = links(&cfg, seed);
        let opts = BcdOptions { seed, quantization_levels: Some(8), ..Default::default() };
        let res = perfect::run_bcd_perfect(&cfg, &h_s, &h_p, &opts).expect("exact run");
        for it in &res.trace {
            worst_round_excess = worst_round_excess.max(it.eta - it.sdp_bound);
        }

        // the quantized design, with its own re-optimized beamformer, must
        // stay below the relaxation bound evaluated at that beamformer
        let tq = res.theta_quantized.clone().expect("quantized reflect state");
        let a = reflect_row(&tq, &h_s);
        let g: Vec<Array1<Complex64>> = h_p.iter().map(|h| reflect_row(&tq, h)).collect();
        let (w_q, amp_q) =
            perfect::solve_beamforming(&a, &g, &cfg.interference_limits, cfg.tx_power, eps)
                .expect("quantized beamforming");
        let (_, bound_q) =
            perfect::solve_reflect_sdp(&h_s, &h_p, &w_q, &cfg.interference_limits, eps)
                .expect("relaxation at quantized beamformer");
        worst_quant_excess = worst_quant_excess.max(amp_q * amp_q - bound_q);

        let brute = oracle::brute_force_discrete(
            &h_s,
            &h_p,
            &cfg.interference_limits,
            cfg.tx_power,
            8,
            eps,
        )
        .expect("enumeration");
        let rate_brute = (1.0 + brute.power / cfg.noise_power).log2();
        let rate_q = res.rate_quantized.expect("quantized rate");
        let ratio = rate_q / rate_brute;
        min_ratio = min_ratio.min(ratio);
        if rate_q >= 0.95 * rate_brute - 1e-12 {
            hits += 1;
        }
    }
    assert!(
        worst_round_excess <= eps,
        "acceptance 05 discrete-oracle agreement: FAIL (a round's randomized power exceeded its relaxation bound by {:.3e}, allowance {:.0e})",
        worst_round_excess,
        eps
    );
    assert!(
        worst_quant_excess <= eps,
        "acceptance 05 discrete-oracle agreement: FAIL (quantized power exceeded the relaxation bound at its beamformer by {:.3e}, allowance {:.0e})",
        worst_quant_excess,
        eps
    );
    assert!(
        hits >= 40,
        "acceptance 05 discrete-oracle agreement: FAIL ({} of 50 instances reached 0.95x the enumerated optimum, need 40; min ratio {:.4})",
        hits,
        min_ratio
    );
    println!(
        "acceptance 05 discrete-oracle agreement: PASS ({}/50 instances at or above 0.95x enumeration, min ratio {:.4}, bound excess {:.2e}/{:.2e})",
        hits, min_ratio, worst_round_excess, worst_quant_excess
    );
}

#[test]
fn c06_robust_certificates_hold_under_sampling() {
    let mut cfg = SystemConfig::baseline(4);
    cfg.num_tx_antennas = 2;
    cfg.num_primary = 1;
    cfg.num_surfaces = 1;
    cfg.interference_limits = vec![model::db_to_linear(5.0)];
    let draws = 10_000usize;
    let mut worst_level_slack = f64::INFINITY;
    let mut worst_cap_slack = f64::INFINITY;
    for seed in 0..50u64 {
        let (h_s, h_p) = links(&cfg, seed);
        let opts = RobustOptions { seed, tau: 0.01, ..Default::default() };
        let res = robust::run_bcd_robust(&cfg, &h_s, &h_p, &opts).expect("robust run");
        let unc = robust::uncertainty_radii(0.01, &h_s, &h_p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe);
        let (sampled_min, _) = oracle::sampled_quadratic_extremes(
            &res.theta_mat,
            &res.w_mat,
            &h_s,
            unc.xi_secondary,
            draws,
            &mut rng,
        );
        worst_level_slack = worst_level_slack.min(sampled_min - res.level);
        assert!(
            sampled_min >= res.level - 1e-6,
            "acceptance 06 robust certificates: FAIL (seed {}: sampled worst signal power {:.6} undercuts certified level {:.6})",
            seed,
            sampled_min,
            res.level
        );
        let (_, sampled_max) = oracle::sampled_quadratic_extremes(
            &res.theta_mat,
            &res.w_mat,
            &h_p[0],
            unc.xi_primary[0],
            draws,
            &mut rng,
        );
        worst_cap_slack = worst_cap_slack.min(cfg.interference_limits[0] - sampled_max);
        assert!(
            sampled_max <= cfg.interference_limits[0] + 1e-6,
            "acceptance 06 robust certificates: FAIL (seed {}: sampled interference {:.6} exceeds the cap {:.6})",
            seed,
            sampled_max,
            cfg.interference_limits[0]
        );
        if (seed + 1) % 10 == 0 {
            println!("  robust certification: {} of 50 instances checked", seed + 1);
        }
    }
    println!(
        "acceptance 06 robust certificates: PASS (50 instances x {} draws per link; min slack above level {:.3e}, min slack below cap {:.3e})",
        draws, worst_level_slack, worst_cap_slack
    );
}

#[test]
fn c07_zero_uncertainty_matches_exact_design() {
    let cfg = SystemConfig::baseline(10);
    let mut exact_rates = Vec::new();
    let mut robust_rates = Vec::new();
    for seed in 0..20u64 {
        let (h_s, h_p) = links(&cfg, seed);
        let pres = perfect::run_bcd_perfect(
            &cfg,
            &h_s,
            &h_p,
            &BcdOptions { seed, ..Default::default() },
        )
        .expect("exact run");
        let rres = robust::run_bcd_robust(
            &cfg,
            &h_s,
            &h_p,
            &RobustOptions { seed, ..Default::default() },
        )
        .expect("robust run at zero radius");
        exact_rates.push(pres.rate);
        robust_rates.push(rres.rate_worst);
    }
    let me = mean(&exact_rates);
    let mr = mean(&robust_rates);
    let rel = (mr - me).abs() / me;
    assert!(
        rel <= 0.02,
        "acceptance 07 zero-radius limit: FAIL (mean robust rate {:.4} vs mean exact rate {:.4}, gap {:.2}%, allowance 2%)",
        mr,
        me,
        100.0 * rel
    );
    println!(
        "acceptance 07 zero-radius limit: PASS (20 paired instances, mean rates {:.4} vs {:.4}, gap {:.2}%)",
        mr, me, 100.0 * rel
    );
}

#[test]
fn c08_rate_grows_with_surfaces_and_power() {
    // surface-count sweep at 6 dB transmit power
    let mut surface_means = Vec::new();
    for n in 1..=3usize {
        let mut cfg = SystemConfig::baseline(10);
        cfg.num_surfaces = n;
        let mut spec = ExperimentSpec::single_point(&format!("surfaces-{}", n), cfg);
        spec.trials = 100;
        let records = harness::run_experiment(&spec, None).expect("surface sweep");
        let rates: Vec<f64> = records.iter().map(|r| r.rate).collect();
        surface_means.push(mean(&rates));
    }
    println!("  mean rate over surface count 1..3: {:?}", surface_means);

    // baselines at the surface-sweep points, 500 paired trials
    let mut surface_base = Vec::new();
    for n in 1..=3usize {
        let mut cfg = SystemConfig::baseline(10);
        cfg.num_surfaces = n;
        let mut spec = ExperimentSpec::single_point(&format!("surfaces-base-{}", n), cfg);
        spec.variants = vec![Variant::RandomReflect, Variant::NoReflect];
        spec.trials = 500;
        let records = harness::run_experiment(&spec, None).expect("surface baselines");
        let pick = |label: &str| -> f64 {
            let rates: Vec<f64> = records
                .iter()
                .filter(|r| r.variant == label)
                .map(|r| r.rate)
                .collect();
            mean(&rates)
        };
        surface_base.push((pick("random_reflect"), pick("no_reflect")));
    }

    // power sweep at two surfaces
    let mut spec = ExperimentSpec::single_point("power-sweep", SystemConfig::baseline(10));
    spec.tx_power_db = (0..=12).map(f64::from).collect();
    spec.trials = 100;
    let records = harness::run_experiment(&spec, None).expect("power sweep");
    let mut power_means = BTreeMap::new();
    for r in &records {
        power_means
            .entry(r.tx_power_db.round() as i64)
            .or_insert_with(Vec::new)
            .push(r.rate);
    }
    let power_means: BTreeMap<i64, f64> =
        power_means.into_iter().map(|(p, v)| (p, mean(&v))).collect();
    println!("  mean rate over transmit power 0..12 dB: {:?}", power_means);

    let mut spec = ExperimentSpec::single_point("power-sweep-base", SystemConfig::baseline(10));
    spec.tx_power_db = (0..=12).map(f64::from).collect();
    spec.variants = vec![Variant::RandomReflect, Variant::NoReflect];
    spec.trials = 500;
    let records = harness::run_experiment(&spec, None).expect("power baselines");
    let base_mean = |label: &str| -> BTreeMap<i64, f64> {
        let mut by_p = BTreeMap::new();
        for r in records.iter().filter(|r| r.variant == label) {
            by_p.entry(r.tx_power_db.round() as i64)
                .or_insert_with(Vec::new)
                .push(r.rate);
        }
        by_p.into_iter().map(|(p, v)| (p, mean(&v))).collect()
    };
    let rand_means = base_mean("random_reflect");
    let none_means = base_mean("no_reflect");

    // canonical point, 500 paired trials of the optimized design
    let mut spec = ExperimentSpec::single_point("ordering-500", SystemConfig::baseline(10));
    spec.trials = 500;
    let records = harness::run_experiment(&spec, None).expect("ordering point");
    let prop_500 = mean(&records.iter().map(|r| r.rate).collect::<Vec<f64>>());

    let n_up = surface_means.windows(2).all(|w| w[1] > w[0]);
    let p_vals: Vec<f64> = power_means.values().copied().collect();
    let p_up = p_vals.windows(2).all(|w| w[1] > w[0]);
    let mut order_ok = true;
    let mut order_notes = Vec::new();
    for (i, &(rm, nm)) in surface_base.iter().enumerate() {
        let prop = surface_means[i];
        if !(prop > rm && rm >= nm - 1e-12) {
            order_ok = false;
        }
        order_notes.push(format!("surfaces {}: {:.3} > {:.3} >= {:.3}", i + 1, prop, rm, nm));
    }
    for (p, prop) in &power_means {
        let rm = rand_means[p];
        let nm = none_means[p];
        if !(*prop > rm && rm >= nm - 1e-12) {
            order_ok = false;
        }
        order_notes.push(format!("power {} dB: {:.3} > {:.3} >= {:.3}", p, prop, rm, nm));
    }
    let canon_ok = prop_500 > rand_means[&6] && rand_means[&6] >= none_means[&6] - 1e-12;
    for note in &order_notes {
        println!("  ordering {}", note);
    }
    println!(
        "  ordering at 6 dB with 500 optimized trials: {:.3} > {:.3} >= {:.3}",
        prop_500, rand_means[&6], none_means[&6]
    );
    assert!(
        n_up && p_up && order_ok && canon_ok,
        "acceptance 08 surface/power trends: FAIL (increasing in surfaces: {}, increasing in power: {}, ordering optimized > random >= none at every point: {}, 500-trial ordering: {})",
        n_up,
        p_up,
        order_ok,
        canon_ok
    );
    println!(
        "acceptance 08 surface/power trends: PASS (means rise over 1..3 surfaces and 0..12 dB; optimized > random >= none at all 16 points)"
    );
}

#[test]
fn c09_rate_grows_with_elements_only_for_optimized_reflect() {
    let mut cfg = SystemConfig::baseline(10);
    cfg.num_surfaces = 1;
    cfg.tx_power = model::db_to_linear(10.0);
    cfg.interference_limits = vec![model::db_to_linear(7.0); cfg.num_primary];
    let mut spec = ExperimentSpec::single_point("element-trend", cfg);
    spec.elements = vec![10, 30, 60];
    spec.variants = vec![Variant::Perfect, Variant::RandomReflect, Variant::NoReflect];
    spec.trials = 40;
    let records = harness::run_experiment(&spec, None).expect("element sweep");

    let cell = |label: &str, l: usize| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.variant == label && r.elements == l)
            .map(|r| r.rate)
            .collect()
    };
    let ls = [10usize, 30, 60];
    let opt_means: Vec<f64> = ls.iter().map(|&l| mean(&cell("perfect", l))).collect();
    println!("  optimized mean rate over elements 10/30/60: {:?}", opt_means);
    let opt_up = opt_means.windows(2).all(|w| w[1] > w[0]);

    let mut flat_ok = true;
    let mut flat_notes = Vec::new();
    for label in ["random_reflect", "no_reflect"] {
        let mut means = Vec::new();
        let mut max_se = 0.0f64;
        for &l in &ls {
            let rates = cell(label, l);
            means.push(mean(&rates));
            max_se = max_se.max(sample_std(&rates) / (rates.len() as f64).sqrt());
        }
        let spread = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - means.iter().cloned().fold(f64::INFINITY, f64::min);
        let ok = spread <= 2.0 * max_se;
        flat_ok &= ok;
        flat_notes.push(format!(
            "{}: means {:?}, spread {:.3}, 2x standard error {:.3} -> {}",
            label,
            means,
            spread,
            2.0 * max_se,
            if ok { "flat" } else { "not flat" }
        ));
    }
    for n in &flat_notes {
        println!("  baseline {}", n);
    }
    assert!(
        opt_up && flat_ok,
        "acceptance 09 element trend: FAIL (optimized increasing: {}; {})",
        opt_up,
        flat_notes.join("; ")
    );
    println!(
        "acceptance 09 element trend: PASS (optimized means {:?} increasing, baselines flat within 2x standard error)",
        opt_means
    );
}

#[test]
fn c10_five_bit_phases_cost_under_two_percent() {
    let mut cfg = SystemConfig::baseline(10);
    cfg.num_surfaces = 1;
    let mut spec = ExperimentSpec::single_point("quantization-loss", cfg);
    spec.elements = vec![10, 30, 60];
    spec.trials = 30;
    spec.quantization_levels = Some(32);
    let records = harness::run_experiment(&spec, None).expect("quantization sweep");
    let mut all_ok = true;
    let mut notes = Vec::new();
    for &l in &[10usize, 30, 60] {
        let cont: Vec<f64> = records
            .iter()
            .filter(|r| r.elements == l)
            .map(|r| r.rate)
            .collect();
        let quant: Vec<f64> = records
            .iter()
            .filter(|r| r.elements == l)
            .map(|r| r.rate_quantized.expect("quantized rate requested"))
            .collect();
        let mc = mean(&cont);
        let mq = mean(&quant);
        let rel = (mc - mq).abs() / mc;
        let ok = rel <= 0.02;
        all_ok &= ok;
        notes.push(format!(
            "{} elements: continuous {:.4}, 32-level {:.4}, loss {:.2}%",
            l,
            mc,
            mq,
            100.0 * rel
        ));
    }
    for n in &notes {
        println!("  quantization {}", n);
    }
    assert!(
        all_ok,
        "acceptance 10 quantization loss: FAIL ({})",
        notes.join("; ")
    );
    println!("acceptance 10 quantization loss: PASS ({})", notes.join("; "));
}

#[test]
fn c11_uncertainty_degrades_rate_gracefully() {
    let taus = [0.005, 0.01, 0.02];
    let gammas = [15.0, -7.0];
    let seeds: Vec<u64> = (0..8).collect();
    let mut flips: Vec<String> = Vec::new();
    // mean robust rate and mean gap per (gamma, tau) cell
    let mut cell_means: BTreeMap<(i64, usize), f64> = BTreeMap::new();
    let mut cell_gaps: BTreeMap<(i64, usize), f64> = BTreeMap::new();
    for &gamma in &gammas {
        let mut cfg = SystemConfig::baseline(4);
        cfg.num_tx_antennas = 2;
        cfg.num_primary = 1;
        cfg.num_surfaces = 1;
        cfg.interference_limits = vec![model::db_to_linear(gamma)];
        let mut exact_rates = Vec::new();
        for &seed in &seeds {
            let (h_s, h_p) = links(&cfg, seed);
            let res = perfect::run_bcd_perfect(
                &cfg,
                &h_s,
                &h_p,
                &BcdOptions { seed, ..Default::default() },
            )
            .expect("exact run");
            exact_rates.push(res.rate);
        }
        for (ti, &tau) in taus.iter().enumerate() {
            let mut worst_rates = Vec::new();
            for (si, &seed) in seeds.iter().enumerate() {
                let (h_s, h_p) = links(&cfg, seed);
                let res = robust::run_bcd_robust(
                    &cfg,
                    &h_s,
                    &h_p,
                    &RobustOptions { seed, tau, ..Default::default() },
                )
                .expect("robust run");
                worst_rates.push(res.rate_worst);
                if res.rate_worst > exact_rates[si] + 1e-9 {
                    flips.push(format!(
                        "cap {} dB, radius scale {}, seed {}: robust {:.4} above exact {:.4}",
                        gamma, tau, seed, res.rate_worst, exact_rates[si]
                    ));
                }
            }
            let key = (gamma as i64, ti);
            cell_means.insert(key, mean(&worst_rates));
            cell_gaps.insert(key, mean(&exact_rates) - mean(&worst_rates));
            println!(
                "  cap {} dB, radius scale {}: mean robust rate {:.4}, mean exact rate {:.4}, gap {:.4}",
                gamma,
                tau,
                cell_means[&key],
                mean(&exact_rates),
                cell_gaps[&key]
            );
        }
    }
    let mut tau_monotone = true;
    for &gamma in &gammas {
        for ti in 1..taus.len() {
            if cell_means[&(gamma as i64, ti)] > cell_means[&(gamma as i64, ti - 1)] + 1e-9 {
                tau_monotone = false;
            }
        }
    }
    let mut cap_ordering = true;
    for ti in 0..taus.len() {
        if !(cell_gaps[&(15, ti)] < cell_gaps[&(-7, ti)]) {
            cap_ordering = false;
        }
    }
    for f in &flips {
        println!("  pointwise flip: {}", f);
    }
    assert!(
        flips.is_empty() && tau_monotone && cap_ordering,
        "acceptance 11 degradation trends: FAIL (pointwise robust <= exact: {} flips of {} pairs; mean nonincreasing in radius: {}; smaller gap at loose caps: {}){}",
        flips.len(),
        gammas.len() * taus.len() * seeds.len(),
        tau_monotone,
        cap_ordering,
        if flips.is_empty() { String::new() } else { format!("; {}", flips.join("; ")) }
    );
    println!(
        "acceptance 11 degradation trends: PASS ({} paired cells, no pointwise flips, mean robust rate nonincreasing in the radius, loose-cap gap smaller)",
        gammas.len() * taus.len()
    );
}

#[test]
fn c12_runtime_grows_with_problem_size() {
    let data = sweep();
    let med = |runs: &[SweepRun]| -> f64 { median(&runs.iter().map(|r| r.wall_s).collect::<Vec<f64>>()) };
    let ls = [10usize, 20, 30, 40];
    let exact_med: Vec<f64> = ls.iter().map(|l| med(&data.exact[l])).collect();
    let robust_med: Vec<f64> = ls.iter().map(|l| med(&data.robust[l])).collect();
    println!("  exact design median seconds over elements 10/20/30/40: {:?}", exact_med);
    println!("  robust design median seconds over elements 10/20/30/40: {:?}", robust_med);
    let exact_up = exact_med.windows(2).all(|w| w[1] > w[0]);
    let robust_up = robust_med.windows(2).all(|w| w[1] > w[0]);
    let robust_heavier = exact_med.iter().zip(robust_med.iter()).all(|(e, r)| r >= e);
    assert!(
        exact_up && robust_up && robust_heavier,
        "acceptance 12 runtime trend: FAIL (exact increasing: {}, robust increasing: {}, robust >= exact at each size: {}; medians {:?} vs {:?})",
        exact_up,
        robust_up,
        robust_heavier,
        exact_med,
        robust_med
    );
    println!(
        "acceptance 12 runtime trend: PASS (median wall time rises with the element count for both designs, robust at or above exact everywhere)"
    );
}

#[test]
fn c13_replay_reproduces_byte_identical_output() {
    let mut cfg = SystemConfig::baseline(2);
    cfg.num_tx_antennas = 2;
    cfg.num_primary = 1;
    cfg.num_surfaces = 1;
    cfg.interference_limits = vec![model::db_to_linear(5.0)];
    let mut spec = ExperimentSpec::single_point("replay-check", cfg);
    spec.variants = vec![
        Variant::Perfect,
        Variant::Robust,
        Variant::RandomReflect,
        Variant::NoReflect,
    ];
    spec.elements = vec![2, 4];
    spec.tau = vec![0.01];
    spec.trials = 1;
    spec.base_seed = 42;
    spec.quantization_levels = Some(8);
    let records = harness::run_experiment(&spec, None).expect("sweep");
    let dir = tempfile::tempdir().expect("temp dir");
    harness::write_outputs(&spec, &records, dir.path()).expect("write outputs");
    let loaded = harness::load_spec(&dir.path().join("manifest.json")).expect("manifest");
    let same = harness::replay_matches(&loaded, dir.path(), None).expect("replay");
    assert!(
        same,
        "acceptance 13 replay determinism: FAIL (re-running the manifest changed results.csv)"
    );
    println!(
        "acceptance 13 replay determinism: PASS ({} records, results.csv byte-identical on replay)",
        records.len()
    );
}
