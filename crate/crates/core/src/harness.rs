//! Experiment harness: grid sweeps, baselines, and reproducible outputs.
//!
//! A sweep is a JSON-described grid over element counts, power budgets,
//! interference caps and uncertainty levels, crossed with independent
//! channel trials. Every variant at a grid point reuses the trial's channel
//! seed, so comparisons between algorithms and baselines are paired. Work
//! items run in parallel but are collected in grid order, and the results
//! file contains no wall-clock data, so a repeated run of the same spec
//! reproduces `results.csv` byte for byte (timings go to a separate file).

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, SystemConfig};
use crate::perfect::{self, BcdOptions};
use crate::robust::{self, RobustOptions};

/// Decorrelates the random-phase baseline's draw from the design
/// randomization streams that use the raw trial seed.
const REFLECT_DRAW_SALT: u64 = 0xd1b5_4a32_d192_ed03;

/// One algorithm or baseline to evaluate at every grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Alternating design with exact channel knowledge.
    Perfect,
    /// Worst-case robust design; runs once per value on the `tau` axis.
    Robust,
    /// Uniformly random reflect phases, transmit side still optimized.
    RandomReflect,
    /// Reflect path disabled, transmit side optimized on the direct link.
    NoReflect,
}

impl Variant {
    fn label(&self) -> &'static str {
        match self {
            Variant::Perfect => "perfect",
            Variant::Robust => "robust",
            Variant::RandomReflect => "random_reflect",
            Variant::NoReflect => "no_reflect",
        }
    }
}

/// Grid description of one experiment. The scenario template's element
/// count, power and interference limits are overridden by the axes below;
/// everything else (antennas, receivers, fading parameters) is taken as is.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub config: SystemConfig,
    pub variants: Vec<Variant>,
    /// Elements per surface axis.
    pub elements: Vec<usize>,
    /// Transmit power axis in dB.
    pub tx_power_db: Vec<f64>,
    /// Interference cap axis in dB (applied to every primary receiver).
    pub interference_db: Vec<f64>,
    /// Uncertainty levels for the robust variant; other variants ignore it.
    /// Empty means the robust variant runs once at zero.
    #[serde(default)]
    pub tau: Vec<f64>,
    /// Independent channel draws per grid point.
    pub trials: usize,
    /// Trial `i` uses channel seed `base_seed + i` at every grid point, so
    /// sweeps are paired across the grid axes.
    pub base_seed: u64,
    pub eps_solver: f64,
    pub eps_bcd: f64,
    pub max_rounds: usize,
    pub randomization_count: usize,
    /// Optional phase quantization applied after each design run.
    #[serde(default)]
    pub quantization_levels: Option<u32>,
}

impl ExperimentSpec {
    /// Spec with single-point axes around the given scenario; callers
    /// extend the axes they sweep.
    pub fn single_point(name: &str, config: SystemConfig) -> Self {
        ExperimentSpec {
            name: name.to_string(),
            tx_power_db: vec![linear_to_db(config.tx_power)],
            interference_db: vec![linear_to_db(config.interference_limits[0])],
            elements: vec![config.elements_per_surface],
            config,
            variants: vec![Variant::Perfect],
            tau: Vec::new(),
            trials: 1,
            base_seed: 0,
            eps_solver: 1e-2,
            eps_bcd: 1e-4,
            max_rounds: 50,
            randomization_count: 100,
            quantization_levels: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::Config("no variants to run".into()));
        }
        if self.elements.is_empty() || self.tx_power_db.is_empty() || self.interference_db.is_empty()
        {
            return Err(Error::Config("every grid axis needs at least one value".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        self.config.validate()
    }
}

fn linear_to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// One row of the sweep output.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub experiment: String,
    pub variant: String,
    pub elements: usize,
    pub tx_power_db: f64,
    pub interference_db: f64,
    pub tau: f64,
    pub trial: usize,
    pub seed: u64,
    /// Headline achieved rate: randomized-design rate for the perfect
    /// variant, worst-case rate of the deployed pair for the robust
    /// variant, plain achieved rate for the baselines.
    pub rate: f64,
    /// Rate after phase quantization, when requested and applicable.
    pub rate_quantized: Option<f64>,
    /// Design objective: received power (perfect, baselines) or certified
    /// worst-case power (robust).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Wall-clock seconds; written to the timings file only, never to the
    /// results file.
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
struct WorkItem {
    variant: Variant,
    elements: usize,
    tx_power_db: f64,
    interference_db: f64,
    tau: f64,
    trial: usize,
}

fn expand(spec: &ExperimentSpec) -> Vec<WorkItem> {
    let robust_taus: Vec<f64> = if spec.tau.is_empty() { vec![0.0] } else { spec.tau.clone() };
    let mut items = Vec::new();
    for &elements in &spec.elements {
        for &tx_power_db in &spec.tx_power_db {
            for &interference_db in &spec.interference_db {
                for &variant in &spec.variants {
                    let taus: &[f64] = match variant {
                        Variant::Robust => &robust_taus,
                        _ => &[0.0],
                    };
                    for &tau in taus {
                        for trial in 0..spec.trials {
                            items.push(WorkItem {
                                variant,
                                elements,
                                tx_power_db,
                                interference_db,
                                tau,
                                trial,
                            });
                        }
                    }
                }
            }
        }
    }
    items
}

fn scenario_for(spec: &ExperimentSpec, item: &WorkItem) -> SystemConfig {
    let mut cfg = spec.config.clone();
    cfg.elements_per_surface = item.elements;
    cfg.tx_power = model::db_to_linear(item.tx_power_db);
    cfg.interference_limits = vec![model::db_to_linear(item.interference_db); cfg.num_primary];
    cfg
}

fn run_item(spec: &ExperimentSpec, item: &WorkItem) -> Result<RunRecord> {
    let cfg = scenario_for(spec, item);
    let seed = spec.base_seed + item.trial as u64;
    let ch = model::sample_channels(&cfg, seed);
    let h_s = model::composite_secondary(&cfg, &ch);
    let h_p: Vec<Array2<Complex64>> = (0..cfg.num_primary)
        .map(|k| model::composite_primary(&cfg, &ch, k))
        .collect();

    let start = std::time::Instant::now();
    let (rate, rate_quantized, objective, iterations, converged) = match item.variant {
        Variant::Perfect => {
            let opts = BcdOptions {
                eps_solver: spec.eps_solver,
                eps_bcd: spec.eps_bcd,
                max_rounds: spec.max_rounds,
                randomization_count: spec.randomization_count,
                seed,
                quantization_levels: spec.quantization_levels,
            };
            let res = perfect::run_bcd_perfect(&cfg, &h_s, &h_p, &opts)?;
            (res.rate, res.rate_quantized, res.eta, res.iterations, res.converged)
        }
        Variant::Robust => {
            let opts = RobustOptions {
                eps_solver: spec.eps_solver,
                eps_bcd: spec.eps_bcd,
                max_rounds: spec.max_rounds,
                randomization_count: spec.randomization_count,
                seed,
                tau: item.tau,
                quantization_levels: spec.quantization_levels,
            };
            let res = robust::run_bcd_robust(&cfg, &h_s, &h_p, &opts)?;
            (
                res.rate_worst,
                res.rate_worst_quantized,
                res.level,
                res.iterations,
                res.converged,
            )
        }
        Variant::RandomReflect => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ REFLECT_DRAW_SALT);
            let theta = model::random_reflect(cfg.total_elements(), &mut rng);
            let (rate, power) = beamform_rate(&cfg, &theta, &h_s, &h_p, spec.eps_solver)?;
            (rate, None, power, 1, true)
        }
        Variant::NoReflect => {
            let h_s0 = model::zero_reflect_rows(&h_s);
            let h_p0: Vec<Array2<Complex64>> =
                h_p.iter().map(|h| model::zero_reflect_rows(h)).collect();
            let theta = model::uniform_reflect(cfg.total_elements());
            let (rate, power) = beamform_rate(&cfg, &theta, &h_s0, &h_p0, spec.eps_solver)?;
            (rate, None, power, 1, true)
        }
    };
    let elapsed_s = start.elapsed().as_secs_f64();

    Ok(RunRecord {
        experiment: spec.name.clone(),
        variant: item.variant.label().to_string(),
        elements: item.elements,
        tx_power_db: item.tx_power_db,
        interference_db: item.interference_db,
        tau: item.tau,
        trial: item.trial,
        seed,
        rate,
        rate_quantized,
        objective,
        iterations,
        converged,
        elapsed_s,
    })
}

/// Transmit-side optimization for a fixed reflect vector; returns the
/// achieved rate and received power. Shared by both baselines.
fn beamform_rate(
    cfg: &SystemConfig,
    theta: &ndarray::Array1<Complex64>,
    h_s: &Array2<Complex64>,
    h_p: &[Array2<Complex64>],
    eps_solver: f64,
) -> Result<(f64, f64)> {
    let (a, g) = perfect::effective_rows(theta, h_s, h_p);
    let (_, value) =
        perfect::solve_beamforming(&a, &g, &cfg.interference_limits, cfg.tx_power, eps_solver)?;
    let power = value * value;
    Ok(((1.0 + power / cfg.noise_power).log2(), power))
}

/// Runs every work item of the sweep, in parallel when `workers` allows,
/// and returns the records in deterministic grid order.
pub fn run_experiment(spec: &ExperimentSpec, workers: Option<usize>) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    crate::pin_blas_single_thread();
    let items = expand(spec);
    let run_all = || -> Result<Vec<RunRecord>> {
        items.par_iter().map(|item| run_item(spec, item)).collect()
    };
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Io(e.to_string()))?
            .install(run_all),
        None => run_all(),
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.12e}")
}

/// Deterministic CSV serialization of the sweep results (no timing data).
pub fn results_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "experiment",
        "variant",
        "elements",
        "tx_power_db",
        "interference_db",
        "tau",
        "trial",
        "seed",
        "rate",
        "rate_quantized",
        "objective",
        "iterations",
        "converged",
    ])
    .map_err(|e| Error::Io(e.to_string()))?;
    for r in records {
        wtr.write_record([
            r.experiment.as_str(),
            r.variant.as_str(),
            &r.elements.to_string(),
            &fmt_f64(r.tx_power_db),
            &fmt_f64(r.interference_db),
            &fmt_f64(r.tau),
            &r.trial.to_string(),
            &r.seed.to_string(),
            &fmt_f64(r.rate),
            &r.rate_quantized.map(fmt_f64).unwrap_or_default(),
            &fmt_f64(r.objective),
            &r.iterations.to_string(),
            &r.converged.to_string(),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// CSV serialization of the per-item wall-clock times.
pub fn timings_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "experiment",
        "variant",
        "elements",
        "tx_power_db",
        "interference_db",
        "tau",
        "trial",
        "seed",
        "elapsed_s",
    ])
    .map_err(|e| Error::Io(e.to_string()))?;
    for r in records {
        wtr.write_record([
            r.experiment.as_str(),
            r.variant.as_str(),
            &r.elements.to_string(),
            &fmt_f64(r.tx_power_db),
            &fmt_f64(r.interference_db),
            &fmt_f64(r.tau),
            &r.trial.to_string(),
            &r.seed.to_string(),
            &fmt_f64(r.elapsed_s),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.into_inner().map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    name: &'a str,
    crate_version: &'a str,
    records: usize,
    spec: &'a ExperimentSpec,
}

/// Writes `results.csv`, `timings.csv` and `manifest.json` into `dir`
/// (created if missing).
pub fn write_outputs(spec: &ExperimentSpec, records: &[RunRecord], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("results.csv"), results_csv(records)?)
        .map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("timings.csv"), timings_csv(records)?)
        .map_err(|e| Error::Io(e.to_string()))?;
    let manifest = Manifest {
        name: &spec.name,
        crate_version: env!("CARGO_PKG_VERSION"),
        records: records.len(),
        spec,
    };
    let body = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), body).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Loads an experiment spec from a JSON file: either a bare spec or a
/// sweep manifest that wraps one under its `spec` key, so `replay` works
/// directly on the `manifest.json` a sweep wrote.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let body = fs::read(path).map_err(|e| Error::Io(e.to_string()))?;
    let value: serde_json::Value = serde_json::from_slice(&body)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let spec_value = match value.get("spec") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(spec_value).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Re-runs the sweep and checks the stored results file is reproduced byte
/// for byte.
pub fn replay_matches(spec: &ExperimentSpec, dir: &Path, workers: Option<usize>) -> Result<bool> {
    let stored =
        fs::read(dir.join("results.csv")).map_err(|e| Error::Io(e.to_string()))?;
    let records = run_experiment(spec, workers)?;
    Ok(results_csv(&records)? == stored)
}
