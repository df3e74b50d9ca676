//! Command-line front end: sweeps, single realizations, a brute-force
//! cross-check, and byte-exact replay verification.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use num_complex::Complex64;

use irscr_core::harness;
use irscr_core::model::{self, SystemConfig};
use irscr_core::oracle;
use irscr_core::perfect::{self, BcdOptions};
use irscr_core::robust::{self, RobustOptions};
use irscr_core::Result;

#[derive(Parser)]
#[command(
    name = "irscr",
    version,
    about = "Joint transmit beamforming and reflecting-surface optimization \
             for a spectrum-sharing downlink"
)]
struct Cli {
    /// Worker threads for sweeps; falls back to IRSCR_WORKERS, then all
    /// cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a sweep described by a JSON spec and write CSV outputs
    Sweep {
        /// Experiment spec (JSON)
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for results.csv, timings.csv and manifest.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one channel realization and print a JSON summary
    Single {
        #[arg(long, value_enum, default_value_t = AlgorithmArg::Perfect)]
        algorithm: AlgorithmArg,
        /// Elements per surface
        #[arg(long, default_value_t = 10)]
        elements: usize,
        #[arg(long, default_value_t = 4)]
        antennas: usize,
        /// Primary receivers to protect
        #[arg(long, default_value_t = 2)]
        primary: usize,
        #[arg(long, default_value_t = 2)]
        surfaces: usize,
        /// Transmit power budget in dB
        #[arg(long, default_value_t = 6.0)]
        power_db: f64,
        /// Interference cap per primary receiver in dB
        #[arg(long, default_value_t = 5.0)]
        interference_db: f64,
        /// Relative channel uncertainty (robust algorithm only)
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Discrete phase levels for the final quantization step
        #[arg(long)]
        quantization: Option<u32>,
        #[arg(long, default_value_t = 50)]
        max_rounds: usize,
        /// Randomization candidates per round
        #[arg(long, default_value_t = 100)]
        randomization: usize,
    },
    /// Compare the alternating design against exhaustive phase enumeration
    /// on a deliberately tiny instance
    Oracle {
        /// Elements on the single surface (the enumeration grows as
        /// levels^elements, keep this small)
        #[arg(long, default_value_t = 2)]
        elements: usize,
        /// Discrete phase levels per element
        #[arg(long, default_value_t = 8)]
        levels: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-run a sweep and verify the stored results.csv is reproduced byte
    /// for byte
    Replay {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Perfect,
    Robust,
}

fn main() -> ExitCode {
    irscr_core::pin_blas_single_thread();
    let cli = Cli::parse();
    let workers = cli.workers.or_else(|| {
        std::env::var("IRSCR_WORKERS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    let outcome = match cli.cmd {
        Cmd::Sweep { spec, out } => run_sweep(&spec, &out, workers),
        Cmd::Single {
            algorithm,
            elements,
            antennas,
            primary,
            surfaces,
            power_db,
            interference_db,
            tau,
            seed,
            quantization,
            max_rounds,
            randomization,
        } => run_single(SingleArgs {
            algorithm,
            elements,
            antennas,
            primary,
            surfaces,
            power_db,
            interference_db,
            tau,
            seed,
            quantization,
            max_rounds,
            randomization,
        }),
        Cmd::Oracle {
            elements,
            levels,
            seed,
        } => run_oracle(elements, levels, seed),
        Cmd::Replay { spec, out } => run_replay(&spec, &out, workers),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_sweep(spec_path: &PathBuf, out: &PathBuf, workers: Option<usize>) -> Result<ExitCode> {
    let spec = harness::load_spec(spec_path)?;
    let records = harness::run_experiment(&spec, workers)?;
    harness::write_outputs(&spec, &records, out)?;
    println!(
        "wrote {} records for '{}' to {}",
        records.len(),
        spec.name,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

struct SingleArgs {
    algorithm: AlgorithmArg,
    elements: usize,
    antennas: usize,
    primary: usize,
    surfaces: usize,
    power_db: f64,
    interference_db: f64,
    tau: f64,
    seed: u64,
    quantization: Option<u32>,
    max_rounds: usize,
    randomization: usize,
}

fn run_single(args: SingleArgs) -> Result<ExitCode> {
    let mut cfg = SystemConfig::baseline(args.elements);
    cfg.num_tx_antennas = args.antennas;
    cfg.num_primary = args.primary;
    cfg.num_surfaces = args.surfaces;
    cfg.tx_power = model::db_to_linear(args.power_db);
    cfg.interference_limits = vec![model::db_to_linear(args.interference_db); args.primary];
    let ch = model::sample_channels(&cfg, args.seed);
    let h_s = model::composite_secondary(&cfg, &ch);
    let h_p: Vec<Array2<Complex64>> = (0..cfg.num_primary)
        .map(|k| model::composite_primary(&cfg, &ch, k))
        .collect();

    let start = std::time::Instant::now();
    let summary = match args.algorithm {
        AlgorithmArg::Perfect => {
            let opts = BcdOptions {
                seed: args.seed,
                max_rounds: args.max_rounds,
                randomization_count: args.randomization,
                quantization_levels: args.quantization,
                ..BcdOptions::default()
            };
            let res = perfect::run_bcd_perfect(&cfg, &h_s, &h_p, &opts)?;
            let trace: Vec<_> = res
                .trace
                .iter()
                .map(|it| {
                    serde_json::json!({
                        "beamform_value": it.beamform_value,
                        "sdp_bound": it.sdp_bound,
                        "eta": it.eta,
                        "delta": it.delta,
                        "elapsed_s": it.elapsed_s,
                    })
                })
                .collect();
            serde_json::json!({
                "algorithm": "perfect",
                "rate": res.rate,
                "rate_quantized": res.rate_quantized,
                "received_power": res.eta,
                "iterations": res.iterations,
                "converged": res.converged,
                "elapsed_s": start.elapsed().as_secs_f64(),
                "trace": trace,
            })
        }
        AlgorithmArg::Robust => {
            let opts = RobustOptions {
                seed: args.seed,
                tau: args.tau,
                max_rounds: args.max_rounds,
                randomization_count: args.randomization,
                quantization_levels: args.quantization,
                ..RobustOptions::default()
            };
            let res = robust::run_bcd_robust(&cfg, &h_s, &h_p, &opts)?;
            let trace: Vec<_> = res
                .trace
                .iter()
                .map(|it| {
                    serde_json::json!({
                        "reflect_level": it.reflect_level,
                        "beamform_level": it.beamform_level,
                        "eta_nominal": it.eta_nominal,
                        "delta": it.delta,
                        "elapsed_s": it.elapsed_s,
                    })
                })
                .collect();
            serde_json::json!({
                "algorithm": "robust",
                "tau": args.tau,
                "rate_worst": res.rate_worst,
                "rate_worst_quantized": res.rate_worst_quantized,
                "rate_nominal": res.rate_nominal,
                "rate_certified": res.rate_certified,
                "certified_level": res.level,
                "iterations": res.iterations,
                "converged": res.converged,
                "init_shrinks": res.init_shrinks,
                "elapsed_s": start.elapsed().as_secs_f64(),
                "trace": trace,
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary is plain data"));
    Ok(ExitCode::SUCCESS)
}

fn run_oracle(elements: usize, levels: u32, seed: u64) -> Result<ExitCode> {
    let mut cfg = SystemConfig::baseline(elements);
    cfg.num_tx_antennas = 2;
    cfg.num_surfaces = 1;
    cfg.num_primary = 1;
    cfg.interference_limits = vec![model::db_to_linear(5.0)];
    let ch = model::sample_channels(&cfg, seed);
    let h_s = model::composite_secondary(&cfg, &ch);
    let h_p = vec![model::composite_primary(&cfg, &ch, 0)];

    let brute = oracle::brute_force_discrete(
        &h_s,
        &h_p,
        &cfg.interference_limits,
        cfg.tx_power,
        levels,
        1e-2,
    )?;
    let opts = BcdOptions {
        seed,
        quantization_levels: Some(levels),
        ..BcdOptions::default()
    };
    let res = perfect::run_bcd_perfect(&cfg, &h_s, &h_p, &opts)?;
    let rate_q = res.rate_quantized.expect("quantization was requested");
    let design_power = (2f64.powf(rate_q) - 1.0) * cfg.noise_power;
    let summary = serde_json::json!({
        "levels": levels,
        "combinations": brute.combinations,
        "exhaustive_power": brute.power,
        "design_power_continuous": res.eta,
        "design_power_quantized": design_power,
        "ratio": if brute.power > 0.0 { design_power / brute.power } else { 1.0 },
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary is plain data"));
    Ok(ExitCode::SUCCESS)
}

fn run_replay(spec_path: &PathBuf, out: &PathBuf, workers: Option<usize>) -> Result<ExitCode> {
    let spec = harness::load_spec(spec_path)?;
    if harness::replay_matches(&spec, out, workers)? {
        println!("replay OK: {} reproduced byte for byte", out.join("results.csv").display());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "replay MISMATCH: {} differs from a fresh run",
            out.join("results.csv").display()
        );
        Ok(ExitCode::FAILURE)
    }
}
