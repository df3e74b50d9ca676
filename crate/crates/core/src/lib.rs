//! Simulator for joint transmit beamforming and intelligent-reflecting-surface
//! (IRS) phase optimization in a cognitive-radio MISO downlink.
//!
//! A multi-antenna secondary transmitter serves a single-antenna secondary
//! receiver while keeping its interference at primary receivers below fixed
//! interference-temperature limits. One or more IRS panels assist the
//! secondary link. The crate provides:
//!
//! - the channel and composite-channel model ([`model`]),
//! - a small dense conic solver plus complex-to-real machinery ([`conic`]),
//! - the alternating SOCP/SDP design loop for perfect CSI ([`perfect`]),
//! - the worst-case robust design under ellipsoidal CSI error ([`robust`]),
//! - independent brute-force / sampling / spectrum oracles ([`oracle`]),
//! - the experiment harness and CLI plumbing ([`harness`]).

pub mod conic;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod perfect;
pub mod robust;

pub use error::{Error, Result};

/// Pins BLAS to one thread. Call once at process start, before any solver
/// work: single-threaded BLAS keeps floating-point reductions in a fixed
/// order (replay reproducibility) and avoids oversubscription when trials
/// run under rayon.
pub fn pin_blas_single_thread() {
    std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    std::env::set_var("OMP_NUM_THREADS", "1");
}
