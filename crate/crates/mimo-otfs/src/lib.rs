//! Link-level simulator for MIMO orthogonal time-frequency-space (OTFS)
//! modulation with low-complexity iterative detection.
//!
//! The crate models one OTFS frame end to end: bits map to QAM symbols on a
//! delay-Doppler grid, pass through a delay-time precoder to a serial
//! stream, traverse a doubly-dispersive multipath channel with optional
//! spatial correlation at the receiver, and come back through matched
//! transforms to three detectors:
//!
//! - **`mrc`** — iterative maximum-ratio combining across delay branches
//!   and receive antennas, with hard-decision averaging between sweeps;
//! - **`mrcw`** — the same iteration combining through the inverse of the
//!   receive-correlation matrix, which restores performance when antennas
//!   are correlated;
//! - **`lmmse`** — a classical linear minimum mean square error baseline.
//!
//! Channel knowledge is either genie-provided or estimated from embedded
//! delay-Doppler pilots ([`chanest`]). Every fast path has a brute-force
//! matrix reference in [`oracle`], and the Monte-Carlo harness
//! ([`harness`]) turns the kernels into reproducible BER sweeps with CSV
//! output.
//!
//! # Where to start
//!
//! The `examples/` directory is the primary interface — one runnable
//! program per capability:
//!
//! - `modem_roundtrip` — grid transforms and their exact inverses;
//! - `channel_realizations` — drawing channels, Doppler spread, correlation;
//! - `detect_frame` — one frame through the iterative detector, with the
//!   residual trajectory and multiply counts;
//! - `whitening_gain` — correlated receivers: plain vs whitened combining;
//! - `channel_estimation` — embedded pilots, tap recovery, correlation
//!   estimates;
//! - `ber_sweep` — a small BER-vs-SNR sweep printed as CSV;
//! - `complexity` — multiply-count accounting against the closed-form
//!   budget.
//!
//! Run one with `cargo run --release --example detect_frame`.
//!
//! A thin command-line binary drives the same harness from configuration
//! files and presets (`mimo-otfs run --preset fig1-desk`); see the README.
//!
//! # Conventions
//!
//! - Delay-Doppler grids are `M x N` (delay rows by Doppler bins); the
//!   delay-time domain is reached by an inverse unitary DFT along each
//!   delay row, and the serial stream appends `L_G` guard samples per
//!   block (zero padding or a cyclic prefix).
//! - SNR is the data-symbol SNR: unit-energy constellations against noise
//!   of variance `10^(-snr_db/10)` per received sample.
//! - Everything is deterministic given a master seed; parallelism never
//!   changes results.

// Signal-processing kernels index grids and matrices the way the math is
// written; iterator rewrites would obscure the subscripts being checked
// against the brute-force references.
#![allow(clippy::needless_range_loop)]

pub mod chanest;
pub mod channel;
pub mod detect;
pub mod harness;
pub mod modem;
pub mod numerics;
pub mod oracle;

pub use chanest::{estimate_dt_channel, estimate_rx_correlation, ChannelEstimate, PilotConfig};
pub use channel::{apply_channel, build_dt_tensor, draw_paths, ChannelProfile, PathSet};
pub use detect::{
    detect_lmmse_fast, detect_mrc, detect_mrcw, CmCounter, DetectionLayout, DetectorConfig,
    DetectorMode, DetectorReport,
};
pub use harness::{
    parse_config, preset_configs, run_experiment, run_point, run_suite, BerPoint, Csi,
    ExperimentConfig, PointSpec,
};
pub use modem::{FrameParams, GuardKind, Qam};
pub use numerics::{ComplexMatrix, DetRng};
