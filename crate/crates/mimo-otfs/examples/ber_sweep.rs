//! A small BER-vs-SNR sweep, printed as CSV.
//!
//! Runs the iterative combiner and the linear baseline over a short SNR
//! grid on uncorrelated 2x2 channels and writes the same CSV the
//! command-line harness produces: one row per (detector, SNR) point with
//! error counts, a 95% interval, mean sweeps and mean multiply counts.
//! Every detector sees identical channels, bits and noise, so rows are
//! directly comparable; rerunning reproduces them bit for bit.
//!
//! Run with `cargo run --release --example ber_sweep`.

use mimo_otfs::channel::ChannelProfile;
use mimo_otfs::harness::CSV_HEADER;
use mimo_otfs::{
    run_experiment, Csi, DetectorConfig, DetectorMode, ExperimentConfig, FrameParams, GuardKind,
};

fn main() {
    let cfg = ExperimentConfig {
        label: String::new(),
        params: FrameParams {
            m: 16,
            n: 16,
            l_g: 4,
            delta_f: 15_000.0,
            f_c: 4.0e9,
            n_tx: 2,
            n_rx: 2,
            guard: GuardKind::Zp,
            mod_order: 4,
        },
        profile: ChannelProfile::uniform(vec![0, 1, 2, 3, 4], 1852.0),
        detector: DetectorConfig::default(),
        modes: vec![DetectorMode::Mrc, DetectorMode::Lmmse],
        csi: vec![Csi::Perfect],
        snr_db: vec![10.0, 12.5, 15.0],
        rho_rx: vec![0.0],
        frames_per_point: 2_000,
        seed: 1,
        out: None,
    };
    println!("{CSV_HEADER}");
    let mut stdout = std::io::stdout();
    run_experiment(&cfg, &mut stdout, false).expect("sweep");
}
