//! Correlated receive antennas: plain vs whitened combining.
//!
//! Sweeps the receive-correlation coefficient at a fixed 20 dB SNR and
//! compares the three detectors. Plain combining treats the antennas as
//! independent diversity branches and collapses as correlation grows; the
//! whitened variant combines through the inverse of a per-frame estimate
//! of the receive-correlation matrix and holds on, tracking and then
//! beating the linear baseline.
//!
//! Run with `cargo run --release --example whitening_gain`.

use mimo_otfs::channel::ChannelProfile;
use mimo_otfs::{
    run_point, Csi, DetectorConfig, DetectorMode, ExperimentConfig, FrameParams, GuardKind,
    PointSpec,
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
        modes: Vec::new(),
        csi: Vec::new(),
        snr_db: Vec::new(),
        rho_rx: Vec::new(),
        frames_per_point: 0,
        seed: 1,
        out: None,
    };
    let frames = 3_000;
    let modes = [
        DetectorMode::Mrc,
        DetectorMode::MrcWhitened,
        DetectorMode::Lmmse,
    ];

    println!("BER at 20 dB over {frames} frames (same channels for every detector):\n");
    println!("  rho_rx      mrc         mrcw        lmmse");
    for rho_rx in [0.0, 0.3, 0.6, 0.8, 0.9] {
        let mut row = format!("  {rho_rx:5.2} ");
        for mode in modes {
            let point = PointSpec {
                mode,
                snr_db: 20.0,
                rho_rx,
                csi: Csi::Perfect,
                frames,
            };
            let p = run_point(&cfg, &point).expect("measurement");
            row.push_str(&format!("  {:.4e}", p.ber()));
        }
        println!("{row}");
    }
    println!("\nplain combining degrades by orders of magnitude as rho_rx -> 0.9;");
    println!("whitened combining stays within reach of (and below) the baseline.");
}
