//! # Monte-Carlo experiment harness
//!
//! Turns the library kernels into reproducible bit-error-rate experiments:
//! a configuration names frame geometry, channel statistics, detectors,
//! channel-knowledge variants, and sweep axes; the harness expands the
//! Cartesian sweep into points, runs seeded frame loops for each point
//! (frames in parallel, points in sequence), and emits one CSV row per
//! point.
//!
//! Reproducibility rules:
//! - every frame derives its random streams from `(master seed, stream tag,
//!   snr, rho, frame index)`, so results do not depend on thread count or
//!   scheduling, and detectors compared at the same point see identical
//!   channels, data, and noise;
//! - accumulators are integer sums (bits, errors, iterations, multiply
//!   counts), merged order-independently;
//! - the CSV carries no timestamps: identical config and seed give
//!   byte-identical output.
//!
//! The reported SNR is the data-symbol SNR: noise variance is `10^(-snr/10)`
//! for unit-energy constellations, and pilot power is specified separately
//! as an excess over the data symbols.

use crate::chanest::{
    embed_pilots, estimate_dt_channel, estimate_rx_correlation, ChanestError, PilotConfig,
};
use crate::channel::{
    apply_channel, build_dt_tensor, draw_paths, noise_variance_from_snr_db, ChannelError,
    ChannelProfile,
};
use crate::detect::{
    detect_lmmse_fast, detect_mrc, detect_mrcw, CmCounter, DetectError, DetectionLayout,
    DetectorConfig, DetectorMode,
};
use crate::modem::{
    dd_dt_rows, dd_to_td, map_bits_to_grid, td_to_dd, td_to_dt, FrameParams, GuardKind, ModemError,
    Qam,
};
use crate::numerics::{DetRng, NumericsError};
use crate::oracle::{assemble_mimo_h, build_g, vectorize_grid, OracleError};
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;
use std::time::Instant;

/// Errors from configuration and experiment execution.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// The configuration is invalid or could not be parsed.
    #[error("config error: {0}")]
    Config(String),
    /// Output could not be written.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// A modem kernel failed.
    #[error(transparent)]
    Modem(#[from] ModemError),
    /// A channel kernel failed.
    #[error(transparent)]
    Channel(#[from] ChannelError),
    /// A detector failed.
    #[error(transparent)]
    Detect(#[from] DetectError),
    /// Channel estimation failed structurally.
    #[error(transparent)]
    Chanest(#[from] ChanestError),
    /// A brute-force reference construction failed.
    #[error(transparent)]
    Oracle(#[from] OracleError),
    /// A numeric kernel failed.
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Channel knowledge available to the detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Csi {
    /// Genie coefficients: the detector sees the drawn channel exactly.
    Perfect,
    /// Embedded-pilot estimation with the given excess pilot power in dB.
    Estimated {
        /// Pilot power over the mean data-symbol energy, in dB.
        beta_db: f64,
    },
}

impl Csi {
    fn beta_db(&self) -> Option<f64> {
        match self {
            Csi::Perfect => None,
            Csi::Estimated { beta_db } => Some(*beta_db),
        }
    }
}

impl std::fmt::Display for Csi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Csi::Perfect => f.write_str("perfect"),
            Csi::Estimated { beta_db } => write!(f, "est:{beta_db}"),
        }
    }
}

/// One measurement point: a detector at one spot on the sweep axes.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpec {
    /// Detector to run.
    pub mode: DetectorMode,
    /// Data-symbol SNR in dB.
    pub snr_db: f64,
    /// Receive-correlation coefficient of the drawn channels.
    pub rho_rx: f64,
    /// Channel knowledge.
    pub csi: Csi,
    /// Frames to simulate.
    pub frames: usize,
}

/// Full experiment description: fixed frame and channel statistics plus
/// the sweep axes expanded into points.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Series label appended to the mode column when nonempty (used when
    /// several experiments share one CSV, e.g. different antenna counts).
    pub label: String,
    /// Frame geometry shared by all points.
    pub params: FrameParams,
    /// Channel statistics; the receive correlation is overridden per point.
    pub profile: ChannelProfile,
    /// Detector tuning shared by all points.
    pub detector: DetectorConfig,
    /// Detectors to compare.
    pub modes: Vec<DetectorMode>,
    /// Channel-knowledge variants to compare.
    pub csi: Vec<Csi>,
    /// SNR sweep, dB.
    pub snr_db: Vec<f64>,
    /// Receive-correlation sweep.
    pub rho_rx: Vec<f64>,
    /// Frames per point.
    pub frames_per_point: usize,
    /// Master seed; all per-frame streams derive from it.
    pub seed: u64,
    /// Output path (CSV); standard output when absent.
    pub out: Option<String>,
}

impl ExperimentConfig {
    /// Number of delay taps the pilot layout must span.
    pub fn pilot_span(&self) -> usize {
        self.profile.delay_taps.iter().copied().max().unwrap_or(0) + 1
    }

    /// Validate geometry, profile, sweeps, and pilot fit.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.params
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.profile
            .validate(&self.params)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.frames_per_point == 0 {
            return Err(HarnessError::Config("frames must be at least 1".into()));
        }
        if self.modes.is_empty() || self.csi.is_empty() {
            return Err(HarnessError::Config("no detectors or CSI variants".into()));
        }
        if self.snr_db.is_empty() || self.rho_rx.is_empty() {
            return Err(HarnessError::Config("empty sweep axis".into()));
        }
        for rho in &self.rho_rx {
            if !(rho.is_finite() && rho.abs() <= 1.0) {
                return Err(HarnessError::Config(format!(
                    "receive correlation {rho} outside [-1, 1]"
                )));
            }
        }
        for csi in &self.csi {
            if let Csi::Estimated { beta_db } = csi {
                PilotConfig::new(*beta_db, self.pilot_span())
                    .validate(&self.params)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Expand the sweep axes into points: one series (mode, CSI, rho) at a
    /// time, SNR ascending within a series.
    pub fn points(&self) -> Vec<PointSpec> {
        let mut pts = Vec::new();
        for &mode in &self.modes {
            for csi in &self.csi {
                for &rho_rx in &self.rho_rx {
                    for &snr_db in &self.snr_db {
                        pts.push(PointSpec {
                            mode,
                            snr_db,
                            rho_rx,
                            csi: *csi,
                            frames: self.frames_per_point,
                        });
                    }
                }
            }
        }
        pts
    }

    /// Mode column value for this experiment's rows.
    pub fn series_name(&self, mode: DetectorMode) -> String {
        if self.label.is_empty() {
            mode.to_string()
        } else {
            format!("{mode}-{}", self.label)
        }
    }
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// Accumulated outcome of one measurement point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    /// Series name (mode plus experiment label).
    pub series: String,
    /// Detector that ran.
    pub mode: DetectorMode,
    /// Data-symbol SNR in dB.
    pub snr_db: f64,
    /// Receive correlation of the drawn channels.
    pub rho_rx: f64,
    /// Channel knowledge.
    pub csi: Csi,
    /// Frames that contributed bits (estimation failures excluded).
    pub frames: usize,
    /// Data bits counted.
    pub bits: u64,
    /// Data bits in error.
    pub bit_errors: u64,
    /// Detector sweeps summed over counted frames.
    pub iterations: u64,
    /// Complex multiplications summed over counted frames.
    pub cm_total: u64,
    /// Frames dropped because channel estimation failed.
    pub dropped: usize,
}

impl BerPoint {
    /// Raw bit-error rate.
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    /// Wilson 95% half-width on the bit-error rate.
    pub fn ci95(&self) -> f64 {
        wilson_interval_95(self.bit_errors, self.bits).1
    }

    /// Wilson 95% interval bounds `(low, high)` for overlap tests.
    pub fn ci_bounds(&self) -> (f64, f64) {
        let (center, half) = wilson_interval_95(self.bit_errors, self.bits);
        ((center - half).max(0.0), (center + half).min(1.0))
    }

    /// Mean detector sweeps per counted frame.
    pub fn mean_iters(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.iterations as f64 / self.frames as f64
        }
    }

    /// Mean complex multiplications per counted frame.
    pub fn mean_cm(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.cm_total as f64 / self.frames as f64
        }
    }

    /// One CSV data row in the documented column order.
    pub fn csv_row(&self) -> String {
        let beta = match self.csi.beta_db() {
            Some(b) => b.to_string(),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.series,
            self.snr_db,
            self.rho_rx,
            beta,
            self.frames,
            self.bits,
            self.bit_errors,
            self.ber(),
            self.ci95(),
            self.mean_iters(),
            self.mean_cm(),
            self.dropped
        )
    }
}

/// CSV header, fixed order.
pub const CSV_HEADER: &str =
    "mode,snr_db,rho_rx,beta_db,frames,bits,bit_errors,ber,ci95,mean_iters,mean_cm,dropped";

/// Wilson 95% score interval `(center, half_width)` for `errors`
/// successes in `trials`.
pub fn wilson_interval_95(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.5, 0.5);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = (z / (1.0 + z2 / n)) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (center, half)
}

/// True when two points' 95% intervals do not overlap.
pub fn ci_separated(a: &BerPoint, b: &BerPoint) -> bool {
    let (alo, ahi) = a.ci_bounds();
    let (blo, bhi) = b.ci_bounds();
    ahi < blo || bhi < alo
}

// ---------------------------------------------------------------------------
// Frame loop
// ---------------------------------------------------------------------------

// Stream tags for per-frame random streams. The channel, data, and noise
// streams are independent of the detector and of the CSI variant, so every
// detector compared at a point sees the same realizations.
const STREAM_CHANNEL: u64 = 1;
const STREAM_BITS: u64 = 2;
const STREAM_NOISE: u64 = 3;

#[derive(Debug, Default, Clone, Copy)]
struct FrameTotals {
    frames: u64,
    bits: u64,
    errors: u64,
    iterations: u64,
    cm: u64,
    dropped: u64,
}

impl FrameTotals {
    fn add(mut self, other: FrameTotals) -> FrameTotals {
        self.frames += other.frames;
        self.bits += other.bits;
        self.errors += other.errors;
        self.iterations += other.iterations;
        self.cm += other.cm;
        self.dropped += other.dropped;
        self
    }
}

struct PointContext<'a> {
    cfg: &'a ExperimentConfig,
    point: &'a PointSpec,
    qam: Qam,
    data_rows: Vec<usize>,
    layout: DetectionLayout,
    pilot: Option<PilotConfig>,
    sigma2: f64,
    profile: ChannelProfile,
    bits_per_frame: usize,
}

impl<'a> PointContext<'a> {
    fn new(cfg: &'a ExperimentConfig, point: &'a PointSpec) -> Result<Self, HarnessError> {
        let params = &cfg.params;
        let (pilot, data_rows, delays): (Option<PilotConfig>, Vec<usize>, Vec<usize>) =
            match point.csi {
                Csi::Perfect => (
                    None,
                    params.data_delay_rows().collect(),
                    cfg.profile.delay_taps.clone(),
                ),
                Csi::Estimated { beta_db } => {
                    let p = PilotConfig::new(beta_db, cfg.pilot_span());
                    p.validate(params)
                        .map_err(|e| HarnessError::Config(e.to_string()))?;
                    let rows = p.data_rows(params);
                    let delays = (0..cfg.pilot_span()).collect();
                    (Some(p), rows, delays)
                }
            };
        let layout = DetectionLayout::for_data_rows(params, data_rows.clone(), &delays)?;
        let qam = Qam::new(params.mod_order)?;
        let bits_per_frame = params.n_tx * data_rows.len() * params.n * qam.bits_per_symbol();
        Ok(PointContext {
            cfg,
            point,
            qam,
            data_rows,
            layout,
            pilot,
            sigma2: noise_variance_from_snr_db(point.snr_db),
            profile: cfg.profile.clone().with_rho_rx(point.rho_rx),
            bits_per_frame,
        })
    }

    fn run_frame(&self, frame: u64) -> Result<FrameTotals, HarnessError> {
        let params = &self.cfg.params;
        let point = self.point;
        let salt = |stream: u64| {
            [
                stream,
                point.snr_db.to_bits(),
                point.rho_rx.to_bits(),
                frame,
            ]
        };
        let mut rng_channel = DetRng::derive(self.cfg.seed, &salt(STREAM_CHANNEL));
        let mut rng_bits = DetRng::derive(self.cfg.seed, &salt(STREAM_BITS));
        let mut rng_noise = DetRng::derive(self.cfg.seed, &salt(STREAM_NOISE));

        // Transmit side.
        let bits: Vec<u8> = (0..self.bits_per_frame)
            .map(|_| rng_bits.bit() as u8)
            .collect();
        let mut dd = map_bits_to_grid(&bits, &self.data_rows, &self.qam, params)?;
        if let Some(pilot) = &self.pilot {
            embed_pilots(&mut dd, pilot, params)?;
        }
        let td = dd_to_td(&dd, params)?;

        // Channel and receive side.
        let paths = draw_paths(&self.profile, params, &mut rng_channel)?;
        let rx = apply_channel(&td, &paths, params, point.snr_db, &mut rng_noise)?;
        let y = td_to_dt(&rx, params)?;

        // Channel knowledge.
        let mut extra_cm = CmCounter::default();
        let tensor = match &self.pilot {
            None => build_dt_tensor(&paths, params)?,
            Some(pilot) => {
                let est = estimate_dt_channel(&y, pilot, params, self.sigma2)?;
                if est.is_failure() {
                    return Ok(FrameTotals {
                        dropped: 1,
                        ..FrameTotals::default()
                    });
                }
                est.to_tensor(params)?
            }
        };

        // Detection.
        let report = match point.mode {
            DetectorMode::Mrc => detect_mrc(&y, &tensor, params, &self.layout, &self.cfg.detector)?,
            DetectorMode::MrcWhitened => {
                // Combining weights come from the per-frame sample estimate of
                // the receive correlation, computed from whatever channel
                // knowledge the detector itself gets (exact coefficients under
                // perfect CSI, pilot estimates otherwise).
                let r_hat = match estimate_rx_correlation(&tensor, &mut extra_cm) {
                    Ok(est) => est.r_hat,
                    Err(ChanestError::DegenerateCorrelation(_)) => {
                        return Ok(FrameTotals {
                            dropped: 1,
                            ..FrameTotals::default()
                        });
                    }
                    Err(e) => return Err(e.into()),
                };
                detect_mrcw(
                    &y,
                    &tensor,
                    &r_hat,
                    params,
                    &self.layout,
                    &self.cfg.detector,
                )?
            }
            DetectorMode::Lmmse => {
                detect_lmmse_fast(&y, &tensor, self.sigma2, params, &self.layout)?
            }
        };

        let errors = bits
            .iter()
            .zip(&report.bits)
            .filter(|(tx, rx)| tx != rx)
            .count() as u64;
        Ok(FrameTotals {
            frames: 1,
            bits: self.bits_per_frame as u64,
            errors,
            iterations: report.iterations as u64,
            cm: report.cm.total() + extra_cm.total(),
            dropped: 0,
        })
    }
}

/// Run one measurement point: seeded frame loop, frames in parallel,
/// deterministic integer reduction.
pub fn run_point(cfg: &ExperimentConfig, point: &PointSpec) -> Result<BerPoint, HarnessError> {
    if point.frames == 0 {
        return Err(HarnessError::Config("frames must be at least 1".into()));
    }
    let ctx = PointContext::new(cfg, point)?;
    let totals = (0..point.frames as u64)
        .into_par_iter()
        .map(|f| ctx.run_frame(f))
        .try_reduce(FrameTotals::default, |a, b| Ok(a.add(b)))?;
    Ok(BerPoint {
        series: cfg.series_name(point.mode),
        mode: point.mode,
        snr_db: point.snr_db,
        rho_rx: point.rho_rx,
        csi: point.csi,
        frames: totals.frames as usize,
        bits: totals.bits,
        bit_errors: totals.errors,
        iterations: totals.iterations,
        cm_total: totals.cm,
        dropped: totals.dropped as usize,
    })
}

/// Run every point of one experiment, appending CSV rows to `out` (no
/// header) and progress lines to standard error when `progress` is set.
pub fn run_experiment<W: Write>(
    cfg: &ExperimentConfig,
    out: &mut W,
    progress: bool,
) -> Result<Vec<BerPoint>, HarnessError> {
    cfg.validate()?;
    let points = cfg.points();
    let total = points.len();
    let started = Instant::now();
    let mut results = Vec::with_capacity(total);
    for (i, point) in points.iter().enumerate() {
        let result = run_point(cfg, point)?;
        writeln!(out, "{}", result.csv_row())?;
        if progress {
            let elapsed = started.elapsed().as_secs_f64();
            let eta = elapsed / (i + 1) as f64 * (total - i - 1) as f64;
            eprintln!(
                "[{}/{}] {} snr={} rho={} csi={}: ber={:.3e} ({:.0}s elapsed, eta {:.0}s)",
                i + 1,
                total,
                result.series,
                point.snr_db,
                point.rho_rx,
                point.csi,
                result.ber(),
                elapsed,
                eta
            );
        }
        results.push(result);
    }
    Ok(results)
}

/// Run a list of experiments into one CSV (header first), on a dedicated
/// thread pool. `threads == 0` uses the default parallelism.
pub fn run_suite<W: Write + Send>(
    configs: &[ExperimentConfig],
    threads: usize,
    out: &mut W,
    progress: bool,
) -> Result<Vec<BerPoint>, HarnessError> {
    for cfg in configs {
        cfg.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        writeln!(out, "{CSV_HEADER}")?;
        let mut all = Vec::new();
        for cfg in configs {
            all.extend(run_experiment(cfg, out, progress)?);
        }
        Ok(all)
    })
}

// ---------------------------------------------------------------------------
// Oracle cross-validation
// ---------------------------------------------------------------------------

/// Result of cross-validating the fast signal paths against brute-force
/// matrix references on random instances.
#[derive(Debug, Clone)]
pub struct OracleCheckOutcome {
    /// Instances checked.
    pub instances: usize,
    /// Worst mismatch between the serial convolution and the full
    /// time-domain matrix applied to the transmitted stream.
    pub max_serial_err: f64,
    /// Worst mismatch between the demodulated DD frame and the effective
    /// DD matrix applied to the transmitted DD symbols.
    pub max_dd_err: f64,
    /// Worst mismatch between the demodulated DT frame and the per-block
    /// application of the channel tensor.
    pub max_dt_err: f64,
    /// Pass threshold on every route.
    pub tolerance: f64,
}

impl OracleCheckOutcome {
    /// True when every route agreed within tolerance on every instance.
    pub fn passed(&self) -> bool {
        self.max_serial_err < self.tolerance
            && self.max_dd_err < self.tolerance
            && self.max_dt_err < self.tolerance
    }
}

/// Cross-validate the streaming channel, the transform pipeline, and the
/// channel tensor against brute-force matrix references on random small
/// instances (alternating guard kinds, fractional Dopplers, correlated
/// antennas).
pub fn run_oracle_check(instances: usize, seed: u64) -> Result<OracleCheckOutcome, HarnessError> {
    let mut outcome = OracleCheckOutcome {
        instances,
        max_serial_err: 0.0,
        max_dd_err: 0.0,
        max_dt_err: 0.0,
        tolerance: 1e-10,
    };
    for i in 0..instances {
        let guard = if i % 2 == 0 {
            GuardKind::Zp
        } else {
            GuardKind::Cp
        };
        let params = FrameParams {
            m: 8,
            n: 8,
            l_g: 3,
            delta_f: 15e3,
            f_c: 4e9,
            n_tx: 2,
            n_rx: 2,
            guard,
            mod_order: 4,
        };
        let mut rng = DetRng::derive(seed, &[17, i as u64]);
        // Three distinct delay taps within the guard, random correlation.
        let mut delays = vec![0usize];
        delays.push(1 + rng.index(2));
        delays.push(3);
        let profile = ChannelProfile::uniform(delays, 1852.0).with_rho_rx(0.9 * rng.uniform());
        let paths = draw_paths(&profile, &params, &mut rng)?;

        let qam = Qam::new(params.mod_order)?;
        let rows: Vec<usize> = params.data_delay_rows().collect();
        let n_bits = params.n_tx * rows.len() * params.n * qam.bits_per_symbol();
        let bits: Vec<u8> = (0..n_bits).map(|_| rng.bit() as u8).collect();
        let dd = map_bits_to_grid(&bits, &rows, &qam, &params)?;
        let td = dd_to_td(&dd, &params)?;
        let rx = apply_channel(&td, &paths, &params, f64::INFINITY, &mut rng)?;

        // Route 1: the streamed convolution (guards applied and stripped)
        // against the dense operator that replays it cell by cell.
        let x_dt = dd_dt_rows(&dd, &params)?;
        let y_dt = td_to_dt(&rx, &params)?;
        for r in 0..params.n_rx {
            let mut want = vec![Complex64::new(0.0, 0.0); params.m * params.n];
            for t in 0..params.n_tx {
                let g = build_g(&paths, &params, r, t)?;
                let gs = g.mat_vec(&vectorize_grid(&x_dt.grids[t]))?;
                for (w, v) in want.iter_mut().zip(gs) {
                    *w += v;
                }
            }
            let got = vectorize_grid(&y_dt.grids[r]);
            for (a, b) in got.iter().zip(&want) {
                outcome.max_serial_err = outcome.max_serial_err.max((a - b).norm());
            }
        }

        // Route 2: demodulated DD frame against the effective DD matrix.
        let y_dd = td_to_dd(&rx, &params)?;
        let h = assemble_mimo_h(&paths, &params)?;
        let mut x_stack = Vec::with_capacity(params.n_tx * params.m * params.n);
        for grid in &dd.grids {
            x_stack.extend(vectorize_grid(grid));
        }
        let y_stack = h.mat_vec(&x_stack)?;
        for (r, grid) in y_dd.grids.iter().enumerate() {
            let got = vectorize_grid(grid);
            let base = r * params.m * params.n;
            for (k, v) in got.iter().enumerate() {
                outcome.max_dd_err = outcome.max_dd_err.max((v - y_stack[base + k]).norm());
            }
        }

        // Route 3: demodulated DT frame against the per-block tensor
        // application (the block-diagonal dual of the DD matrix).
        let tensor = build_dt_tensor(&paths, &params)?;
        for r in 0..params.n_rx {
            for m in 0..params.m {
                for n in 0..params.n {
                    let mut want = Complex64::new(0.0, 0.0);
                    for t in 0..params.n_tx {
                        for (l_idx, &l) in tensor.delays.iter().enumerate() {
                            let m_tx = match guard {
                                GuardKind::Zp => {
                                    if m < l {
                                        continue;
                                    }
                                    m - l
                                }
                                GuardKind::Cp => (m + params.m - l) % params.m,
                            };
                            want += tensor.coeff(r, t, l_idx, m, n) * x_dt.grids[t].get(m_tx, n);
                        }
                    }
                    let got = y_dt.grids[r].get(m, n);
                    outcome.max_dt_err = outcome.max_dt_err.max((got - want).norm());
                }
            }
        }
    }
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// Configuration text format
// ---------------------------------------------------------------------------

/// Configuration key reference, printed by the command-line help.
pub const CONFIG_HELP: &str = "\
Configuration file: flat `key = value` lines under `[section]` headers.
Blank lines and lines starting with `#` are ignored.

[frame]
  m         delay rows per block (required)
  n         time blocks per frame (required)
  l_g       guard length in samples (required)
  n_tx      transmit antennas (required)
  n_rx      receive antennas (required)
  mod_order QAM order; default 4
  guard     `zp` (zero padding) or `cp` (cyclic prefix); default zp
  delta_f   sub-carrier spacing in Hz; default 15000
  f_c       carrier frequency in Hz; default 4e9

[channel]
  delays    comma-separated integer delay taps; default 0,1,2,3,4
  nu_max_hz maximum Doppler shift in Hz; default 1852
  rho_tx    transmit-side correlation coefficient; default 0

[run]
  modes     detectors, comma-separated from mrc, mrcw, lmmse; default mrc
  csi       channel knowledge variants: `perfect` or `est:<beta_db>`,
            comma-separated; default perfect
  snr_db    data-symbol SNR sweep in dB, comma-separated (required)
  rho_rx    receive-correlation sweep, comma-separated; default 0
  frames    frames per point (required)
  seed      master seed; default 1
  label     series label suffix for the mode column; default empty
  out       output CSV path; default standard output";

fn parse_f64(key: &str, v: &str) -> Result<f64, HarnessError> {
    v.parse()
        .map_err(|_| HarnessError::Config(format!("{key}: bad number `{v}`")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, HarnessError> {
    v.parse()
        .map_err(|_| HarnessError::Config(format!("{key}: bad integer `{v}`")))
}

fn parse_list<T, F>(key: &str, v: &str, f: F) -> Result<Vec<T>, HarnessError>
where
    F: Fn(&str, &str) -> Result<T, HarnessError>,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(key, s))
        .collect()
}

fn parse_mode(key: &str, v: &str) -> Result<DetectorMode, HarnessError> {
    match v {
        "mrc" => Ok(DetectorMode::Mrc),
        "mrcw" => Ok(DetectorMode::MrcWhitened),
        "lmmse" => Ok(DetectorMode::Lmmse),
        other => Err(HarnessError::Config(format!(
            "{key}: unknown detector `{other}` (expected mrc, mrcw, or lmmse)"
        ))),
    }
}

fn parse_csi(key: &str, v: &str) -> Result<Csi, HarnessError> {
    if v == "perfect" {
        return Ok(Csi::Perfect);
    }
    if let Some(beta) = v.strip_prefix("est:") {
        return Ok(Csi::Estimated {
            beta_db: parse_f64(key, beta)?,
        });
    }
    Err(HarnessError::Config(format!(
        "{key}: unknown CSI variant `{v}` (expected perfect or est:<beta_db>)"
    )))
}

/// Parse the text configuration format into an experiment.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut section = String::new();
    let mut m = None;
    let mut n = None;
    let mut l_g = None;
    let mut n_tx = None;
    let mut n_rx = None;
    let mut mod_order = 4usize;
    let mut guard = GuardKind::Zp;
    let mut delta_f = 15_000.0;
    let mut f_c = 4e9;
    let mut delays = vec![0usize, 1, 2, 3, 4];
    let mut nu_max_hz = 1852.0;
    let mut rho_tx = 0.0;
    let mut modes = vec![DetectorMode::Mrc];
    let mut csi = vec![Csi::Perfect];
    let mut snr_db = None;
    let mut rho_rx = vec![0.0];
    let mut frames = None;
    let mut seed = 1u64;
    let mut label = String::new();
    let mut out = None;

    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            if !matches!(section.as_str(), "frame" | "channel" | "run") {
                return Err(HarnessError::Config(format!(
                    "line {}: unknown section [{section}]",
                    line_no + 1
                )));
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("line {}: expected key = value", line_no + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let qual = format!("{section}.{key}");
        match qual.as_str() {
            "frame.m" => m = Some(parse_usize(&qual, value)?),
            "frame.n" => n = Some(parse_usize(&qual, value)?),
            "frame.l_g" => l_g = Some(parse_usize(&qual, value)?),
            "frame.n_tx" => n_tx = Some(parse_usize(&qual, value)?),
            "frame.n_rx" => n_rx = Some(parse_usize(&qual, value)?),
            "frame.mod_order" => mod_order = parse_usize(&qual, value)?,
            "frame.guard" => {
                guard = match value {
                    "zp" => GuardKind::Zp,
                    "cp" => GuardKind::Cp,
                    other => {
                        return Err(HarnessError::Config(format!(
                            "{qual}: unknown guard `{other}` (expected zp or cp)"
                        )))
                    }
                }
            }
            "frame.delta_f" => delta_f = parse_f64(&qual, value)?,
            "frame.f_c" => f_c = parse_f64(&qual, value)?,
            "channel.delays" => delays = parse_list(&qual, value, parse_usize)?,
            "channel.nu_max_hz" => nu_max_hz = parse_f64(&qual, value)?,
            "channel.rho_tx" => rho_tx = parse_f64(&qual, value)?,
            "run.modes" => modes = parse_list(&qual, value, parse_mode)?,
            "run.csi" => csi = parse_list(&qual, value, parse_csi)?,
            "run.snr_db" => snr_db = Some(parse_list(&qual, value, parse_f64)?),
            "run.rho_rx" => rho_rx = parse_list(&qual, value, parse_f64)?,
            "run.frames" => frames = Some(parse_usize(&qual, value)?),
            "run.seed" => {
                seed = value
                    .parse()
                    .map_err(|_| HarnessError::Config(format!("{qual}: bad integer `{value}`")))?
            }
            "run.label" => label = value.to_string(),
            "run.out" => out = Some(value.to_string()),
            _ => {
                return Err(HarnessError::Config(format!(
                    "line {}: unknown key `{key}` in section [{section}]",
                    line_no + 1
                )))
            }
        }
    }

    let require = |name: &str, v: Option<usize>| {
        v.ok_or_else(|| HarnessError::Config(format!("missing required key {name}")))
    };
    let params = FrameParams {
        m: require("frame.m", m)?,
        n: require("frame.n", n)?,
        l_g: require("frame.l_g", l_g)?,
        delta_f,
        f_c,
        n_tx: require("frame.n_tx", n_tx)?,
        n_rx: require("frame.n_rx", n_rx)?,
        guard,
        mod_order,
    };
    let profile = ChannelProfile {
        path_powers: vec![1.0 / delays.len().max(1) as f64; delays.len()],
        delay_taps: delays,
        nu_max_hz,
        rho_rx: Complex64::new(0.0, 0.0),
        rho_tx: Complex64::new(rho_tx, 0.0),
    };
    let cfg = ExperimentConfig {
        label,
        params,
        profile,
        detector: DetectorConfig::default(),
        modes,
        csi,
        snr_db: snr_db
            .ok_or_else(|| HarnessError::Config("missing required key run.snr_db".into()))?,
        rho_rx,
        frames_per_point: frames
            .ok_or_else(|| HarnessError::Config("missing required key run.frames".into()))?,
        seed,
        out,
    };
    cfg.validate()?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Named preset experiment suites.
pub const PRESET_NAMES: &[(&str, &str)] = &[
    (
        "fig1-desk",
        "BER vs SNR, 16x16 grid, 1x1 and 2x2, MRC vs LMMSE, perfect CSI, 10^4 frames/point",
    ),
    (
        "fig2-desk",
        "BER vs receive correlation at 20 dB SNR, 2x2, MRC/whitened/LMMSE, 10^4 frames/point",
    ),
    (
        "fig3-desk",
        "BER vs SNR with estimated CSI (pilot power 20 and 30 dB) vs perfect, 2x2, 32x16 grid",
    ),
    (
        "fig1-paper",
        "Publication-scale fig1: 32x32 grid, 10^5 frames/point (hours-scale, offline)",
    ),
    (
        "fig2-paper",
        "Publication-scale fig2: correlation 0..0.9 step 0.1, 10^5 frames/point (offline)",
    ),
    (
        "fig3-paper",
        "Publication-scale fig3: 32x32 grid, estimated vs perfect CSI, 10^5 frames/point (offline)",
    ),
];

fn desk_params(m: usize, n: usize, l_g: usize, n_tx: usize, n_rx: usize) -> FrameParams {
    FrameParams {
        m,
        n,
        l_g,
        delta_f: 15e3,
        f_c: 4e9,
        n_tx,
        n_rx,
        guard: GuardKind::Zp,
        mod_order: 4,
    }
}

fn base_config(params: FrameParams, label: &str) -> ExperimentConfig {
    ExperimentConfig {
        label: label.to_string(),
        params,
        profile: ChannelProfile::uniform(vec![0, 1, 2, 3, 4], 1852.0),
        detector: DetectorConfig::default(),
        modes: vec![DetectorMode::Mrc],
        csi: vec![Csi::Perfect],
        snr_db: vec![15.0],
        rho_rx: vec![0.0],
        frames_per_point: 10_000,
        seed: 1,
        out: None,
    }
}

/// Experiment list for a named preset, if it exists.
pub fn preset_configs(name: &str) -> Option<Vec<ExperimentConfig>> {
    let snr_grid = |step: f64| -> Vec<f64> {
        let mut v = Vec::new();
        let mut s = 0.0;
        while s <= 20.0 + 1e-9 {
            v.push(s);
            s += step;
        }
        v
    };
    match name {
        "fig1-desk" => {
            let mut one = base_config(desk_params(16, 16, 4, 1, 1), "1x1");
            let mut two = base_config(desk_params(16, 16, 4, 2, 2), "2x2");
            for cfg in [&mut one, &mut two] {
                cfg.modes = vec![DetectorMode::Mrc, DetectorMode::Lmmse];
                cfg.snr_db = snr_grid(5.0);
            }
            Some(vec![one, two])
        }
        "fig2-desk" => {
            let mut cfg = base_config(desk_params(16, 16, 4, 2, 2), "");
            cfg.modes = vec![
                DetectorMode::Mrc,
                DetectorMode::MrcWhitened,
                DetectorMode::Lmmse,
            ];
            cfg.snr_db = vec![20.0];
            cfg.rho_rx = vec![0.0, 0.3, 0.6, 0.9];
            Some(vec![cfg])
        }
        "fig3-desk" => {
            let mut cfg = base_config(desk_params(32, 16, 5, 2, 2), "");
            cfg.modes = vec![DetectorMode::MrcWhitened, DetectorMode::Lmmse];
            cfg.csi = vec![
                Csi::Estimated { beta_db: 20.0 },
                Csi::Estimated { beta_db: 30.0 },
                Csi::Perfect,
            ];
            cfg.snr_db = snr_grid(5.0);
            cfg.rho_rx = vec![0.0, 0.9];
            cfg.frames_per_point = 2_000;
            Some(vec![cfg])
        }
        "fig1-paper" => {
            let mut one = base_config(desk_params(32, 32, 4, 1, 1), "1x1");
            let mut two = base_config(desk_params(32, 32, 4, 2, 2), "2x2");
            for cfg in [&mut one, &mut two] {
                cfg.modes = vec![DetectorMode::Mrc, DetectorMode::Lmmse];
                cfg.snr_db = snr_grid(2.5);
                cfg.frames_per_point = 100_000;
            }
            Some(vec![one, two])
        }
        "fig2-paper" => {
            let mut cfg = base_config(desk_params(32, 32, 4, 2, 2), "");
            cfg.modes = vec![
                DetectorMode::Mrc,
                DetectorMode::MrcWhitened,
                DetectorMode::Lmmse,
            ];
            cfg.snr_db = vec![20.0];
            cfg.rho_rx = (0..10).map(|i| i as f64 / 10.0).collect();
            cfg.frames_per_point = 100_000;
            Some(vec![cfg])
        }
        "fig3-paper" => {
            let mut cfg = base_config(desk_params(32, 32, 5, 2, 2), "");
            cfg.modes = vec![DetectorMode::MrcWhitened, DetectorMode::Lmmse];
            cfg.csi = vec![
                Csi::Estimated { beta_db: 20.0 },
                Csi::Estimated { beta_db: 30.0 },
                Csi::Perfect,
            ];
            cfg.snr_db = snr_grid(2.5);
            cfg.rho_rx = vec![0.0, 0.9];
            cfg.frames_per_point = 100_000;
            Some(vec![cfg])
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = base_config(
            FrameParams {
                m: 8,
                n: 8,
                l_g: 2,
                delta_f: 15e3,
                f_c: 4e9,
                n_tx: 1,
                n_rx: 1,
                guard: GuardKind::Zp,
                mod_order: 4,
            },
            "",
        );
        cfg.profile = ChannelProfile::uniform(vec![0, 1, 2], 1852.0);
        cfg.frames_per_point = 3;
        cfg.seed = 7;
        cfg
    }

    #[test]
    fn config_text_parses_with_defaults() {
        let text = "\
# comment
[frame]
m = 8
n = 8
l_g = 2
n_tx = 1
n_rx = 1

[channel]
delays = 0, 1, 2

[run]
modes = mrc, lmmse
snr_db = 10, 20
frames = 3
seed = 9
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.params.m, 8);
        assert_eq!(cfg.params.mod_order, 4);
        assert_eq!(cfg.params.guard, GuardKind::Zp);
        assert_eq!(cfg.profile.delay_taps, vec![0, 1, 2]);
        assert_eq!(cfg.modes.len(), 2);
        assert_eq!(cfg.csi, vec![Csi::Perfect]);
        assert_eq!(cfg.snr_db, vec![10.0, 20.0]);
        assert_eq!(cfg.seed, 9);
        // 2 modes x 1 csi x 1 rho x 2 snr.
        assert_eq!(cfg.points().len(), 4);
    }

    #[test]
    fn config_text_rejects_unknown_and_missing_keys() {
        assert!(parse_config("[frame]\nbogus = 1\n").is_err());
        assert!(parse_config("[weird]\nm = 8\n").is_err());
        assert!(parse_config("m = 8\n").is_err()); // key before any section
        let incomplete = "[frame]\nm = 8\nn = 8\nl_g = 2\nn_tx = 1\nn_rx = 1\n";
        let err = parse_config(incomplete).unwrap_err().to_string();
        assert!(err.contains("snr_db"), "{err}");
        assert!(parse_config("[run]\ncsi = est\n").is_err());
        assert!(parse_config("[run]\nmodes = zf\n").is_err());
    }

    #[test]
    fn zero_frames_is_rejected() {
        let cfg = tiny_config();
        let mut point = cfg.points().remove(0);
        point.frames = 0;
        assert!(run_point(&cfg, &point).is_err());
    }

    #[test]
    fn same_seed_gives_identical_points() {
        let cfg = tiny_config();
        let point = cfg.points().remove(0);
        let a = run_point(&cfg, &point).unwrap();
        let b = run_point(&cfg, &point).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let cfg = tiny_config();
        let point = cfg.points().remove(0);
        let mut by_threads = Vec::new();
        for threads in [1usize, 2] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            by_threads.push(pool.install(|| run_point(&cfg, &point).unwrap()));
        }
        assert_eq!(by_threads[0], by_threads[1]);
    }

    #[test]
    fn noise_free_detection_is_nearly_error_free() {
        // Without noise the iterative detector clears every frame except
        // the occasional pathological realization that is still converging
        // when the sweep cap hits (about one frame per hundred); a wiring
        // bug would show up as errors across the board instead.
        let mut cfg = base_config(desk_params(16, 16, 4, 2, 2), "");
        cfg.frames_per_point = 100;
        cfg.snr_db = vec![f64::INFINITY];
        let point = cfg.points().remove(0);
        let result = run_point(&cfg, &point).unwrap();
        assert_eq!(result.frames, 100);
        assert_eq!(result.dropped, 0);
        assert!(result.bits > 0);
        assert!(
            result.ber() < 1e-3,
            "ber {} with {} errors",
            result.ber(),
            result.bit_errors
        );
    }

    #[test]
    fn csv_output_is_reproducible_and_well_formed() {
        let mut cfg = tiny_config();
        cfg.snr_db = vec![10.0, 20.0];
        let mut first = Vec::new();
        let mut second = Vec::new();
        run_suite(std::slice::from_ref(&cfg), 1, &mut first, false).unwrap();
        run_suite(std::slice::from_ref(&cfg), 1, &mut second, false).unwrap();
        assert_eq!(first, second);
        let text = String::from_utf8(first).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert_eq!(row.split(',').count(), 12, "row: {row}");
            // Perfect CSI leaves the beta column empty.
            assert_eq!(row.split(',').nth(3), Some(""));
        }
    }

    #[test]
    fn estimated_csi_counts_only_data_bits() {
        let mut cfg = base_config(desk_params(32, 8, 5, 1, 1), "");
        cfg.csi = vec![Csi::Estimated { beta_db: 30.0 }];
        cfg.frames_per_point = 5;
        cfg.snr_db = vec![15.0];
        let point = cfg.points().remove(0);
        let result = run_point(&cfg, &point).unwrap();
        assert_eq!(result.frames + result.dropped, 5);
        // 18 data rows (rows 9..27), 8 blocks, 2 bits per symbol.
        assert_eq!(result.bits, result.frames as u64 * 18 * 8 * 2);
    }

    #[test]
    fn wilson_interval_matches_a_hand_computed_case() {
        let (center, half) = wilson_interval_95(1, 100);
        assert!((center - 0.028_126_8).abs() < 1e-5, "center {center}");
        assert!((half - 0.026_359_4).abs() < 1e-5, "half {half}");
        // Zero observed errors: the interval's lower edge sits exactly at
        // zero (center equals half width) and the upper edge stays positive.
        let (center, half) = wilson_interval_95(0, 1000);
        assert!((center - half).abs() < 1e-15);
        assert!(center + half > 0.0);
    }

    #[test]
    fn presets_validate() {
        for (name, _) in PRESET_NAMES {
            let configs = preset_configs(name).unwrap_or_else(|| panic!("missing {name}"));
            assert!(!configs.is_empty());
            for cfg in &configs {
                cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
        assert!(preset_configs("nope").is_none());
    }

    #[test]
    fn oracle_check_passes_on_a_few_instances() {
        let outcome = run_oracle_check(4, 11).unwrap();
        assert!(
            outcome.passed(),
            "serial {:.2e}, dd {:.2e}, dt {:.2e}",
            outcome.max_serial_err,
            outcome.max_dd_err,
            outcome.max_dt_err
        );
        assert!(outcome.max_serial_err > 0.0 || outcome.max_dd_err > 0.0);
    }

    #[test]
    fn series_names_distinguish_experiments_sharing_a_csv() {
        let configs = preset_configs("fig1-desk").unwrap();
        assert_eq!(configs[0].series_name(DetectorMode::Mrc), "mrc-1x1");
        assert_eq!(configs[1].series_name(DetectorMode::Mrc), "mrc-2x2");
        let single = preset_configs("fig2-desk").unwrap();
        assert_eq!(single[0].series_name(DetectorMode::Mrc), "mrc");
    }
}
