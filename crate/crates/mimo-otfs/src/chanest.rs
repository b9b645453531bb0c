//! # Embedded-pilot channel estimation
//!
//! Practical channel knowledge is obtained from one delay-Doppler pilot
//! impulse per transmit antenna, surrounded by guard rows sized to the
//! delay spread. With zero-padded guards, each pilot's delay spread lands
//! in rows no data symbol can reach, so the per-tap channel response is
//! observed interference-free: dividing the received delay-time rows by the
//! known pilot waveform exposes `h * z^((q - l) kappa)` directly, from
//! which the Doppler is read off as a phase slope across blocks and the
//! gain as a derotated average.
//!
//! The same estimates drive a sample estimate of the receive-antenna
//! correlation matrix, normalized per transmit antenna and rescaled to a
//! unit diagonal, with an eigenvalue floor as a positive-definiteness
//! repair for small sample counts.

use crate::channel::{ChannelError, DtChannelTensor};
use crate::detect::CmCounter;
use crate::modem::{DdFrame, DtFrame, FrameParams, GuardKind};
use crate::numerics::{cholesky_lower, hermitian_eigen, ComplexMatrix, NumericsError};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Errors from pilot placement and estimation.
#[derive(Debug, thiserror::Error)]
pub enum ChanestError {
    /// Pilot layout does not fit the frame.
    #[error("invalid pilot configuration: {0}")]
    InvalidConfig(String),
    /// Inputs disagree on shape.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// Correlation estimate degenerate (an antenna observed no energy).
    #[error("degenerate correlation estimate: antenna {0} observed no energy")]
    DegenerateCorrelation(usize),
    /// An estimate record could not be parsed.
    #[error("bad estimate record: {0}")]
    BadRecord(String),
    /// A channel kernel failed.
    #[error(transparent)]
    Channel(#[from] ChannelError),
    /// A numeric kernel failed.
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Pilot placement and detection parameters.
///
/// One pilot impulse per transmit antenna at Doppler bin `N/2`, antenna `t`
/// at delay row `(span - 1) + t (2 span - 1)`, guarded by `span - 1` rows
/// on both sides and the full Doppler span. Data occupy the rows above the
/// last guard block up to the zero-padded tail.
#[derive(Debug, Clone)]
pub struct PilotConfig {
    /// Excess pilot power over the average data symbol energy, in dB.
    pub beta_db: f64,
    /// Detection threshold factor on the per-tap mean amplitude.
    pub gamma: f64,
    /// Delay taps the estimator searches (taps `0..span`).
    pub span: usize,
}

impl PilotConfig {
    /// Pilot layout with the default detection threshold.
    pub fn new(beta_db: f64, span: usize) -> Self {
        PilotConfig {
            beta_db,
            gamma: 3.0,
            span,
        }
    }

    /// Pilot Doppler bin.
    pub fn k_p(&self, params: &FrameParams) -> usize {
        params.n / 2
    }

    /// Pilot delay row of transmit antenna `t`.
    pub fn pilot_row(&self, t: usize) -> usize {
        (self.span - 1) + t * (2 * self.span - 1)
    }

    /// Pilot amplitude `sqrt(E_p)` for unit data symbol energy.
    pub fn amplitude(&self) -> f64 {
        10f64.powf(self.beta_db / 20.0)
    }

    /// First delay row available for data.
    pub fn first_data_row(&self, params: &FrameParams) -> usize {
        params.n_tx * (2 * self.span - 1)
    }

    /// Delay rows carrying data symbols.
    pub fn data_rows(&self, params: &FrameParams) -> Vec<usize> {
        (self.first_data_row(params)..params.m - params.l_g).collect()
    }

    /// Check the layout against the frame geometry.
    pub fn validate(&self, params: &FrameParams) -> Result<(), ChanestError> {
        if params.guard != GuardKind::Zp {
            return Err(ChanestError::InvalidConfig(
                "pilot layout requires zero-padded guards".into(),
            ));
        }
        if self.span == 0 {
            return Err(ChanestError::InvalidConfig("empty delay span".into()));
        }
        if self.span - 1 > params.l_g {
            return Err(ChanestError::InvalidConfig(format!(
                "delay span {} exceeds guard length {}",
                self.span, params.l_g
            )));
        }
        if !(self.beta_db.is_finite() && self.gamma > 0.0) {
            return Err(ChanestError::InvalidConfig(
                "pilot power and threshold must be finite and positive".into(),
            ));
        }
        let first_data = self.first_data_row(params);
        if first_data >= params.m - params.l_g {
            return Err(ChanestError::InvalidConfig(format!(
                "pilot and guard rows (0..{first_data}) leave no data rows below the \
                 zero-padded tail (row {})",
                params.m - params.l_g
            )));
        }
        Ok(())
    }

    /// Known pilot waveform in the delay-time domain: the row of the pilot
    /// impulse after the per-row inverse transform.
    fn pilot_dt_row(&self, params: &FrameParams) -> Vec<Complex64> {
        let n = params.n;
        let scale = self.amplitude() / (n as f64).sqrt();
        let k_p = self.k_p(params) as f64;
        (0..n)
            .map(|i| Complex64::from_polar(scale, 2.0 * PI * k_p * i as f64 / n as f64))
            .collect()
    }
}

/// Write pilot impulses into a DD frame, clearing the pilot and guard rows.
/// Data symbols in the data rows are left untouched.
pub fn embed_pilots(
    frame: &mut DdFrame,
    cfg: &PilotConfig,
    params: &FrameParams,
) -> Result<(), ChanestError> {
    cfg.validate(params)?;
    if frame.grids.len() != params.n_tx {
        return Err(ChanestError::ShapeMismatch(format!(
            "{} grids for {} transmit antennas",
            frame.grids.len(),
            params.n_tx
        )));
    }
    let first_data = cfg.first_data_row(params);
    for (t, grid) in frame.grids.iter_mut().enumerate() {
        for m in 0..first_data {
            for v in grid.row_mut(m) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        grid.set(
            cfg.pilot_row(t),
            cfg.k_p(params),
            Complex64::new(cfg.amplitude(), 0.0),
        );
    }
    Ok(())
}

/// Per-tap channel estimate: gain and normalized Doppler for every
/// (receive antenna, transmit antenna, delay) triple that passed detection.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// Receive antennas.
    pub n_rx: usize,
    /// Transmit antennas.
    pub n_tx: usize,
    /// Delay taps searched (`0..span`).
    pub delays: Vec<usize>,
    /// Detected taps, `[rx][tx][delay]` flat; `None` where below threshold.
    taps: Vec<Option<(Complex64, f64)>>,
    /// Antenna pairs with no detected taps at all.
    pub failed_pairs: usize,
}

impl ChannelEstimate {
    #[inline]
    fn idx(&self, r: usize, t: usize, l: usize) -> usize {
        (r * self.n_tx + t) * self.delays.len() + l
    }

    /// Detected tap for an antenna pair and delay index, if any.
    pub fn tap(&self, r: usize, t: usize, l: usize) -> Option<(Complex64, f64)> {
        self.taps[self.idx(r, t, l)]
    }

    /// True if some antenna pair yielded no taps (frame should be dropped).
    pub fn is_failure(&self) -> bool {
        self.failed_pairs > 0
    }

    /// Extrapolate the estimate to a full delay-time channel tensor.
    pub fn to_tensor(&self, params: &FrameParams) -> Result<DtChannelTensor, ChanestError> {
        if self.n_rx != params.n_rx || self.n_tx != params.n_tx {
            return Err(ChanestError::ShapeMismatch(format!(
                "estimate is {}x{}, frame expects {}x{}",
                self.n_rx, self.n_tx, params.n_rx, params.n_tx
            )));
        }
        Ok(DtChannelTensor::from_taps(
            params,
            self.delays.clone(),
            |r, t, l| self.taps[(r * self.n_tx + t) * self.delays.len() + l],
        )?)
    }

    /// Write detected taps as text, one `rx, tx, delay, kappa, re, im` line
    /// per tap (the channel module's record format).
    pub fn write_record<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for r in 0..self.n_rx {
            for t in 0..self.n_tx {
                for (l_idx, &l) in self.delays.iter().enumerate() {
                    if let Some((g, kappa)) = self.taps[self.idx(r, t, l_idx)] {
                        writeln!(out, "{}, {}, {}, {}, {}, {}", r, t, l, kappa, g.re, g.im)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Parse a record written by [`ChannelEstimate::write_record`].
    pub fn read_record<R: BufRead>(
        input: R,
        n_rx: usize,
        n_tx: usize,
        span: usize,
    ) -> Result<Self, ChanestError> {
        let mut taps = vec![None; n_rx * n_tx * span];
        for (line_no, line) in input.lines().enumerate() {
            let line = line.map_err(|e| ChanestError::BadRecord(e.to_string()))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(ChanestError::BadRecord(format!(
                    "line {}: expected 6 fields, got {}",
                    line_no + 1,
                    fields.len()
                )));
            }
            let err =
                |what: &str| ChanestError::BadRecord(format!("line {}: bad {what}", line_no + 1));
            let r: usize = fields[0].parse().map_err(|_| err("rx index"))?;
            let t: usize = fields[1].parse().map_err(|_| err("tx index"))?;
            let l: usize = fields[2].parse().map_err(|_| err("delay"))?;
            let kappa: f64 = fields[3].parse().map_err(|_| err("kappa"))?;
            let re: f64 = fields[4].parse().map_err(|_| err("gain"))?;
            let im: f64 = fields[5].parse().map_err(|_| err("gain"))?;
            if r >= n_rx || t >= n_tx || l >= span {
                return Err(ChanestError::BadRecord(format!(
                    "line {}: indices ({r}, {t}, {l}) outside {n_rx}x{n_tx} with span {span}",
                    line_no + 1
                )));
            }
            taps[(r * n_tx + t) * span + l] = Some((Complex64::new(re, im), kappa));
        }
        let mut failed_pairs = 0;
        for r in 0..n_rx {
            for t in 0..n_tx {
                if (0..span).all(|l| taps[(r * n_tx + t) * span + l].is_none()) {
                    failed_pairs += 1;
                }
            }
        }
        Ok(ChannelEstimate {
            n_rx,
            n_tx,
            delays: (0..span).collect(),
            taps,
            failed_pairs,
        })
    }
}

/// Estimate per-tap gains and Dopplers from the pilot observations in a
/// received delay-time frame.
///
/// For each antenna pair and searched tap, the received row `pilot_row + l`
/// is divided by the known pilot waveform, giving `a[n] = h z^((q-l) kappa)`
/// plus noise. A tap is declared present when the mean amplitude clears
/// `gamma * sigma_w / sqrt(E_p)`; its Doppler comes from the phase slope
/// between consecutive blocks and its gain from the derotated average.
pub fn estimate_dt_channel(
    y: &DtFrame,
    cfg: &PilotConfig,
    params: &FrameParams,
    sigma2: f64,
) -> Result<ChannelEstimate, ChanestError> {
    cfg.validate(params)?;
    if y.grids.len() != params.n_rx {
        return Err(ChanestError::ShapeMismatch(format!(
            "{} received grids for {} receive antennas",
            y.grids.len(),
            params.n_rx
        )));
    }
    let n = params.n;
    let pilot_row = cfg.pilot_dt_row(params);
    let threshold = cfg.gamma * sigma2.sqrt() / cfg.amplitude();
    let block = params.block_len() as f64;
    let omega = 2.0 * PI / (params.m * params.n) as f64;
    let span = cfg.span;
    let mut taps = vec![None; params.n_rx * params.n_tx * span];
    let mut failed_pairs = 0;
    let mut a = vec![Complex64::new(0.0, 0.0); n];
    for r in 0..params.n_rx {
        for t in 0..params.n_tx {
            let l_p = cfg.pilot_row(t);
            let mut detected = false;
            for l in 0..span {
                let row = y.grids[r].row(l_p + l);
                for i in 0..n {
                    a[i] = row[i] / pilot_row[i];
                }
                let mean_amp = a.iter().map(|v| v.norm()).sum::<f64>() / n as f64;
                if mean_amp <= threshold {
                    continue;
                }
                detected = true;
                // Doppler from the phase advance over one block.
                let mut slope = Complex64::new(0.0, 0.0);
                for i in 0..n - 1 {
                    slope += a[i + 1] * a[i].conj();
                }
                let kappa = slope.arg() * (params.m * params.n) as f64 / (2.0 * PI * block);
                // Gain as the Doppler-derotated average.
                let mut gain = Complex64::new(0.0, 0.0);
                for (i, v) in a.iter().enumerate() {
                    let q = (l_p + l) as f64 + i as f64 * block;
                    gain += v * Complex64::from_polar(1.0, -omega * kappa * (q - l as f64));
                }
                gain /= n as f64;
                taps[(r * params.n_tx + t) * span + l] = Some((gain, kappa));
            }
            if !detected {
                failed_pairs += 1;
            }
        }
    }
    Ok(ChannelEstimate {
        n_rx: params.n_rx,
        n_tx: params.n_tx,
        delays: (0..span).collect(),
        taps,
        failed_pairs,
    })
}

/// Receive-correlation estimate with its repair flag.
#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    /// Hermitian, unit-diagonal, positive-definite correlation matrix.
    pub r_hat: ComplexMatrix,
    /// True when an eigenvalue floor was needed to restore definiteness.
    pub repaired: bool,
}

/// Sample estimate of the receive-antenna correlation from a channel
/// tensor (estimated or genie).
///
/// For each transmit antenna the cross-antenna inner products of the tensor
/// slices are accumulated over all delays, rows, and blocks, normalized by
/// the per-antenna energies, and the per-antenna terms are summed; a final
/// rescale forces a unit diagonal. Indefinite sample estimates are repaired
/// with an eigenvalue floor before use.
pub fn estimate_rx_correlation(
    tensor: &DtChannelTensor,
    cm: &mut CmCounter,
) -> Result<CorrelationEstimate, ChanestError> {
    let n_rx = tensor.n_rx;
    let n_l = tensor.delays.len();
    let mut raw = ComplexMatrix::zeros(n_rx, n_rx);
    for t in 0..tensor.n_tx {
        // Cross products and energies for this transmit antenna.
        let mut cross = ComplexMatrix::zeros(n_rx, n_rx);
        let mut energy = vec![0.0f64; n_rx];
        for r in 0..n_rx {
            for rp in 0..=r {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..n_l {
                    for m in 0..tensor.m {
                        let sr = tensor.slice(r, t, l, m);
                        let srp = tensor.slice(rp, t, l, m);
                        for n in 0..tensor.n {
                            acc += sr[n] * srp[n].conj();
                        }
                        cm.correlation_estimation += tensor.n as u64;
                    }
                }
                cross.set(r, rp, acc);
                cross.set(rp, r, acc.conj());
                if r == rp {
                    energy[r] = acc.re;
                }
            }
        }
        if energy.iter().any(|&e| e <= 0.0) {
            // An antenna saw nothing from this transmit antenna; skip the
            // whole term rather than divide by zero.
            continue;
        }
        for r in 0..n_rx {
            for rp in 0..n_rx {
                let denom = (energy[r] * energy[rp]).sqrt();
                raw.add_to(r, rp, cross.get(r, rp) / denom);
            }
        }
    }
    for r in 0..n_rx {
        if raw.get(r, r).re <= 0.0 {
            return Err(ChanestError::DegenerateCorrelation(r));
        }
    }
    let mut r_hat = unit_diagonal_rescale(&raw);
    // Definiteness repair: floor the spectrum, then restore the diagonal.
    let repaired = cholesky_lower(&r_hat).is_err();
    if repaired {
        let (mut evals, v) = hermitian_eigen(&r_hat)?;
        for e in evals.iter_mut() {
            *e = e.max(1e-6);
        }
        let mut floored = ComplexMatrix::zeros(n_rx, n_rx);
        for i in 0..n_rx {
            for j in 0..n_rx {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n_rx {
                    acc += v.get(i, k) * evals[k] * v.get(j, k).conj();
                }
                floored.set(i, j, acc);
            }
        }
        r_hat = unit_diagonal_rescale(&floored);
    }
    Ok(CorrelationEstimate { r_hat, repaired })
}

fn unit_diagonal_rescale(raw: &ComplexMatrix) -> ComplexMatrix {
    let n = raw.rows();
    let mut out = ComplexMatrix::identity(n);
    for r in 0..n {
        for rp in 0..n {
            if r != rp {
                let denom = (raw.get(r, r).re * raw.get(rp, rp).re).sqrt();
                out.set(r, rp, raw.get(r, rp) / denom);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        apply_channel, build_dt_tensor, draw_paths, noise_variance_from_snr_db, ChannelProfile,
        PathSet,
    };
    use crate::modem::{dd_to_td, map_bits_to_grid, td_to_dt, Qam};
    use crate::numerics::DetRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pilot_params(n_tx: usize, n_rx: usize) -> FrameParams {
        FrameParams {
            m: 32,
            n: 16,
            l_g: 5,
            delta_f: 15e3,
            f_c: 4e9,
            n_tx,
            n_rx,
            guard: GuardKind::Zp,
            mod_order: 4,
        }
    }

    fn pilot_frame(
        cfg: &PilotConfig,
        params: &FrameParams,
        rng: &mut DetRng,
    ) -> (DdFrame, Vec<u8>) {
        let qam = Qam::new(params.mod_order).unwrap();
        let rows = cfg.data_rows(params);
        let n_bits = params.n_tx * rows.len() * params.n * qam.bits_per_symbol();
        let bits: Vec<u8> = (0..n_bits).map(|_| rng.bit() as u8).collect();
        let mut dd = map_bits_to_grid(&bits, &rows, &qam, params).unwrap();
        embed_pilots(&mut dd, cfg, params).unwrap();
        (dd, bits)
    }

    #[test]
    fn layout_matches_the_worked_geometry() {
        // Single antenna, 32 rows, span 5: pilot at row 4, guards 0..=8,
        // data rows 9..=26, zero-padded tail 27..=31.
        let params = pilot_params(1, 1);
        let cfg = PilotConfig::new(30.0, 5);
        cfg.validate(&params).unwrap();
        assert_eq!(cfg.pilot_row(0), 4);
        assert_eq!(cfg.first_data_row(&params), 9);
        assert_eq!(cfg.data_rows(&params), (9..27).collect::<Vec<_>>());
        assert_eq!(cfg.k_p(&params), 8);
    }

    #[test]
    fn overflowing_layout_is_rejected() {
        let params = FrameParams {
            m: 16,
            n_tx: 3,
            ..pilot_params(3, 1)
        };
        let cfg = PilotConfig::new(30.0, 5);
        assert!(cfg.validate(&params).is_err());
        let cp = FrameParams {
            guard: GuardKind::Cp,
            ..pilot_params(1, 1)
        };
        assert!(cfg.validate(&cp).is_err());
    }

    #[test]
    fn pilot_rows_are_disjoint_from_data_spread() {
        // The highest received row any pilot reaches sits strictly below
        // the lowest received row any data symbol reaches.
        let params = pilot_params(2, 1);
        let cfg = PilotConfig::new(30.0, 5);
        let max_pilot_rx = cfg.pilot_row(params.n_tx - 1) + cfg.span - 1;
        let min_data_rx = cfg.first_data_row(&params);
        assert!(max_pilot_rx < min_data_rx);
    }

    #[test]
    fn noise_free_estimation_recovers_the_channel_exactly() {
        let params = pilot_params(1, 1);
        let cfg = PilotConfig::new(30.0, 5);
        let paths = PathSet::from_parts(1, 1, vec![2], vec![1.3], vec![c(0.7, 0.2)]).unwrap();
        let mut rng = DetRng::new(5);
        let (dd, _) = pilot_frame(&cfg, &params, &mut rng);
        let td = dd_to_td(&dd, &params).unwrap();
        let rx = apply_channel(&td, &paths, &params, f64::INFINITY, &mut rng).unwrap();
        let y = td_to_dt(&rx, &params).unwrap();
        let est = estimate_dt_channel(&y, &cfg, &params, 0.0).unwrap();
        assert!(!est.is_failure());
        let (gain, kappa) = est.tap(0, 0, 2).expect("tap detected");
        assert!((gain - c(0.7, 0.2)).norm() < 1e-6);
        assert!((kappa - 1.3).abs() < 1e-6);
        // The extrapolated tensor matches the generative one.
        let got = est.to_tensor(&params).unwrap();
        let want = build_dt_tensor(&paths, &params).unwrap();
        for m in 0..params.m {
            for n in 0..params.n {
                // Delay index 2 in the estimate, 0 in the single-path set.
                assert!((got.coeff(0, 0, 2, m, n) - want.coeff(0, 0, 0, m, n)).norm() < 1e-6);
            }
        }
        for l in [0usize, 1, 3, 4] {
            assert!(est.tap(0, 0, l).is_none(), "ghost tap at delay {l}");
        }
    }

    #[test]
    fn zero_channel_raises_the_failure_flag() {
        let params = pilot_params(1, 1);
        let cfg = PilotConfig::new(30.0, 5);
        let paths = PathSet::from_parts(1, 1, vec![0], vec![0.0], vec![c(0.0, 0.0)]).unwrap();
        let mut rng = DetRng::new(6);
        let (dd, _) = pilot_frame(&cfg, &params, &mut rng);
        let td = dd_to_td(&dd, &params).unwrap();
        let rx = apply_channel(&td, &paths, &params, f64::INFINITY, &mut rng).unwrap();
        let y = td_to_dt(&rx, &params).unwrap();
        let est = estimate_dt_channel(&y, &cfg, &params, 0.0).unwrap();
        assert!(est.is_failure());
        assert_eq!(est.failed_pairs, 1);
    }

    #[test]
    fn estimation_error_shrinks_with_pilot_power() {
        let params = pilot_params(1, 1);
        let profile = ChannelProfile::uniform(vec![0, 1, 2, 3, 4], 1852.0);
        let snr_db = 15.0;
        let sigma2 = noise_variance_from_snr_db(snr_db);
        let mut mse = Vec::new();
        for (case, beta_db) in [20.0, 30.0, 40.0].into_iter().enumerate() {
            let cfg = PilotConfig::new(beta_db, 5);
            let mut rng = DetRng::new(100 + case as u64);
            let (mut num, mut den) = (0.0, 0.0);
            for _ in 0..200 {
                let paths = draw_paths(&profile, &params, &mut rng).unwrap();
                let (dd, _) = pilot_frame(&cfg, &params, &mut rng);
                let td = dd_to_td(&dd, &params).unwrap();
                let rx = apply_channel(&td, &paths, &params, snr_db, &mut rng).unwrap();
                let y = td_to_dt(&rx, &params).unwrap();
                let est = estimate_dt_channel(&y, &cfg, &params, sigma2).unwrap();
                if est.is_failure() {
                    continue;
                }
                let got = est.to_tensor(&params).unwrap();
                let want = build_dt_tensor(&paths, &params).unwrap();
                for l in 0..5 {
                    for m in 0..params.m {
                        for n in 0..params.n {
                            let d = got.coeff(0, 0, l, m, n) - want.coeff(0, 0, l, m, n);
                            num += d.norm_sqr();
                            den += want.coeff(0, 0, l, m, n).norm_sqr();
                        }
                    }
                }
            }
            mse.push(num / den);
        }
        assert!(mse[0] > mse[1] && mse[1] > mse[2], "mse by power: {mse:?}");
        // At 30 dB excess power and 15 dB SNR, normalized error sits well
        // below -25 dB.
        assert!(
            10.0 * mse[1].log10() < -25.0,
            "mse {} dB",
            10.0 * mse[1].log10()
        );
    }

    #[test]
    fn identical_antennas_give_unit_correlation() {
        let params = pilot_params(1, 2);
        let paths = PathSet::from_parts(
            2,
            1,
            vec![0, 2],
            vec![0.4, -0.9],
            vec![c(0.6, 0.1), c(0.6, 0.1), c(-0.2, 0.5), c(-0.2, 0.5)],
        )
        .unwrap();
        let tensor = build_dt_tensor(&paths, &params).unwrap();
        let mut cm = CmCounter::default();
        let est = estimate_rx_correlation(&tensor, &mut cm).unwrap();
        // Perfect correlation is singular, so the estimate must have been
        // floored back to definiteness: off-diagonal within the floor of 1.
        assert!(est.repaired);
        assert!((est.r_hat.get(0, 1) - c(1.0, 0.0)).norm() < 1e-5);
        assert!((est.r_hat.get(0, 0) - c(1.0, 0.0)).norm() < 1e-12);
        assert!(crate::numerics::cholesky_lower(&est.r_hat).is_ok());
        assert!(cm.correlation_estimation > 0);
    }

    #[test]
    fn genie_correlation_estimate_tracks_the_generation_model() {
        let params = pilot_params(2, 2);
        for rho in [0.0, 0.9] {
            let profile = ChannelProfile::uniform(vec![0, 1, 2, 3, 4], 1852.0).with_rho_rx(rho);
            let mut rng = DetRng::new(42);
            let mut acc = c(0.0, 0.0);
            let frames = 100;
            for _ in 0..frames {
                let paths = draw_paths(&profile, &params, &mut rng).unwrap();
                let tensor = build_dt_tensor(&paths, &params).unwrap();
                let mut cm = CmCounter::default();
                let est = estimate_rx_correlation(&tensor, &mut cm).unwrap();
                assert!(est.r_hat.is_hermitian(1e-12));
                acc += est.r_hat.get(1, 0);
            }
            let mean = acc / frames as f64;
            assert!(
                (mean - c(rho, 0.0)).norm() <= 0.05,
                "rho {rho}: estimate {mean}"
            );
        }
    }

    #[test]
    fn estimate_record_round_trips() {
        let params = pilot_params(2, 2);
        let cfg = PilotConfig::new(30.0, 5);
        let profile = ChannelProfile::uniform(vec![0, 1, 2, 3, 4], 1852.0).with_rho_rx(0.5);
        let mut rng = DetRng::new(9);
        let paths = draw_paths(&profile, &params, &mut rng).unwrap();
        let (dd, _) = pilot_frame(&cfg, &params, &mut rng);
        let td = dd_to_td(&dd, &params).unwrap();
        let rx = apply_channel(&td, &paths, &params, f64::INFINITY, &mut rng).unwrap();
        let y = td_to_dt(&rx, &params).unwrap();
        let est = estimate_dt_channel(&y, &cfg, &params, 0.0).unwrap();
        let mut buf = Vec::new();
        est.write_record(&mut buf).unwrap();
        let parsed = ChannelEstimate::read_record(buf.as_slice(), 2, 2, 5).unwrap();
        assert_eq!(parsed.failed_pairs, est.failed_pairs);
        for r in 0..2 {
            for t in 0..2 {
                for l in 0..5 {
                    match (est.tap(r, t, l), parsed.tap(r, t, l)) {
                        (Some((g, k)), Some((pg, pk))) => {
                            assert_eq!(g, pg);
                            assert_eq!(k.to_bits(), pk.to_bits());
                        }
                        (None, None) => {}
                        other => panic!("mismatch at ({r},{t},{l}): {other:?}"),
                    }
                }
            }
        }
    }
}
