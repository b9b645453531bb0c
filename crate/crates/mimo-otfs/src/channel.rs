//! # Doubly-dispersive MIMO channel
//!
//! Sparse multipath channel with integer delay taps and fractional Doppler
//! shifts. Each path `i` has a delay `l_i` (samples), a normalized Doppler
//! `kappa_i` (delay-Doppler bins, real-valued), and one complex gain per
//! antenna pair. The time-varying impulse response seen at serial sample `q`
//! is
//!
//! ```text
//! g[l, q] = sum_i  h_i * z^((q - l) * kappa_i),   z = exp(j 2 pi / (M N)),
//! ```
//!
//! restricted to paths with delay `l`. Spatial correlation follows the
//! exponential model: gains are shaped as `C_rx * A_i * C_tx^H` where the
//! `C` factors are Cholesky roots of the exponential correlation matrices
//! and `A_i` has i.i.d. complex Gaussian entries with the path's power.
//! Delays and Dopplers are shared by all antenna pairs; only gains vary.

use crate::modem::{FrameParams, GuardKind, TdSignal};
use crate::numerics::{cholesky_lower, ComplexMatrix, DetRng, NumericsError};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Errors from channel construction and application.
#[derive(Debug, thiserror::Error)]
pub enum ChannelError {
    /// Profile fails a structural requirement.
    #[error("invalid channel profile: {0}")]
    InvalidProfile(String),
    /// Correlation magnitude above one (or factorization failed).
    #[error("invalid correlation coefficient: {0}")]
    InvalidCorrelation(String),
    /// Input shapes do not match the frame parameters.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A numeric kernel failed.
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    /// A path record could not be parsed.
    #[error("bad path record: {0}")]
    BadRecord(String),
}

/// Noise variance for a given SNR in dB with unit average symbol energy.
/// `f64::INFINITY` turns the noise off.
pub fn noise_variance_from_snr_db(snr_db: f64) -> f64 {
    if snr_db.is_infinite() && snr_db > 0.0 {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

/// Statistical description of the channel from which frames draw realizations.
#[derive(Debug, Clone)]
pub struct ChannelProfile {
    /// Integer delay taps, one path per tap, strictly increasing.
    pub delay_taps: Vec<usize>,
    /// Per-path average power; must sum to one.
    pub path_powers: Vec<f64>,
    /// Maximum Doppler shift in Hz.
    pub nu_max_hz: f64,
    /// Receive-side exponential correlation coefficient.
    pub rho_rx: Complex64,
    /// Transmit-side exponential correlation coefficient.
    pub rho_tx: Complex64,
}

impl ChannelProfile {
    /// Uniform power-delay profile over the given taps, uncorrelated antennas.
    pub fn uniform(delay_taps: Vec<usize>, nu_max_hz: f64) -> Self {
        let p = delay_taps.len();
        ChannelProfile {
            delay_taps,
            path_powers: vec![1.0 / p as f64; p],
            nu_max_hz,
            rho_rx: Complex64::new(0.0, 0.0),
            rho_tx: Complex64::new(0.0, 0.0),
        }
    }

    /// Same profile with a different receive correlation.
    pub fn with_rho_rx(mut self, rho: f64) -> Self {
        self.rho_rx = Complex64::new(rho, 0.0);
        self
    }

    /// Check the profile against the frame geometry.
    pub fn validate(&self, params: &FrameParams) -> Result<(), ChannelError> {
        if self.delay_taps.is_empty() {
            return Err(ChannelError::InvalidProfile("no delay taps".into()));
        }
        if self.delay_taps.len() != self.path_powers.len() {
            return Err(ChannelError::InvalidProfile(format!(
                "{} taps but {} powers",
                self.delay_taps.len(),
                self.path_powers.len()
            )));
        }
        for w in self.delay_taps.windows(2) {
            if w[1] <= w[0] {
                return Err(ChannelError::InvalidProfile(
                    "delay taps must be strictly increasing (one path per delay)".into(),
                ));
            }
        }
        let max_tap = *self.delay_taps.last().expect("nonempty");
        if max_tap > params.l_g {
            return Err(ChannelError::InvalidProfile(format!(
                "max delay tap {} exceeds guard length {}",
                max_tap, params.l_g
            )));
        }
        let total: f64 = self.path_powers.iter().sum();
        if (total - 1.0).abs() > 1e-9 || self.path_powers.iter().any(|&p| p <= 0.0) {
            return Err(ChannelError::InvalidProfile(format!(
                "path powers must be positive and sum to 1, got sum {total}"
            )));
        }
        if !(self.nu_max_hz.is_finite() && self.nu_max_hz >= 0.0) {
            return Err(ChannelError::InvalidProfile(format!(
                "nu_max must be finite and nonnegative, got {}",
                self.nu_max_hz
            )));
        }
        if self.rho_rx.norm() > 1.0 || self.rho_tx.norm() > 1.0 {
            return Err(ChannelError::InvalidCorrelation(format!(
                "|rho| must not exceed 1 (rho_rx = {}, rho_tx = {})",
                self.rho_rx, self.rho_tx
            )));
        }
        Ok(())
    }

    /// Largest normalized Doppler magnitude a drawn path can take.
    pub fn kappa_max(&self, params: &FrameParams) -> f64 {
        self.nu_max_hz * params.n as f64 / params.delta_f
    }
}

/// Exponential correlation matrix: entry `(i, j)` is `rho^(j-i)` above the
/// diagonal and its conjugate below.
pub fn exp_correlation_matrix(n: usize, rho: Complex64) -> Result<ComplexMatrix, ChannelError> {
    if rho.norm() > 1.0 {
        return Err(ChannelError::InvalidCorrelation(format!(
            "|rho| = {} exceeds 1",
            rho.norm()
        )));
    }
    let mut r = ComplexMatrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rho.powu((j - i) as u32);
            r.set(i, j, v);
            r.set(j, i, v.conj());
        }
    }
    Ok(r)
}

/// One frame's channel realization: shared delays and Dopplers, per-antenna-pair gains.
#[derive(Debug, Clone)]
pub struct PathSet {
    /// Receive antennas.
    pub n_rx: usize,
    /// Transmit antennas.
    pub n_tx: usize,
    /// Delay tap of each path (samples).
    pub delays: Vec<usize>,
    /// Normalized Doppler of each path (DD bins, fractional).
    pub dopplers: Vec<f64>,
    /// Gains, laid out `[path][rx][tx]`.
    gains: Vec<Complex64>,
}

impl PathSet {
    /// Assemble a path set directly from its parts (mostly for tests and
    /// record import). `gains` is `[path][rx][tx]` row-major.
    pub fn from_parts(
        n_rx: usize,
        n_tx: usize,
        delays: Vec<usize>,
        dopplers: Vec<f64>,
        gains: Vec<Complex64>,
    ) -> Result<Self, ChannelError> {
        if delays.len() != dopplers.len() || gains.len() != delays.len() * n_rx * n_tx {
            return Err(ChannelError::ShapeMismatch(format!(
                "{} delays, {} dopplers, {} gains for {}x{} antennas",
                delays.len(),
                dopplers.len(),
                gains.len(),
                n_rx,
                n_tx
            )));
        }
        Ok(PathSet {
            n_rx,
            n_tx,
            delays,
            dopplers,
            gains,
        })
    }

    /// Number of paths.
    pub fn n_paths(&self) -> usize {
        self.delays.len()
    }

    /// Gain of path `i` between receive antenna `r` and transmit antenna `t`.
    #[inline]
    pub fn gain(&self, i: usize, r: usize, t: usize) -> Complex64 {
        self.gains[(i * self.n_rx + r) * self.n_tx + t]
    }

    /// Total channel energy summed over paths for one antenna pair.
    pub fn energy(&self, r: usize, t: usize) -> f64 {
        (0..self.n_paths())
            .map(|i| self.gain(i, r, t).norm_sqr())
            .sum()
    }
}

/// Draw one channel realization: per-path uniform angles map to Dopplers
/// `kappa = nu_max * N / delta_f * cos(theta)`, and gains are correlated
/// complex Gaussians shaped by the exponential-model Cholesky factors.
pub fn draw_paths(
    profile: &ChannelProfile,
    params: &FrameParams,
    rng: &mut DetRng,
) -> Result<PathSet, ChannelError> {
    profile.validate(params)?;
    let n_rx = params.n_rx;
    let n_tx = params.n_tx;
    let c_rx = cholesky_lower(&exp_correlation_matrix(n_rx, profile.rho_rx)?)
        .map_err(|e| ChannelError::InvalidCorrelation(e.to_string()))?;
    let c_tx = cholesky_lower(&exp_correlation_matrix(n_tx, profile.rho_tx)?)
        .map_err(|e| ChannelError::InvalidCorrelation(e.to_string()))?;
    let kappa_scale = profile.kappa_max(params);
    let p = profile.delay_taps.len();
    let mut dopplers = Vec::with_capacity(p);
    let mut gains = Vec::with_capacity(p * n_rx * n_tx);
    for i in 0..p {
        let theta = rng.uniform_angle();
        dopplers.push(kappa_scale * theta.cos());
        // Independent entries, then spatial shaping: C_rx * A * C_tx^H.
        let mut a = ComplexMatrix::zeros(n_rx, n_tx);
        for r in 0..n_rx {
            for t in 0..n_tx {
                a.set(r, t, rng.complex_gaussian(profile.path_powers[i]));
            }
        }
        let shaped = c_rx.mul(&a)?.mul(&c_tx.hermitian())?;
        for r in 0..n_rx {
            for t in 0..n_tx {
                gains.push(shaped.get(r, t));
            }
        }
    }
    Ok(PathSet {
        n_rx,
        n_tx,
        delays: profile.delay_taps.clone(),
        dopplers,
        gains,
    })
}

// ---------------------------------------------------------------------------
// Delay-time channel tensor
// ---------------------------------------------------------------------------

/// Sampled delay-time channel coefficients - `coeff(r, t, l_idx, m, n)` is the
/// gain multiplying the transmitted DT sample `(m - l, n)` as it arrives at
/// received DT sample `(m, n)` through the delay tap `l = delays[l_idx]`:
///
/// ```text
/// coeff = sum_{i: l_i = l} h_i^{(r,t)} * z^((q - l) kappa_i),  q = m + n (M + L_G).
/// ```
#[derive(Debug, Clone)]
pub struct DtChannelTensor {
    /// Receive antennas.
    pub n_rx: usize,
    /// Transmit antennas.
    pub n_tx: usize,
    /// Delay taps covered by the tensor, strictly increasing.
    pub delays: Vec<usize>,
    /// Delay rows.
    pub m: usize,
    /// Time blocks.
    pub n: usize,
    data: Vec<Complex64>,
}

impl DtChannelTensor {
    fn flat_base(&self, r: usize, t: usize, l_idx: usize, m: usize) -> usize {
        (((r * self.n_tx + t) * self.delays.len() + l_idx) * self.m + m) * self.n
    }

    /// Coefficient for receive antenna `r`, transmit antenna `t`, delay index
    /// `l_idx`, received delay row `m`, block `n`.
    #[inline]
    pub fn coeff(&self, r: usize, t: usize, l_idx: usize, m: usize, n: usize) -> Complex64 {
        self.data[self.flat_base(r, t, l_idx, m) + n]
    }

    /// Contiguous slice over the block axis for fixed `(r, t, l_idx, m)`.
    #[inline]
    pub fn slice(&self, r: usize, t: usize, l_idx: usize, m: usize) -> &[Complex64] {
        let base = self.flat_base(r, t, l_idx, m);
        &self.data[base..base + self.n]
    }

    /// Build the tensor from an explicit per-(rx, tx, delay) tap list;
    /// entries are `None` where a delay carries no energy for that antenna
    /// pair. `taps(r, t, l_idx)` returns `(gain, kappa)`.
    pub fn from_taps<F>(
        params: &FrameParams,
        delays: Vec<usize>,
        mut taps: F,
    ) -> Result<Self, ChannelError>
    where
        F: FnMut(usize, usize, usize) -> Option<(Complex64, f64)>,
    {
        let (n_rx, n_tx) = (params.n_rx, params.n_tx);
        let (m_sz, n_sz) = (params.m, params.n);
        let block = params.block_len() as f64;
        let omega = 2.0 * PI / (m_sz * n_sz) as f64;
        let mut data = vec![Complex64::new(0.0, 0.0); n_rx * n_tx * delays.len() * m_sz * n_sz];
        let mut idx = 0;
        for r in 0..n_rx {
            for t in 0..n_tx {
                for (l_idx, &l) in delays.iter().enumerate() {
                    match taps(r, t, l_idx) {
                        Some((gain, kappa)) => {
                            for m in 0..m_sz {
                                for n in 0..n_sz {
                                    let q = m as f64 + n as f64 * block;
                                    let phase = omega * kappa * (q - l as f64);
                                    data[idx] = gain * Complex64::from_polar(1.0, phase);
                                    idx += 1;
                                }
                            }
                        }
                        None => idx += m_sz * n_sz,
                    }
                }
            }
        }
        Ok(DtChannelTensor {
            n_rx,
            n_tx,
            delays,
            m: m_sz,
            n: n_sz,
            data,
        })
    }
}

/// Sample the delay-time channel tensor of a path realization.
pub fn build_dt_tensor(
    paths: &PathSet,
    params: &FrameParams,
) -> Result<DtChannelTensor, ChannelError> {
    if paths.n_rx != params.n_rx || paths.n_tx != params.n_tx {
        return Err(ChannelError::ShapeMismatch(format!(
            "path set is {}x{}, frame expects {}x{}",
            paths.n_rx, paths.n_tx, params.n_rx, params.n_tx
        )));
    }
    // One path per delay is a profile invariant, so the per-delay sum has a
    // single term and the tensor can be built tap by tap.
    let delays = paths.delays.clone();
    let dopplers = paths.dopplers.clone();
    DtChannelTensor::from_taps(params, delays, |r, t, l_idx| {
        Some((paths.gain(l_idx, r, t), dopplers[l_idx]))
    })
}

// ---------------------------------------------------------------------------
// Channel application
// ---------------------------------------------------------------------------

/// Pass a transmit signal through the channel and add receiver noise.
///
/// The returned signal has one stream per receive antenna. Sample `q` of
/// stream `r` is `sum_t sum_i h_i z^((q - l_i) kappa_i) s_t(q - l_i)` plus
/// complex Gaussian noise of variance [`noise_variance_from_snr_db`]. Past
/// the frame start, `s_t` reads zeros in ZP mode and wraps cyclically in CP
/// mode (the guard construction makes that equal to a per-block cyclic
/// extension).
pub fn apply_channel(
    signal: &TdSignal,
    paths: &PathSet,
    params: &FrameParams,
    snr_db: f64,
    rng: &mut DetRng,
) -> Result<TdSignal, ChannelError> {
    if signal.streams.len() != params.n_tx || paths.n_tx != params.n_tx {
        return Err(ChannelError::ShapeMismatch(format!(
            "transmit signal has {} streams, frame expects {}",
            signal.streams.len(),
            params.n_tx
        )));
    }
    let len = params.frame_samples();
    for s in &signal.streams {
        if s.len() != len {
            return Err(ChannelError::ShapeMismatch(format!(
                "stream has {} samples, frame expects {len}",
                s.len()
            )));
        }
    }
    let omega = 2.0 * PI / (params.m * params.n) as f64;
    let sigma2 = noise_variance_from_snr_db(snr_db);
    let mut streams = Vec::with_capacity(params.n_rx);
    for r in 0..params.n_rx {
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for t in 0..params.n_tx {
            let s = &signal.streams[t];
            for i in 0..paths.n_paths() {
                let gain = paths.gain(i, r, t);
                if gain.norm_sqr() == 0.0 {
                    continue;
                }
                let l = paths.delays[i];
                let kappa = paths.dopplers[i];
                for q in 0..len {
                    let src = match params.guard {
                        GuardKind::Zp => {
                            if q < l {
                                continue;
                            }
                            s[q - l]
                        }
                        GuardKind::Cp => s[(q + len - l) % len],
                    };
                    if src.norm_sqr() == 0.0 {
                        continue;
                    }
                    let phase = omega * kappa * (q as f64 - l as f64);
                    out[q] += gain * Complex64::from_polar(1.0, phase) * src;
                }
            }
        }
        for v in out.iter_mut() {
            *v += rng.complex_gaussian(sigma2);
        }
        streams.push(out);
    }
    Ok(TdSignal { streams })
}

// ---------------------------------------------------------------------------
// Text records
// ---------------------------------------------------------------------------

/// Write a path realization as text, one line per (path, antenna pair):
/// `rx, tx, delay, kappa, re(gain), im(gain)`.
pub fn write_path_record<W: Write>(paths: &PathSet, out: &mut W) -> std::io::Result<()> {
    for i in 0..paths.n_paths() {
        for r in 0..paths.n_rx {
            for t in 0..paths.n_tx {
                let g = paths.gain(i, r, t);
                writeln!(
                    out,
                    "{}, {}, {}, {}, {}, {}",
                    r, t, paths.delays[i], paths.dopplers[i], g.re, g.im
                )?;
            }
        }
    }
    Ok(())
}

/// Parse a path record written by [`write_path_record`]. Paths are identified
/// by their (delay, Doppler) pair; every antenna pair must be present for
/// every path.
pub fn read_path_record<R: BufRead>(input: R) -> Result<PathSet, ChannelError> {
    struct Entry {
        delay: usize,
        kappa: f64,
        gains: Vec<((usize, usize), Complex64)>,
    }
    let mut entries: Vec<Entry> = Vec::new();
    let mut n_rx = 0usize;
    let mut n_tx = 0usize;
    for (line_no, line) in input.lines().enumerate() {
        let line = line.map_err(|e| ChannelError::BadRecord(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(ChannelError::BadRecord(format!(
                "line {}: expected 6 fields, got {}",
                line_no + 1,
                fields.len()
            )));
        }
        let parse_err =
            |what: &str| ChannelError::BadRecord(format!("line {}: bad {what}", line_no + 1));
        let r: usize = fields[0].parse().map_err(|_| parse_err("rx index"))?;
        let t: usize = fields[1].parse().map_err(|_| parse_err("tx index"))?;
        let delay: usize = fields[2].parse().map_err(|_| parse_err("delay"))?;
        let kappa: f64 = fields[3].parse().map_err(|_| parse_err("kappa"))?;
        let re: f64 = fields[4].parse().map_err(|_| parse_err("gain"))?;
        let im: f64 = fields[5].parse().map_err(|_| parse_err("gain"))?;
        n_rx = n_rx.max(r + 1);
        n_tx = n_tx.max(t + 1);
        let gain = Complex64::new(re, im);
        match entries
            .iter_mut()
            .find(|e| e.delay == delay && e.kappa.to_bits() == kappa.to_bits())
        {
            Some(e) => e.gains.push(((r, t), gain)),
            None => entries.push(Entry {
                delay,
                kappa,
                gains: vec![((r, t), gain)],
            }),
        }
    }
    if entries.is_empty() {
        return Err(ChannelError::BadRecord("empty record".into()));
    }
    entries.sort_by_key(|e| e.delay);
    let mut delays = Vec::with_capacity(entries.len());
    let mut dopplers = Vec::with_capacity(entries.len());
    let mut gains = vec![Complex64::new(0.0, 0.0); entries.len() * n_rx * n_tx];
    for (i, e) in entries.iter().enumerate() {
        if e.gains.len() != n_rx * n_tx {
            return Err(ChannelError::BadRecord(format!(
                "path at delay {} has {} antenna entries, expected {}",
                e.delay,
                e.gains.len(),
                n_rx * n_tx
            )));
        }
        delays.push(e.delay);
        dopplers.push(e.kappa);
        for &((r, t), g) in &e.gains {
            gains[(i * n_rx + r) * n_tx + t] = g;
        }
    }
    PathSet::from_parts(n_rx, n_tx, delays, dopplers, gains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{dt_to_td, DtFrame};
    use crate::numerics::sample_complex_gaussian;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn test_params(guard: GuardKind) -> FrameParams {
        FrameParams {
            m: 8,
            n: 4,
            l_g: 2,
            delta_f: 15e3,
            f_c: 4e9,
            n_tx: 1,
            n_rx: 1,
            guard,
            mod_order: 4,
        }
    }

    fn single_path(l: usize, kappa: f64, gain: Complex64) -> PathSet {
        PathSet::from_parts(1, 1, vec![l], vec![kappa], vec![gain]).unwrap()
    }

    #[test]
    fn exponential_correlation_matrix_matches_closed_form() {
        let r = exp_correlation_matrix(4, c(0.6, 0.0)).unwrap();
        assert!((r.get(0, 3) - c(0.216, 0.0)).norm() < 1e-12);
        assert!((r.get(2, 1) - c(0.6, 0.0)).norm() < 1e-12);
        for i in 0..4 {
            assert!((r.get(i, i) - c(1.0, 0.0)).norm() < 1e-15);
        }
        assert!(r.is_hermitian(1e-15));
        assert!(exp_correlation_matrix(2, c(1.5, 0.0)).is_err());
    }

    #[test]
    fn rho_zero_gives_identity_correlation() {
        let r = exp_correlation_matrix(3, c(0.0, 0.0)).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn drawn_paths_have_unit_mean_energy_and_bounded_doppler() {
        let params = FrameParams {
            n_tx: 2,
            n_rx: 2,
            ..test_params(GuardKind::Zp)
        };
        let profile = ChannelProfile::uniform(vec![0, 1, 2], 1852.0);
        let kappa_max = profile.kappa_max(&params);
        let mut rng = DetRng::new(8);
        let draws = 10_000;
        let mut total = 0.0;
        for _ in 0..draws {
            let paths = draw_paths(&profile, &params, &mut rng).unwrap();
            for i in 0..paths.n_paths() {
                assert!(paths.dopplers[i].abs() <= kappa_max + 1e-12);
            }
            total += paths.energy(0, 0);
        }
        let mean = total / draws as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean path energy {mean}");
    }

    #[test]
    fn drawn_gains_follow_requested_receive_correlation() {
        let params = FrameParams {
            n_rx: 2,
            ..test_params(GuardKind::Zp)
        };
        let profile = ChannelProfile::uniform(vec![0], 0.0).with_rho_rx(0.9);
        let mut rng = DetRng::new(17);
        let draws = 100_000;
        let (mut cross, mut p0, mut p1) = (c(0.0, 0.0), 0.0, 0.0);
        for _ in 0..draws {
            let paths = draw_paths(&profile, &params, &mut rng).unwrap();
            let h0 = paths.gain(0, 0, 0);
            let h1 = paths.gain(0, 1, 0);
            cross += h0 * h1.conj();
            p0 += h0.norm_sqr();
            p1 += h1.norm_sqr();
        }
        let corr = cross / (p0 * p1).sqrt();
        assert!(
            (corr - c(0.9, 0.0)).norm() < 0.01,
            "sample correlation {corr}"
        );
    }

    #[test]
    fn draw_is_reproducible_for_equal_seeds() {
        let params = test_params(GuardKind::Zp);
        let profile = ChannelProfile::uniform(vec![0, 2], 1000.0);
        let a = draw_paths(&profile, &params, &mut DetRng::new(5)).unwrap();
        let b = draw_paths(&profile, &params, &mut DetRng::new(5)).unwrap();
        assert_eq!(a.dopplers, b.dopplers);
        assert_eq!(a.gain(1, 0, 0), b.gain(1, 0, 0));
    }

    #[test]
    fn profile_validation_rejects_bad_inputs() {
        let params = test_params(GuardKind::Zp);
        let mut p = ChannelProfile::uniform(vec![0, 1], 100.0);
        p.path_powers = vec![0.7, 0.7];
        assert!(p.validate(&params).is_err());
        let p = ChannelProfile::uniform(vec![0, 5], 100.0);
        assert!(p.validate(&params).is_err(), "tap beyond guard");
        let p = ChannelProfile::uniform(vec![1, 1], 100.0);
        assert!(p.validate(&params).is_err(), "duplicate taps");
    }

    #[test]
    fn tensor_entry_matches_phase_ramp_closed_form() {
        // Single unit path, no delay, kappa = 4 on a 4x4 grid without guard:
        // entry (m=1, n=0) sits one sample into the frame, so the phase is
        // 2 pi * 4 / 16 = pi / 2.
        let params = FrameParams {
            m: 4,
            n: 4,
            l_g: 0,
            ..test_params(GuardKind::Zp)
        };
        let paths = single_path(0, 4.0, c(1.0, 0.0));
        let tensor = build_dt_tensor(&paths, &params).unwrap();
        assert!((tensor.coeff(0, 0, 0, 1, 0) - c(0.0, 1.0)).norm() < 1e-12);
        assert!((tensor.coeff(0, 0, 0, 0, 0) - c(1.0, 0.0)).norm() < 1e-12);
        // One full block later the phase advances by 2 pi kappa (M+L_G)/(MN) = 2 pi.
        assert!((tensor.coeff(0, 0, 0, 0, 1) - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn identity_channel_returns_input_exactly() {
        for guard in [GuardKind::Zp, GuardKind::Cp] {
            let params = test_params(guard);
            let mut rng = DetRng::new(3);
            let mut dt = DtFrame::zeros(&params, 1);
            let vals = sample_complex_gaussian(&mut rng, params.m * params.n, 1.0).unwrap();
            dt.grids[0].data.copy_from_slice(&vals);
            let td = dt_to_td(&dt, &params).unwrap();
            let paths = single_path(0, 0.0, c(1.0, 0.0));
            let rx = apply_channel(&td, &paths, &params, f64::INFINITY, &mut rng).unwrap();
            for (a, b) in td.streams[0].iter().zip(rx.streams[0].iter()) {
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn pure_delay_shifts_the_stream() {
        let params = test_params(GuardKind::Zp);
        let mut rng = DetRng::new(4);
        let mut dt = DtFrame::zeros(&params, 1);
        for m in params.data_delay_rows() {
            for n in 0..params.n {
                dt.grids[0].set(m, n, rng.complex_gaussian(1.0));
            }
        }
        let td = dt_to_td(&dt, &params).unwrap();
        let paths = single_path(2, 0.0, c(1.0, 0.0));
        let rx = apply_channel(&td, &paths, &params, f64::INFINITY, &mut rng).unwrap();
        let s = &td.streams[0];
        let r = &rx.streams[0];
        for q in 0..s.len() {
            let want = if q >= 2 { s[q - 2] } else { c(0.0, 0.0) };
            assert!((r[q] - want).norm() < 1e-14, "sample {q}");
        }
    }

    #[test]
    fn pure_doppler_applies_a_phase_ramp() {
        let params = test_params(GuardKind::Zp);
        let mut rng = DetRng::new(6);
        let mut dt = DtFrame::zeros(&params, 1);
        let vals = sample_complex_gaussian(&mut rng, params.m * params.n, 1.0).unwrap();
        dt.grids[0].data.copy_from_slice(&vals);
        let td = dt_to_td(&dt, &params).unwrap();
        let kappa = 1.25;
        let paths = single_path(0, kappa, c(1.0, 0.0));
        let rx = apply_channel(&td, &paths, &params, f64::INFINITY, &mut rng).unwrap();
        let omega = 2.0 * PI / (params.m * params.n) as f64;
        for q in 0..td.streams[0].len() {
            let want = td.streams[0][q] * Complex64::from_polar(1.0, omega * kappa * q as f64);
            assert!((rx.streams[0][q] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_input_noise_variance_is_calibrated() {
        // 1M+ samples through a silent channel: the output must be pure noise
        // with the configured variance.
        let params = FrameParams {
            m: 1024,
            n: 1024,
            l_g: 0,
            ..test_params(GuardKind::Zp)
        };
        let td = TdSignal {
            streams: vec![vec![c(0.0, 0.0); params.frame_samples()]],
        };
        let paths = single_path(0, 0.0, c(1.0, 0.0));
        let snr_db = 7.0;
        let want = noise_variance_from_snr_db(snr_db);
        let mut rng = DetRng::new(99);
        let rx = apply_channel(&td, &paths, &params, snr_db, &mut rng).unwrap();
        let var: f64 =
            rx.streams[0].iter().map(|z| z.norm_sqr()).sum::<f64>() / params.frame_samples() as f64;
        assert!(
            (var - want).abs() < 0.01 * want,
            "sample variance {var} vs {want}"
        );
    }

    #[test]
    fn infinite_snr_disables_noise() {
        assert_eq!(noise_variance_from_snr_db(f64::INFINITY), 0.0);
        assert!((noise_variance_from_snr_db(10.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn path_record_round_trips() {
        let params = FrameParams {
            n_rx: 2,
            n_tx: 2,
            ..test_params(GuardKind::Zp)
        };
        let profile = ChannelProfile::uniform(vec![0, 1, 2], 1852.0).with_rho_rx(0.5);
        let mut rng = DetRng::new(12);
        let paths = draw_paths(&profile, &params, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_path_record(&paths, &mut buf).unwrap();
        let parsed = read_path_record(buf.as_slice()).unwrap();
        assert_eq!(parsed.n_rx, 2);
        assert_eq!(parsed.n_tx, 2);
        assert_eq!(parsed.delays, paths.delays);
        for i in 0..paths.n_paths() {
            assert_eq!(parsed.dopplers[i].to_bits(), paths.dopplers[i].to_bits());
            for r in 0..2 {
                for t in 0..2 {
                    assert_eq!(parsed.gain(i, r, t), paths.gain(i, r, t));
                }
            }
        }
    }

    #[test]
    fn malformed_record_is_rejected() {
        assert!(read_path_record("0, 0, 1, 0.5, 1.0".as_bytes()).is_err());
        assert!(read_path_record("".as_bytes()).is_err());
    }
}
