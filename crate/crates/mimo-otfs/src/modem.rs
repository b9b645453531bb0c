//! # OTFS modem
//!
//! Frame geometry and the transform chain between the three signal domains:
//!
//! * **Delay-Doppler (DD)** — the `M x N` grid that carries QAM symbols.
//! * **Delay-time (DT)** — the same grid after a row-wise inverse DFT along
//!   the Doppler axis; this is where the iterative detector operates.
//! * **Serial time domain** — `N` blocks of `M + L_G` samples, where DT cell
//!   `(m, n)` always occupies sample `q = m + n * (M + L_G)` and the trailing
//!   `L_G` slots of each block carry the guard.
//!
//! With zero-padding guards, the last `L_G` delay rows of the DD grid are
//! reserved (no data) so each time block ends in zeros; with cyclic-prefix
//! guards all `M` rows carry data and each guard slot holds a cyclic copy of
//! the tail of the following block. All row transforms are unitary, so frame
//! energy is preserved exactly.

use crate::numerics::{DftPlan, NumericsError};
use num_complex::Complex64;

/// Guard interval flavor between consecutive time blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardKind {
    /// Zero padding: guard slots are silent and the last `L_G` delay rows of
    /// the DD grid carry no data.
    Zp,
    /// Cyclic prefix: guard slots replicate the tail of the next block and
    /// every delay row carries data.
    Cp,
}

/// Errors from frame validation and the modem transforms.
#[derive(Debug, thiserror::Error)]
pub enum ModemError {
    /// Frame parameters violate a structural requirement.
    #[error("invalid frame parameters: {0}")]
    InvalidParams(String),
    /// Modulation order outside the supported set.
    #[error("unsupported modulation order {0} (expected 4, 16 or 64)")]
    UnsupportedOrder(usize),
    /// Bit-vector length is not a multiple of bits-per-symbol.
    #[error("bit count {0} is not a multiple of {1} bits per symbol")]
    BadBitCount(usize, usize),
    /// Grid or signal shape does not match the frame parameters.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A numeric kernel failed.
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Static description of one OTFS frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    /// Delay bins per block (rows of the DD grid).
    pub m: usize,
    /// Doppler bins / time blocks per frame (columns of the DD grid).
    pub n: usize,
    /// Guard length in samples appended to each block.
    pub l_g: usize,
    /// Subcarrier spacing in Hz (sample rate is `m * delta_f`).
    pub delta_f: f64,
    /// Carrier frequency in Hz.
    pub f_c: f64,
    /// Transmit antennas.
    pub n_tx: usize,
    /// Receive antennas.
    pub n_rx: usize,
    /// Guard flavor.
    pub guard: GuardKind,
    /// QAM order (4, 16 or 64).
    pub mod_order: usize,
}

impl FrameParams {
    /// Check every structural invariant; call once per configuration.
    pub fn validate(&self) -> Result<(), ModemError> {
        if self.m < 2 || !self.m.is_power_of_two() {
            return Err(ModemError::InvalidParams(format!(
                "delay size M must be a power of two >= 2, got {}",
                self.m
            )));
        }
        if self.n < 2 || !self.n.is_power_of_two() {
            return Err(ModemError::InvalidParams(format!(
                "Doppler size N must be a power of two >= 2, got {}",
                self.n
            )));
        }
        if self.l_g >= self.m {
            return Err(ModemError::InvalidParams(format!(
                "guard length {} must be smaller than M = {}",
                self.l_g, self.m
            )));
        }
        if self.n_tx == 0 || self.n_rx == 0 {
            return Err(ModemError::InvalidParams(
                "antenna counts must be at least 1".into(),
            ));
        }
        if !(self.delta_f.is_finite() && self.delta_f > 0.0)
            || !(self.f_c.is_finite() && self.f_c > 0.0)
        {
            return Err(ModemError::InvalidParams(
                "delta_f and f_c must be finite and positive".into(),
            ));
        }
        if !matches!(self.mod_order, 4 | 16 | 64) {
            return Err(ModemError::UnsupportedOrder(self.mod_order));
        }
        Ok(())
    }

    /// Samples per block including the guard.
    pub fn block_len(&self) -> usize {
        self.m + self.l_g
    }

    /// Samples per serialized frame.
    pub fn frame_samples(&self) -> usize {
        self.n * self.block_len()
    }

    /// Delay rows that may carry data in the absence of embedded pilots:
    /// all rows under CP, all but the reserved tail rows under ZP.
    pub fn data_delay_rows(&self) -> std::ops::Range<usize> {
        match self.guard {
            GuardKind::Zp => 0..(self.m - self.l_g),
            GuardKind::Cp => 0..self.m,
        }
    }

    /// Serial sample index of DT cell `(m, n)`.
    #[inline]
    pub fn sample_index(&self, m: usize, n: usize) -> usize {
        m + n * self.block_len()
    }
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Per-antenna `M x N` complex grid, row-major over (delay, column).
///
/// The column axis is Doppler for DD frames and block/time for DT frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Delay rows.
    pub m: usize,
    /// Columns (Doppler bins or time blocks).
    pub n: usize,
    /// Row-major storage, `data[m * n + col]`.
    pub data: Vec<Complex64>,
}

impl Grid {
    /// All-zero grid.
    pub fn zeros(m: usize, n: usize) -> Self {
        Grid {
            m,
            n,
            data: vec![Complex64::new(0.0, 0.0); m * n],
        }
    }

    /// Element accessor.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    /// Element mutator.
    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.n + col] = v;
    }

    /// Immutable view of one delay row.
    #[inline]
    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    /// Mutable view of one delay row.
    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [Complex64] {
        &mut self.data[row * self.n..(row + 1) * self.n]
    }

    /// Total energy of the grid.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Delay-Doppler frame: one grid per transmit (or receive) antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct DdFrame {
    /// Per-antenna grids; columns are Doppler bins.
    pub grids: Vec<Grid>,
}

/// Delay-time frame: one grid per antenna; columns are time blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct DtFrame {
    /// Per-antenna grids; columns are block indices.
    pub grids: Vec<Grid>,
}

/// Serialized time-domain signal: one sample vector per antenna, length
/// `N * (M + L_G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TdSignal {
    /// Per-antenna sample streams.
    pub streams: Vec<Vec<Complex64>>,
}

impl DdFrame {
    /// All-zero DD frame for `n_ant` antennas.
    pub fn zeros(params: &FrameParams, n_ant: usize) -> Self {
        DdFrame {
            grids: (0..n_ant)
                .map(|_| Grid::zeros(params.m, params.n))
                .collect(),
        }
    }

    /// Antenna count.
    pub fn n_ant(&self) -> usize {
        self.grids.len()
    }
}

impl DtFrame {
    /// All-zero DT frame for `n_ant` antennas.
    pub fn zeros(params: &FrameParams, n_ant: usize) -> Self {
        DtFrame {
            grids: (0..n_ant)
                .map(|_| Grid::zeros(params.m, params.n))
                .collect(),
        }
    }

    /// Antenna count.
    pub fn n_ant(&self) -> usize {
        self.grids.len()
    }
}

fn check_grid_shape(grid: &Grid, params: &FrameParams) -> Result<(), ModemError> {
    if grid.m != params.m || grid.n != params.n {
        return Err(ModemError::ShapeMismatch(format!(
            "grid is {}x{}, frame expects {}x{}",
            grid.m, grid.n, params.m, params.n
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Row transforms (DD <-> DT)
// ---------------------------------------------------------------------------

/// DD -> DT: unitary inverse DFT along the Doppler axis of every delay row.
pub fn dd_dt_rows(frame: &DdFrame, params: &FrameParams) -> Result<DtFrame, ModemError> {
    let plan = DftPlan::new(params.n)?;
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.scratch_len()];
    let mut grids = Vec::with_capacity(frame.grids.len());
    for grid in &frame.grids {
        check_grid_shape(grid, params)?;
        let mut out = grid.clone();
        for row in 0..params.m {
            plan.inverse(out.row_mut(row), &mut scratch);
        }
        grids.push(out);
    }
    Ok(DtFrame { grids })
}

/// DT -> DD: unitary forward DFT along the block axis of every delay row.
pub fn dt_dd_rows(frame: &DtFrame, params: &FrameParams) -> Result<DdFrame, ModemError> {
    let plan = DftPlan::new(params.n)?;
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.scratch_len()];
    let mut grids = Vec::with_capacity(frame.grids.len());
    for grid in &frame.grids {
        check_grid_shape(grid, params)?;
        let mut out = grid.clone();
        for row in 0..params.m {
            plan.forward(out.row_mut(row), &mut scratch);
        }
        grids.push(out);
    }
    Ok(DdFrame { grids })
}

// ---------------------------------------------------------------------------
// Serialization (DT <-> TD)
// ---------------------------------------------------------------------------

/// DT -> serial stream: place cell `(m, n)` at sample `m + n * (M + L_G)` and
/// fill the guard slots (ZP: zeros; CP: cyclic copy of the next block's tail).
pub fn dt_to_td(frame: &DtFrame, params: &FrameParams) -> Result<TdSignal, ModemError> {
    let block = params.block_len();
    let mut streams = Vec::with_capacity(frame.grids.len());
    for grid in &frame.grids {
        check_grid_shape(grid, params)?;
        let mut s = vec![Complex64::new(0.0, 0.0); params.frame_samples()];
        for n in 0..params.n {
            for m in 0..params.m {
                s[m + n * block] = grid.get(m, n);
            }
            if params.guard == GuardKind::Cp {
                // Guard slots after block n carry the tail of block n+1, so a
                // causal channel sees each block as cyclically extended.
                let next = (n + 1) % params.n;
                for j in 0..params.l_g {
                    s[params.m + j + n * block] = grid.get(params.m - params.l_g + j, next);
                }
            }
        }
        streams.push(s);
    }
    Ok(TdSignal { streams })
}

/// Serial stream -> DT: strip the guard slots of every block.
pub fn td_to_dt(signal: &TdSignal, params: &FrameParams) -> Result<DtFrame, ModemError> {
    let block = params.block_len();
    let mut grids = Vec::with_capacity(signal.streams.len());
    for s in &signal.streams {
        if s.len() != params.frame_samples() {
            return Err(ModemError::ShapeMismatch(format!(
                "stream has {} samples, frame expects {}",
                s.len(),
                params.frame_samples()
            )));
        }
        let mut grid = Grid::zeros(params.m, params.n);
        for n in 0..params.n {
            for m in 0..params.m {
                grid.set(m, n, s[m + n * block]);
            }
        }
        grids.push(grid);
    }
    Ok(DtFrame { grids })
}

/// DD -> serial stream: row-wise inverse DFT followed by serialization.
pub fn dd_to_td(frame: &DdFrame, params: &FrameParams) -> Result<TdSignal, ModemError> {
    let dt = dd_dt_rows(frame, params)?;
    dt_to_td(&dt, params)
}

/// Serial stream -> DD: guard stripping followed by row-wise forward DFT.
/// Exact inverse of [`dd_to_td`].
pub fn td_to_dd(signal: &TdSignal, params: &FrameParams) -> Result<DdFrame, ModemError> {
    let dt = td_to_dt(signal, params)?;
    dt_dd_rows(&dt, params)
}

// ---------------------------------------------------------------------------
// Gray-mapped square QAM
// ---------------------------------------------------------------------------

/// Gray-mapped square QAM with unit average symbol energy.
///
/// A symbol carries `2k` bits: the first `k` select the imaginary amplitude,
/// the last `k` the real amplitude, each through a reflected Gray code so
/// that neighboring amplitudes differ in exactly one bit. For 4-QAM the map
/// is `00 -> (1+j)/sqrt(2)`, `01 -> (-1+j)/sqrt(2)`, `11 -> (-1-j)/sqrt(2)`,
/// `10 -> (1-j)/sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Qam {
    order: usize,
    bits_per_axis: usize,
    levels: usize,
}

impl Qam {
    /// Constructor; `order` must be 4, 16 or 64.
    pub fn new(order: usize) -> Result<Self, ModemError> {
        let bits_per_axis = match order {
            4 => 1,
            16 => 2,
            64 => 3,
            other => return Err(ModemError::UnsupportedOrder(other)),
        };
        Ok(Qam {
            order,
            bits_per_axis,
            levels: 1 << bits_per_axis,
        })
    }

    /// Constellation order.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Bits carried per symbol.
    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    fn scale(&self) -> f64 {
        // Unit average energy: levels are +/-1, +/-3, ... on both axes.
        let q = self.levels as f64;
        (3.0 / (2.0 * (q * q - 1.0))).sqrt()
    }

    fn gray_to_index(&self, g: usize) -> usize {
        let mut v = g;
        v ^= v >> 1;
        v ^= v >> 2;
        v ^= v >> 4;
        v
    }

    fn index_to_gray(&self, v: usize) -> usize {
        v ^ (v >> 1)
    }

    /// Amplitude of level index `v` (0 is the most positive level).
    fn amplitude(&self, v: usize) -> f64 {
        ((self.levels - 1) as f64 - 2.0 * v as f64) * self.scale()
    }

    fn axis_from_bits(&self, bits: &[u8]) -> f64 {
        let mut g = 0usize;
        for &b in bits {
            g = (g << 1) | (b as usize & 1);
        }
        self.amplitude(self.gray_to_index(g))
    }

    /// Nearest level index for amplitude `a`, ties resolved toward the level
    /// with the smaller Gray label.
    fn nearest_level(&self, a: f64) -> usize {
        let q = (self.levels - 1) as f64;
        let f = (q - a / self.scale()) / 2.0;
        if f <= 0.0 {
            return 0;
        }
        if f >= q {
            return self.levels - 1;
        }
        let lo = f.floor();
        let frac = f - lo;
        let lo = lo as usize;
        if frac < 0.5 {
            lo
        } else if frac > 0.5 {
            lo + 1
        } else {
            // Exact midpoint: deterministic tie-break on the Gray labels.
            if self.index_to_gray(lo) <= self.index_to_gray(lo + 1) {
                lo
            } else {
                lo + 1
            }
        }
    }

    fn axis_bits(&self, a: f64, out: &mut Vec<u8>) {
        let g = self.index_to_gray(self.nearest_level(a));
        for i in (0..self.bits_per_axis).rev() {
            out.push(((g >> i) & 1) as u8);
        }
    }

    /// Map a bit vector (length a multiple of `bits_per_symbol`) to symbols.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<Complex64>, ModemError> {
        let bps = self.bits_per_symbol();
        if !bits.len().is_multiple_of(bps) {
            return Err(ModemError::BadBitCount(bits.len(), bps));
        }
        let mut out = Vec::with_capacity(bits.len() / bps);
        for chunk in bits.chunks(bps) {
            let im = self.axis_from_bits(&chunk[..self.bits_per_axis]);
            let re = self.axis_from_bits(&chunk[self.bits_per_axis..]);
            out.push(Complex64::new(re, im));
        }
        Ok(out)
    }

    /// Hard-decide one received value to the nearest constellation point.
    pub fn slice(&self, v: Complex64) -> Complex64 {
        let re = self.amplitude(self.nearest_level(v.re));
        let im = self.amplitude(self.nearest_level(v.im));
        Complex64::new(re, im)
    }

    /// Hard-demap received values to bits (nearest point, Gray labels).
    pub fn demap_symbols(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol());
        for s in symbols {
            self.axis_bits(s.im, &mut out);
            self.axis_bits(s.re, &mut out);
        }
        out
    }

    /// All constellation points, indexed by their Gray label.
    pub fn constellation(&self) -> Vec<Complex64> {
        let bps = self.bits_per_symbol();
        (0..self.order)
            .map(|label| {
                let bits: Vec<u8> = (0..bps).rev().map(|i| ((label >> i) & 1) as u8).collect();
                self.map_bits(&bits).expect("label width matches")[0]
            })
            .collect()
    }
}

/// Build a DD frame from a flat bit vector: antenna-major, data rows
/// ascending, Doppler bins ascending - the order detector decisions are
/// emitted in. Rows outside `data_rows` stay zero.
pub fn map_bits_to_grid(
    bits: &[u8],
    data_rows: &[usize],
    qam: &Qam,
    params: &FrameParams,
) -> Result<DdFrame, ModemError> {
    let bps = qam.bits_per_symbol();
    let expected = params.n_tx * data_rows.len() * params.n * bps;
    if bits.len() != expected {
        return Err(ModemError::ShapeMismatch(format!(
            "{} bits for {} data symbols of {} bits each",
            bits.len(),
            params.n_tx * data_rows.len() * params.n,
            bps
        )));
    }
    if data_rows.iter().any(|&m| m >= params.m) {
        return Err(ModemError::ShapeMismatch(format!(
            "data row outside grid of {} rows",
            params.m
        )));
    }
    let mut frame = DdFrame::zeros(params, params.n_tx);
    let row_bits = params.n * bps;
    let mut offset = 0;
    for grid in frame.grids.iter_mut() {
        for &m in data_rows {
            let symbols = qam.map_bits(&bits[offset..offset + row_bits])?;
            grid.row_mut(m).copy_from_slice(&symbols);
            offset += row_bits;
        }
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_complex_gaussian, DetRng};

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

    #[test]
    fn params_validation_catches_bad_shapes() {
        let mut p = test_params(GuardKind::Zp);
        assert!(p.validate().is_ok());
        p.m = 12;
        assert!(p.validate().is_err());
        p.m = 8;
        p.l_g = 8;
        assert!(p.validate().is_err());
        p.l_g = 2;
        p.mod_order = 8;
        assert!(p.validate().is_err());
    }

    #[test]
    fn qpsk_map_matches_pinned_constellation() {
        let qam = Qam::new(4).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        let cases: [(&[u8], Complex64); 4] = [
            (&[0, 0], c(s, s)),
            (&[0, 1], c(-s, s)),
            (&[1, 1], c(-s, -s)),
            (&[1, 0], c(s, -s)),
        ];
        for (bits, want) in cases {
            let got = qam.map_bits(bits).unwrap()[0];
            assert!((got - want).norm() < 1e-15, "bits {bits:?}");
        }
    }

    #[test]
    fn qam_round_trip_and_unit_energy_all_orders() {
        for order in [4usize, 16, 64] {
            let qam = Qam::new(order).unwrap();
            let mut rng = DetRng::new(31 + order as u64);
            let bits: Vec<u8> = (0..qam.bits_per_symbol() * 50)
                .map(|_| rng.bit() as u8)
                .collect();
            let syms = qam.map_bits(&bits).unwrap();
            assert_eq!(qam.demap_symbols(&syms), bits);
            let energy: f64 = qam
                .constellation()
                .iter()
                .map(|s| s.norm_sqr())
                .sum::<f64>()
                / order as f64;
            assert!(
                (energy - 1.0).abs() < 1e-12,
                "order {order} mean energy {energy}"
            );
        }
    }

    #[test]
    fn qam_gray_neighbors_differ_in_one_bit() {
        for order in [4usize, 16, 64] {
            let qam = Qam::new(order).unwrap();
            for v in 0..qam.levels - 1 {
                let a = qam.index_to_gray(v);
                let b = qam.index_to_gray(v + 1);
                assert_eq!((a ^ b).count_ones(), 1);
            }
        }
    }

    #[test]
    fn qam_tie_at_origin_resolves_to_the_smaller_gray_index() {
        // The origin sits exactly between the two innermost levels on each
        // axis; the tie goes to whichever carries the smaller Gray label.
        // 4-QAM: levels (+1, -1), labels (0, 1) -> 0. 16-QAM: inner levels
        // (+1, -1) are indices (1, 2), labels (01, 11) -> 01. 64-QAM: inner
        // indices (3, 4), labels (010, 110) -> 010.
        let expected: [(usize, &[u8]); 3] =
            [(4, &[0, 0]), (16, &[0, 1, 0, 1]), (64, &[0, 1, 0, 0, 1, 0])];
        for (order, want) in expected {
            let qam = Qam::new(order).unwrap();
            let bits = qam.demap_symbols(&[c(0.0, 0.0)]);
            assert_eq!(bits, want, "order {order}");
        }
    }

    #[test]
    fn dd_impulse_serializes_to_block_heads() {
        let params = test_params(GuardKind::Zp);
        let mut frame = DdFrame::zeros(&params, 1);
        frame.grids[0].set(0, 0, c((params.n as f64).sqrt(), 0.0));
        let td = dd_to_td(&frame, &params).unwrap();
        let s = &td.streams[0];
        for n in 0..params.n {
            for m in 0..params.block_len() {
                let q = params.sample_index(m, n);
                let want = if m == 0 { 1.0 } else { 0.0 };
                assert!(
                    (s[q] - c(want, 0.0)).norm() < 1e-12,
                    "sample ({m},{n}) = {:?}",
                    s[q]
                );
            }
        }
    }

    #[test]
    fn constant_dt_row_transforms_to_doppler_impulse() {
        let params = test_params(GuardKind::Zp);
        let mut dt = DtFrame::zeros(&params, 1);
        for n in 0..params.n {
            dt.grids[0].set(3, n, c(0.5, -0.25));
        }
        let dd = dt_dd_rows(&dt, &params).unwrap();
        let want = c(0.5, -0.25) * (params.n as f64).sqrt();
        assert!((dd.grids[0].get(3, 0) - want).norm() < 1e-12);
        for k in 1..params.n {
            assert!(dd.grids[0].get(3, k).norm() < 1e-12);
        }
    }

    #[test]
    fn serialization_index_law_holds_for_every_cell() {
        for guard in [GuardKind::Zp, GuardKind::Cp] {
            let params = test_params(guard);
            for m in 0..params.m {
                for n in 0..params.n {
                    let mut dt = DtFrame::zeros(&params, 1);
                    dt.grids[0].set(m, n, c(1.0, 2.0));
                    let td = dt_to_td(&dt, &params).unwrap();
                    let q = params.sample_index(m, n);
                    assert!((td.streams[0][q] - c(1.0, 2.0)).norm() < 1e-15);
                    // In ZP mode the probe must appear nowhere else.
                    if guard == GuardKind::Zp {
                        for (i, v) in td.streams[0].iter().enumerate() {
                            if i != q {
                                assert_eq!(v.norm(), 0.0, "leakage at sample {i}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cp_guard_slots_copy_tail_of_next_block() {
        let params = test_params(GuardKind::Cp);
        let mut rng = DetRng::new(404);
        let mut dt = DtFrame::zeros(&params, 1);
        let vals = sample_complex_gaussian(&mut rng, params.m * params.n, 1.0).unwrap();
        dt.grids[0].data.copy_from_slice(&vals);
        let td = dt_to_td(&dt, &params).unwrap();
        let s = &td.streams[0];
        for n in 0..params.n {
            let next = (n + 1) % params.n;
            for j in 0..params.l_g {
                let guard = s[params.m + j + n * params.block_len()];
                let tail = dt.grids[0].get(params.m - params.l_g + j, next);
                assert_eq!(guard, tail);
            }
        }
    }

    #[test]
    fn zp_guard_slots_are_silent_and_energy_is_preserved() {
        let params = test_params(GuardKind::Zp);
        let mut rng = DetRng::new(77);
        let mut frame = DdFrame::zeros(&params, 1);
        // Data only in the non-reserved rows, as ZP frames are built.
        for m in params.data_delay_rows() {
            for k in 0..params.n {
                frame.grids[0].set(m, k, rng.complex_gaussian(1.0));
            }
        }
        let td = dd_to_td(&frame, &params).unwrap();
        let s = &td.streams[0];
        for n in 0..params.n {
            for j in 0..params.l_g {
                assert_eq!(s[params.m + j + n * params.block_len()].norm(), 0.0);
            }
        }
        let e_dd = frame.grids[0].energy();
        let e_td: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        assert!((e_dd - e_td).abs() < 1e-12 * e_dd.max(1.0));
    }

    #[test]
    fn dd_td_round_trip_is_exact_in_both_guard_modes() {
        for guard in [GuardKind::Zp, GuardKind::Cp] {
            let params = test_params(guard);
            let mut rng = DetRng::new(11);
            let mut frame = DdFrame::zeros(&params, 2);
            for grid in frame.grids.iter_mut() {
                let vals = sample_complex_gaussian(&mut rng, params.m * params.n, 1.0).unwrap();
                grid.data.copy_from_slice(&vals);
            }
            let td = dd_to_td(&frame, &params).unwrap();
            let back = td_to_dd(&td, &params).unwrap();
            for (a, b) in frame.grids.iter().zip(back.grids.iter()) {
                let err = a
                    .data
                    .iter()
                    .zip(b.data.iter())
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                assert!(err < 1e-12, "round trip error {err} in {guard:?}");
            }
        }
    }
}
