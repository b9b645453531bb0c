//! # Brute-force reference operators
//!
//! Dense matrix views of the end-to-end channel, built directly from a path
//! realization. These are deliberately slow and transparent: every fast path
//! in the modem, channel, and detector code is validated against them.
//!
//! Three objects are exposed per antenna pair:
//!
//! * `G` - the stripped time-domain convolution matrix. With the transmit
//!   grid serialized row-by-row (guards inserted) and the received stream
//!   stripped back to grid positions, `y_dt = G x_dt` holds exactly for the
//!   frame's guard mode, including every cross-block and wrap-around term.
//! * `H` - the delay-Doppler coupling matrix, obtained from `G` by
//!   conjugating with the per-delay-row unitary DFTs.
//! * `K` blocks - the `N x N` Doppler coupling block of `H` between a
//!   received delay row and a transmitted delay row.
//!
//! Grids are vectorized delay-major: entry `(m, n)` lands at `m + n * M`.

use crate::channel::PathSet;
use crate::modem::{FrameParams, Grid, GuardKind};
use crate::numerics::{ComplexMatrix, DftPlan, NumericsError};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Largest grid (`M * N`) the dense builders accept.
pub const ORACLE_MAX_GRID: usize = 4096;

/// Errors from the dense reference builders.
#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    /// Grid too large for a dense matrix.
    #[error("grid of {mn} cells exceeds the dense-operator limit {limit}")]
    TooLarge { mn: usize, limit: usize },
    /// Inputs disagree on shape.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A numeric kernel failed.
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn check_size(params: &FrameParams) -> Result<(), OracleError> {
    let mn = params.m * params.n;
    if mn > ORACLE_MAX_GRID {
        return Err(OracleError::TooLarge {
            mn,
            limit: ORACLE_MAX_GRID,
        });
    }
    Ok(())
}

/// Vectorize a grid delay-major: `v[m + n * M] = grid(m, n)`.
pub fn vectorize_grid(grid: &Grid) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); grid.m * grid.n];
    for m in 0..grid.m {
        for n in 0..grid.n {
            v[m + n * grid.m] = grid.get(m, n);
        }
    }
    v
}

/// Inverse of [`vectorize_grid`].
pub fn grid_from_vec(v: &[Complex64], m: usize, n: usize) -> Result<Grid, OracleError> {
    if v.len() != m * n {
        return Err(OracleError::ShapeMismatch(format!(
            "vector of {} entries for a {m}x{n} grid",
            v.len()
        )));
    }
    let mut grid = Grid::zeros(m, n);
    for mm in 0..m {
        for nn in 0..n {
            grid.set(mm, nn, v[mm + nn * m]);
        }
    }
    Ok(grid)
}

/// Dense stripped convolution matrix for one antenna pair.
///
/// Row `m + n * M` reconstructs received grid sample `(m, n)` from the
/// transmitted grid, replaying the serial convolution: each path reads the
/// transmit stream `delay` samples back, which lands either in another grid
/// cell or in a guard slot. Guard slots contribute nothing in ZP mode and
/// alias to the next block's tail rows in CP mode; reads before the frame
/// start wrap cyclically in CP mode and vanish in ZP mode.
pub fn build_g(
    paths: &PathSet,
    params: &FrameParams,
    rx: usize,
    tx: usize,
) -> Result<ComplexMatrix, OracleError> {
    check_size(params)?;
    if rx >= paths.n_rx || tx >= paths.n_tx {
        return Err(OracleError::ShapeMismatch(format!(
            "antenna pair ({rx}, {tx}) outside {}x{} path set",
            paths.n_rx, paths.n_tx
        )));
    }
    let (m_sz, n_sz) = (params.m, params.n);
    let block = params.block_len();
    let frame = params.frame_samples();
    let omega = 2.0 * PI / (m_sz * n_sz) as f64;
    let mut g = ComplexMatrix::zeros(m_sz * n_sz, m_sz * n_sz);
    for n in 0..n_sz {
        for m in 0..m_sz {
            let row = m + n * m_sz;
            let q = (m + n * block) as i64;
            for i in 0..paths.n_paths() {
                let l = paths.delays[i] as i64;
                let kappa = paths.dopplers[i];
                let coeff = paths.gain(i, rx, tx)
                    * Complex64::from_polar(1.0, omega * kappa * (q - l) as f64);
                let p = match params.guard {
                    GuardKind::Zp => {
                        if q < l {
                            continue;
                        }
                        (q - l) as usize
                    }
                    GuardKind::Cp => (q - l).rem_euclid(frame as i64) as usize,
                };
                let (src_block, j) = (p / block, p % block);
                let col = if j < m_sz {
                    j + src_block * m_sz
                } else {
                    match params.guard {
                        // ZP guard slots are silent.
                        GuardKind::Zp => continue,
                        // CP guard slot j of a block repeats tail row
                        // M - L_G + (j - M) of the next block.
                        GuardKind::Cp => {
                            let tail_row = m_sz - params.l_g + (j - m_sz);
                            tail_row + ((src_block + 1) % n_sz) * m_sz
                        }
                    }
                };
                g.add_to(row, col, coeff);
            }
        }
    }
    Ok(g)
}

/// Conjugate a stripped-domain operator with the per-delay-row DFTs:
/// `H = T^H G T` where `T` applies the inverse unitary DFT along the block
/// axis of each delay row (the grid-to-stream direction).
pub fn build_h_from_g(
    g: &ComplexMatrix,
    params: &FrameParams,
) -> Result<ComplexMatrix, OracleError> {
    let (m_sz, n_sz) = (params.m, params.n);
    let mn = m_sz * n_sz;
    if g.rows() != mn || g.cols() != mn {
        return Err(OracleError::ShapeMismatch(format!(
            "operator is {}x{}, grid expects {mn}x{mn}",
            g.rows(),
            g.cols()
        )));
    }
    let plan = DftPlan::new(n_sz)?;
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.scratch_len()];
    let mut h = g.clone();
    let mut line = vec![Complex64::new(0.0, 0.0); n_sz];
    // Right factor: inverse DFT along the column block axis of every row.
    for row in 0..mn {
        for mc in 0..m_sz {
            for n in 0..n_sz {
                line[n] = h.get(row, mc + n * m_sz);
            }
            plan.inverse(&mut line, &mut scratch);
            for n in 0..n_sz {
                h.set(row, mc + n * m_sz, line[n]);
            }
        }
    }
    // Left factor: forward DFT along the row block axis of every column.
    for col in 0..mn {
        for mr in 0..m_sz {
            for n in 0..n_sz {
                line[n] = h.get(mr + n * m_sz, col);
            }
            plan.forward(&mut line, &mut scratch);
            for n in 0..n_sz {
                h.set(mr + n * m_sz, col, line[n]);
            }
        }
    }
    Ok(h)
}

/// Delay-Doppler coupling matrix for one antenna pair.
pub fn build_h(
    paths: &PathSet,
    params: &FrameParams,
    rx: usize,
    tx: usize,
) -> Result<ComplexMatrix, OracleError> {
    let g = build_g(paths, params, rx, tx)?;
    build_h_from_g(&g, params)
}

/// Stack per-pair coupling matrices into the full MIMO operator: block row
/// `r`, block column `t` holds `H^(r,t)`, so `y = H_mimo x` with receive
/// grids stacked over `r` and transmit grids over `t`.
pub fn assemble_mimo_h(
    paths: &PathSet,
    params: &FrameParams,
) -> Result<ComplexMatrix, OracleError> {
    check_size(params)?;
    let mn = params.m * params.n;
    let mut h = ComplexMatrix::zeros(paths.n_rx * mn, paths.n_tx * mn);
    for r in 0..paths.n_rx {
        for t in 0..paths.n_tx {
            let block = build_h(paths, params, r, t)?;
            for i in 0..mn {
                for j in 0..mn {
                    h.set(r * mn + i, t * mn + j, block.get(i, j));
                }
            }
        }
    }
    Ok(h)
}

/// Extract the `N x N` Doppler block of `h` coupling transmitted delay row
/// `m_tx` to received delay row `m_rx`.
pub fn extract_doppler_block(
    h: &ComplexMatrix,
    params: &FrameParams,
    m_rx: usize,
    m_tx: usize,
) -> Result<ComplexMatrix, OracleError> {
    let (m_sz, n_sz) = (params.m, params.n);
    if h.rows() != m_sz * n_sz || h.cols() != m_sz * n_sz || m_rx >= m_sz || m_tx >= m_sz {
        return Err(OracleError::ShapeMismatch(format!(
            "rows {m_rx}/{m_tx} of a {}x{} operator for an {m_sz}x{n_sz} grid",
            h.rows(),
            h.cols()
        )));
    }
    let mut k = ComplexMatrix::zeros(n_sz, n_sz);
    for n in 0..n_sz {
        for np in 0..n_sz {
            k.set(n, np, h.get(m_rx + n * m_sz, m_tx + np * m_sz));
        }
    }
    Ok(k)
}

/// Largest deviation of `k` from circulant structure (each diagonal constant
/// with cyclic wrap).
pub fn circulant_deviation(k: &ComplexMatrix) -> f64 {
    let n = k.rows();
    let mut worst = 0.0f64;
    for row in 0..n {
        for col in 0..n {
            let d = (k.get(row, col) - k.get((row + 1) % n, (col + 1) % n)).norm();
            worst = worst.max(d);
        }
    }
    worst
}
