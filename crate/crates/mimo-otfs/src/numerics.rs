//! # Complex numerics kernels
//!
//! Small dense complex matrices, unitary DFTs, Cholesky factorization and
//! triangular inverses, a cyclic-Jacobi Hermitian eigensolver, and a
//! deterministic stream RNG. Everything here is sized for link-level
//! simulation work: matrices up to a few thousand rows, transforms whose
//! lengths are small powers of two, antenna counts in single digits.
//!
//! All DFTs are unitary (`1/sqrt(N)` both directions), so transforms
//! preserve energy and round-trip to machine precision.

use num_complex::Complex64;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Errors from the numeric kernels.
#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    /// An input that must be non-empty was empty.
    #[error("input must have nonzero length")]
    EmptyInput,
    /// Operands have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Cholesky pivot was not strictly positive; the matrix is not positive definite.
    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    /// A triangular matrix had a zero (or non-finite) diagonal entry.
    #[error("singular triangular matrix (zero diagonal at index {0})")]
    SingularDiagonal(usize),
    /// A variance or other scale parameter was negative or not finite.
    #[error("invalid scale parameter: {0}")]
    InvalidScale(f64),
    /// The Jacobi eigensolver did not reach the requested tolerance.
    #[error("eigensolver failed to converge in {0} sweeps")]
    EigenNoConvergence(usize),
}

// ---------------------------------------------------------------------------
// Dense complex matrices
// ---------------------------------------------------------------------------

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Build from a row-major element vector.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{}x{} matrix needs {} elements, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Element accessor.
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    /// Element mutator.
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    /// In-place element update.
    #[inline]
    pub fn add_to(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] += v;
    }

    /// Raw row-major storage.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
        if self.cols != rhs.rows {
            return Err(NumericsError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    out.add_to(r, c, a * rhs.get(k, c));
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product `self * v`.
    pub fn mat_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>, NumericsError> {
        if v.len() != self.cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "matrix has {} columns, vector has {}",
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for r in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (a, x) in row.iter().zip(v.iter()) {
                acc += a * x;
            }
            out[r] = acc;
        }
        Ok(out)
    }

    /// Largest absolute entry difference against another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch in max_abs_diff"
        );
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// True when `self` equals its conjugate transpose within `tol` per entry.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for r in 0..self.rows {
            for c in 0..=r {
                if (self.get(r, c) - self.get(c, r).conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }
}

// ---------------------------------------------------------------------------
// Unitary DFT
// ---------------------------------------------------------------------------

/// Cached forward/inverse FFT plans for one transform length, unitary scaling.
///
/// Cloning is cheap (the plans are reference-counted), so one plan can be
/// shared by every row transform of a frame.
#[derive(Clone)]
pub struct DftPlan {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl DftPlan {
    /// Plan forward and inverse transforms of length `len`.
    pub fn new(len: usize) -> Result<Self, NumericsError> {
        if len == 0 {
            return Err(NumericsError::EmptyInput);
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        Ok(DftPlan {
            len,
            fwd,
            inv,
            scale: 1.0 / (len as f64).sqrt(),
        })
    }

    /// Transform length.
    pub fn len(&self) -> usize {
        self.len
    }

    /// True when the plan length is zero (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Scratch length needed by [`Self::forward`] / [`Self::inverse`].
    pub fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
    }

    /// In-place unitary forward DFT. `scratch` must be at least [`Self::scratch_len`].
    pub fn forward(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.fwd.process_with_scratch(buf, scratch);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }

    /// In-place unitary inverse DFT. `scratch` must be at least [`Self::scratch_len`].
    pub fn inverse(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inv.process_with_scratch(buf, scratch);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }
}

impl std::fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DftPlan(len={})", self.len)
    }
}

/// Unitary DFT of `input`; `inverse` selects the conjugate transform.
///
/// Convenience wrapper that plans per call; hot paths should hold a
/// [`DftPlan`] instead.
pub fn dft(input: &[Complex64], inverse: bool) -> Result<Vec<Complex64>, NumericsError> {
    let plan = DftPlan::new(input.len())?;
    let mut buf = input.to_vec();
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.scratch_len()];
    if inverse {
        plan.inverse(&mut buf, &mut scratch);
    } else {
        plan.forward(&mut buf, &mut scratch);
    }
    Ok(buf)
}

// ---------------------------------------------------------------------------
// Factorizations
// ---------------------------------------------------------------------------

/// Lower-triangular Cholesky factor `L` with `L * L^H = A`.
///
/// `A` must be Hermitian positive definite; the strictly upper part of `A`
/// is never read.
pub fn cholesky_lower(a: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if a.rows() != a.cols() {
        return Err(NumericsError::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j).re;
        for k in 0..j {
            diag -= l.get(j, k).norm_sqr();
        }
        if !(diag.is_finite() && diag > 0.0) {
            return Err(NumericsError::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let d = diag.sqrt();
        l.set(j, j, Complex64::new(d, 0.0));
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, s / d);
        }
    }
    Ok(l)
}

/// Complex multiplications (and divisions) performed by [`cholesky_lower`] on
/// an `n x n` input, counting a modulus-square, a product, or a division as
/// one operation each.
pub fn cholesky_cm_count(n: usize) -> u64 {
    let mut count: u64 = 0;
    for j in 0..n {
        count += j as u64; // diagonal inner products
        for _i in (j + 1)..n {
            count += j as u64 + 1; // column inner products plus the divide
        }
    }
    count
}

/// Inverse of a lower-triangular matrix, by forward substitution per column.
pub fn invert_lower_triangular(l: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if l.rows() != l.cols() {
        return Err(NumericsError::DimensionMismatch(format!(
            "triangular inverse needs a square matrix, got {}x{}",
            l.rows(),
            l.cols()
        )));
    }
    let n = l.rows();
    let mut w = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let d = l.get(i, i);
            if d.norm() == 0.0 || !d.re.is_finite() || !d.im.is_finite() {
                return Err(NumericsError::SingularDiagonal(i));
            }
            if i == j {
                w.set(i, j, Complex64::new(1.0, 0.0) / d);
            } else {
                let mut s = Complex64::new(0.0, 0.0);
                for k in j..i {
                    s += l.get(i, k) * w.get(k, j);
                }
                w.set(i, j, -s / d);
            }
        }
    }
    Ok(w)
}

/// Operation count twin of [`invert_lower_triangular`], same convention as
/// [`cholesky_cm_count`].
pub fn invert_lower_triangular_cm_count(n: usize) -> u64 {
    let mut count: u64 = 0;
    for j in 0..n {
        for i in j..n {
            if i == j {
                count += 1; // reciprocal
            } else {
                count += (i - j) as u64 + 1; // inner product plus the divide
            }
        }
    }
    count
}

/// Solve `A x = b` for Hermitian positive definite `A` via its Cholesky
/// factor: forward substitution with `L`, back substitution with `L^H`.
pub fn cholesky_solve(l: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>, NumericsError> {
    let n = l.rows();
    if b.len() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "factor is {}x{}, rhs has length {}",
            n,
            n,
            b.len()
        )));
    }
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i).conj() * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    Ok(y)
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, V)` with `A = V * diag(eigenvalues) * V^H`; columns
/// of `V` are orthonormal eigenvectors. Intended for small matrices (antenna
/// counts), not large systems.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), NumericsError> {
    if a.rows() != a.cols() {
        return Err(NumericsError::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale: f64 = (0..n)
        .map(|i| m.get(i, i).norm())
        .fold(1e-300, f64::max)
        .max(m.data.iter().map(|z| z.norm()).fold(0.0, f64::max));
    let tol = 1e-14 * scale;
    let max_sweeps = 60;
    for _sweep in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m.get(p, q).norm());
            }
        }
        if off <= tol {
            let vals = (0..n).map(|i| m.get(i, i).re).collect();
            return Ok((vals, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                let b = apq.norm();
                if b <= tol {
                    continue;
                }
                let phase = apq / b;
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let tau = (aqq - app) / (2.0 * b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = phase * (t * c);
                // Apply the rotation to rows/columns p and q of M and to V.
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s.conj() * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s.conj() * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s.conj() * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
                // Clean up the entry we just rotated away.
                m.set(p, q, Complex64::new(0.0, 0.0));
                m.set(q, p, Complex64::new(0.0, 0.0));
            }
        }
    }
    Err(NumericsError::EigenNoConvergence(max_sweeps))
}

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

const MIX_GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(MIX_GOLDEN);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream RNG.
///
/// Identical seeds yield identical sequences on every platform, and
/// [`DetRng::derive`] splits a master seed into independent streams (one per
/// simulated frame), so Monte-Carlo runs reproduce exactly regardless of how
/// frames are scheduled across threads.
#[derive(Debug, Clone)]
pub struct DetRng {
    rng: ChaCha8Rng,
}

impl DetRng {
    /// Stream seeded directly from a 64-bit seed.
    pub fn new(seed: u64) -> Self {
        DetRng {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent substream of `master` identified by `salts`
    /// (e.g. `[point_id, frame_index]`).
    pub fn derive(master: u64, salts: &[u64]) -> Self {
        let mut x = splitmix64(master ^ MIX_GOLDEN);
        for (i, s) in salts.iter().enumerate() {
            x = splitmix64(x ^ splitmix64(s.wrapping_add((i as u64 + 1).wrapping_mul(MIX_GOLDEN))));
        }
        let mut seed = [0u8; 32];
        for word in 0..4 {
            x = splitmix64(x);
            seed[word * 8..(word + 1) * 8].copy_from_slice(&x.to_le_bytes());
        }
        DetRng {
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    /// One standard-normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// One circularly-symmetric complex Gaussian draw with the given variance
    /// (total over both components).
    pub fn complex_gaussian(&mut self, variance: f64) -> Complex64 {
        let s = (variance / 2.0).sqrt();
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    }

    /// Uniform draw from `(-pi, pi)`.
    pub fn uniform_angle(&mut self) -> f64 {
        self.rng
            .gen_range(-std::f64::consts::PI..std::f64::consts::PI)
    }

    /// One uniform bit.
    pub fn bit(&mut self) -> bool {
        self.rng.gen::<bool>()
    }

    /// Uniform integer in `[0, bound)`.
    pub fn index(&mut self, bound: usize) -> usize {
        self.rng.gen_range(0..bound)
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

/// `n` i.i.d. circularly-symmetric complex Gaussian samples with total
/// variance `variance` each. Variance zero yields an all-zero vector.
pub fn sample_complex_gaussian(
    rng: &mut DetRng,
    n: usize,
    variance: f64,
) -> Result<Vec<Complex64>, NumericsError> {
    if variance < 0.0 || !variance.is_finite() {
        return Err(NumericsError::InvalidScale(variance));
    }
    Ok((0..n).map(|_| rng.complex_gaussian(variance)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dft_of_dc_vector_concentrates_at_bin_zero() {
        let v = vec![c(1.0, 0.0); 4];
        let out = dft(&v, false).unwrap();
        assert!((out[0] - c(2.0, 0.0)).norm() < 1e-12);
        for k in 1..4 {
            assert!(out[k].norm() < 1e-12);
        }
    }

    #[test]
    fn dft_of_impulse_is_flat() {
        let mut v = vec![c(0.0, 0.0); 4];
        v[0] = c(1.0, 0.0);
        let out = dft(&v, false).unwrap();
        for k in 0..4 {
            assert!((out[k] - c(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_round_trip_is_exact_and_unitary() {
        for &n in &[2usize, 8, 16, 32, 64] {
            let mut rng = DetRng::new(7 + n as u64);
            let v = sample_complex_gaussian(&mut rng, n, 1.0).unwrap();
            let fwd = dft(&v, false).unwrap();
            let back = dft(&fwd, true).unwrap();
            let max_err = v
                .iter()
                .zip(back.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(max_err < 1e-12, "round trip error {max_err} at n={n}");
            let e_in: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            let e_out: f64 = fwd.iter().map(|z| z.norm_sqr()).sum();
            assert!((e_in - e_out).abs() < 1e-10 * e_in.max(1.0));
        }
    }

    #[test]
    fn dft_rejects_empty_input() {
        assert!(dft(&[], false).is_err());
    }

    #[test]
    fn cholesky_of_two_by_two_correlation_matrix() {
        let a = ComplexMatrix::from_vec(
            2,
            2,
            vec![c(1.0, 0.0), c(0.9, 0.0), c(0.9, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let l = cholesky_lower(&a).unwrap();
        assert!((l.get(0, 0) - c(1.0, 0.0)).norm() < 1e-12);
        assert!((l.get(1, 0) - c(0.9, 0.0)).norm() < 1e-12);
        assert!((l.get(1, 1) - c(0.19f64.sqrt(), 0.0)).norm() < 1e-12);
        assert!((l.get(1, 1).re - 0.4358898943540674).abs() < 1e-12);
        // Reconstruction check.
        let r = l.mul(&l.hermitian()).unwrap();
        assert!(r.max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn cholesky_of_identity_is_identity() {
        let l = cholesky_lower(&ComplexMatrix::identity(4)).unwrap();
        assert_eq!(l, ComplexMatrix::identity(4));
    }

    #[test]
    fn cholesky_rejects_indefinite_matrix() {
        let a = ComplexMatrix::from_vec(
            2,
            2,
            vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        match cholesky_lower(&a) {
            Err(NumericsError::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected positive-definite failure, got {other:?}"),
        }
    }

    #[test]
    fn lower_triangular_inverse_matches_frozen_values() {
        let l = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.9, 0.0),
                c(0.4358898943540674, 0.0),
            ],
        )
        .unwrap();
        let w = invert_lower_triangular(&l).unwrap();
        assert!((w.get(0, 0) - c(1.0, 0.0)).norm() < 1e-10);
        assert!((w.get(1, 0) - c(-2.064741604835056, 0.0)).norm() < 1e-9);
        assert!((w.get(1, 1) - c(2.294157338705618, 0.0)).norm() < 1e-9);
        let prod = l.mul(&w).unwrap();
        assert!(prod.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
    }

    #[test]
    fn triangular_inverse_rejects_singular_input() {
        let l = ComplexMatrix::from_vec(
            2,
            2,
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        assert!(matches!(
            invert_lower_triangular(&l),
            Err(NumericsError::SingularDiagonal(1))
        ));
    }

    #[test]
    fn cholesky_solve_inverts_random_system() {
        let mut rng = DetRng::new(99);
        let n = 6;
        // Build a random Hermitian positive definite matrix B^H B + I.
        let b_data = sample_complex_gaussian(&mut rng, n * n, 1.0).unwrap();
        let b = ComplexMatrix::from_vec(n, n, b_data).unwrap();
        let mut a = b.hermitian().mul(&b).unwrap();
        for i in 0..n {
            a.add_to(i, i, c(1.0, 0.0));
        }
        let x_true = sample_complex_gaussian(&mut rng, n, 1.0).unwrap();
        let rhs = a.mat_vec(&x_true).unwrap();
        let l = cholesky_lower(&a).unwrap();
        let x = cholesky_solve(&l, &rhs).unwrap();
        let err = x
            .iter()
            .zip(x_true.iter())
            .map(|(u, v)| (u - v).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "solve error {err}");
    }

    #[test]
    fn hermitian_eigen_reconstructs_random_matrix() {
        let mut rng = DetRng::new(1234);
        let n = 5;
        let b_data = sample_complex_gaussian(&mut rng, n * n, 1.0).unwrap();
        let b = ComplexMatrix::from_vec(n, n, b_data).unwrap();
        let a = {
            // (B + B^H)/2 is Hermitian.
            let bh = b.hermitian();
            let mut m = ComplexMatrix::zeros(n, n);
            for r in 0..n {
                for cc in 0..n {
                    m.set(r, cc, 0.5 * (b.get(r, cc) + bh.get(r, cc)));
                }
            }
            m
        };
        let (vals, v) = hermitian_eigen(&a).unwrap();
        // Rebuild V diag(vals) V^H.
        let mut vd = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for cc in 0..n {
                vd.set(r, cc, v.get(r, cc) * vals[cc]);
            }
        }
        let rebuilt = vd.mul(&v.hermitian()).unwrap();
        assert!(rebuilt.max_abs_diff(&a) < 1e-10);
        // Orthonormality of eigenvectors.
        let gram = v.hermitian().mul(&v).unwrap();
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-10);
    }

    #[test]
    fn rng_streams_are_deterministic_and_distinct() {
        let mut a = DetRng::new(42);
        let mut b = DetRng::new(42);
        for _ in 0..64 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
        let mut d0 = DetRng::derive(42, &[0, 0]);
        let mut d1 = DetRng::derive(42, &[0, 1]);
        let x0: Vec<u64> = (0..8).map(|_| d0.standard_normal().to_bits()).collect();
        let x1: Vec<u64> = (0..8).map(|_| d1.standard_normal().to_bits()).collect();
        assert_ne!(x0, x1, "distinct salts must give distinct streams");
        let mut d0_again = DetRng::derive(42, &[0, 0]);
        let y0: Vec<u64> = (0..8)
            .map(|_| d0_again.standard_normal().to_bits())
            .collect();
        assert_eq!(x0, y0);
    }

    #[test]
    fn complex_gaussian_sample_variance_is_calibrated() {
        let mut rng = DetRng::new(2026);
        let n = 2_000_000;
        let v = sample_complex_gaussian(&mut rng, n, 2.0).unwrap();
        let var: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!(
            (var - 2.0).abs() < 0.02,
            "sample variance {var} too far from 2.0"
        );
    }

    #[test]
    fn zero_variance_yields_zero_samples() {
        let mut rng = DetRng::new(5);
        let v = sample_complex_gaussian(&mut rng, 16, 0.0).unwrap();
        assert!(v.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn negative_variance_is_rejected() {
        let mut rng = DetRng::new(5);
        assert!(sample_complex_gaussian(&mut rng, 4, -1.0).is_err());
    }
}
