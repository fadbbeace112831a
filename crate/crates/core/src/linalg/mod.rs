//! Structured matrices (Hermitian Toeplitz, two-level Toeplitz, elementary
//! Toeplitz), Hermitian eigendecomposition, PSD-cone projection, and the
//! Caratheodory-Toeplitz Vandermonde decomposition.

mod eig;
mod vandermonde;

pub use eig::{eig_general_small, hermitian_deviation, hermitian_eig, least_squares, lu_solve};
pub use vandermonde::{vandermonde_decompose, vandermonde_decompose_impl, AtomicDecomposition, RankSpec};

use crate::model::{CMat, CVec};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (relative deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {min:.3e}, max {max:.3e})")]
    NotPsd { min: f64, max: f64 },
    #[error("Toeplitz matrix has full numerical rank; Vandermonde decomposition is not unique")]
    FullRank,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index {0} out of range for size {1}")]
    OutOfRange(usize, usize),
    #[error("singular system")]
    Singular,
    #[error("iteration limit reached in {0}")]
    IterationLimit(String),
    #[error("first Toeplitz entry must be real (imaginary part {0:.3e})")]
    ComplexDiagonal(f64),
}

/// Frobenius norm.
pub fn frob(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian Toeplitz matrix parameterized by its first column.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianToeplitz {
    first_column: Vec<Complex64>,
}

impl HermitianToeplitz {
    pub fn new(mut first_column: Vec<Complex64>) -> Result<Self, LinalgError> {
        if first_column.is_empty() {
            return Err(LinalgError::Dimension("empty first column".into()));
        }
        let head = first_column[0];
        let scale = first_column.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if head.im.abs() > 1e-9 * scale.max(1e-30) {
            return Err(LinalgError::ComplexDiagonal(head.im));
        }
        first_column[0] = Complex64::new(head.re, 0.0);
        Ok(Self { first_column })
    }

    /// T = sum_i d_i a(f_i) a(f_i)^H for steering atoms of the given length.
    pub fn from_atoms(freqs: &[f64], powers: &[f64], len: usize) -> Self {
        assert_eq!(freqs.len(), powers.len());
        let mut col = vec![Complex64::new(0.0, 0.0); len];
        for (&f, &d) in freqs.iter().zip(powers) {
            for (i, slot) in col.iter_mut().enumerate() {
                // a(f)[i] a(f)[0]^* = e^{-j 2 pi i f}
                *slot += d * Complex64::from_polar(1.0, -TAU * i as f64 * f);
            }
        }
        Self::new(col).expect("atom sum has real diagonal")
    }

    pub fn len(&self) -> usize {
        self.first_column.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_column.is_empty()
    }

    pub fn first_column(&self) -> &[Complex64] {
        &self.first_column
    }

    /// Dense L x L matrix with exact conjugate symmetry.
    pub fn materialize(&self) -> CMat {
        let l = self.len();
        let mut t = Array2::zeros((l, l));
        for i in 0..l {
            for j in 0..=i {
                let v = self.first_column[i - j];
                t[(i, j)] = v;
                t[(j, i)] = v.conj();
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        self.len() as f64 * self.first_column[0].re
    }
}

/// Two-level Hermitian Toeplitz matrix of size MN x MN under the column-major
/// vectorization: entry [(i + jM), (i' + j'M)] = g(j - j', i - i') on the lower
/// block triangle, mirrored conjugate above, matching the first-column
/// convention of `HermitianToeplitz`.
///
/// The generator stores g(p, q) for block offsets p = 0..N-1 and within-block
/// offsets q = -(M-1)..=(M-1); the p = 0 row is tied by g(0,-q) = g(0,q)^*.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelToeplitz {
    m: usize,
    n: usize,
    /// shape (N, 2M-1); gen[(p, q + M - 1)] = g(p, q)
    gen: Array2<Complex64>,
}

impl TwoLevelToeplitz {
    pub fn new(m: usize, n: usize, gen: Array2<Complex64>) -> Result<Self, LinalgError> {
        if gen.dim() != (n, 2 * m - 1) {
            return Err(LinalgError::Dimension(format!(
                "generator must be {}x{}, got {}x{}",
                n,
                2 * m - 1,
                gen.dim().0,
                gen.dim().1
            )));
        }
        let scale = gen.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-30);
        // Hermitian tie on the zero block offset row.
        for q in 0..m {
            let a = gen[(0, m - 1 + q)];
            let b = gen[(0, m - 1 - q)];
            if (a - b.conj()).norm() > 1e-9 * scale {
                return Err(LinalgError::NotHermitian((a - b.conj()).norm() / scale));
            }
        }
        if gen[(0, m - 1)].im.abs() > 1e-9 * scale {
            return Err(LinalgError::ComplexDiagonal(gen[(0, m - 1)].im));
        }
        Ok(Self { m, n, gen })
    }

    pub fn zero(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            gen: Array2::zeros((n, 2 * m - 1)),
        }
    }

    /// Generator of sum_k w_k c(f_k) c(f_k)^H scaled by MN (i.e. unnormalized
    /// steering Kronecker outer products).
    pub fn from_atom_sum(freqs: &[(f64, f64)], weights: &[f64], m: usize, n: usize) -> Self {
        assert_eq!(freqs.len(), weights.len());
        let mut gen = Array2::zeros((n, 2 * m - 1));
        for p in 0..n {
            for q in -(m as isize - 1)..=(m as isize - 1) {
                let mut acc = Complex64::new(0.0, 0.0);
                for (&(fx, fy), &w) in freqs.iter().zip(weights) {
                    acc += w
                        * Complex64::from_polar(1.0, -TAU * (p as f64 * fy + q as f64 * fx));
                }
                gen[(p, (q + m as isize - 1) as usize)] = acc;
            }
        }
        Self { m, n, gen }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generator(&self) -> &Array2<Complex64> {
        &self.gen
    }

    /// g(p, q) for any p in -(N-1)..=(N-1), q in -(M-1)..=(M-1).
    pub fn value(&self, p: isize, q: isize) -> Complex64 {
        if p > 0 || (p == 0 && q >= 0) {
            self.gen[(p as usize, (q + self.m as isize - 1) as usize)]
        } else {
            self.gen[((-p) as usize, (-q + self.m as isize - 1) as usize)].conj()
        }
    }

    /// Dense MN x MN matrix, Hermitian by construction.
    pub fn materialize(&self) -> CMat {
        let (m, n) = (self.m, self.n);
        let size = m * n;
        let mut t = Array2::zeros((size, size));
        for row in 0..size {
            let (i, j) = (row % m, row / m);
            for col in 0..=row {
                let (i2, j2) = (col % m, col / m);
                let v = self.value(j as isize - j2 as isize, i as isize - i2 as isize);
                t[(row, col)] = v;
                t[(col, row)] = v.conj();
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (self.m * self.n) as f64 * self.gen[(0, self.m - 1)].re
    }

    /// First column of the x-direction marginal Toeplitz block, in the same
    /// convention as the u unknown of the (M+N) program.
    pub fn marginal_x(&self) -> Vec<Complex64> {
        (0..self.m)
            .map(|q| self.gen[(0, self.m - 1 + q)])
            .collect()
    }

    /// y-direction marginal, conjugated to match the v-block convention of the
    /// (M+N) program (frequency extraction undoes the mirroring).
    pub fn marginal_y(&self) -> Vec<Complex64> {
        (0..self.n)
            .map(|p| self.gen[(p, self.m - 1)].conj())
            .collect()
    }
}

/// Elementary Toeplitz matrix with ones on the k-th superdiagonal.
pub fn elementary_toeplitz(k: usize, size: usize) -> Result<CMat, LinalgError> {
    if k >= size {
        return Err(LinalgError::OutOfRange(k, size));
    }
    let mut t = Array2::zeros((size, size));
    for i in 0..size - k {
        t[(i, i + k)] = Complex64::new(1.0, 0.0);
    }
    Ok(t)
}

/// Frobenius-nearest PSD matrix: eigendecompose, clip negative eigenvalues,
/// reassemble from whichever side (positive or negative) has fewer terms.
pub fn psd_project(a: &CMat) -> Result<CMat, LinalgError> {
    let (w, v) = hermitian_eig(a)?;
    let n = w.len();
    let npos = w.iter().filter(|&&x| x > 0.0).count();
    if npos == n {
        // Return the symmetrized input.
        let mut out = a.clone();
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (out[(i, j)] + out[(j, i)].conj());
                out[(i, j)] = s;
                out[(j, i)] = s.conj();
            }
            out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
        }
        return Ok(out);
    }
    let mut out;
    if npos <= n - npos {
        // out = sum over positive eigenpairs
        out = Array2::zeros((n, n));
        for (idx, &lam) in w.iter().enumerate().take(npos) {
            rank_one_update(&mut out, &v, idx, lam);
        }
    } else {
        // out = sym(A) - sum over negative eigenpairs
        out = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)].conj());
            }
        }
        for (idx, &lam) in w.iter().enumerate().skip(npos) {
            rank_one_update(&mut out, &v, idx, -lam);
        }
    }
    // Exact Hermitian symmetry at the bit level.
    for i in 0..n {
        out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
        for j in 0..i {
            let s = 0.5 * (out[(i, j)] + out[(j, i)].conj());
            out[(i, j)] = s;
            out[(j, i)] = s.conj();
        }
    }
    Ok(out)
}

fn rank_one_update(out: &mut CMat, v: &CMat, col: usize, scale: f64) {
    let n = out.nrows();
    for i in 0..n {
        let vi = v[(i, col)] * scale;
        for j in 0..n {
            out[(i, j)] += vi * v[(j, col)].conj();
        }
    }
}

/// Matrix-vector product helper used across the solvers.
pub fn matvec(a: &CMat, x: &CVec) -> CVec {
    let (rows, cols) = a.dim();
    assert_eq!(cols, x.len());
    let mut out = Array1::zeros(rows);
    for i in 0..rows {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..cols {
            acc += a[(i, j)] * x[j];
        }
        out[i] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{vector_atom, ArrayGeometry, FrequencyPair};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn toeplitz_identity_and_2x2() {
        let t = HermitianToeplitz::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let m = t.materialize();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((m[(i, j)] - c(want, 0.0)).norm() < 1e-15);
            }
        }
        let t = HermitianToeplitz::new(vec![c(2.0, 0.0), c(1.0, 0.0)]).unwrap();
        let m = t.materialize();
        assert!((m[(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((m[(0, 1)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((m[(1, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((m[(1, 1)] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn toeplitz_from_atoms_matches_direct_sum() {
        let freqs = [0.15, 0.62];
        let powers = [1.0, 2.5];
        let l = 6;
        let t = HermitianToeplitz::from_atoms(&freqs, &powers, l).materialize();
        let mut want = Array2::<Complex64>::zeros((l, l));
        for (&f, &d) in freqs.iter().zip(&powers) {
            let a = crate::model::steering_vector(f, l);
            for i in 0..l {
                for j in 0..l {
                    want[(i, j)] += d * a[i] * a[j].conj();
                }
            }
        }
        for i in 0..l {
            for j in 0..l {
                assert!((t[(i, j)] - want[(i, j)]).norm() < 1e-12);
            }
        }
        // Exact conjugate symmetry at the bit level.
        for i in 0..l {
            for j in 0..l {
                assert_eq!(t[(i, j)], t[(j, i)].conj());
            }
        }
    }

    #[test]
    fn toeplitz_rejects_complex_diagonal() {
        assert!(HermitianToeplitz::new(vec![c(1.0, 0.5), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn elementary_toeplitz_examples() {
        let t = elementary_toeplitz(0, 3).unwrap();
        for i in 0..3 {
            assert!((t[(i, i)] - c(1.0, 0.0)).norm() < 1e-15);
        }
        let t = elementary_toeplitz(2, 3).unwrap();
        assert!((t[(0, 2)] - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(t.iter().filter(|v| v.norm() > 0.0).count(), 1);
        assert!(elementary_toeplitz(3, 3).is_err());
    }

    #[test]
    fn elementary_trace_identity() {
        // Tr(Theta_k^T T) picks up the k-th superdiagonal: (L-k) conj(u_k);
        // the subdiagonal pairing gives (L-k) u_k.
        let u = vec![c(2.0, 0.0), c(0.3, -0.7), c(-0.1, 0.4), c(0.9, 0.2)];
        let l = u.len();
        let t = HermitianToeplitz::new(u.clone()).unwrap().materialize();
        for k in 0..l {
            let theta = elementary_toeplitz(k, l).unwrap();
            let mut tr_sup = Complex64::new(0.0, 0.0);
            let mut tr_sub = Complex64::new(0.0, 0.0);
            for a in 0..l {
                for b in 0..l {
                    tr_sup += theta[(b, a)] * t[(b, a)].conj(); // sum of conj over superdiag
                    tr_sub += theta[(a, b)].conj() * t[(a, b)]; // Tr(Theta_k^H T)
                }
            }
            let count = (l - k) as f64;
            assert!((tr_sub - count * u[k].conj()).norm() < 1e-12);
            let _ = tr_sup;
            // Direct statement: sum of the k-th subdiagonal equals (L-k) u_k.
            let mut sub = Complex64::new(0.0, 0.0);
            for i in 0..l - k {
                sub += t[(i + k, i)];
            }
            assert!((sub - count * u[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn two_level_unit_generator_is_identity() {
        let (m, n) = (3, 4);
        let mut gen = Array2::<Complex64>::zeros((n, 2 * m - 1));
        gen[(0, m - 1)] = c(1.0, 0.0);
        let t = TwoLevelToeplitz::new(m, n, gen).unwrap();
        let mat = t.materialize();
        for i in 0..m * n {
            for j in 0..m * n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((mat[(i, j)] - c(want, 0.0)).norm() < 1e-15);
            }
        }
        assert!((t.trace() - (m * n) as f64).abs() < 1e-12);
    }

    #[test]
    fn two_level_degenerates_to_single_level() {
        // M = 1: blocks are scalars; the matrix is the N x N Hermitian Toeplitz
        // built from the p-offsets.
        let n = 5;
        let col: Vec<Complex64> = (0..n)
            .map(|i| {
                if i == 0 {
                    c(2.0, 0.0)
                } else {
                    c(0.3 / i as f64, 0.1 * i as f64)
                }
            })
            .collect();
        let mut gen = Array2::<Complex64>::zeros((n, 1));
        for (p, v) in col.iter().enumerate() {
            gen[(p, 0)] = *v;
        }
        let two = TwoLevelToeplitz::new(1, n, gen).unwrap().materialize();
        let one = HermitianToeplitz::new(col).unwrap().materialize();
        for i in 0..n {
            for j in 0..n {
                assert!((two[(i, j)] - one[(i, j)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn two_level_matches_sum_of_vector_atoms() {
        let (m, n) = (3, 4);
        let geom = ArrayGeometry::half_wavelength(m, n);
        let freqs = [(0.21, 0.77), (0.6, 0.13)];
        let weights = [1.5, 0.8];
        let t = TwoLevelToeplitz::from_atom_sum(&freqs, &weights, m, n);
        let mat = t.materialize();
        // Oracle: MN * sum_k w_k c(f_k) c(f_k)^H.
        let size = m * n;
        let mut want = Array2::<Complex64>::zeros((size, size));
        for (&(fx, fy), &w) in freqs.iter().zip(&weights) {
            let atom = vector_atom(FrequencyPair::new(fx, fy).unwrap(), &geom);
            for i in 0..size {
                for j in 0..size {
                    want[(i, j)] += w * size as f64 * atom[i] * atom[j].conj();
                }
            }
        }
        for i in 0..size {
            for j in 0..size {
                assert!(
                    (mat[(i, j)] - want[(i, j)]).norm() < 1e-10,
                    "mismatch at ({i},{j}): {} vs {}",
                    mat[(i, j)],
                    want[(i, j)]
                );
            }
        }
        // Hermitian at the bit level.
        for i in 0..size {
            for j in 0..size {
                assert_eq!(mat[(i, j)], mat[(j, i)].conj());
            }
        }
    }

    #[test]
    fn psd_project_examples() {
        // PSD input unchanged.
        let t = HermitianToeplitz::from_atoms(&[0.3], &[2.0], 4).materialize();
        let p = psd_project(&t).unwrap();
        assert!(frob(&(&p - &t)) < 1e-10 * frob(&t));

        // diag(1,-1) -> diag(1,0)
        let mut a = Array2::<Complex64>::zeros((2, 2));
        a[(0, 0)] = c(1.0, 0.0);
        a[(1, 1)] = c(-1.0, 0.0);
        let p = psd_project(&a).unwrap();
        assert!((p[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(p[(1, 1)].norm() < 1e-14);
    }

    #[test]
    fn psd_project_idempotent_and_optimal_2x2() {
        let mut rng = stream_rng(31, 0);
        for trial in 0..20 {
            let a_diag = rng.gen::<f64>() * 2.0 - 1.0;
            let d_diag = rng.gen::<f64>() * 2.0 - 1.0;
            let off = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            let mut a = Array2::<Complex64>::zeros((2, 2));
            a[(0, 0)] = c(a_diag, 0.0);
            a[(1, 1)] = c(d_diag, 0.0);
            a[(0, 1)] = off;
            a[(1, 0)] = off.conj();
            let p = psd_project(&a).unwrap();
            let pp = psd_project(&p).unwrap();
            assert!(frob(&(&pp - &p)) <= 1e-10 * frob(&p).max(1.0), "trial {trial}");
            let dist = frob(&(&p - &a));
            // Grid oracle over candidate PSD matrices B = [[x, z],[z*, y]].
            for xi in 0..8 {
                for yi in 0..8 {
                    for zr in 0..6 {
                        for zi in 0..6 {
                            let x = xi as f64 * 0.3;
                            let y = yi as f64 * 0.3;
                            let z = c(zr as f64 * 0.25 - 0.6, zi as f64 * 0.25 - 0.6);
                            if z.norm_sqr() > x * y {
                                continue; // not PSD
                            }
                            let mut b = Array2::<Complex64>::zeros((2, 2));
                            b[(0, 0)] = c(x, 0.0);
                            b[(1, 1)] = c(y, 0.0);
                            b[(0, 1)] = z;
                            b[(1, 0)] = z.conj();
                            assert!(
                                frob(&(&b - &a)) >= dist - 1e-9,
                                "grid candidate closer than projection"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn matvec_basic() {
        let mut a = Array2::<Complex64>::zeros((2, 2));
        a[(0, 0)] = c(1.0, 0.0);
        a[(0, 1)] = c(0.0, 1.0);
        a[(1, 1)] = c(2.0, 0.0);
        let x = Array1::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let y = matvec(&a, &x);
        assert!((y[0] - c(1.0, 1.0)).norm() < 1e-15);
        assert!((y[1] - c(2.0, 0.0)).norm() < 1e-15);
    }
}
