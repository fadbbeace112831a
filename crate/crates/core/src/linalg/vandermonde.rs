//! Caratheodory-Toeplitz Vandermonde decomposition of PSD Hermitian Toeplitz
//! matrices: T = sum_i d_i a(f_i) a(f_i)^H with d_i > 0 and distinct f_i,
//! recovered through the shift invariance of the signal subspace.

use super::eig::{eig_general_small, hermitian_eig, lu_solve};
use super::{HermitianToeplitz, LinalgError};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Result of decomposing a PSD Toeplitz matrix into steering atoms.
#[derive(Debug, Clone)]
pub struct AtomicDecomposition {
    /// Frequencies in [0,1), sorted by decreasing power.
    pub frequencies: Vec<f64>,
    /// Strictly positive powers, same order.
    pub powers: Vec<f64>,
    /// Number of least-squares powers clipped at zero (and dropped).
    pub clipped: usize,
    /// Relative reconstruction residual ||T - sum d a a^H||_F / ||T||_F.
    pub residual: f64,
}

impl AtomicDecomposition {
    pub fn empty() -> Self {
        Self {
            frequencies: Vec::new(),
            powers: Vec::new(),
            clipped: 0,
            residual: 0.0,
        }
    }

    pub fn rank(&self) -> usize {
        self.frequencies.len()
    }
}

/// How the model order is chosen inside the decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankSpec {
    /// Numerical rank from a relative eigenvalue threshold.
    Tolerance(f64),
    /// Keep exactly this many components (top eigenvalues), as when the
    /// caller knows the sparsity.
    Fixed(usize),
}

/// Decomposes a PSD Hermitian Toeplitz matrix of numerical rank r < L.
///
/// Frequencies come from ESPRIT-style shift invariance of the top-r eigenvector
/// subspace, with angles mapped by f = (-arg z / 2 pi) mod 1 to match the
/// e^{-j 2 pi f} steering convention; powers come from least squares on the
/// first column, clipping negatives.
pub fn vandermonde_decompose(
    t: &HermitianToeplitz,
    rank_tol: f64,
) -> Result<AtomicDecomposition, LinalgError> {
    vandermonde_decompose_impl(t, RankSpec::Tolerance(rank_tol), rank_tol)
}

pub fn vandermonde_decompose_impl(
    t: &HermitianToeplitz,
    rank: RankSpec,
    psd_tol: f64,
) -> Result<AtomicDecomposition, LinalgError> {
    let l = t.len();
    let mat = t.materialize();
    let (w, v) = hermitian_eig(&mat)?;
    let lam_max = w[0].max(0.0);
    if lam_max == 0.0 {
        // Zero (or negative semidefinite to tolerance) input.
        if w[l - 1] < -psd_tol {
            return Err(LinalgError::NotPsd {
                min: w[l - 1],
                max: w[0],
            });
        }
        return Ok(AtomicDecomposition::empty());
    }
    if w[l - 1] < -psd_tol * lam_max {
        return Err(LinalgError::NotPsd {
            min: w[l - 1],
            max: w[0],
        });
    }
    let r = match rank {
        RankSpec::Tolerance(tol) => {
            let r = w.iter().filter(|&&x| x > tol * lam_max).count();
            if r == l {
                return Err(LinalgError::FullRank);
            }
            r
        }
        RankSpec::Fixed(k) => {
            if k >= l {
                return Err(LinalgError::Dimension(format!(
                    "fixed rank {k} must be below the Toeplitz size {l}"
                )));
            }
            k
        }
    };
    if r == 0 {
        return Ok(AtomicDecomposition::empty());
    }

    // Shift invariance: Us_up = Us_low Psi with eigenvalues e^{-j 2 pi f}.
    let rows = l - 1;
    let mut low = Array2::<Complex64>::zeros((rows, r));
    let mut up = Array2::<Complex64>::zeros((rows, r));
    for i in 0..rows {
        for c in 0..r {
            low[(i, c)] = v[(i, c)];
            up[(i, c)] = v[(i + 1, c)];
        }
    }
    let psi = ls_solve_matrix(&low, &up)?;
    let (eigs, _) = eig_general_small(&psi)?;
    let mut freqs: Vec<f64> = eigs
        .iter()
        .map(|z| (-z.arg() / TAU).rem_euclid(1.0))
        .collect();
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Powers from the first column: col0 = sum_i d_i a(f_i).
    let col0 = t.first_column();
    let mut design = Array2::<f64>::zeros((2 * l, r));
    let mut rhs = Array1::<f64>::zeros(2 * l);
    for i in 0..l {
        rhs[i] = col0[i].re;
        rhs[l + i] = col0[i].im;
        for (cidx, &f) in freqs.iter().enumerate() {
            let a = Complex64::from_polar(1.0, -TAU * i as f64 * f);
            design[(i, cidx)] = a.re;
            design[(l + i, cidx)] = a.im;
        }
    }
    let d = real_least_squares(&design, &rhs)?;

    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(r);
    let mut clipped = 0;
    for (idx, &power) in d.iter().enumerate() {
        if power > 0.0 {
            pairs.push((freqs[idx], power));
        } else {
            clipped += 1;
        }
    }
    pairs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());

    // Reconstruction residual for diagnostics.
    let mut recon = Array2::<Complex64>::zeros((l, l));
    for &(f, dk) in &pairs {
        for i in 0..l {
            let ai = Complex64::from_polar(1.0, -TAU * i as f64 * f);
            for j in 0..l {
                let aj = Complex64::from_polar(1.0, -TAU * j as f64 * f);
                recon[(i, j)] += dk * ai * aj.conj();
            }
        }
    }
    let t_norm = super::frob(&mat).max(1e-300);
    let residual = super::frob(&(&recon - &mat)) / t_norm;

    Ok(AtomicDecomposition {
        frequencies: pairs.iter().map(|p| p.0).collect(),
        powers: pairs.iter().map(|p| p.1).collect(),
        clipped,
        residual,
    })
}

/// Least-squares solve A X = B column by column via the normal equations.
fn ls_solve_matrix(
    a: &Array2<Complex64>,
    b: &Array2<Complex64>,
) -> Result<Array2<Complex64>, LinalgError> {
    let (rows, cols) = a.dim();
    let rhs_cols = b.dim().1;
    let mut gram = Array2::<Complex64>::zeros((cols, cols));
    for i in 0..cols {
        for j in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..rows {
                acc += a[(r, i)].conj() * a[(r, j)];
            }
            gram[(i, j)] = acc;
        }
    }
    let mut x = Array2::<Complex64>::zeros((cols, rhs_cols));
    for c in 0..rhs_cols {
        let mut rhs = Array1::<Complex64>::zeros(cols);
        for i in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..rows {
                acc += a[(r, i)].conj() * b[(r, c)];
            }
            rhs[i] = acc;
        }
        let sol = lu_solve(&gram, &rhs)?;
        for i in 0..cols {
            x[(i, c)] = sol[i];
        }
    }
    Ok(x)
}

fn real_least_squares(a: &Array2<f64>, b: &Array1<f64>) -> Result<Vec<f64>, LinalgError> {
    let (rows, cols) = a.dim();
    let mut gram = Array2::<Complex64>::zeros((cols, cols));
    let mut rhs = Array1::<Complex64>::zeros(cols);
    for i in 0..cols {
        for j in 0..cols {
            let mut acc = 0.0;
            for r in 0..rows {
                acc += a[(r, i)] * a[(r, j)];
            }
            gram[(i, j)] = Complex64::new(acc, 0.0);
        }
        let mut acc = 0.0;
        for r in 0..rows {
            acc += a[(r, i)] * b[r];
        }
        rhs[i] = Complex64::new(acc, 0.0);
    }
    let sol = lu_solve(&gram, &rhs)?;
    Ok(sol.iter().map(|v| v.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::wrap_dist;
    use ndarray::Array2;

    #[test]
    fn zero_matrix_gives_empty_decomposition() {
        let t = HermitianToeplitz::new(vec![Complex64::new(0.0, 0.0); 5]).unwrap();
        let d = vandermonde_decompose(&t, 1e-6).unwrap();
        assert_eq!(d.rank(), 0);
    }

    #[test]
    fn all_ones_matrix_is_single_zero_frequency() {
        let t = HermitianToeplitz::from_atoms(&[0.0], &[1.0], 4);
        let d = vandermonde_decompose(&t, 1e-6).unwrap();
        assert_eq!(d.rank(), 1);
        assert!(wrap_dist(d.frequencies[0], 0.0) < 1e-10);
        assert!((d.powers[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn two_atom_round_trip_paper_frequencies() {
        let freqs = [0.12951, 0.49546];
        let powers = [1.0, 2.0];
        let t = HermitianToeplitz::from_atoms(&freqs, &powers, 10);
        let d = vandermonde_decompose(&t, 1e-6).unwrap();
        assert_eq!(d.rank(), 2);
        // Match by nearest wrap distance.
        for (&f, &p) in freqs.iter().zip(&powers) {
            let (best, bp) = d
                .frequencies
                .iter()
                .zip(&d.powers)
                .min_by(|a, b| {
                    wrap_dist(*a.0, f)
                        .partial_cmp(&wrap_dist(*b.0, f))
                        .unwrap()
                })
                .unwrap();
            assert!(wrap_dist(*best, f) < 1e-8, "frequency {f} off by more than 1e-8");
            assert!((bp - p).abs() < 1e-6, "power {p} recovered as {bp}");
        }
        assert!(d.residual < 1e-6);
    }

    #[test]
    fn full_rank_is_rejected() {
        // Identity is PSD with full rank: no unique decomposition.
        let t = HermitianToeplitz::new(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        assert!(matches!(
            vandermonde_decompose(&t, 1e-6),
            Err(LinalgError::FullRank)
        ));
    }

    #[test]
    fn non_psd_is_rejected() {
        let t = HermitianToeplitz::new(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
        ])
        .unwrap();
        assert!(matches!(
            vandermonde_decompose(&t, 1e-6),
            Err(LinalgError::NotPsd { .. })
        ));
    }

    #[test]
    fn round_trip_various_sizes() {
        // construct-then-decompose identity on separated frequency sets.
        for &l in &[6usize, 10, 16] {
            let sep = 1.2 / l as f64;
            let freqs = [0.05, 0.05 + 2.0 * sep, 0.6, 0.9];
            let powers = [1.0, 0.5, 2.0, 1.5];
            let t = HermitianToeplitz::from_atoms(&freqs, &powers, l);
            let d = vandermonde_decompose(&t, 1e-6).unwrap();
            assert_eq!(d.rank(), 4, "L={l}");
            assert!(d.residual < 1e-6, "L={l} residual {}", d.residual);
            for &f in &freqs {
                let best = d
                    .frequencies
                    .iter()
                    .map(|&g| wrap_dist(g, f))
                    .fold(f64::MAX, f64::min);
                assert!(best < 1e-7, "L={l} freq {f} err {best}");
            }
        }
    }

    #[test]
    fn trace_equals_total_power_times_length() {
        let freqs = [0.2, 0.7];
        let powers = [1.3, 0.4];
        let l = 8;
        let t = HermitianToeplitz::from_atoms(&freqs, &powers, l);
        let total: f64 = powers.iter().sum();
        assert!((t.trace() - total * l as f64).abs() < 1e-10);
        let _ = Array2::<Complex64>::zeros((1, 1));
    }
}
